use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn pbcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbcn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn small_config(dir: &Path, out: &Path) -> String {
    let text = format!(
        "model = lac\nhorizon = const 8\nepisodes = 2000\nrepeats = 2\n\
         error.reference = exact\nerror.every = 500\neval.rollouts = 2000\nout = {}\n",
        out.display()
    );
    let path = dir.join("small.conf");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn train_writes_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let config = small_config(tmp.path(), &out);
    stdout(&pbcn(&["train", "--config", &config, "--threads", "2"]));

    for file in ["config.txt", "eval.csv", "error_log.csv", "manifest.txt"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    for rep in ["rep_001", "rep_002"] {
        for file in ["qtable.txt", "training_log.csv", "error_log.csv"] {
            assert!(out.join(rep).join(file).is_file(), "{rep}/{file} missing");
        }
    }
    let log = fs::read_to_string(out.join("rep_001/training_log.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(
        lines.next(),
        Some("episode,return,steps,epsilon,alpha,success")
    );
    assert_eq!(lines.count(), 2000);

    let eval = fs::read_to_string(out.join("eval.csv")).unwrap();
    let rows: Vec<&str> = eval.lines().collect();
    assert_eq!(
        rows[0],
        "policy_id,p_hat,ci_halfwidth,p_star_if_available,mean_steps"
    );
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("rep_001,"));
    let p_star: f64 = rows[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!((p_star - 0.714).abs() < 1e-9);

    let errors = fs::read_to_string(out.join("error_log.csv")).unwrap();
    let points: Vec<&str> = errors.lines().collect();
    assert_eq!(points[0], "episode,A_er");
    let episodes: Vec<u64> = points[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(episodes, [0, 500, 1000, 1500, 2000]);

    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("config_sha256 "));
    assert!(manifest.contains("base_seed 0\n"));
    assert!(manifest.contains("repeat 2 seed 2 eval_seed "));
    assert!(manifest.contains("artifact rep_002/qtable.txt sha256 "));
}

#[test]
fn training_is_deterministic_and_verifiable() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let config = small_config(tmp.path(), &a);
    stdout(&pbcn(&["train", "--config", &config, "--threads", "1"]));
    stdout(&pbcn(&[
        "train",
        "--config",
        &config,
        "--out",
        b.to_str().unwrap(),
        "--threads",
        "3",
    ]));
    for file in [
        "rep_001/qtable.txt",
        "rep_002/qtable.txt",
        "rep_001/training_log.csv",
        "eval.csv",
        "error_log.csv",
    ] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file} differs"
        );
    }
    // The output directory is not part of the config hash.
    let hash = |dir: &Path| {
        fs::read_to_string(dir.join("manifest.txt"))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(hash(&a), hash(&b));

    assert!(stdout(&pbcn(&["verify", a.to_str().unwrap()])).contains("all artifacts match"));
    fs::write(a.join("rep_001/qtable.txt"), "tampered").unwrap();
    let out = pbcn(&["verify", a.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rep_001/qtable.txt"));

    let c = tmp.path().join("c");
    stdout(&pbcn(&[
        "train",
        "--config",
        &config,
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "9",
    ]));
    assert_ne!(
        fs::read(b.join("rep_001/qtable.txt")).unwrap(),
        fs::read(c.join("rep_001/qtable.txt")).unwrap()
    );
}

#[test]
fn wrong_goal_width_is_reported_with_its_line() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.conf");
    fs::write(
        &path,
        "model = lac\nhorizon = const 8\nxd = 1111\nepisodes = 10\n",
    )
    .unwrap();
    let out = pbcn(&["train", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("9 bits"), "{err}");
}

#[test]
fn oracle_reports_lac_optimum() {
    let text = stdout(&pbcn(&["oracle", "--model", "lac", "--T", "8"]));
    assert!(text.contains("p*(x0, 0) = 0.714000000000"), "{text}");
    let text = stdout(&pbcn(&["oracle", "--model", "tcell", "--T", "9"]));
    assert!(text.contains("0.992187500000"), "{text}");
}

#[test]
fn oracle_on_a_model_file_dumps_and_emits() {
    let tmp = TempDir::new().unwrap();
    let model = tmp.path().join("toy.pbcn");
    fs::write(
        &model,
        "nodes: 1\ninputs: 1\nnode 1:\n  0.8 :: u1\n  0.2 :: x1\n",
    )
    .unwrap();
    let dump = tmp.path().join("dump.csv");
    let q = tmp.path().join("q.txt");
    let text = stdout(&pbcn(&[
        "oracle",
        "--model",
        model.to_str().unwrap(),
        "--T",
        "2",
        "--x0",
        "0",
        "--xd",
        "1",
        "--dump",
        dump.to_str().unwrap(),
        "--emit-q",
        q.to_str().unwrap(),
    ]));
    assert!(text.contains("0.960000000000"), "{text}");
    let dump = fs::read_to_string(dump).unwrap();
    assert!(dump.starts_with("state,t,p_star,best_action\n"));
    assert!(dump.contains("\n0,1,0.8,1\n"), "{dump}");
    let q = fs::read_to_string(q).unwrap();
    assert!(q.starts_with("n=1 m=1 tmax=2\n"));

    let missing = pbcn(&["oracle", "--model", model.to_str().unwrap(), "--T", "2"]);
    assert!(!missing.status.success());
}

#[test]
fn tl_extend_duplicates_the_last_decision_slice() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("src");
    let config = tmp.path().join("src.conf");
    fs::write(
        &config,
        format!(
            "model = lac\nhorizon = const 7\nepisodes = 3000\neval.rollouts = 0\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    stdout(&pbcn(&["train", "--config", config.to_str().unwrap()]));
    let source = out.join("rep_001/qtable.txt");
    let ext = tmp.path().join("t8.txt");
    stdout(&pbcn(&[
        "tl-extend",
        "--source",
        source.to_str().unwrap(),
        "--method",
        "duplicate",
        "--a",
        "1",
        "--out",
        ext.to_str().unwrap(),
    ]));
    let rows = |path: &Path| -> Vec<(String, u32, Vec<String>)> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (
                    f[0].to_string(),
                    f[1].parse().unwrap(),
                    f[3..].iter().map(|s| s.to_string()).collect(),
                )
            })
            .collect()
    };
    let header = fs::read_to_string(&ext).unwrap();
    assert!(header.starts_with("n=9 m=2 tmax=8\n"));
    let src = rows(&source);
    let new = rows(&ext);
    let slice = |rows: &[(String, u32, Vec<String>)], t: u32| {
        let mut v: Vec<(String, Vec<String>)> = rows
            .iter()
            .filter(|r| r.1 == t)
            .map(|r| (r.0.clone(), r.2.clone()))
            .collect();
        v.sort();
        v
    };
    let last = slice(&src, 6);
    assert!(!last.is_empty());
    // t = 7 holds the copied t = 6 rows plus the source's terminal arrivals,
    // which stay at zero.
    let new_last = slice(&new, 7);
    for row in &last {
        assert!(new_last.contains(row), "{} not duplicated", row.0);
    }
    for (state, values) in &new_last {
        if !last.iter().any(|r| &r.0 == state) {
            assert!(values.iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
        }
    }
    for t in 0..=6 {
        assert_eq!(slice(&new, t), slice(&src, t));
    }

    let pad = tmp.path().join("pad.txt");
    stdout(&pbcn(&[
        "tl-extend",
        "--source",
        source.to_str().unwrap(),
        "--method",
        "pad",
        "--a",
        "2",
        "--out",
        pad.to_str().unwrap(),
    ]));
    assert!(fs::read_to_string(&pad)
        .unwrap()
        .starts_with("n=9 m=2 tmax=9\n"));
    let padded = rows(&pad);
    assert!(padded
        .iter()
        .filter(|r| r.1 >= 7)
        .all(|r| r.2.iter().all(|v| v.parse::<f64>().unwrap() == 0.0)));
    assert_eq!(slice(&padded, 6), last);
}

#[test]
fn compare_averages_repeat_logs() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    for (rep, values) in [("rep_001", [4.0, 2.0]), ("rep_002", [2.0, 1.0])] {
        fs::create_dir_all(run.join(rep)).unwrap();
        fs::write(
            run.join(rep).join("error_log.csv"),
            format!("episode,L\n0,{}\n100,{}\n", values[0], values[1]),
        )
        .unwrap();
    }
    let merged = tmp.path().join("merged.csv");
    stdout(&pbcn(&[
        "compare",
        run.to_str().unwrap(),
        "--out",
        merged.to_str().unwrap(),
    ]));
    assert_eq!(
        fs::read_to_string(merged).unwrap(),
        "episode,A_er\n0,3\n100,1.5\n"
    );

    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert!(!pbcn(&["compare", empty.to_str().unwrap()]).status.success());
}

#[test]
fn eval_prints_one_csv_row() {
    let tmp = TempDir::new().unwrap();
    let model = tmp.path().join("toy.pbcn");
    fs::write(
        &model,
        "nodes: 1\ninputs: 1\nnode 1:\n  0.8 :: u1\n  0.2 :: x1\n",
    )
    .unwrap();
    let q = tmp.path().join("q.txt");
    stdout(&pbcn(&[
        "oracle",
        "--model",
        model.to_str().unwrap(),
        "--T",
        "2",
        "--x0",
        "0",
        "--xd",
        "1",
        "--emit-q",
        q.to_str().unwrap(),
    ]));
    let config = tmp.path().join("toy.conf");
    fs::write(
        &config,
        format!(
            "model = {}\nx0 = 0\nxd = 1\nhorizon = const 2\nepisodes = 1\n",
            model.display()
        ),
    )
    .unwrap();
    let text = stdout(&pbcn(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--qtable",
        q.to_str().unwrap(),
        "--rollouts",
        "100000",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    let p_hat: f64 = fields[1].parse().unwrap();
    assert!((p_hat - 0.96).abs() < 0.004, "{p_hat}");
    assert!((fields[3].parse::<f64>().unwrap() - 0.96).abs() < 1e-12);
}

#[test]
fn presets_are_listed_and_printable() {
    let names = stdout(&pbcn(&["presets"]));
    assert!(names.lines().any(|l| l == "experiment2_tl2"));
    let text = stdout(&pbcn(&["presets", "experiment3_case1"]));
    assert!(text.contains("model = tcell"));
    assert!(!pbcn(&["presets", "nope"]).status.success());
}
