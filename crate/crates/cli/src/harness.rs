use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use pbcn_reach::eval::{
    dp_max_reach, exact_q_table, greedy_policy, max_reach_from, mc_policy_eval, mean_error_series,
    reachable_keys, ErrorReference, ErrorSeries, McEstimate, DEFAULT_MAX_NODES,
};
use pbcn_reach::horizon::HorizonSpec;
use pbcn_reach::learner::{tl_init, train, ErrorLogging, RunLog, TlMode, TrainSpec};
use pbcn_reach::model::{PackedState, PbcnModel};
use pbcn_reach::qstore::{QStore, StoreKind};

use crate::config::{ReferenceSource, RunConfig};
use crate::error::{CliError, Result};

/// Mixed into a repeat's seed to get its evaluation seed.
const EVAL_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn eval_seed(run_seed: u64) -> u64 {
    run_seed ^ EVAL_SEED_SALT
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(CliError::io(path))?,
    ))
}

fn write_with(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(CliError::io(path))
}

pub fn load_table(path: &Path, kind: StoreKind) -> Result<QStore> {
    let file = File::open(path).map_err(CliError::io(path))?;
    QStore::load(BufReader::new(file), kind)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn save_table(q: &QStore, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    q.save(&mut w)?;
    w.flush().map_err(CliError::io(path))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Everything derived from a config that a run needs.
pub struct Resolved {
    pub model: PbcnModel,
    pub x0: PackedState,
    pub xd: PackedState,
    pub horizon: HorizonSpec,
}

impl Resolved {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let model = cfg.model.load()?;
        let x0 = PackedState::from_bit_string(&cfg.x0, model.n())?;
        let xd = PackedState::from_bit_string(&cfg.xd, model.n())?;
        let horizon = cfg.horizon.build()?;
        Ok(Self {
            model,
            x0,
            xd,
            horizon,
        })
    }

    /// Exact optimum from `x0`, when some oracle can afford it.
    pub fn p_star(&self) -> Option<f64> {
        if self.model.n() <= DEFAULT_MAX_NODES {
            let reach = dp_max_reach(&self.model, self.xd, &self.horizon).ok()?;
            return Some(reach.p_star(self.x0, 0));
        }
        max_reach_from(&self.model, self.x0, self.xd, &self.horizon)
            .ok()
            .map(|r| r.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub policy_id: String,
    pub estimate: McEstimate,
    pub p_star: Option<f64>,
}

pub fn write_eval_csv(path: &Path, rows: &[EvalRow]) -> Result<()> {
    write_with(path, |w| {
        writeln!(
            w,
            "policy_id,p_hat,ci_halfwidth,p_star_if_available,mean_steps"
        )?;
        for r in rows {
            let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.policy_id,
                r.estimate.success_rate,
                r.estimate.ci_halfwidth,
                opt(r.p_star),
                opt(r.estimate.mean_steps_given_success)
            )?;
        }
        Ok(())
    })
}

fn write_training_log(path: &Path, log: &RunLog) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "episode,return,steps,epsilon,alpha,success")?;
        for r in &log.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.episode,
                r.ret,
                r.steps,
                r.epsilon,
                r.alpha,
                u8::from(r.success)
            )?;
        }
        Ok(())
    })
}

fn write_error_log(path: &Path, header: &str, points: &[(u64, f64)]) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "episode,{header}")?;
        for (ep, v) in points {
            writeln!(w, "{ep},{v}")?;
        }
        Ok(())
    })
}

/// Reads an `episode,<value>` CSV written by this harness.
pub fn read_error_log(path: &Path) -> Result<Vec<(u64, f64)>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(e, v)| Some((e.parse().ok()?, v.parse().ok()?)));
        out.push(parsed.ok_or_else(|| {
            CliError::Invalid(format!(
                "{}:{}: expected `episode,value`",
                path.display(),
                i + 1
            ))
        })?);
    }
    Ok(out)
}

fn build_reference(cfg: &RunConfig, run: &Resolved) -> Result<Option<ErrorReference>> {
    let ref_episodes = cfg.error_reference_episodes.unwrap_or(cfg.episodes);
    let visits = |fallback: Option<&PathBuf>| -> Result<Option<QStore>> {
        cfg.error_visits
            .as_ref()
            .or(fallback)
            .map(|p| load_table(p, StoreKind::Sparse))
            .transpose()
    };
    let reference = match &cfg.error_reference {
        ReferenceSource::None => return Ok(None),
        ReferenceSource::Exact => {
            let exact = exact_q_table(&run.model, run.xd, &run.horizon)?;
            match visits(None)? {
                Some(counts) => {
                    ErrorReference::new(&exact, &counts, cfg.error_threshold, ref_episodes)?
                }
                None => {
                    let keys = reachable_keys(&run.model, run.x0, run.xd, &run.horizon)?;
                    ErrorReference::with_keys(&exact, keys)
                }
            }
        }
        ReferenceSource::File(path) => {
            let table = load_table(path, StoreKind::Sparse)?;
            table.check_compatible(&run.model)?;
            let counts = visits(Some(path))?.expect("reference file doubles as visit table");
            ErrorReference::new(&table, &counts, cfg.error_threshold, ref_episodes)?
        }
    };
    Ok(Some(reference))
}

fn build_initial_table(cfg: &RunConfig, run: &Resolved) -> Result<Option<QStore>> {
    if cfg.tl_mode == TlMode::None {
        return Ok(None);
    }
    let path = cfg.tl_source.as_ref().expect("validated with tl.mode");
    let source = load_table(path, StoreKind::Sparse)?;
    source.check_compatible(&run.model)?;
    let target = source.meta().t_max + cfg.tl_a;
    if target != run.horizon.t_max() {
        return Err(CliError::Invalid(format!(
            "transfer source has horizon {} and a = {}, giving {target}, but the run's horizon ends at {}",
            source.meta().t_max,
            cfg.tl_a,
            run.horizon.t_max()
        )));
    }
    Ok(Some(tl_init(&source, cfg.tl_mode, cfg.tl_a, cfg.store)?))
}

#[derive(Debug, Clone)]
pub struct RepeatSummary {
    pub rd: u32,
    pub seed: u64,
    pub eval: Option<McEstimate>,
    pub errors: Vec<(u64, f64)>,
    pub rows: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub out: PathBuf,
    pub repeats: Vec<RepeatSummary>,
    pub p_star: Option<f64>,
    pub error_series: Option<ErrorSeries>,
}

pub fn repeat_dir(rd: u32) -> String {
    format!("rep_{rd:03}")
}

/// Runs every repeat of `cfg` and writes its artifacts under `cfg.out`.
pub fn run_training(cfg: &RunConfig) -> Result<TrainReport> {
    let run = Resolved::new(cfg)?;
    let schedule = cfg.schedule()?;
    let init = build_initial_table(cfg, &run)?;
    let reference = build_reference(cfg, &run)?;
    fs::create_dir_all(&cfg.out).map_err(CliError::io(&cfg.out))?;
    write_with(&cfg.out.join("config.txt"), |w| write!(w, "{cfg}"))?;

    let mut repeats: Vec<RepeatSummary> = (1..=cfg.repeats)
        .into_par_iter()
        .map(|rd| -> Result<RepeatSummary> {
            let seed = cfg.repeat_seed(rd);
            let spec = TrainSpec {
                model: &run.model,
                x0: run.x0,
                xd: run.xd,
                horizon: &run.horizon,
                schedule,
                store: cfg.store,
                gamma: cfg.gamma,
                seed,
            };
            let logging = reference.as_ref().map(|r| ErrorLogging {
                reference: r,
                every: cfg.error_every,
            });
            let (q, log) = train(&spec, init.clone(), logging)?;
            let dir = cfg.out.join(repeat_dir(rd));
            save_table(&q, &dir.join("qtable.txt"))?;
            write_training_log(&dir.join("training_log.csv"), &log)?;
            if reference.is_some() {
                write_error_log(&dir.join("error_log.csv"), "L", &log.errors)?;
            }
            let eval = if cfg.eval_rollouts > 0 {
                Some(mc_policy_eval(
                    &run.model,
                    greedy_policy(&q),
                    run.x0,
                    run.xd,
                    &run.horizon,
                    cfg.eval_rollouts,
                    eval_seed(seed),
                )?)
            } else {
                None
            };
            Ok(RepeatSummary {
                rd,
                seed,
                eval,
                success_rate: log.success_rate(),
                errors: log.errors,
                rows: q.row_count(),
            })
        })
        .collect::<Result<_>>()?;
    repeats.sort_by_key(|r| r.rd);

    let p_star = if cfg.eval_rollouts > 0 {
        run.p_star()
    } else {
        None
    };
    if cfg.eval_rollouts > 0 {
        let rows: Vec<EvalRow> = repeats
            .iter()
            .map(|r| EvalRow {
                policy_id: repeat_dir(r.rd),
                estimate: r.eval.expect("evaluated"),
                p_star,
            })
            .collect();
        write_eval_csv(&cfg.out.join("eval.csv"), &rows)?;
    }
    let error_series = if reference.is_some() {
        let series: Vec<Vec<(u64, f64)>> = repeats.iter().map(|r| r.errors.clone()).collect();
        let merged = mean_error_series(&series)?;
        write_error_log(&cfg.out.join("error_log.csv"), "A_er", &merged.points)?;
        Some(merged)
    } else {
        None
    };
    write_manifest(cfg, &repeats)?;
    Ok(TrainReport {
        out: cfg.out.clone(),
        repeats,
        p_star,
        error_series,
    })
}

fn artifacts(out: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let mut stack = vec![PathBuf::new()];
    while let Some(rel) = stack.pop() {
        let dir = out.join(&rel);
        for entry in fs::read_dir(&dir).map_err(CliError::io(&dir))? {
            let entry = entry.map_err(CliError::io(&dir))?;
            let name = rel.join(entry.file_name());
            if entry
                .file_type()
                .map_err(CliError::io(entry.path()))?
                .is_dir()
            {
                stack.push(name);
            } else if name != Path::new("manifest.txt") {
                files.push(name.to_string_lossy().replace('\\', "/"));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn write_manifest(cfg: &RunConfig, repeats: &[RepeatSummary]) -> Result<()> {
    let config_hash = hex::encode(Sha256::digest(cfg.identity_text().as_bytes()));
    let files = artifacts(&cfg.out)?;
    let hashes = files
        .iter()
        .map(|f| sha256_file(&cfg.out.join(f)))
        .collect::<Result<Vec<_>>>()?;
    write_with(&cfg.out.join("manifest.txt"), |w| {
        writeln!(w, "config_sha256 {config_hash}")?;
        writeln!(w, "base_seed {}", cfg.seed)?;
        for r in repeats {
            writeln!(
                w,
                "repeat {} seed {} eval_seed {}",
                r.rd,
                r.seed,
                eval_seed(r.seed)
            )?;
        }
        for (f, h) in files.iter().zip(&hashes) {
            writeln!(w, "artifact {f} sha256 {h}")?;
        }
        Ok(())
    })
}

/// Checks every artifact hash listed in `out/manifest.txt`; returns the mismatching files.
pub fn verify_manifest(out: &Path) -> Result<Vec<String>> {
    let path = out.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    let mut bad = Vec::new();
    for line in text.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if let ["artifact", file, "sha256", hash] = parts[..] {
            let actual = sha256_file(&out.join(file)).ok();
            if actual.as_deref() != Some(hash) {
                bad.push(file.to_string());
            }
        }
    }
    Ok(bad)
}

/// Loads a table and rebuilds it for `cfg`'s network before evaluating it.
pub fn evaluate_table(
    cfg: &RunConfig,
    table: &Path,
    rollouts: usize,
    seed: u64,
) -> Result<EvalRow> {
    let run = Resolved::new(cfg)?;
    let q = load_table(table, StoreKind::Sparse)?;
    q.check_compatible(&run.model)?;
    let estimate = mc_policy_eval(
        &run.model,
        greedy_policy(&q),
        run.x0,
        run.xd,
        &run.horizon,
        rollouts,
        seed,
    )?;
    Ok(EvalRow {
        policy_id: table.display().to_string(),
        estimate,
        p_star: run.p_star(),
    })
}

pub fn tl_extend(
    source: &Path,
    mode: TlMode,
    a: u32,
    kind: StoreKind,
    out: &Path,
) -> Result<QStore> {
    let table = load_table(source, StoreKind::Sparse)?;
    let extended = tl_init(&table, mode, a, kind)?;
    save_table(&extended, out)?;
    Ok(extended)
}

/// Per-repeat `error_log.csv` files under `dir`: `rep_*/error_log.csv` when
/// present, otherwise `dir/error_log.csv` itself.
fn error_logs_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut reps: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("rep_"))
        .map(|e| e.path().join("error_log.csv"))
        .filter(|p| p.is_file())
        .collect();
    reps.sort();
    if reps.is_empty() {
        let single = dir.join("error_log.csv");
        if single.is_file() {
            reps.push(single);
        }
    }
    Ok(reps)
}

/// Mean error curve over every error log found in `dirs`.
pub fn compare(dirs: &[PathBuf], out: Option<&Path>) -> Result<ErrorSeries> {
    let mut series = Vec::new();
    for dir in dirs {
        let logs = error_logs_in(dir)?;
        if logs.is_empty() {
            return Err(CliError::Invalid(format!(
                "{}: no error_log.csv found",
                dir.display()
            )));
        }
        for log in logs {
            series.push(read_error_log(&log)?);
        }
    }
    let merged = mean_error_series(&series)?;
    if let Some(path) = out {
        write_error_log(path, "A_er", &merged.points)?;
    }
    Ok(merged)
}
