use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pbcn_cli::config::{HorizonConfig, ModelSource, RunConfig};
use pbcn_cli::harness;
use pbcn_cli::{presets, CliError, Result};
use pbcn_reach::eval::{dp_max_reach, exact_q_table, max_reach_from, DEFAULT_MAX_NODES};
use pbcn_reach::learner::TlMode;
use pbcn_reach::model::PackedState;
use pbcn_reach::qstore::StoreKind;

#[derive(Parser)]
#[command(
    name = "pbcn",
    version,
    about = "Q-learning for finite-horizon reachability of probabilistic Boolean control networks"
)]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigSource {
    /// Run configuration file
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Name of a built-in configuration (see `pbcn presets`)
    #[arg(long)]
    preset: Option<String>,

    /// Overrides the base seed
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigSource {
    fn load(&self) -> Result<RunConfig> {
        let text = match (&self.config, &self.preset) {
            (Some(path), _) => std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?,
            (None, Some(name)) => presets::preset(name)
                .ok_or_else(|| CliError::Invalid(format!("unknown preset `{name}`")))?
                .to_string(),
            (None, None) => {
                return Err(CliError::Invalid(
                    "pass --config <path> or --preset <name>".into(),
                ))
            }
        };
        let mut cfg = RunConfig::parse(&text)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train every repeat of a configuration and write its artifacts
    Train {
        #[command(flatten)]
        source: ConfigSource,
    },
    /// Monte-Carlo success rate of a saved table's greedy policy
    Eval {
        #[command(flatten)]
        source: ConfigSource,
        /// Q-table file to evaluate
        #[arg(long)]
        qtable: PathBuf,
        /// Rollout count (defaults to the config's eval.rollouts)
        #[arg(long)]
        rollouts: Option<usize>,
    },
    /// Exact optimal reach probability by backward induction
    Oracle {
        /// lac, tcell, or a model file
        #[arg(long)]
        model: String,
        /// Constant horizon
        #[arg(long = "T", conflicts_with = "horizon")]
        t: Option<u32>,
        /// Horizon in config syntax, e.g. "normal 8 1 7 2"
        #[arg(long)]
        horizon: Option<String>,
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        xd: Option<String>,
        /// Write p*(x, t) and the maximising action for every key as CSV
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Write the exact optimal Q-table
        #[arg(long)]
        emit_q: Option<PathBuf>,
    },
    /// Extend a trained table to a longer horizon as a warm start
    TlExtend {
        /// Table trained with the shorter horizon
        #[arg(long)]
        source: PathBuf,
        /// pad (new times start at 0) or duplicate (copy the last decision time)
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 1)]
        a: u32,
        #[arg(long, default_value = "sparse")]
        store: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean error curve over run directories
    Compare {
        /// Run directories (their rep_*/error_log.csv files are averaged)
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in configurations, or print one
    Presets { name: Option<String> },
    /// Check the artifact hashes recorded in a run directory's manifest
    Verify { dir: PathBuf },
}

fn train(source: &ConfigSource) -> Result<()> {
    let cfg = source.load()?;
    let report = harness::run_training(&cfg)?;
    println!("wrote {}", report.out.display());
    for r in &report.repeats {
        let eval = r.eval.map_or_else(
            || "not evaluated".to_string(),
            |e| format!("p_hat {:.4} ± {:.4}", e.success_rate, e.ci_halfwidth),
        );
        println!(
            "{} seed {} rows {} train_success {:.4} {eval}",
            harness::repeat_dir(r.rd),
            r.seed,
            r.rows,
            r.success_rate
        );
    }
    if let Some(p) = report.p_star {
        println!("p* {p:.6}");
    }
    if let Some(series) = &report.error_series {
        if let (Some(first), Some(last)) = (series.points.first(), series.points.last()) {
            println!(
                "A_er {:.4} at {} -> {:.4} at {}",
                first.1, first.0, last.1, last.0
            );
        }
    }
    Ok(())
}

fn eval(source: &ConfigSource, qtable: &Path, rollouts: Option<usize>) -> Result<()> {
    let cfg = source.load()?;
    let rollouts = rollouts.unwrap_or(cfg.eval_rollouts).max(1);
    let row = harness::evaluate_table(&cfg, qtable, rollouts, harness::eval_seed(cfg.seed))?;
    println!("policy_id,p_hat,ci_halfwidth,p_star_if_available,mean_steps");
    println!(
        "{},{},{},{},{}",
        row.policy_id,
        row.estimate.success_rate,
        row.estimate.ci_halfwidth,
        row.p_star.map(|v| v.to_string()).unwrap_or_default(),
        row.estimate
            .mean_steps_given_success
            .map(|v| v.to_string())
            .unwrap_or_default()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn oracle(
    model: &str,
    t: Option<u32>,
    horizon: Option<&str>,
    x0: Option<&str>,
    xd: Option<&str>,
    dump: Option<&Path>,
    emit_q: Option<&Path>,
) -> Result<()> {
    let source = ModelSource::parse(model);
    let model = source.load()?;
    let horizon = match (t, horizon) {
        (Some(t), _) => HorizonConfig::Const(t),
        (None, Some(h)) => HorizonConfig::parse(h).map_err(CliError::Invalid)?,
        (None, None) => {
            return Err(CliError::Invalid(
                "pass --T <steps> or --horizon <spec>".into(),
            ))
        }
    }
    .build()?;
    let defaults = source.default_states();
    let state = |given: Option<&str>, default: Option<&str>, name: &str| -> Result<PackedState> {
        let bits = given
            .or(default)
            .ok_or_else(|| CliError::Invalid(format!("--{name} is required for model files")))?;
        Ok(PackedState::from_bit_string(bits, model.n())?)
    };
    let x0 = state(x0, defaults.map(|d| d.0), "x0")?;
    let xd = state(xd, defaults.map(|d| d.1), "xd")?;

    if model.n() > DEFAULT_MAX_NODES {
        if dump.is_some() || emit_q.is_some() {
            return Err(CliError::Invalid(format!(
                "full tables need n <= {DEFAULT_MAX_NODES}; this network has n = {}",
                model.n()
            )));
        }
        let (p, expanded) = max_reach_from(&model, x0, xd, &horizon)?;
        println!(
            "p*(x0, 0) = {p:.12}  ({expanded} reachable (state, time) pairs, horizon {horizon})"
        );
        return Ok(());
    }
    let reach = dp_max_reach(&model, xd, &horizon)?;
    println!(
        "p*(x0, 0) = {:.12}  best first action u = {}  (horizon {horizon})",
        reach.p_star(x0, 0),
        reach.best_action(x0, 0)
    );
    if let Some(path) = dump {
        let mut text = String::from("state,t,p_star,best_action\n");
        for bits in 0..(1u64 << model.n()) {
            let s = model.state(bits);
            for t in 0..=reach.t_max() {
                text.push_str(&format!(
                    "{s},{t},{},{}\n",
                    reach.p_star(s, t),
                    reach.best_action(s, t)
                ));
            }
        }
        std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    if let Some(path) = emit_q {
        harness::save_table(&exact_q_table(&model, xd, &horizon)?, path)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Train { source } => train(&source),
        Command::Eval {
            source,
            qtable,
            rollouts,
        } => eval(&source, &qtable, rollouts),
        Command::Oracle {
            model,
            t,
            horizon,
            x0,
            xd,
            dump,
            emit_q,
        } => oracle(
            &model,
            t,
            horizon.as_deref(),
            x0.as_deref(),
            xd.as_deref(),
            dump.as_deref(),
            emit_q.as_deref(),
        ),
        Command::TlExtend {
            source,
            method,
            a,
            store,
            out,
        } => {
            let mode: TlMode = method.parse()?;
            let kind: StoreKind = store.parse()?;
            let q = harness::tl_extend(&source, mode, a, kind, &out)?;
            println!(
                "wrote {} (tmax {}, {} rows)",
                out.display(),
                q.meta().t_max,
                q.row_count()
            );
            Ok(())
        }
        Command::Compare { dirs, out } => {
            let series = harness::compare(&dirs, out.as_deref())?;
            println!(
                "{} series averaged over {} checkpoints",
                series.repeats,
                series.points.len()
            );
            if let Some((ep, v)) = series.points.last() {
                println!("A_er {v:.6} at episode {ep}");
            }
            if let Some(out) = out {
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::Presets { name: None } => {
            for name in presets::names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Presets { name: Some(name) } => {
            let text = presets::preset(&name)
                .ok_or_else(|| CliError::Invalid(format!("unknown preset `{name}`")))?;
            print!("{text}");
            Ok(())
        }
        Command::Verify { dir } => {
            let bad = harness::verify_manifest(&dir)?;
            if bad.is_empty() {
                println!("all artifacts match {}", dir.join("manifest.txt").display());
                Ok(())
            } else {
                Err(CliError::Invalid(format!(
                    "hash mismatch: {}",
                    bad.join(", ")
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
