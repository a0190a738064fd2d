//! Plain-text run configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Keys are grouped
//! by prefix (`schedule.`, `tl.`, `error.`, `eval.`). Every key except
//! `model`, `horizon` and `episodes` has a default, and builtin models
//! supply default start and goal states.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use pbcn_reach::horizon::HorizonSpec;
use pbcn_reach::learner::{LrVariant, ScheduleParams, TlMode};
use pbcn_reach::model::{builtin_lac_operon, builtin_tcell, parse_model, PackedState, PbcnModel};
use pbcn_reach::qstore::StoreKind;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    LacOperon,
    TCell,
    File(PathBuf),
}

impl ModelSource {
    pub fn parse(s: &str) -> Self {
        match s {
            "lac" | "lac_operon" => Self::LacOperon,
            "tcell" | "t_cell" => Self::TCell,
            path => Self::File(PathBuf::from(path)),
        }
    }

    pub fn load(&self) -> Result<PbcnModel> {
        match self {
            Self::LacOperon => Ok(builtin_lac_operon()),
            Self::TCell => Ok(builtin_tcell()),
            Self::File(path) => {
                let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
                Ok(parse_model(&text)?)
            }
        }
    }

    /// Start and goal states studied for the builtin networks.
    pub fn default_states(&self) -> Option<(&'static str, &'static str)> {
        match self {
            Self::LacOperon => Some(("000000000", "111111011")),
            Self::TCell => Some((
                "0000110000101000100100000000",
                "0000111000100000000110000110",
            )),
            Self::File(_) => None,
        }
    }
}

impl fmt::Display for ModelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LacOperon => f.write_str("lac"),
            Self::TCell => f.write_str("tcell"),
            Self::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Horizon as written in a config; `normal` keeps its parameters so the
/// effective config prints back the way it was written.
#[derive(Debug, Clone, PartialEq)]
pub enum HorizonConfig {
    Const(u32),
    Normal {
        mu: f64,
        sigma: f64,
        n_prime: u32,
        n_dprime: u32,
    },
    Table(Vec<(u32, f64)>),
}

impl HorizonConfig {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (kind, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
        let rest = rest.trim();
        match kind {
            "const" => rest
                .parse()
                .map(Self::Const)
                .map_err(|_| format!("`const` needs an integer horizon, got `{rest}`")),
            "normal" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err("`normal` takes <mu> <sigma> <nprime> <ndprime>".into());
                }
                let f = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|_| format!("`{s}` is not a number"))
                };
                let i = |s: &str| {
                    s.parse::<u32>()
                        .map_err(|_| format!("`{s}` is not a non-negative integer"))
                };
                Ok(Self::Normal {
                    mu: f(parts[0])?,
                    sigma: f(parts[1])?,
                    n_prime: i(parts[2])?,
                    n_dprime: i(parts[3])?,
                })
            }
            "table" => {
                let inner = rest
                    .strip_prefix('(')
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or("`table` expects (T:p, T:p, ...)")?;
                let mut entries = Vec::new();
                for item in inner.split(',') {
                    let (t, p) = item
                        .split_once(':')
                        .ok_or_else(|| format!("table entry `{}` is not T:p", item.trim()))?;
                    let t = t
                        .trim()
                        .parse()
                        .map_err(|_| format!("`{}` is not an integer horizon", t.trim()))?;
                    let p = p
                        .trim()
                        .parse()
                        .map_err(|_| format!("`{}` is not a probability", p.trim()))?;
                    entries.push((t, p));
                }
                Ok(Self::Table(entries))
            }
            other => Err(format!(
                "unknown horizon kind `{other}` (const, normal or table)"
            )),
        }
    }

    pub fn build(&self) -> pbcn_reach::Result<HorizonSpec> {
        match self {
            Self::Const(t) => HorizonSpec::constant(*t),
            Self::Normal {
                mu,
                sigma,
                n_prime,
                n_dprime,
            } => HorizonSpec::discretize_normal(*mu, *sigma, *n_prime, *n_dprime),
            Self::Table(entries) => HorizonSpec::distributed(entries.clone()),
        }
    }
}

impl fmt::Display for HorizonConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Const(t) => write!(f, "const {t}"),
            Self::Normal {
                mu,
                sigma,
                n_prime,
                n_dprime,
            } => write!(f, "normal {mu} {sigma} {n_prime} {n_dprime}"),
            Self::Table(entries) => {
                f.write_str("table (")?;
                for (i, (t, p)) in entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}:{p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Table the online error is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSource {
    None,
    /// Exact optimal table from backward induction.
    Exact,
    /// A saved Q-table file, typically the final table of a long run.
    File(PathBuf),
}

impl ReferenceSource {
    fn parse(s: &str) -> Self {
        match s {
            "none" => Self::None,
            "exact" => Self::Exact,
            path => Self::File(PathBuf::from(path)),
        }
    }
}

impl fmt::Display for ReferenceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::Exact => f.write_str("exact"),
            Self::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSource,
    pub x0: String,
    pub xd: String,
    pub horizon: HorizonConfig,
    pub episodes: u64,
    pub variant: LrVariant,
    pub omega_exp: f64,
    pub beta: f64,
    pub eps_floor: f64,
    pub store: StoreKind,
    pub gamma: f64,
    pub seed: u64,
    pub repeats: u32,
    pub out: PathBuf,
    pub tl_mode: TlMode,
    pub tl_source: Option<PathBuf>,
    pub tl_a: u32,
    pub error_reference: ReferenceSource,
    /// Table whose visit counters filter the reference; defaults to the reference file.
    pub error_visits: Option<PathBuf>,
    pub error_threshold: f64,
    pub error_every: u64,
    /// Episode count of the run that produced the visit counters; defaults to `episodes`.
    pub error_reference_episodes: Option<u64>,
    pub eval_rollouts: usize,
}

const KEYS: &[&str] = &[
    "model",
    "x0",
    "xd",
    "horizon",
    "episodes",
    "schedule.variant",
    "schedule.omega_exp",
    "schedule.beta",
    "schedule.eps_floor",
    "store",
    "gamma",
    "seed",
    "repeats",
    "out",
    "tl.mode",
    "tl.source",
    "tl.a",
    "error.reference",
    "error.visits",
    "error.threshold",
    "error.every",
    "error.reference_episodes",
    "eval.rollouts",
];

/// Accepts plain integers and integral scientific notation (`3e5`).
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("`{s}` is not a finite number"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: HashMap<&'static str, (usize, String)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| CliError::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| CliError::Config {
                    line,
                    message: format!("unknown key `{key}`"),
                })?;
            if let Some((first, _)) = values.get(known) {
                return Err(CliError::Config {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
            if value.is_empty() {
                return Err(CliError::Config {
                    line,
                    message: format!("empty value for `{key}`"),
                });
            }
            values.insert(known, (line, value.to_string()));
        }

        let line_of = |key: &str| values.get(key).map_or(0, |(l, _)| *l);
        let err = |key: &str, message: String| CliError::Config {
            line: line_of(key),
            message: format!("{key}: {message}"),
        };
        let get = |key: &str| values.get(key).map(|(_, v)| v.as_str());
        let required = |key: &str| {
            get(key).ok_or_else(|| CliError::MissingKey(format!("missing required key `{key}`")))
        };

        let model = ModelSource::parse(required("model")?);
        let loaded = model.load().map_err(|e| err("model", e.to_string()))?;
        let defaults = model.default_states();
        let state = |key: &str, fallback: Option<&str>| -> Result<String> {
            let bits = match (get(key), fallback) {
                (Some(v), _) => v,
                (None, Some(d)) => d,
                (None, None) => {
                    return Err(CliError::MissingKey(format!(
                        "missing `{key}` (required for models loaded from files)"
                    )))
                }
            };
            PackedState::from_bit_string(bits, loaded.n()).map_err(|e| err(key, e.to_string()))?;
            Ok(bits.to_string())
        };
        let x0 = state("x0", defaults.map(|d| d.0))?;
        let xd = state("xd", defaults.map(|d| d.1))?;

        let horizon = HorizonConfig::parse(required("horizon")?).map_err(|m| err("horizon", m))?;
        horizon.build().map_err(|e| err("horizon", e.to_string()))?;

        let episodes = parse_count(required("episodes")?).map_err(|m| err("episodes", m))?;
        if episodes == 0 {
            return Err(err("episodes", "must be at least 1".into()));
        }

        let variant = match get("schedule.variant") {
            Some(v) => v
                .parse()
                .map_err(|e: pbcn_reach::Error| err("schedule.variant", e.to_string()))?,
            None => LrVariant::HarmonicBeta,
        };
        let float = |key: &str, default: f64| -> Result<f64> {
            get(key).map_or(Ok(default), |v| parse_f64(v).map_err(|m| err(key, m)))
        };
        let omega_exp = float("schedule.omega_exp", 0.54)?;
        if !(omega_exp > 0.5 && omega_exp <= 1.0) {
            return Err(err("schedule.omega_exp", "must lie in (0.5, 1]".into()));
        }
        let beta = float("schedule.beta", 0.001)?;
        if beta <= 0.0 {
            return Err(err("schedule.beta", "must be positive".into()));
        }
        let eps_floor = float("schedule.eps_floor", ScheduleParams::DEFAULT_EPS_FLOOR)?;
        if !(0.0..=1.0).contains(&eps_floor) {
            return Err(err("schedule.eps_floor", "must lie in [0, 1]".into()));
        }

        let store = match get("store") {
            Some(v) => v
                .parse()
                .map_err(|e: pbcn_reach::Error| err("store", e.to_string()))?,
            None => StoreKind::Dense,
        };
        let gamma = float("gamma", 1.0)?;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(err("gamma", "must lie in [0, 1]".into()));
        }
        let count = |key: &str, default: u64| -> Result<u64> {
            get(key).map_or(Ok(default), |v| parse_count(v).map_err(|m| err(key, m)))
        };
        let seed = count("seed", 0)?;
        let repeats = count("repeats", 1)?;
        if repeats == 0 || repeats > 9999 {
            return Err(err("repeats", "must lie in 1..=9999".into()));
        }
        let out = PathBuf::from(get("out").unwrap_or("out"));

        let tl_mode = match get("tl.mode") {
            Some(v) => v
                .parse()
                .map_err(|e: pbcn_reach::Error| err("tl.mode", e.to_string()))?,
            None => TlMode::None,
        };
        let tl_source = get("tl.source").map(PathBuf::from);
        if tl_mode != TlMode::None && tl_source.is_none() {
            return Err(err("tl.mode", format!("`{tl_mode}` needs tl.source")));
        }
        let tl_a = count("tl.a", 1)?;
        if tl_a == 0 || tl_a > u64::from(u32::MAX) {
            return Err(err("tl.a", "must be a positive integer".into()));
        }

        let error_reference =
            get("error.reference").map_or(ReferenceSource::None, ReferenceSource::parse);
        let error_visits = get("error.visits").map(PathBuf::from);
        let error_threshold = float("error.threshold", 0.03)?;
        if !(0.0..=1.0).contains(&error_threshold) {
            return Err(err("error.threshold", "must lie in [0, 1]".into()));
        }
        let error_every = count("error.every", 1000)?;
        if error_every == 0 {
            return Err(err("error.every", "must be at least 1".into()));
        }
        let error_reference_episodes = get("error.reference_episodes")
            .map(|v| parse_count(v).map_err(|m| err("error.reference_episodes", m)))
            .transpose()?;
        let eval_rollouts = count("eval.rollouts", 100_000)? as usize;

        Ok(Self {
            model,
            x0,
            xd,
            horizon,
            episodes,
            variant,
            omega_exp,
            beta,
            eps_floor,
            store,
            gamma,
            seed,
            repeats: repeats as u32,
            out,
            tl_mode,
            tl_source,
            tl_a: tl_a as u32,
            error_reference,
            error_visits,
            error_threshold,
            error_every,
            error_reference_episodes,
            eval_rollouts,
        })
    }

    pub fn schedule(&self) -> pbcn_reach::Result<ScheduleParams> {
        ScheduleParams::with_eps_floor(
            self.variant,
            self.omega_exp,
            self.beta,
            self.episodes,
            self.eps_floor,
        )
    }

    /// Seed of repeat `rd` (1-based).
    pub fn repeat_seed(&self, rd: u32) -> u64 {
        self.seed.wrapping_add(u64::from(rd))
    }

    /// Effective config without the output directory; identifies the experiment.
    pub fn identity_text(&self) -> String {
        self.to_string()
            .lines()
            .filter(|l| !l.starts_with("out ="))
            .map(|l| format!("{l}\n"))
            .collect()
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model = {}", self.model)?;
        writeln!(f, "x0 = {}", self.x0)?;
        writeln!(f, "xd = {}", self.xd)?;
        writeln!(f, "horizon = {}", self.horizon)?;
        writeln!(f, "episodes = {}", self.episodes)?;
        writeln!(f, "schedule.variant = {}", self.variant)?;
        writeln!(f, "schedule.omega_exp = {}", self.omega_exp)?;
        writeln!(f, "schedule.beta = {}", self.beta)?;
        writeln!(f, "schedule.eps_floor = {}", self.eps_floor)?;
        writeln!(f, "store = {}", self.store)?;
        writeln!(f, "gamma = {}", self.gamma)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "repeats = {}", self.repeats)?;
        writeln!(f, "out = {}", self.out.display())?;
        writeln!(f, "tl.mode = {}", self.tl_mode)?;
        if let Some(src) = &self.tl_source {
            writeln!(f, "tl.source = {}", src.display())?;
        }
        writeln!(f, "tl.a = {}", self.tl_a)?;
        writeln!(f, "error.reference = {}", self.error_reference)?;
        if let Some(v) = &self.error_visits {
            writeln!(f, "error.visits = {}", v.display())?;
        }
        writeln!(f, "error.threshold = {}", self.error_threshold)?;
        writeln!(f, "error.every = {}", self.error_every)?;
        if let Some(n) = self.error_reference_episodes {
            writeln!(f, "error.reference_episodes = {n}")?;
        }
        writeln!(f, "eval.rollouts = {}", self.eval_rollouts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "model = lac\nhorizon = const 8\nepisodes = 3e5\n";

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.x0, "000000000");
        assert_eq!(c.xd, "111111011");
        assert_eq!(c.episodes, 300_000);
        assert_eq!(c.variant, LrVariant::HarmonicBeta);
        assert_eq!(c.omega_exp, 0.54);
        assert_eq!(c.store, StoreKind::Dense);
        assert_eq!(c.repeats, 1);
        assert_eq!(c.error_reference, ReferenceSource::None);
    }

    #[test]
    fn printed_config_parses_back() {
        let text = "\
model = tcell
horizon = normal 10 1 9 2
episodes = 2500000
schedule.variant = harmonic_3
store = sparse
seed = 7
repeats = 3
out = runs/x
tl.mode = duplicate_T
tl.source = src/q.txt
tl.a = 2
error.reference = exact
error.threshold = 0.05
error.reference_episodes = 100
eval.rollouts = 0
";
        let c = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&c.to_string()).unwrap();
        assert_eq!(c, again);
        let table = "model = lac\nhorizon = table (6:0.25, 7:0.75)\nepisodes = 10\n";
        let c = RunConfig::parse(table).unwrap();
        assert_eq!(c, RunConfig::parse(&c.to_string()).unwrap());
    }

    fn line_error(text: &str) -> (usize, String) {
        match RunConfig::parse(text) {
            Err(CliError::Config { line, message }) => (line, message),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_point_at_lines() {
        let (line, msg) = line_error("model = lac\nxd = 1111\nhorizon = const 8\nepisodes = 1\n");
        assert_eq!(line, 2);
        assert!(msg.contains("xd"), "{msg}");

        let (line, _) = line_error("model = lac\nhorizon = const 8\nepisodes = 1\nbogus = 3\n");
        assert_eq!(line, 4);
        let (line, msg) =
            line_error("model = lac\nhorizon = const 8\nepisodes = 1\nepisodes = 2\n");
        assert_eq!(line, 4);
        assert!(msg.contains("line 3"));
        let (line, _) = line_error("model = lac\nhorizon = const 8\n\n# c\nepisodes = 0\n");
        assert_eq!(line, 5);
        let (line, _) = line_error("model = lac\nhorizon = cosnt 8\nepisodes = 1\n");
        assert_eq!(line, 2);
        let (line, _) =
            line_error("model = lac\nhorizon = const 8\nepisodes = 1\nschedule.omega_exp = 0.5\n");
        assert_eq!(line, 4);
        let (line, _) =
            line_error("model = lac\nhorizon = const 8\nepisodes = 1\ntl.mode = pad_zero\n");
        assert_eq!(line, 4);
        let (line, _) = line_error("model = lac\nhorizon\n");
        assert_eq!(line, 2);
        assert!(matches!(
            RunConfig::parse("model = lac\nepisodes = 1\n"),
            Err(CliError::MissingKey(_))
        ));
    }

    #[test]
    fn file_models_need_states() {
        let dir = std::env::temp_dir().join(format!("pbcn-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("toy.pbcn");
        std::fs::write(
            &path,
            "nodes: 1\ninputs: 1\nnode 1:\n  0.8 :: u1\n  0.2 :: x1\n",
        )
        .unwrap();
        let base = format!(
            "model = {}\nhorizon = const 2\nepisodes = 10\n",
            path.display()
        );
        assert!(matches!(
            RunConfig::parse(&base),
            Err(CliError::MissingKey(_))
        ));
        let c = RunConfig::parse(&format!("{base}x0 = 0\nxd = 1\n")).unwrap();
        assert_eq!(c.model, ModelSource::File(path.clone()));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn horizon_syntax() {
        assert_eq!(
            HorizonConfig::parse("const 8").unwrap(),
            HorizonConfig::Const(8)
        );
        let n = HorizonConfig::parse("normal 8 1 7 2").unwrap();
        assert_eq!(n.to_string(), "normal 8 1 7 2");
        assert_eq!(n.build().unwrap().support().len(), 4);
        let t = HorizonConfig::parse("table (7:0.5, 8:0.5)").unwrap();
        assert_eq!(t, HorizonConfig::Table(vec![(7, 0.5), (8, 0.5)]));
        assert!(HorizonConfig::parse("table 7:1").is_err());
        assert!(HorizonConfig::parse("normal 8 1").is_err());
    }
}
