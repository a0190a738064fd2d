//! ε-greedy tabular Q-learning over time-augmented states, with optional
//! transfer-learning warm starts and online error tracking.

use rand::Rng;

use crate::env::EpisodeEnv;
use crate::error::{Error, Result};
use crate::eval::ErrorReference;
use crate::horizon::HorizonSpec;
use crate::model::{PackedInput, PackedState, PbcnModel};
use crate::qstore::{argmax, QKey, QStore, StoreKind, TableMeta};
use crate::rng::stream;

/// Learning-rate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrVariant {
    /// `α = min{1, 1/(β·ep)^ω}`
    HarmonicBeta,
    /// `α = min{1, 3/(ep+1)^ω}`
    Harmonic3,
}

impl std::str::FromStr for LrVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic_beta" => Ok(Self::HarmonicBeta),
            "harmonic_3" => Ok(Self::Harmonic3),
            other => Err(Error::InvalidParameter(format!(
                "unknown schedule variant `{other}` (expected harmonic_beta or harmonic_3)"
            ))),
        }
    }
}

impl std::fmt::Display for LrVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::HarmonicBeta => "harmonic_beta",
            Self::Harmonic3 => "harmonic_3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    omega_exp: f64,
    beta: f64,
    variant: LrVariant,
    episodes: u64,
    eps_floor: f64,
}

impl ScheduleParams {
    pub const DEFAULT_EPS_FLOOR: f64 = 0.01;

    pub fn new(variant: LrVariant, omega_exp: f64, beta: f64, episodes: u64) -> Result<Self> {
        Self::with_eps_floor(variant, omega_exp, beta, episodes, Self::DEFAULT_EPS_FLOOR)
    }

    pub fn with_eps_floor(
        variant: LrVariant,
        omega_exp: f64,
        beta: f64,
        episodes: u64,
        eps_floor: f64,
    ) -> Result<Self> {
        if !(omega_exp > 0.5 && omega_exp <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "omega_exp must lie in (0.5, 1], got {omega_exp}"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if episodes == 0 {
            return Err(Error::InvalidParameter(
                "episode count must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&eps_floor) {
            return Err(Error::InvalidParameter(format!(
                "eps_floor must lie in [0, 1], got {eps_floor}"
            )));
        }
        Ok(Self {
            omega_exp,
            beta,
            variant,
            episodes,
            eps_floor,
        })
    }

    pub fn omega_exp(&self) -> f64 {
        self.omega_exp
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn variant(&self) -> LrVariant {
        self.variant
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn eps_floor(&self) -> f64 {
        self.eps_floor
    }

    /// Learning rate for episode `ep`; `ep = 0` clamps to 1 for `HarmonicBeta`.
    pub fn lr(&self, ep: u64) -> f64 {
        let raw = match self.variant {
            LrVariant::HarmonicBeta => {
                if ep == 0 {
                    return 1.0;
                }
                1.0 / (self.beta * ep as f64).powf(self.omega_exp)
            }
            LrVariant::Harmonic3 => 3.0 / ((ep + 1) as f64).powf(self.omega_exp),
        };
        raw.min(1.0)
    }

    /// Linear decay from 1 at `ep = 0` to `eps_floor` at `ep = N`.
    pub fn epsilon(&self, ep: u64) -> f64 {
        let frac = ep as f64 / self.episodes as f64;
        (1.0 - (1.0 - self.eps_floor) * frac).clamp(self.eps_floor, 1.0)
    }
}

/// ε-greedy choice: uniform over all actions with probability `epsilon`,
/// otherwise the table's greedy action.
pub fn select_action<R: Rng + ?Sized>(
    q: &QStore,
    key: QKey,
    epsilon: f64,
    rng: &mut R,
) -> PackedInput {
    let m = q.meta().m;
    if rng.gen::<f64>() < epsilon {
        PackedInput::new(rng.gen_range(0..q.n_actions() as u64), m)
    } else {
        q.best_action(key).0
    }
}

/// One temporal-difference update of `Q(key, action)`; returns the new value.
///
/// Terminal transitions (goal reached or horizon expired) do not bootstrap.
#[allow(clippy::too_many_arguments)]
pub fn td_update(
    q: &mut QStore,
    key: QKey,
    action: usize,
    reward: f64,
    next_key: QKey,
    terminal: bool,
    alpha: f64,
    gamma: f64,
) -> Result<f64> {
    let target = if terminal {
        reward
    } else {
        reward + gamma * q.best_action(next_key).1
    };
    let old = q.get(key, action)?;
    let new = (1.0 - alpha) * old + alpha * target;
    q.set(key, action, new)?;
    Ok(new)
}

/// How the new time slices of an extended table are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlMode {
    None,
    /// New slices start at 0.
    PadZero,
    /// New slices copy the source's last decision slice.
    DuplicateT,
}

impl std::str::FromStr for TlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "pad_zero" | "pad" | "1" => Ok(Self::PadZero),
            "duplicate_T" | "duplicate" | "2" => Ok(Self::DuplicateT),
            other => Err(Error::InvalidParameter(format!(
                "unknown transfer mode `{other}` (expected none, pad_zero or duplicate_T)"
            ))),
        }
    }
}

impl std::fmt::Display for TlMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::PadZero => "pad_zero",
            Self::DuplicateT => "duplicate_T",
        })
    }
}

/// Builds the initial table for horizon `source_T + a` from a table trained
/// with horizon `source_T` (the source's `t_max`).
///
/// Every source row keeps its `(x, t)` position and values. Actions are
/// taken at `t = 0..T-1`, so the last slice that carries values is
/// `source_T - 1`; the slices `source_T..source_T + a - 1`, which become
/// decision times under the longer horizon, are left at 0 (`PadZero`) or
/// filled with that slice (`DuplicateT`). Visit counts start at 0.
pub fn tl_init(source: &QStore, mode: TlMode, a: u32, kind: StoreKind) -> Result<QStore> {
    if a == 0 {
        return Err(Error::InvalidParameter(
            "transfer extension a must be at least 1".into(),
        ));
    }
    let src = source.meta();
    let source_t = src.t_max;
    let t_max = source_t
        .checked_add(a)
        .ok_or_else(|| Error::InvalidParameter("extended horizon overflows".into()))?;
    let meta = TableMeta { t_max, ..src };
    let mut q = QStore::new(kind, meta)?;
    if mode == TlMode::None {
        return Ok(q);
    }
    for (key, _, row) in source.stored_rows() {
        q.set_row(key, row)?;
    }
    if mode == TlMode::DuplicateT && source_t > 0 {
        for (key, _, row) in source.stored_rows() {
            if key.t + 1 != source_t {
                continue;
            }
            for t in source_t..t_max {
                q.set_row(QKey::new(key.state, t), row)?;
            }
        }
    }
    q.reset_visits();
    Ok(q)
}

/// Per-episode telemetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub ret: f64,
    pub steps: u32,
    pub epsilon: f64,
    pub alpha: f64,
    pub success: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<EpisodeRecord>,
    /// `(episode, L)` after that many completed episodes, starting at 0.
    pub errors: Vec<(u64, f64)>,
}

impl RunLog {
    pub fn returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ret).collect()
    }

    pub fn success_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.success).count() as f64 / self.records.len() as f64
    }
}

/// Online distance to a reference table, computed every `every` episodes.
#[derive(Debug, Clone, Copy)]
pub struct ErrorLogging<'a> {
    pub reference: &'a ErrorReference,
    pub every: u64,
}

impl<'a> ErrorLogging<'a> {
    pub const DEFAULT_EVERY: u64 = 1000;

    pub fn new(reference: &'a ErrorReference) -> Self {
        Self {
            reference,
            every: Self::DEFAULT_EVERY,
        }
    }
}

/// Everything a training run needs besides the initial table.
#[derive(Debug, Clone, Copy)]
pub struct TrainSpec<'a> {
    pub model: &'a PbcnModel,
    pub x0: PackedState,
    pub xd: PackedState,
    pub horizon: &'a HorizonSpec,
    pub schedule: ScheduleParams,
    pub store: StoreKind,
    pub gamma: f64,
    pub seed: u64,
}

impl TrainSpec<'_> {
    /// Shape of the table this run trains.
    pub fn meta(&self) -> TableMeta {
        TableMeta::for_model(self.model, self.horizon.t_max())
    }
}

/// Runs `N` episodes of ε-greedy Q-learning.
///
/// Episodes are numbered `1..=N`; episode `ep` uses `α = lr(ep)` and
/// `ε = epsilon(ep)` throughout. Every arrival, including the reset state
/// and terminal states, counts as a visit. `init` (for example from
/// [`tl_init`]) replaces the all-zero starting table and is converted to
/// the requested store kind.
pub fn train(
    spec: &TrainSpec<'_>,
    init: Option<QStore>,
    errors: Option<ErrorLogging<'_>>,
) -> Result<(QStore, RunLog)> {
    if !(0.0..=1.0).contains(&spec.gamma) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in [0, 1], got {}",
            spec.gamma
        )));
    }
    let meta = spec.meta();
    let mut q = match init {
        Some(table) => {
            if table.meta() != meta {
                let got = table.meta();
                return Err(Error::MetadataMismatch(format!(
                    "initial table has n={} m={} tmax={}, run needs n={} m={} tmax={}",
                    got.n, got.m, got.t_max, meta.n, meta.m, meta.t_max
                )));
            }
            if table.kind() == spec.store {
                table
            } else {
                table.to_kind(spec.store)?
            }
        }
        None => QStore::new(spec.store, meta)?,
    };
    if let Some(e) = errors {
        if e.every == 0 {
            return Err(Error::InvalidParameter(
                "error cadence must be at least 1".into(),
            ));
        }
    }

    let mut env = EpisodeEnv::new(spec.model, spec.horizon, spec.x0, spec.xd)?;
    let mut rng = stream(spec.seed);
    let n_actions = meta.n_actions() as u64;
    let episodes = spec.schedule.episodes();
    let mut log = RunLog {
        records: Vec::with_capacity(episodes as usize),
        errors: Vec::new(),
    };
    if let Some(e) = errors {
        log.errors.push((0, e.reference.distance(&q)?));
    }

    for ep in 1..=episodes {
        let alpha = spec.schedule.lr(ep);
        let epsilon = spec.schedule.epsilon(ep);
        let start = env.reset(&mut rng);
        let mut row = q.visit(start.into())?;
        let mut ret = 0.0;
        let mut steps = 0u32;
        while !env.is_done() {
            let action = if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..n_actions) as usize
            } else {
                argmax(q.row(row)).0
            };
            let out = env.step(PackedInput::new(action as u64, meta.m), &mut rng)?;
            steps += 1;
            let reward = f64::from(out.reward);
            ret += reward;
            let next = q.visit(out.next.into())?;
            let target = if out.done {
                reward
            } else {
                reward + spec.gamma * argmax(q.row(next)).1
            };
            let cell = &mut q.row_mut(row)[action];
            *cell = (1.0 - alpha) * *cell + alpha * target;
            row = next;
        }
        log.records.push(EpisodeRecord {
            episode: ep,
            ret,
            steps,
            epsilon,
            alpha,
            success: env.succeeded(),
        });
        if let Some(e) = errors {
            if ep % e.every == 0 {
                log.errors.push((ep, e.reference.distance(&q)?));
            }
        }
    }
    Ok((q, log))
}
