//! Exact maximum reachability probabilities by backward induction.
//!
//! For a state `x ≠ x_d` reached at time `t`,
//!
//! ```text
//! v(x, t) = c(t) · max_u Σ_{x'} P(x' | x, u) · [x' = x_d ? 1 : v(x', t+1)]
//! ```
//!
//! with `v(x_d, t) = 1`. Here `c(t) = P(T > t | T ≥ t)` is the probability
//! that an episode alive at `t` may still act: for a constant horizon it is
//! 1 before `T` and 0 at `T`, and for a random horizon it is read off the
//! support table. The agent only observes `(x, t)`, and conditioning on
//! survival up to `t` is all it knows about `T`, so this hazard-weighted
//! recursion is the optimum over time-dependent feedback policies.
//!
//! `P(x' | x, u)` is obtained by enumerating every combination of
//! per-node alternatives and summing the product probabilities of the
//! combinations that lead to the same `x'`.

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::horizon::HorizonSpec;
use crate::model::{PackedInput, PackedState, PbcnModel};
use crate::qstore::{QKey, QStore, StoreKind, TableMeta};

pub const DEFAULT_MAX_NODES: usize = 20;

/// Distribution of the successor of `(state, input)` as `(next bits, prob)`,
/// sorted by next state with duplicates merged.
pub fn transition_row(
    model: &PbcnModel,
    state: PackedState,
    input: PackedInput,
) -> Vec<(u64, f64)> {
    let stochastic: Vec<usize> = (0..model.n())
        .filter(|&i| model.rules()[i].is_stochastic())
        .collect();
    let mut choices = vec![0usize; model.n()];
    let mut out: Vec<(u64, f64)> = Vec::new();
    loop {
        let prob: f64 = stochastic
            .iter()
            .map(|&i| model.rules()[i].alternatives()[choices[i]].prob)
            .product();
        if prob > 0.0 {
            let next = model.step_with_choices(state, input, &choices);
            out.push((next.bits(), prob));
        }
        // Odometer over the stochastic nodes' alternative indices.
        let mut advanced = false;
        for &i in &stochastic {
            choices[i] += 1;
            if choices[i] < model.rules()[i].alternatives().len() {
                advanced = true;
                break;
            }
            choices[i] = 0;
        }
        if !advanced {
            break;
        }
    }
    out.sort_by_key(|e| e.0);
    out.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    out
}

/// Optimal reach probabilities and maximising actions for every `(x, t)`.
#[derive(Debug, Clone)]
pub struct ReachTable {
    n: usize,
    m: usize,
    t_max: u32,
    xd: PackedState,
    continuation: Vec<f64>,
    p_star: Vec<f64>,
    best: Vec<u32>,
}

impl ReachTable {
    fn idx(&self, state: PackedState, t: u32) -> usize {
        state.index() * (self.t_max as usize + 1) + t as usize
    }

    pub fn t_max(&self) -> u32 {
        self.t_max
    }

    pub fn goal(&self) -> PackedState {
        self.xd
    }

    /// `v(x, t)`: maximum probability of reaching the goal from state `x`
    /// observed at time `t`, including the chance that the episode ends at `t`.
    pub fn p_star(&self, state: PackedState, t: u32) -> f64 {
        if t > self.t_max {
            return if state == self.xd { 1.0 } else { 0.0 };
        }
        self.p_star[self.idx(state, t)]
    }

    /// Maximising action at `(x, t)` (lowest index among ties; 0 where no action is taken).
    pub fn best_action(&self, state: PackedState, t: u32) -> PackedInput {
        let a = if t > self.t_max {
            0
        } else {
            self.best[self.idx(state, t)]
        };
        PackedInput::new(u64::from(a), self.m)
    }

    /// `P(T > t | T ≥ t)` as used by the recursion.
    pub fn continuation(&self, t: u32) -> f64 {
        self.continuation.get(t as usize).copied().unwrap_or(0.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn check_size(model: &PbcnModel, horizon: &HorizonSpec, max_nodes: usize) -> Result<()> {
    if model.n() > max_nodes {
        return Err(Error::TooLarge(format!(
            "exact oracle limited to n <= {max_nodes}, model has n = {}",
            model.n()
        )));
    }
    let keys = (1usize << model.n()).checked_mul(horizon.t_max() as usize + 1);
    if keys.is_none_or(|k| k > 1 << 28) {
        return Err(Error::TooLarge("augmented state space too large".into()));
    }
    Ok(())
}

/// Per-action success probabilities `Σ P(x'|x,u)·[x' = x_d ? 1 : next(x')]`.
fn action_values(
    model: &PbcnModel,
    state: PackedState,
    xd: PackedState,
    next_value: impl Fn(u64) -> f64,
) -> Vec<f64> {
    (0..model.n_actions() as u64)
        .map(|a| {
            transition_row(model, state, model.input(a))
                .into_iter()
                .map(|(next, p)| {
                    let v = if next == xd.bits() {
                        1.0
                    } else {
                        next_value(next)
                    };
                    p * v
                })
                .sum()
        })
        .collect()
}

pub fn dp_max_reach(
    model: &PbcnModel,
    xd: PackedState,
    horizon: &HorizonSpec,
) -> Result<ReachTable> {
    dp_max_reach_capped(model, xd, horizon, DEFAULT_MAX_NODES)
}

pub fn dp_max_reach_capped(
    model: &PbcnModel,
    xd: PackedState,
    horizon: &HorizonSpec,
    max_nodes: usize,
) -> Result<ReachTable> {
    check_size(model, horizon, max_nodes)?;
    if xd.width() != model.n() {
        return Err(Error::WidthMismatch {
            expected: model.n(),
            actual: xd.width(),
        });
    }
    let t_max = horizon.t_max();
    let per_state = t_max as usize + 1;
    let states = 1usize << model.n();
    let continuation: Vec<f64> = (0..=t_max).map(|t| horizon.continuation(t)).collect();
    let mut p_star = vec![0.0; states * per_state];
    let mut best = vec![0u32; states * per_state];

    // Slice t depends only on slice t+1.
    let mut next_slice: Vec<f64> = vec![0.0; states];
    for t in (0..=t_max).rev() {
        let c = continuation[t as usize];
        let slice: Vec<(f64, u32)> = (0..states as u64)
            .into_par_iter()
            .map(|bits| {
                let state = model.state(bits);
                if state == xd {
                    return (1.0, 0);
                }
                if c <= 0.0 {
                    return (0.0, 0);
                }
                let values = action_values(model, state, xd, |next| next_slice[next as usize]);
                let (a, v) = crate::qstore::argmax(&values);
                (c * v, a as u32)
            })
            .collect();
        for (bits, (v, a)) in slice.iter().enumerate() {
            p_star[bits * per_state + t as usize] = *v;
            best[bits * per_state + t as usize] = *a;
        }
        next_slice = slice.into_iter().map(|(v, _)| v).collect();
    }

    Ok(ReachTable {
        n: model.n(),
        m: model.m(),
        t_max,
        xd,
        continuation,
        p_star,
        best,
    })
}

/// Exact optimal Q-table in the learner's reward scale.
///
/// Decision rows `(x, t)` with `x ≠ x_d` and `t < t_max` hold
/// `2·q(x,t,u) − 1`, where `q` is the success probability of taking `u`
/// and acting optimally afterwards. Goal and final-time rows are never
/// updated by the learner and stay 0.
pub fn exact_q_table(model: &PbcnModel, xd: PackedState, horizon: &HorizonSpec) -> Result<QStore> {
    let reach = dp_max_reach(model, xd, horizon)?;
    let t_max = horizon.t_max();
    let mut q = QStore::new(StoreKind::Dense, TableMeta::for_model(model, t_max))?;
    for bits in 0..(1u64 << model.n()) {
        let state = model.state(bits);
        if state == xd {
            continue;
        }
        for t in 0..t_max {
            let values = action_values(model, state, xd, |next| {
                reach.p_star(model.state(next), t + 1)
            });
            let row: Vec<f64> = values.iter().map(|q| 2.0 * q - 1.0).collect();
            q.set_row(QKey::new(state, t), &row)?;
        }
    }
    Ok(q)
}

pub const DEFAULT_MAX_REACHABLE: usize = 1 << 22;

/// States alive at each decision time `0..t_max` when starting from `x0`,
/// together with the successor rows of every expanded state.
struct ReachableLayers {
    layers: Vec<Vec<u64>>,
    rows: FxHashMap<u64, Vec<Vec<(u64, f64)>>>,
}

fn reachable_layers(
    model: &PbcnModel,
    x0: PackedState,
    xd: PackedState,
    t_max: u32,
    max_pairs: usize,
) -> Result<ReachableLayers> {
    for s in [x0, xd] {
        if s.width() != model.n() {
            return Err(Error::WidthMismatch {
                expected: model.n(),
                actual: s.width(),
            });
        }
    }
    let n_actions = model.n_actions() as u64;
    let mut layers: Vec<Vec<u64>> = Vec::new();
    let mut rows: FxHashMap<u64, Vec<Vec<(u64, f64)>>> = FxHashMap::default();
    let mut current = if x0 == xd {
        Vec::new()
    } else {
        vec![x0.bits()]
    };
    let mut pairs = 0;
    for _ in 0..t_max {
        pairs += current.len();
        if pairs > max_pairs {
            return Err(Error::TooLarge(format!(
                "more than {max_pairs} reachable (state, time) pairs"
            )));
        }
        let mut next: Vec<u64> = Vec::new();
        for &bits in &current {
            let per_action = rows.entry(bits).or_insert_with(|| {
                (0..n_actions)
                    .map(|a| transition_row(model, model.state(bits), model.input(a)))
                    .collect()
            });
            for row in per_action.iter() {
                next.extend(row.iter().map(|e| e.0).filter(|&b| b != xd.bits()));
            }
        }
        next.sort_unstable();
        next.dedup();
        layers.push(std::mem::replace(&mut current, next));
    }
    Ok(ReachableLayers { layers, rows })
}

/// Decision keys `(x, t)`, `t < t_max`, `x ≠ x_d`, that some action sequence
/// reaches from `x0` with positive probability.
pub fn reachable_keys(
    model: &PbcnModel,
    x0: PackedState,
    xd: PackedState,
    horizon: &HorizonSpec,
) -> Result<Vec<QKey>> {
    let r = reachable_layers(model, x0, xd, horizon.t_max(), DEFAULT_MAX_REACHABLE)?;
    Ok(r.layers
        .iter()
        .enumerate()
        .flat_map(|(t, layer)| {
            layer
                .iter()
                .map(move |&b| QKey::new(model.state(b), t as u32))
        })
        .collect())
}

/// Optimal reach probability from `x0` at `t = 0`, restricted to the
/// states reachable from `x0`.
///
/// Works for networks far beyond the full-table cap as long as the
/// reachable set stays below [`DEFAULT_MAX_REACHABLE`] pairs. Returns
/// `(p*, number of (x, t) pairs expanded)`.
pub fn max_reach_from(
    model: &PbcnModel,
    x0: PackedState,
    xd: PackedState,
    horizon: &HorizonSpec,
) -> Result<(f64, usize)> {
    let ReachableLayers { layers, rows } =
        reachable_layers(model, x0, xd, horizon.t_max(), DEFAULT_MAX_REACHABLE)?;
    if x0 == xd {
        return Ok((1.0, 0));
    }
    let mut value: FxHashMap<u64, f64> = FxHashMap::default();
    let mut expanded = 0;
    for (t, layer) in layers.iter().enumerate().rev() {
        let c = horizon.continuation(t as u32);
        let mut current = FxHashMap::default();
        for &bits in layer {
            let best = rows[&bits]
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&(next, p)| {
                            let v = if next == xd.bits() {
                                1.0
                            } else {
                                value.get(&next).copied().unwrap_or(0.0)
                            };
                            p * v
                        })
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            current.insert(bits, c * best);
        }
        expanded += current.len();
        value = current;
    }
    Ok((value.get(&x0.bits()).copied().unwrap_or(0.0), expanded))
}
