use crate::error::{Error, Result};
use crate::qstore::{QKey, QStore};

/// Reference table restricted to sufficiently visited keys.
///
/// The distance `L` between a table and the reference is the Euclidean
/// norm over every `(key, action)` entry of the retained keys; keys below
/// the visit threshold are dropped from both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReference {
    keys: Vec<QKey>,
    values: Vec<f64>,
    n_actions: usize,
    threshold_fraction: f64,
}

impl ErrorReference {
    /// Keeps keys of `reference` whose visit count (from `visit_counts`)
    /// is at least `threshold_fraction · total_episodes`.
    pub fn new(
        reference: &QStore,
        visit_counts: &QStore,
        threshold_fraction: f64,
        total_episodes: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold_fraction) {
            return Err(Error::InvalidParameter(format!(
                "visit threshold fraction {threshold_fraction} outside [0, 1]"
            )));
        }
        if reference.meta() != visit_counts.meta() {
            return Err(Error::MetadataMismatch(
                "reference and visit-count tables differ in shape".into(),
            ));
        }
        let min_visits = threshold_fraction * total_episodes as f64;
        let mut keys = Vec::new();
        let mut values = Vec::new();
        for key in visit_counts.visited_keys() {
            if (visit_counts.visits(key) as f64) < min_visits {
                continue;
            }
            keys.push(key);
            match reference.row_of(key) {
                Some(row) => values.extend_from_slice(row),
                None => values.extend(std::iter::repeat_n(0.0, reference.n_actions())),
            }
        }
        Ok(Self {
            keys,
            values,
            n_actions: reference.n_actions(),
            threshold_fraction,
        })
    }

    /// Uses the reference table's own visit counters for the filter.
    pub fn from_reference(
        reference: &QStore,
        threshold_fraction: f64,
        total_episodes: u64,
    ) -> Result<Self> {
        Self::new(reference, reference, threshold_fraction, total_episodes)
    }

    /// Compares every stored row of `reference` (no visit filter).
    pub fn unfiltered(reference: &QStore) -> Self {
        let mut keys = Vec::new();
        let mut values = Vec::new();
        for (key, _, row) in reference.stored_rows() {
            keys.push(key);
            values.extend_from_slice(row);
        }
        Self {
            keys,
            values,
            n_actions: reference.n_actions(),
            threshold_fraction: 0.0,
        }
    }

    /// Compares `reference` on an explicit key set.
    pub fn with_keys(reference: &QStore, keys: Vec<QKey>) -> Self {
        let mut values = Vec::with_capacity(keys.len() * reference.n_actions());
        for &key in &keys {
            match reference.row_of(key) {
                Some(row) => values.extend_from_slice(row),
                None => values.extend(std::iter::repeat_n(0.0, reference.n_actions())),
            }
        }
        Self {
            keys,
            values,
            n_actions: reference.n_actions(),
            threshold_fraction: 0.0,
        }
    }

    pub fn keys(&self) -> &[QKey] {
        &self.keys
    }

    pub fn threshold_fraction(&self) -> f64 {
        self.threshold_fraction
    }

    /// `L = ‖Q − Q_ref‖₂` over the retained entries; missing rows read as 0.
    pub fn distance(&self, q: &QStore) -> Result<f64> {
        if q.n_actions() != self.n_actions {
            return Err(Error::MetadataMismatch(format!(
                "table has {} actions, reference has {}",
                q.n_actions(),
                self.n_actions
            )));
        }
        let mut sum = 0.0;
        for (key, reference) in self
            .keys
            .iter()
            .zip(self.values.chunks_exact(self.n_actions))
        {
            match q.row_of(*key) {
                Some(row) => {
                    for (a, b) in row.iter().zip(reference) {
                        sum += (a - b) * (a - b);
                    }
                }
                None => sum += reference.iter().map(|b| b * b).sum::<f64>(),
            }
        }
        Ok(sum.sqrt())
    }
}

/// Mean error `A_er` per checkpoint across repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub points: Vec<(u64, f64)>,
    pub repeats: usize,
}

/// Averages per-repeat `(episode, L)` series that share checkpoints.
pub fn mean_error_series(per_repeat: &[Vec<(u64, f64)>]) -> Result<ErrorSeries> {
    let first = per_repeat
        .first()
        .ok_or_else(|| Error::InvalidParameter("no repeats to average".into()))?;
    for (rd, series) in per_repeat.iter().enumerate() {
        if series.len() != first.len() || series.iter().zip(first).any(|(a, b)| a.0 != b.0) {
            return Err(Error::MetadataMismatch(format!(
                "repeat {rd} checkpoints differ from repeat 0"
            )));
        }
    }
    let k = per_repeat.len() as f64;
    let points = first
        .iter()
        .enumerate()
        .map(|(i, (ep, _))| (*ep, per_repeat.iter().map(|s| s[i].1).sum::<f64>() / k))
        .collect();
    Ok(ErrorSeries {
        points,
        repeats: per_repeat.len(),
    })
}

/// Centred moving average of width `w`, truncated at both ends.
pub fn avg_reward_window(returns: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let left = (w - 1) / 2;
    let right = w - 1 - left;
    let mut prefix = Vec::with_capacity(returns.len() + 1);
    prefix.push(0.0);
    for r in returns {
        prefix.push(prefix.last().unwrap() + r);
    }
    (0..returns.len())
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right + 1).min(returns.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Converts an optimal value in the ±1 reward scale into a reach probability.
pub fn value_to_prob(v: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!(
            "value {v} outside [-1, 1]"
        )));
    }
    Ok((v + 1.0) / 2.0)
}
