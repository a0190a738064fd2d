//! Episode horizons: a constant `T` or a discrete distribution over `T`.

use std::fmt;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const PROB_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum HorizonSpec {
    Constant(u32),
    /// Strictly increasing `T` values with their probabilities.
    Distributed(Vec<(u32, f64)>),
}

impl HorizonSpec {
    pub fn constant(t: u32) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidHorizon(
                "constant horizon must be at least 1".into(),
            ));
        }
        Ok(Self::Constant(t))
    }

    pub fn distributed(support: Vec<(u32, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidHorizon("empty support".into()));
        }
        if support[0].0 == 0 {
            return Err(Error::InvalidHorizon(
                "horizon values must be at least 1".into(),
            ));
        }
        if support.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidHorizon(
                "T values must be strictly increasing".into(),
            ));
        }
        if let Some(&(t, p)) = support.iter().find(|(_, p)| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidHorizon(format!("probability {p} for T={t}")));
        }
        let sum: f64 = support.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidHorizon(format!("probabilities sum to {sum}")));
        }
        Ok(Self::Distributed(support))
    }

    /// Discretises `N(mu, sigma²)` onto `{n′−1, n′, …, n′+n″}`.
    ///
    /// `n′−1` takes the mass of `(−∞, n′)`, `n′+k` the mass of
    /// `[n′+k, n′+k+1)` for `k < n″`, and `n′+n″` the mass of `[n′+n″, ∞)`.
    pub fn discretize_normal(mu: f64, sigma: f64, n_prime: u32, n_dprime: u32) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !mu.is_finite() {
            return Err(Error::InvalidHorizon(format!(
                "normal parameters mu={mu}, sigma={sigma}"
            )));
        }
        if n_dprime < 1 {
            return Err(Error::InvalidHorizon(
                "n'' must be at least 1 (empty support)".into(),
            ));
        }
        if n_prime < 2 {
            return Err(Error::InvalidHorizon(
                "n' must be at least 2 so the left tail maps to T >= 1".into(),
            ));
        }
        let normal = Normal::new(mu, sigma)
            .map_err(|e| Error::InvalidHorizon(format!("normal distribution: {e}")))?;
        let cuts: Vec<f64> = (0..=n_dprime)
            .map(|k| normal.cdf(f64::from(n_prime + k)))
            .collect();
        let mut support = Vec::with_capacity(n_dprime as usize + 2);
        support.push((n_prime - 1, cuts[0]));
        for k in 0..n_dprime {
            let i = k as usize;
            support.push((n_prime + k, cuts[i + 1] - cuts[i]));
        }
        support.push((n_prime + n_dprime, 1.0 - cuts[n_dprime as usize]));
        Self::distributed(support)
    }

    pub fn sample_t<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            HorizonSpec::Constant(t) => *t,
            HorizonSpec::Distributed(support) => {
                let r: f64 = rng.gen();
                let mut acc = 0.0;
                for &(t, p) in support {
                    acc += p;
                    if r < acc {
                        return t;
                    }
                }
                // Rounding left r above the final partial sum.
                support
                    .iter()
                    .rev()
                    .find(|(_, p)| *p > 0.0)
                    .map(|(t, _)| *t)
                    .unwrap_or(support[support.len() - 1].0)
            }
        }
    }

    pub fn t_max(&self) -> u32 {
        match self {
            HorizonSpec::Constant(t) => *t,
            HorizonSpec::Distributed(support) => support[support.len() - 1].0,
        }
    }

    pub fn t_min(&self) -> u32 {
        match self {
            HorizonSpec::Constant(t) => *t,
            HorizonSpec::Distributed(support) => support[0].0,
        }
    }

    pub fn support(&self) -> Vec<(u32, f64)> {
        match self {
            HorizonSpec::Constant(t) => vec![(*t, 1.0)],
            HorizonSpec::Distributed(s) => s.clone(),
        }
    }

    /// `P(T > t | T ≥ t)`: probability that an episode still running at
    /// time `t` continues past it. Zero when `P(T ≥ t) = 0`.
    pub fn continuation(&self, t: u32) -> f64 {
        match self {
            HorizonSpec::Constant(horizon) => {
                if t < *horizon {
                    1.0
                } else {
                    0.0
                }
            }
            HorizonSpec::Distributed(support) => {
                let at_least: f64 = support
                    .iter()
                    .filter(|(v, _)| *v >= t)
                    .map(|(_, p)| p)
                    .sum();
                let beyond: f64 = support.iter().filter(|(v, _)| *v > t).map(|(_, p)| p).sum();
                if at_least <= 0.0 {
                    0.0
                } else {
                    (beyond / at_least).clamp(0.0, 1.0)
                }
            }
        }
    }
}

impl fmt::Display for HorizonSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HorizonSpec::Constant(t) => write!(f, "const {t}"),
            HorizonSpec::Distributed(support) => {
                f.write_str("table (")?;
                for (i, (t, p)) in support.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}:{p:?}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    /// Standard normal CDF by composite Simpson quadrature of the density
    /// over [z_lo, z]; independent of the library's erf-based CDF.
    fn phi_quadrature(z: f64) -> f64 {
        let lo = -12.0;
        let n = 200_000;
        let h = (z - lo) / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut sum = pdf(lo) + pdf(z);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * pdf(lo + i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn normal_8_1_discretisation_matches_quadrature() {
        let spec = HorizonSpec::discretize_normal(8.0, 1.0, 7, 2).unwrap();
        let support = spec.support();
        let ts: Vec<u32> = support.iter().map(|s| s.0).collect();
        assert_eq!(ts, [6, 7, 8, 9]);
        let (m1, z0, p1) = (
            phi_quadrature(-1.0),
            phi_quadrature(0.0),
            phi_quadrature(1.0),
        );
        let expected = [m1, z0 - m1, p1 - z0, 1.0 - p1];
        // Frozen from the quadrature above: Φ(−1) = 0.158655…, Φ(0) = 0.5.
        assert!((m1 - 0.158_655_253_931_457).abs() < 1e-10);
        for ((_, p), e) in support.iter().zip(expected) {
            assert!((p - e).abs() < 1e-9, "{p} vs {e}");
        }
        let rounded = [0.1587, 0.3413, 0.3413, 0.1587];
        for ((_, p), r) in support.iter().zip(rounded) {
            assert!((p - r).abs() < 5e-4);
        }
        let sum: f64 = support.iter().map(|s| s.1).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_10_1_support() {
        let spec = HorizonSpec::discretize_normal(10.0, 1.0, 9, 2).unwrap();
        let ts: Vec<u32> = spec.support().iter().map(|s| s.0).collect();
        assert_eq!(ts, [8, 9, 10, 11]);
        assert_eq!(spec.t_max(), 11);
    }

    #[test]
    fn invalid_normal_parameters() {
        assert!(HorizonSpec::discretize_normal(8.0, 0.0, 7, 2).is_err());
        assert!(HorizonSpec::discretize_normal(8.0, -1.0, 7, 2).is_err());
        assert!(HorizonSpec::discretize_normal(8.0, 1.0, 7, 0).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(HorizonSpec::distributed(vec![]).is_err());
        assert!(HorizonSpec::distributed(vec![(7, 0.5), (6, 0.5)]).is_err());
        assert!(HorizonSpec::distributed(vec![(6, 0.5), (7, 0.6)]).is_err());
        assert!(HorizonSpec::distributed(vec![(6, -0.1), (7, 1.1)]).is_err());
        assert!(HorizonSpec::distributed(vec![(0, 1.0)]).is_err());
        assert!(HorizonSpec::constant(0).is_err());
        assert!(HorizonSpec::distributed(vec![(6, 0.1), (7, 0.2), (8, 0.7)]).is_ok());
    }

    #[test]
    fn t_max_examples() {
        assert_eq!(HorizonSpec::Constant(8).t_max(), 8);
        let d = HorizonSpec::discretize_normal(8.0, 1.0, 7, 2).unwrap();
        assert_eq!(d.t_max(), 9);
        let d = HorizonSpec::discretize_normal(10.0, 1.0, 9, 2).unwrap();
        assert_eq!(d.t_max(), 11);
    }

    #[test]
    fn constant_sampling_is_a_point_mass() {
        let spec = HorizonSpec::Constant(8);
        let mut rng = stream(3);
        assert!((0..1000).all(|_| spec.sample_t(&mut rng) == 8));
    }

    #[test]
    fn distributed_sampling_frequencies() {
        let spec = HorizonSpec::discretize_normal(8.0, 1.0, 7, 2).unwrap();
        let mut rng = stream(11);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        let mut max_seen = 0;
        for _ in 0..draws {
            let t = spec.sample_t(&mut rng);
            max_seen = max_seen.max(t);
            counts[(t - 6) as usize] += 1;
        }
        assert!(max_seen <= 9);
        for ((_, p), c) in spec.support().iter().zip(counts) {
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            let freq = c as f64 / draws as f64;
            assert!((freq - p).abs() < 3.0 * sd, "freq {freq} vs {p}");
        }
    }

    #[test]
    fn continuation_probabilities() {
        let c = HorizonSpec::Constant(3);
        assert_eq!(
            (0..5).map(|t| c.continuation(t)).collect::<Vec<_>>(),
            [1.0, 1.0, 1.0, 0.0, 0.0]
        );
        let d = HorizonSpec::distributed(vec![(2, 0.25), (3, 0.75)]).unwrap();
        assert_eq!(d.continuation(1), 1.0);
        assert_eq!(d.continuation(2), 0.75);
        assert_eq!(d.continuation(3), 0.0);
    }

    #[test]
    fn display_is_a_table_literal() {
        assert_eq!(HorizonSpec::Constant(8).to_string(), "const 8");
        let d = HorizonSpec::distributed(vec![(2, 0.25), (3, 0.75)]).unwrap();
        assert_eq!(d.to_string(), "table (2:0.25, 3:0.75)");
    }

    proptest! {
        #[test]
        fn discretisation_is_translation_consistent(
            mu in 2.0f64..40.0,
            sigma in 0.2f64..5.0,
            n_prime in 2u32..40,
            n_dprime in 1u32..6,
        ) {
            let a = HorizonSpec::discretize_normal(mu, sigma, n_prime, n_dprime).unwrap();
            let b = HorizonSpec::discretize_normal(mu + 1.0, sigma, n_prime + 1, n_dprime).unwrap();
            let (sa, sb) = (a.support(), b.support());
            prop_assert_eq!(sa.len(), n_dprime as usize + 2);
            for ((ta, pa), (tb, pb)) in sa.iter().zip(&sb) {
                prop_assert_eq!(ta + 1, *tb);
                prop_assert!(*pa >= 0.0);
                prop_assert!((pa - pb).abs() < 1e-12);
            }
            let sum: f64 = sa.iter().map(|s| s.1).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
