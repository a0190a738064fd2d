use rayon::prelude::*;

use crate::env::{EpisodeEnv, TimeState};
use crate::error::{Error, Result};
use crate::horizon::HorizonSpec;
use crate::model::{PackedInput, PackedState, PbcnModel};
use crate::qstore::{QKey, QStore};
use crate::rng::sub_stream;

/// Rollouts sharing one random stream; keeps results independent of the thread count.
const ROLLOUT_CHUNK: usize = 1024;

/// Greedy policy of a table: lowest-index argmax, action 0 on unseen keys.
pub fn greedy_policy(q: &QStore) -> impl Fn(TimeState) -> PackedInput + Sync + '_ {
    move |s: TimeState| q.best_action(QKey::from(s)).0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub success_rate: f64,
    /// Half-width of the normal-approximation 95% binomial interval.
    pub ci_halfwidth: f64,
    /// Mean number of transitions among successful rollouts; `None` if none succeeded.
    pub mean_steps_given_success: Option<f64>,
    pub rollouts: usize,
}

/// Estimates the reach probability of `policy` from `x0`.
///
/// Rollout `i` uses sub-stream `i / 1024` of `seed`, so the estimate is
/// reproducible regardless of how rayon schedules the work.
pub fn mc_policy_eval<P>(
    model: &PbcnModel,
    policy: P,
    x0: PackedState,
    xd: PackedState,
    horizon: &HorizonSpec,
    n_rollouts: usize,
    seed: u64,
) -> Result<McEstimate>
where
    P: Fn(TimeState) -> PackedInput + Sync,
{
    if n_rollouts == 0 {
        return Err(Error::InvalidParameter(
            "n_rollouts must be at least 1".into(),
        ));
    }
    // Validate widths once up front.
    EpisodeEnv::new(model, horizon, x0, xd)?;
    let chunks = n_rollouts.div_ceil(ROLLOUT_CHUNK);
    let (successes, steps) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = sub_stream(seed, c as u64);
            let mut env = EpisodeEnv::new(model, horizon, x0, xd).expect("validated");
            let count = ROLLOUT_CHUNK.min(n_rollouts - c * ROLLOUT_CHUNK);
            let mut successes = 0u64;
            let mut steps = 0u64;
            for _ in 0..count {
                env.reset(&mut rng);
                let mut taken = 0u64;
                while !env.is_done() {
                    let action = policy(env.current());
                    env.step(action, &mut rng).expect("episode is running");
                    taken += 1;
                }
                if env.succeeded() {
                    successes += 1;
                    steps += taken;
                }
            }
            (successes, steps)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let p = successes as f64 / n_rollouts as f64;
    Ok(McEstimate {
        success_rate: p,
        ci_halfwidth: 1.96 * (p * (1.0 - p) / n_rollouts as f64).sqrt(),
        mean_steps_given_success: (successes > 0).then(|| steps as f64 / successes as f64),
        rollouts: n_rollouts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::dp_max_reach;
    use crate::model::{u, x, NodeRule};
    use crate::qstore::{StoreKind, TableMeta};

    fn toy() -> PbcnModel {
        PbcnModel::new(
            1,
            1,
            vec![NodeRule::new(1, vec![(u(1), 0.8), (x(1), 0.2)]).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn dp_optimal_policy_on_toy() {
        let model = toy();
        let (x0, xd) = (model.state(0), model.state(1));
        let horizon = HorizonSpec::Constant(2);
        let reach = dp_max_reach(&model, xd, &horizon).unwrap();
        let est = mc_policy_eval(
            &model,
            |s: TimeState| reach.best_action(s.state, s.t),
            x0,
            xd,
            &horizon,
            100_000,
            17,
        )
        .unwrap();
        assert!((est.success_rate - 0.96).abs() < 0.004, "{est:?}");
        let steps = est.mean_steps_given_success.unwrap();
        // Success at step 1 w.p. 0.8, at step 2 w.p. 0.16.
        assert!((steps - (0.8 + 2.0 * 0.16) / 0.96).abs() < 0.01);
    }

    #[test]
    fn always_zero_never_reaches() {
        let model = toy();
        let est = mc_policy_eval(
            &model,
            |_| model.input(0),
            model.state(0),
            model.state(1),
            &HorizonSpec::Constant(5),
            10_000,
            1,
        )
        .unwrap();
        assert_eq!(est.success_rate, 0.0);
        assert_eq!(est.mean_steps_given_success, None);
    }

    #[test]
    fn start_at_goal() {
        let model = toy();
        let est = mc_policy_eval(
            &model,
            |_| model.input(0),
            model.state(1),
            model.state(1),
            &HorizonSpec::Constant(5),
            100,
            1,
        )
        .unwrap();
        assert_eq!(est.success_rate, 1.0);
        assert_eq!(est.mean_steps_given_success, Some(0.0));
        assert_eq!(est.ci_halfwidth, 0.0);
    }

    #[test]
    fn greedy_policy_of_empty_table_is_action_zero() {
        let model = toy();
        let q = QStore::new(StoreKind::Sparse, TableMeta::for_model(&model, 3)).unwrap();
        let policy = greedy_policy(&q);
        for t in 0..3 {
            let s = TimeState {
                state: model.state(0),
                t,
            };
            assert_eq!(policy(s).bits(), 0);
        }
    }

    #[test]
    fn estimate_is_seed_deterministic() {
        let model = toy();
        let run = |seed| {
            mc_policy_eval(
                &model,
                |_| model.input(1),
                model.state(0),
                model.state(1),
                &HorizonSpec::Constant(1),
                5000,
                seed,
            )
            .unwrap()
        };
        assert_eq!(run(3), run(3));
        assert!(mc_policy_eval(
            &model,
            |_| model.input(1),
            model.state(0),
            model.state(1),
            &HorizonSpec::Constant(1),
            0,
            0
        )
        .is_err());
    }
}
