//! Policy verification: the exact oracle, Monte-Carlo evaluation, and
//! training metrics.

mod metrics;
mod oracle;
mod rollout;

pub use metrics::{
    avg_reward_window, mean_error_series, value_to_prob, ErrorReference, ErrorSeries,
};
pub use oracle::{
    dp_max_reach, dp_max_reach_capped, exact_q_table, max_reach_from, reachable_keys,
    transition_row, ReachTable, DEFAULT_MAX_NODES, DEFAULT_MAX_REACHABLE,
};
pub use rollout::{greedy_policy, mc_policy_eval, McEstimate};
