//! Offline planners for the optimal arm sequence.
//!
//! * [`exact_dp`] enumerates all `K^T` sequences (test oracle, small inputs).
//! * [`fptas_dp`] runs the `(reward, state)` frontier DP with an epsilon grid.
//! * [`sticky_dp`] is exact at `lambda = 1`, where the state is the end state of
//!   the previous arm; [`best_two_cycle`] gives its per-cycle value.
//! * [`benchmark_opt`] picks one of the above for a true instance.

mod exact;
mod fptas;

pub use exact::{exact_dp, static_best_arm, sticky_dp};
pub use fptas::{
    dominance_prune, fptas_dp, fptas_dp_with_stats, opt_lower_bound, FptasStats, PruneMode,
    ValueStatePair,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{ArmSpec, EnvError, Instance};

/// Largest number of sequences [`exact_dp`] enumerates by default.
pub const DEFAULT_EXACT_CAP: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Env(#[from] EnvError),

    #[error("exhaustive search over K^T = {k}^{t} sequences exceeds the cap of {cap}")]
    CapExceeded { k: usize, t: usize, cap: u64 },

    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("estimates deviate by {deviation} from the true arms, more than delta = {delta}")]
    PreconditionViolated { deviation: f64, delta: f64 },

    #[error("sticky optimum {opt} is not within 2 of floor(T/2) * best cycle = {cycle_bound}")]
    CrossCheck { opt: f64, cycle_bound: f64 },

    #[error("{0} requires lambda = {1}")]
    WrongRegime(&'static str, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanMethod {
    Exhaustive,
    Fptas { epsilon: f64 },
    Sticky,
    Static,
    Given,
}

/// An arm sequence together with its noiseless per-round states and rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub sequence: Vec<usize>,
    pub expected_total: f64,
    pub per_round_states: Vec<f64>,
    pub per_round_rewards: Vec<f64>,
    pub method: PlanMethod,
}

/// JSON export shape of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanExport {
    pub sequence: Vec<usize>,
    pub expected_total: f64,
}

impl Plan {
    /// Evaluates `sequence` on `instance`.
    pub fn from_sequence(instance: &Instance, sequence: Vec<usize>) -> Result<Self, EnvError> {
        let (states, _) = instance.evaluate(&sequence)?;
        let rewards: Vec<f64> = sequence
            .iter()
            .zip(&states)
            .map(|(&i, q)| instance.arms()[i].r * q)
            .collect();
        Ok(Self {
            expected_total: rewards.iter().sum(),
            sequence,
            per_round_states: states,
            per_round_rewards: rewards,
            method: PlanMethod::Given,
        })
    }

    fn with_method(mut self, method: PlanMethod) -> Self {
        self.method = method;
        self
    }

    pub fn export(&self) -> PlanExport {
        PlanExport {
            sequence: self.sequence.clone(),
            expected_total: self.expected_total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// `exact_dp` is used whenever `K^T` is at most this.
    pub exact_cap: u64,
    /// FPTAS precision; `None` means `1/T`.
    pub epsilon: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            exact_cap: DEFAULT_EXACT_CAP,
            epsilon: None,
        }
    }
}

pub(crate) fn sequence_count_within(k: usize, t: usize, cap: u64) -> bool {
    let mut count: u64 = 1;
    for _ in 0..t {
        count = match count.checked_mul(k as u64) {
            Some(c) if c <= cap => c,
            _ => return false,
        };
    }
    true
}

/// Benchmark plan for a true instance.
///
/// Exhaustive when `K^T <= exact_cap`; otherwise exact closed forms at
/// `lambda = 0` and `lambda = 1`, and the FPTAS in between. Every `lambda = 1`
/// optimum is checked against `floor(T/2) * best_two_cycle` with slack 2.
pub fn benchmark_opt(instance: &Instance, config: &PlannerConfig) -> Result<Plan, PlanError> {
    let k = instance.num_arms();
    let t = instance.horizon();
    let lambda = instance.lambda();
    let plan = if sequence_count_within(k, t, config.exact_cap) {
        exact_dp(instance, config.exact_cap)?
    } else if lambda == 0.0 {
        static_best_arm(instance)?
    } else if lambda == 1.0 {
        sticky_dp(instance)?
    } else {
        let epsilon = config.epsilon.unwrap_or(1.0 / t as f64);
        fptas_dp(instance, epsilon)?
    };
    if lambda == 1.0 {
        let (_, _, cycle) = best_two_cycle(instance.arms());
        let bound = (t / 2) as f64 * cycle;
        if (plan.expected_total - bound).abs() > 2.0 + 1e-9 {
            return Err(PlanError::CrossCheck {
                opt: plan.expected_total,
                cycle_bound: bound,
            });
        }
    }
    Ok(plan)
}

/// Best ordered pair `i <= j` by `r_i b_j + r_j b_i`, the reward of one
/// `i, j` cycle at `lambda = 1`. Ties go to the smallest `(i, j)`.
pub fn best_two_cycle(arms: &[ArmSpec]) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for i in 0..arms.len() {
        for j in i..arms.len() {
            let v = arms[i].r * arms[j].b + arms[j].r * arms[i].b;
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    best
}

/// Plans on `estimates` and checks the result against the true optimum:
/// `value_true(plan(estimates)) >= OPT - delta * T`.
///
/// Fails with [`PlanError::PreconditionViolated`] when some estimate is more
/// than `delta` away from its true parameter.
pub fn approx_input_guarantee_check(
    truth: &Instance,
    estimates: &[ArmSpec],
    delta: f64,
    config: &PlannerConfig,
) -> Result<bool, PlanError> {
    if estimates.len() != truth.num_arms() {
        return Err(EnvError::InvalidArm {
            arm: estimates.len(),
            num_arms: truth.num_arms(),
        }
        .into());
    }
    let deviation = truth
        .arms()
        .iter()
        .zip(estimates)
        .map(|(a, e)| (a.r - e.r).abs().max((a.b - e.b).abs()))
        .fold(0.0, f64::max);
    if deviation > delta + 1e-12 {
        return Err(PlanError::PreconditionViolated { deviation, delta });
    }
    let estimated =
        Instance::new(estimates.to_vec(), truth.lambda(), truth.horizon())?.with_q0(truth.q0())?;
    let plan = benchmark_opt(&estimated, config)?;
    let (_, achieved) = truth.evaluate(&plan.sequence)?;
    let opt = benchmark_opt(truth, config)?.expected_total;
    Ok(achieved >= opt - delta * truth.horizon() as f64 - 1e-9)
}
