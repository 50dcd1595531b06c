//! Online learners.
//!
//! A learner talks to the environment only through a [`Simulator`]: it sees the
//! number of arms, the horizon, the evolution rate and the 0/1 rewards of its
//! own pulls.

mod etc;
mod exp3p;
mod sticky;
mod unknown_lambda;

pub use etc::{n_lambda, tune_etc, EtcKnown, EtcOverrides, EtcReport, EtcTuning, EtcUnknown};
pub use exp3p::{Exp3p, Exp3pParams};
pub use sticky::{
    smart_switch_exploration, BatchRecord, BatchedSticky, BatchedStickyOverrides,
    BatchedStickyReport, MetaArm, SwitchOutcome,
};
pub use unknown_lambda::{
    alt_limit_state, estimate_lambda, lambda_from_probes, Branch, LambdaEstimate, UnknownLambda,
    UnknownLambdaOverrides, UnknownLambdaReport,
};

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{EnvError, Instance, Simulator};
use crate::evaluation::Trajectory;
use crate::planner::{Plan, PlanError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error(transparent)]
    Env(#[from] EnvError),

    #[error(transparent)]
    Plan(#[from] PlanError),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "EXP3.P needs gamma < 1; with K = {k} this requires T >= {min_horizon}, got {horizon}"
    )]
    HorizonTooShort {
        k: usize,
        horizon: usize,
        min_horizon: usize,
    },

    #[error("probe means are indistinguishable (denominator {0:e}); lambda cannot be estimated")]
    DegenerateProbe(f64),

    #[error("lambda = {0} is handled by another regime")]
    WrongRegime(f64),

    #[error("learner emitted {emitted} actions for a horizon of {horizon}")]
    IncompleteRun { emitted: usize, horizon: usize },
}

/// An online algorithm that plays a full episode.
pub trait Learner {
    fn name(&self) -> &str;

    /// Plays every remaining round of `sim`. Randomness of the algorithm itself
    /// comes from `rng`; reward draws come from the simulator's own stream.
    fn play(&mut self, sim: &mut Simulator, rng: &mut dyn RngCore) -> Result<(), LearnerError>;

    /// Learner-specific diagnostics of the last run.
    fn report(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    /// Runs a fresh episode and checks that exactly `T` actions were emitted.
    fn run(
        &mut self,
        instance: &Instance,
        env_rng: ChaCha8Rng,
        rng: &mut dyn RngCore,
    ) -> Result<Trajectory, LearnerError> {
        let mut sim = Simulator::new(instance, env_rng);
        self.play(&mut sim, rng)?;
        if sim.remaining() != 0 {
            return Err(LearnerError::IncompleteRun {
                emitted: sim.round(),
                horizon: sim.horizon(),
            });
        }
        Ok(sim.finish())
    }
}

/// Round-by-round view of a learner.
pub trait Policy {
    fn next_arm(&mut self, rng: &mut dyn RngCore) -> usize;
    fn observe(&mut self, arm: usize, reward: u8);
}

/// Drives a [`Policy`] until the simulator runs out of rounds.
pub fn play_policy<P: Policy + ?Sized>(
    policy: &mut P,
    sim: &mut Simulator,
    rng: &mut dyn RngCore,
) -> Result<(), LearnerError> {
    while sim.remaining() > 0 {
        let arm = policy.next_arm(rng);
        let reward = sim.pull(arm)?;
        policy.observe(arm, reward);
    }
    Ok(())
}

/// Draws an index from the probability vector `p` with one uniform variate.
pub fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // Rounding left `acc` slightly below 1; take the last arm with mass.
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(0)
}

/// Replays a fixed arm sequence, typically a benchmark plan.
#[derive(Debug, Clone)]
pub struct FixedPlan {
    sequence: Vec<usize>,
}

impl FixedPlan {
    pub fn new(sequence: Vec<usize>) -> Self {
        Self { sequence }
    }

    pub fn from_plan(plan: &Plan) -> Self {
        Self::new(plan.sequence.clone())
    }
}

impl Learner for FixedPlan {
    fn name(&self) -> &str {
        "fixed_plan"
    }

    fn play(&mut self, sim: &mut Simulator, _rng: &mut dyn RngCore) -> Result<(), LearnerError> {
        if self.sequence.len() != sim.remaining() {
            return Err(LearnerError::InvalidParameter(format!(
                "plan has {} rounds but {} remain",
                self.sequence.len(),
                sim.remaining()
            )));
        }
        for &arm in &self.sequence {
            sim.pull(arm)?;
        }
        Ok(())
    }
}

/// Repeats `arm` for `n` rounds and returns the sum of rewards.
pub(crate) fn repeat(sim: &mut Simulator, arm: usize, n: usize) -> Result<u32, EnvError> {
    let mut total = 0;
    for _ in 0..n {
        total += u32::from(sim.pull(arm)?);
    }
    Ok(total)
}

/// Plays the only arm until the horizon.
pub(crate) fn play_single_arm(sim: &mut Simulator) -> Result<(), EnvError> {
    let n = sim.remaining();
    repeat(sim, 0, n).map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn sampling_follows_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = [0.2, 0.0, 0.8];
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[sample_index(&p, &mut rng)] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!((counts[0] as f64 / 1e5 - 0.2).abs() < 0.01);
    }

    #[test]
    fn fixed_plan_replays() {
        let inst = Instance::from_pairs(&[(0.5, 1.0), (0.7, 0.7)], 1.0, 4).unwrap();
        let mut learner = FixedPlan::new(vec![0, 1, 0, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let traj = learner
            .run(&inst, ChaCha8Rng::seed_from_u64(0), &mut rng)
            .unwrap();
        assert_eq!(traj.arms, vec![0, 1, 0, 1]);
        assert!((traj.expected_total() - 2.25).abs() < 1e-12);
    }

    #[test]
    fn fixed_plan_length_mismatch() {
        let inst = Instance::from_pairs(&[(0.5, 1.0)], 1.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = FixedPlan::new(vec![0; 3]).run(&inst, ChaCha8Rng::seed_from_u64(0), &mut rng);
        assert!(matches!(err, Err(LearnerError::InvalidParameter(_))));
    }
}
