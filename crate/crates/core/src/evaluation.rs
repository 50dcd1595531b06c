//! Regret accounting.
//!
//! Both regret notions are computed from expected per-round rewards `r * q`
//! (never from the realized Bernoulli draws), so a fixed arm sequence always
//! produces the same curve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Instance;
use crate::planner::Plan;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("horizon mismatch: trajectory has {trajectory} rounds, benchmark has {benchmark}")]
    HorizonMismatch { trajectory: usize, benchmark: usize },

    #[error("cannot aggregate an empty set of curves")]
    Empty,

    #[error("curves have different lengths ({0} vs {1})")]
    UnequalCurves(usize, usize),

    #[error("checkpoint {0} is outside 1..={1}")]
    BadCheckpoint(usize, usize),
}

/// Markers a learner leaves when it had to deviate from its nominal schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryFlag {
    /// Exploration did not fit in the budget with the nominal tuning.
    BudgetDegraded {
        nominal_epsilon: f64,
        epsilon: f64,
        nominal_m: usize,
        m: usize,
    },
    /// The learner gave up on its own schedule and ran EXP3.P instead.
    FellBackToExp3p { reason: String },
    /// The unknown-lambda doubling loop stopped before two estimates agreed.
    DoublingCapReached { lambda_hat: f64 },
}

/// Per-round record of one learner run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub arms: Vec<usize>,
    pub realized: Vec<u8>,
    /// `r_{I_t} * q_t` with the noiseless state.
    pub expected: Vec<f64>,
    /// Noiseless state `q_t` at which round `t` was played.
    pub states: Vec<f64>,
    pub flags: Vec<TrajectoryFlag>,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            arms: Vec::with_capacity(n),
            realized: Vec::with_capacity(n),
            expected: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            flags: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, arm: usize, reward: u8, expected: f64, state: f64) {
        self.arms.push(arm);
        self.realized.push(reward);
        self.expected.push(expected);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn expected_total(&self) -> f64 {
        self.expected.iter().sum()
    }

    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// Cumulative DES and external regret of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub instance_id: String,
    pub algo: String,
    pub seed: u64,
    pub des_regret: Vec<f64>,
    pub external_regret: Vec<f64>,
}

impl RegretCurve {
    pub fn compute(
        instance_id: &str,
        algo: &str,
        seed: u64,
        trajectory: &Trajectory,
        benchmark: &Plan,
        instance: &Instance,
    ) -> Result<Self, EvalError> {
        Ok(Self {
            instance_id: instance_id.to_string(),
            algo: algo.to_string(),
            seed,
            des_regret: des_regret(trajectory, benchmark)?,
            external_regret: external_regret(trajectory, instance),
        })
    }

    pub fn horizon(&self) -> usize {
        self.des_regret.len()
    }
}

/// `sum_{s<=t} r_{pi*_s} q^{pi*}_s - sum_{s<=t} r_{I_s} q^{ALG}_s` for every `t`.
pub fn des_regret(trajectory: &Trajectory, benchmark: &Plan) -> Result<Vec<f64>, EvalError> {
    if trajectory.len() != benchmark.per_round_rewards.len() {
        return Err(EvalError::HorizonMismatch {
            trajectory: trajectory.len(),
            benchmark: benchmark.per_round_rewards.len(),
        });
    }
    let mut acc = 0.0;
    Ok(benchmark
        .per_round_rewards
        .iter()
        .zip(&trajectory.expected)
        .map(|(opt, alg)| {
            acc += opt - alg;
            acc
        })
        .collect())
}

/// Regret against the best fixed arm evaluated on the learner's own state sequence.
///
/// `max_i sum_{s<=t} r_i q_s = r_max * sum_{s<=t} q_s` because every `q_s >= 0`.
pub fn external_regret(trajectory: &Trajectory, instance: &Instance) -> Vec<f64> {
    let r_max = instance
        .arms()
        .iter()
        .map(|a| a.r)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut state_sum = 0.0;
    let mut earned = 0.0;
    trajectory
        .states
        .iter()
        .zip(&trajectory.expected)
        .map(|(q, e)| {
            state_sum += q;
            earned += e;
            r_max * state_sum - earned
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); zero for a single curve.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub t: usize,
    pub des_regret: Stats,
    pub external_regret: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub replications: usize,
    pub checkpoints: Vec<CheckpointStats>,
}

/// Powers of two up to `horizon`, plus `horizon` itself.
pub fn default_checkpoints(horizon: usize) -> Vec<usize> {
    let mut points: Vec<usize> = std::iter::successors(Some(1usize), |&p| p.checked_mul(2))
        .take_while(|&p| p <= horizon)
        .collect();
    if points.last() != Some(&horizon) {
        points.push(horizon);
    }
    points
}

#[derive(Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        if self.n == 0 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn finish(&self) -> Stats {
        let std = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stats {
            mean: self.mean,
            std,
            min: self.min,
            max: self.max,
        }
    }
}

/// Pointwise statistics of `curves` at the 1-based rounds in `checkpoints`
/// (`None` selects [`default_checkpoints`]).
pub fn aggregate(
    curves: &[RegretCurve],
    checkpoints: Option<&[usize]>,
) -> Result<RunSummary, EvalError> {
    let first = curves.first().ok_or(EvalError::Empty)?;
    let horizon = first.horizon();
    for c in curves {
        if c.horizon() != horizon || c.external_regret.len() != horizon {
            return Err(EvalError::UnequalCurves(horizon, c.horizon()));
        }
    }
    let points = match checkpoints {
        Some(points) => points.to_vec(),
        None => default_checkpoints(horizon),
    };
    let mut out = Vec::with_capacity(points.len());
    for t in points {
        if t == 0 || t > horizon {
            return Err(EvalError::BadCheckpoint(t, horizon));
        }
        let mut des = Welford::default();
        let mut ext = Welford::default();
        for c in curves {
            des.push(c.des_regret[t - 1]);
            ext.push(c.external_regret[t - 1]);
        }
        out.push(CheckpointStats {
            t,
            des_regret: des.finish(),
            external_regret: ext.finish(),
        });
    }
    Ok(RunSummary {
        replications: curves.len(),
        checkpoints: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::Plan;

    fn curve(values: Vec<f64>) -> RegretCurve {
        RegretCurve {
            instance_id: "i".into(),
            algo: "a".into(),
            seed: 0,
            external_regret: values.clone(),
            des_regret: values,
        }
    }

    fn replay(instance: &Instance, sequence: &[usize]) -> Trajectory {
        let (states, _) = instance.evaluate(sequence).unwrap();
        let mut t = Trajectory::with_capacity(sequence.len());
        for (&arm, &q) in sequence.iter().zip(&states) {
            t.push(arm, 0, instance.arms()[arm].r * q, q);
        }
        t
    }

    #[test]
    fn benchmark_against_itself_is_zero() {
        let inst = Instance::from_pairs(&[(0.5, 1.0), (0.7, 0.7)], 1.0, 4).unwrap();
        let plan = Plan::from_sequence(&inst, vec![0, 1, 0, 1]).unwrap();
        let traj = replay(&inst, &plan.sequence);
        assert!(des_regret(&traj, &plan).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn horizon_mismatch() {
        let inst = Instance::from_pairs(&[(0.5, 1.0)], 1.0, 4).unwrap();
        let plan = Plan::from_sequence(&inst, vec![0; 4]).unwrap();
        let traj = replay(&inst, &[0, 0]);
        assert_eq!(
            des_regret(&traj, &plan),
            Err(EvalError::HorizonMismatch {
                trajectory: 2,
                benchmark: 4
            })
        );
    }

    #[test]
    fn single_round_regret() {
        let inst = Instance::from_pairs(&[(0.3, 0.2), (0.8, 0.1)], 0.4, 1)
            .unwrap()
            .with_q0(0.9)
            .unwrap();
        let plan = Plan::from_sequence(&inst, vec![1]).unwrap();
        let traj = replay(&inst, &[0]);
        let curve = des_regret(&traj, &plan).unwrap();
        assert!((curve[0] - (0.8 * 0.9 - 0.3 * 0.9)).abs() < 1e-15);
    }

    #[test]
    fn sticking_to_arm_two_loses_the_cycle_gap() {
        // Two-cycle value 1.05 per two rounds against 0.49 per round for arm 2 alone.
        let t = 2000;
        let inst = Instance::from_pairs(&[(0.5, 1.0), (0.7, 0.7)], 1.0, t).unwrap();
        let cycle: Vec<usize> = (0..t).map(|s| s % 2).collect();
        let plan = Plan::from_sequence(&inst, cycle).unwrap();
        let traj = replay(&inst, &vec![1; t]);
        let curve = des_regret(&traj, &plan).unwrap();
        let slope = (curve[t - 1] - curve[t / 2 - 1]) / (t / 2) as f64;
        assert!((slope - 0.035).abs() < 1e-9, "slope {slope}");
    }

    #[test]
    fn external_regret_zero_for_best_arm() {
        let inst = Instance::from_pairs(&[(0.9, 0.1), (0.3, 1.0)], 0.5, 50).unwrap();
        let traj = replay(&inst, &[0; 50]);
        assert!(external_regret(&traj, &inst)
            .iter()
            .all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn lambda_zero_external_equals_des() {
        let inst = Instance::from_pairs(&[(0.9, 0.1), (0.3, 1.0), (0.5, 0.5)], 0.0, 30).unwrap();
        let plan = Plan::from_sequence(&inst, vec![0; 30]).unwrap();
        let seq: Vec<usize> = (0..30).map(|s| (s * 7 + 1) % 3).collect();
        let traj = replay(&inst, &seq);
        let des = des_regret(&traj, &plan).unwrap();
        let ext = external_regret(&traj, &inst);
        for (a, b) in des.iter().zip(&ext) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_examples() {
        let single = aggregate(&[curve(vec![1.0, 2.0, 3.0])], None).unwrap();
        assert_eq!(
            single.checkpoints.iter().map(|c| c.t).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        assert_eq!(single.checkpoints[2].des_regret.mean, 3.0);
        assert_eq!(single.checkpoints[2].des_regret.std, 0.0);

        let mirrored =
            aggregate(&[curve(vec![1.0, 4.0]), curve(vec![-1.0, 0.0])], Some(&[2])).unwrap();
        let s = mirrored.checkpoints[0].des_regret;
        assert_eq!(s.mean, 2.0);
        assert_eq!((s.min, s.max), (0.0, 4.0));
    }

    #[test]
    fn aggregate_errors() {
        assert_eq!(aggregate(&[], None), Err(EvalError::Empty));
        assert!(matches!(
            aggregate(&[curve(vec![1.0]), curve(vec![1.0, 2.0])], None),
            Err(EvalError::UnequalCurves(..))
        ));
        assert!(matches!(
            aggregate(&[curve(vec![1.0])], Some(&[2])),
            Err(EvalError::BadCheckpoint(2, 1))
        ));
    }

    #[test]
    fn default_checkpoints_include_horizon() {
        assert_eq!(default_checkpoints(1), vec![1]);
        assert_eq!(default_checkpoints(8), vec![1, 2, 4, 8]);
        assert_eq!(default_checkpoints(10), vec![1, 2, 4, 8, 10]);
    }
}
