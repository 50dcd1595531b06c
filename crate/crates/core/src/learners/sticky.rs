//! Batched elimination over meta-arms for the sticky regime.
//!
//! At `lambda = 1` an optimal plan alternates two arms, so the learner treats
//! every unordered pair `i <= j` as a meta-arm whose value is the mean reward
//! of one `j, i` cycle. Exploration visits meta-arms so that consecutive visits
//! share an arm, which keeps the number of discarded observations per batch at
//! most `K`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Learner, LearnerError};
use crate::env::Simulator;

/// The pair `i <= j` played as `j, i, j, i, ...`, with its running statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaArm {
    pub i: usize,
    pub j: usize,
    /// Sum of per-cycle mean rewards.
    pub sum: f64,
    /// Number of cycles observed.
    pub count: usize,
}

impl MetaArm {
    pub fn new(a: usize, b: usize) -> Self {
        Self {
            i: a.min(b),
            j: a.max(b),
            sum: 0.0,
            count: 0,
        }
    }

    pub fn mu_hat(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    fn other(&self, anchor: usize) -> Option<usize> {
        if self.i == anchor {
            Some(self.j)
        } else if self.j == anchor {
            Some(self.i)
        } else {
            None
        }
    }
}

/// Observations gathered by one exploration batch, indexed like the input.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchOutcome {
    pub sums: Vec<f64>,
    pub cycles: Vec<usize>,
    /// Number of times the learner had to discard an observation at a stale
    /// state.
    pub switch_count: usize,
}

/// Plays `u` cycles of every meta-arm in `active`.
///
/// A random unvisited meta-arm `(a, b)` starts a chain: one pull of `a` whose
/// reward is discarded (its state is left over from before), then `u` cycles
/// `b, a`. The chain continues with every unvisited meta-arm containing `a`,
/// smallest first, each played as `u` cycles `x, a` with no discarded pull
/// since the state is already `b_a`. Every chain exhausts the meta-arms of its
/// anchor, so there are at most `K` chains.
pub fn smart_switch_exploration(
    active: &[MetaArm],
    u: usize,
    sim: &mut Simulator,
    rng: &mut dyn RngCore,
) -> Result<SwitchOutcome, LearnerError> {
    let mut out = SwitchOutcome {
        sums: vec![0.0; active.len()],
        cycles: vec![0; active.len()],
        switch_count: 0,
    };
    let mut unvisited: Vec<usize> = (0..active.len()).collect();
    let mut cycles = |sim: &mut Simulator, idx: usize, x: usize, anchor: usize| {
        for _ in 0..u {
            let y_x = sim.pull(x)?;
            let y_anchor = sim.pull(anchor)?;
            out.sums[idx] += 0.5 * f64::from(y_x + y_anchor);
        }
        out.cycles[idx] += u;
        Ok::<_, LearnerError>(())
    };
    let mut switches = 0;
    while !unvisited.is_empty() {
        let idx = unvisited.remove(rng.random_range(0..unvisited.len()));
        let (anchor, other) = (active[idx].i, active[idx].j);
        switches += 1;
        sim.pull(anchor)?;
        cycles(sim, idx, other, anchor)?;
        while let Some(pos) = unvisited
            .iter()
            .position(|&m| active[m].other(anchor).is_some())
        {
            let idx = unvisited.remove(pos);
            let x = active[idx].other(anchor).expect("contains anchor");
            cycles(sim, idx, x, anchor)?;
        }
    }
    out.switch_count = switches;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub beta: usize,
    pub u: usize,
    pub active: usize,
    pub switches: usize,
    /// Cycles observed so far by every surviving meta-arm.
    pub c_beta: usize,
    pub eliminated: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchedStickyReport {
    pub batches_planned: usize,
    pub growth: f64,
    pub batches: Vec<BatchRecord>,
    pub committed: Option<(usize, usize)>,
    pub commit_round: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchedStickyOverrides {
    /// Number of batches; `max(1, ceil(2 ln T))` by default.
    #[serde(rename = "B")]
    pub b: Option<usize>,
}

/// Batched meta-arm elimination, run as if `lambda = 1`.
#[derive(Debug, Clone, Default)]
pub struct BatchedSticky {
    overrides: BatchedStickyOverrides,
    report: BatchedStickyReport,
}

impl BatchedSticky {
    pub fn new(overrides: BatchedStickyOverrides) -> Self {
        Self {
            overrides,
            report: BatchedStickyReport::default(),
        }
    }

    pub fn last_report(&self) -> &BatchedStickyReport {
        &self.report
    }
}

impl Learner for BatchedSticky {
    fn name(&self) -> &str {
        "batched_sticky"
    }

    fn play(&mut self, sim: &mut Simulator, rng: &mut dyn RngCore) -> Result<(), LearnerError> {
        let k = sim.num_arms();
        let horizon = sim.remaining();
        let ln_t = (horizon.max(1) as f64).ln();
        let batches = match self.overrides.b {
            Some(0) => return Err(LearnerError::InvalidParameter("B must be positive".into())),
            Some(b) => b,
            None => ((2.0 * ln_t).ceil() as usize).max(1),
        };
        let growth = (horizon as f64).powf(1.0 / batches as f64);
        self.report = BatchedStickyReport {
            batches_planned: batches,
            growth,
            ..BatchedStickyReport::default()
        };

        let mut active: Vec<MetaArm> = (0..k)
            .flat_map(|i| (i..k).map(move |j| MetaArm::new(i, j)))
            .collect();
        let confidence = (2.0 * (k * k) as f64 * horizon as f64 * batches as f64).ln();
        let mut c_beta = 0;
        for beta in 1..batches {
            let u = (growth.powi(beta as i32).floor() as usize).max(1);
            if 2 * u * active.len() + k > sim.remaining() {
                break;
            }
            let outcome = smart_switch_exploration(&active, u, sim, rng)?;
            for (m, (s, c)) in active
                .iter_mut()
                .zip(outcome.sums.iter().zip(&outcome.cycles))
            {
                m.sum += s;
                m.count += c;
            }
            c_beta += u;
            let radius = (2.0 * confidence / c_beta as f64).sqrt();
            let best = active
                .iter()
                .map(MetaArm::mu_hat)
                .fold(f64::NEG_INFINITY, f64::max);
            let before = active.len();
            let mut eliminated = Vec::new();
            active.retain(|m| {
                let keep = m.mu_hat() >= best - radius;
                if !keep {
                    eliminated.push((m.i, m.j));
                }
                keep
            });
            self.report.batches.push(BatchRecord {
                beta,
                u,
                active: before,
                switches: outcome.switch_count,
                c_beta,
                eliminated,
            });
        }

        let mut chosen = &active[0];
        for m in &active {
            if m.mu_hat() > chosen.mu_hat() {
                chosen = m;
            }
        }
        let (i, j) = (chosen.i, chosen.j);
        self.report.committed = Some((i, j));
        self.report.commit_round = sim.round();
        // Start on whichever arm was not just pulled so the cycle does not stall.
        let mut next = if sim.last_arm() == Some(i) { j } else { i };
        while sim.remaining() > 0 {
            sim.pull(next)?;
            next = if next == i { j } else { i };
        }
        Ok(())
    }

    fn report(&self) -> serde_json::Value {
        serde_json::to_value(&self.report).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Instance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_pairs(k: usize) -> Vec<MetaArm> {
        (0..k)
            .flat_map(|i| (i..k).map(move |j| MetaArm::new(i, j)))
            .collect()
    }

    #[test]
    fn full_set_switches_at_most_k() {
        let inst = Instance::from_pairs(&[(0.5, 0.5), (0.6, 0.4), (0.7, 0.3)], 1.0, 1000).unwrap();
        for seed in 0..50 {
            let mut sim = Simulator::new(&inst, ChaCha8Rng::seed_from_u64(seed));
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let active = all_pairs(3);
            assert_eq!(active.len(), 6);
            let out = smart_switch_exploration(&active, 4, &mut sim, &mut rng).unwrap();
            assert!(out.switch_count <= 3);
            assert!(out.cycles.iter().all(|&c| c == 4));
            assert_eq!(sim.round(), 6 * 8 + out.switch_count);
        }
    }

    #[test]
    fn single_meta_arm_is_one_switch() {
        let inst = Instance::from_pairs(&[(0.5, 0.5)], 1.0, 100).unwrap();
        let mut sim = Simulator::new(&inst, ChaCha8Rng::seed_from_u64(0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = smart_switch_exploration(&all_pairs(1), 3, &mut sim, &mut rng).unwrap();
        assert_eq!(out.switch_count, 1);
        assert_eq!(sim.round(), 7);
    }

    #[test]
    fn cycle_means_are_unbiased() {
        let inst = Instance::from_pairs(&[(0.5, 1.0), (0.7, 0.7)], 1.0, 200_001).unwrap();
        let mut sim = Simulator::new(&inst, ChaCha8Rng::seed_from_u64(7));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let active = vec![MetaArm::new(0, 1)];
        let out = smart_switch_exploration(&active, 100_000, &mut sim, &mut rng).unwrap();
        let mean = out.sums[0] / out.cycles[0] as f64;
        assert!(
            (mean - (0.5 * 0.7 + 0.7 * 1.0) / 2.0).abs() < 0.01,
            "{mean}"
        );
    }

    #[test]
    fn batches_respect_switch_bound_and_shared_counts() {
        let inst =
            Instance::from_pairs(&[(0.5, 1.0), (0.7, 0.7), (0.2, 0.4)], 1.0, 20_000).unwrap();
        let mut learner = BatchedSticky::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let traj = learner
            .run(&inst, ChaCha8Rng::seed_from_u64(3), &mut rng)
            .unwrap();
        assert_eq!(traj.arms.len(), 20_000);
        let report = learner.last_report();
        assert!(!report.batches.is_empty());
        let mut expected_c = 0;
        for b in &report.batches {
            assert!(b.switches <= 3);
            expected_c += b.u;
            assert_eq!(b.c_beta, expected_c);
        }
    }

    #[test]
    fn eliminated_meta_arms_are_not_explored_again() {
        let inst = Instance::from_pairs(&[(0.9, 0.9), (0.1, 0.1)], 1.0, 20_000).unwrap();
        let mut learner = BatchedSticky::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        learner
            .run(&inst, ChaCha8Rng::seed_from_u64(5), &mut rng)
            .unwrap();
        let report = learner.last_report();
        let mut gone: Vec<(usize, usize)> = Vec::new();
        for b in &report.batches {
            assert_eq!(b.active + gone.len(), 3);
            gone.extend(&b.eliminated);
        }
        assert!(gone.contains(&(1, 1)));
        assert_eq!(report.committed, Some((0, 0)));
    }
}
