use super::{sequence_count_within, Plan, PlanError, PlanMethod};
use crate::env::{advance, Instance};

/// Exhaustive search over all `K^T` sequences.
///
/// Among equally good sequences the lexicographically smallest wins. Fails
/// with [`PlanError::CapExceeded`] when `K^T > cap`.
pub fn exact_dp(instance: &Instance, cap: u64) -> Result<Plan, PlanError> {
    let k = instance.num_arms();
    let t = instance.horizon();
    if !sequence_count_within(k, t, cap) {
        return Err(PlanError::CapExceeded { k, t, cap });
    }
    let mut search = Search {
        instance,
        prefix: Vec::with_capacity(t),
        best: Vec::new(),
        best_value: f64::NEG_INFINITY,
    };
    search.descend(instance.q0(), 0.0);
    Ok(Plan::from_sequence(instance, search.best)?.with_method(PlanMethod::Exhaustive))
}

struct Search<'a> {
    instance: &'a Instance,
    prefix: Vec<usize>,
    best: Vec<usize>,
    best_value: f64,
}

impl Search<'_> {
    fn descend(&mut self, q: f64, value: f64) {
        if self.prefix.len() == self.instance.horizon() {
            // Depth-first order visits sequences lexicographically, so a strict
            // comparison keeps the smallest optimum.
            if value > self.best_value {
                self.best_value = value;
                self.best.clone_from(&self.prefix);
            }
            return;
        }
        let lambda = self.instance.lambda();
        for (i, arm) in self.instance.arms().iter().enumerate() {
            self.prefix.push(i);
            self.descend(advance(q, arm.b, lambda), value + arm.r * q);
            self.prefix.pop();
        }
    }
}

/// Exact optimum at `lambda = 1` in `O(T K^2)`.
///
/// With full replacement the state in round `t >= 2` is `b` of the arm pulled in
/// round `t - 1`, so the problem is a longest path over the last arm pulled.
pub fn sticky_dp(instance: &Instance) -> Result<Plan, PlanError> {
    if instance.lambda() != 1.0 {
        return Err(PlanError::WrongRegime("sticky_dp", 1.0));
    }
    let arms = instance.arms();
    let k = arms.len();
    let t = instance.horizon();

    // tail[s * k + i]: best reward of rounds s+1.. (0-based) given arm i in round s.
    let mut tail = vec![0.0; t * k];
    for s in (0..t - 1).rev() {
        for i in 0..k {
            let best = (0..k)
                .map(|j| arms[j].r * arms[i].b + tail[(s + 1) * k + j])
                .fold(f64::NEG_INFINITY, f64::max);
            tail[s * k + i] = best;
        }
    }

    let first = argmax((0..k).map(|j| arms[j].r * instance.q0() + tail[j]));
    let mut sequence = Vec::with_capacity(t);
    sequence.push(first);
    for s in 1..t {
        let prev = sequence[s - 1];
        let next = argmax((0..k).map(|j| arms[j].r * arms[prev].b + tail[s * k + j]));
        sequence.push(next);
    }
    Ok(Plan::from_sequence(instance, sequence)?.with_method(PlanMethod::Sticky))
}

/// Exact optimum at `lambda = 0`: the state never moves, so repeat the arm
/// with the largest `r`.
pub fn static_best_arm(instance: &Instance) -> Result<Plan, PlanError> {
    if instance.lambda() != 0.0 {
        return Err(PlanError::WrongRegime("static_best_arm", 0.0));
    }
    let best = argmax(instance.arms().iter().map(|a| a.r));
    let sequence = vec![best; instance.horizon()];
    Ok(Plan::from_sequence(instance, sequence)?.with_method(PlanMethod::Static))
}

/// Index of the first maximum.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop1(lambda: f64, t: usize) -> Instance {
        Instance::from_pairs(&[(0.5, 1.0), (0.7, 0.7)], lambda, t).unwrap()
    }

    #[test]
    fn exact_alternates_on_small_case() {
        let plan = exact_dp(&prop1(1.0, 4), 100).unwrap();
        assert_eq!(plan.sequence, vec![0, 1, 0, 1]);
        assert!((plan.expected_total - 2.25).abs() < 1e-12);
    }

    #[test]
    fn exact_respects_cap() {
        assert_eq!(
            exact_dp(&prop1(0.5, 10), 1000),
            Err(PlanError::CapExceeded {
                k: 2,
                t: 10,
                cap: 1000
            })
        );
        assert!(exact_dp(&prop1(0.5, 10), 1024).is_ok());
    }

    #[test]
    fn exact_tie_break_is_lexicographic() {
        let inst = Instance::from_pairs(&[(0.5, 0.5), (0.5, 0.5)], 0.3, 5).unwrap();
        assert_eq!(exact_dp(&inst, 1 << 10).unwrap().sequence, vec![0; 5]);
    }

    #[test]
    fn sticky_matches_exhaustive() {
        for t in 1..=12 {
            let inst = Instance::from_pairs(&[(0.5, 1.0), (0.7, 0.7), (0.9, 0.2)], 1.0, t)
                .unwrap()
                .with_q0(0.4)
                .unwrap();
            let exact = exact_dp(&inst, 1 << 20).unwrap();
            let sticky = sticky_dp(&inst).unwrap();
            assert!(
                (exact.expected_total - sticky.expected_total).abs() < 1e-12,
                "T={t}"
            );
            assert_eq!(exact.sequence, sticky.sequence, "T={t}");
        }
    }

    #[test]
    fn wrong_regime_is_rejected() {
        assert!(sticky_dp(&prop1(0.5, 10)).is_err());
        assert!(static_best_arm(&prop1(0.5, 10)).is_err());
    }

    #[test]
    fn static_repeats_largest_reward() {
        let plan = static_best_arm(&prop1(0.0, 7)).unwrap();
        assert_eq!(plan.sequence, vec![1; 7]);
        assert!((plan.expected_total - 4.9).abs() < 1e-12);
    }
}
