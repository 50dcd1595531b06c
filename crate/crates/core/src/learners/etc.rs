//! Explore-then-commit for general `lambda`.
//!
//! Exploration estimates every arm's reward `r` (sampling right after the
//! state was reset by a replenishing arm) and its end state `b` (sampling after
//! the state has settled on the arm itself). The remaining rounds follow the
//! FPTAS plan computed on the estimates.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::exp3p::fallback_exp3p;
use super::{repeat, Learner, LearnerError};
use crate::env::{ArmSpec, Instance, Simulator};
use crate::evaluation::TrajectoryFlag;
use crate::planner::fptas_dp;

/// Exploration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtcTuning {
    pub epsilon: f64,
    pub delta: f64,
    /// Samples per estimate.
    pub m: usize,
    /// Warm-up pulls before sampling an end state.
    pub n: usize,
    /// Pulls of the replenishing arm before each reward sample.
    pub n_r: usize,
}

/// Pulls of one arm after which the state is within `epsilon` of its end
/// state, from any starting point: `(1 - lambda)^N <= lambda * epsilon`.
pub fn n_lambda(lambda: f64, epsilon: f64) -> usize {
    let n = ((1.0 / (lambda * epsilon)).ln() / (1.0 / (1.0 - lambda)).ln()).ceil();
    if n.is_finite() && n > 1.0 {
        n as usize
    } else {
        1
    }
}

fn nominal_epsilon(k: usize, horizon: usize, lambda: f64) -> f64 {
    let (k, t) = (k as f64, horizon as f64);
    (k * t.ln() * lambda.ln() / (t * (1.0 - lambda).ln()))
        .cbrt()
        .min(0.5)
}

/// Tuning for `k` arms, horizon `horizon` and `0 < lambda < 1`, all logarithms
/// natural.
pub fn tune_etc(k: usize, horizon: usize, lambda: f64) -> Result<EtcTuning, LearnerError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(LearnerError::WrongRegime(lambda));
    }
    if horizon < 2 || k == 0 {
        return Err(LearnerError::InvalidParameter(format!(
            "ETC needs K >= 1 and T >= 2, got K = {k}, T = {horizon}"
        )));
    }
    Ok(Scheme::Known.tuning(
        k,
        horizon,
        lambda,
        nominal_epsilon(k, horizon, lambda),
        None,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scheme {
    Known,
    Unknown,
}

impl Scheme {
    fn tuning(
        self,
        k: usize,
        horizon: usize,
        lambda: f64,
        epsilon: f64,
        m: Option<usize>,
    ) -> EtcTuning {
        let ln_t = (horizon as f64).ln();
        let (delta, m_formula) = match self {
            Scheme::Known => (epsilon / 4.0, ln_t / (epsilon * epsilon)),
            Scheme::Unknown => (2.0 * epsilon, (k * k) as f64 * ln_t / (epsilon * epsilon)),
        };
        let n = n_lambda(lambda, epsilon);
        EtcTuning {
            epsilon,
            delta,
            m: m.unwrap_or((m_formula.ceil() as usize).max(1)),
            n,
            n_r: n,
        }
    }
}

fn budget(k: usize, t: &EtcTuning) -> usize {
    2 * k * t.m * (t.n + 1) + t.n_r
}

enum Fit {
    Nominal(EtcTuning),
    Degraded(EtcTuning),
    Infeasible(String),
}

/// Makes exploration fit in half the horizon: first raise epsilon to the
/// smallest feasible value, then shrink `M` at `epsilon = 1/2`.
fn fit_budget(
    scheme: Scheme,
    k: usize,
    horizon: usize,
    lambda: f64,
    nominal: EtcTuning,
    m_override: Option<usize>,
) -> Fit {
    let fits = |t: &EtcTuning| 2 * budget(k, t) <= horizon;
    if fits(&nominal) {
        return Fit::Nominal(nominal);
    }
    let at = |eps: f64| scheme.tuning(k, horizon, lambda, eps, m_override);
    let widest = at(0.5);
    if nominal.epsilon < 0.5 && fits(&widest) {
        let (mut lo, mut hi) = (nominal.epsilon, 0.5);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if fits(&at(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Fit::Degraded(at(hi));
    }
    let per_sample = 2 * k * (widest.n + 1);
    let room = (horizon / 2).saturating_sub(widest.n_r);
    let m = room / per_sample;
    if m >= 1 {
        return Fit::Degraded(EtcTuning { m, ..widest });
    }
    Fit::Infeasible(format!(
        "exploration needs {} rounds even at epsilon = 1/2, M = 1; only {} available",
        2 * budget(k, &EtcTuning { m: 1, ..widest }),
        horizon
    ))
}

/// Hyper-parameter overrides shared by both ETC variants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtcOverrides {
    pub epsilon: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// Replenishing arm of the known variant; arm 0 by default.
    #[serde(rename = "i_R")]
    pub i_r: Option<usize>,
    /// Precision of the commit-phase planner; `1/T` by default.
    pub dp_epsilon: Option<f64>,
}

/// What one ETC run estimated and decided.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EtcReport {
    pub lambda: f64,
    pub nominal: Option<EtcTuning>,
    pub tuning: Option<EtcTuning>,
    pub r_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub b_hat: Vec<f64>,
    /// Parameters handed to the planner.
    pub dp_arms: Vec<ArmSpec>,
    /// Round index right after every replenishing block.
    #[serde(skip)]
    pub replenish_ends: Vec<usize>,
    pub commit_round: Option<usize>,
    pub fell_back: bool,
}

/// Which replenishing strategy to use.
#[derive(Debug, Clone, Copy)]
enum Replenish {
    /// A known arm with end state close to 1.
    Known(usize),
    /// A fresh uniformly random arm before every reward sample.
    Random,
}

/// Runs the ETC schedule on the rounds left in `sim`, planning with `lambda`
/// (the true rate, or an estimate of it).
fn run(
    sim: &mut Simulator,
    rng: &mut dyn RngCore,
    lambda: f64,
    overrides: &EtcOverrides,
    replenish: Replenish,
    report: &mut EtcReport,
) -> Result<(), LearnerError> {
    *report = EtcReport {
        lambda,
        ..EtcReport::default()
    };
    let k = sim.num_arms();
    let horizon = sim.remaining();
    if horizon == 0 {
        return Ok(());
    }
    if let Replenish::Known(i_r) = replenish {
        if i_r >= k {
            return Err(LearnerError::InvalidParameter(format!(
                "i_R = {i_r} but there are only {k} arms"
            )));
        }
    }
    let scheme = match replenish {
        Replenish::Known(_) => Scheme::Known,
        Replenish::Random => Scheme::Unknown,
    };
    // The schedule needs 0 < lambda < 1; the endpoints are approached instead.
    let lambda = lambda.clamp(1e-9, 1.0 - 1e-9);
    let epsilon = match overrides.epsilon {
        Some(e) if e > 0.0 && e <= 0.5 => e,
        Some(e) => {
            return Err(LearnerError::InvalidParameter(format!(
                "epsilon must be in (0, 1/2], got {e}"
            )))
        }
        None => nominal_epsilon(k, horizon.max(2), lambda),
    };
    if overrides.m == Some(0) {
        return Err(LearnerError::InvalidParameter("M must be positive".into()));
    }
    let nominal = scheme.tuning(k, horizon.max(2), lambda, epsilon, overrides.m);
    report.nominal = Some(nominal);
    let tuning = match fit_budget(scheme, k, horizon, lambda, nominal, overrides.m) {
        Fit::Nominal(t) => t,
        Fit::Degraded(t) => {
            sim.flag(TrajectoryFlag::BudgetDegraded {
                nominal_epsilon: nominal.epsilon,
                epsilon: t.epsilon,
                nominal_m: nominal.m,
                m: t.m,
            });
            t
        }
        Fit::Infeasible(reason) => {
            sim.flag(TrajectoryFlag::FellBackToExp3p { reason });
            report.fell_back = true;
            return fallback_exp3p(sim, rng);
        }
    };
    report.tuning = Some(tuning);
    let EtcTuning { m, n, n_r, .. } = tuning;

    let mut r_hat = Vec::with_capacity(k);
    for i in 0..k {
        let mut sum = 0;
        for _ in 0..m {
            let z = match replenish {
                Replenish::Known(i_r) => i_r,
                Replenish::Random => rng.random_range(0..k),
            };
            repeat(sim, z, n_r)?;
            report.replenish_ends.push(sim.round());
            sum += u32::from(sim.pull(i)?);
        }
        r_hat.push(f64::from(sum) / m as f64);
    }

    let mut v_hat = Vec::with_capacity(k);
    for i in 0..k {
        repeat(sim, i, n)?;
        v_hat.push(f64::from(repeat(sim, i, m)?) / m as f64);
    }

    let floor = 1.0 / (horizon as f64).powi(2);
    let raw_b: Vec<f64> = v_hat
        .iter()
        .zip(&r_hat)
        .map(|(v, r)| v / r.max(floor))
        .collect();

    let (replenish_arm, dp_arms) = match replenish {
        Replenish::Known(i_r) => {
            let arms = r_hat
                .iter()
                .zip(&raw_b)
                .map(|(&r, &b)| ArmSpec {
                    r,
                    b: b.clamp(0.0, 1.0),
                })
                .collect::<Vec<_>>();
            (i_r, arms)
        }
        Replenish::Random => {
            // Reward estimates carry a common factor c (the mean end state) and
            // end-state estimates its inverse. Rescaling by the largest end
            // state keeps both in [0, 1]; replenishing with that arm makes the
            // rescaled starting state 1.
            let best = argmax(&raw_b);
            let scale = if raw_b[best] > 0.0 { raw_b[best] } else { 1.0 };
            let arms = r_hat
                .iter()
                .zip(&raw_b)
                .map(|(&r, &b)| ArmSpec {
                    r: (r * scale).clamp(0.0, 1.0),
                    b: (b / scale).clamp(0.0, 1.0),
                })
                .collect::<Vec<_>>();
            (best, arms)
        }
    };
    report.r_hat = r_hat;
    report.v_hat = v_hat;
    report.b_hat = match replenish {
        Replenish::Known(_) => raw_b.iter().map(|b| b.clamp(0.0, 1.0)).collect(),
        Replenish::Random => raw_b,
    };
    report.dp_arms = dp_arms.clone();

    let replenish_pulls = n_r.min(sim.remaining());
    repeat(sim, replenish_arm, replenish_pulls)?;
    report.replenish_ends.push(sim.round());

    let commit = sim.remaining();
    report.commit_round = Some(sim.round());
    if commit == 0 {
        return Ok(());
    }
    let dp_epsilon = overrides.dp_epsilon.unwrap_or(1.0 / horizon as f64);
    let estimated = Instance::new(dp_arms, lambda, commit)?;
    let plan = fptas_dp(&estimated, dp_epsilon)?;
    for arm in plan.sequence {
        sim.pull(arm)?;
    }
    Ok(())
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ETC with a known replenishing arm `i_R` (end state close to 1).
#[derive(Debug, Clone, Default)]
pub struct EtcKnown {
    overrides: EtcOverrides,
    report: EtcReport,
}

impl EtcKnown {
    pub fn new(overrides: EtcOverrides) -> Self {
        Self {
            overrides,
            report: EtcReport::default(),
        }
    }

    pub fn last_report(&self) -> &EtcReport {
        &self.report
    }

    /// Runs the schedule planning with `lambda` instead of the simulator's rate.
    pub(crate) fn play_with_lambda(
        &mut self,
        sim: &mut Simulator,
        rng: &mut dyn RngCore,
        lambda: f64,
    ) -> Result<(), LearnerError> {
        let i_r = self.overrides.i_r.unwrap_or(0);
        run(
            sim,
            rng,
            lambda,
            &self.overrides,
            Replenish::Known(i_r),
            &mut self.report,
        )
    }
}

impl Learner for EtcKnown {
    fn name(&self) -> &str {
        "etc_known"
    }

    fn play(&mut self, sim: &mut Simulator, rng: &mut dyn RngCore) -> Result<(), LearnerError> {
        let lambda = sim.lambda();
        self.play_with_lambda(sim, rng, lambda)
    }

    fn report(&self) -> serde_json::Value {
        serde_json::to_value(&self.report).unwrap_or_default()
    }
}

/// ETC without a known replenishing arm: a random arm resets the state before
/// every reward sample.
#[derive(Debug, Clone, Default)]
pub struct EtcUnknown {
    overrides: EtcOverrides,
    report: EtcReport,
}

impl EtcUnknown {
    pub fn new(overrides: EtcOverrides) -> Self {
        Self {
            overrides,
            report: EtcReport::default(),
        }
    }

    pub fn last_report(&self) -> &EtcReport {
        &self.report
    }
}

impl Learner for EtcUnknown {
    fn name(&self) -> &str {
        "etc_unknown"
    }

    fn play(&mut self, sim: &mut Simulator, rng: &mut dyn RngCore) -> Result<(), LearnerError> {
        let lambda = sim.lambda();
        run(
            sim,
            rng,
            lambda,
            &self.overrides,
            Replenish::Random,
            &mut self.report,
        )
    }

    fn report(&self) -> serde_json::Value {
        serde_json::to_value(&self.report).unwrap_or_default()
    }
}
