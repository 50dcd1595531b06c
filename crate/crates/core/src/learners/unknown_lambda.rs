//! Learning when the evolution rate itself is unknown.
//!
//! A screening phase checks whether pulls move the state at all. If they do
//! not, EXP3.P runs on the rest of the horizon. Otherwise `lambda` is estimated
//! from three probes on one pair of arms and ETC runs with the estimate.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::etc::{EtcKnown, EtcOverrides, EtcReport};
use super::exp3p::fallback_exp3p;
use super::{play_single_arm, repeat, Exp3p, Learner, LearnerError};
use crate::env::Simulator;
use crate::evaluation::TrajectoryFlag;

/// Limit of the state while alternating `i, j, i, j, ...` with `lambda > 0`.
///
/// Even parity is the state after an even number of pulls (last pull `j`,
/// next pull `i`); odd parity the state after the `i` pulls.
pub fn alt_limit_state(
    b_i: f64,
    b_j: f64,
    lambda: f64,
    parity: usize,
) -> Result<f64, LearnerError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(LearnerError::InvalidParameter(format!(
            "alternation only converges for 0 < lambda <= 1, got {lambda}"
        )));
    }
    let (last, first) = if parity.is_multiple_of(2) {
        (b_j, b_i)
    } else {
        (b_i, b_j)
    };
    Ok((last + (1.0 - lambda) * first) / (2.0 - lambda))
}

/// `1 + (r_bj - r_ij) / (r_bi - r_ij)` clamped to `[0, 1]`.
///
/// `r_bi` is the mean reward of `i` once the state has settled on `b_i`, `r_bj`
/// the same after settling on `b_j`, and `r_ij` the mean reward of `i` at the
/// alternation limit.
pub fn lambda_from_probes(r_bi: f64, r_bj: f64, r_ij: f64) -> Result<f64, LearnerError> {
    let den = r_bi - r_ij;
    if den.abs() < 1e-9 {
        return Err(LearnerError::DegenerateProbe(den));
    }
    Ok((1.0 + (r_bj - r_ij) / den).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaEstimate {
    pub r_bi: f64,
    pub r_bj: f64,
    pub r_ij: f64,
    pub lambda_hat: f64,
    pub n_tilde: usize,
    pub m: usize,
}

fn probe_cost(n_tilde: usize) -> usize {
    6 * n_tilde + 3
}

/// Runs the three probes `m` times each with settling length `n_tilde`.
pub fn estimate_lambda(
    sim: &mut Simulator,
    n_tilde: usize,
    i: usize,
    j: usize,
    m: usize,
) -> Result<LambdaEstimate, LearnerError> {
    if i == j || i >= sim.num_arms() || j >= sim.num_arms() {
        return Err(LearnerError::InvalidParameter(format!(
            "probe pair ({i}, {j}) must be two distinct arms"
        )));
    }
    if m == 0 || n_tilde == 0 || m * probe_cost(n_tilde) > sim.remaining() {
        return Err(LearnerError::InvalidParameter(format!(
            "{m} probes of length {n_tilde} do not fit in {} rounds",
            sim.remaining()
        )));
    }
    let (mut bj, mut bi, mut ij) = (0u32, 0u32, 0u32);
    for _ in 0..m {
        repeat(sim, j, n_tilde)?;
        bj += u32::from(sim.pull(i)?);
    }
    for _ in 0..m {
        repeat(sim, j, n_tilde)?;
        repeat(sim, i, n_tilde)?;
        bi += u32::from(sim.pull(i)?);
    }
    for _ in 0..m {
        repeat(sim, i, n_tilde)?;
        for _ in 0..n_tilde {
            sim.pull(i)?;
            sim.pull(j)?;
        }
        ij += u32::from(sim.pull(i)?);
    }
    let mean = |s: u32| f64::from(s) / m as f64;
    let (r_bi, r_bj, r_ij) = (mean(bi), mean(bj), mean(ij));
    Ok(LambdaEstimate {
        r_bi,
        r_bj,
        r_ij,
        lambda_hat: lambda_from_probes(r_bi, r_bj, r_ij)?,
        n_tilde,
        m,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    #[default]
    NotRun,
    SingleArm,
    Exp3p,
    Estimated,
    Fallback,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct UnknownLambdaReport {
    pub branch: Branch,
    pub screening_length: usize,
    pub mu_single: Vec<f64>,
    /// Alternation means against the random partner; `None` for the partner.
    pub mu_pair: Vec<Option<f64>>,
    pub partner: usize,
    pub max_diff: f64,
    pub threshold: f64,
    pub estimates: Vec<LambdaEstimate>,
    pub lambda_hat: Option<f64>,
    pub etc: Option<EtcReport>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UnknownLambdaOverrides {
    #[serde(flatten)]
    pub etc: EtcOverrides,
    pub delta_conf: Option<f64>,
}

/// Screening, then either EXP3.P or lambda estimation followed by ETC.
#[derive(Debug, Clone, Default)]
pub struct UnknownLambda {
    overrides: UnknownLambdaOverrides,
    report: UnknownLambdaReport,
}

impl UnknownLambda {
    pub fn new(overrides: UnknownLambdaOverrides) -> Self {
        Self {
            overrides,
            report: UnknownLambdaReport::default(),
        }
    }

    pub fn last_report(&self) -> &UnknownLambdaReport {
        &self.report
    }

    fn fall_back(
        &mut self,
        sim: &mut Simulator,
        rng: &mut dyn RngCore,
        reason: String,
    ) -> Result<(), LearnerError> {
        sim.flag(TrajectoryFlag::FellBackToExp3p { reason });
        self.report.branch = Branch::Fallback;
        fallback_exp3p(sim, rng)
    }
}

impl Learner for UnknownLambda {
    fn name(&self) -> &str {
        "unknown_lambda"
    }

    fn play(&mut self, sim: &mut Simulator, rng: &mut dyn RngCore) -> Result<(), LearnerError> {
        self.report = UnknownLambdaReport::default();
        let k = sim.num_arms();
        let horizon = sim.remaining();
        if k == 1 {
            self.report.branch = Branch::SingleArm;
            return Ok(play_single_arm(sim)?);
        }
        let per_arm = horizon as f64 / k as f64;
        let len = per_arm.powf(2.0 / 3.0).ceil() as usize;
        let screening = 2 * len * k + 4 * len * (k - 1);
        self.report.screening_length = len;
        if 2 * screening > horizon {
            return self.fall_back(
                sim,
                rng,
                format!("screening needs {screening} rounds, more than half of {horizon}"),
            );
        }

        let mut mu_single = Vec::with_capacity(k);
        for i in 0..k {
            repeat(sim, i, len)?;
            mu_single.push(f64::from(repeat(sim, i, len)?) / len as f64);
        }
        let partner = rng.random_range(0..k);
        let mut mu_pair = vec![None; k];
        let (mut best, mut max_diff) = (usize::MAX, f64::NEG_INFINITY);
        for i in (0..k).filter(|&i| i != partner) {
            for _ in 0..len {
                sim.pull(i)?;
                sim.pull(partner)?;
            }
            let mut sum = 0u32;
            for _ in 0..len {
                sum += u32::from(sim.pull(i)?);
                sim.pull(partner)?;
            }
            let mu = f64::from(sum) / len as f64;
            mu_pair[i] = Some(mu);
            let diff = (mu_single[i] - mu).abs();
            if diff > max_diff {
                (best, max_diff) = (i, diff);
            }
        }
        let ln_t = (horizon as f64).ln();
        let threshold = 3.0 * ln_t.sqrt() / per_arm.cbrt();
        self.report.mu_single = mu_single;
        self.report.mu_pair = mu_pair;
        self.report.partner = partner;
        self.report.max_diff = max_diff;
        self.report.threshold = threshold;

        if max_diff <= threshold {
            self.report.branch = Branch::Exp3p;
            let mut exp3p = Exp3p::new(self.overrides.delta_conf);
            return match exp3p.play(sim, rng) {
                Err(LearnerError::HorizonTooShort { .. }) => fallback_exp3p(sim, rng),
                other => other,
            };
        }

        // Sample size: the nominal ln T / delta^2, capped so that the first two
        // estimates use at most a quarter of the horizon.
        let n0 = (ln_t.ceil() as usize).max(1);
        let delta = (k as f64 * ln_t / horizon as f64).cbrt();
        let m_nominal = (ln_t / (delta * delta)).ceil() as usize;
        let m_cap = (horizon / 4) / (probe_cost(n0) + probe_cost(2 * n0));
        let m = m_nominal.min(m_cap);
        if m == 0 {
            return self.fall_back(sim, rng, "no room for lambda probes".into());
        }
        let tolerance = (ln_t / m as f64).sqrt();

        let mut estimates = Vec::new();
        let mut n_tilde = n0;
        let mut capped = false;
        loop {
            match estimate_lambda(sim, n_tilde, best, partner, m) {
                Ok(e) => estimates.push(e),
                Err(LearnerError::DegenerateProbe(den)) => {
                    self.report.estimates = estimates;
                    return self.fall_back(sim, rng, format!("degenerate lambda probe ({den:e})"));
                }
                Err(e) => return Err(e),
            }
            if let [.., a, b] = estimates.as_slice() {
                if (a.lambda_hat - b.lambda_hat).abs() <= tolerance {
                    break;
                }
            }
            let next = 2 * n_tilde;
            let room = m * probe_cost(next) <= sim.remaining() / 2;
            // Only the first doubling is exempt from the length cap.
            let within_cap = estimates.len() < 2 || next * 100 * m <= horizon;
            if !(room && within_cap) {
                capped = true;
                break;
            }
            n_tilde = next;
        }
        let lambda_hat = estimates.last().expect("at least one estimate").lambda_hat;
        if capped {
            sim.flag(TrajectoryFlag::DoublingCapReached { lambda_hat });
        }
        self.report.estimates = estimates;
        self.report.lambda_hat = Some(lambda_hat);
        self.report.branch = Branch::Estimated;

        let mut etc = EtcKnown::new(self.overrides.etc);
        let result = etc.play_with_lambda(sim, rng, lambda_hat);
        self.report.etc = Some(etc.last_report().clone());
        result
    }

    fn report(&self) -> serde_json::Value {
        serde_json::to_value(&self.report).unwrap_or_default()
    }
}
