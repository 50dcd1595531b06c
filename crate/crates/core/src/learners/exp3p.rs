use rand::RngCore;
use serde::Serialize;

use super::{play_policy, sample_index, Learner, LearnerError, Policy};
use crate::env::Simulator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exp3pParams {
    pub eta: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl Exp3pParams {
    /// Standard tuning for `k` arms over `horizon` rounds with confidence
    /// `delta_conf`. Fails when the exploration rate would reach 1.
    pub fn tuned(k: usize, horizon: usize, delta_conf: f64) -> Result<Self, LearnerError> {
        if k == 0 || horizon < k {
            return Err(LearnerError::InvalidParameter(format!(
                "EXP3.P needs 1 <= K <= T, got K = {k}, T = {horizon}"
            )));
        }
        if !(delta_conf > 0.0 && delta_conf < 1.0) {
            return Err(LearnerError::InvalidParameter(format!(
                "delta_conf must be in (0, 1), got {delta_conf}"
            )));
        }
        let params = Self::formula(k, horizon, delta_conf);
        if params.gamma >= 1.0 {
            let k_f = k as f64;
            let min_horizon = (1.05f64.powi(2) * k_f * k_f.ln()).floor() as usize + 1;
            return Err(LearnerError::HorizonTooShort {
                k,
                horizon,
                min_horizon: min_horizon.max(k),
            });
        }
        Ok(params)
    }

    fn formula(k: usize, horizon: usize, delta_conf: f64) -> Self {
        let (k, t) = (k as f64, horizon as f64);
        Self {
            eta: 0.95 * (k.ln() / (k * t)).sqrt(),
            gamma: 1.05 * (k * k.ln() / t).sqrt(),
            beta: ((k / delta_conf).ln() / (k * t)).sqrt(),
        }
    }

    /// Tuning used when another learner hands its remaining rounds to EXP3.P:
    /// a short horizon degrades to uniform play instead of failing.
    pub(crate) fn fallback(k: usize, horizon: usize) -> Self {
        let horizon = horizon.max(1);
        let mut params = Self::formula(k, horizon, 1.0 / (horizon as f64 + 1.0));
        params.gamma = params.gamma.min(1.0);
        params
    }
}

/// EXP3.P: exponential weights over optimistic gain estimates, mixed with
/// uniform exploration.
#[derive(Debug, Clone)]
pub struct Exp3p {
    delta_conf: Option<f64>,
    fixed: Option<Exp3pParams>,
    params: Exp3pParams,
    gains: Vec<f64>,
    p: Vec<f64>,
}

impl Exp3p {
    /// Tunes itself from the simulator at the start of [`Learner::play`].
    /// `delta_conf` defaults to `1/T`.
    pub fn new(delta_conf: Option<f64>) -> Self {
        Self {
            delta_conf,
            fixed: None,
            params: Exp3pParams {
                eta: 0.0,
                gamma: 0.0,
                beta: 0.0,
            },
            gains: Vec::new(),
            p: Vec::new(),
        }
    }

    /// Uses `params` as given.
    pub fn with_params(params: Exp3pParams) -> Self {
        let mut learner = Self::new(None);
        learner.fixed = Some(params);
        learner
    }

    pub fn params(&self) -> Exp3pParams {
        self.params
    }

    /// Sampling distribution for the next round.
    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Resets the estimates for `k` arms.
    pub fn reset(&mut self, k: usize, params: Exp3pParams) {
        self.params = params;
        self.gains = vec![0.0; k];
        self.p = vec![1.0 / k as f64; k];
    }

    fn refresh(&mut self) {
        let k = self.gains.len() as f64;
        let Exp3pParams { eta, gamma, .. } = self.params;
        let top = self
            .gains
            .iter()
            .map(|g| eta * g)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (p, g) in self.p.iter_mut().zip(&self.gains) {
            *p = (eta * g - top).exp();
            total += *p;
        }
        for p in &mut self.p {
            *p = (1.0 - gamma) * *p / total + gamma / k;
        }
    }
}

impl Policy for Exp3p {
    fn next_arm(&mut self, rng: &mut dyn RngCore) -> usize {
        sample_index(&self.p, rng)
    }

    fn observe(&mut self, arm: usize, reward: u8) {
        let beta = self.params.beta;
        for (g, p) in self.gains.iter_mut().zip(&self.p) {
            *g += beta / p;
        }
        self.gains[arm] += f64::from(reward) / self.p[arm];
        self.refresh();
    }
}

impl Learner for Exp3p {
    fn name(&self) -> &str {
        "exp3p"
    }

    fn play(&mut self, sim: &mut Simulator, rng: &mut dyn RngCore) -> Result<(), LearnerError> {
        let k = sim.num_arms();
        let horizon = sim.remaining();
        let params = match self.fixed {
            Some(p) => p,
            None => {
                Exp3pParams::tuned(k, horizon, self.delta_conf.unwrap_or(1.0 / horizon as f64))?
            }
        };
        self.reset(k, params);
        play_policy(self, sim, rng)
    }

    fn report(&self) -> serde_json::Value {
        serde_json::to_value(self.params).unwrap_or_default()
    }
}

/// Runs EXP3.P over whatever rounds remain, never failing on a short horizon.
pub(crate) fn fallback_exp3p(
    sim: &mut Simulator,
    rng: &mut dyn RngCore,
) -> Result<(), LearnerError> {
    let params = Exp3pParams::fallback(sim.num_arms(), sim.remaining());
    Exp3p::with_params(params).play(sim, rng)
}
