//! Classical stochastic and adversarial bandit algorithms.
//!
//! None of them model the evolving state: they treat every arm as having a
//! fixed reward distribution and learn from realized 0/1 rewards only.

use bdes_core::learners::{play_policy, sample_index, Policy};
use bdes_core::{Learner, LearnerError, Simulator};
use rand::RngCore;
use serde::{Deserialize, Serialize};

fn positive(name: &str, value: f64) -> Result<f64, LearnerError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(LearnerError::InvalidParameter(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ucb1Params {
    /// Multiplier on the confidence radius; 1 by default.
    pub scale: Option<f64>,
}

/// UCB1: pull every arm once, then the arm maximizing
/// `mean + scale * sqrt(2 ln t / n)`.
#[derive(Debug, Clone)]
pub struct Ucb1 {
    scale: f64,
    t: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl Ucb1 {
    pub fn new(params: Ucb1Params) -> Result<Self, LearnerError> {
        Ok(Self {
            scale: positive("scale", params.scale.unwrap_or(1.0))?,
            t: 0,
            sums: Vec::new(),
            counts: Vec::new(),
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

impl Policy for Ucb1 {
    fn next_arm(&mut self, _rng: &mut dyn RngCore) -> usize {
        if let Some(unplayed) = self.counts.iter().position(|&n| n == 0) {
            return unplayed;
        }
        let log_t = (self.t as f64).ln();
        let mut best = (0, f64::NEG_INFINITY);
        for (i, (&s, &n)) in self.sums.iter().zip(&self.counts).enumerate() {
            let n = n as f64;
            let index = s / n + self.scale * (2.0 * log_t / n).sqrt();
            if index > best.1 {
                best = (i, index);
            }
        }
        best.0
    }

    fn observe(&mut self, arm: usize, reward: u8) {
        self.t += 1;
        self.counts[arm] += 1;
        self.sums[arm] += f64::from(reward);
    }
}

impl Learner for Ucb1 {
    fn name(&self) -> &str {
        "ucb1"
    }

    fn play(&mut self, sim: &mut Simulator, rng: &mut dyn RngCore) -> Result<(), LearnerError> {
        self.t = 0;
        self.sums = vec![0.0; sim.num_arms()];
        self.counts = vec![0; sim.num_arms()];
        play_policy(self, sim, rng)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp3Params {
    /// Uniform mixing weight; `min(1, sqrt(K ln K / ((e - 1) T)))` by default.
    pub gamma: Option<f64>,
    /// Learning rate; `gamma / K` by default.
    pub eta: Option<f64>,
}

/// EXP3: exponential weights over importance-weighted gains, mixed with
/// uniform exploration.
#[derive(Debug, Clone)]
pub struct Exp3 {
    params: Exp3Params,
    eta: f64,
    gamma: f64,
    gains: Vec<f64>,
    p: Vec<f64>,
}

impl Exp3 {
    pub fn new(params: Exp3Params) -> Result<Self, LearnerError> {
        if let Some(g) = params.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(LearnerError::InvalidParameter(format!(
                    "gamma must be in [0, 1], got {g}"
                )));
            }
        }
        if let Some(eta) = params.eta {
            positive("eta", eta)?;
        }
        Ok(Self {
            params,
            eta: 0.0,
            gamma: 0.0,
            gains: Vec::new(),
            p: Vec::new(),
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    fn refresh(&mut self) {
        let k = self.gains.len() as f64;
        let top = self
            .gains
            .iter()
            .map(|g| self.eta * g)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (p, g) in self.p.iter_mut().zip(&self.gains) {
            *p = (self.eta * g - top).exp();
            total += *p;
        }
        for p in &mut self.p {
            *p = (1.0 - self.gamma) * *p / total + self.gamma / k;
        }
    }
}

impl Policy for Exp3 {
    fn next_arm(&mut self, rng: &mut dyn RngCore) -> usize {
        sample_index(&self.p, rng)
    }

    fn observe(&mut self, arm: usize, reward: u8) {
        self.gains[arm] += f64::from(reward) / self.p[arm];
        self.refresh();
    }
}

impl Learner for Exp3 {
    fn name(&self) -> &str {
        "exp3"
    }

    fn play(&mut self, sim: &mut Simulator, rng: &mut dyn RngCore) -> Result<(), LearnerError> {
        let k = sim.num_arms();
        let (k_f, t) = (k as f64, sim.remaining() as f64);
        self.gamma = self.params.gamma.unwrap_or_else(|| {
            if k == 1 {
                0.0
            } else {
                (k_f * k_f.ln() / ((std::f64::consts::E - 1.0) * t))
                    .sqrt()
                    .min(1.0)
            }
        });
        self.eta = self.params.eta.unwrap_or(self.gamma / k_f);
        self.gains = vec![0.0; k];
        self.p = vec![1.0 / k_f; k];
        play_policy(self, sim, rng)
    }

    fn report(&self) -> serde_json::Value {
        serde_json::json!({ "eta": self.eta, "gamma": self.gamma })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AaeParams {
    /// Multiplier on the Hoeffding radius; 1 by default.
    pub scale: Option<f64>,
}

/// Active arm elimination: sweep the active arms round-robin and, after each
/// full sweep, drop every arm whose upper confidence bound falls below the best
/// lower bound. The radius after `n` pulls is `scale * sqrt(ln(2 K T) / (2 n))`.
#[derive(Debug, Clone)]
pub struct Aae {
    scale: f64,
    log_term: f64,
    active: Vec<usize>,
    cursor: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl Aae {
    pub fn new(params: AaeParams) -> Result<Self, LearnerError> {
        Ok(Self {
            scale: positive("scale", params.scale.unwrap_or(1.0))?,
            log_term: 0.0,
            active: Vec::new(),
            cursor: 0,
            sums: Vec::new(),
            counts: Vec::new(),
        })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    fn eliminate(&mut self) {
        let n = self.counts[self.active[0]] as f64;
        let radius = self.scale * (self.log_term / (2.0 * n)).sqrt();
        let best_lower = self
            .active
            .iter()
            .map(|&i| self.sums[i] / n - radius)
            .fold(f64::NEG_INFINITY, f64::max);
        let (sums, counts) = (&self.sums, &self.counts);
        self.active
            .retain(|&i| sums[i] / counts[i] as f64 + radius >= best_lower);
    }
}

impl Policy for Aae {
    fn next_arm(&mut self, _rng: &mut dyn RngCore) -> usize {
        self.active[self.cursor]
    }

    fn observe(&mut self, arm: usize, reward: u8) {
        self.counts[arm] += 1;
        self.sums[arm] += f64::from(reward);
        self.cursor += 1;
        if self.cursor == self.active.len() {
            self.cursor = 0;
            self.eliminate();
        }
    }
}

impl Learner for Aae {
    fn name(&self) -> &str {
        "aae"
    }

    fn play(&mut self, sim: &mut Simulator, rng: &mut dyn RngCore) -> Result<(), LearnerError> {
        let k = sim.num_arms();
        self.log_term = (2.0 * k as f64 * sim.remaining() as f64).ln();
        self.active = (0..k).collect();
        self.cursor = 0;
        self.sums = vec![0.0; k];
        self.counts = vec![0; k];
        play_policy(self, sim, rng)
    }

    fn report(&self) -> serde_json::Value {
        serde_json::json!({ "active": self.active })
    }
}
