//! B-DES environment.
//!
//! Every arm carries an in-the-vacuum reward `r` and an end state `b`. A hidden
//! state `q` multiplies the reward and moves towards the end state of the arm
//! that was just pulled:
//!
//! ```text
//! q_{t+1} = (1 - lambda) * q_t + lambda * b_{I_t}
//! ```
//!
//! The reward of round `t` is `Bern(r_{I_t} * q_t)`, so the first pull is made
//! at the initial state `q0`. An optional [`NoiseModel`] perturbs the state used
//! for sampling without touching the deterministic trace.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{Trajectory, TrajectoryFlag};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfUnitInterval { name: &'static str, value: f64 },

    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("an instance needs at least one arm")]
    NoArms,

    #[error("horizon must be at least 1")]
    ZeroHorizon,

    #[error("noise sigma must be nonnegative, got {0}")]
    NegativeSigma(f64),

    #[error("arm index {arm} out of range for {num_arms} arms")]
    InvalidArm { arm: usize, num_arms: usize },

    #[error("horizon of {horizon} rounds is exhausted")]
    HorizonExhausted { horizon: usize },

    #[error("invalid instance JSON: {0}")]
    Json(String),
}

pub(crate) fn unit(name: &'static str, value: f64) -> Result<f64, EnvError> {
    if !value.is_finite() {
        return Err(EnvError::NonFinite { name, value });
    }
    if !(0.0..=1.0).contains(&value) {
        return Err(EnvError::OutOfUnitInterval { name, value });
    }
    Ok(value)
}

/// Parameters of a single arm: in-the-vacuum reward `r` and end state `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub r: f64,
    pub b: f64,
}

impl ArmSpec {
    pub fn new(r: f64, b: f64) -> Result<Self, EnvError> {
        Ok(Self {
            r: unit("r", r)?,
            b: unit("b", b)?,
        })
    }

    fn validate(&self) -> Result<(), EnvError> {
        unit("r", self.r)?;
        unit("b", self.b)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Uniform on `[-sigma*sqrt(3), sigma*sqrt(3)]`, which has standard deviation `sigma`.
    TruncatedUniform,
}

/// Zero-mean perturbation of the state used for reward sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    #[serde(default)]
    pub kind: NoiseKind,
    /// Clip `q + nu` to `[0, 1]` before it becomes a Bernoulli parameter.
    #[serde(default = "default_clip")]
    pub clip: bool,
}

fn default_clip() -> bool {
    true
}

impl NoiseModel {
    pub fn new(sigma: f64, kind: NoiseKind) -> Result<Self, EnvError> {
        let model = Self {
            sigma,
            kind,
            clip: true,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn gaussian(sigma: f64) -> Result<Self, EnvError> {
        Self::new(sigma, NoiseKind::Gaussian)
    }

    fn validate(&self) -> Result<(), EnvError> {
        if !self.sigma.is_finite() {
            return Err(EnvError::NonFinite {
                name: "sigma",
                value: self.sigma,
            });
        }
        if self.sigma < 0.0 {
            return Err(EnvError::NegativeSigma(self.sigma));
        }
        Ok(())
    }

    pub fn is_noop(&self) -> bool {
        self.sigma == 0.0
    }
}

/// A B-DES problem: arms, evolution rate, horizon, initial state and optional noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct Instance {
    arms: Vec<ArmSpec>,
    lambda: f64,
    horizon: usize,
    q0: f64,
    noise: Option<NoiseModel>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRepr {
    lambda: f64,
    horizon: usize,
    #[serde(default = "default_q0")]
    q0: f64,
    arms: Vec<ArmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseModel>,
}

fn default_q0() -> f64 {
    1.0
}

impl TryFrom<InstanceRepr> for Instance {
    type Error = EnvError;

    fn try_from(repr: InstanceRepr) -> Result<Self, EnvError> {
        let mut instance = Instance::new(repr.arms, repr.lambda, repr.horizon)?.with_q0(repr.q0)?;
        if let Some(noise) = repr.noise {
            instance = instance.with_noise(noise)?;
        }
        Ok(instance)
    }
}

impl From<Instance> for InstanceRepr {
    fn from(instance: Instance) -> Self {
        Self {
            lambda: instance.lambda,
            horizon: instance.horizon,
            q0: instance.q0,
            arms: instance.arms,
            noise: instance.noise,
        }
    }
}

impl Instance {
    /// Builds an instance with `q0 = 1` and no noise.
    pub fn new(arms: Vec<ArmSpec>, lambda: f64, horizon: usize) -> Result<Self, EnvError> {
        if arms.is_empty() {
            return Err(EnvError::NoArms);
        }
        for arm in &arms {
            arm.validate()?;
        }
        if horizon == 0 {
            return Err(EnvError::ZeroHorizon);
        }
        Ok(Self {
            arms,
            lambda: unit("lambda", lambda)?,
            horizon,
            q0: 1.0,
            noise: None,
        })
    }

    pub fn from_pairs(pairs: &[(f64, f64)], lambda: f64, horizon: usize) -> Result<Self, EnvError> {
        let arms = pairs
            .iter()
            .map(|&(r, b)| ArmSpec::new(r, b))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(arms, lambda, horizon)
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        serde_json::from_str(text).map_err(|e| EnvError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn with_q0(mut self, q0: f64) -> Result<Self, EnvError> {
        self.q0 = unit("q0", q0)?;
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Result<Self, EnvError> {
        noise.validate()?;
        self.noise = Some(noise);
        Ok(self)
    }

    pub fn without_noise(mut self) -> Self {
        self.noise = None;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self, EnvError> {
        if horizon == 0 {
            return Err(EnvError::ZeroHorizon);
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self, EnvError> {
        self.lambda = unit("lambda", lambda)?;
        Ok(self)
    }

    pub fn arms(&self) -> &[ArmSpec] {
        &self.arms
    }

    pub fn arm(&self, index: usize) -> Result<&ArmSpec, EnvError> {
        self.arms.get(index).ok_or(EnvError::InvalidArm {
            arm: index,
            num_arms: self.arms.len(),
        })
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }

    /// Per-round states `q_1..q_len` and the expected total reward of `sequence`.
    pub fn evaluate(&self, sequence: &[usize]) -> Result<(Vec<f64>, f64), EnvError> {
        let mut q = self.q0;
        let mut states = Vec::with_capacity(sequence.len());
        let mut total = 0.0;
        for &i in sequence {
            let arm = self.arm(i)?;
            states.push(q);
            total += expected_reward(arm.r, q);
            q = advance(q, arm.b, self.lambda);
        }
        Ok((states, total))
    }
}

#[inline]
pub(crate) fn advance(q: f64, b: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * q + lambda * b
}

/// One step of the state recursion.
pub fn state_update(q: f64, b: f64, lambda: f64) -> Result<f64, EnvError> {
    Ok(advance(
        unit("q", q)?,
        unit("b", b)?,
        unit("lambda", lambda)?,
    ))
}

/// State after pulling arms with end states `end_states` from `q0`, in closed form:
/// `(1-lambda)^t q0 + lambda * sum_s (1-lambda)^(t-1-s) b_s`.
pub fn closed_form_state(lambda: f64, q0: f64, end_states: &[f64]) -> Result<f64, EnvError> {
    unit("lambda", lambda)?;
    unit("q0", q0)?;
    let t = end_states.len();
    let keep = 1.0 - lambda;
    let mut acc = 0.0;
    for (s, &b) in end_states.iter().enumerate() {
        acc += keep.powi((t - 1 - s) as i32) * unit("b", b)?;
    }
    Ok(keep.powi(t as i32) * q0 + lambda * acc)
}

pub fn expected_reward(r: f64, q: f64) -> f64 {
    r * q
}

/// State used as the Bernoulli multiplier under `noise`.
///
/// With `clip = false` the raw `q + nu` is returned; sampling still treats values
/// outside `[0, 1]` as certain failure or success. Draws nothing when `sigma = 0`.
pub fn noisy_effective_state<R: Rng + ?Sized>(q: f64, noise: &NoiseModel, rng: &mut R) -> f64 {
    if noise.is_noop() {
        return q;
    }
    let nu = match noise.kind {
        NoiseKind::Gaussian => Normal::new(0.0, noise.sigma)
            .expect("sigma is finite and positive")
            .sample(rng),
        NoiseKind::TruncatedUniform => {
            let half = noise.sigma * 3f64.sqrt();
            rng.random_range(-half..=half)
        }
    };
    let perturbed = q + nu;
    if noise.clip {
        perturbed.clamp(0.0, 1.0)
    } else {
        perturbed
    }
}

/// Deterministic state of one run: round counter, current state and pull history.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrace {
    t: usize,
    q: f64,
    history: Vec<usize>,
}

impl StateTrace {
    pub fn new(q0: f64) -> Self {
        Self {
            t: 0,
            q: q0,
            history: Vec::new(),
        }
    }

    pub fn start(instance: &Instance) -> Self {
        Self::new(instance.q0())
    }

    pub fn round(&self) -> usize {
        self.t
    }

    pub fn state(&self) -> f64 {
        self.q
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    /// Pulls `arm` and returns the 0/1 reward. On error the trace is left untouched.
    pub fn pull<R: Rng + ?Sized>(
        &mut self,
        instance: &Instance,
        arm: usize,
        rng: &mut R,
    ) -> Result<u8, EnvError> {
        if self.t >= instance.horizon() {
            return Err(EnvError::HorizonExhausted {
                horizon: instance.horizon(),
            });
        }
        let spec = *instance.arm(arm)?;
        let q_eff = match instance.noise() {
            Some(noise) => noisy_effective_state(self.q, noise, rng),
            None => self.q,
        };
        let p = expected_reward(spec.r, q_eff);
        let reward = u8::from(rng.random::<f64>() < p);
        self.q = advance(self.q, spec.b, instance.lambda());
        self.history.push(arm);
        self.t += 1;
        Ok(reward)
    }
}

/// The learner-facing side of an instance.
///
/// Exposes the number of arms, the horizon and the evolution rate, and records
/// everything a [`Trajectory`] needs. Arm parameters, the state and the noise
/// model stay hidden.
pub struct Simulator<'a> {
    instance: &'a Instance,
    trace: StateTrace,
    rng: ChaCha8Rng,
    trajectory: Trajectory,
}

impl<'a> Simulator<'a> {
    pub fn new(instance: &'a Instance, rng: ChaCha8Rng) -> Self {
        Self {
            instance,
            trace: StateTrace::start(instance),
            rng,
            trajectory: Trajectory::with_capacity(instance.horizon()),
        }
    }

    pub fn num_arms(&self) -> usize {
        self.instance.num_arms()
    }

    pub fn horizon(&self) -> usize {
        self.instance.horizon()
    }

    pub fn lambda(&self) -> f64 {
        self.instance.lambda()
    }

    pub fn round(&self) -> usize {
        self.trace.round()
    }

    pub fn remaining(&self) -> usize {
        self.horizon() - self.round()
    }

    pub fn last_arm(&self) -> Option<usize> {
        self.trace.history().last().copied()
    }

    pub fn pull(&mut self, arm: usize) -> Result<u8, EnvError> {
        let q = self.trace.state();
        let reward = self.trace.pull(self.instance, arm, &mut self.rng)?;
        let r = self.instance.arms()[arm].r;
        self.trajectory.push(arm, reward, expected_reward(r, q), q);
        Ok(reward)
    }

    pub fn flag(&mut self, flag: TrajectoryFlag) {
        self.trajectory.flags.push(flag);
    }

    pub fn finish(self) -> Trajectory {
        self.trajectory
    }
}
