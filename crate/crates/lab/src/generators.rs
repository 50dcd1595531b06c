//! Instance generators.

use bdes_core::{ArmSpec, EnvError, Instance};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("the two-arm separation family needs 0 < epsilon < 1/4, got {0}")]
    EpsilonOutOfRange(f64),

    #[error(transparent)]
    Env(#[from] EnvError),
}

/// The two-arm family on which no-external-regret learners suffer linear DES
/// regret: `(1/2, 1)` and `(3/4 - eps/2, 1/2 + 2 eps)`, with `lambda = 1`, `q0 = 1`.
pub fn gen_proposition1_instance(epsilon: f64, horizon: usize) -> Result<Instance, GenError> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(GenError::EpsilonOutOfRange(epsilon));
    }
    let arms = vec![
        ArmSpec::new(0.5, 1.0)?,
        ArmSpec::new(0.75 - epsilon / 2.0, 0.5 + 2.0 * epsilon)?,
    ];
    Ok(Instance::new(arms, 1.0, horizon)?.with_q0(1.0)?)
}

/// `k` arms with `r` and `b` drawn uniformly from `[0, 1]`.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    lambda: f64,
    horizon: usize,
) -> Result<Instance, EnvError> {
    let arms = (0..k)
        .map(|_| ArmSpec::new(rng.random(), rng.random()))
        .collect::<Result<Vec<_>, _>>()?;
    Instance::new(arms, lambda, horizon)
}
