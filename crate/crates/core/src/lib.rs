//! Simulation core for bandits whose hidden state evolves deterministically
//! with every pull: environment, offline planners, learners and regret
//! evaluation.

pub mod env;
pub mod evaluation;
pub mod learners;
pub mod planner;

pub use env::{ArmSpec, EnvError, Instance, NoiseKind, NoiseModel, Simulator, StateTrace};
pub use evaluation::{RegretCurve, Trajectory, TrajectoryFlag};
pub use learners::{Learner, LearnerError};
pub use planner::{benchmark_opt, Plan, PlanError, PlannerConfig};
