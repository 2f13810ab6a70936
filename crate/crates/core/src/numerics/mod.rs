//! Deterministic RNG, dense linear algebra, and statistical utilities
//! shared by every other module.

pub mod linalg;
pub mod rng;
pub mod stats;

pub use linalg::Matrix;
pub use rng::Rng;
pub use stats::{fit_scaling_law, mean_and_stderr, ScalingFit};
