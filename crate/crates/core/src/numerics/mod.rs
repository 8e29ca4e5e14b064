//! Dense matrices, seeded randomness and a fixed-step RK4 integrator.

mod matrix;
mod ode;
mod rng;

pub use matrix::{gemm, DenseMatrix};
pub use ode::{integrate_ode, integrate_ode_observed, Trajectory};
pub use rng::{sample_gaussian_inputs, Rng, RngState};
