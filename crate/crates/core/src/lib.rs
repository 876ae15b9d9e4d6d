//! Identification of control-affine systems `ẋ = f(x) + g(x) u` from sampled
//! trajectories using control occupation kernels and a singular-value
//! decomposition of the associated Liouville operator.
//!
//! The pipeline is: [`Dataset`] → [`gram::GramSystem`] →
//! [`decomposition::Decomposition`] → [`IdentifiedModel`], which evaluates
//! the learned drift and control effectiveness and integrates predictions
//! under new inputs.

pub mod benchmark;
pub mod cli;
pub mod config;
pub mod data;
pub mod decomposition;
pub mod error;
pub mod gram;
pub mod kernels;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod signal;

pub use data::{load_dataset, save_dataset, Dataset, SampledTrajectory};
pub use decomposition::{Decomposition, PseudoInverse, DEFAULT_REL_TOL};
pub use error::{Error, ErrorKind, Result};
pub use kernels::KernelConfig;
pub use model::{load_model, save_model, ControlAffineField, IdentifiedModel, IdentifyOptions};
pub use signal::{ControlSignal, SampledSignal, SinusoidalInput, SumOfSinusoids};
