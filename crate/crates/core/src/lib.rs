//! Geometry-driven dimensionality reduction for parametric shape families.
//!
//! The library builds a synthetic lofted-wing shape family from normalized
//! design variables, samples it with a Sobol sequence, and compares three
//! reduced representations of the sampled design space:
//!
//! * [`pme`] — linear parametric model embedding: a weighted generalized PCA
//!   over geometry augmented with the design variables, giving geometry-driven
//!   latent coordinates plus an analytic backmapping to the parameters.
//! * [`nlpme`] — the nonlinear extension: an encoder maps geometry to a latent
//!   vector, a decoder maps it to admissible parameters in the unit box, and
//!   geometry is recovered only through a frozen differentiable surrogate of
//!   the forward parametric map (or the exact generator at evaluation time).
//! * [`dae`] — a deep-autoencoder baseline reconstructing geometry directly.
//!
//! All methods are scored with the same normalized mean squared
//! reconstruction error in raw geometry units (see [`metrics`]).

pub mod bundle;
pub mod dae;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod neuralnet;
pub mod nlpme;
pub mod pme;
pub mod shapegen;
pub mod sobol;
pub mod surrogate;

pub use error::{Error, Result};
