//! Laplace deconvolution by Laguerre expansion, triangular Toeplitz inversion
//! and penalized model selection.
//!
//! The observations are `y(t_i) = ∫₀^{t_i} g(t_i − τ) f(τ) dτ + σ ε_i`. The
//! kernel `g` is expanded on the Laguerre functions, which turns the
//! convolution into a lower-triangular Toeplitz system; the model size is
//! chosen by minimizing a penalized contrast.

pub mod baseline;
pub mod design;
pub mod error;
pub mod laguerre;
pub mod linalg;
pub mod quadrature;
pub mod select;
pub mod simulate;
pub mod toeplitz;

pub use design::{Observations, ZMode};
pub use error::{Error, Result};
pub use laguerre::{CoeffVector, LaguerreBasis, QuadratureConfig};
pub use select::{fit, AlphaMode, EstimatorConfig, ModelFit, PenaltyTable};
pub use toeplitz::LowerToeplitz;
