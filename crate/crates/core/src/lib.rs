//! Shrinkage kinetics of polymers: depolymerisation and fragmentation.
//!
//! The crate covers two families of problems.
//!
//! * **Depolymerisation** ([`depoly`], [`depoly_inverse`]): the rescaled
//!   constant-rate Becker–Döring shortening system `dc_i/dt = (b/ε)(c_{i+1} - c_i)`,
//!   its transport and transport–diffusion approximations, and the
//!   reconstruction of the initial size distribution from a moment time
//!   series (first-order characteristics route, Tikhonov and Kalman routes
//!   for the second-order model).
//! * **Fragmentation** ([`frag_forward`], [`frag_inverse`]): the pure
//!   fragmentation equation with rate `α x^γ` and kernel `κ` on `(0, 1)`,
//!   solved for measure-valued data through its series representation, with a
//!   method-of-lines oracle and the self-similar profile; estimation of
//!   `(α, γ, κ)` from size samples.
//!
//! [`measures`] holds the shared substrate: signed measures made of atoms plus
//! a piecewise-constant density, TV and bounded-Lipschitz norms, Mellin
//! transforms, multiplicative convolution, sampling and kernel density
//! estimation.
//!
//! All numerical code is generic over the scalar type through [`Real`]
//! (`f32` and `f64`); the `*64` aliases below are what the CLI and the
//! acceptance suite use.

// Negated comparisons are how NaN inputs are rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::should_implement_trait)]

pub mod depoly;
pub mod depoly_inverse;
pub mod error;
pub mod frag_forward;
pub mod frag_inverse;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod quadrature;
pub mod scalar;

pub use error::{Error, Result, Warning};
pub use scalar::Real;

pub type Measure64 = measures::Measure<f64>;
pub type Measure32 = measures::Measure<f32>;
pub type MellinLine64 = measures::MellinLine<f64>;
pub type SampleSet64 = measures::SampleSet<f64>;
pub type DiscreteState64 = depoly::DiscreteState<f64>;
pub type GridFunction64 = depoly::GridFunction<f64>;
pub type MomentSeries64 = depoly::MomentSeries<f64>;
pub type FragmentationKernel64 = frag_forward::FragmentationKernel<f64>;
pub type FragmentationParams64 = frag_forward::FragmentationParams<f64>;
pub type SeriesTable64 = frag_forward::SeriesTable<f64>;
pub type KappaEstimate64 = frag_inverse::KappaEstimate<f64>;
pub type GammaFit64 = frag_inverse::GammaFit<f64>;
