//! Random-cluster model laboratory on finite subgraphs of the square lattice.
//!
//! The crate is organised bottom-up: [`lattice`] provides geometry, [`exact`]
//! enumerates small domains, [`sampler`] runs Markov chains on large ones,
//! [`coupling`] builds monotone couplings from decision trees, [`observables`]
//! estimates crossing/arm/mixing quantities, [`parafermion`] handles the loop
//! representation at q = 4 and [`scaling`] houses the exponent table.

// Parameter checks are written `!(x > 0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod coupling;
mod dsu;
mod error;
pub mod exact;
pub mod lattice;
pub mod observables;
pub mod parafermion;
mod scalar;
pub mod sampler;
pub mod scaling;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub use num_rational::Ratio;

/// Double-precision model parameters.
pub type Params = exact::ModelParams<f64>;
/// Single-precision model parameters.
pub type Params32 = exact::ModelParams<f32>;
/// Double-precision exponent set.
pub type Exponents = scaling::ExponentSet<f64>;
/// Exponent set in exact rational arithmetic, for rational values of kappa.
pub type ExactExponents = scaling::ExponentSet<Ratio<i64>>;
