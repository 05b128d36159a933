//! Null-set complements of sumsets: Fourier tools on finite abelian groups,
//! Gauss-sum complements in binary fields, covering complements, fractal
//! test sets and the multiscale construction engine.

pub mod construction;
pub mod covering;
pub mod error;
pub mod finite_field;
pub mod fourier;
pub mod fractal;
pub mod geometry;
pub mod group;
pub mod large_sumset;
pub mod sumset;
pub mod threshold;

pub use error::{Error, Result};
pub use finite_field::{make_field, FieldElement, FieldSpec};
pub use geometry::{ElementarySet, LatticeBox, PointSet};
pub use group::{FiniteAbelianGroup, GroupFunction, GroupSubset};
pub use threshold::{ThresholdCheck, ThresholdPolicy};

/// Version tag carried by every certificate.
pub const SCHEMA: &str = "nullcover/1";

/// Exact rational parameters such as `eta` and `eps`.
pub type Rational = num_rational::Ratio<u64>;
