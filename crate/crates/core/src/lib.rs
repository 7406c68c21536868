//! Numerical laboratory for weak-type endpoint estimates of sparse operators.
//!
//! The crate works on a finite dyadic model of `[0, 1)` and provides:
//!
//! * [`dyadic`]: cubes, step functions, cell sets, weak norms and the dyadic
//!   maximal function;
//! * [`orlicz`]: Young functions, complementary functions, Luxemburg norms,
//!   Orlicz maximal functions and the series constant `c_φ`;
//! * [`weights`]: `A_p`, `A_1`, `A_∞` characteristics, reverse Hölder checks
//!   and weight generators;
//! * [`sparse`]: sparse families, sparse operators and square functions, and
//!   the band/layer decompositions used by the weak-type arguments;
//! * [`verify`]: inequality verifiers producing [`verify::VerificationReport`]s
//!   over reproducible corpora;
//! * [`search`]: randomized hill climbing for extremal instances.

pub mod dyadic;
pub mod error;
pub mod orlicz;
pub mod search;
pub mod sparse;
pub mod verify;
pub mod weights;

pub use dyadic::{CellSet, Cube, CubeField, DyadicGrid, StepFunction};
pub use error::{Error, Result};
pub use orlicz::YoungFunction;
pub use sparse::{LayeredFamily, PowerFamily, SparseFamily, SparseStrategy};
pub use weights::{Weight, WeightSpec};
