//! Frame-independent variational mechanics for a point mass.
//!
//! The crate works in one canonical chart per spacetime model and keeps
//! dimensions attached to every user-facing value. See the README for the
//! module map.

pub mod dual;
pub mod error;
pub mod groups;
mod linalg;
pub mod lagrangians;
pub mod quantities;
pub mod sampling;
pub mod spacetime;
pub mod symmetry;
pub mod variational;

pub use error::{Error, Result};
pub use groups::{exp_generator, is_member, standard_basis, AffineMap, Generator};
pub use lagrangians::{are_equivalent, is_full_time_derivative, LagrangianSpec, Phi};
pub use quantities::{Dim, Quantity};
pub use sampling::SamplingConfig;
pub use spacetime::{Event, FourVector, FutureVector, ModelKind, Velocity};
