//! Numerical toolkit for diffusion on Φ-manifolds: model metrics, the
//! blown-up heat space, a mode-reduced solver with Duhamel convolution,
//! sampled weighted Hölder norms, empirical mapping-property checks and a
//! Picard scheme for semilinear problems.

pub mod error;
pub mod field;
pub mod geometry;
pub mod heatspace;
pub mod holder;
pub mod io;
pub mod numerics;
pub mod picard;
pub mod schauder;
pub mod solver;

pub use error::{PhiError, Result};
pub use field::{Field, Grid, ModeSet, Profile};
pub use geometry::{PhiModel, Point};
