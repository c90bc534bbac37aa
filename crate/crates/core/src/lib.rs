//! Sampled injectivity and invertibility certificates for nonsmooth maps
//! given in closed piecewise form.
//!
//! The crate is organised bottom-up:
//!
//! * [`mapdsl`] parses `.tmap` sources into [`PiecewiseMap`]s and evaluates
//!   values, forward-mode Jacobians and directional derivatives.
//! * [`matgeo`] measures matrices: distance to the singular matrices, the
//!   minor-based surrogate, kernels and leading-minor profiles.
//! * [`convexgeo`] answers hull queries over finite point clouds through a
//!   minimum-norm-point solver.
//! * [`certify`] samples Jacobians of a map and runs the injectivity
//!   criteria, producing [`certify::Certificate`]s with numeric witnesses.
//!
//! Every verdict is computed from finitely many samples and is labelled as
//! such; a pass is evidence, not a proof.

pub mod certify;
pub mod convexgeo;
pub mod mapdsl;
pub mod matgeo;
mod par;

pub use mapdsl::{parse_map, MapError, PiecewiseMap};
pub use par::Exec;
