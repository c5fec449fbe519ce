//! Point processes and Poisson random measures on cone-punctured metric spaces.
//!
//! The crate works with spaces `(S, d, C)` where `C` is a closed cone and
//! measures live on `O = S \ C`. It provides:
//!
//! - [`cone_space`]: the supported spaces with metric, cone distance and
//!   scalar multiplication, including the product `[0, inf) x S`.
//! - [`measures`]: finite atomic measures and homogeneous limit measures
//!   with exact masses on tail sets.
//! - [`mo_metric`]: exact Prohorov distance between atomic measures and the
//!   `d_{M_O}` metric built on it.
//! - [`prm`]: Poisson random measure simulation, mapping and marking.
//! - [`laplace`]: test functions and Laplace functionals.
//! - [`regvar`]: heavy-tailed samplers, scaling functions and
//!   regular-variation checks.
//! - [`convergence`]: the complete-convergence experiment, Poisson count
//!   tests and tightness diagnostics.
//! - [`cli`]: the `mo-pp` command line runner.

pub mod cli;
pub mod cone_space;
pub mod convergence;
mod error;
pub mod laplace;
mod maxflow;
pub mod measures;
pub mod mo_metric;
pub mod prm;
pub mod quad;
pub mod regvar;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
