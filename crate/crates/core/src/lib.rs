//! Numerical laboratory for decoupled sums of extended-real functions on R^n.
//!
//! Limits are approximated on refining point clouds and reported with traces and a
//! three-valued [`Verdict`](verdict::Verdict); nothing here is a proof.

pub mod decoupling;
pub mod dual;
pub mod ekeland;
pub mod error;
pub mod extreal;
pub mod gallery;
pub mod geometry;
pub mod multiplier;
pub mod oracle;
pub mod problem;
pub mod region;
pub mod report;
pub mod sampling;
pub mod semicontinuity;
pub mod sparse_control;
pub mod subdifferential;
pub mod verdict;

pub use error::{Error, Result};
pub use extreal::ExtReal;
pub use oracle::{FnOracle, SetOracle, SmoothMap};
pub use region::{ei_family_for, EIFamily, Region};
pub use sampling::{SampleMode, SampleScheme};
pub use verdict::{Status, Verdict};
