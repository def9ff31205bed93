//! Magnetic trajectories of Killing magnetic fields on Euclidean 3-space.
//!
//! The crate pairs two independent routes to the same curves:
//!
//! * closed-form parametrizations built on Jacobi elliptic functions
//!   ([`closedform`]), selected by the case analysis in [`classify`];
//! * direct adaptive integration of the Lorentz equation `γ'' = V × γ'`
//!   ([`integrate`]), with the two prime integrals monitored as drift.
//!
//! The elliptic kernel ([`elliptic`]) and the field definitions ([`fields`])
//! are shared by both.

pub mod classify;
pub mod closedform;
pub mod elliptic;
pub mod error;
pub mod fields;
pub mod integrate;
pub mod output;

pub use error::{Error, Result};
