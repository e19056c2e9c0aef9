//! Isotropy stratification of compact group actions, critical orbits of
//! invariant functions, and desk-scale lattice gauge fields.

// `!(a < b)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod algebra;
pub mod bifurcation;
pub mod critical;
pub mod error;
pub mod invariants;
pub mod lattice;
pub mod linalg;
pub mod rng;
pub mod tol;

pub use error::{Error, Result};
