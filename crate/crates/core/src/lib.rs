//! KD-tree pairwise likelihood (KD-T PL) estimation for spatial error models
//! on irregular point sets.
//!
//! The pipeline pairs every location with a nearby free location using a
//! KD-tree ([`coupling`]), reduces the paired observations to six sufficient
//! statistics and solves the pairwise-likelihood estimating equations in
//! closed form ([`pl`]). A full maximum-likelihood spatial error model fit
//! ([`fl`]), a Gaussian-field data generator ([`datagen`]) and a Monte Carlo
//! and timing harness ([`experiments`]) sit alongside for comparison.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod fl;
pub mod io;
pub mod optim;
pub mod pl;
pub mod spatial;

pub use error::{Error, Result};
