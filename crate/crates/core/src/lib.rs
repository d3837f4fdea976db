//! Maximum-capture competitive facility location under random-utility demand.
//!
//! A firm opens up to `r` facilities among candidate sites `D` in a market
//! already served by competitors `E`. Customers pick the alternative with the
//! highest random utility; the firm maximizes its expected market share.
//!
//! The crate provides two resolution routes:
//!
//! * a simulation route ([`simulate`], [`binary`]) that draws noise scenarios,
//!   turns every simulated customer into a 0-1 coverage row, merges identical
//!   rows into weighted preference profiles, and solves the resulting maximum
//!   coverage problem exactly;
//! * the multicut outer-approximation method ([`moa`]) which solves the
//!   multinomial logit problem on a finite customer sample exactly.
//!
//! [`generators`] builds the synthetic instance families, [`analysis`] holds the
//! entropy measures and evaluation metrics, and [`experiment`] runs seeded
//! experiment grids that emit CSV reports.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod binary;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod io;
pub mod model;
pub mod moa;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{ChoiceInstance, DecisionVector, Facility, FacilityKind, Method, Point2D, Solution};
