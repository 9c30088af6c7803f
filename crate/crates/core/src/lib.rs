//! Interventional direct and indirect effects of longitudinal modified
//! treatment policies.
//!
//! The crate is `no_std` + `alloc`. With the default `std` feature, per-path
//! and per-fold work is spread over a rayon pool; results are identical for
//! any number of workers because every reduction runs sequentially over a
//! canonically ordered table.
//!
//! Layout:
//!
//! * [`panel`]: the longitudinal data model, histories, mediator paths, folds.
//! * [`learners`]: ridge / logistic-ridge / boosted trees and a convex stack.
//! * [`policy`]: treatment policies, pushforward pmfs, density-ratio tables.
//! * [`engine`]: sequential regressions, doubly robust D-functions, the
//!   one-step estimator, IPW and plug-in estimators, effect decomposition.
//! * [`scm`]: a declarative structural model, forward simulation,
//!   counterfactual rollouts and a Monte Carlo oracle.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod engine;
pub mod error;
pub mod learners;
pub mod math;
pub mod matrix;
pub mod panel;
pub mod policy;
pub mod rng;
pub mod scm;

mod crossfit;
mod par;

pub use error::{Error, ErrorClass, Result};
