//! Surprisal-based consistency checks of parametric time-series model
//! classes against observed data, with the autoregressive and state-space
//! machinery needed to run them and classical whiteness tests for comparison.
//!
//! The central entry point is [`check::itmc_run`]: for parameter draws from a
//! [`model::PosteriorSampler`] it compares the surprisal of the observed data
//! with surprisals of replicated data and averages the resulting two-sided
//! p-values.
//!
//! ```
//! use modelcheck::armodels::{generate_case, Ar1PosteriorSampler, ArModelClass, SyntheticCase};
//! use modelcheck::{itmc_run, RngStream};
//!
//! // AR(1) data floored from below: long records are flagged.
//! let y = generate_case(&SyntheticCase::II, 1000, &mut RngStream::new(1, 0).rng())?;
//! let model = ArModelClass::new(1, 1.0)?;
//! let posterior = Ar1PosteriorSampler::new(&y.observations, 0.0, 1.0, 1.0)?;
//! let r = itmc_run(&model, &posterior, &y, 20, 50, &RngStream::new(1, 1))?;
//! assert!(r.rho_star < 0.05);
//! # Ok::<(), modelcheck::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod armodels;
pub mod check;
pub mod error;
pub mod model;
pub mod ssm;
pub mod stats;

pub use check::{itmc_cumulative, itmc_run, ljung_box, two_sided_pvalue, ItmcResult, LjungBoxResult};
pub use error::{Error, Result};
pub use model::{
    validate_trajectory, FixedDraws, GenerativeModel, ParamVector, PosteriorDraws, PosteriorSampler, Trajectory,
};
pub use stats::RngStream;
