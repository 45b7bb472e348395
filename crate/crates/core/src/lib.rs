//! Synchronous base-band CDMA multiuser detection.
//!
//! The crate simulates M users sharing a channel through length-N ±1
//! spreading codes and detects their bits with three receivers:
//!
//! - a conventional correlator that only knows the quarter of each
//!   user's channel phase,
//! - multistage partial parallel interference cancelation driven by a
//!   single NLMS recursion (modified LMS-PPIC),
//! - the same pipeline driven by a bank of NLMS recursions with
//!   different step sizes (modified PLMS-PPIC), which also estimates
//!   the channel phases from the final cancelation weights.
//!
//! [`harness`] runs Monte Carlo BER sweeps over balanced, unbalanced
//! and Rayleigh-fading channels and writes CSV reports.

pub mod channels;
pub mod config;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod signal_model;

pub use error::{Error, Result};
