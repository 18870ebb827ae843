//! Offline evaluation of pattern-recognition myoelectric control on
//! continuous recordings that contain class transitions.
//!
//! The crate covers the whole evaluation chain:
//!
//! ```text
//! Recording ──notch bank──► frames ──TD features──► classifier ──► decision stream
//!     decision stream ──majority vote──► steady-state / transition labeling
//!     labeling + raw stream ──► TER/AER/INS and T_OFFSET/T_ONSET/T_TRANSITION/INS/TCE/PNM
//!     per-subject metrics ──► aggregate tables + Kruskal-Wallis / Dunn-Šidák / Pearson
//! ```
//!
//! A synthetic generator ([`dataset::generator`]) produces training ramps and
//! continuous transition tests that cover every ordered class pair.

pub mod classify;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod features;
pub mod metrics;
pub mod pipeline;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
