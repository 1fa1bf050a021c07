//! Photon-stream statistics for single-photon emitter characterization.
//!
//! This crate analyzes time-tagged photon detection streams from pulsed
//! Hanbury Brown–Twiss experiments on single quantum emitters:
//!
//! - **[`stream`]** — photon stream and intensity-trace data types, binary
//!   (`.psph`) and TSV on-disk formats, intensity binning and micro-times.
//! - **[`sim`]** — a Monte Carlo emitter simulator (two-state blinking,
//!   biexciton leakage, detector model) that generates ground-truth streams.
//! - **[`corr`]** — second-order correlation histograms, far-peak
//!   normalization, background cleaning, and g²(0) extraction.
//! - **[`lifetime`]** — photoluminescence decay histograms, tri-exponential
//!   and saturation-curve fitting, average lifetimes.
//! - **[`blinking`]** — ON/OFF trace segmentation, OFF-duration survival
//!   statistics with truncated power-law fitting, and FLID maps.
//! - **[`spectra`]** — emission-peak metrics (central wavelength, FWHM) and
//!   per-cohort statistics.
//!
//! Numerical building blocks ([`fit`], [`kde`]) are generic over the scalar
//! type through [`real::Real`]; the domain pipeline uses the [`Scalar`]
//! alias (`f64`) throughout.
//!
//! All absolute times are integer picoseconds (`u64`): a 600 s acquisition
//! is 6·10¹⁴ ps, comfortably inside the 64-bit range, and integer arithmetic
//! keeps long traces free of float drift.

pub mod blinking;
pub mod corr;
pub mod error;
pub mod fit;
pub mod flid;
pub mod kde;
pub mod lifetime;
pub mod real;
pub mod sim;
pub mod spectra;
pub mod stream;

pub use error::{Error, Result};

/// Concrete scalar used by the analysis pipeline.
pub type Scalar = f64;

/// Picoseconds per nanosecond.
pub const PS_PER_NS: u64 = 1_000;
/// Picoseconds per second.
pub const PS_PER_SEC: u64 = 1_000_000_000_000;
