//! Deterministic simulator of a CBRS private-LTE deployment (eNBs, UEs and a
//! multi-element active smart surface) together with the autonomous control
//! stack that drives the surface: TDD time synchronization, blind
//! beamforming, channel-change handling and multi-eNB element selection.
//!
//! The crate is organized around the physical stack:
//!
//! - [`linkbudget`]: geometry, CBRS channel grid, phase quantization and the
//!   per-element link-budget arithmetic.
//! - [`tdd`]: LTE TDD frame structures and subframe clocks.
//! - [`filter`]: the varactor-tuned dual-mode resonator solver and the
//!   behavioral pass-band response used by the simulator.
//! - [`sim`]: the discrete-time air-link simulator emitting the DCI/RSRP
//!   streams a sniffer would observe.
//! - [`controller`]: the control loop consuming those streams.
//! - [`scenario`] / [`experiment`]: scenario files, experiment orchestration
//!   and CSV emission.

pub mod controller;
pub mod experiment;
pub mod filter;
pub mod linkbudget;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod tdd;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a numeric precondition (non-positive distance,
    /// zero element count, off-grid channel, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// No admittance sign change inside the search band.
    #[error("no resonance in [{lo_hz:.3e}, {hi_hz:.3e}] Hz")]
    NoResonance { lo_hz: f64, hi_hz: f64 },

    /// The requested tuning targets cannot be met; the message carries the
    /// achievable band as a diagnostic.
    #[error("infeasible filter design: {0}")]
    InfeasibleDesign(String),

    /// Scenario file could not be parsed or failed validation.
    #[error("scenario error: {0}")]
    Scenario(String),

    /// A record referenced an eNB or UE id the world does not contain.
    #[error("unknown id: {0}")]
    UnknownId(String),

    /// A metric was requested over a window containing no usable records.
    #[error("metric undefined: no records in window")]
    EmptyMetric,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
