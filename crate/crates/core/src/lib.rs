//! Core algorithms for charge-jump sensing on superconducting qubit arrays:
//! a seeded Monte-Carlo simulator of radiation impact events, the
//! matched-filter jump detection pipeline, and the statistical analyses
//! built on top of the detections (trigger-aligned T1 dips, inter-jump
//! delay fits, coincidence-vs-distance fits, and TLS-scrambling
//! classification from interleaved Stark spectroscopy).
//!
//! The crate is `no_std` + `alloc`; all IO, file formats, and the CLI live
//! in the companion `qrad` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chip;
pub mod detector;
pub mod error;
pub mod fit;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod tls;

pub use chip::{ChipLayout, ImpactEvent, OffsetCharge};
pub use detector::{DetectorParams, JumpDetection, MultiQubitJump};
pub use error::Error;
pub use sim::{RunRecord, SimConfig};
pub use tls::{SpectrumSeries, TlsConfig};

pub type Result<T> = core::result::Result<T, Error>;
