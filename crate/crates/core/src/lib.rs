//! Deterministic discrete-event simulator for satellite-ground collaborative
//! inference.
//!
//! A single satellite captures Earth-observation frames, splits them into
//! tiles, discards redundant tiles onboard, runs a lightweight detector and
//! routes each tile either as a compact result message or as the raw tile for
//! re-detection on the ground. Transfers happen only inside contact windows
//! derived from a circular-orbit model. The simulator accounts for bytes,
//! detection accuracy (mAP) and per-subsystem energy.
//!
//! Module map:
//!
//! * [`orbit`] - circular-orbit propagation, elevation, contact windows
//! * [`link`] - goodput, transfer times, window-gated store-and-forward scheduling
//! * [`imaging`] - synthetic corpus, tiling, redundancy filtering
//! * [`inference`] - detector profiles, routing, IoU/mAP, profile calibration
//! * [`energy`] - per-subsystem power accounting
//! * [`sim`] - scenarios, the event loop, reports, sweeps
//! * [`cli`] - scenario files, report files, command entry points

pub mod cli;
pub mod energy;
pub mod error;
pub mod imaging;
pub mod inference;
pub mod link;
pub mod orbit;
pub mod rng;
pub mod sim;

pub use error::{Error, FieldError, Result};
