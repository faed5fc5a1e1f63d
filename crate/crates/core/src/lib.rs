//! Modelling, optimization, calibration and emulation of an adaptive
//! beam-divergence transmitter for free-space laser links.
//!
//! - [`beam_optics`]: Gaussian and clipped-Gaussian far fields, gain, footprint.
//! - [`pointing`]: jitter loss and optimum divergence.
//! - [`link_budget`]: downlink received power, margin and maximum rate.
//! - [`actuator`]: emulator of the lens-group hardware.
//! - [`calibration`]: data reduction for bench measurements.
//! - [`sim`]: LEO pass geometry and closed-loop divergence control.
//! - [`config`]: the run configuration file shared by the CLI and simulator.

pub mod actuator;
pub mod beam_optics;
pub mod calibration;
pub mod config;
pub mod error;
pub mod link_budget;
pub mod pointing;
pub mod sim;

pub use error::{Error, Result};
