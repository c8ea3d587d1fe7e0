//! Simulation and control toolkit for tendon-driven continuum manipulators.
//!
//! The crate models how the shape of the proximal shaft translates the
//! dead-zone/backlash hysteresis of each knob along the input axis, detects
//! that translation from motor current, and compares three open-loop
//! compensation strategies on a simulated catheter.
//!
//! Angles are radians everywhere in memory. Files (configs, parameter sets,
//! traces, reports) carry degrees.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod detector;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod hysteresis;
pub mod identify;
pub mod io;
pub mod plant;

pub use control::{Controller, ControllerKind, ControllerOptions};
pub use detector::{detect_shift, Detection, DetectorConfig, ShiftEstimate, Thresholds};
pub use dsp::{ButterworthLowpass, FilterSpec};
pub use error::{Error, Result};
pub use geometry::{KnobOffset, ShaftSegment, ShaftShape, TendonDeltas, TendonLengths};
pub use hysteresis::{Branch, Direction, HysteresisInputs, HysteresisParams, HysteresisState};
pub use plant::{Axis, CurrentModel, PlantAxis, PlantConfig, TraceSample};

/// Degrees to radians.
#[inline]
pub fn rad(deg: f64) -> f64 {
    deg.to_radians()
}

/// Radians to degrees.
#[inline]
pub fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}
