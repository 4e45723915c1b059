//! Simulation toolkit for in-mouth robotic bite transfer.
//!
//! The crate covers arm kinematics with and without a two-joint wrist, a
//! force-reactive impedance controller, the transfer state machine, food
//! scanning and mouth targeting, a simulated human, the wrist comfort study
//! and a 1 kHz trial harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod human;
pub mod kinematics;
pub mod perception;
pub mod presets;
pub mod study;
pub mod transfer;

pub use error::{Error, Result};
