//! Core library for a morphing-wing flapping-flight test platform.
//!
//! The crate covers the vehicle's design and analysis chain: two-pose
//! synthesis and kinematics of the wing-folding linkage (`linkage`), the
//! crank-rocker drive with its morphing decoupler (`crm`), the onboard
//! wingbeat-synchronized controller (`controller`), force-bench reduction
//! from raw load-cell records to trim maps (`aero`), and flight-log
//! processing for the rolling-maneuver experiments (`flightlog`).

pub mod aero;
pub mod controller;
pub mod crm;
pub mod flightlog;
pub mod linkage;
pub mod util;

pub use linkage::DEFAULT_SEED;
