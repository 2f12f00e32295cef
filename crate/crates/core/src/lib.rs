//! Cycle-driven model of an FPGA car-parking controller.
//!
//! The crate models the gate controller together with its peripherals: a
//! 16x2 character LCD, the door stepper motor, IR slot sensors reached over
//! an HT12E/HT12D serial link, the visitor identification FSM and the
//! 32-slot allocator. Everything is advanced by a deterministic cycle
//! scheduler that records a change-only trace and writes VCD.

pub mod bench;
pub mod controller;
pub mod ident;
pub mod lcd;
pub mod rf;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod slots;
pub mod stepper;
pub mod vcd;

pub use controller::{ControllerState, ParkingSystem, SystemConfig, TopInputs, TopOutputs};
pub use sim::{Cycle, Simulation, Trace};
