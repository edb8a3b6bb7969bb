//! Nonadiabatic holonomic gates on Jaynes-Cummings polariton qubits.

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod gates;
pub mod jc_model;
pub mod pulses;
pub mod robustness;
pub mod single_qubit;
pub mod two_qubit;

pub use error::{Error, Result};
