//! Hardware-Trojan injection into compiled QAOA circuits and a small CNN
//! that detects it from the compiled unitary.

pub mod circuit;
pub mod cnn;
pub mod dataset;
pub mod optim;
pub mod qaoa;
pub mod scalar;
pub mod sim;
pub mod transpile;
pub mod trojan;

pub use circuit::{Circuit, CircuitError, Gate, GateKind};
pub use qaoa::{Graph, QaoaParams, QaoaResult};
pub use scalar::Real;
pub use sim::{StateVector, UnitaryMatrix};
pub use transpile::{transpile, Backend, LayoutMap};

pub type StateVectorF64 = sim::StateVector<f64>;
pub type UnitaryF64 = sim::UnitaryMatrix<f64>;

/// Detector in training precision.
pub type TrojanNet = cnn::Model<f32>;
/// Double-precision twin used for numerical checks.
pub type TrojanNetF64 = cnn::Model<f64>;
