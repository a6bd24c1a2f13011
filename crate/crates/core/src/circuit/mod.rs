//! Flat gate-list circuit representation.
//!
//! A [`Circuit`] is an ordered list of [`Gate`]s over `num_qubits` qubits and
//! `num_clbits` classical bits. Every gate is validated when it enters a
//! circuit, so a constructed circuit always satisfies:
//!
//! * qubit operands are distinct and in range, with the arity of the kind;
//! * rotation kinds carry their angle, everything else carries none;
//! * nothing except a barrier touches a qubit after it has been measured;
//! * measurement targets are in range of the classical register.

mod qasm;

pub use qasm::{emit_qasm, parse_qasm, QasmError};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("classical bit {clbit} out of range for {num_clbits} classical bits")]
    ClbitOutOfRange { clbit: usize, num_clbits: usize },
    #[error("{kind} takes {expected} qubit(s), got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{kind} has repeated qubit operand {qubit}")]
    DuplicateQubit { kind: &'static str, qubit: usize },
    #[error("measure requires a classical bit target")]
    MissingClbit,
    #[error("{kind} cannot carry a classical bit")]
    UnexpectedClbit { kind: &'static str },
    #[error("{kind} on qubit {qubit} follows a measurement of that qubit")]
    GateAfterMeasure { kind: &'static str, qubit: usize },
    #[error("insertion index {index} out of range for {len} gates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("rotation angle {0} is not finite")]
    NonFiniteAngle(f64),
}

/// The closed gate set understood by the pipeline. Angles are radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    H,
    X,
    SX,
    RX(f64),
    RZ(f64),
    CX,
    Swap,
    Barrier,
    Measure,
}

impl GateKind {
    /// Lower-case OpenQASM mnemonic.
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::SX => "sx",
            GateKind::RX(_) => "rx",
            GateKind::RZ(_) => "rz",
            GateKind::CX => "cx",
            GateKind::Swap => "swap",
            GateKind::Barrier => "barrier",
            GateKind::Measure => "measure",
        }
    }

    /// Required operand count; `None` for barrier (any positive count).
    pub fn arity(&self) -> Option<usize> {
        match self {
            GateKind::CX | GateKind::Swap => Some(2),
            GateKind::Barrier => None,
            _ => Some(1),
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            GateKind::RX(theta) | GateKind::RZ(theta) => Some(theta),
            _ => None,
        }
    }

    /// True for kinds with a unitary action (everything but barrier/measure).
    pub fn is_unitary(&self) -> bool {
        !matches!(self, GateKind::Barrier | GateKind::Measure)
    }

    /// Same kind ignoring the rotation angle.
    pub fn same_family(&self, other: &GateKind) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

/// One gate occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub clbit: Option<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, qubits: Vec<usize>) -> Self {
        Gate {
            kind,
            qubits,
            clbit: None,
        }
    }

    pub fn h(q: usize) -> Self {
        Gate::new(GateKind::H, vec![q])
    }

    pub fn x(q: usize) -> Self {
        Gate::new(GateKind::X, vec![q])
    }

    pub fn sx(q: usize) -> Self {
        Gate::new(GateKind::SX, vec![q])
    }

    pub fn rx(theta: f64, q: usize) -> Self {
        Gate::new(GateKind::RX(theta), vec![q])
    }

    pub fn rz(theta: f64, q: usize) -> Self {
        Gate::new(GateKind::RZ(theta), vec![q])
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Gate::new(GateKind::CX, vec![control, target])
    }

    pub fn swap(a: usize, b: usize) -> Self {
        Gate::new(GateKind::Swap, vec![a, b])
    }

    pub fn barrier(qubits: Vec<usize>) -> Self {
        Gate::new(GateKind::Barrier, qubits)
    }

    pub fn measure(qubit: usize, clbit: usize) -> Self {
        Gate {
            kind: GateKind::Measure,
            qubits: vec![qubit],
            clbit: Some(clbit),
        }
    }

    pub fn touches(&self, q: usize) -> bool {
        self.qubits.contains(&q)
    }

    /// Check operand structure against a register of the given size.
    pub fn validate(&self, num_qubits: usize, num_clbits: usize) -> Result<(), CircuitError> {
        let kind = self.kind.name();
        match self.kind.arity() {
            Some(expected) if expected != self.qubits.len() => {
                return Err(CircuitError::Arity {
                    kind,
                    expected,
                    got: self.qubits.len(),
                })
            }
            None if self.qubits.is_empty() => {
                return Err(CircuitError::Arity {
                    kind,
                    expected: 1,
                    got: 0,
                })
            }
            _ => {}
        }
        for (i, &q) in self.qubits.iter().enumerate() {
            if q >= num_qubits {
                return Err(CircuitError::QubitOutOfRange {
                    qubit: q,
                    num_qubits,
                });
            }
            if self.qubits[..i].contains(&q) {
                return Err(CircuitError::DuplicateQubit { kind, qubit: q });
            }
        }
        if let Some(theta) = self.kind.angle() {
            if !theta.is_finite() {
                return Err(CircuitError::NonFiniteAngle(theta));
            }
        }
        match (self.kind, self.clbit) {
            (GateKind::Measure, None) => Err(CircuitError::MissingClbit),
            (GateKind::Measure, Some(c)) if c >= num_clbits => Err(CircuitError::ClbitOutOfRange {
                clbit: c,
                num_clbits,
            }),
            (GateKind::Measure, Some(_)) => Ok(()),
            (_, Some(_)) => Err(CircuitError::UnexpectedClbit { kind }),
            (_, None) => Ok(()),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        if let Some(theta) = self.kind.angle() {
            write!(f, "({theta})")?;
        }
        let qs: Vec<String> = self.qubits.iter().map(|q| q.to_string()).collect();
        write!(f, " {}", qs.join(","))?;
        if let Some(c) = self.clbit {
            write!(f, " -> {c}")?;
        }
        Ok(())
    }
}

/// Ordered gate list over a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    name: String,
    num_qubits: usize,
    num_clbits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize, num_clbits: usize) -> Self {
        Circuit {
            name: String::from("circuit"),
            num_qubits,
            num_clbits,
            gates: Vec::new(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Build a circuit from a gate list, validating every gate in order.
    pub fn from_gates(
        num_qubits: usize,
        num_clbits: usize,
        gates: impl IntoIterator<Item = Gate>,
    ) -> Result<Self, CircuitError> {
        let mut c = Circuit::new(num_qubits, num_clbits);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    /// Append a gate after validating it against the register and the
    /// measurement history.
    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        gate.validate(self.num_qubits, self.num_clbits)?;
        if gate.kind != GateKind::Barrier {
            if let Some(&q) = gate.qubits.iter().find(|&&q| self.is_measured(q)) {
                return Err(CircuitError::GateAfterMeasure {
                    kind: gate.kind.name(),
                    qubit: q,
                });
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    fn is_measured(&self, q: usize) -> bool {
        self.gates
            .iter()
            .any(|g| g.kind == GateKind::Measure && g.qubits[0] == q)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_clbits(&self) -> usize {
        self.num_clbits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn has_measure(&self) -> bool {
        self.gates.iter().any(|g| g.kind == GateKind::Measure)
    }

    /// New circuit with `gate` placed at `index` in the gate list; every other
    /// gate keeps its relative order.
    pub fn insert_gate_at(&self, index: usize, gate: Gate) -> Result<Circuit, CircuitError> {
        if index > self.gates.len() {
            return Err(CircuitError::IndexOutOfRange {
                index,
                len: self.gates.len(),
            });
        }
        let mut gates = self.gates.clone();
        gates.insert(index, gate);
        Circuit::from_gates(self.num_qubits, self.num_clbits, gates)
            .map(|c| c.with_name(self.name.clone()))
    }

    /// Copy with measurements and barriers removed.
    pub fn unitary_part(&self) -> Circuit {
        Circuit {
            name: self.name.clone(),
            num_qubits: self.num_qubits,
            num_clbits: self.num_clbits,
            gates: self
                .gates
                .iter()
                .filter(|g| g.kind.is_unitary())
                .cloned()
                .collect(),
        }
    }

    /// Indices into the gate list of the gates acting on wire `q`.
    pub fn wire_gate_indices(&self, q: usize) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.touches(q))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count_kind(&self, pred: impl Fn(&GateKind) -> bool) -> usize {
        self.gates.iter().filter(|g| pred(&g.kind)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_gate_after_measure() {
        let mut c = Circuit::new(2, 2);
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::measure(0, 0)).unwrap();
        c.push(Gate::h(1)).unwrap();
        assert_eq!(
            c.push(Gate::x(0)),
            Err(CircuitError::GateAfterMeasure {
                kind: "x",
                qubit: 0
            })
        );
        assert!(c.push(Gate::barrier(vec![0, 1])).is_ok());
        assert!(c.push(Gate::cx(1, 0)).is_err());
    }

    #[test]
    fn operand_checks() {
        let c = Circuit::new(2, 1);
        assert!(matches!(
            Circuit::from_gates(2, 0, [Gate::cx(0, 0)]),
            Err(CircuitError::DuplicateQubit { .. })
        ));
        assert!(matches!(
            Circuit::from_gates(2, 0, [Gate::h(2)]),
            Err(CircuitError::QubitOutOfRange { qubit: 2, .. })
        ));
        assert!(matches!(
            Circuit::from_gates(2, 0, [Gate::new(GateKind::CX, vec![0])]),
            Err(CircuitError::Arity { expected: 2, .. })
        ));
        assert!(matches!(
            Circuit::from_gates(1, 1, [Gate::measure(0, 1)]),
            Err(CircuitError::ClbitOutOfRange { .. })
        ));
        assert!(matches!(
            c.insert_gate_at(0, Gate::rx(f64::NAN, 0)),
            Err(CircuitError::NonFiniteAngle(_))
        ));
    }

    #[test]
    fn insert_front_and_end() {
        let c = Circuit::from_gates(1, 0, [Gate::h(0)]).unwrap();
        let front = c.insert_gate_at(0, Gate::x(0)).unwrap();
        assert_eq!(front.gates(), &[Gate::x(0), Gate::h(0)]);
        let back = c.insert_gate_at(1, Gate::x(0)).unwrap();
        assert_eq!(back.gates(), &[Gate::h(0), Gate::x(0)]);
        assert_eq!(
            c.insert_gate_at(2, Gate::x(0)),
            Err(CircuitError::IndexOutOfRange { index: 2, len: 1 })
        );
        assert!(c.insert_gate_at(0, Gate::x(1)).is_err());
    }

    #[test]
    fn insert_respects_measure_order() {
        let c = Circuit::from_gates(1, 1, [Gate::h(0), Gate::measure(0, 0)]).unwrap();
        assert!(c.insert_gate_at(1, Gate::x(0)).is_ok());
        assert!(matches!(
            c.insert_gate_at(2, Gate::x(0)),
            Err(CircuitError::GateAfterMeasure { .. })
        ));
    }

    #[test]
    fn wire_indices() {
        let c = Circuit::from_gates(3, 0, [Gate::h(0), Gate::h(1), Gate::cx(0, 2), Gate::x(2)])
            .unwrap();
        assert_eq!(c.wire_gate_indices(0), vec![0, 2]);
        assert_eq!(c.wire_gate_indices(2), vec![2, 3]);
        assert_eq!(c.wire_gate_indices(1), vec![1]);
    }
}
