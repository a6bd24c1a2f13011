//! Toy compiler with two targets.
//!
//! * [`Backend::Ideal`]: unconstrained simulator target. Gates pass through
//!   and one peephole cancellation pass runs.
//! * [`Backend::Linear5`]: five physical qubits coupled in a line
//!   `0-1-2-3-4`, basis `{rz, sx, x, cx}`. Routing starts from the trivial
//!   layout and walks the first operand of every non-adjacent two-qubit gate
//!   toward the second with SWAPs; gates are then rewritten into the basis
//!   and the cancellation pass runs. Measurements move to the end and are
//!   remapped through the final layout.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, GateKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TranspileError {
    #[error("circuit has {qubits} qubits but backend {backend} has {max}")]
    TooManyQubits {
        qubits: usize,
        max: usize,
        backend: Backend,
    },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Ideal,
    Linear5,
}

const LINEAR5_COUPLING: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 4)];

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::Ideal, Backend::Linear5];

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Ideal => "ideal",
            Backend::Linear5 => "linear5",
        }
    }

    /// Whether `kind` is a native gate of this backend. Barriers and
    /// measurements are always accepted.
    pub fn supports(&self, kind: &GateKind) -> bool {
        match (self, kind) {
            (_, GateKind::Barrier | GateKind::Measure) => true,
            (Backend::Ideal, _) => true,
            (Backend::Linear5, k) => matches!(
                k,
                GateKind::RZ(_) | GateKind::SX | GateKind::X | GateKind::CX
            ),
        }
    }

    pub fn basis(&self) -> &'static [&'static str] {
        match self {
            Backend::Ideal => &["h", "x", "sx", "rx", "rz", "cx", "swap"],
            Backend::Linear5 => &["rz", "sx", "x", "cx"],
        }
    }

    /// Undirected coupling edges, `None` when all pairs are allowed.
    pub fn coupling(&self) -> Option<&'static [(usize, usize)]> {
        match self {
            Backend::Ideal => None,
            Backend::Linear5 => Some(&LINEAR5_COUPLING),
        }
    }

    pub fn num_physical(&self) -> Option<usize> {
        match self {
            Backend::Ideal => None,
            Backend::Linear5 => Some(5),
        }
    }

    pub fn is_coupled(&self, a: usize, b: usize) -> bool {
        match self.coupling() {
            None => true,
            Some(edges) => edges
                .iter()
                .any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b)),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ideal" => Ok(Backend::Ideal),
            "linear5" => Ok(Backend::Linear5),
            other => Err(format!("unknown backend `{other}` (expected ideal or linear5)")),
        }
    }
}

/// Logical-to-physical qubit assignment before and after routing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutMap {
    initial: Vec<usize>,
    #[serde(rename = "final")]
    final_layout: Vec<usize>,
}

impl LayoutMap {
    pub fn identity(n: usize) -> Self {
        LayoutMap {
            initial: (0..n).collect(),
            final_layout: (0..n).collect(),
        }
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    /// `final_layout()[l]` is the physical qubit holding logical qubit `l`
    /// at the end of the circuit.
    pub fn final_layout(&self) -> &[usize] {
        &self.final_layout
    }

    pub fn is_identity(&self) -> bool {
        self.final_layout.iter().enumerate().all(|(l, &p)| l == p)
    }
}

/// Compile `c` for `backend`.
pub fn transpile(c: &Circuit, backend: Backend) -> Result<(Circuit, LayoutMap), TranspileError> {
    match backend {
        Backend::Ideal => {
            let gates = cancel_pass(c.gates().iter().cloned(), c.num_qubits());
            let out = Circuit::from_gates(c.num_qubits(), c.num_clbits(), gates)?
                .with_name(c.name().to_string());
            Ok((out, LayoutMap::identity(c.num_qubits())))
        }
        Backend::Linear5 => {
            let width = 5;
            if c.num_qubits() > width {
                return Err(TranspileError::TooManyQubits {
                    qubits: c.num_qubits(),
                    max: width,
                    backend,
                });
            }
            let (routed, measures, layout) = route_linear(c, width);
            let lowered = routed.into_iter().flat_map(lower_to_linear5_basis);
            let mut gates = cancel_pass(lowered, width);
            gates.extend(
                measures
                    .into_iter()
                    .map(|(q, clbit)| Gate::measure(layout.final_layout[q], clbit)),
            );
            let out = Circuit::from_gates(width, c.num_clbits(), gates)?
                .with_name(c.name().to_string());
            Ok((out, layout))
        }
    }
}

type Routed = (Vec<Gate>, Vec<(usize, usize)>, LayoutMap);

/// Route onto a line of `width` physical qubits. Returns the physical gate
/// list (SWAPs unexpanded), deferred measurements as `(logical, clbit)`, and
/// the layout. Layouts cover all `width` positions; idle logical qubits
/// `n..width` pad the register.
fn route_linear(c: &Circuit, width: usize) -> Routed {
    let mut l2p: Vec<usize> = (0..width).collect();
    let mut p2l: Vec<usize> = (0..width).collect();
    let mut out = Vec::with_capacity(c.len() * 2);
    let mut measures = Vec::new();

    for g in c.gates() {
        match g.kind {
            GateKind::Measure => {
                measures.push((g.qubits[0], g.clbit.expect("validated measure")));
            }
            GateKind::CX | GateKind::Swap => {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                loop {
                    let (pa, pb) = (l2p[a], l2p[b]);
                    if pa.abs_diff(pb) == 1 {
                        break;
                    }
                    let next = if pa < pb { pa + 1 } else { pa - 1 };
                    out.push(Gate::swap(pa, next));
                    let (la, ln) = (p2l[pa], p2l[next]);
                    l2p.swap(la, ln);
                    p2l.swap(pa, next);
                }
                out.push(Gate::new(g.kind, vec![l2p[a], l2p[b]]));
            }
            kind => out.push(Gate::new(kind, g.qubits.iter().map(|&q| l2p[q]).collect())),
        }
    }
    let layout = LayoutMap {
        initial: (0..width).collect(),
        final_layout: l2p,
    };
    (out, measures, layout)
}

fn h_as_basis(q: usize) -> [Gate; 3] {
    [Gate::rz(FRAC_PI_2, q), Gate::sx(q), Gate::rz(FRAC_PI_2, q)]
}

/// Rewrite one physical gate into `{rz, sx, x, cx}`.
fn lower_to_linear5_basis(g: Gate) -> Vec<Gate> {
    match g.kind {
        GateKind::H => h_as_basis(g.qubits[0]).to_vec(),
        GateKind::RX(theta) => {
            // RX(t) = H RZ(t) H
            let q = g.qubits[0];
            let mut v = h_as_basis(q).to_vec();
            v.push(Gate::rz(theta, q));
            v.extend(h_as_basis(q));
            v
        }
        GateKind::Swap => {
            let (a, b) = (g.qubits[0], g.qubits[1]);
            vec![Gate::cx(a, b), Gate::cx(b, a), Gate::cx(a, b)]
        }
        _ => vec![g],
    }
}

fn is_multiple_of_two_pi(theta: f64) -> bool {
    let r = theta.rem_euclid(2.0 * PI);
    r < 1e-12 || 2.0 * PI - r < 1e-12
}

/// One left-to-right peephole pass. A gate is compared with the most recent
/// surviving gate on its wires; when that gate sits on exactly the same
/// operands, `x x`, `h h` and `cx cx` cancel, and `rz`/`rx` pairs merge (the
/// merged rotation is dropped when its angle is a multiple of 2pi). Barriers
/// and measurements block cancellation.
pub fn cancel_pass(gates: impl IntoIterator<Item = Gate>, num_qubits: usize) -> Vec<Gate> {
    let mut out: Vec<Option<Gate>> = Vec::new();
    let mut wires: Vec<Vec<usize>> = vec![Vec::new(); num_qubits];

    for g in gates {
        let prev = g
            .qubits
            .iter()
            .map(|&q| wires[q].last().copied())
            .collect::<Vec<_>>();
        let candidate = match prev.first() {
            Some(&Some(i)) if prev.iter().all(|p| *p == Some(i)) => Some(i),
            _ => None,
        };
        if let Some(i) = candidate {
            let last = out[i].as_ref().expect("wire tops are live gates");
            if last.qubits == g.qubits {
                match (last.kind, g.kind) {
                    (GateKind::X, GateKind::X)
                    | (GateKind::H, GateKind::H)
                    | (GateKind::CX, GateKind::CX) => {
                        out[i] = None;
                        for &q in &g.qubits {
                            wires[q].pop();
                        }
                        continue;
                    }
                    (GateKind::RZ(a), GateKind::RZ(b)) | (GateKind::RX(a), GateKind::RX(b))
                        if last.kind.same_family(&g.kind) =>
                    {
                        let merged = a + b;
                        if is_multiple_of_two_pi(merged) {
                            out[i] = None;
                            wires[g.qubits[0]].pop();
                        } else {
                            let kind = match g.kind {
                                GateKind::RZ(_) => GateKind::RZ(merged),
                                _ => GateKind::RX(merged),
                            };
                            out[i] = Some(Gate::new(kind, g.qubits.clone()));
                        }
                        continue;
                    }
                    _ => {}
                }
            }
        }
        let idx = out.len();
        for &q in &g.qubits {
            wires[q].push(idx);
        }
        out.push(Some(g));
    }
    out.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{circuit_unitary, gate_unitary, qubit_permutation};

    #[test]
    fn ideal_passes_h_through() {
        let c = Circuit::from_gates(1, 0, [Gate::h(0)]).unwrap();
        let (out, layout) = transpile(&c, Backend::Ideal).unwrap();
        assert_eq!(out.gates(), c.gates());
        assert!(layout.is_identity());
    }

    #[test]
    fn linear5_h_decomposition() {
        let c = Circuit::from_gates(1, 0, [Gate::h(0)]).unwrap();
        let (out, _) = transpile(&c, Backend::Linear5).unwrap();
        assert_eq!(out.num_qubits(), 5);
        assert_eq!(
            out.gates(),
            &[Gate::rz(FRAC_PI_2, 0), Gate::sx(0), Gate::rz(FRAC_PI_2, 0)]
        );
        let one = Circuit::from_gates(1, 0, out.gates().to_vec()).unwrap();
        let u = circuit_unitary::<f64>(&one).unwrap();
        let h = gate_unitary::<f64>(&Gate::h(0), 1).unwrap();
        assert!(u.equal_up_to_phase(&h, 1e-12));
        // The phase is exp(-i pi/4).
        let ratio = u.get(0, 0) / h.get(0, 0);
        assert!((ratio.arg() + std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn linear5_routes_distant_cx() {
        let c = Circuit::from_gates(3, 0, [Gate::cx(0, 2)]).unwrap();
        let (out, layout) = transpile(&c, Backend::Linear5).unwrap();
        // One SWAP(0,1) expanded to three CX, then the CX itself.
        assert_eq!(out.count_kind(|k| *k == GateKind::CX), 4);
        assert_eq!(layout.final_layout(), &[1, 0, 2, 3, 4]);
        for g in out.gates() {
            assert!(Backend::Linear5.supports(&g.kind));
            if g.qubits.len() == 2 {
                assert!(Backend::Linear5.is_coupled(g.qubits[0], g.qubits[1]));
            }
        }
        let wide = Circuit::from_gates(5, 0, c.gates().to_vec()).unwrap();
        let expect = qubit_permutation::<f64>(layout.final_layout())
            .matmul(&circuit_unitary::<f64>(&wide).unwrap());
        assert!(circuit_unitary::<f64>(&out).unwrap().equal_up_to_phase(&expect, 1e-9));
    }

    #[test]
    fn linear5_rejects_six_qubits() {
        let c = Circuit::new(6, 0);
        assert!(matches!(
            transpile(&c, Backend::Linear5),
            Err(TranspileError::TooManyQubits { qubits: 6, max: 5, .. })
        ));
    }

    #[test]
    fn measures_follow_final_layout() {
        let c = Circuit::from_gates(
            3,
            3,
            [
                Gate::h(0),
                Gate::measure(1, 1),
                Gate::cx(0, 2),
                Gate::measure(0, 0),
                Gate::measure(2, 2),
            ],
        )
        .unwrap();
        let (out, layout) = transpile(&c, Backend::Linear5).unwrap();
        let measures: Vec<_> = out
            .gates()
            .iter()
            .filter(|g| g.kind == GateKind::Measure)
            .map(|g| (g.qubits[0], g.clbit.unwrap()))
            .collect();
        let fl = layout.final_layout();
        assert_eq!(measures, vec![(fl[1], 1), (fl[0], 0), (fl[2], 2)]);
        assert!(out.gates()[out.len() - 3..].iter().all(|g| g.kind == GateKind::Measure));
    }

    #[test]
    fn cancellation_rules() {
        let gates = vec![
            Gate::x(0),
            Gate::x(0),
            Gate::h(1),
            Gate::cx(0, 1),
            Gate::cx(0, 1),
            Gate::h(1),
            Gate::rz(0.3, 0),
            Gate::rz(0.4, 0),
            Gate::rx(1.0, 1),
            Gate::rx(-1.0, 1),
        ];
        let out = cancel_pass(gates, 2);
        assert_eq!(out.len(), 1);
        match out[0].kind {
            GateKind::RZ(t) => assert!((t - 0.7).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cancellation_respects_operands_and_barriers() {
        let gates = vec![
            Gate::cx(0, 1),
            Gate::cx(1, 0),
            Gate::x(2),
            Gate::barrier(vec![2]),
            Gate::x(2),
            Gate::h(0),
            Gate::x(1),
            Gate::h(0),
        ];
        let out = cancel_pass(gates.clone(), 3);
        // cx(0,1) cx(1,0) differ; x barrier x blocked; h x h on other wire cancels.
        assert_eq!(
            out,
            vec![
                Gate::cx(0, 1),
                Gate::cx(1, 0),
                Gate::x(2),
                Gate::barrier(vec![2]),
                Gate::x(2),
                Gate::x(1),
            ]
        );
    }

    #[test]
    fn backend_names_round_trip() {
        for b in Backend::ALL {
            assert_eq!(b.name().parse::<Backend>().unwrap(), b);
        }
        assert!("manila".parse::<Backend>().is_err());
    }
}
