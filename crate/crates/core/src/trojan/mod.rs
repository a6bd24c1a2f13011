//! Trojan gate insertion along critical or non-critical paths and the
//! approximation-ratio loss it causes after re-optimisation.

mod dag;

pub use dag::{critical_path, noncritical_path, to_dag, DagNode, GateDag, QubitPath};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate};
use crate::qaoa::{build_qaoa_circuit, expectation_mapped, optimize_with, Graph, QaoaError, QaoaResult};
use crate::transpile::{transpile, Backend, TranspileError};

pub const RX_ANGLE: f64 = 2.52;
pub const RZ_ANGLE: f64 = 6.91;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrojanError {
    #[error("circuit has no gates to analyse")]
    EmptyCircuit,
    #[error("a non-critical path needs at least two qubits")]
    SingleQubit,
    #[error("invalid trojan spec: {0}")]
    InvalidSpec(String),
    #[error("qubit {0} has no gates to anchor the insertion")]
    EmptyWire(usize),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Qaoa(#[from] QaoaError),
    #[error(transparent)]
    Transpile(#[from] TranspileError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrojanGate {
    X,
    H,
    RX,
    RZ,
    CX,
    Swap,
}

impl TrojanGate {
    pub const ALL: [TrojanGate; 6] = [
        TrojanGate::X,
        TrojanGate::H,
        TrojanGate::RX,
        TrojanGate::RZ,
        TrojanGate::CX,
        TrojanGate::Swap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TrojanGate::X => "x",
            TrojanGate::H => "h",
            TrojanGate::RX => "rx",
            TrojanGate::RZ => "rz",
            TrojanGate::CX => "cx",
            TrojanGate::Swap => "swap",
        }
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self, TrojanGate::RX | TrojanGate::RZ)
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, TrojanGate::CX | TrojanGate::Swap)
    }

    pub fn default_angle(&self) -> Option<f64> {
        match self {
            TrojanGate::RX => Some(RX_ANGLE),
            TrojanGate::RZ => Some(RZ_ANGLE),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Front,
    Middle,
    Back,
}

impl Position {
    pub const ALL: [Position; 3] = [Position::Front, Position::Middle, Position::Back];

    pub fn name(&self) -> &'static str {
        match self {
            Position::Front => "front",
            Position::Middle => "middle",
            Position::Back => "back",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Critical,
    Noncritical,
}

impl PathKind {
    pub const ALL: [PathKind; 2] = [PathKind::Critical, PathKind::Noncritical];

    pub fn name(&self) -> &'static str {
        match self {
            PathKind::Critical => "critical",
            PathKind::Noncritical => "noncritical",
        }
    }
}

macro_rules! display_and_parse {
    ($t:ty, $what:literal) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $t {
            type Err = TrojanError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::ALL
                    .into_iter()
                    .find(|v| v.name().eq_ignore_ascii_case(s))
                    .ok_or_else(|| TrojanError::InvalidSpec(format!("unknown {} `{s}`", $what)))
            }
        }
    };
}

display_and_parse!(TrojanGate, "gate type");
display_and_parse!(Position, "position");
display_and_parse!(PathKind, "path kind");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrojanSpec {
    pub gate_type: TrojanGate,
    pub angle: Option<f64>,
    pub count: usize,
    pub position: Position,
    pub path_kind: PathKind,
}

impl TrojanSpec {
    /// Rotations get their default angle.
    pub fn new(gate_type: TrojanGate, count: usize, position: Position, path_kind: PathKind) -> Result<Self, TrojanError> {
        let s = TrojanSpec {
            gate_type,
            angle: gate_type.default_angle(),
            count,
            position,
            path_kind,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_angle(mut self, angle: f64) -> Result<Self, TrojanError> {
        self.angle = Some(angle);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), TrojanError> {
        if !(1..=2).contains(&self.count) {
            return Err(TrojanError::InvalidSpec(format!("count {} not in 1..=2", self.count)));
        }
        match (self.gate_type.is_rotation(), self.angle) {
            (true, None) => Err(TrojanError::InvalidSpec(format!("{} needs an angle", self.gate_type))),
            (false, Some(_)) => Err(TrojanError::InvalidSpec(format!("{} takes no angle", self.gate_type))),
            (true, Some(a)) if !a.is_finite() => Err(TrojanError::InvalidSpec(format!("angle {a}"))),
            _ => Ok(()),
        }
    }

    /// Short label, e.g. `front-rx-2`.
    pub fn label(&self) -> String {
        format!("{}-{}-{}", self.position, self.gate_type, self.count)
    }

    fn gate_on(&self, q: usize, partner: usize) -> Gate {
        let angle = self.angle.unwrap_or(0.0);
        match self.gate_type {
            TrojanGate::X => Gate::x(q),
            TrojanGate::H => Gate::h(q),
            TrojanGate::RX => Gate::rx(angle, q),
            TrojanGate::RZ => Gate::rz(angle, q),
            TrojanGate::CX => Gate::cx(q, partner),
            TrojanGate::Swap => Gate::swap(q, partner),
        }
    }
}

/// Qubit and gate-list index where `spec` would place its first gate.
pub fn insertion_point(c: &Circuit, spec: &TrojanSpec) -> Result<(usize, usize), TrojanError> {
    let d = to_dag(c);
    let path = match spec.path_kind {
        PathKind::Critical => critical_path(&d)?,
        PathKind::Noncritical => noncritical_path(&d)?,
    };
    let q = path.qubit;
    let wire: Vec<usize> = c
        .wire_gate_indices(q)
        .into_iter()
        .filter(|&i| c.gates()[i].kind.is_unitary())
        .collect();
    let (Some(&first), Some(&last)) = (wire.first(), wire.last()) else {
        return Err(TrojanError::EmptyWire(q));
    };
    let index = match spec.position {
        Position::Front => first,
        Position::Middle => wire[(wire.len() / 2).max(1) - 1] + 1,
        Position::Back => last + 1,
    };
    Ok((q, index))
}

/// Insert `spec.count` copies of the Trojan gate at consecutive indices.
pub fn insert_trojan(c: &Circuit, spec: &TrojanSpec) -> Result<Circuit, TrojanError> {
    spec.validate()?;
    if spec.gate_type.is_two_qubit() && c.num_qubits() < 2 {
        return Err(TrojanError::InvalidSpec(format!(
            "{} needs two qubits, circuit has {}",
            spec.gate_type,
            c.num_qubits()
        )));
    }
    let (q, index) = insertion_point(c, spec)?;
    let partner = (0..c.num_qubits()).find(|&o| o != q).unwrap_or(q);
    let gate = spec.gate_on(q, partner);
    let mut out = c.clone();
    for k in 0..spec.count {
        out = out.insert_gate_at(index + k, gate.clone())?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArLoss {
    pub ar_clean: f64,
    pub ar_trojan: f64,
    pub loss_pct: f64,
}

impl ArLoss {
    fn new(ar_clean: f64, ar_trojan: f64) -> Self {
        ArLoss {
            ar_clean,
            ar_trojan,
            loss_pct: 100.0 * (ar_clean - ar_trojan) / ar_clean,
        }
    }
}

/// Optimise the plain ansatz compiled for `backend`.
pub fn optimize_compiled(g: &Graph, backend: Backend, p: usize, budget: usize, seed: u64) -> Result<QaoaResult, TrojanError> {
    Ok(optimize_with(g, p, budget, seed, |params| {
        let (t, layout) = transpile(&build_qaoa_circuit(g, params, false), backend)?;
        expectation_mapped(g, &t, &layout)
    })?)
}

/// Optimise the Trojan-inserted ansatz compiled for `backend`.
pub fn optimize_trojaned(
    g: &Graph,
    spec: &TrojanSpec,
    backend: Backend,
    p: usize,
    budget: usize,
    seed: u64,
) -> Result<QaoaResult, TrojanError> {
    spec.validate()?;
    let probe = build_qaoa_circuit(g, &crate::qaoa::initial_point(p, seed), false);
    insert_trojan(&probe, spec)?;
    Ok(optimize_with(g, p, budget, seed, |params| {
        let t = insert_trojan(&build_qaoa_circuit(g, params, false), spec).map_err(|e| match e {
            TrojanError::Qaoa(q) => q,
            TrojanError::Circuit(c) => QaoaError::Circuit(c),
            other => QaoaError::InvalidParams(other.to_string()),
        })?;
        let (t, layout) = transpile(&t, backend)?;
        expectation_mapped(g, &t, &layout)
    })?)
}

/// Clean versus Trojan-inserted approximation ratio under equal budgets.
pub fn ar_loss(g: &Graph, spec: &TrojanSpec, backend: Backend, p: usize, budget: usize, seed: u64) -> Result<ArLoss, TrojanError> {
    let clean = optimize_compiled(g, backend, p, budget, seed)?;
    let troj = optimize_trojaned(g, spec, backend, p, budget, seed)?;
    Ok(ArLoss::new(clean.ar, troj.ar))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gate_type: TrojanGate,
    pub count: usize,
    pub position: Position,
    pub path_kind: PathKind,
    pub backend: Backend,
    pub ar_clean: f64,
    pub ar_trojan: f64,
    pub loss_pct: f64,
}

/// X at every position and path kind, then each gate type at the front of
/// the critical path. Twelve rows in that order.
pub fn sweep_specs() -> Vec<TrojanSpec> {
    let mut specs = Vec::with_capacity(12);
    for position in Position::ALL {
        for path_kind in PathKind::ALL {
            specs.push(TrojanSpec::new(TrojanGate::X, 1, position, path_kind).expect("valid"));
        }
    }
    for gate in TrojanGate::ALL {
        specs.push(TrojanSpec::new(gate, 1, Position::Front, PathKind::Critical).expect("valid"));
    }
    specs
}

pub fn vulnerability_sweep(g: &Graph, backend: Backend, budget: usize, seed: u64) -> Result<Vec<SweepRow>, TrojanError> {
    let clean = optimize_compiled(g, backend, 1, budget, seed)?;
    sweep_specs()
        .into_iter()
        .map(|spec| {
            let troj = optimize_trojaned(g, &spec, backend, 1, budget, seed)?;
            let l = ArLoss::new(clean.ar, troj.ar);
            Ok(SweepRow {
                gate_type: spec.gate_type,
                count: spec.count,
                position: spec.position,
                path_kind: spec.path_kind,
                backend,
                ar_clean: l.ar_clean,
                ar_trojan: l.ar_trojan,
                loss_pct: l.loss_pct,
            })
        })
        .collect()
}

/// Fixed benchmark set: 4-cycle, diamond, K4, 5-cycle, 5-node wheel.
pub fn benchmark_graphs() -> Vec<(&'static str, Graph)> {
    let g = |n, e: &[(usize, usize)]| Graph::unweighted(n, e).expect("valid benchmark graph");
    vec![
        ("cycle4", g(4, &[(0, 1), (1, 2), (2, 3), (0, 3)])),
        ("diamond", g(4, &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)])),
        ("k4", g(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])),
        ("cycle5", g(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])),
        ("wheel5", g(5, &[(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4), (1, 4)])),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub graph: String,
    pub nodes: usize,
    pub edges: usize,
    pub backend: Backend,
    pub ar_clean: f64,
    pub ar_trojan: f64,
    pub loss_pct: f64,
}

/// X at the front of the critical path on every benchmark graph.
pub fn benchmark(backend: Backend, budget: usize, seed: u64) -> Result<Vec<BenchmarkRow>, TrojanError> {
    let spec = TrojanSpec::new(TrojanGate::X, 1, Position::Front, PathKind::Critical)?;
    benchmark_graphs()
        .into_iter()
        .map(|(name, g)| {
            let l = ar_loss(&g, &spec, backend, 1, budget, seed)?;
            Ok(BenchmarkRow {
                graph: name.to_string(),
                nodes: g.num_nodes(),
                edges: g.edges().len(),
                backend,
                ar_clean: l.ar_clean,
                ar_trojan: l.ar_trojan,
                loss_pct: l.loss_pct,
            })
        })
        .collect()
}
