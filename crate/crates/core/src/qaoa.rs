//! Max-Cut instances, the p-layer QAOA ansatz, exact expectation values and
//! the budgeted classical outer loop.
//!
//! Graph node `i` is qubit `i`. The cost block for edge `(j, k)` with weight
//! `w` is `cx(j,k) rz(-gamma*w, k) cx(j,k)`, which equals
//! `exp(-i gamma w (1 - Z_j Z_k) / 2)` up to global phase; the mixer is
//! `rx(2*beta)` on every qubit.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate};
use crate::optim::{nelder_mead, NelderMeadOptions, OptimError};
use crate::sim::{evolve, SimError, StateVector};
use crate::transpile::{LayoutMap, TranspileError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QaoaError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("malformed graph file at line {line}: {message}")]
    GraphFormat { line: usize, message: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("assignment has {got} bits, graph has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("circuit acts on {circuit} qubits, graph has {graph} nodes")]
    QubitMismatch { graph: usize, circuit: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Transpile(#[from] TranspileError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Undirected weighted graph with edges sorted by `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Validate and normalise: endpoints are reordered so `i < j` and edges
    /// sorted. Self-loops, duplicates, non-finite weights and isolated nodes
    /// are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self, QaoaError> {
        let mut es: Vec<Edge> = Vec::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(QaoaError::InvalidGraph(format!("self-loop on node {a}")));
            }
            let (i, j) = (a.min(b), a.max(b));
            if j >= n {
                return Err(QaoaError::InvalidGraph(format!("edge ({a},{b}) outside {n} nodes")));
            }
            if !w.is_finite() {
                return Err(QaoaError::InvalidGraph(format!("edge ({a},{b}) weight {w}")));
            }
            es.push(Edge { i, j, w });
        }
        es.sort_by_key(|e| (e.i, e.j));
        if let Some(d) = es.windows(2).find(|p| (p[0].i, p[0].j) == (p[1].i, p[1].j)) {
            return Err(QaoaError::InvalidGraph(format!("duplicate edge ({},{})", d[0].i, d[0].j)));
        }
        let mut degree = vec![0usize; n];
        for e in &es {
            degree[e.i] += 1;
            degree[e.j] += 1;
        }
        if let Some(v) = degree.iter().position(|&d| d == 0) {
            return Err(QaoaError::InvalidGraph(format!("node {v} is isolated")));
        }
        Ok(Graph { n, edges: es })
    }

    /// Unit-weight graph.
    pub fn unweighted(n: usize, edges: &[(usize, usize)]) -> Result<Self, QaoaError> {
        Graph::new(n, edges.iter().map(|&(i, j)| (i, j, 1.0)))
    }

    pub fn triangle() -> Self {
        Graph::unweighted(3, &[(0, 1), (0, 2), (1, 2)]).expect("valid triangle")
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    /// Text form: first line `n m`, then `i j w` per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for e in &self.edges {
            s.push_str(&format!("{} {} {}\n", e.i, e.j, e.w));
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self, QaoaError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let bad = |line: usize, message: &str| QaoaError::GraphFormat {
            line,
            message: message.to_string(),
        };
        let (hl, header) = lines.next().ok_or_else(|| bad(1, "missing `n m` header"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let [n, m] = head.as_slice() else {
            return Err(bad(hl, "header must be `n m`"));
        };
        let n: usize = n.parse().map_err(|_| bad(hl, "node count is not an integer"))?;
        let m: usize = m.parse().map_err(|_| bad(hl, "edge count is not an integer"))?;
        let mut edges = Vec::with_capacity(m);
        for (ln, l) in lines.by_ref().take(m) {
            let f: Vec<&str> = l.split_whitespace().collect();
            let [i, j, w] = f.as_slice() else {
                return Err(bad(ln, "edge line must be `i j w`"));
            };
            let i: usize = i.parse().map_err(|_| bad(ln, "bad endpoint"))?;
            let j: usize = j.parse().map_err(|_| bad(ln, "bad endpoint"))?;
            let w: f64 = w.parse().map_err(|_| bad(ln, "bad weight"))?;
            edges.push((i, j, w));
        }
        if edges.len() != m {
            return Err(bad(hl, &format!("header declares {m} edges, found {}", edges.len())));
        }
        if let Some((ln, _)) = lines.next() {
            return Err(bad(ln, "trailing content after the declared edges"));
        }
        Graph::new(n, edges)
    }

    /// Cut value of the assignment encoded by basis index `z` (bit `i` is
    /// node `i`).
    pub fn cut_of_index(&self, z: usize) -> f64 {
        self.edges
            .iter()
            .filter(|e| ((z >> e.i) ^ (z >> e.j)) & 1 == 1)
            .map(|e| e.w)
            .sum()
    }

    /// Cut values for all `2^n` assignments.
    pub fn cut_table(&self) -> Vec<f64> {
        (0..1usize << self.n).map(|z| self.cut_of_index(z)).collect()
    }
}

/// Node partition; bit `i` set means node `i` is on side 1. Printed
/// most-significant first, matching sampled bitstrings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Assignment {
    bits: usize,
    n: usize,
}

impl Assignment {
    pub fn new(bits: usize, n: usize) -> Self {
        Assignment { bits, n }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::sim::bitstring(self.bits, self.n))
    }
}

impl FromStr for Assignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bits = 0usize;
        for ch in s.chars() {
            bits = (bits << 1)
                | match ch {
                    '0' => 0,
                    '1' => 1,
                    other => return Err(format!("`{other}` is not a bit")),
                };
        }
        Ok(Assignment { bits, n: s.len() })
    }
}

/// Exhaustive Max-Cut. Ties go to the numerically smallest assignment.
pub fn brute_force_maxcut(g: &Graph) -> (f64, Assignment) {
    let mut best = (f64::NEG_INFINITY, 0usize);
    for z in 0..1usize << g.n {
        let v = g.cut_of_index(z);
        if v > best.0 {
            best = (v, z);
        }
    }
    (best.0, Assignment::new(best.1, g.n))
}

pub fn cut_value(g: &Graph, z: &Assignment) -> Result<f64, QaoaError> {
    if z.n != g.n {
        return Err(QaoaError::LengthMismatch {
            expected: g.n,
            got: z.n,
        });
    }
    Ok(g.cut_of_index(z.bits))
}

/// Variational angles, one `(gamma, beta)` pair per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    gammas: Vec<f64>,
    betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self, QaoaError> {
        if gammas.is_empty() || gammas.len() != betas.len() {
            return Err(QaoaError::InvalidParams(format!(
                "need p >= 1 gammas and betas, got {} and {}",
                gammas.len(),
                betas.len()
            )));
        }
        Ok(QaoaParams { gammas, betas })
    }

    pub fn single(gamma: f64, beta: f64) -> Self {
        QaoaParams {
            gammas: vec![gamma],
            betas: vec![beta],
        }
    }

    pub fn layers(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `[gamma_1..gamma_p, beta_1..beta_p]`
    pub fn to_flat(&self) -> Vec<f64> {
        self.gammas.iter().chain(&self.betas).copied().collect()
    }

    pub fn from_flat(x: &[f64]) -> Result<Self, QaoaError> {
        if !x.len().is_multiple_of(2) {
            return Err(QaoaError::InvalidParams(format!("odd parameter count {}", x.len())));
        }
        let p = x.len() / 2;
        QaoaParams::new(x[..p].to_vec(), x[p..].to_vec())
    }
}

/// Hadamard layer, then per layer the cost blocks in sorted edge order and
/// the RX mixer; optionally a terminal measurement of every qubit.
pub fn build_qaoa_circuit(g: &Graph, params: &QaoaParams, with_measure: bool) -> Circuit {
    let n = g.n;
    let mut c = Circuit::new(n, if with_measure { n } else { 0 }).with_name("qaoa");
    let mut push = |gate| c.push(gate).expect("ansatz gates are valid by construction");
    for q in 0..n {
        push(Gate::h(q));
    }
    for (&gamma, &beta) in params.gammas.iter().zip(&params.betas) {
        for e in &g.edges {
            push(Gate::cx(e.i, e.j));
            push(Gate::rz(-gamma * e.w, e.j));
            push(Gate::cx(e.i, e.j));
        }
        for q in 0..n {
            push(Gate::rx(2.0 * beta, q));
        }
    }
    if with_measure {
        for q in 0..n {
            push(Gate::measure(q, q));
        }
    }
    c
}

/// Exact cut expectation of a state whose basis index bits are the graph
/// nodes.
pub fn expectation_of_state(g: &Graph, s: &StateVector<f64>) -> Result<f64, QaoaError> {
    if s.num_qubits() != g.n {
        return Err(QaoaError::QubitMismatch {
            graph: g.n,
            circuit: s.num_qubits(),
        });
    }
    Ok(s
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(z, a)| a.norm_sqr() * g.cut_of_index(z))
        .sum())
}

/// Exact `sum_z |<z|psi>|^2 C(z)` for `psi = c |0...0>`. Measurements in `c`
/// are ignored.
pub fn expectation(g: &Graph, c: &Circuit) -> Result<f64, QaoaError> {
    if c.num_qubits() != g.n {
        return Err(QaoaError::QubitMismatch {
            graph: g.n,
            circuit: c.num_qubits(),
        });
    }
    let s = evolve(c, &StateVector::zero(g.n))?;
    expectation_of_state(g, &s)
}

/// Expectation for a compiled circuit whose logical qubit `l` ends on
/// physical qubit `layout.final_layout()[l]`. Physical qubits beyond the
/// graph are ancillas and are traced out.
pub fn expectation_mapped(g: &Graph, c: &Circuit, layout: &LayoutMap) -> Result<f64, QaoaError> {
    let fl = layout.final_layout();
    if fl.len() < g.n || c.num_qubits() < g.n {
        return Err(QaoaError::QubitMismatch {
            graph: g.n,
            circuit: c.num_qubits(),
        });
    }
    let s = evolve(c, &StateVector::<f64>::zero(c.num_qubits()))?;
    let cuts = g.cut_table();
    Ok(s
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(y, a)| {
            let z = (0..g.n).fold(0usize, |acc, l| acc | (((y >> fl[l]) & 1) << l));
            a.norm_sqr() * cuts[z]
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaResult {
    pub best_params: QaoaParams,
    pub best_expectation: f64,
    pub e_opt: f64,
    pub ar: f64,
    pub evaluations_used: usize,
    /// Expectation value of every objective evaluation, in order.
    pub history: Vec<f64>,
}

/// Seeded starting point: `gamma_l = beta_l = 0.1 l` plus uniform noise in
/// `[-0.05, 0.05]`; all gamma draws precede the beta draws.
pub fn initial_point(p: usize, seed: u64) -> QaoaParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |l: usize| 0.1 * l as f64 + rng.gen_range(-0.05..=0.05);
    let gammas = (1..=p).map(&mut jitter).collect();
    let betas = (1..=p).map(&mut jitter).collect();
    QaoaParams { gammas, betas }
}

/// Maximise the exact expectation of the plain ansatz.
pub fn optimize(g: &Graph, p: usize, budget: usize, seed: u64) -> Result<QaoaResult, QaoaError> {
    optimize_with(g, p, budget, seed, |params| {
        expectation(g, &build_qaoa_circuit(g, params, false))
    })
}

/// Maximise an arbitrary parameterised expectation with Nelder-Mead on its
/// negation. Evaluation errors abort with the first error once the search
/// ends.
pub fn optimize_with<F>(
    g: &Graph,
    p: usize,
    budget: usize,
    seed: u64,
    mut objective: F,
) -> Result<QaoaResult, QaoaError>
where
    F: FnMut(&QaoaParams) -> Result<f64, QaoaError>,
{
    if p == 0 {
        return Err(QaoaError::InvalidParams("p must be at least 1".into()));
    }
    let x0 = initial_point(p, seed).to_flat();
    let opts = NelderMeadOptions {
        max_evals: budget,
        ..NelderMeadOptions::default()
    };
    let mut failure: Option<QaoaError> = None;
    let min = nelder_mead(
        |x: &[f64]| {
            let params = QaoaParams::from_flat(x).expect("even-length vector");
            match objective(&params) {
                Ok(e) => -e,
                Err(err) => {
                    failure.get_or_insert(err);
                    f64::INFINITY
                }
            }
        },
        &x0,
        &opts,
    )?;
    if let Some(err) = failure {
        return Err(err);
    }
    let (e_opt, _) = brute_force_maxcut(g);
    let best_expectation = -min.value;
    Ok(QaoaResult {
        best_params: QaoaParams::from_flat(&min.x)?,
        best_expectation,
        e_opt,
        ar: best_expectation / e_opt,
        evaluations_used: min.evaluations,
        history: min.history.iter().map(|v| -v).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;
    use crate::sim::{circuit_unitary, UnitaryMatrix};
    use num_complex::Complex;

    fn square() -> Graph {
        Graph::unweighted(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap()
    }

    #[test]
    fn maxcut_small_cases() {
        let edge = Graph::unweighted(2, &[(0, 1)]).unwrap();
        assert_eq!(brute_force_maxcut(&edge).0, 1.0);
        assert_eq!(brute_force_maxcut(&Graph::triangle()).0, 2.0);
        let (v, z) = brute_force_maxcut(&square());
        assert_eq!(v, 4.0);
        // 0101: nodes 0 and 2 on side 1 is the smallest optimal index.
        assert_eq!(z.to_string(), "0101");
    }

    #[test]
    fn square_maxcut_by_enumeration() {
        // Independent enumeration over explicit partitions.
        let edges = [(0usize, 1usize), (1, 2), (2, 3), (0, 3)];
        let mut best = 0;
        for mask in 0..16u32 {
            let side = |v: usize| (mask >> v) & 1;
            best = best.max(edges.iter().filter(|&&(a, b)| side(a) != side(b)).count());
        }
        assert_eq!(best, 4);
    }

    #[test]
    fn cut_values() {
        let t = Graph::triangle();
        assert_eq!(cut_value(&t, &"000".parse().unwrap()).unwrap(), 0.0);
        assert_eq!(cut_value(&t, &"001".parse().unwrap()).unwrap(), 2.0);
        let edge = Graph::unweighted(2, &[(0, 1)]).unwrap();
        assert_eq!(cut_value(&edge, &"01".parse().unwrap()).unwrap(), 1.0);
        assert_eq!(
            cut_value(&t, &"01".parse().unwrap()),
            Err(QaoaError::LengthMismatch { expected: 3, got: 2 })
        );
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::unweighted(3, &[(0, 1)]).is_err());
        assert!(Graph::unweighted(2, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::unweighted(2, &[(0, 0)]).is_err());
        assert!(Graph::unweighted(2, &[(0, 2)]).is_err());
        let g = Graph::unweighted(3, &[(2, 1), (1, 0)]).unwrap();
        assert_eq!((g.edges()[0].i, g.edges()[0].j), (0, 1));
        assert_eq!((g.edges()[1].i, g.edges()[1].j), (1, 2));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = Graph::new(4, [(0, 1, 1.0), (1, 3, 2.5), (2, 3, 1.0)]).unwrap();
        let text = g.to_edge_list();
        assert_eq!(text, "4 3\n0 1 1\n1 3 2.5\n2 3 1\n");
        assert_eq!(Graph::from_edge_list(&text).unwrap(), g);
        assert!(matches!(
            Graph::from_edge_list("3 2\n0 1 1\n"),
            Err(QaoaError::GraphFormat { .. })
        ));
        assert!(matches!(
            Graph::from_edge_list("3 1\n0 1 x\n"),
            Err(QaoaError::GraphFormat { line: 2, .. })
        ));
    }

    #[test]
    fn triangle_gate_counts() {
        let c = build_qaoa_circuit(&Graph::triangle(), &QaoaParams::single(0.3, 0.2), true);
        assert_eq!(c.count_kind(|k| *k == GateKind::H), 3);
        assert_eq!(c.count_kind(|k| *k == GateKind::CX), 6);
        assert_eq!(c.count_kind(|k| matches!(k, GateKind::RZ(_))), 3);
        assert_eq!(c.count_kind(|k| matches!(k, GateKind::RX(_))), 3);
        assert_eq!(c.count_kind(|k| *k == GateKind::Measure), 3);
        assert_eq!(c.len(), 18);
    }

    #[test]
    fn zero_angles_give_hadamard_layer() {
        for g in [Graph::triangle(), square()] {
            let c = build_qaoa_circuit(&g, &QaoaParams::single(0.0, 0.0), false);
            let mut h = Circuit::new(g.num_nodes(), 0);
            for q in 0..g.num_nodes() {
                h.push(Gate::h(q)).unwrap();
            }
            let u = circuit_unitary::<f64>(&c).unwrap();
            assert!(u.equal_up_to_phase(&circuit_unitary::<f64>(&h).unwrap(), 1e-12));
            let e = expectation(&g, &c).unwrap();
            assert!((e - 0.5 * g.total_weight()).abs() < 1e-12);
        }
    }

    /// exp(-i gamma (1 - Z Z) / 2) on two qubits is diagonal with phase
    /// exp(-i gamma) on the anti-aligned basis states |01>, |10>.
    #[test]
    fn cost_block_matches_exponentiated_hamiltonian() {
        for &gamma in &[0.0, 0.37, 1.1, -2.4, 3.0] {
            let c = Circuit::from_gates(2, 0, [Gate::cx(0, 1), Gate::rz(-gamma, 1), Gate::cx(0, 1)])
                .unwrap();
            let u = circuit_unitary::<f64>(&c).unwrap();
            let mut data = vec![Complex::new(0.0, 0.0); 16];
            for z in 0..4usize {
                let anti = (z & 1) != (z >> 1);
                data[z * 4 + z] = if anti {
                    Complex::from_polar(1.0, -gamma)
                } else {
                    Complex::new(1.0, 0.0)
                };
            }
            let oracle = UnitaryMatrix::from_entries(2, data).unwrap();
            assert!(u.equal_up_to_phase(&oracle, 1e-9), "gamma {gamma}");
        }
    }

    #[test]
    fn mixer_is_exponentiated_x() {
        let beta = 0.61;
        let c = Circuit::from_gates(1, 0, [Gate::rx(2.0 * beta, 0)]).unwrap();
        let u = circuit_unitary::<f64>(&c).unwrap();
        let (s, co) = beta.sin_cos();
        let oracle = UnitaryMatrix::from_entries(
            1,
            vec![
                Complex::new(co, 0.0),
                Complex::new(0.0, -s),
                Complex::new(0.0, -s),
                Complex::new(co, 0.0),
            ],
        )
        .unwrap();
        assert!(u.max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn expectation_qubit_mismatch() {
        let c = Circuit::new(2, 0);
        assert!(matches!(
            expectation(&Graph::triangle(), &c),
            Err(QaoaError::QubitMismatch { .. })
        ));
    }

    #[test]
    fn optimize_is_deterministic() {
        let g = Graph::triangle();
        let a = optimize(&g, 1, 300, 42).unwrap();
        let b = optimize(&g, 1, 300, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.evaluations_used <= 300);
        assert!(a.ar <= 1.0 + 1e-9 && a.ar >= 0.0);
        let c = optimize(&g, 1, 300, 43).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn initial_point_noise_bounds() {
        for seed in 0..50 {
            let p = initial_point(3, seed);
            for (l, (&g, &b)) in p.gammas().iter().zip(p.betas()).enumerate() {
                let centre = 0.1 * (l + 1) as f64;
                assert!((g - centre).abs() <= 0.05 && (b - centre).abs() <= 0.05);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(QaoaParams::new(vec![], vec![]).is_err());
        assert!(QaoaParams::new(vec![0.1], vec![0.1, 0.2]).is_err());
        assert!(QaoaParams::from_flat(&[0.1, 0.2, 0.3]).is_err());
        let p = QaoaParams::from_flat(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(p.gammas(), &[1.0, 2.0]);
        assert_eq!(p.betas(), &[3.0, 4.0]);
    }
}
