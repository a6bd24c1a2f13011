//! Wire-dependency DAG of a circuit and per-qubit path extraction.

use petgraph::algo::{is_cyclic_directed, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::Direction;
use serde::{Deserialize, Serialize};

use super::TrojanError;
use crate::circuit::{Circuit, GateKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DagNode {
    Input(usize),
    /// Index into the source circuit's gate list.
    Gate(usize),
    Output(usize),
}

/// Nodes are gate occurrences plus an input and output boundary per qubit;
/// each edge is labelled with the qubit wire it follows.
#[derive(Debug, Clone)]
pub struct GateDag {
    graph: DiGraph<DagNode, usize>,
    inputs: Vec<NodeIndex>,
    outputs: Vec<NodeIndex>,
    gate_nodes: Vec<NodeIndex>,
    weights: Vec<usize>,
}

/// Longest dependency chain leaving one qubit's input boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitPath {
    pub qubit: usize,
    /// Gate-list indices along the chain, barriers and measurements omitted.
    pub gates: Vec<usize>,
    pub length: usize,
}

pub fn to_dag(c: &Circuit) -> GateDag {
    let n = c.num_qubits();
    let mut graph = DiGraph::new();
    let inputs: Vec<NodeIndex> = (0..n).map(|q| graph.add_node(DagNode::Input(q))).collect();
    let mut last = inputs.clone();
    let mut gate_nodes = Vec::with_capacity(c.len());
    let mut weights = Vec::with_capacity(c.len());
    for (i, g) in c.gates().iter().enumerate() {
        let node = graph.add_node(DagNode::Gate(i));
        for &q in &g.qubits {
            graph.add_edge(last[q], node, q);
            last[q] = node;
        }
        gate_nodes.push(node);
        weights.push(usize::from(!matches!(g.kind, GateKind::Barrier | GateKind::Measure)));
    }
    let outputs = (0..n)
        .map(|q| {
            let out = graph.add_node(DagNode::Output(q));
            graph.add_edge(last[q], out, q);
            out
        })
        .collect();
    GateDag {
        graph,
        inputs,
        outputs,
        gate_nodes,
        weights,
    }
}

impl GateDag {
    pub fn num_qubits(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_gates(&self) -> usize {
        self.gate_nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn is_acyclic(&self) -> bool {
        !is_cyclic_directed(&self.graph)
    }

    pub fn node(&self, idx: NodeIndex) -> DagNode {
        self.graph[idx]
    }

    pub fn graph(&self) -> &DiGraph<DagNode, usize> {
        &self.graph
    }

    /// Gate indices met walking wire `q` from its input to its output.
    pub fn wire(&self, q: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut at = self.inputs[q];
        while at != self.outputs[q] {
            let next = self
                .graph
                .edges_directed(at, Direction::Outgoing)
                .find(|e| *e.weight() == q)
                .map(|e| petgraph::visit::EdgeRef::target(&e))
                .expect("every wire reaches its output");
            if let DagNode::Gate(i) = self.graph[next] {
                out.push(i);
            }
            at = next;
        }
        out
    }

    /// Longest chain of counted gates reachable from qubit `q`'s input.
    /// Among equally long chains the one ending at the earliest gate wins.
    pub fn longest_path_from(&self, q: usize) -> QubitPath {
        let order = toposort(&self.graph, None).expect("wire graphs are acyclic");
        let mut dist: Vec<Option<usize>> = vec![None; self.graph.node_count()];
        let mut pred: Vec<Option<NodeIndex>> = vec![None; self.graph.node_count()];
        dist[self.inputs[q].index()] = Some(0);
        for node in order {
            let w = match self.graph[node] {
                DagNode::Gate(i) => self.weights[i],
                _ => 0,
            };
            let mut best: Option<(usize, NodeIndex)> = None;
            let mut preds: Vec<NodeIndex> = self.graph.neighbors_directed(node, Direction::Incoming).collect();
            preds.sort();
            for p in preds {
                if let Some(d) = dist[p.index()] {
                    if best.is_none_or(|(b, _)| d > b) {
                        best = Some((d, p));
                    }
                }
            }
            if let Some((d, p)) = best {
                dist[node.index()] = Some(d + w);
                pred[node.index()] = Some(p);
            }
        }
        let mut end: Option<(usize, usize)> = None;
        for (i, &node) in self.gate_nodes.iter().enumerate() {
            if let Some(d) = dist[node.index()] {
                if end.is_none_or(|(b, _)| d > b) {
                    end = Some((d, i));
                }
            }
        }
        let Some((length, last)) = end else {
            return QubitPath {
                qubit: q,
                gates: Vec::new(),
                length: 0,
            };
        };
        let mut gates = Vec::new();
        let mut at = Some(self.gate_nodes[last]);
        while let Some(node) = at {
            if let DagNode::Gate(i) = self.graph[node] {
                if self.weights[i] == 1 {
                    gates.push(i);
                }
            }
            at = pred[node.index()];
        }
        gates.reverse();
        debug_assert_eq!(gates.len(), length);
        QubitPath {
            qubit: q,
            gates,
            length,
        }
    }

    pub fn paths(&self) -> Vec<QubitPath> {
        (0..self.num_qubits()).map(|q| self.longest_path_from(q)).collect()
    }
}

/// Longest per-qubit path; ties go to the smallest qubit.
pub fn critical_path(d: &GateDag) -> Result<QubitPath, TrojanError> {
    let paths = d.paths();
    let best = paths
        .into_iter()
        .reduce(|a, b| if b.length > a.length { b } else { a })
        .ok_or(TrojanError::EmptyCircuit)?;
    if best.length == 0 {
        return Err(TrojanError::EmptyCircuit);
    }
    Ok(best)
}

/// Shortest per-qubit path; ties go to the smallest qubit.
pub fn noncritical_path(d: &GateDag) -> Result<QubitPath, TrojanError> {
    if d.num_qubits() < 2 {
        return Err(TrojanError::SingleQubit);
    }
    if d.weights.iter().all(|&w| w == 0) {
        return Err(TrojanError::EmptyCircuit);
    }
    Ok(d
        .paths()
        .into_iter()
        .reduce(|a, b| if b.length < a.length { b } else { a })
        .expect("at least two qubits"))
}
