//! Graph corpus, clean/Trojan example generation, unitary features and
//! stratified splits.

mod io;

pub use io::{load_dataset, read_features, write_dataset, write_features, LoadedDataset, Manifest, ManifestEntry};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{emit_qasm, Circuit};
use crate::qaoa::{build_qaoa_circuit, expectation_mapped, optimize, Graph, QaoaError, QaoaResult};
use crate::sim::{circuit_unitary, SimError};
use crate::transpile::{transpile, Backend, TranspileError};
use crate::trojan::{insert_trojan, PathKind, Position, TrojanError, TrojanGate, TrojanSpec};

pub const FEATURE_DIM: usize = 32;
pub const FEATURE_CHANNELS: usize = 2;
pub const FEATURE_LEN: usize = FEATURE_DIM * FEATURE_DIM * FEATURE_CHANNELS;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown dataset config `{0}`")]
    UnknownConfig(String),
    #[error("graph {graph}: {source}")]
    Graph {
        graph: String,
        #[source]
        source: Box<DatasetError>,
    },
    #[error("trojan insertion left the compiled circuit unchanged")]
    TrojanVanished,
    #[error("malformed dataset: {0}")]
    Malformed(String),
    #[error(transparent)]
    Qaoa(#[from] QaoaError),
    #[error(transparent)]
    Trojan(#[from] TrojanError),
    #[error(transparent)]
    Transpile(#[from] TranspileError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Graph with a stable identifier `n{n}_m{mask}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphRecord {
    pub id: String,
    pub graph: Graph,
}

fn node_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// Labelled simple graphs on 3, 4 and 5 nodes without isolated vertices,
/// ordered by node count then edge mask. Bit `k` of the mask selects the
/// `k`-th pair `(i, j)` in lexicographic order.
pub fn enumerate_graphs() -> Vec<GraphRecord> {
    (3..=5).flat_map(enumerate_graphs_with).collect()
}

pub fn enumerate_graphs_with(n: usize) -> Vec<GraphRecord> {
    let pairs = node_pairs(n);
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let mut degree = vec![0usize; n];
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| (mask >> k) & 1 == 1)
            .map(|(_, &p)| p)
            .collect();
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        if degree.iter().all(|&d| d > 0) {
            out.push(GraphRecord {
                id: format!("n{n}_m{mask}"),
                graph: Graph::unweighted(n, &edges).expect("min degree checked"),
            });
        }
    }
    out
}

/// One cell of the backend by Trojan grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub backend: Backend,
    pub trojan: TrojanSpec,
    pub seed: u64,
    pub p: usize,
    pub budget: usize,
}

const GRID: [(Position, TrojanGate, usize); 6] = [
    (Position::Front, TrojanGate::X, 1),
    (Position::Front, TrojanGate::H, 1),
    (Position::Front, TrojanGate::RX, 1),
    (Position::Front, TrojanGate::CX, 1),
    (Position::Middle, TrojanGate::RX, 1),
    (Position::Middle, TrojanGate::RX, 2),
];

impl DatasetConfig {
    /// Names look like `ideal-front-x-1` or `linear5-middle-rx-2`.
    pub fn names() -> Vec<String> {
        Backend::ALL
            .iter()
            .flat_map(|b| GRID.iter().map(move |&(pos, g, k)| format!("{b}-{pos}-{g}-{k}")))
            .collect()
    }

    pub fn named(name: &str, seed: u64) -> Result<Self, DatasetError> {
        for b in Backend::ALL {
            for &(pos, g, k) in &GRID {
                if name == format!("{b}-{pos}-{g}-{k}") {
                    return Ok(DatasetConfig {
                        name: name.to_string(),
                        backend: b,
                        trojan: TrojanSpec::new(g, k, pos, PathKind::Critical)?,
                        seed,
                        p: 1,
                        budget: 2500,
                    });
                }
            }
        }
        Err(DatasetError::UnknownConfig(name.to_string()))
    }

    pub fn all(seed: u64) -> Vec<Self> {
        Self::names()
            .iter()
            .map(|n| Self::named(n, seed).expect("grid names parse"))
            .collect()
    }
}

/// First eight bytes of SHA-256 over `"{seed}:{id}"`, little-endian.
pub fn graph_seed(dataset_seed: u64, circuit_id: &str) -> u64 {
    let digest = Sha256::digest(format!("{dataset_seed}:{circuit_id}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}

/// Optimised clean ansatz for one graph.
#[derive(Debug, Clone)]
pub struct CleanEntry {
    pub record: GraphRecord,
    pub seed: u64,
    pub result: QaoaResult,
}

/// Clean optimisations depend only on the graph, seed, p and budget, so one
/// corpus serves every config sharing those.
#[derive(Debug, Clone)]
pub struct CleanCorpus {
    pub seed: u64,
    pub p: usize,
    pub budget: usize,
    pub entries: Vec<CleanEntry>,
}

impl CleanCorpus {
    pub fn optimize(graphs: &[GraphRecord], seed: u64, p: usize, budget: usize) -> Result<Self, DatasetError> {
        let entries = graphs
            .iter()
            .map(|rec| {
                let s = graph_seed(seed, &rec.id);
                let result = optimize(&rec.graph, p, budget, s).map_err(|e| DatasetError::Graph {
                    graph: rec.id.clone(),
                    source: Box::new(e.into()),
                })?;
                Ok(CleanEntry {
                    record: rec.clone(),
                    seed: s,
                    result,
                })
            })
            .collect::<Result<_, DatasetError>>()?;
        Ok(CleanCorpus {
            seed,
            p,
            budget,
            entries,
        })
    }

    fn matches(&self, cfg: &DatasetConfig) -> bool {
        self.seed == cfg.seed && self.p == cfg.p && self.budget == cfg.budget
    }
}

/// Zero-padded `32x32x2` real/imaginary view of a unitary, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn from_data(data: Vec<f32>) -> Result<Self, DatasetError> {
        if data.len() != FEATURE_LEN || data.iter().any(|v| !v.is_finite()) {
            return Err(DatasetError::Malformed(format!(
                "feature tensor needs {FEATURE_LEN} finite values, got {}",
                data.len()
            )));
        }
        Ok(FeatureTensor { data })
    }

    /// Unitary of `c` with measurements and barriers stripped.
    pub fn from_circuit(c: &Circuit) -> Result<Self, DatasetError> {
        let u = circuit_unitary::<f64>(&c.unitary_part())?;
        let dim = u.dim();
        if dim > FEATURE_DIM {
            return Err(DatasetError::Malformed(format!("{dim}x{dim} unitary exceeds {FEATURE_DIM}")));
        }
        let mut data = vec![0f32; FEATURE_LEN];
        for r in 0..dim {
            for col in 0..dim {
                let z = u.get(r, col);
                let at = (r * FEATURE_DIM + col) * FEATURE_CHANNELS;
                data[at] = z.re as f32;
                data[at + 1] = z.im as f32;
            }
        }
        Ok(FeatureTensor { data })
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[(row * FEATURE_DIM + col) * FEATURE_CHANNELS + channel]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    TrojanFree = 0,
    TrojanInserted = 1,
}

impl Label {
    pub fn index(&self) -> usize {
        *self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub circuit_id: String,
    pub graph_id: String,
    pub qasm: String,
    pub features: FeatureTensor,
    pub label: Label,
    /// Approximation ratio of the compiled circuit at the clean optimum.
    pub ar: f64,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub examples: Vec<LabeledExample>,
}

/// Clean and Trojan-inserted example for every graph, in corpus order.
/// Pass a matching `corpus` to reuse clean optimisations.
pub fn build_dataset(cfg: &DatasetConfig, graphs: &[GraphRecord], corpus: Option<&CleanCorpus>) -> Result<Dataset, DatasetError> {
    let owned;
    let corpus = match corpus {
        Some(c) if c.matches(cfg) && c.entries.len() == graphs.len() => c,
        _ => {
            owned = CleanCorpus::optimize(graphs, cfg.seed, cfg.p, cfg.budget)?;
            &owned
        }
    };
    let mut examples = Vec::with_capacity(2 * graphs.len());
    for (rec, entry) in graphs.iter().zip(&corpus.entries) {
        if rec.id != entry.record.id {
            return Err(DatasetError::Malformed(format!("corpus order mismatch at {}", rec.id)));
        }
        let pair = example_pair(cfg, entry).map_err(|e| DatasetError::Graph {
            graph: rec.id.clone(),
            source: Box::new(e),
        })?;
        examples.extend(pair);
    }
    Ok(Dataset {
        config: cfg.clone(),
        examples,
    })
}

fn example_pair(cfg: &DatasetConfig, entry: &CleanEntry) -> Result<[LabeledExample; 2], DatasetError> {
    let g = &entry.record.graph;
    let ansatz = build_qaoa_circuit(g, &entry.result.best_params, true).with_name(entry.record.id.clone());
    let (clean, clean_layout) = transpile(&ansatz, cfg.backend)?;
    let trojaned = insert_trojan(&ansatz, &cfg.trojan)?;
    let (troj, troj_layout) = transpile(&trojaned, cfg.backend)?;
    if troj.gates() == clean.gates() {
        return Err(DatasetError::TrojanVanished);
    }
    let e_opt = entry.result.e_opt;
    let make = |c: &Circuit, layout, label: Label, suffix: &str| -> Result<LabeledExample, DatasetError> {
        Ok(LabeledExample {
            circuit_id: format!("{}_{suffix}", entry.record.id),
            graph_id: entry.record.id.clone(),
            qasm: emit_qasm(c),
            features: FeatureTensor::from_circuit(c)?,
            label,
            ar: expectation_mapped(g, c, layout)? / e_opt,
        })
    };
    Ok([
        make(&clean, &clean_layout, Label::TrojanFree, "clean")?,
        make(&troj, &troj_layout, Label::TrojanInserted, "trojan")?,
    ])
}

/// Seeded stratified split: per class, shuffle and send `round(ratio n_c)`
/// to the first part. Both parts are then shuffled.
pub fn stratified_split(labels: &[usize], ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for class in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let k = (idx.len() as f64 * ratio).round() as usize;
        first.extend_from_slice(&idx[..k]);
        second.extend_from_slice(&idx[k..]);
    }
    first.shuffle(&mut rng);
    second.shuffle(&mut rng);
    (first, second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::UnitaryMatrix;
    use num_complex::Complex;

    fn binom(n: u64, k: u64) -> u64 {
        if k > n {
            return 0;
        }
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    /// Labelled graphs on n nodes with no isolated vertex by
    /// inclusion-exclusion over the isolated set.
    fn no_isolated(n: u64) -> i64 {
        (0..=n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                let free = binom(n - k, 2);
                sign * binom(n, k) as i64 * (1i64 << free)
            })
            .sum()
    }

    #[test]
    fn counts_match_inclusion_exclusion() {
        for n in 3..=5 {
            assert_eq!(enumerate_graphs_with(n).len() as i64, no_isolated(n as u64), "n={n}");
        }
        assert_eq!([no_isolated(3), no_isolated(4), no_isolated(5)], [4, 41, 768]);
        assert_eq!(enumerate_graphs().len(), 813);
    }

    #[test]
    fn graphs_are_ordered_and_unique() {
        let gs = enumerate_graphs();
        let mut seen = std::collections::HashSet::new();
        for r in &gs {
            assert!(seen.insert(r.id.clone()));
        }
        assert_eq!(gs[0].id, "n3_m3");
        assert_eq!(gs[0].graph.edges().len(), 2);
        assert_eq!(gs.last().unwrap().id, "n5_m1023");
    }

    #[test]
    fn config_grid() {
        let names = DatasetConfig::names();
        assert_eq!(names.len(), 12);
        assert_eq!(names[0], "ideal-front-x-1");
        assert_eq!(names[11], "linear5-middle-rx-2");
        let c = DatasetConfig::named("linear5-middle-rx-2", 3).unwrap();
        assert_eq!(c.backend, Backend::Linear5);
        assert_eq!(c.trojan.count, 2);
        assert_eq!(c.trojan.angle, Some(2.52));
        assert!(DatasetConfig::named("ideal-back-x-1", 0).is_err());
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(graph_seed(7, "n3_m3"), graph_seed(7, "n3_m3"));
        assert_ne!(graph_seed(7, "n3_m3"), graph_seed(8, "n3_m3"));
        assert_ne!(graph_seed(7, "n3_m3"), graph_seed(7, "n3_m5"));
    }

    #[test]
    fn features_pad_with_zeros() {
        let c = build_qaoa_circuit(&Graph::triangle(), &crate::qaoa::QaoaParams::single(0.5, 0.3), true);
        let f = FeatureTensor::from_circuit(&c).unwrap();
        let mut entries = Vec::new();
        for r in 0..FEATURE_DIM {
            for col in 0..FEATURE_DIM {
                if r >= 8 || col >= 8 {
                    assert_eq!((f.get(r, col, 0), f.get(r, col, 1)), (0.0, 0.0));
                } else {
                    entries.push(Complex::new(f.get(r, col, 0) as f64, f.get(r, col, 1) as f64));
                }
            }
        }
        let u = UnitaryMatrix::from_entries(3, entries).unwrap();
        assert!(u.is_unitary(1e-6));
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<usize> = (0..1626).map(|i| i % 2).collect();
        let (train, test) = stratified_split(&labels, 0.8, 11);
        assert_eq!((train.len(), test.len()), (1300, 326));
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 163);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, (0..1626).collect::<Vec<_>>());
        assert_eq!(stratified_split(&labels, 0.8, 11), (train, test));
    }

    #[test]
    fn small_build() {
        let graphs: Vec<GraphRecord> = enumerate_graphs().into_iter().take(4).collect();
        let mut cfg = DatasetConfig::named("linear5-front-h-1", 5).unwrap();
        cfg.budget = 200;
        let ds = build_dataset(&cfg, &graphs, None).unwrap();
        assert_eq!(ds.examples.len(), 8);
        assert_eq!(ds.examples[0].label, Label::TrojanFree);
        assert_eq!(ds.examples[1].label, Label::TrojanInserted);
        assert_eq!(ds.examples[1].circuit_id, "n3_m3_trojan");
        for ex in &ds.examples {
            assert!(ex.ar >= 0.0 && ex.ar <= 1.0 + 1e-9);
            assert!(ex.qasm.starts_with("OPENQASM 2.0;"));
        }
        let corpus = CleanCorpus::optimize(&graphs, 5, 1, 200).unwrap();
        let again = build_dataset(&cfg, &graphs, Some(&corpus)).unwrap();
        assert_eq!(again.examples, ds.examples);
    }
}
