//! On-disk dataset layout: per-example QASM, `manifest.json`, `features.bin`.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{graph_seed, Dataset, DatasetConfig, DatasetError, Label, FEATURE_LEN};

const MAGIC: &[u8; 8] = b"QTFEAT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub circuit_id: String,
    pub graph_id: String,
    pub label: Label,
    pub qasm_path: String,
    pub graph_seed: u64,
    pub ar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub budget_unit: String,
    pub feature_shape: [usize; 3],
    pub num_graphs: usize,
    pub num_examples: usize,
    pub examples: Vec<ManifestEntry>,
}

/// Write `<root>/<config>/{clean,trojan}/*.qasm`, `manifest.json` and
/// `features.bin`; returns the config directory.
pub fn write_dataset(ds: &Dataset, root: &Path) -> Result<PathBuf, DatasetError> {
    let dir = root.join(&ds.config.name);
    for sub in ["clean", "trojan"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let mut entries = Vec::with_capacity(ds.examples.len());
    for ex in &ds.examples {
        let sub = match ex.label {
            Label::TrojanFree => "clean",
            Label::TrojanInserted => "trojan",
        };
        let rel = format!("{sub}/{}.qasm", ex.graph_id);
        fs::write(dir.join(&rel), &ex.qasm)?;
        entries.push(ManifestEntry {
            circuit_id: ex.circuit_id.clone(),
            graph_id: ex.graph_id.clone(),
            label: ex.label,
            qasm_path: rel,
            graph_seed: graph_seed(ds.config.seed, &ex.graph_id),
            ar: ex.ar,
        });
    }
    let manifest = Manifest {
        config: ds.config.clone(),
        budget_unit: "objective_evaluations".into(),
        feature_shape: [super::FEATURE_DIM, super::FEATURE_DIM, super::FEATURE_CHANNELS],
        num_graphs: ds.examples.len() / 2,
        num_examples: ds.examples.len(),
        examples: entries,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    let feats: Vec<(&str, &[f32])> = ds
        .examples
        .iter()
        .map(|e| (e.circuit_id.as_str(), e.features.data()))
        .collect();
    write_features(&dir.join("features.bin"), &feats)?;
    Ok(dir)
}

pub fn write_features(path: &Path, items: &[(&str, &[f32])]) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&u32::try_from(items.len()).map_err(|_| malformed("too many examples"))?.to_le_bytes())?;
    for (id, data) in items {
        if data.len() != FEATURE_LEN {
            return Err(malformed(&format!("{id}: {} values, expected {FEATURE_LEN}", data.len())));
        }
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        for v in *data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn malformed(msg: &str) -> DatasetError {
    DatasetError::Malformed(msg.to_string())
}

fn take<'a>(buf: &'a [u8], at: &mut usize, n: usize) -> Result<&'a [u8], DatasetError> {
    let s = buf
        .get(*at..*at + n)
        .ok_or_else(|| malformed(&format!("features file truncated at byte {}", *at)))?;
    *at += n;
    Ok(s)
}

fn u32_at(buf: &[u8], at: &mut usize) -> Result<u32, DatasetError> {
    Ok(u32::from_le_bytes(take(buf, at, 4)?.try_into().expect("4 bytes")))
}

pub fn read_features(path: &Path) -> Result<Vec<(String, Vec<f32>)>, DatasetError> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut at = 0;
    if take(&buf, &mut at, 8)? != MAGIC {
        return Err(malformed("bad features magic"));
    }
    let count = u32_at(&buf, &mut at)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u32_at(&buf, &mut at)? as usize;
        let id = String::from_utf8(take(&buf, &mut at, len)?.to_vec()).map_err(|_| malformed("id is not UTF-8"))?;
        let data = take(&buf, &mut at, 4 * FEATURE_LEN)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        out.push((id, data));
    }
    if at != buf.len() {
        return Err(malformed("trailing bytes after the last example"));
    }
    Ok(out)
}

/// Features and labels ready for training, in manifest order.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub manifest: Manifest,
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    /// `N x 2048`, row-major.
    pub features: Vec<f32>,
}

impl LoadedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn example(&self, i: usize) -> &[f32] {
        &self.features[i * FEATURE_LEN..(i + 1) * FEATURE_LEN]
    }
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset, DatasetError> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let feats = read_features(&dir.join("features.bin"))?;
    if feats.len() != manifest.examples.len() {
        return Err(malformed(&format!(
            "manifest lists {} examples, features.bin has {}",
            manifest.examples.len(),
            feats.len()
        )));
    }
    let mut ids = Vec::with_capacity(feats.len());
    let mut labels = Vec::with_capacity(feats.len());
    let mut features = Vec::with_capacity(feats.len() * FEATURE_LEN);
    for ((id, data), entry) in feats.into_iter().zip(&manifest.examples) {
        if id != entry.circuit_id {
            return Err(malformed(&format!("features id {id} != manifest id {}", entry.circuit_id)));
        }
        labels.push(entry.label.index());
        features.extend(data);
        ids.push(id);
    }
    Ok(LoadedDataset {
        manifest,
        ids,
        labels,
        features,
    })
}
