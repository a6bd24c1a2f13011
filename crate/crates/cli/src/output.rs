use std::path::Path;

use qtrojan_core::cnn::EvalMetrics;
use qtrojan_core::dataset::DatasetConfig;
use qtrojan_core::Backend;
use serde::{Deserialize, Serialize};

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-point text without a sign on values that round to zero.
pub fn fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

pub const TABLE_HEADER: &str = "| Backend | Location | Gate Type | # of Gate | Accuracy | Precision | Recall | F1-Score |\n\
                                |---|---|---|---|---|---|---|---|";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub config: String,
    pub backend: Backend,
    pub location: String,
    pub gate_type: String,
    pub gate_count: usize,
    pub test_examples: usize,
    pub metrics: EvalMetrics,
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

impl EvalRecord {
    pub fn new(cfg: &DatasetConfig, metrics: EvalMetrics) -> Self {
        EvalRecord {
            config: cfg.name.clone(),
            backend: cfg.backend,
            location: capitalise(cfg.trojan.position.name()),
            gate_type: cfg.trojan.gate_type.name().to_uppercase(),
            gate_count: cfg.trojan.count,
            test_examples: metrics.total(),
            metrics,
        }
    }

    pub fn markdown_row(&self) -> String {
        let m = &self.metrics;
        format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            self.backend,
            self.location,
            self.gate_type,
            self.gate_count,
            pct(m.accuracy),
            pct(m.precision),
            pct(m.recall),
            pct(m.f1)
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub avg_accuracy: f64,
    pub avg_f1: f64,
    pub ideal_accuracy: f64,
    pub linear5_accuracy: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn summarize(rows: &[EvalRecord]) -> Summary {
    let acc_on = |b: Backend| mean(rows.iter().filter(|r| r.backend == b).map(|r| r.metrics.accuracy));
    Summary {
        avg_accuracy: mean(rows.iter().map(|r| r.metrics.accuracy)),
        avg_f1: mean(rows.iter().map(|r| r.metrics.f1)),
        ideal_accuracy: acc_on(Backend::Ideal),
        linear5_accuracy: acc_on(Backend::Linear5),
    }
}

pub fn report_markdown(rows: &[EvalRecord], s: &Summary) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for r in rows {
        out.push_str(&r.markdown_row());
        out.push('\n');
    }
    out.push_str(&format!(
        "\naverage accuracy {}, average F1 {}\nideal accuracy {}, linear5 accuracy {}\n",
        pct(s.avg_accuracy),
        pct(s.avg_f1),
        pct(s.ideal_accuracy),
        pct(s.linear5_accuracy)
    ));
    out
}
