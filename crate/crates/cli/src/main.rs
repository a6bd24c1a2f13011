//! `qtrojan`: graph corpus, Trojan sweeps, datasets and TrojanNet training.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use qtrojan_core::cnn::{self, save_checkpoint, Arch, EvalMetrics, TrainConfig, TrainSet};
use qtrojan_core::dataset::{
    build_dataset, enumerate_graphs, load_dataset, stratified_split, write_dataset, CleanCorpus, DatasetConfig,
    GraphRecord, LoadedDataset,
};
use qtrojan_core::trojan::{benchmark, benchmark_graphs, vulnerability_sweep};
use qtrojan_core::{Backend, Graph, TrojanNet};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use output::{fixed, write_csv, EvalRecord};

#[derive(Parser, Debug)]
#[command(name = "qtrojan", version, about = "Trojan insertion and detection for QAOA circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, default_value = "ideal")]
    backend: Backend,

    /// Objective evaluations per QAOA optimisation.
    #[arg(long, global = true, default_value_t = 2500)]
    budget: usize,

    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Dataset config name, or `all`.
    #[arg(long, global = true)]
    config: Option<String>,

    /// Omit wall-clock fields from run manifests.
    #[arg(long, global = true)]
    no_timestamp: bool,

    /// Use only the first N graphs of the corpus.
    #[arg(long, global = true)]
    limit: Option<usize>,

    #[arg(long, global = true, default_value_t = 50)]
    epochs: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the 813-graph corpus as edge-list files plus an index.
    Graphs,
    /// Trojan position and gate-type sweep on one graph.
    Sweep {
        /// Edge-list file; the triangle when omitted.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// X at the front of the critical path on the five benchmark graphs.
    Benchmark,
    /// Build one dataset config (or all twelve with `--config all`).
    Dataset,
    /// Train TrojanNet on a dataset directory.
    Train {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Evaluate a checkpoint on the held-out split of a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Aggregate per-config `eval.json` files into one table.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Pipeline(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Pipeline(e.into())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    tool_version: String,
    config: Value,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    started_unix: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    finished_unix: Option<u64>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

struct Run<'a> {
    cli: &'a Cli,
    name: &'static str,
    started: u64,
    outputs: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn new(cli: &'a Cli, name: &'static str) -> anyhow::Result<Self> {
        fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
        Ok(Run {
            cli,
            name,
            started: now(),
            outputs: Vec::new(),
        })
    }

    fn output(&mut self, p: PathBuf) -> PathBuf {
        self.outputs.push(p.clone());
        p
    }

    fn finish(self, config: Value) -> anyhow::Result<()> {
        let stamp = |t| (!self.cli.no_timestamp).then_some(t);
        let m = RunManifest {
            command: self.name.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            started_unix: stamp(self.started),
            finished_unix: stamp(now()),
        };
        let path = self.cli.out.join(format!("run_manifest_{}.json", self.name));
        fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(())
    }
}

fn corpus(cli: &Cli) -> Vec<GraphRecord> {
    let mut g = enumerate_graphs();
    if let Some(n) = cli.limit {
        g.truncate(n);
    }
    g
}

fn cmd_graphs(cli: &Cli) -> Result<(), Failure> {
    let mut run = Run::new(cli, "graphs")?;
    let dir = cli.out.join("graphs");
    fs::create_dir_all(&dir)?;
    let graphs = corpus(cli);
    let mut index = Vec::with_capacity(graphs.len());
    for rec in &graphs {
        let file = format!("{}.txt", rec.id);
        fs::write(dir.join(&file), rec.graph.to_edge_list())?;
        index.push(vec![
            rec.id.clone(),
            rec.graph.num_nodes().to_string(),
            rec.graph.edges().len().to_string(),
            file,
        ]);
    }
    let idx = run.output(dir.join("index.csv"));
    write_csv(&idx, &["id", "nodes", "edges", "file"], index)?;
    println!("wrote {} graphs to {}", graphs.len(), dir.display());
    run.finish(json!({ "limit": cli.limit, "num_graphs": graphs.len() }))?;
    Ok(())
}

fn cmd_sweep(cli: &Cli, graph: Option<&Path>) -> Result<(), Failure> {
    let mut run = Run::new(cli, "sweep")?;
    let g = match graph {
        Some(p) => Graph::from_edge_list(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => Graph::triangle(),
    };
    let rows = vulnerability_sweep(&g, cli.backend, cli.budget, cli.seed)?;
    let max = rows.iter().map(|r| r.loss_pct).fold(f64::NEG_INFINITY, f64::max);
    let records = rows.iter().map(|r| {
        vec![
            r.gate_type.to_string(),
            r.count.to_string(),
            r.position.to_string(),
            r.path_kind.to_string(),
            r.backend.to_string(),
            fixed(r.ar_clean, 6),
            fixed(r.ar_trojan, 6),
            fixed(r.loss_pct, 4),
            ((max - r.loss_pct).abs() <= 1e-9).to_string(),
        ]
    });
    let path = run.output(cli.out.join("sweep.csv"));
    write_csv(
        &path,
        &["gate_type", "count", "position", "path_kind", "backend", "ar_clean", "ar_trojan", "loss_pct", "max_loss"],
        records,
    )?;
    for r in rows.iter().filter(|r| (max - r.loss_pct).abs() <= 1e-9) {
        println!("max loss {:.4}%: {} at {} of {} path", r.loss_pct, r.gate_type, r.position, r.path_kind);
    }
    run.finish(json!({
        "graph": graph.map(|p| p.display().to_string()),
        "edge_list": g.to_edge_list(),
        "backend": cli.backend,
        "budget": cli.budget,
        "seed": cli.seed,
        "p": 1,
    }))?;
    Ok(())
}

fn cmd_benchmark(cli: &Cli) -> Result<(), Failure> {
    let mut run = Run::new(cli, "benchmark")?;
    let rows = benchmark(cli.backend, cli.budget, cli.seed)?;
    let records = rows.iter().map(|r| {
        vec![
            r.graph.clone(),
            r.nodes.to_string(),
            r.edges.to_string(),
            r.backend.to_string(),
            fixed(r.ar_clean, 6),
            fixed(r.ar_trojan, 6),
            fixed(r.loss_pct, 4),
        ]
    });
    let path = run.output(cli.out.join("benchmark.csv"));
    write_csv(&path, &["graph", "nodes", "edges", "backend", "ar_clean", "ar_trojan", "loss_pct"], records)?;
    if let Some(worst) = rows.iter().max_by(|a, b| a.loss_pct.total_cmp(&b.loss_pct)) {
        println!("max loss {:.4}% on {}", worst.loss_pct, worst.graph);
    }
    let graphs: Vec<Value> = benchmark_graphs()
        .iter()
        .map(|(name, g)| json!({ "name": name, "edge_list": g.to_edge_list() }))
        .collect();
    run.finish(json!({
        "backend": cli.backend,
        "budget": cli.budget,
        "seed": cli.seed,
        "p": 1,
        "trojan": "x front critical",
        "graphs": graphs,
    }))?;
    Ok(())
}

fn cmd_dataset(cli: &Cli) -> Result<(), Failure> {
    let name = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::Usage("dataset needs --config <name|all>".into()))?;
    let configs = if name == "all" {
        DatasetConfig::all(cli.seed)
    } else {
        vec![DatasetConfig::named(name, cli.seed).map_err(|e| Failure::Usage(e.to_string()))?]
    };
    let mut run = Run::new(cli, "dataset")?;
    let graphs = corpus(cli);
    let clean = CleanCorpus::optimize(&graphs, cli.seed, 1, cli.budget)?;
    let mut built = Vec::new();
    for mut cfg in configs {
        cfg.budget = cli.budget;
        let ds = build_dataset(&cfg, &graphs, Some(&clean))?;
        let dir = run.output(write_dataset(&ds, &cli.out)?);
        println!("{}: {} examples in {}", cfg.name, ds.examples.len(), dir.display());
        built.push(cfg);
    }
    run.finish(json!({ "configs": built, "limit": cli.limit, "num_graphs": graphs.len() }))?;
    Ok(())
}

/// Seeded 80/20 train/test split, then 10% of train held out for validation.
struct Splits {
    fit: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

fn splits(ds: &LoadedDataset, seed: u64, validation: f64) -> Splits {
    let (train, test) = stratified_split(&ds.labels, 0.8, seed);
    let train_labels: Vec<usize> = train.iter().map(|&i| ds.labels[i]).collect();
    let (fit, val) = stratified_split(&train_labels, 1.0 - validation, seed.wrapping_add(1));
    Splits {
        fit: fit.into_iter().map(|k| train[k]).collect(),
        val: val.into_iter().map(|k| train[k]).collect(),
        test,
    }
}

fn subset<'a>(ds: &'a LoadedDataset, idx: &[usize]) -> (Vec<&'a [f32]>, Vec<usize>) {
    (idx.iter().map(|&i| ds.example(i)).collect(), idx.iter().map(|&i| ds.labels[i]).collect())
}

fn cmd_train(cli: &Cli, dataset: &Path) -> Result<(), Failure> {
    let mut run = Run::new(cli, "train")?;
    let ds = load_dataset(dataset).with_context(|| format!("loading {}", dataset.display()))?;
    let cfg = TrainConfig {
        epochs: cli.epochs,
        seed: cli.seed,
        ..TrainConfig::default()
    };
    let sp = splits(&ds, cli.seed, cfg.validation_fraction);
    let (fit_x, fit_y) = subset(&ds, &sp.fit);
    let (val_x, val_y) = subset(&ds, &sp.val);
    let mut model = TrojanNet::init(Arch::trojannet(), cli.seed);
    let history = cnn::train(
        &mut model,
        &TrainSet {
            inputs: &fit_x,
            labels: &fit_y,
        },
        &TrainSet {
            inputs: &val_x,
            labels: &val_y,
        },
        &cfg,
        |s| {
            eprintln!(
                "epoch {:>3}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}",
                s.epoch, s.train_loss, s.train_acc, s.val_loss, s.val_acc
            )
        },
    )?;
    let hist_path = run.output(cli.out.join("history.csv"));
    write_csv(
        &hist_path,
        &["epoch", "train_loss", "train_acc", "val_loss", "val_acc"],
        history.iter().map(|s| {
            vec![
                s.epoch.to_string(),
                fixed(s.train_loss, 6),
                fixed(s.train_acc, 6),
                fixed(s.val_loss, 6),
                fixed(s.val_acc, 6),
            ]
        }),
    )?;
    let model_path = run.output(cli.out.join("model.bin"));
    save_checkpoint(&model, &model_path)?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| ds.ids[i].clone()).collect::<Vec<_>>();
    let split_path = run.output(cli.out.join("split.json"));
    fs::write(
        &split_path,
        serde_json::to_string_pretty(&json!({
            "train": ids(&sp.fit),
            "validation": ids(&sp.val),
            "test": ids(&sp.test),
        }))? + "\n",
    )?;
    run.finish(json!({
        "dataset": dataset.display().to_string(),
        "dataset_config": ds.manifest.config,
        "train": cfg,
        "arch": Arch::trojannet().dims(),
        "split": { "train": sp.fit.len(), "validation": sp.val.len(), "test": sp.test.len() },
    }))?;
    Ok(())
}

fn cmd_eval(cli: &Cli, model: &Path, dataset: &Path) -> Result<(), Failure> {
    let mut run = Run::new(cli, "eval")?;
    let ds = load_dataset(dataset).with_context(|| format!("loading {}", dataset.display()))?;
    let net: TrojanNet = cnn::load_checkpoint(model).with_context(|| format!("loading {}", model.display()))?;
    let sp = splits(&ds, cli.seed, TrainConfig::default().validation_fraction);
    let (x, y) = subset(&ds, &sp.test);
    let metrics: EvalMetrics = cnn::evaluate(&net, &TrainSet { inputs: &x, labels: &y })?;
    let cfg = &ds.manifest.config;
    let record = EvalRecord::new(cfg, metrics);
    let json_path = run.output(cli.out.join("eval.json"));
    fs::write(&json_path, serde_json::to_string_pretty(&record)? + "\n")?;
    let md_path = run.output(cli.out.join("eval.md"));
    let row = record.markdown_row();
    fs::write(&md_path, format!("{}\n{}\n", output::TABLE_HEADER, row))?;
    println!("{row}");
    run.finish(json!({
        "model": model.display().to_string(),
        "dataset": dataset.display().to_string(),
        "dataset_config": cfg,
        "seed": cli.seed,
        "test_examples": sp.test.len(),
    }))?;
    Ok(())
}

fn cmd_report(cli: &Cli, results: &Path) -> Result<(), Failure> {
    let mut run = Run::new(cli, "report")?;
    let mut found = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(results)
        .with_context(|| format!("reading {}", results.display()))?
        .filter_map(|e| e.ok().map(|e| e.path().join("eval.json")))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    for p in &entries {
        let rec: EvalRecord = serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?;
        found.push(rec);
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for name in DatasetConfig::names() {
        match found.iter().find(|r| r.config == name) {
            Some(r) => rows.push(r.clone()),
            None => missing.push(name),
        }
    }
    if !missing.is_empty() {
        return Err(anyhow!("missing eval results for: {}", missing.join(", ")).into());
    }
    let summary = output::summarize(&rows);
    let text = output::report_markdown(&rows, &summary);
    let path = run.output(cli.out.join("report.md"));
    fs::write(&path, &text)?;
    print!("{text}");
    run.finish(json!({ "results": results.display().to_string(), "summary": summary }))?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Graphs => cmd_graphs(cli),
        Command::Sweep { graph } => cmd_sweep(cli, graph.as_deref()),
        Command::Benchmark => cmd_benchmark(cli),
        Command::Dataset => cmd_dataset(cli),
        Command::Train { dataset } => cmd_train(cli, dataset),
        Command::Eval { model, dataset } => cmd_eval(cli, model, dataset),
        Command::Report { results } => cmd_report(cli, results),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
