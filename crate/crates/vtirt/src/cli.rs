//! Command-line interface.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use vtirt_core::recognition::{linspace, potential_grid};
use vtirt_core::{ItemParams, TrainedModel, Trajectory, Variant};

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::data::{self, Dataset, LoadOptions};
use crate::error::{Error, Result};
use crate::eval::{self, RecoveryReport};
use crate::synth::{self, SynthDataset};
use crate::train::{EpochLog, Trainer};

#[derive(Debug, Parser)]
#[command(name = "vtirt", version, about = "Variational temporal IRT: simulate, train, infer and evaluate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset with ground-truth sidecars (items.json, abilities.json).
    Simulate(SimulateArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Write per-learner ability marginals as CSV.
    Infer(InferArgs),
    /// Next-step AUROC, optional ground-truth recovery and timing, as JSON.
    Eval(EvalArgs),
    /// Export recognition potentials over an (a, d) grid as CSV.
    PotentialGrid(GridArgs),
    /// Time amortized inference at several trajectory lengths.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML config with [model] and [synth] sections.
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset path (JSON lines); sidecars go in the same directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct FilterArgs {
    /// Keep only the first attempt of each (learner, item).
    #[arg(long)]
    pub first_attempt_only: bool,
    /// Drop learners with fewer interactions.
    #[arg(long, default_value_t = 0)]
    pub min_interactions: usize,
}

impl From<FilterArgs> for LoadOptions {
    fn from(f: FilterArgs) -> Self {
        LoadOptions { first_attempt_only: f.first_attempt_only, min_interactions: f.min_interactions }
    }
}

#[derive(Debug, Args, Clone, Copy)]
pub struct FoldArgs {
    /// Learner-level K-fold split.
    #[arg(long, requires = "fold")]
    pub folds: Option<usize>,
    /// Held-out fold index (0-based).
    #[arg(long, requires = "folds")]
    pub fold: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset in JSON-lines format.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML config with [model] and [train] sections.
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON-lines training log; stdout when absent.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Override the configured epoch budget.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Train on every fold except --fold.
    #[command(flatten)]
    pub split: FoldArgs,
    #[command(flatten)]
    pub filters: FilterArgs,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Checkpoint written by train.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset in JSON-lines format.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV: learner,step,mean,variance[,kc].
    #[arg(long)]
    pub out: PathBuf,
    /// Run temporal inference with a VIBO-trained recognition model.
    #[arg(long)]
    pub transfer: bool,
    #[command(flatten)]
    pub filters: FilterArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by train.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset in JSON-lines format.
    #[arg(long)]
    pub data: PathBuf,
    /// Output JSON report.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth item parameters (from simulate).
    #[arg(long, requires = "abilities")]
    pub items: Option<PathBuf>,
    /// Ground-truth trajectories (from simulate).
    #[arg(long, requires = "items")]
    pub abilities: Option<PathBuf>,
    /// Score a VIBO model with temporal inference.
    #[arg(long)]
    pub transfer: bool,
    /// Per-response predictions as CSV.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// One-row CSV summary for plotting.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Evaluate only learners in --fold.
    #[command(flatten)]
    pub split: FoldArgs,
    #[command(flatten)]
    pub filters: FilterArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Checkpoint written by train.
    #[arg(long)]
    pub model: PathBuf,
    /// Output CSV: correct,a,d,mu,log_var.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub a_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub a_max: f64,
    #[arg(long, default_value_t = 16)]
    pub a_steps: usize,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub d_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub d_max: f64,
    #[arg(long, default_value_t = 17)]
    pub d_steps: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Checkpoint written by train.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub trajectories: usize,
    #[arg(long, value_delimiter = ',', default_value = "50,100")]
    pub lengths: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Train(a) => train(&a),
        Command::Infer(a) => infer(&a),
        Command::Eval(a) => evaluate(&a),
        Command::PotentialGrid(a) => grid(&a),
        Command::Bench(a) => bench(&a),
    }
}

/// Creates the missing parent directories of an output path.
fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Data(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    ensure_parent(path)?;
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

/// Paths of the ground-truth files written next to a simulated dataset.
pub fn sidecar_paths(out: &Path) -> (PathBuf, PathBuf) {
    let dir = out.parent().unwrap_or_else(|| Path::new(""));
    (dir.join("items.json"), dir.join("abilities.json"))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = Config::load(&a.config)?.synth_config()?;
    let (items_path, abilities_path) = sidecar_paths(&a.out);
    if !a.force {
        if let Some(p) = [&a.out, &items_path, &abilities_path].into_iter().find(|p| p.exists()) {
            return Err(Error::Usage(format!("{} exists; pass --force to overwrite", p.display())));
        }
    }
    let synth = synth::simulate(&cfg)?;
    ensure_parent(&a.out)?;
    synth.dataset.save(&a.out)?;
    write_json(&items_path, &synth.true_items.values().collect::<Vec<_>>())?;
    write_json(&abilities_path, &synth.true_abilities.values().collect::<Vec<_>>())?;
    Ok(())
}

/// Loads a dataset and, when a fold is given, keeps either the held-out
/// learners or the rest.
fn load_split(path: &Path, filters: FilterArgs, split: FoldArgs, held_out: bool) -> Result<Dataset> {
    let dataset = Dataset::load(path, filters.into())?;
    match (split.folds, split.fold) {
        (Some(k), Some(f)) => {
            let (rest, held) = eval::fold_split(dataset.learners.len(), k, f, split.split_seed)?;
            Ok(dataset.subset(if held_out { &held } else { &rest }))
        }
        _ => Ok(dataset),
    }
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut cfg = Config::load(&a.config)?.train_config();
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    let dataset = load_split(&a.data, a.filters, a.split, false)?;
    let trainer = match &a.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let state = ckpt.training.ok_or_else(|| Error::Data(format!("{}: no training state", path.display())))?;
            if ckpt.variant != cfg.variant || ckpt.model != cfg.model {
                return Err(Error::Usage("checkpoint variant or model settings differ from the config".into()));
            }
            Trainer::resume(&dataset, cfg, &ckpt.items, state)?
        }
        None => Trainer::new(&dataset, cfg)?,
    };
    let mut sink: Box<dyn Write> = match &a.log {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let log_path = a.log.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut write_err = None;
    let mut emit = |log: &EpochLog| {
        let line = serde_json::to_string(log).expect("log records serialize");
        if let Err(e) = writeln!(sink, "{line}").and_then(|_| sink.flush()) {
            write_err.get_or_insert(e);
        }
    };
    let out = trainer.run(&mut emit)?;
    if let Some(e) = write_err {
        return Err(Error::io(log_path, e));
    }
    ensure_parent(&a.out)?;
    Checkpoint::new(&out.model, Some(out.state)).save(&a.out)
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    Checkpoint::load(path)?.trained_model()
}

fn warn_unknown(n: usize) {
    if n > 0 {
        eprintln!("warning: {n} responses reference items unknown to the model; prior item means used");
    }
}

fn infer(a: &InferArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let dataset = Dataset::load(&a.data, a.filters.into())?;
    let with_kc = dataset.has_kcs();
    let mut w = csv_writer(&a.out)?;
    let mut header = vec!["learner", "step", "mean", "variance"];
    if with_kc {
        header.push("kc");
    }
    w.write_record(&header).map_err(|e| csv_error(&a.out, e))?;
    let mut unknown = 0;
    let no_vocab = BTreeMap::new();
    for learner in &dataset.learners {
        for seq in data::sequences(&Dataset { learners: vec![learner.clone()] }, &no_vocab) {
            let records: Vec<_> = seq.positions.iter().map(|&p| learner.records[p].clone()).collect();
            let inf = if a.transfer { model.infer_transfer(&records)? } else { model.infer_trajectory(&records)? };
            unknown += inf.unknown_items;
            for (t, r) in records.iter().enumerate() {
                let mut row = vec![
                    r.learner_id.clone(),
                    r.step.to_string(),
                    inf.marginals.means[t].to_string(),
                    inf.marginals.variances[t].to_string(),
                ];
                if with_kc {
                    row.push(seq.kc.clone().unwrap_or_default());
                }
                w.write_record(&row).map_err(|e| csv_error(&a.out, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&a.out, e))?;
    warn_unknown(unknown);
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub variant: Variant,
    pub transfer: bool,
    pub learners: usize,
    pub predictions: usize,
    pub auroc: Option<f64>,
    pub unknown_items: usize,
    pub prediction_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoveryReport>,
}

fn evaluate(a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let dataset = load_split(&a.data, a.filters, a.split, true)?;
    let start = Instant::now();
    let preds = eval::next_step_predictions(&model, &dataset, a.transfer)?;
    let prediction_seconds = start.elapsed().as_secs_f64();
    let auroc = match preds.auroc() {
        Ok(v) => Some(v),
        Err(Error::Model(vtirt_core::Error::Undefined(_))) => None,
        Err(e) => return Err(e),
    };
    let recovery = match (&a.items, &a.abilities) {
        (Some(ip), Some(ap)) => {
            let items: Vec<ItemParams> = read_json(ip)?;
            let trajectories: Vec<Trajectory> = read_json(ap)?;
            let synth = SynthDataset {
                true_items: items.into_iter().map(|i| (i.item_id.clone(), i)).collect(),
                true_abilities: trajectories.into_iter().map(|t| (t.learner_id.clone(), t)).collect(),
                dataset: dataset.clone(),
            };
            Some(eval::recovery_report(&model, &synth)?)
        }
        _ => None,
    };
    warn_unknown(preds.unknown_items);
    let report = EvalReport {
        variant: model.variant,
        transfer: a.transfer,
        learners: dataset.learners.len(),
        predictions: preds.records.len(),
        auroc,
        unknown_items: preds.unknown_items,
        prediction_seconds,
        recovery,
    };
    write_json(&a.out, &report)?;
    if let Some(path) = &a.predictions {
        let mut w = csv_writer(path)?;
        w.write_record(["learner", "step", "item", "probability", "correct"]).map_err(|e| csv_error(path, e))?;
        for r in &preds.records {
            let row = [
                r.learner_id.clone(),
                r.step.to_string(),
                r.item_id.clone(),
                r.probability.to_string(),
                u8::from(r.correct).to_string(),
            ];
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &a.summary {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let rec = report.recovery.as_ref();
        let mut w = csv_writer(path)?;
        w.write_record(["variant", "transfer", "auroc", "ability_r", "discrimination_r", "difficulty_r"])
            .map_err(|e| csv_error(path, e))?;
        w.write_record([
            report.variant.name().to_string(),
            report.transfer.to_string(),
            opt(report.auroc),
            opt(rec.and_then(|r| r.ability_r)),
            opt(rec.and_then(|r| r.discrimination_r)),
            opt(rec.and_then(|r| r.difficulty_r)),
        ])
        .map_err(|e| csv_error(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn grid(a: &GridArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    if model.variant == Variant::DirLoc {
        return Err(Error::Usage("dir_loc models output transitions, not ability potentials".into()));
    }
    if a.a_steps == 0 || a.d_steps == 0 {
        return Err(Error::Usage("grid resolution must be at least 1".into()));
    }
    let av = linspace(a.a_min, a.a_max, a.a_steps);
    let dv = linspace(a.d_min, a.d_max, a.d_steps);
    let net = model.net();
    let mut w = csv_writer(&a.out)?;
    w.write_record(["correct", "a", "d", "mu", "log_var"]).map_err(|e| csv_error(&a.out, e))?;
    for correct in [true, false] {
        let g = potential_grid(&net, correct, &av, &dv);
        for (i, d) in g.d_values.iter().enumerate() {
            for (j, a_val) in g.a_values.iter().enumerate() {
                let (mu, lv) = g.cells[i][j];
                let row = [u8::from(correct).to_string(), a_val.to_string(), d.to_string(), mu.to_string(), lv.to_string()];
                w.write_record(&row).map_err(|e| csv_error(&a.out, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&a.out, e))
}

fn bench(a: &BenchArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let rows = eval::bench_inference(&model, a.trajectories, &a.lengths, a.repeats, a.seed)?;
    match &a.out {
        Some(p) => write_json(p, &rows),
        None => {
            println!("{}", serde_json::to_string_pretty(&rows).map_err(|e| Error::Data(e.to_string()))?);
            Ok(())
        }
    }
}
