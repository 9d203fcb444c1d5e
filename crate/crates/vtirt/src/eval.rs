//! Next-step prediction, ground-truth recovery and inference timing.

use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vtirt_core::metrics::{auroc, pearson};
use vtirt_core::{InteractionRecord, TrainedModel};

use crate::data::{self, Dataset};
use crate::error::{Error, Result};
use crate::synth::SynthDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub learner_id: String,
    pub step: u64,
    pub item_id: String,
    pub probability: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predictions {
    pub records: Vec<PredictionRecord>,
    /// Predicted responses whose item is outside the model vocabulary.
    pub unknown_items: usize,
}

impl Predictions {
    pub fn auroc(&self) -> Result<f64> {
        let labels: Vec<bool> = self.records.iter().map(|r| r.correct).collect();
        let scores: Vec<f64> = self.records.iter().map(|r| r.probability).collect();
        Ok(auroc(&labels, &scores)?)
    }
}

/// Filtered ability estimate for every record of one learner, averaged over
/// the knowledge-component trajectories that contain it.
fn learner_estimates(model: &TrainedModel, records: &[InteractionRecord], transfer: bool) -> Result<Vec<f64>> {
    let learner = Dataset { learners: vec![data::Learner { id: String::new(), records: records.to_vec() }] };
    let mut sum = vec![0.0; records.len()];
    let mut count = vec![0usize; records.len()];
    for seq in data::sequences(&learner, &Default::default()) {
        let sub: Vec<InteractionRecord> = seq.positions.iter().map(|&p| records[p].clone()).collect();
        let (means, _) = model.next_step_means(&sub, transfer)?;
        for (&p, m) in seq.positions.iter().zip(means) {
            sum[p] += m;
            count[p] += 1;
        }
    }
    Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
}

/// Predicted correctness for every response from the responses strictly
/// before it. With `transfer`, a VIBO-trained model is filtered through the
/// temporal kernel.
pub fn next_step_predictions(model: &TrainedModel, dataset: &Dataset, transfer: bool) -> Result<Predictions> {
    let per_learner: Vec<Result<Vec<(PredictionRecord, bool)>>> = dataset
        .learners
        .par_iter()
        .map(|l| {
            let theta = learner_estimates(model, &l.records, transfer)?;
            Ok(l.records
                .iter()
                .zip(theta)
                .map(|(r, th)| {
                    let (probability, known) = model.response_prob(th, &r.item_id);
                    let rec = PredictionRecord {
                        learner_id: r.learner_id.clone(),
                        step: r.step,
                        item_id: r.item_id.clone(),
                        probability,
                        correct: r.correct,
                    };
                    (rec, known)
                })
                .collect())
        })
        .collect();
    let mut out = Predictions::default();
    for l in per_learner {
        for (rec, known) in l? {
            out.unknown_items += usize::from(!known);
            out.records.push(rec);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Pooled over all (learner, step) pairs. `None` when undefined (constant estimates).
    pub ability_r: Option<f64>,
    pub discrimination_r: Option<f64>,
    pub difficulty_r: Option<f64>,
    pub n_abilities: usize,
    pub n_items: usize,
    pub inference_seconds: f64,
}

fn correlation(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    match pearson(x, y) {
        Ok(r) => Ok(Some(r)),
        Err(vtirt_core::Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Correlates smoothed ability means and item posterior means with the
/// simulator's ground truth.
pub fn recovery_report(model: &TrainedModel, synth: &SynthDataset) -> Result<RecoveryReport> {
    let start = Instant::now();
    let inferred: Vec<Result<Vec<f64>>> = synth
        .dataset
        .learners
        .par_iter()
        .map(|l| model.smoothed_means(&l.records).map(|(m, _)| m).map_err(Error::from))
        .collect();
    let inference_seconds = start.elapsed().as_secs_f64();
    let (mut est, mut truth) = (Vec::new(), Vec::new());
    for (l, means) in synth.dataset.learners.iter().zip(inferred) {
        let traj = synth
            .true_abilities
            .get(&l.id)
            .ok_or_else(|| Error::Data(format!("no ground-truth trajectory for learner {}", l.id)))?;
        let means = means?;
        if traj.theta.len() != means.len() {
            return Err(Error::Data(format!("ground-truth length mismatch for learner {}", l.id)));
        }
        est.extend(means);
        truth.extend_from_slice(&traj.theta);
    }
    let post = model.item_posterior();
    let (mut ea, mut ta, mut ed, mut td) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (q, id) in model.items.iter().enumerate() {
        if let Some(item) = synth.true_items.get(id) {
            ea.push(post.mean_a[q]);
            ta.push(item.a);
            ed.push(post.mean_d[q]);
            td.push(item.d);
        }
    }
    Ok(RecoveryReport {
        ability_r: correlation(&est, &truth)?,
        discrimination_r: correlation(&ea, &ta)?,
        difficulty_r: correlation(&ed, &td)?,
        n_abilities: est.len(),
        n_items: ea.len(),
        inference_seconds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub length: usize,
    pub trajectories: usize,
    /// Median over repeats.
    pub seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub trajectories_per_second: f64,
}

/// Times amortized trajectory inference on random response sequences over
/// the model's own items.
pub fn bench_inference(model: &TrainedModel, n_trajectories: usize, lengths: &[usize], repeats: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if n_trajectories == 0 || model.items.is_empty() {
        return Ok(Vec::new());
    }
    let mut rows = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ len as u64);
        let learners: Vec<Vec<InteractionRecord>> = (0..n_trajectories)
            .map(|i| {
                (0..len)
                    .map(|t| InteractionRecord {
                        learner_id: i.to_string(),
                        item_id: model.items.choose(&mut rng).expect("nonempty").clone(),
                        correct: rng.random(),
                        step: t as u64 + 1,
                        kcs: Vec::new(),
                    })
                    .collect()
            })
            .collect();
        let mut times = Vec::with_capacity(repeats.max(1));
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            let done: Result<Vec<usize>> = learners
                .par_iter()
                .map(|r| model.infer_trajectory(r).map(|i| i.marginals.means.len()).map_err(Error::from))
                .collect();
            let elapsed = start.elapsed().as_secs_f64();
            done?;
            times.push(elapsed);
        }
        times.sort_by(f64::total_cmp);
        let seconds = times[times.len() / 2];
        rows.push(BenchRow {
            length: len,
            trajectories: n_trajectories,
            seconds,
            min_seconds: times[0],
            max_seconds: times[times.len() - 1],
            trajectories_per_second: n_trajectories as f64 / seconds,
        });
    }
    Ok(rows)
}

/// Learner-level K-fold assignment: `k` disjoint folds covering `0..n`.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::Usage(format!("cannot split {n} learners into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, l) in order.into_iter().enumerate() {
        folds[i % k].push(l);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// `(rest, held_out)` learner positions for fold `fold` of `k`.
pub fn fold_split(n: usize, k: usize, fold: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if fold >= k {
        return Err(Error::Usage(format!("fold {fold} out of range for {k} folds")));
    }
    let folds = kfold(n, k, seed)?;
    let mut rest: Vec<usize> = folds.iter().enumerate().filter(|&(i, _)| i != fold).flat_map(|(_, f)| f.clone()).collect();
    rest.sort_unstable();
    Ok((rest, folds[fold].clone()))
}
