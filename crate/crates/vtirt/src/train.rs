//! Minibatch stochastic-ELBO training with validation-based early stopping.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vtirt_core::elbo::{item_kl_term, sequence_elbo, Noise, SequenceRef};
use vtirt_core::optim::{adam_step, evaluate_with_gradients, AdamConfig, OptimizerState};
use vtirt_core::params::{self, Layout, ParamStore};
use vtirt_core::recognition::init_store;
use vtirt_core::{ModelConfig, TrainedModel, Variant};

use crate::data::{self, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub model: ModelConfig,
    /// Trajectories per minibatch.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of learners held out for validation.
    pub val_fraction: f64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    /// Monte Carlo samples per trajectory and step.
    pub n_samples: usize,
    /// Reuse the first epoch's noise in every epoch.
    pub fixed_noise: bool,
    /// Start each item's discrimination mean at ±1 following the sign of its
    /// item-rest correlation instead of at the prior mean.
    pub signed_item_init: bool,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Vtirt,
            model: ModelConfig::default(),
            batch_size: 32,
            epochs: 100,
            seed: 0,
            val_fraction: 0.1,
            patience: 10,
            n_samples: 1,
            fixed_noise: false,
            signed_item_init: true,
            optimizer: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 || self.n_samples == 0 {
            return Err(Error::Usage("batch_size and n_samples must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Usage("val_fraction must lie in [0, 1)".into()));
        }
        let o = self.optimizer;
        let ok = o.learning_rate > 0.0
            && (0.0..1.0).contains(&o.beta1)
            && (0.0..1.0).contains(&o.beta2)
            && o.epsilon > 0.0
            && o.learning_rate.is_finite();
        if !ok {
            return Err(Error::Usage("invalid optimizer settings".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Minibatch ELBO estimates summed over the epoch, per training response.
    pub train_elbo: f64,
    /// Local ELBO per validation response under fixed noise (item KL excluded).
    pub val_elbo: Option<f64>,
    /// Seconds since the start of this run.
    pub wall_time: f64,
}

/// Everything needed to continue training where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingState {
    pub epochs_done: usize,
    pub optimizer: OptimizerState,
    pub current: Vec<f64>,
    pub best: Vec<f64>,
    pub best_score: Option<f64>,
    pub since_best: usize,
    pub stopped: bool,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    /// Parameters with the best validation (or, without validation, training) ELBO.
    pub model: TrainedModel,
    pub state: TrainingState,
    pub logs: Vec<EpochLog>,
}

/// Learner-level split into (train, validation) positions.
pub fn split_learners(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, Purpose::Split, 0, 0));
    let mut n_val = (val_fraction * n as f64).round() as usize;
    if val_fraction > 0.0 && n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    } else {
        n_val = n_val.min(n.saturating_sub(1));
    }
    let mut val = order.split_off(n - n_val);
    order.sort_unstable();
    val.sort_unstable();
    (order, val)
}

#[derive(Clone, Copy)]
enum Purpose {
    Init = 1,
    Split,
    Shuffle,
    Noise,
    Validation,
}

/// Independent ChaCha stream keyed by purpose, epoch and batch.
fn substream(seed: u64, purpose: Purpose, epoch: usize, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | ((epoch as u64) << 28) | batch as u64);
    rng
}

struct Seq {
    items: Vec<usize>,
    correct: Vec<bool>,
}

/// Noise for one group of trajectories: per sample, a draw for every item
/// and one per trajectory step.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupNoise {
    /// `[sample][item] -> (a, d)` standard normals.
    pub items: Vec<Vec<[f64; 2]>>,
    /// `[sample][trajectory][step]` standard normals.
    pub theta: Vec<Vec<Vec<f64>>>,
}

fn draw_noise(rng: &mut ChaCha8Rng, n_items: usize, lens: &[usize], n_samples: usize) -> GroupNoise {
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    let mut items = Vec::with_capacity(n_samples);
    let mut theta = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        items.push((0..n_items).map(|_| [normal(), normal()]).collect());
        theta.push(lens.iter().map(|&t| (0..t).map(|_| normal()).collect()).collect());
    }
    GroupNoise { items, theta }
}

/// Sign of the correlation between each item's responses and the rest score
/// (mean correctness on the other responses of the same trajectory); +1 when
/// undefined. A discrimination started on the wrong side of zero cannot cross
/// it without the difficulty diverging, so the sign is fixed up front.
fn discrimination_signs(seqs: &[Seq], n_items: usize) -> Vec<f64> {
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); n_items];
    for s in seqs.iter().filter(|s| s.items.len() >= 2) {
        let total = s.correct.iter().filter(|&&c| c).count() as f64;
        let rest_n = (s.items.len() - 1) as f64;
        for (&q, &c) in s.items.iter().zip(&s.correct) {
            let x = f64::from(u8::from(c));
            pairs[q].0.push(x);
            pairs[q].1.push((total - x) / rest_n);
        }
    }
    pairs
        .iter()
        .map(|(x, rest)| match vtirt_core::metrics::pearson(x, rest) {
            Ok(r) if r < 0.0 => -1.0,
            _ => 1.0,
        })
        .collect()
}

pub struct Trainer {
    cfg: TrainConfig,
    items: Vec<String>,
    layout: Layout,
    train: Vec<Seq>,
    val: Vec<Seq>,
    totals: Vec<f64>,
    store: ParamStore,
    state: TrainingState,
    started: Instant,
}

impl Trainer {
    pub fn new(dataset: &Dataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if dataset.is_empty() {
            return Err(Error::Data("cannot train on an empty dataset".into()));
        }
        let items = dataset.item_vocabulary();
        let vocab = data::vocabulary_index(&items);
        let (train_idx, val_idx) = split_learners(dataset.learners.len(), cfg.val_fraction, cfg.seed);
        let to_seqs = |idx: &[usize]| -> Vec<Seq> {
            data::sequences(&dataset.subset(idx), &vocab)
                .into_iter()
                .map(|s| Seq {
                    // vocabulary is built from this dataset, so every item is known
                    items: s.items.into_iter().map(|q| q.expect("item in vocabulary")).collect(),
                    correct: s.correct,
                })
                .collect()
        };
        let train = to_seqs(&train_idx);
        let val = to_seqs(&val_idx);
        let mut totals = vec![0.0; items.len()];
        for s in &train {
            for &q in &s.items {
                totals[q] += 1.0;
            }
        }
        let mut rng = substream(cfg.seed, Purpose::Init, 0, 0);
        let mut store = init_store(&cfg.variant.head_bias(&cfg.model), items.len(), || rng.random::<f64>());
        if cfg.signed_item_init {
            store.get_mut(params::MEAN_A)?.copy_from_slice(&discrimination_signs(&train, items.len()));
        }
        let layout = Layout::of(&store)?;
        let values = store.values().to_vec();
        let state = TrainingState {
            epochs_done: 0,
            optimizer: OptimizerState::new(cfg.optimizer, store.len()),
            current: values.clone(),
            best: values,
            best_score: None,
            since_best: 0,
            stopped: false,
        };
        Ok(Trainer { cfg, items, layout, train, val, totals, store, state, started: Instant::now() })
    }

    /// Continues from a saved state; the dataset and configuration must match
    /// the original run.
    pub fn resume(dataset: &Dataset, cfg: TrainConfig, items: &[String], state: TrainingState) -> Result<Self> {
        let mut t = Trainer::new(dataset, cfg)?;
        if t.items != items {
            return Err(Error::Data("dataset items differ from the checkpoint vocabulary".into()));
        }
        let n = t.store.len();
        if state.current.len() != n || state.best.len() != n || state.optimizer.m.len() != n {
            return Err(Error::Data("training state does not match the parameter layout".into()));
        }
        t.store.values_mut().copy_from_slice(&state.current);
        t.store.check_finite()?;
        t.state = state;
        t.state.optimizer.config = cfg.optimizer;
        Ok(t)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn state(&self) -> &TrainingState {
        &self.state
    }

    /// Training trajectories as (vocabulary indices, correctness).
    pub fn train_sequences(&self) -> Vec<(&[usize], &[bool])> {
        self.train.iter().map(|s| (s.items.as_slice(), s.correct.as_slice())).collect()
    }

    pub fn validation_len(&self) -> usize {
        self.val.len()
    }

    /// The full-data objective (every training trajectory, unit item-KL
    /// weights) and its gradient under the given noise.
    pub fn full_objective(&self, noise: &GroupNoise) -> Result<(f64, Vec<f64>)> {
        let seqs: Vec<&Seq> = self.train.iter().collect();
        let weights: Vec<(usize, f64)> =
            self.totals.iter().enumerate().filter(|&(_, &c)| c > 0.0).map(|(q, _)| (q, 1.0)).collect();
        self.group_gradient(&seqs, noise, &weights)
    }

    pub fn finished(&self) -> bool {
        self.state.stopped || self.state.epochs_done >= self.cfg.epochs
    }

    /// The total objective and its gradient for one group of trajectories
    /// under shared noise, with each item's KL weighted by `weights`.
    fn group_gradient(&self, seqs: &[&Seq], noise: &GroupNoise, weights: &[(usize, f64)]) -> Result<(f64, Vec<f64>)> {
        let cfg = &self.cfg;
        let inv = 1.0 / cfg.n_samples as f64;
        let per_seq: Vec<_> = seqs
            .par_iter()
            .enumerate()
            .map(|(k, s)| {
                evaluate_with_gradients(&self.store, |_, p| {
                    let mut total = None;
                    for smp in 0..cfg.n_samples {
                        let seq = SequenceRef { items: &s.items, correct: &s.correct };
                        let nz = Noise { items: &noise.items[smp], theta: &noise.theta[smp][k] };
                        let e = sequence_elbo(cfg.variant, &self.layout, p, &cfg.model, seq, nz);
                        total = Some(match total {
                            Some(t) => t + e,
                            None => e,
                        });
                    }
                    total.expect("n_samples >= 1") * inv
                })
            })
            .collect();
        let (kl, kl_grad) = evaluate_with_gradients(&self.store, |_, p| item_kl_term(&self.layout, p, &cfg.model, weights))?;
        let mut value = -kl;
        let mut grad: Vec<f64> = kl_grad.iter().map(|g| -g).collect();
        for r in per_seq {
            let (v, g) = r?;
            value += v;
            for (acc, x) in grad.iter_mut().zip(&g) {
                *acc += x;
            }
        }
        Ok((value, grad))
    }

    fn validation_elbo(&self) -> Option<f64> {
        if self.val.is_empty() {
            return None;
        }
        let cfg = &self.cfg;
        let lens: Vec<usize> = self.val.iter().map(|s| s.items.len()).collect();
        let noise = draw_noise(&mut substream(cfg.seed, Purpose::Validation, 0, 0), self.items.len(), &lens, cfg.n_samples);
        let p = self.store.values();
        let total: f64 = self
            .val
            .par_iter()
            .enumerate()
            .map(|(k, s)| {
                (0..cfg.n_samples)
                    .map(|smp| {
                        let seq = SequenceRef { items: &s.items, correct: &s.correct };
                        let nz = Noise { items: &noise.items[smp], theta: &noise.theta[smp][k] };
                        sequence_elbo(cfg.variant, &self.layout, p, &cfg.model, seq, nz)
                    })
                    .sum::<f64>()
                    / cfg.n_samples as f64
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        Some(total / lens.iter().sum::<usize>().max(1) as f64)
    }

    /// Runs one epoch and returns its log line.
    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        let cfg = self.cfg;
        let epoch = self.state.epochs_done + 1;
        let noise_epoch = if cfg.fixed_noise { 1 } else { epoch };
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut substream(cfg.seed, Purpose::Shuffle, noise_epoch, 0));
        let mut objective = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let seqs: Vec<&Seq> = chunk.iter().map(|&i| &self.train[i]).collect();
            let lens: Vec<usize> = seqs.iter().map(|s| s.items.len()).collect();
            let mut rng = substream(cfg.seed, Purpose::Noise, noise_epoch, b);
            let noise = draw_noise(&mut rng, self.items.len(), &lens, cfg.n_samples);
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for s in &seqs {
                for &q in &s.items {
                    *counts.entry(q).or_default() += 1.0;
                }
            }
            let weights: Vec<(usize, f64)> = counts.into_iter().map(|(q, c)| (q, c / self.totals[q])).collect();
            let step = |e: vtirt_core::Error| Error::Training { epoch, batch: b + 1, source: e };
            let (value, mut grad) = self.group_gradient(&seqs, &noise, &weights).map_err(|e| match e {
                Error::Model(m) => step(m),
                other => other,
            })?;
            objective += value;
            grad.iter_mut().for_each(|g| *g = -*g);
            adam_step(&mut self.store, &grad, &mut self.state.optimizer).map_err(step)?;
        }
        let n_train: usize = self.train.iter().map(|s| s.items.len()).sum();
        let train_elbo = objective / n_train.max(1) as f64;
        let val_elbo = self.validation_elbo();
        let score = val_elbo.unwrap_or(train_elbo);
        let st = &mut self.state;
        st.epochs_done = epoch;
        st.current.copy_from_slice(self.store.values());
        if st.best_score.is_none_or(|b| score > b) {
            st.best_score = Some(score);
            st.best.copy_from_slice(self.store.values());
            st.since_best = 0;
        } else {
            st.since_best += 1;
            if cfg.patience > 0 && st.since_best >= cfg.patience {
                st.stopped = true;
            }
        }
        Ok(EpochLog { epoch, train_elbo, val_elbo, wall_time: self.started.elapsed().as_secs_f64() })
    }

    /// The best snapshot so far as a model.
    pub fn best_model(&self) -> Result<TrainedModel> {
        let mut store = self.store.clone();
        store.values_mut().copy_from_slice(&self.state.best);
        store.zero_grads();
        Ok(TrainedModel::new(self.cfg.variant, self.cfg.model, self.items.clone(), store)?)
    }

    /// Trains until the epoch budget or early stopping, reporting each epoch.
    pub fn run(mut self, mut observer: impl FnMut(&EpochLog)) -> Result<FitOutput> {
        let mut logs = Vec::new();
        while !self.finished() {
            let log = self.run_epoch()?;
            observer(&log);
            logs.push(log);
        }
        Ok(FitOutput { model: self.best_model()?, state: self.state, logs })
    }
}

pub fn fit(dataset: &Dataset, cfg: TrainConfig) -> Result<FitOutput> {
    Trainer::new(dataset, cfg)?.run(|_| {})
}
