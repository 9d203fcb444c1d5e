//! Seeded simulator for the Wiener-process 2PL model.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use vtirt_core::model::irt2pl_prob;
use vtirt_core::{InteractionRecord, ItemParams, ModelConfig, Trajectory};

use crate::data::{Dataset, Learner};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_learners: usize,
    pub n_items: usize,
    pub model: ModelConfig,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_learners: usize, n_items: usize, model: ModelConfig, seed: u64) -> Self {
        SynthConfig { n_learners, n_items, seed, model }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_learners == 0 || self.n_items == 0 {
            return Err(Error::Usage("n_learners and n_items must be at least 1".into()));
        }
        self.model.validate_nonnegative()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub dataset: Dataset,
    pub true_items: BTreeMap<String, ItemParams>,
    pub true_abilities: BTreeMap<String, Trajectory>,
}

/// Zero-padded decimal identifiers `0..n`.
pub fn identifiers(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{i:0width$}")).collect()
}

/// Stream 0 draws the item table; learner `i` uses stream `i + 1`.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn sample_items(cfg: &SynthConfig) -> Result<BTreeMap<String, ItemParams>> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, 0);
    let m = cfg.model;
    Ok(identifiers(cfg.n_items)
        .into_iter()
        .map(|id| {
            let a = 1.0 + m.sigma_a * rng.sample::<f64, _>(StandardNormal);
            let d = m.sigma_d * rng.sample::<f64, _>(StandardNormal);
            (id.clone(), ItemParams::new(id, a, d))
        })
        .collect())
}

pub fn simulate(cfg: &SynthConfig) -> Result<SynthDataset> {
    let true_items = sample_items(cfg)?;
    let items: Vec<&ItemParams> = true_items.values().collect();
    let sigma = cfg.model.sigma_theta;
    let simulated: Vec<(Learner, Trajectory)> = identifiers(cfg.n_learners)
        .into_par_iter()
        .enumerate()
        .map(|(i, learner_id)| {
            let mut rng = stream(cfg.seed, i as u64 + 1);
            let mut order: Vec<usize> = (0..items.len()).collect();
            order.shuffle(&mut rng);
            let mut theta = Vec::with_capacity(order.len());
            let mut records = Vec::with_capacity(order.len());
            let mut current = 0.0;
            for (t, &q) in order.iter().enumerate() {
                current += sigma * rng.sample::<f64, _>(StandardNormal);
                let p = irt2pl_prob(current, items[q]);
                records.push(InteractionRecord {
                    learner_id: learner_id.clone(),
                    item_id: items[q].item_id.clone(),
                    correct: rng.random::<f64>() < p,
                    step: t as u64 + 1,
                    kcs: Vec::new(),
                });
                theta.push(current);
            }
            (Learner { id: learner_id.clone(), records }, Trajectory { learner_id, theta })
        })
        .collect();
    let mut learners = Vec::with_capacity(simulated.len());
    let mut true_abilities = BTreeMap::new();
    for (l, traj) in simulated {
        true_abilities.insert(l.id.clone(), traj);
        learners.push(l);
    }
    Ok(SynthDataset { dataset: Dataset { learners }, true_items, true_abilities })
}
