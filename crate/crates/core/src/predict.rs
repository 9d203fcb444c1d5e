//! Amortized inference and next-step prediction with a trained model.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::elbo::poe_posterior;
pub use crate::elbo::Variant;
use crate::error::{Error, Result};
use crate::kernel::{filtered_means, AbilityPotential, LgmPosterior, Marginals};
use crate::math;
use crate::model::{InteractionRecord, ModelConfig};
use crate::params::{self, ParamStore};
use crate::recognition::{ItemPosterior, PotentialNet, LOG_VAR_MAX, LOG_VAR_MIN};
use crate::scalar::Scalar;

/// Prior item means used for items outside the trained vocabulary.
pub const FALLBACK_ITEM: (f64, f64) = (1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub variant: Variant,
    pub model: ModelConfig,
    /// Item vocabulary; position is the item's flat index.
    pub items: Vec<String>,
    pub store: ParamStore,
    index: BTreeMap<String, usize>,
}

/// Smoothed marginals plus the number of responses whose item was unknown.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Inference {
    pub marginals: Marginals,
    pub unknown_items: usize,
}

impl TrainedModel {
    pub fn new(variant: Variant, model: ModelConfig, items: Vec<String>, store: ParamStore) -> Result<Self> {
        model.validate()?;
        let layout = crate::params::Layout::of(&store)?;
        if layout.n_items != items.len() {
            return Err(Error::LengthMismatch { expected: items.len(), found: layout.n_items });
        }
        if layout.outputs != variant.outputs() {
            return Err(Error::LengthMismatch { expected: variant.outputs(), found: layout.outputs });
        }
        let index: BTreeMap<String, usize> = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        if index.len() != items.len() {
            return Err(Error::InvalidConfig("duplicate item identifiers"));
        }
        Ok(TrainedModel { variant, model, items, store, index })
    }

    pub fn item_index(&self, item_id: &str) -> Option<usize> {
        self.index.get(item_id).copied()
    }

    pub fn net(&self) -> PotentialNet {
        PotentialNet::from_store(&self.store).expect("layout validated at construction")
    }

    pub fn item_posterior(&self) -> ItemPosterior {
        ItemPosterior::from_store(&self.store).expect("layout validated at construction")
    }

    /// Posterior-mean `(a, d)` per record, falling back to the prior means.
    pub fn item_means<'r>(&self, item_ids: impl IntoIterator<Item = &'r str>) -> (Vec<(f64, f64)>, usize) {
        let post = self.item_posterior();
        let mut unknown = 0;
        let ad = item_ids
            .into_iter()
            .map(|id| match self.item_index(id) {
                Some(q) => (post.mean_a[q], post.mean_d[q]),
                None => {
                    unknown += 1;
                    FALLBACK_ITEM
                }
            })
            .collect();
        (ad, unknown)
    }

    fn prepared(&self, records: &[InteractionRecord]) -> (PotentialNet, Vec<(f64, f64)>, Vec<bool>, usize) {
        let (ad, unknown) = self.item_means(records.iter().map(|r| r.item_id.as_str()));
        let correct = records.iter().map(|r| r.correct).collect();
        (self.net(), ad, correct, unknown)
    }

    fn potentials(net: &PotentialNet, ad: &[(f64, f64)], correct: &[bool]) -> Vec<AbilityPotential> {
        ad.iter().zip(correct).map(|(&(a, d), &r)| net.potential_forward(a, d, r)).collect()
    }

    /// Chain transition parameters `(α_t, β_t, s_t²)` of the direct-local variant.
    fn direct_transitions(net: &PotentialNet, ad: &[(f64, f64)], correct: &[bool]) -> Vec<(f64, f64, f64)> {
        ad.iter()
            .zip(correct)
            .map(|(&(a, d), &r)| {
                let out = net.raw(a, d, r);
                (out[0], out[1], math::exp(out[2].clamp_to(LOG_VAR_MIN, LOG_VAR_MAX)))
            })
            .collect()
    }

    fn smoothed_with_potentials(&self, records: &[InteractionRecord]) -> Result<Inference> {
        let (net, ad, correct, unknown_items) = self.prepared(records);
        let post = LgmPosterior::new(Self::potentials(&net, &ad, &correct), self.model)?;
        Ok(Inference { marginals: post.rollout_marginals(), unknown_items })
    }

    /// Smoothed ability marginals for one learner's records in step order.
    /// Uses item posterior means as recognition inputs; no per-learner fitting.
    pub fn infer_trajectory(&self, records: &[InteractionRecord]) -> Result<Inference> {
        match self.variant {
            Variant::Vtirt => self.smoothed_with_potentials(records),
            Variant::DirLoc => {
                let (net, ad, correct, unknown_items) = self.prepared(records);
                let mut marginals = Marginals::default();
                let (mut m, mut v) = (0.0, 0.0);
                for (alpha, beta, s2) in Self::direct_transitions(&net, &ad, &correct) {
                    m = alpha * m + beta;
                    v = alpha * alpha * v + s2;
                    marginals.means.push(m);
                    marginals.variances.push(v);
                }
                Ok(Inference { marginals, unknown_items })
            }
            Variant::ViboPoe => {
                let (net, ad, correct, unknown_items) = self.prepared(records);
                let n = records.len();
                let (mean, var) = poe_posterior(&Self::potentials(&net, &ad, &correct), self.model.lambda_theta());
                let marginals = Marginals { means: alloc::vec![mean; n], variances: alloc::vec![var; n] };
                Ok(Inference { marginals, unknown_items })
            }
        }
    }

    /// VIBO-trained potentials aggregated by the temporal chain.
    pub fn infer_transfer(&self, records: &[InteractionRecord]) -> Result<Inference> {
        if self.variant != Variant::ViboPoe {
            return Err(Error::WrongVariant { expected: "vibo_poe", found: self.variant.name() });
        }
        self.smoothed_with_potentials(records)
    }

    /// Ability point estimates per step using all responses. The static model
    /// reports its single product-of-experts mean at every step.
    pub fn smoothed_means(&self, records: &[InteractionRecord]) -> Result<(Vec<f64>, usize)> {
        self.infer_trajectory(records).map(|i| (i.marginals.means, i.unknown_items))
    }

    /// For every step `t`, the ability point estimate from responses strictly
    /// before `t`. With `transfer`, a static model's potentials are aggregated
    /// by the temporal chain instead of its own product of experts.
    pub fn next_step_means(&self, records: &[InteractionRecord], transfer: bool) -> Result<(Vec<f64>, usize)> {
        if transfer && self.variant != Variant::ViboPoe {
            return Err(Error::WrongVariant { expected: "vibo_poe", found: self.variant.name() });
        }
        let (net, ad, correct, unknown) = self.prepared(records);
        let means = match (self.variant, transfer) {
            (Variant::Vtirt, _) | (Variant::ViboPoe, true) => {
                filtered_means(&Self::potentials(&net, &ad, &correct), &self.model)?
            }
            (Variant::DirLoc, _) => {
                let mut out = Vec::with_capacity(records.len());
                let mut m = 0.0;
                for (alpha, beta, _) in Self::direct_transitions(&net, &ad, &correct) {
                    out.push(m);
                    m = alpha * m + beta;
                }
                out
            }
            (Variant::ViboPoe, false) => {
                let lt = self.model.lambda_theta();
                let (mut prec, mut info) = (lt, 0.0);
                let mut out = Vec::with_capacity(records.len());
                for p in Self::potentials(&net, &ad, &correct) {
                    out.push(info / prec);
                    prec += p.precision();
                    info += p.precision() * p.mu;
                }
                out
            }
        };
        Ok((means, unknown))
    }

    /// `P(correct)` at ability `theta` for an item, using posterior means.
    pub fn response_prob(&self, theta: f64, item_id: &str) -> (f64, bool) {
        match self.item_index(item_id) {
            Some(q) => {
                let a = self.store.get(params::MEAN_A).expect("validated")[q];
                let d = self.store.get(params::MEAN_D).expect("validated")[q];
                (math::sigmoid(a * (theta - d)), true)
            }
            None => (math::sigmoid(FALLBACK_ITEM.0 * (theta - FALLBACK_ITEM.1)), false),
        }
    }
}
