//! Single-sample reparameterized ELBO estimates for each model variant.
//!
//! Per sequence the estimate is `Σ_t log p(r_t | θ_t, ξ) − Σ_t KL_t`, with the
//! ability KL taken analytically per step given the sampled previous ability.
//! Item KL terms are global and added once per batch by [`item_kl_term`].

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{backward_sweep, step_kl_generic, AbilityPotential};
use crate::math;
use crate::model::ModelConfig;
use crate::params::{Layout, ParamStore};
use crate::recognition::{item_kl_generic, item_sample_generic, net_forward, potential_generic, NetIndex, LOG_VAR_MAX, LOG_VAR_MIN};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Ability potentials aggregated by the backward sweep.
    Vtirt,
    /// Recognition emits chain transition parameters directly per step.
    DirLoc,
    /// Static ability with a product-of-experts posterior.
    ViboPoe,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Vtirt => "vtirt",
            Variant::DirLoc => "dir_loc",
            Variant::ViboPoe => "vibo_poe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vtirt" => Some(Variant::Vtirt),
            "dir_loc" => Some(Variant::DirLoc),
            "vibo_poe" => Some(Variant::ViboPoe),
            _ => None,
        }
    }

    /// Width of the recognition head.
    pub fn outputs(self) -> usize {
        match self {
            Variant::DirLoc => 3,
            _ => 2,
        }
    }

    /// Output biases at initialization. Potential heads start at `N(0, 1)`;
    /// the direct head starts at the Wiener transition `(1, 0, log σθ²)`.
    pub fn head_bias(self, cfg: &ModelConfig) -> Vec<f64> {
        match self {
            Variant::DirLoc => alloc::vec![1.0, 0.0, 2.0 * math::ln(cfg.sigma_theta)],
            _ => alloc::vec![0.0, 0.0],
        }
    }
}

/// Responses of one trajectory as flat item indices.
#[derive(Debug, Clone, Copy)]
pub struct SequenceRef<'a> {
    pub items: &'a [usize],
    pub correct: &'a [bool],
}

/// Standard-normal draws for one ELBO sample: two per vocabulary item and one
/// per step of the sequence.
#[derive(Debug, Clone, Copy)]
pub struct Noise<'a> {
    pub items: &'a [[f64; 2]],
    pub theta: &'a [f64],
}

#[inline]
pub fn response_loglik_generic<S: Scalar>(correct: bool, logit: S) -> S {
    if correct {
        logit.log_sigmoid()
    } else {
        (-logit).log_sigmoid()
    }
}

/// ELBO contribution of one sequence (item KL excluded). Zero for an empty sequence.
pub fn sequence_elbo<S: Scalar>(
    variant: Variant,
    l: &Layout,
    p: &[S],
    cfg: &ModelConfig,
    seq: SequenceRef<'_>,
    noise: Noise<'_>,
) -> S {
    let n = seq.items.len();
    debug_assert_eq!(n, seq.correct.len());
    debug_assert!(noise.theta.len() >= n);
    if n == 0 {
        return p[0].constant_like(0.0);
    }
    let idx = NetIndex::from(l);
    let lt = cfg.lambda_theta();
    let items: Vec<(S, S)> =
        seq.items.iter().map(|&q| item_sample_generic(l, p, q, noise.items[q])).collect();
    let mut total: Option<S> = None;
    let mut add = |x: S| total = Some(match total { Some(t) => t + x, None => x });

    match variant {
        Variant::Vtirt => {
            let mut lam = Vec::with_capacity(n);
            let mut mu = Vec::with_capacity(n);
            for (t, &(a, d)) in items.iter().enumerate() {
                let (m, lv) = potential_generic(idx, p, a, d, seq.correct[t]);
                lam.push((-lv).exp());
                mu.push(m);
            }
            let agg = backward_sweep(&lam, &mu, lt);
            let mut prev = None;
            for (t, &(a, d)) in items.iter().enumerate() {
                let mean = agg.step_mean(prev, t);
                let theta = mean + agg.step_std(t, cfg.sigma_theta) * noise.theta[t];
                add(response_loglik_generic(seq.correct[t], a * (theta - d)));
                add(-step_kl_generic(mean, prev, agg.alpha[t], lt));
                prev = Some(theta);
            }
        }
        Variant::DirLoc => {
            let log_var_theta = 2.0 * math::ln(cfg.sigma_theta);
            let mut prev: Option<S> = None;
            for (t, &(a, d)) in items.iter().enumerate() {
                let out = net_forward(idx, p, a, d, seq.correct[t]);
                let (alpha, beta) = (out[0], out[1]);
                let lv = out[2].clamp_to(LOG_VAR_MIN, LOG_VAR_MAX);
                let mean = match prev {
                    Some(x) => alpha * x + beta,
                    None => beta,
                };
                let theta = mean + (lv * 0.5).exp() * noise.theta[t];
                let shift = match prev {
                    Some(x) => mean - x,
                    None => mean,
                };
                let kl = ((lv.exp() + shift.square()) * lt - lv + (log_var_theta - 1.0)) * 0.5;
                add(response_loglik_generic(seq.correct[t], a * (theta - d)));
                add(-kl);
                prev = Some(theta);
            }
        }
        Variant::ViboPoe => {
            let mut prec_sum: Option<S> = None;
            let mut info_sum: Option<S> = None;
            for (t, &(a, d)) in items.iter().enumerate() {
                let (m, lv) = potential_generic(idx, p, a, d, seq.correct[t]);
                let lam = (-lv).exp();
                prec_sum = Some(prec_sum.map_or(lam, |s| s + lam));
                info_sum = Some(info_sum.map_or(lam * m, |s| s + lam * m));
            }
            // non-empty sequence, so both sums exist
            let prec = prec_sum.unwrap() + lt;
            let mean = info_sum.unwrap() / prec;
            let theta = mean + prec.sqrt().recip() * noise.theta[0];
            for (t, &(a, d)) in items.iter().enumerate() {
                add(response_loglik_generic(seq.correct[t], a * (theta - d)));
            }
            let ratio = prec / lt;
            add(-((ratio.ln() + ratio.recip() + mean.square() * lt - 1.0) * 0.5));
        }
    }
    total.unwrap_or_else(|| p[0].constant_like(0.0))
}

/// `Σ_q weight_q · KL(q(ξ_q) || p(ξ_q))` over the given `(item, weight)` pairs.
pub fn item_kl_term<S: Scalar>(l: &Layout, p: &[S], cfg: &ModelConfig, weights: &[(usize, f64)]) -> S {
    weights
        .iter()
        .map(|&(q, w)| item_kl_generic(l, p, q, cfg) * w)
        .reduce(|a, b| a + b)
        .unwrap_or_else(|| p[0].constant_like(0.0))
}

/// Plain-float ELBO of one sequence plus the full item KL of the listed items.
pub fn elbo_value(
    variant: Variant,
    store: &ParamStore,
    cfg: &ModelConfig,
    seq: SequenceRef<'_>,
    noise: Noise<'_>,
    item_weights: &[(usize, f64)],
) -> Result<f64> {
    let l = Layout::of(store)?;
    check_inputs(&l, seq, noise)?;
    let p = store.values();
    Ok(sequence_elbo(variant, &l, p, cfg, seq, noise) - item_kl_term(&l, p, cfg, item_weights))
}

pub fn check_inputs(l: &Layout, seq: SequenceRef<'_>, noise: Noise<'_>) -> Result<()> {
    if seq.items.len() != seq.correct.len() {
        return Err(Error::LengthMismatch { expected: seq.items.len(), found: seq.correct.len() });
    }
    if noise.theta.len() < seq.items.len() {
        return Err(Error::LengthMismatch { expected: seq.items.len(), found: noise.theta.len() });
    }
    if noise.items.len() < l.n_items {
        return Err(Error::LengthMismatch { expected: l.n_items, found: noise.items.len() });
    }
    if let Some(&q) = seq.items.iter().find(|&&q| q >= l.n_items) {
        return Err(Error::IndexOutOfRange { index: q, len: l.n_items });
    }
    Ok(())
}

pub fn elbo_vtirt(store: &ParamStore, cfg: &ModelConfig, seq: SequenceRef<'_>, noise: Noise<'_>, item_weights: &[(usize, f64)]) -> Result<f64> {
    elbo_value(Variant::Vtirt, store, cfg, seq, noise, item_weights)
}

pub fn elbo_dir_loc(store: &ParamStore, cfg: &ModelConfig, seq: SequenceRef<'_>, noise: Noise<'_>, item_weights: &[(usize, f64)]) -> Result<f64> {
    elbo_value(Variant::DirLoc, store, cfg, seq, noise, item_weights)
}

pub fn elbo_vibo(store: &ParamStore, cfg: &ModelConfig, seq: SequenceRef<'_>, noise: Noise<'_>, item_weights: &[(usize, f64)]) -> Result<f64> {
    elbo_value(Variant::ViboPoe, store, cfg, seq, noise, item_weights)
}

/// Product of a `N(0, 1/prior_precision)` prior and the potentials: `(mean, variance)`.
pub fn poe_posterior(potentials: &[AbilityPotential], prior_precision: f64) -> (f64, f64) {
    let (prec, info) = potentials.iter().fold((prior_precision, 0.0), |(p, h), pot| {
        let lam = pot.precision();
        (p + lam, if lam == 0.0 { h } else { h + lam * pot.mu })
    });
    (info / prec, 1.0 / prec)
}
