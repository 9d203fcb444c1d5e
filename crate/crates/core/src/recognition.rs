//! Recognition model: the potential network and per-item Gaussian posteriors.
//!
//! The network maps `(a, d, r)` through one GELU hidden layer of width
//! [`HIDDEN`] to its outputs. For the potential-based variants the outputs are
//! `(μ, log σ²)` of an ability potential; the direct-local variant reads three
//! outputs as chain transition parameters instead.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::AbilityPotential;
use crate::math;
use crate::model::ModelConfig;
use crate::params::{self, Layout, ParamStore, HIDDEN, INPUTS};
use crate::scalar::Scalar;

/// Bounds applied to every log-variance before exponentiation.
pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

pub const ITEM_INIT_LOG_VAR: f64 = -2.0;

/// Offsets of the network weights inside some flat parameter slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetIndex {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub outputs: usize,
}

impl From<&Layout> for NetIndex {
    fn from(l: &Layout) -> Self {
        NetIndex { w1: l.w1, b1: l.b1, w2: l.w2, b2: l.b2, outputs: l.outputs }
    }
}

/// Raw network outputs for input `(a, d, r)`. Only the first `idx.outputs`
/// entries are meaningful; the rest repeat the last output.
pub fn net_forward<S: Scalar>(idx: NetIndex, p: &[S], a: S, d: S, correct: bool) -> [S; 3] {
    let r = a.constant_like(if correct { 1.0 } else { 0.0 });
    let input = [a, d, r];
    let hidden: [S; HIDDEN] = core::array::from_fn(|h| {
        let w = &p[idx.w1 + h * INPUTS..idx.w1 + (h + 1) * INPUTS];
        S::affine(w, &input, p[idx.b1 + h]).gelu()
    });
    let mut out = [a; 3];
    for (o, slot) in out.iter_mut().enumerate().take(idx.outputs) {
        let w = &p[idx.w2 + o * HIDDEN..idx.w2 + (o + 1) * HIDDEN];
        *slot = S::affine(w, &hidden, p[idx.b2 + o]);
    }
    for o in idx.outputs..3 {
        out[o] = out[idx.outputs - 1];
    }
    out
}

/// `(μ, clamped log σ²)` of the ability potential for one response.
pub fn potential_generic<S: Scalar>(idx: NetIndex, p: &[S], a: S, d: S, correct: bool) -> (S, S) {
    let out = net_forward(idx, p, a, d, correct);
    (out[0], out[1].clamp_to(LOG_VAR_MIN, LOG_VAR_MAX))
}

/// Reparameterized item draw `(a, d)` for flat item index `q`.
pub fn item_sample_generic<S: Scalar>(l: &Layout, p: &[S], q: usize, noise: [f64; 2]) -> (S, S) {
    let sd_a = (p[l.logvar_a + q].clamp_to(LOG_VAR_MIN, LOG_VAR_MAX) * 0.5).exp();
    let sd_d = (p[l.logvar_d + q].clamp_to(LOG_VAR_MIN, LOG_VAR_MAX) * 0.5).exp();
    (p[l.mean_a + q] + sd_a * noise[0], p[l.mean_d + q] + sd_d * noise[1])
}

fn gaussian_kl_logvar<S: Scalar>(mean: S, log_var: S, prior_mean: f64, prior_var: f64) -> S {
    let lv = log_var.clamp_to(LOG_VAR_MIN, LOG_VAR_MAX);
    let var = lv.exp();
    ((var + (mean - prior_mean).square()) / prior_var - lv + (math::ln(prior_var) - 1.0)) * 0.5
}

/// `KL(q(a_q) || N(1, σa²)) + KL(q(d_q) || N(0, σd²))`.
pub fn item_kl_generic<S: Scalar>(l: &Layout, p: &[S], q: usize, cfg: &ModelConfig) -> S {
    let ka = gaussian_kl_logvar(p[l.mean_a + q], p[l.logvar_a + q], 1.0, cfg.sigma_a * cfg.sigma_a);
    let kd = gaussian_kl_logvar(p[l.mean_d + q], p[l.logvar_d + q], 0.0, cfg.sigma_d * cfg.sigma_d);
    ka + kd
}

/// Owned copy of the network weights for plain-float evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialNet {
    weights: Vec<f64>,
    idx: NetIndex,
}

impl PotentialNet {
    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let l = Layout::of(store)?;
        let idx = NetIndex::from(&l);
        let start = [idx.w1, idx.b1, idx.w2, idx.b2].into_iter().min().unwrap_or(0);
        let end = idx.b2 + idx.outputs;
        let weights = store.values()[start..end].to_vec();
        let shift = |o: usize| o - start;
        let idx = NetIndex { w1: shift(idx.w1), b1: shift(idx.b1), w2: shift(idx.w2), b2: shift(idx.b2), ..idx };
        Ok(PotentialNet { weights, idx })
    }

    pub fn outputs(&self) -> usize {
        self.idx.outputs
    }

    pub fn raw(&self, a: f64, d: f64, correct: bool) -> [f64; 3] {
        net_forward(self.idx, &self.weights, a, d, correct)
    }

    /// `(μ, clamped log σ²)` for one response.
    pub fn mu_log_var(&self, a: f64, d: f64, correct: bool) -> (f64, f64) {
        potential_generic(self.idx, &self.weights, a, d, correct)
    }

    pub fn potential_forward(&self, a: f64, d: f64, correct: bool) -> AbilityPotential {
        let (mu, lv) = self.mu_log_var(a, d, correct);
        AbilityPotential::from_log_var(mu, lv)
    }
}

/// Gaussian variational factors over item parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemPosterior {
    pub mean_a: Vec<f64>,
    pub logvar_a: Vec<f64>,
    pub mean_d: Vec<f64>,
    pub logvar_d: Vec<f64>,
}

impl ItemPosterior {
    pub fn from_store(store: &ParamStore) -> Result<Self> {
        Ok(ItemPosterior {
            mean_a: store.get(params::MEAN_A)?.to_vec(),
            logvar_a: store.get(params::LOGVAR_A)?.to_vec(),
            mean_d: store.get(params::MEAN_D)?.to_vec(),
            logvar_d: store.get(params::LOGVAR_D)?.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.mean_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_a.is_empty()
    }

    fn check(&self, q: usize) -> Result<()> {
        if q < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: q, len: self.len() })
        }
    }

    pub fn means(&self, q: usize) -> Result<(f64, f64)> {
        self.check(q)?;
        Ok((self.mean_a[q], self.mean_d[q]))
    }

    pub fn item_sample(&self, q: usize, noise: [f64; 2]) -> Result<(f64, f64)> {
        self.check(q)?;
        let sd = |lv: f64| math::exp(0.5 * lv.clamp_to(LOG_VAR_MIN, LOG_VAR_MAX));
        Ok((
            self.mean_a[q] + sd(self.logvar_a[q]) * noise[0],
            self.mean_d[q] + sd(self.logvar_d[q]) * noise[1],
        ))
    }

    pub fn item_kl(&self, q: usize, cfg: &ModelConfig) -> Result<f64> {
        self.check(q)?;
        let ka = gaussian_kl_logvar(self.mean_a[q], self.logvar_a[q], 1.0, cfg.sigma_a * cfg.sigma_a);
        let kd = gaussian_kl_logvar(self.mean_d[q], self.logvar_d[q], 0.0, cfg.sigma_d * cfg.sigma_d);
        Ok(ka + kd)
    }
}

/// Fresh parameters: uniform(±1/sqrt(fan_in)) hidden layer, zero output
/// weights with `head_bias` as output biases, items at their prior means.
/// `uniform` must yield draws from `[0, 1)`.
pub fn init_store(head_bias: &[f64], n_items: usize, mut uniform: impl FnMut() -> f64) -> ParamStore {
    let bound = 1.0 / math::sqrt(INPUTS as f64);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| (2.0 * uniform() - 1.0) * bound).collect() };
    let w1 = draw(HIDDEN * INPUTS);
    let b1 = draw(HIDDEN);
    let filled = |v: f64| alloc::vec![v; n_items];
    let mut s = ParamStore::new();
    // names are distinct constants and all values finite
    let arrays = [
        (params::W1, w1),
        (params::B1, b1),
        (params::W2, alloc::vec![0.0; head_bias.len() * HIDDEN]),
        (params::B2, head_bias.to_vec()),
        (params::MEAN_A, filled(1.0)),
        (params::LOGVAR_A, filled(ITEM_INIT_LOG_VAR)),
        (params::MEAN_D, filled(0.0)),
        (params::LOGVAR_D, filled(ITEM_INIT_LOG_VAR)),
    ];
    for (name, values) in arrays {
        s.add(name, values).expect("fresh store");
    }
    s
}

/// Potential parameters evaluated over an `a × d` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    pub correct: bool,
    pub a_values: Vec<f64>,
    pub d_values: Vec<f64>,
    /// `cells[i][j]` is `(μ, log σ²)` at `d_values[i]`, `a_values[j]`.
    pub cells: Vec<Vec<(f64, f64)>>,
}

/// `n` evenly spaced points from `lo` to `hi` inclusive (`lo` alone when `n == 1`).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn potential_grid(net: &PotentialNet, correct: bool, a_values: &[f64], d_values: &[f64]) -> PotentialGrid {
    let cells = d_values
        .iter()
        .map(|&d| a_values.iter().map(|&a| net.mu_log_var(a, d, correct)).collect())
        .collect();
    PotentialGrid { correct, a_values: a_values.to_vec(), d_values: d_values.to_vec(), cells }
}
