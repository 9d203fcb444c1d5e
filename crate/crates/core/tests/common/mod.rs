#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vtirt_core::model::ModelConfig;
use vtirt_core::params::{self, ParamStore};
use vtirt_core::recognition::init_store;
use vtirt_core::Variant;

pub const VARIANTS: [Variant; 3] = [Variant::Vtirt, Variant::DirLoc, Variant::ViboPoe];

/// Two learners answering three items in different orders.
pub const MICRO_ITEMS: [[usize; 3]; 2] = [[0, 1, 2], [2, 0, 1]];
pub const MICRO_CORRECT: [[bool; 3]; 2] = [[true, false, true], [false, true, true]];

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// A store with every array perturbed away from its initial constant values,
/// so that no gradient vanishes for structural reasons.
pub fn random_store(variant: Variant, cfg: &ModelConfig, n_items: usize, seed: u64) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = init_store(&variant.head_bias(cfg), n_items, || rng.random::<f64>());
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    for w in s.get_mut(params::W2).unwrap() {
        *w = 0.3 * normal(&mut rng);
    }
    for b in s.get_mut(params::B2).unwrap() {
        *b += 0.2 * normal(&mut rng);
    }
    for name in [params::MEAN_A, params::MEAN_D] {
        for v in s.get_mut(name).unwrap() {
            *v += 0.3 * normal(&mut rng);
        }
    }
    for name in [params::LOGVAR_A, params::LOGVAR_D] {
        for v in s.get_mut(name).unwrap() {
            *v += 0.5 * normal(&mut rng);
        }
    }
    s
}

pub struct MicroNoise {
    pub items: Vec<[f64; 2]>,
    pub theta: Vec<Vec<f64>>,
}

pub fn micro_noise(n_items: usize, seed: u64) -> MicroNoise {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MicroNoise {
        items: (0..n_items).map(|_| [normal(&mut rng), normal(&mut rng)]).collect(),
        theta: (0..2).map(|_| (0..3).map(|_| normal(&mut rng)).collect()).collect(),
    }
}

/// Composite Simpson rule for `∫ f` over `[lo, hi]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

/// `E_{N(m, s²)}[log N(x; m, s²) − log N(x; m0, s0²)]` by quadrature.
pub fn kl_by_quadrature(m: f64, s: f64, m0: f64, s0: f64) -> f64 {
    use vtirt_core::math::normal_logpdf;
    simpson(
        |x| {
            let lq = normal_logpdf(x, m, s * s);
            lq.exp() * (lq - normal_logpdf(x, m0, s0 * s0))
        },
        m - 14.0 * s,
        m + 14.0 * s,
        8000,
    )
}
