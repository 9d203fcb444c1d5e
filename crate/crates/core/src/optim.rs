//! Gradient evaluation over the tape and a bias-corrected Adam optimizer.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::params::ParamStore;
use crate::tape::{Tape, Var};

/// Evaluate a scalar objective built on a fresh tape whose leading leaves are
/// the store's parameters, returning its value and exact gradient.
pub fn evaluate_with_gradients<F>(store: &ParamStore, objective: F) -> Result<(f64, Vec<f64>)>
where
    F: for<'t> FnOnce(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::with_capacity(store.len() * 4);
    let params = tape.vars(store.values());
    let out = objective(&tape, &params);
    let value = out.value();
    if !value.is_finite() {
        return Err(Error::NonFinite { param: "objective".into() });
    }
    let mut grads = tape.gradient(out);
    grads.truncate(store.len());
    grads.resize(store.len(), 0.0);
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { param: store.describe(i) });
    }
    Ok((value, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        OptimizerState { config, m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0 }
    }
}

/// One Adam descent step along `grads`. The store is left untouched if any
/// updated value would be non-finite.
pub fn adam_step(store: &mut ParamStore, grads: &[f64], opt: &mut OptimizerState) -> Result<()> {
    let n = store.len();
    for len in [grads.len(), opt.m.len(), opt.v.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, found: len });
        }
    }
    let c = opt.config;
    let step = opt.step + 1;
    let bias1 = 1.0 - libm::pow(c.beta1, step as f64);
    let bias2 = 1.0 - libm::pow(c.beta2, step as f64);
    let mut m = opt.m.clone();
    let mut v = opt.v.clone();
    let mut next = store.values().to_vec();
    for i in 0..n {
        let g = grads[i];
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        next[i] -= c.learning_rate * m_hat / (math::sqrt(v_hat) + c.epsilon);
        if !next[i].is_finite() {
            return Err(Error::NonFinite { param: store.describe(i) });
        }
    }
    store.values_mut().copy_from_slice(&next);
    store.set_grads(grads)?;
    opt.m = m;
    opt.v = v;
    opt.step = step;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;

    fn scalar_store(w: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", vec![w]).unwrap();
        s
    }

    #[test]
    fn gradient_of_square() {
        let s = scalar_store(3.0);
        let (v, g) = evaluate_with_gradients(&s, |_, p| p[0] * p[0]).unwrap();
        assert_eq!(v, 9.0);
        assert_eq!(g, vec![6.0]);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut s = scalar_store(0.0);
        s.add("u", vec![1.0]).unwrap();
        // d/dw sqrt(w) at 0 is infinite
        let err = evaluate_with_gradients(&s, |_, p| p[1] * 2.0 + p[0].sqrt()).unwrap_err();
        assert_eq!(err, Error::NonFinite { param: "w[0]".into() });
        let err = evaluate_with_gradients(&s, |_, p| p[0].ln()).unwrap_err();
        assert_eq!(err, Error::NonFinite { param: "objective".into() });
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut s = scalar_store(1.25);
        let mut opt = OptimizerState::new(AdamConfig::default(), 1);
        for _ in 0..10 {
            adam_step(&mut s, &[0.0], &mut opt).unwrap();
        }
        assert_eq!(s.values(), &[1.25]);
        assert_eq!(opt.step, 10);
    }

    #[test]
    fn constant_gradient_moves_against_its_sign() {
        let mut s = scalar_store(0.0);
        let mut opt = OptimizerState::new(AdamConfig::default(), 1);
        for _ in 0..100 {
            adam_step(&mut s, &[2.5], &mut opt).unwrap();
        }
        assert!(s.values()[0] < -0.09);
    }

    #[test]
    fn quadratic_bowl_converges() {
        // minimize (w - 1.7)^2 starting at -0.4 with lr 1e-2
        let mut s = scalar_store(-0.4);
        let cfg = AdamConfig { learning_rate: 1e-2, ..AdamConfig::default() };
        let mut opt = OptimizerState::new(cfg, 1);
        for _ in 0..2000 {
            let (_, g) = evaluate_with_gradients(&s, |_, p| (p[0] - 1.7).square()).unwrap();
            adam_step(&mut s, &g, &mut opt).unwrap();
        }
        assert!((s.values()[0] - 1.7).abs() < 1e-3, "{}", s.values()[0]);
    }

    #[test]
    fn rejects_non_finite_update() {
        let mut s = scalar_store(0.0);
        let mut opt = OptimizerState::new(AdamConfig::default(), 1);
        assert!(adam_step(&mut s, &[f64::NAN], &mut opt).is_err());
        assert_eq!(s.values(), &[0.0]);
        assert_eq!(opt.step, 0);
        assert!(adam_step(&mut s, &[1.0, 2.0], &mut opt).is_err());
    }
}
