//! Domain types, the 2PL response model and the Wiener ability prior.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Global hyperparameters: Wiener step std and the item prior stds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub sigma_theta: f64,
    pub sigma_a: f64,
    pub sigma_d: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { sigma_theta: 0.25, sigma_a: 1.0, sigma_d: 1.0 }
    }
}

impl ModelConfig {
    pub fn new(sigma_theta: f64, sigma_a: f64, sigma_d: f64) -> Result<Self> {
        let cfg = ModelConfig { sigma_theta, sigma_a, sigma_d };
        cfg.validate()?;
        Ok(cfg)
    }

    /// All three stds strictly positive and the ability precision finite.
    pub fn validate(&self) -> Result<()> {
        let ok = |s: f64| s.is_finite() && s > 0.0;
        if !ok(self.sigma_theta) {
            return Err(Error::InvalidConfig("sigma_theta must be finite and > 0"));
        }
        if !(self.lambda_theta().is_finite()) {
            return Err(Error::InvalidConfig("1/sigma_theta^2 must be finite"));
        }
        if !ok(self.sigma_a) {
            return Err(Error::InvalidConfig("sigma_a must be finite and > 0"));
        }
        if !ok(self.sigma_d) {
            return Err(Error::InvalidConfig("sigma_d must be finite and > 0"));
        }
        Ok(())
    }

    /// Looser check used by the simulator, where zero stds give degenerate draws.
    pub fn validate_nonnegative(&self) -> Result<()> {
        let ok = |s: f64| s.is_finite() && s >= 0.0;
        if ok(self.sigma_theta) && ok(self.sigma_a) && ok(self.sigma_d) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("standard deviations must be finite and >= 0"))
        }
    }

    /// Precision of one Wiener step, `1 / sigma_theta^2`.
    pub fn lambda_theta(&self) -> f64 {
        1.0 / (self.sigma_theta * self.sigma_theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub item_id: String,
    /// Discrimination; unconstrained in sign.
    pub a: f64,
    /// Difficulty.
    pub d: f64,
}

impl ItemParams {
    pub fn new(item_id: impl Into<String>, a: f64, d: f64) -> Self {
        ItemParams { item_id: item_id.into(), a, d }
    }
}

/// One learner-item attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub learner_id: String,
    pub item_id: String,
    pub correct: bool,
    /// Position within the learner's history; strictly increasing per learner.
    pub step: u64,
    /// Knowledge components; empty means the single implicit component.
    pub kcs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub learner_id: String,
    pub theta: Vec<f64>,
}

/// Response logit `a (theta - d)`. The linking function is applied on top of it.
#[inline]
pub fn logit(theta: f64, a: f64, d: f64) -> f64 {
    a * (theta - d)
}

/// Probability of a correct response under 2PL IRT.
pub fn irt2pl_prob(theta: f64, item: &ItemParams) -> f64 {
    math::sigmoid(logit(theta, item.a, item.d))
}

/// Bernoulli log-likelihood of `correct` under 2PL IRT, computed in log space.
pub fn bernoulli_loglik(correct: bool, theta: f64, item: &ItemParams) -> f64 {
    response_loglik(correct, logit(theta, item.a, item.d))
}

/// `log f(x)` for a correct response and `log(1 - f(x))` otherwise.
#[inline]
pub fn response_loglik(correct: bool, logit: f64) -> f64 {
    if correct {
        math::log_sigmoid(logit)
    } else {
        math::log_sigmoid(-logit)
    }
}

/// Wiener prior log-density, `Σ_t log N(theta_t; theta_{t-1}, sigma_theta^2)` with `theta_0 = 0`.
pub fn wiener_logpdf(traj: &Trajectory, cfg: &ModelConfig) -> f64 {
    wiener_logpdf_slice(&traj.theta, cfg.sigma_theta)
}

pub fn wiener_logpdf_slice(theta: &[f64], sigma_theta: f64) -> f64 {
    let var = sigma_theta * sigma_theta;
    let mut prev = 0.0;
    let mut total = 0.0;
    for &x in theta {
        total += math::normal_logpdf(x, prev, var);
        prev = x;
    }
    total
}
