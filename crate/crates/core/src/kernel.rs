//! Aggregation of Gaussian ability potentials into a linear Gaussian chain.
//!
//! Multiplying a Wiener prior (step precision `λθ`, `θ_0 = 0`) by per-step
//! Gaussian potentials `N(θ_t; μ_t, σ_t²)` yields a Markov chain whose
//! conditionals are
//!
//! ```text
//! θ_t | θ_{t-1} ~ N((1 - ρ_t) θ_{t-1} + ρ_t τ_t,  σθ² (1 - ρ_t))
//! ```
//!
//! where `ρ_t` and `τ_t` are computed by one backward sweep:
//!
//! ```text
//! ρ_t = (λ_t + ρ_{t+1} λθ) / (λθ + λ_t + ρ_{t+1} λθ)
//! τ_t = (λ_t μ_t + ρ_{t+1} λθ τ_{t+1}) / (λ_t + ρ_{t+1} λθ)
//! ```
//!
//! with `ρ_{T+1} = τ_{T+1} = 0`. `ρ_{t+1} λθ` is the effective precision of
//! everything observed after `t`, and `τ_{t+1}` its precision-weighted mean.
//! When `λ_t + ρ_{t+1} λθ = 0` (only vacuous potentials from `t` on) we set
//! `τ_t = 0`; it is always multiplied by `ρ_t = 0` in that case.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::ModelConfig;
use crate::scalar::Scalar;

/// Gaussian belief about ability at one step, carried as `(μ, log σ²)`.
/// `log_var = +∞` is the vacuous (flat) potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbilityPotential {
    pub mu: f64,
    pub log_var: f64,
}

impl AbilityPotential {
    pub fn new(mu: f64, sigma: f64) -> Self {
        AbilityPotential { mu, log_var: 2.0 * math::ln(sigma) }
    }

    pub fn from_log_var(mu: f64, log_var: f64) -> Self {
        AbilityPotential { mu, log_var }
    }

    pub fn vacuous() -> Self {
        AbilityPotential { mu: 0.0, log_var: f64::INFINITY }
    }

    pub fn sigma(&self) -> f64 {
        math::exp(0.5 * self.log_var)
    }

    /// `1/σ²`, zero for the vacuous potential.
    pub fn precision(&self) -> f64 {
        math::exp(-self.log_var)
    }

    fn check(&self, index: usize) -> Result<()> {
        let ok = self.mu.is_finite()
            && !self.log_var.is_nan()
            && self.log_var != f64::NEG_INFINITY
            && self.precision().is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPotential { index })
        }
    }
}

/// Backward aggregates of a chain. `alpha_t = 1 - ρ_t` is kept separately
/// because it is computed without cancellation when `ρ_t` is close to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregates<S> {
    pub rho: Vec<S>,
    pub alpha: Vec<S>,
    pub tau: Vec<S>,
}

/// The backward sweep over potential precisions and means, generic so the
/// same code runs on plain floats and on the gradient tape.
pub fn backward_sweep<S: Scalar>(precision: &[S], mu: &[S], lambda_theta: f64) -> Aggregates<S> {
    let n = precision.len();
    debug_assert_eq!(n, mu.len());
    let mut rho = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    let mut next: Option<(S, S)> = None;
    for t in (0..n).rev() {
        let lam = precision[t];
        let (den_tau, num_tau) = match next {
            None => (lam, lam * mu[t]),
            Some((rho_next, tau_next)) => {
                let future = rho_next * lambda_theta;
                (lam + future, lam * mu[t] + future * tau_next)
            }
        };
        let den = den_tau + lambda_theta;
        let rho_t = den_tau / den;
        let alpha_t = den.rdiv(lambda_theta);
        let tau_t = if den_tau.value() == 0.0 { lam.constant_like(0.0) } else { num_tau / den_tau };
        rho.push(rho_t);
        alpha.push(alpha_t);
        tau.push(tau_t);
        next = Some((rho_t, tau_t));
    }
    rho.reverse();
    alpha.reverse();
    tau.reverse();
    Aggregates { rho, alpha, tau }
}

impl<S: Scalar> Aggregates<S> {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Conditional mean of `θ_t` given `θ_{t-1}` (`None` means `θ_0 = 0`).
    pub fn step_mean(&self, theta_prev: Option<S>, t: usize) -> S {
        let drift = self.rho[t] * self.tau[t];
        match theta_prev {
            Some(prev) => self.alpha[t] * prev + drift,
            None => drift,
        }
    }

    /// Conditional std `σθ sqrt(1 - ρ_t)`.
    pub fn step_std(&self, t: usize, sigma_theta: f64) -> S {
        self.alpha[t].sqrt() * sigma_theta
    }

    /// Reparameterized draw: `θ_t = mean_t(θ_{t-1}) + std_t ε_t`.
    pub fn sample(&self, noise: &[f64], sigma_theta: f64) -> Vec<S> {
        let mut out: Vec<S> = Vec::with_capacity(self.len());
        for t in 0..self.len() {
            let mean = self.step_mean(out.last().copied(), t);
            out.push(mean + self.step_std(t, sigma_theta) * noise[t]);
        }
        out
    }
}

/// `KL(N(μ̃, σθ² α) || N(θ_prev, σθ²))` for one chain step.
pub fn step_kl_generic<S: Scalar>(mean: S, theta_prev: Option<S>, alpha: S, lambda_theta: f64) -> S {
    let shift = match theta_prev {
        Some(prev) => mean - prev,
        None => mean,
    };
    (alpha - alpha.ln() + shift.square() * lambda_theta - 1.0) * 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardAggregate {
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    alpha: Vec<f64>,
}

impl BackwardAggregate {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

fn split_potentials(potentials: &[AbilityPotential]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lam = Vec::with_capacity(potentials.len());
    let mut mu = Vec::with_capacity(potentials.len());
    for (i, p) in potentials.iter().enumerate() {
        p.check(i)?;
        lam.push(p.precision());
        mu.push(p.mu);
    }
    Ok((lam, mu))
}

pub fn backward_pass(potentials: &[AbilityPotential], cfg: &ModelConfig) -> Result<BackwardAggregate> {
    cfg.validate()?;
    let (lam, mu) = split_potentials(potentials)?;
    let agg = backward_sweep(&lam, &mu, cfg.lambda_theta());
    Ok(BackwardAggregate { rho: agg.rho, tau: agg.tau, alpha: agg.alpha })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Marginals {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// The variational ability posterior induced by a sequence of potentials.
#[derive(Debug, Clone)]
pub struct LgmPosterior {
    pub cfg: ModelConfig,
    pub potentials: Vec<AbilityPotential>,
    pub agg: BackwardAggregate,
}

impl LgmPosterior {
    pub fn new(potentials: Vec<AbilityPotential>, cfg: ModelConfig) -> Result<Self> {
        let agg = backward_pass(&potentials, &cfg)?;
        Ok(LgmPosterior { cfg, potentials, agg })
    }

    pub fn len(&self) -> usize {
        self.potentials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potentials.is_empty()
    }

    fn check_index(&self, t: usize) -> Result<()> {
        if t < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: t, len: self.len() })
        }
    }

    fn mean_at(&self, theta_prev: f64, t: usize) -> f64 {
        self.agg.alpha[t] * theta_prev + self.agg.rho[t] * self.agg.tau[t]
    }

    fn var_at(&self, t: usize) -> f64 {
        self.cfg.sigma_theta * self.cfg.sigma_theta * self.agg.alpha[t]
    }

    /// `(μ̃_t, σ̃_t)` of `θ_t | θ_{t-1} = theta_prev`; `t` is zero-based and
    /// the first step conditions on `θ_0 = 0` regardless of `theta_prev`.
    pub fn step_conditional(&self, theta_prev: f64, t: usize) -> Result<(f64, f64)> {
        self.check_index(t)?;
        let prev = if t == 0 { 0.0 } else { theta_prev };
        Ok((self.mean_at(prev, t), math::sqrt(self.var_at(t))))
    }

    /// Exact per-step marginal means and variances.
    pub fn rollout_marginals(&self) -> Marginals {
        let mut means = Vec::with_capacity(self.len());
        let mut variances = Vec::with_capacity(self.len());
        let (mut m, mut v) = (0.0, 0.0);
        for t in 0..self.len() {
            let a = self.agg.alpha[t];
            m = self.mean_at(m, t);
            v = a * a * v + self.var_at(t);
            means.push(m);
            variances.push(v);
        }
        Marginals { means, variances }
    }

    pub fn sample_trajectory(&self, noise: &[f64]) -> Result<Vec<f64>> {
        if noise.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: noise.len() });
        }
        let mut theta = Vec::with_capacity(self.len());
        let mut prev = 0.0;
        for (t, &eps) in noise.iter().enumerate() {
            let x = self.mean_at(prev, t) + math::sqrt(self.var_at(t)) * eps;
            theta.push(x);
            prev = x;
        }
        Ok(theta)
    }

    pub fn lgm_logpdf(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: theta.len() });
        }
        let mut prev = 0.0;
        let mut total = 0.0;
        for (t, &x) in theta.iter().enumerate() {
            total += math::normal_logpdf(x, self.mean_at(prev, t), self.var_at(t));
            prev = x;
        }
        Ok(total)
    }

    /// KL between the chain conditional at `t` and the Wiener step from `theta_prev`.
    pub fn step_kl(&self, theta_prev: f64, t: usize) -> Result<f64> {
        self.check_index(t)?;
        let prev = if t == 0 { 0.0 } else { theta_prev };
        let mean = self.mean_at(prev, t);
        Ok(step_kl_generic(mean, Some(prev), self.agg.alpha[t], self.cfg.lambda_theta()))
    }
}

/// Mean of `θ_t` given only the potentials strictly before `t`, for every `t`.
///
/// This is the chain built from potentials `1..t-1` extended by one vacuous
/// step, evaluated at its last position. It is computed with the forward
/// (filtering) form of the same Gaussian model so the whole sequence costs
/// `O(T)`; entry 0 is the prior mean 0.
pub fn filtered_means(potentials: &[AbilityPotential], cfg: &ModelConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (lam, mu) = split_potentials(potentials)?;
    let step_var = cfg.sigma_theta * cfg.sigma_theta;
    let mut out = Vec::with_capacity(potentials.len());
    // Filtered posterior of θ_{t-1}: mean m, variance v (θ_0 = 0 exactly).
    let (mut m, mut v) = (0.0, 0.0);
    for t in 0..potentials.len() {
        out.push(m);
        let prior_var = v + step_var;
        let post_prec = 1.0 / prior_var + lam[t];
        m = (m / prior_var + lam[t] * mu[t]) / post_prec;
        v = 1.0 / post_prec;
    }
    Ok(out)
}
