//! Dense reference posterior for short chains.
//!
//! Builds the full tridiagonal precision of the Wiener prior times the
//! potentials and inverts it directly. Independent of the backward sweep in
//! [`crate::kernel`], which it is used to check.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::AbilityPotential;
use crate::model::ModelConfig;

pub const DENSE_ORACLE_MAX_LEN: usize = 64;

pub type Matrix = Vec<Vec<f64>>;

/// Tridiagonal precision `Λ` and information vector `h` of the joint Gaussian.
pub fn joint_precision(potentials: &[AbilityPotential], cfg: &ModelConfig) -> (Matrix, Vec<f64>) {
    let n = potentials.len();
    let lt = cfg.lambda_theta();
    let mut prec = vec![vec![0.0; n]; n];
    let mut info = vec![0.0; n];
    for t in 0..n {
        let lam = potentials[t].precision();
        let links = if t + 1 < n { 2.0 } else { 1.0 };
        prec[t][t] = lt * links + lam;
        if t + 1 < n {
            prec[t][t + 1] = -lt;
            prec[t + 1][t] = -lt;
        }
        info[t] = if lam == 0.0 { 0.0 } else { lam * potentials[t].mu };
    }
    (prec, info)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(mut a: Matrix) -> Option<Matrix> {
    let n = a.len();
    let mut inv: Matrix = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[row][j] -= f * a[col][j];
                        inv[row][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Joint posterior mean `Λ⁻¹h` and covariance `Λ⁻¹`.
pub fn dense_oracle(potentials: &[AbilityPotential], cfg: &ModelConfig) -> Result<(Vec<f64>, Matrix)> {
    cfg.validate()?;
    if potentials.len() > DENSE_ORACLE_MAX_LEN {
        return Err(Error::TooLong { len: potentials.len(), max: DENSE_ORACLE_MAX_LEN });
    }
    for (i, p) in potentials.iter().enumerate() {
        if !p.mu.is_finite() || p.log_var.is_nan() || !p.precision().is_finite() {
            return Err(Error::InvalidPotential { index: i });
        }
    }
    let (prec, info) = joint_precision(potentials, cfg);
    let cov = invert(prec).ok_or(Error::Undefined("singular precision matrix"))?;
    let mean = cov.iter().map(|row| row.iter().zip(&info).map(|(c, h)| c * h).sum()).collect();
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_conjugacy() {
        let cfg = ModelConfig::new(0.5, 1.0, 1.0).unwrap();
        let p = AbilityPotential::new(1.5, 0.8);
        let (mean, cov) = dense_oracle(&[p], &cfg).unwrap();
        let (lt, l1) = (4.0, 1.0 / 0.64);
        assert!((mean[0] - l1 * 1.5 / (lt + l1)).abs() < 1e-14);
        assert!((cov[0][0] - 1.0 / (lt + l1)).abs() < 1e-14);
    }

    #[test]
    fn vacuous_gives_wiener_covariance() {
        let cfg = ModelConfig::new(0.7, 1.0, 1.0).unwrap();
        let (mean, cov) = dense_oracle(&[AbilityPotential::vacuous(); 4], &cfg).unwrap();
        for s in 0..4 {
            assert_eq!(mean[s], 0.0);
            for t in 0..4 {
                let expected = 0.49 * (s.min(t) + 1) as f64;
                assert!((cov[s][t] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_long_chains() {
        let cfg = ModelConfig::default();
        let p = vec![AbilityPotential::vacuous(); DENSE_ORACLE_MAX_LEN + 1];
        assert!(matches!(dense_oracle(&p, &cfg), Err(Error::TooLong { .. })));
    }
}
