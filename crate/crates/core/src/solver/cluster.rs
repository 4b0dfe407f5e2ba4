use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::solver::factor::FactorColumn;
use crate::solver::ols::gram_and_xty;

/// Liang-Zeger cluster-robust sandwich with the CR1 small-sample factor
/// G/(G-1) * (n-1)/(n-k):
///
///   V = c (X'X)^{-1} (sum_g X_g' e_g e_g' X_g) (X'X)^{-1}
///
/// `x_cols` is the demeaned design; `dof_k` counts covariates plus absorbed
/// levels net of per-component normalizations.
pub fn clustered_vcov(
    x_cols: &[Vec<f64>],
    residuals: &[f64],
    cluster: &FactorColumn,
    dof_k: usize,
) -> Result<DMatrix<f64>> {
    let g = cluster.n_levels;
    if g < 2 {
        return Err(Error::SingleCluster);
    }
    let p = x_cols.len();
    if p == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let n = residuals.len();

    let (gram, _) = gram_and_xty(x_cols, residuals);
    let xtx_inv = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficient {
            column: "X'X in clustered vcov".to_string(),
        })?
        .inverse();

    // Cluster scores s_g = X_g' e_g, accumulated in row order.
    let mut scores = vec![0.0f64; g * p];
    for i in 0..n {
        let gi = cluster.level_of_row[i] as usize;
        let e = residuals[i];
        for (a, col) in x_cols.iter().enumerate() {
            scores[gi * p + a] += col[i] * e;
        }
    }
    let mut meat = DMatrix::zeros(p, p);
    for gi in 0..g {
        let s = &scores[gi * p..(gi + 1) * p];
        for a in 0..p {
            for b in 0..p {
                meat[(a, b)] += s[a] * s[b];
            }
        }
    }

    let gf = g as f64;
    let nf = n as f64;
    let kf = dof_k as f64;
    let correction = if nf > kf {
        (gf / (gf - 1.0)) * ((nf - 1.0) / (nf - kf))
    } else {
        gf / (gf - 1.0)
    };

    let mut v = &xtx_inv * meat * &xtx_inv * correction;
    // Enforce exact symmetry.
    for a in 0..p {
        for b in (a + 1)..p {
            let m = 0.5 * (v[(a, b)] + v[(b, a)]);
            v[(a, b)] = m;
            v[(b, a)] = m;
        }
    }
    Ok(v)
}

pub fn standard_errors(vcov: &DMatrix<f64>) -> Vec<f64> {
    (0..vcov.nrows()).map(|j| vcov[(j, j)].max(0.0).sqrt()).collect()
}
