use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense OLS (the testing oracle): rank-revealing column-pivoted QR on the
/// explicit design, including any dummy columns the caller supplies.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r2: f64,
}

pub fn dense_ols_oracle(y: &[f64], x_cols: &[Vec<f64>]) -> Result<OlsFit> {
    let n = y.len();
    let p = x_cols.len();
    if n == 0 || p == 0 {
        return Err(Error::EmptySample("dense OLS".to_string()));
    }
    for c in x_cols {
        assert_eq!(c.len(), n, "design column length mismatch");
    }
    let mut x = DMatrix::zeros(n, p);
    for (j, col) in x_cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let yv = DVector::from_column_slice(y);

    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let eps = 1e-12 * smax.max(1e-300);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    if rank < p {
        return Err(Error::RankDeficient {
            column: format!("rank {rank} < {p} columns"),
        });
    }
    let beta = svd.solve(&yv, eps).map_err(|_| Error::RankDeficient {
        column: "design".to_string(),
    })?;
    let beta = DVector::from_column_slice(beta.as_slice());

    let fitted = &x * &beta;
    let residuals = &yv - &fitted;
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(OlsFit {
        beta: beta.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
        r2,
    })
}

/// Outcome of solving the normal equations for the demeaned design, with
/// collinear columns detected by pivoted Cholesky on the Gram matrix.
#[derive(Debug, Clone)]
pub struct GramSolve {
    pub beta: Vec<f64>,
    pub xtx_inv: DMatrix<f64>,
    /// Indices of retained columns, in original order.
    pub kept: Vec<usize>,
    /// Indices of columns found collinear, in original order.
    pub collinear: Vec<usize>,
}

/// Builds X'X and X'y in a single sequential pass.
pub fn gram_and_xty(x_cols: &[Vec<f64>], y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let p = x_cols.len();
    let mut gram = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    for a in 0..p {
        for b in a..p {
            let mut s = 0.0;
            for (xa, xb) in x_cols[a].iter().zip(&x_cols[b]) {
                s += xa * xb;
            }
            gram[(a, b)] = s;
            gram[(b, a)] = s;
        }
        let mut s = 0.0;
        for (xa, yi) in x_cols[a].iter().zip(y) {
            s += xa * yi;
        }
        xty[a] = s;
    }
    (gram, xty)
}

/// Identifies columns that are numerically collinear: pivoted Cholesky stops
/// when the largest remaining updated diagonal falls below `rel_tol` times
/// that column's original diagonal; everything not yet pivoted is collinear.
pub fn detect_collinear(gram: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let p = gram.nrows();
    if p == 0 {
        return Vec::new();
    }
    let mut a = gram.clone();
    let mut active: Vec<usize> = (0..p).collect();
    let diag0: Vec<f64> = (0..p).map(|j| gram[(j, j)].max(0.0)).collect();
    let mut selected = vec![false; p];
    let mut basis: Vec<usize> = Vec::new();

    for _ in 0..p {
        // Pick the largest remaining updated diagonal.
        let mut best = None;
        let mut best_val = f64::NEG_INFINITY;
        for &j in &active {
            let d = a[(j, j)];
            if d > best_val {
                best_val = d;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        let tol = rel_tol * diag0[j].max(1e-300);
        if best_val <= tol {
            break;
        }
        selected[j] = true;
        basis.push(j);
        active.retain(|&k| k != j);
        // Schur-complement update of the remaining diagonal block.
        let d = a[(j, j)];
        let col: Vec<f64> = active.iter().map(|&k| a[(j, k)]).collect();
        for (bi, &kb) in active.iter().enumerate() {
            for (ci, &kc) in active.iter().enumerate() {
                let upd = col[bi] * col[ci] / d;
                a[(kb, kc)] -= upd;
            }
        }
    }
    (0..p).filter(|&j| !selected[j]).collect()
}

/// Solves the normal equations for the retained columns.
pub fn solve_kept(gram: &DMatrix<f64>, xty: &DVector<f64>, kept: &[usize]) -> Result<GramSolve> {
    let k = kept.len();
    if k == 0 {
        return Ok(GramSolve {
            beta: Vec::new(),
            xtx_inv: DMatrix::zeros(0, 0),
            kept: Vec::new(),
            collinear: Vec::new(),
        });
    }
    let sub = DMatrix::from_fn(k, k, |a, b| gram[(kept[a], kept[b])]);
    let rhs = DVector::from_fn(k, |a, _| xty[kept[a]]);
    let chol = sub.clone().cholesky().ok_or_else(|| Error::RankDeficient {
        column: "gram matrix not positive definite after collinearity screen".to_string(),
    })?;
    let beta = chol.solve(&rhs);
    let xtx_inv = chol.inverse();
    Ok(GramSolve {
        beta: beta.iter().copied().collect(),
        xtx_inv,
        kept: kept.to_vec(),
        collinear: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_system_recovers_coefficients() {
        let x1: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let x0 = vec![1.0; 20];
        let y: Vec<f64> = x1.iter().map(|x| 3.0 - 2.0 * x).collect();
        let fit = dense_ols_oracle(&y, &[x0, x1]).unwrap();
        assert!((fit.beta[0] - 3.0).abs() < 1e-10);
        assert!((fit.beta[1] + 2.0).abs() < 1e-10);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-9));
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_fits_the_mean() {
        let y = vec![1.0, 2.0, 6.0];
        let fit = dense_ols_oracle(&y, &[vec![1.0; 3]]).unwrap();
        assert!((fit.beta[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 50;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let fit = dense_ols_oracle(&y, &cols).unwrap();
        for col in &cols {
            let dot: f64 = fit.residuals.iter().zip(col).map(|(e, x)| e * x).sum();
            let norm_e: f64 = fit.residuals.iter().map(|e| e * e).sum::<f64>().sqrt();
            let norm_x: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(dot.abs() <= 1e-10 * (1.0 + norm_e * norm_x));
        }
    }

    #[test]
    fn singular_design_is_detected() {
        let x0 = vec![1.0; 10];
        let x1: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let y = vec![0.0; 10];
        assert!(dense_ols_oracle(&y, &[x0, x1, x2]).is_err());
    }

    #[test]
    fn collinear_detection_flags_duplicate_column() {
        let x0 = vec![1.0; 8];
        let x1: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let x2: Vec<f64> = x1.iter().map(|v| 3.0 * v - 1.0).collect();
        let (gram, _) = gram_and_xty(&[x0, x1, x2], &vec![0.0; 8]);
        let collinear = detect_collinear(&gram, 1e-9);
        assert_eq!(collinear.len(), 1);
    }
}
