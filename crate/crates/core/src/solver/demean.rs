use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solver::factor::FactorColumn;

#[derive(Debug, Clone, Copy)]
pub struct DemeanOptions {
    /// Convergence tolerance on the max within-group mean, relative to the
    /// column's initial scale.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for DemeanOptions {
    fn default() -> Self {
        DemeanOptions {
            tol: 1e-10,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DemeanInfo {
    pub sweeps: usize,
    pub max_group_mean: f64,
}

const PAR_LEVEL_THRESHOLD: usize = 512;

/// Group means of one column, accumulated per level in ascending row order so
/// the result is independent of scheduling.
pub fn group_means(column: &[f64], factor: &FactorColumn) -> Vec<f64> {
    let per_level = |level: usize| -> f64 {
        let rows = factor.rows_of_level(level);
        if rows.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for &r in rows {
            sum += column[r as usize];
        }
        sum / rows.len() as f64
    };
    if factor.n_levels >= PAR_LEVEL_THRESHOLD {
        (0..factor.n_levels).into_par_iter().map(per_level).collect()
    } else {
        (0..factor.n_levels).map(per_level).collect()
    }
}

fn group_sums_into(column: &[f64], factor: &FactorColumn, out: &mut [f64]) {
    out.fill(0.0);
    for (v, &l) in column.iter().zip(&factor.level_of_row) {
        out[l as usize] += v;
    }
}

fn scale_of(column: &[f64]) -> f64 {
    column.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300)
}

/// Solves the two-factor fixed-effect least squares for one column by
/// Jacobi-preconditioned conjugate gradients on the normal equations
/// D'D theta = D'v. Stops when every within-group mean of the residual
/// column v - D theta is at most `tol * scale`; that residual is exactly the
/// demeaned column. Returns the per-factor effect vectors (minimum-norm
/// representative) and the iteration count.
pub(crate) fn two_factor_solve(
    column: &[f64],
    f0: &FactorColumn,
    f1: &FactorColumn,
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let n = column.len();
    let (l0, l1) = (f0.n_levels, f1.n_levels);
    let scale = scale_of(column);
    let counts0: Vec<f64> = (0..l0).map(|l| f0.level_size(l) as f64).collect();
    let counts1: Vec<f64> = (0..l1).map(|l| f1.level_size(l) as f64).collect();

    // b = D'v
    let mut b0 = vec![0.0f64; l0];
    let mut b1 = vec![0.0f64; l1];
    group_sums_into(column, f0, &mut b0);
    group_sums_into(column, f1, &mut b1);

    let mut theta0 = vec![0.0f64; l0];
    let mut theta1 = vec![0.0f64; l1];
    let mut r0 = b0;
    let mut r1 = b1;
    let converged = |r0: &[f64], r1: &[f64]| -> (bool, f64) {
        let mut worst = 0.0f64;
        for (r, c) in r0.iter().zip(&counts0) {
            worst = worst.max(r.abs() / c);
        }
        for (r, c) in r1.iter().zip(&counts1) {
            worst = worst.max(r.abs() / c);
        }
        (worst <= tol * scale, worst)
    };

    let (mut done, mut worst) = converged(&r0, &r1);
    if done {
        return Ok((theta0, theta1, 0));
    }

    let mut z0: Vec<f64> = r0.iter().zip(&counts0).map(|(r, c)| r / c).collect();
    let mut z1: Vec<f64> = r1.iter().zip(&counts1).map(|(r, c)| r / c).collect();
    let mut p0 = z0.clone();
    let mut p1 = z1.clone();
    let mut rz: f64 = dot(&r0, &z0) + dot(&r1, &z1);
    let mut t = vec![0.0f64; n];
    let mut ap0 = vec![0.0f64; l0];
    let mut ap1 = vec![0.0f64; l1];

    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        // A p = D'(D p)
        for (ti, (&la, &lb)) in t
            .iter_mut()
            .zip(f0.level_of_row.iter().zip(&f1.level_of_row))
        {
            *ti = p0[la as usize] + p1[lb as usize];
        }
        group_sums_into(&t, f0, &mut ap0);
        group_sums_into(&t, f1, &mut ap1);
        let p_ap = dot(&p0, &ap0) + dot(&p1, &ap1);
        if !(p_ap > 0.0) {
            break;
        }
        let alpha = rz / p_ap;
        axpy(&mut theta0, &p0, alpha);
        axpy(&mut theta1, &p1, alpha);
        axpy(&mut r0, &ap0, -alpha);
        axpy(&mut r1, &ap1, -alpha);
        (done, worst) = converged(&r0, &r1);
        if done {
            break;
        }
        for ((z, r), c) in z0.iter_mut().zip(&r0).zip(&counts0) {
            *z = r / c;
        }
        for ((z, r), c) in z1.iter_mut().zip(&r1).zip(&counts1) {
            *z = r / c;
        }
        let rz_new = dot(&r0, &z0) + dot(&r1, &z1);
        let beta = rz_new / rz;
        rz = rz_new;
        for (p, z) in p0.iter_mut().zip(&z0) {
            *p = z + beta * *p;
        }
        for (p, z) in p1.iter_mut().zip(&z1) {
            *p = z + beta * *p;
        }
    }
    if !done {
        return Err(Error::NonConvergence {
            max_sweeps: max_iterations,
            resid: worst / scale,
        });
    }
    Ok((theta0, theta1, iterations))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], x: &[f64], alpha: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Projects every column onto the orthogonal complement of the absorbed
/// factors' span, until the largest within-group mean of any column is at
/// most `tol` times that column's initial scale. One factor demeans exactly
/// in a single pass; two factors use the conjugate-gradient solve.
pub fn demean_in_place(
    columns: &mut [Vec<f64>],
    factors: &[FactorColumn],
    opts: &DemeanOptions,
) -> Result<DemeanInfo> {
    if columns.is_empty() || factors.is_empty() {
        return Ok(DemeanInfo {
            sweeps: 0,
            max_group_mean: 0.0,
        });
    }
    match factors {
        [f] => {
            let mut max_rel = 0.0f64;
            for column in columns.iter_mut() {
                let scale = scale_of(column);
                let means = group_means(column, f);
                for (v, &l) in column.iter_mut().zip(&f.level_of_row) {
                    *v -= means[l as usize];
                }
                for m in group_means(column, f) {
                    max_rel = max_rel.max(m.abs() / scale);
                }
            }
            if max_rel > opts.tol {
                return Err(Error::NonConvergence {
                    max_sweeps: 1,
                    resid: max_rel,
                });
            }
            Ok(DemeanInfo {
                sweeps: 1,
                max_group_mean: max_rel,
            })
        }
        [f0, f1] => {
            let results: Vec<Result<usize>> = columns
                .par_iter_mut()
                .map(|column| {
                    let (theta0, theta1, iterations) =
                        two_factor_solve(column, f0, f1, opts.tol, opts.max_sweeps)?;
                    for (v, (&la, &lb)) in column
                        .iter_mut()
                        .zip(f0.level_of_row.iter().zip(&f1.level_of_row))
                    {
                        *v -= theta0[la as usize] + theta1[lb as usize];
                    }
                    Ok(iterations)
                })
                .collect();
            let mut sweeps = 0;
            for r in results {
                sweeps = sweeps.max(r?);
            }
            // Final verification on the demeaned state.
            let mut max_rel = 0.0f64;
            for f in [f0, f1] {
                for column in columns.iter() {
                    let scale = scale_of(column).max(1.0);
                    for m in group_means(column, f) {
                        max_rel = max_rel.max(m.abs() / scale);
                    }
                }
            }
            Ok(DemeanInfo {
                sweeps,
                max_group_mean: max_rel,
            })
        }
        _ => Err(Error::Data(format!(
            "demeaning supports 1 or 2 factors, got {}",
            factors.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_factor_converges_in_one_sweep() {
        let keys = vec![1u32, 1, 2, 2, 2];
        let (f, _) = FactorColumn::from_keys("g", &keys);
        let mut cols = vec![vec![1.0, 3.0, 2.0, 4.0, 6.0]];
        let info = demean_in_place(&mut cols, &[f], &DemeanOptions::default()).unwrap();
        assert_eq!(info.sweeps, 1);
        assert_eq!(cols[0], vec![-1.0, 1.0, -2.0, 0.0, 2.0]);
    }

    #[test]
    fn two_factor_group_means_vanish() {
        let f1_keys = vec![1u32, 1, 2, 2, 1, 2];
        let f2_keys = vec![1u32, 2, 1, 2, 2, 1];
        let (f1, _) = FactorColumn::from_keys("a", &f1_keys);
        let (f2, _) = FactorColumn::from_keys("b", &f2_keys);
        let mut cols = vec![vec![5.0, -2.0, 3.0, 0.5, 1.0, 9.0]];
        demean_in_place(&mut cols, &[f1.clone(), f2.clone()], &DemeanOptions::default()).unwrap();
        for f in [&f1, &f2] {
            for mean in group_means(&cols[0], f) {
                assert!(mean.abs() < 1e-9, "group mean {mean}");
            }
        }
    }

    #[test]
    fn singleton_groups_demean_to_zero() {
        let keys = vec![1u32, 2, 3];
        let (f, _) = FactorColumn::from_keys("g", &keys);
        let mut cols = vec![vec![4.0, 5.0, 6.0]];
        demean_in_place(&mut cols, &[f], &DemeanOptions::default()).unwrap();
        assert_eq!(cols[0], vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn thin_bridge_between_blocks_still_converges() {
        // Two dense blocks joined by a single bridge row: the worst case for
        // plain alternating sweeps.
        let mut f0_keys = Vec::new();
        let mut f1_keys = Vec::new();
        let mut col = Vec::new();
        for i in 0..400u32 {
            f0_keys.push(i % 2);
            f1_keys.push(i % 5);
            col.push((i as f64 * 0.37).sin() + 1.0);
        }
        for i in 0..400u32 {
            f0_keys.push(2 + i % 2);
            f1_keys.push(5 + i % 5);
            col.push((i as f64 * 0.61).cos() - 2.0);
        }
        // The bridge: one observation linking block one's zone 0 to block
        // two's firm 5.
        f0_keys.push(0);
        f1_keys.push(5);
        col.push(7.0);
        let (f0, _) = FactorColumn::from_keys("a", &f0_keys);
        let (f1, _) = FactorColumn::from_keys("b", &f1_keys);
        let mut cols = vec![col];
        let info = demean_in_place(&mut cols, &[f0.clone(), f1.clone()], &DemeanOptions::default())
            .unwrap();
        assert!(info.sweeps < 200, "took {} iterations", info.sweeps);
        for f in [&f0, &f1] {
            let scale = 7.0f64;
            for mean in group_means(&cols[0], f) {
                assert!(mean.abs() <= 1e-9 * scale, "group mean {mean}");
            }
        }
    }
}
