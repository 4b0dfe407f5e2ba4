use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::solver::cluster::{clustered_vcov, standard_errors};
use crate::solver::demean::{demean_in_place, DemeanOptions};
use crate::solver::factor::FactorColumn;
use crate::solver::fe::recover_fixed_effects;
use crate::solver::ols::{detect_collinear, gram_and_xty, solve_kept};

/// What to do with covariate columns found collinear after demeaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollinearPolicy {
    /// Fail, naming the offending column.
    #[default]
    Error,
    /// Drop them and record the names (used by the moments specifications,
    /// where degenerate teams make higher moments collinear).
    Drop,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub demean: DemeanOptions,
    pub collinear: CollinearPolicy,
    /// Relative pivot tolerance of the collinearity screen.
    pub collinear_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            demean: DemeanOptions::default(),
            collinear: CollinearPolicy::Error,
            collinear_tol: 1e-9,
        }
    }
}

/// A named-column table: numeric columns plus categorical factors.
#[derive(Debug, Clone, Default)]
pub struct DataTable {
    n_rows: usize,
    columns: BTreeMap<String, Vec<f64>>,
    factors: BTreeMap<String, FactorColumn>,
}

impl DataTable {
    pub fn new(n_rows: usize) -> Self {
        DataTable {
            n_rows,
            ..Default::default()
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn add_column(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        assert_eq!(values.len(), self.n_rows, "column `{name}` length mismatch");
        self.columns.insert(name.to_string(), values);
        self
    }

    pub fn add_factor(&mut self, factor: FactorColumn) -> &mut Self {
        assert_eq!(factor.n_rows(), self.n_rows, "factor length mismatch");
        self.factors.insert(factor.name.clone(), factor);
        self
    }

    pub fn column(&self, name: &str) -> Result<&Vec<f64>> {
        self.columns
            .get(name)
            .ok_or_else(|| Error::Data(format!("unknown column `{name}`")))
    }

    pub fn factor(&self, name: &str) -> Result<&FactorColumn> {
        self.factors
            .get(name)
            .ok_or_else(|| Error::Data(format!("unknown factor `{name}`")))
    }
}

/// One first-stage regression: a response, covariates, one or two absorbed
/// factors, and the cluster factor for standard errors.
#[derive(Debug, Clone)]
pub struct RegressionSpec {
    pub response: String,
    pub covariates: Vec<String>,
    pub absorb: Vec<String>,
    pub cluster: String,
}

/// Per-level estimates for one absorbed factor.
#[derive(Debug, Clone)]
pub struct FeTable {
    pub factor: String,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
    pub component: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub coef_names: Vec<String>,
    pub beta: Vec<f64>,
    pub vcov_clustered: DMatrix<f64>,
    pub r2: f64,
    pub n_obs: usize,
    pub fe_values: Vec<FeTable>,
    /// Demeaning sweeps until convergence.
    pub n_iterations: usize,
    /// Count of singleton groups across absorbed factors (retained in the
    /// sample; they demean to zero and add no information to beta).
    pub dropped_singletons: usize,
    pub n_components: usize,
    pub dropped_collinear: Vec<String>,
    /// Degrees of freedom: covariates plus absorbed levels minus
    /// per-component normalizations.
    pub dof_k: usize,
}

impl EstimationResult {
    pub fn se(&self) -> Vec<f64> {
        standard_errors(&self.vcov_clustered)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.coef_names
            .iter()
            .position(|c| c == name)
            .map(|i| self.beta[i])
    }

    pub fn coef_se(&self, name: &str) -> Option<f64> {
        self.coef_names
            .iter()
            .position(|c| c == name)
            .map(|i| self.vcov_clustered[(i, i)].max(0.0).sqrt())
    }
}

/// Estimates the spec by iterative demeaning (alternating projections) of the
/// response and covariates within each absorbed factor, OLS on the demeaned
/// data, cluster-robust covariance, and recovery of the identified
/// fixed-effect values. Coefficients equal the full dummy-variable OLS
/// solution; R-squared is computed on the original response against fitted
/// values that include the fixed effects.
pub fn absorb_and_estimate(
    table: &DataTable,
    spec: &RegressionSpec,
    opts: &SolverOptions,
) -> Result<EstimationResult> {
    let n = table.n_rows();
    if n == 0 {
        return Err(Error::EmptySample(spec.response.clone()));
    }
    if spec.absorb.is_empty() || spec.absorb.len() > 2 {
        return Err(Error::Data(format!(
            "absorb expects 1 or 2 factors, got {}",
            spec.absorb.len()
        )));
    }
    let y_orig = table.column(&spec.response)?;
    let cov_orig: Vec<(&str, &Vec<f64>)> = spec
        .covariates
        .iter()
        .map(|c| Ok((c.as_str(), table.column(c)?)))
        .collect::<Result<_>>()?;
    let factors: Vec<&FactorColumn> = spec
        .absorb
        .iter()
        .map(|f| table.factor(f))
        .collect::<Result<_>>()?;
    let cluster = table.factor(&spec.cluster)?;

    let mut singletons = 0usize;
    for f in &factors {
        if f.n_levels < 2 {
            return Err(Error::DegenerateFactor {
                factor: f.name.clone(),
                levels: f.n_levels,
            });
        }
        singletons += f.singleton_count();
    }

    // Demean the working copy of [y, X...].
    let mut working: Vec<Vec<f64>> = Vec::with_capacity(1 + cov_orig.len());
    working.push(y_orig.clone());
    for (_, c) in &cov_orig {
        working.push((*c).clone());
    }
    let owned_factors: Vec<FactorColumn> = factors.iter().map(|f| (*f).clone()).collect();
    let info = demean_in_place(&mut working, &owned_factors, &opts.demean)?;

    let y_dm = working.remove(0);
    let x_dm = working; // demeaned covariates, original order

    // Collinearity screen on the demeaned design.
    let (gram, xty) = gram_and_xty(&x_dm, &y_dm);
    let collinear = detect_collinear(&gram, opts.collinear_tol);
    let mut dropped_collinear = Vec::new();
    if !collinear.is_empty() {
        match opts.collinear {
            CollinearPolicy::Error => {
                return Err(Error::RankDeficient {
                    column: spec.covariates[collinear[0]].clone(),
                });
            }
            CollinearPolicy::Drop => {
                for &j in &collinear {
                    dropped_collinear.push(spec.covariates[j].clone());
                }
            }
        }
    }
    let kept: Vec<usize> = (0..x_dm.len()).filter(|j| !collinear.contains(j)).collect();
    let solve = solve_kept(&gram, &xty, &kept)?;
    let p = kept.len();

    // Residuals from the demeaned regression (equal to the full-model
    // residuals by Frisch-Waugh-Lovell).
    let mut residuals = y_dm.clone();
    for (b_idx, &j) in kept.iter().enumerate() {
        let b = solve.beta[b_idx];
        for (r, x) in residuals.iter_mut().zip(&x_dm[j]) {
            *r -= b * x;
        }
    }

    // Partial residual on the original scale drives fixed-effect recovery.
    let mut partial = y_orig.clone();
    for (b_idx, &j) in kept.iter().enumerate() {
        let b = solve.beta[b_idx];
        for (u, x) in partial.iter_mut().zip(cov_orig[j].1) {
            *u -= b * x;
        }
    }
    let recovery = recover_fixed_effects(
        &partial,
        &owned_factors,
        opts.demean.tol,
        opts.demean.max_sweeps,
    )?;

    // R-squared on the original response against full fitted values.
    let mean_y = y_orig.iter().sum::<f64>() / n as f64;
    let mut ssr = 0.0;
    let mut sst = 0.0;
    for i in 0..n {
        let mut fit = 0.0;
        for (b_idx, &j) in kept.iter().enumerate() {
            fit += solve.beta[b_idx] * cov_orig[j].1[i];
        }
        for (f_idx, f) in owned_factors.iter().enumerate() {
            fit += recovery.values[f_idx][f.level_of_row[i] as usize];
        }
        ssr += (y_orig[i] - fit).powi(2);
        sst += (y_orig[i] - mean_y).powi(2);
    }
    let r2 = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let total_levels: usize = owned_factors.iter().map(|f| f.n_levels).sum();
    let normalizations = if owned_factors.len() == 2 {
        recovery.n_components
    } else {
        0
    };
    let dof_k = p + total_levels - normalizations;

    let x_kept: Vec<Vec<f64>> = kept.iter().map(|&j| x_dm[j].clone()).collect();
    let vcov = clustered_vcov(&x_kept, &residuals, cluster, dof_k)?;

    let fe_values = owned_factors
        .iter()
        .enumerate()
        .map(|(f_idx, f)| FeTable {
            factor: f.name.clone(),
            labels: f.labels.clone(),
            values: recovery.values[f_idx].clone(),
            component: recovery.component_of_level[f_idx].clone(),
        })
        .collect();

    Ok(EstimationResult {
        coef_names: kept.iter().map(|&j| spec.covariates[j].clone()).collect(),
        beta: solve.beta,
        vcov_clustered: vcov,
        r2,
        n_obs: n,
        fe_values,
        n_iterations: info.sweeps,
        dropped_singletons: singletons,
        n_components: recovery.n_components,
        dropped_collinear,
        dof_k,
    })
}
