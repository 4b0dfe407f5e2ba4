//! First-stage specifications (commuting-zone effects, lagged firm effects,
//! coworker controls), the second-stage projection of zone effects onto log
//! population, firm-effect projections, stayer subsamples, and the
//! percent-change accounting relative to the baseline.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernel::MOMENT_NAMES;
use crate::panel::{CzTable, FirmKey};
use crate::pipeline::PreparedPanel;
use crate::solver::{
    absorb_and_estimate, clustered_vcov, gram_and_xty, solve_kept, CollinearPolicy, DataTable,
    EstimationResult, FactorColumn, RegressionSpec, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ControlSet {
    Baseline,
    FirmFe,
    Coworkers,
    CoworkersFirmFe,
    /// Distribution-moment controls (the full cumulative stage).
    Moments,
}

impl ControlSet {
    pub fn label(&self) -> &'static str {
        match self {
            ControlSet::Baseline => "baseline",
            ControlSet::FirmFe => "firm_fe",
            ControlSet::Coworkers => "coworkers",
            ControlSet::CoworkersFirmFe => "coworkers_firm_fe",
            ControlSet::Moments => "moments",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(ControlSet::Baseline),
            "firm_fe" => Some(ControlSet::FirmFe),
            "coworkers" => Some(ControlSet::Coworkers),
            "coworkers_firm_fe" => Some(ControlSet::CoworkersFirmFe),
            "moments" => Some(ControlSet::Moments),
            _ => None,
        }
    }

    pub fn has_firm_fe(&self) -> bool {
        matches!(self, ControlSet::FirmFe | ControlSet::CoworkersFirmFe)
    }

    pub fn has_coworkers(&self) -> bool {
        matches!(self, ControlSet::Coworkers | ControlSet::CoworkersFirmFe)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DepVar {
    Level,
    Log,
    Growth,
}

impl DepVar {
    pub fn label(&self) -> &'static str {
        match self {
            DepVar::Level => "level",
            DepVar::Log => "log",
            DepVar::Growth => "growth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "level" => Some(DepVar::Level),
            "log" => Some(DepVar::Log),
            "growth" => Some(DepVar::Growth),
            _ => None,
        }
    }

    /// The growth specification has no lagged-wage term.
    pub fn has_lagged_wage(&self) -> bool {
        !matches!(self, DepVar::Growth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sample {
    All,
    Stayers,
}

impl Sample {
    pub fn label(&self) -> &'static str {
        match self {
            Sample::All => "all",
            Sample::Stayers => "stayers",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(Sample::All),
            "stayers" => Some(Sample::Stayers),
            _ => None,
        }
    }
}

/// One cell of the specification grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SpecId {
    pub controls: ControlSet,
    pub dv: DepVar,
    pub sample: Sample,
}

impl SpecId {
    pub fn label(&self) -> String {
        format!(
            "{}_{}_{}",
            self.controls.label(),
            self.dv.label(),
            self.sample.label()
        )
    }
}

/// Symmetric wage growth 2(w_t - w_prev)/(w_t + w_prev); `None` when the
/// denominator is zero (the observation is dropped with a counter).
pub fn symmetric_growth(w_t: f64, w_prev: f64) -> Option<f64> {
    let denom = w_t + w_prev;
    if denom == 0.0 {
        return None;
    }
    Some(2.0 * (w_t - w_prev) / denom)
}

/// Percent change relative to a baseline: 100 (value/baseline - 1).
pub fn percent_change(value: f64, baseline: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok(100.0 * (value / baseline - 1.0))
}

/// Paper-style one-decimal formatting of a percent change; machine outputs
/// keep full precision.
pub fn format_percent(p: f64) -> String {
    format!("{p:+.1}%")
}

/// A first-stage fit together with the recovered zone effects and, when firm
/// effects were absorbed, the firm-effect table.
#[derive(Debug, Clone)]
pub struct FirstStage {
    pub spec: SpecId,
    pub result: EstimationResult,
    /// Recovered commuting-zone effect per zone id.
    pub cz_fe: Vec<(u32, f64)>,
    pub firm_fe: Option<Vec<(FirmKey, f64)>>,
    /// Indices into the prepared panel rows that entered the estimation.
    pub rows_used: Vec<u32>,
}

fn select_rows(prep: &PreparedPanel, dv: DepVar, sample: Sample) -> Vec<u32> {
    (0..prep.n_pairs() as u32)
        .filter(|&i| {
            let i = i as usize;
            if !prep.same_cz[i] {
                return false;
            }
            if sample == Sample::Stayers && prep.pairs[i].is_ee {
                return false;
            }
            match dv {
                DepVar::Level => true,
                DepVar::Log => prep.log_valid[i],
                DepVar::Growth => prep.growth_valid[i],
            }
        })
        .collect()
}

fn dv_columns<'a>(prep: &'a PreparedPanel, dv: DepVar) -> (&'a [f64], &'a [f64]) {
    match dv {
        DepVar::Level => (&prep.resid_level_t, &prep.resid_level_prev),
        DepVar::Log => (&prep.resid_log_t, &prep.resid_log_prev),
        DepVar::Growth => (&prep.growth, &prep.resid_level_prev),
    }
}

fn stats_for_dv<'a>(prep: &'a PreparedPanel, dv: DepVar) -> &'a [crate::kernel::TeamStatsRow] {
    match dv {
        DepVar::Log => &prep.stats_log,
        // Growth specifications keep the level-based coworker regressors.
        _ => &prep.stats_level,
    }
}

struct Assembled {
    table: DataTable,
    spec: RegressionSpec,
    cz_keys: Vec<u32>,
    firm_keys: Option<Vec<FirmKey>>,
    rows: Vec<u32>,
}

fn assemble(
    prep: &PreparedPanel,
    spec: SpecId,
    covariates: &[(String, Box<dyn Fn(usize) -> f64 + '_>)],
) -> Result<Assembled> {
    let rows = select_rows(prep, spec.dv, spec.sample);
    if rows.is_empty() {
        return Err(Error::EmptySample(spec.label()));
    }
    let n = rows.len();
    let (resp_col, _) = dv_columns(prep, spec.dv);
    let mut table = DataTable::new(n);
    table.add_column(
        "response",
        rows.iter().map(|&i| resp_col[i as usize]).collect(),
    );
    let mut names = Vec::new();
    for (name, f) in covariates {
        table.add_column(name, rows.iter().map(|&i| f(i as usize)).collect());
        names.push(name.clone());
    }
    let cz_row_keys: Vec<u32> = rows.iter().map(|&i| prep.pairs[i as usize].cz_id_t).collect();
    let (cz_factor, cz_keys) = FactorColumn::from_keys("cz", &cz_row_keys);
    table.add_factor(cz_factor);
    let mut absorb = vec!["cz".to_string()];
    let mut firm_keys = None;
    if spec.controls.has_firm_fe() {
        let firm_row_keys: Vec<FirmKey> =
            rows.iter().map(|&i| prep.pairs[i as usize].firm_prev).collect();
        let (firm_factor, keys) = FactorColumn::from_keys("firm", &firm_row_keys);
        table.add_factor(firm_factor);
        absorb.push("firm".to_string());
        firm_keys = Some(keys);
    }
    Ok(Assembled {
        table,
        spec: RegressionSpec {
            response: "response".to_string(),
            covariates: names,
            absorb,
            cluster: "cz".to_string(),
        },
        cz_keys,
        firm_keys,
        rows,
    })
}

fn finish(
    assembled: Assembled,
    spec: SpecId,
    result: EstimationResult,
) -> FirstStage {
    let cz_fe = assembled
        .cz_keys
        .iter()
        .zip(&result.fe_values[0].values)
        .map(|(&cz, &v)| (cz, v))
        .collect();
    let firm_fe = assembled.firm_keys.as_ref().map(|keys| {
        keys.iter()
            .zip(&result.fe_values[1].values)
            .map(|(&k, &v)| (k, v))
            .collect()
    });
    FirstStage {
        spec,
        result,
        cz_fe,
        firm_fe,
        rows_used: assembled.rows,
    }
}

/// Runs one first-stage cell: absorbs the zone factor (plus the lagged firm
/// factor for the firm-effect variants), with the lagged wage and, for the
/// coworker variants, the four deviation statistics as covariates. The
/// growth variant has no lagged-wage term. Standard errors cluster on the
/// commuting zone.
pub fn run_first_stage(
    prep: &PreparedPanel,
    spec: SpecId,
    opts: &SolverOptions,
) -> Result<FirstStage> {
    if spec.controls == ControlSet::Moments {
        return run_moments_specification(prep, 9, spec.dv, spec.sample, opts);
    }
    let (_, lag_col) = dv_columns(prep, spec.dv);
    let stats = stats_for_dv(prep, spec.dv);
    let mut covariates: Vec<(String, Box<dyn Fn(usize) -> f64>)> = Vec::new();
    if spec.dv.has_lagged_wage() {
        covariates.push((
            "lagged_wage".to_string(),
            Box::new(move |i| lag_col[i]),
        ));
    }
    if spec.controls.has_coworkers() {
        covariates.push(("y1_plus".to_string(), Box::new(move |i| stats[i].stats.y1_plus)));
        covariates.push(("y1_minus".to_string(), Box::new(move |i| stats[i].stats.y1_minus)));
        covariates.push(("y2_plus".to_string(), Box::new(move |i| stats[i].stats.y2_plus)));
        covariates.push(("y2_minus".to_string(), Box::new(move |i| stats[i].stats.y2_minus)));
    }
    let assembled = assemble(prep, spec, &covariates)?;
    let result = absorb_and_estimate(&assembled.table, &assembled.spec, opts)?;
    Ok(finish(assembled, spec, result))
}

/// Cumulative moments specification: stage 1 is the baseline; stages 2..=9
/// add the mean, variance, skewness, kurtosis, p1, p10, p90, and p99 of the
/// lagged team wage distribution, each with its interaction with the lagged
/// wage. Collinear moment columns are dropped with a warning.
pub fn run_moments_specification(
    prep: &PreparedPanel,
    stage: usize,
    dv: DepVar,
    sample: Sample,
    opts: &SolverOptions,
) -> Result<FirstStage> {
    if !(1..=9).contains(&stage) {
        return Err(Error::Data(format!("moments stage must be 1..=9, got {stage}")));
    }
    if !dv.has_lagged_wage() {
        return Err(Error::Data(
            "moments specifications require a lagged-wage dependent variable (level or log)"
                .to_string(),
        ));
    }
    let spec = SpecId {
        controls: if stage == 1 {
            ControlSet::Baseline
        } else {
            ControlSet::Moments
        },
        dv,
        sample,
    };
    let (_, lag_col) = dv_columns(prep, dv);
    let stats = stats_for_dv(prep, dv);
    let mut covariates: Vec<(String, Box<dyn Fn(usize) -> f64>)> = Vec::new();
    covariates.push(("lagged_wage".to_string(), Box::new(move |i| lag_col[i])));
    for m in 0..stage.saturating_sub(1) {
        let name = MOMENT_NAMES[m];
        covariates.push((
            format!("mom_{name}"),
            Box::new(move |i| stats[i].moments.as_array()[m]),
        ));
        covariates.push((
            format!("mom_{name}_x_lagged_wage"),
            Box::new(move |i| stats[i].moments.as_array()[m] * lag_col[i]),
        ));
    }
    let assembled = assemble(prep, spec, &covariates)?;
    let moments_opts = SolverOptions {
        collinear: CollinearPolicy::Drop,
        ..opts.clone()
    };
    let result = absorb_and_estimate(&assembled.table, &assembled.spec, &moments_opts)?;
    Ok(finish(assembled, spec, result))
}

/// Second-stage projection of estimated zone effects onto log population:
/// one observation per commuting zone, unweighted by default, with
/// heteroskedasticity-robust standard errors.
#[derive(Debug, Clone, Copy)]
pub struct SecondStageResult {
    pub alpha0: f64,
    pub alpha: f64,
    pub se_alpha: f64,
    pub r2: f64,
    pub n_cz: usize,
}

pub fn run_second_stage(
    cz_fe: &[(u32, f64)],
    cz_table: &CzTable,
    weights: Option<&BTreeMap<u32, f64>>,
) -> Result<SecondStageResult> {
    let n = cz_fe.len();
    if n < 3 {
        return Err(Error::TooFewCz(n));
    }
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for &(cz, fe) in cz_fe {
        let lp = cz_table
            .log_population(cz)
            .ok_or_else(|| Error::Data(format!("cz {cz} missing from table")))?;
        x.push(lp);
        y.push(fe);
        w.push(weights.map_or(1.0, |m| m.get(&cz).copied().unwrap_or(0.0)));
    }
    let xbar = x.iter().sum::<f64>() / n as f64;
    if x.iter().all(|v| (v - xbar).abs() < 1e-14 * (1.0 + xbar.abs())) {
        return Err(Error::DegeneratePopulation);
    }

    // Weighted least squares via sqrt-weight transformation; unit weights
    // reduce to plain OLS.
    let sw: Vec<f64> = w.iter().map(|v| v.max(0.0).sqrt()).collect();
    let x_cols = vec![
        sw.clone(),
        x.iter().zip(&sw).map(|(xi, si)| xi * si).collect::<Vec<f64>>(),
    ];
    let yt: Vec<f64> = y.iter().zip(&sw).map(|(yi, si)| yi * si).collect();
    let (gram, xty) = gram_and_xty(&x_cols, &yt);
    let solve = solve_kept(&gram, &xty, &[0, 1])?;
    let (alpha0, alpha) = (solve.beta[0], solve.beta[1]);

    let mut residuals = Vec::with_capacity(n);
    let mut ssr = 0.0;
    let mut sw_sum = 0.0;
    let mut ybar_w = 0.0;
    for i in 0..n {
        let e = yt[i] - alpha0 * sw[i] - alpha * x_cols[1][i];
        residuals.push(e);
        ssr += e * e;
        sw_sum += w[i];
        ybar_w += w[i] * y[i];
    }
    ybar_w /= sw_sum.max(1e-300);
    let sst: f64 = (0..n).map(|i| w[i] * (y[i] - ybar_w).powi(2)).sum();
    let r2 = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 0.0 };

    // HC1-style robust errors: every zone is its own cluster.
    let ids: Vec<u32> = (0..n as u32).collect();
    let (cluster, _) = FactorColumn::from_keys("row", &ids);
    let vcov = clustered_vcov(&x_cols, &residuals, &cluster, 2)?;
    Ok(SecondStageResult {
        alpha0,
        alpha,
        se_alpha: vcov[(1, 1)].max(0.0).sqrt(),
        r2,
        n_cz: n,
    })
}

/// Projects estimated firm effects onto zone size: the employment-weighted
/// mean of the firm effects per commuting zone (weights are the estimation
/// sample's worker counts in each lagged firm), regressed on log population.
pub fn project_firm_fes(
    firm_fe: &[(FirmKey, f64)],
    prep: &PreparedPanel,
    rows_used: &[u32],
    cz_table: &CzTable,
) -> Result<SecondStageResult> {
    let mu: BTreeMap<FirmKey, f64> = firm_fe.iter().copied().collect();
    let mut sums: BTreeMap<u32, (f64, u64)> = BTreeMap::new();
    for &row in rows_used {
        let p = &prep.pairs[row as usize];
        let Some(&m) = mu.get(&p.firm_prev) else {
            continue;
        };
        let e = sums.entry(p.cz_id_t).or_insert((0.0, 0));
        e.0 += m;
        e.1 += 1;
    }
    let means: Vec<(u32, f64)> = sums
        .into_iter()
        .map(|(cz, (s, c))| (cz, s / c as f64))
        .collect();
    run_second_stage(&means, cz_table, None)
}

/// Mean log population and mean zone effect per population-quantile bin
/// (2% bins by default: fifty bins of zones ordered by log population).
#[derive(Debug, Clone, Copy)]
pub struct FeBin {
    pub mean_log_population: f64,
    pub mean_fe: f64,
    pub n_cz: usize,
}

pub fn bin_fe_by_population(
    cz_fe: &[(u32, f64)],
    cz_table: &CzTable,
    n_bins: usize,
) -> Result<Vec<FeBin>> {
    if cz_fe.is_empty() {
        return Ok(Vec::new());
    }
    let mut rows: Vec<(f64, f64)> = Vec::with_capacity(cz_fe.len());
    for &(cz, fe) in cz_fe {
        let lp = cz_table
            .log_population(cz)
            .ok_or_else(|| Error::Data(format!("cz {cz} missing from table")))?;
        rows.push((lp, fe));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = rows.len();
    let bins = n_bins.max(1).min(n);
    let mut out = Vec::with_capacity(bins);
    for b in 0..bins {
        let lo = b * n / bins;
        let hi = (b + 1) * n / bins;
        let slice = &rows[lo..hi];
        let m = slice.len() as f64;
        out.push(FeBin {
            mean_log_population: slice.iter().map(|r| r.0).sum::<f64>() / m,
            mean_fe: slice.iter().map(|r| r.1).sum::<f64>() / m,
            n_cz: slice.len(),
        });
    }
    Ok(out)
}

/// One grid cell of the report: the first-stage summary, the second stage,
/// and percent changes relative to the baseline cell.
#[derive(Debug, Clone)]
pub struct ReportCell {
    pub label: String,
    pub controls: ControlSet,
    pub coef_names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub n_obs: usize,
    pub first_stage_r2: f64,
    pub second: SecondStageResult,
    pub alpha_change_pct: Option<f64>,
    pub r2_change_pct: Option<f64>,
}

impl ReportCell {
    pub fn new(label: &str, stage: &FirstStage, second: SecondStageResult) -> Self {
        ReportCell {
            label: label.to_string(),
            controls: stage.spec.controls,
            coef_names: stage.result.coef_names.clone(),
            beta: stage.result.beta.clone(),
            se: stage.result.se(),
            n_obs: stage.result.n_obs,
            first_stage_r2: stage.result.r2,
            second,
            alpha_change_pct: None,
            r2_change_pct: None,
        }
    }
}

/// The assembled grid for one (dependent variable, sample) pair. Percent
/// changes are always relative to the full-sample baseline cell, which leads
/// the cell list for stayer grids.
#[derive(Debug, Clone)]
pub struct DecompositionReport {
    pub dv: DepVar,
    pub sample: Sample,
    pub cells: Vec<ReportCell>,
}

pub fn build_report(
    dv: DepVar,
    sample: Sample,
    mut cells: Vec<ReportCell>,
) -> Result<DecompositionReport> {
    let baseline = cells
        .iter()
        .position(|c| c.label.ends_with("baseline_full") || c.controls == ControlSet::Baseline)
        .ok_or_else(|| Error::MissingBaseline(format!("{}_{}", dv.label(), sample.label())))?;
    let base_alpha = cells[baseline].second.alpha;
    let base_r2 = cells[baseline].second.r2;
    for (i, cell) in cells.iter_mut().enumerate() {
        if i == baseline {
            continue;
        }
        cell.alpha_change_pct = percent_change(cell.second.alpha, base_alpha).ok();
        cell.r2_change_pct = percent_change(cell.second.r2, base_r2).ok();
    }
    Ok(DecompositionReport { dv, sample, cells })
}
