//! End-to-end sample preparation: load the two cross-sections, filter,
//! deduplicate, deflate, pair, residualize each dependent-variable variant,
//! and compute coworker statistics from the lagged teams.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::{compute_panel_coworker_stats, TeamStatsRow};
use crate::panel::{
    apply_sample_filters, build_paired_panel, dedup_jobs, deflate_wages, load_cpi_table,
    load_cz_table, load_panel, CpiSeries, CzTable, FilterConfig, FilterReport, PairedObservation,
    PanelRecord, ResidualizeInfo, Schema,
};

#[derive(Debug, Clone)]
pub struct PrepareOptions {
    pub filter: FilterConfig,
    pub row_error_budget: u64,
    /// Base year for CPI deflation.
    pub base_year: i32,
    pub schema: Schema,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            filter: FilterConfig::default(),
            row_error_budget: 0,
            base_year: 2015,
            schema: Schema::identity(),
        }
    }
}

/// The estimation-ready panel: paired observations with residualized
/// level and log wages, the symmetric growth rate, per-row validity masks,
/// and coworker statistics computed from the lagged teams.
#[derive(Debug, Clone)]
pub struct PreparedPanel {
    pub pairs: Vec<PairedObservation>,
    pub resid_level_t: Vec<f64>,
    pub resid_level_prev: Vec<f64>,
    /// NaN where the pair has a non-positive wage in either period.
    pub resid_log_t: Vec<f64>,
    pub resid_log_prev: Vec<f64>,
    pub log_valid: Vec<bool>,
    pub growth: Vec<f64>,
    pub growth_valid: Vec<bool>,
    /// True when the worker stayed in the same commuting zone.
    pub same_cz: Vec<bool>,
    pub stats_level: Vec<TeamStatsRow>,
    pub stats_log: Vec<TeamStatsRow>,
    pub report: FilterReport,
    pub residual_info_level: ResidualizeInfo,
    pub residual_info_log: Option<ResidualizeInfo>,
}

impl PreparedPanel {
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }
}

/// Prepares an already-paired panel.
pub fn prepare_pairs(
    pairs: Vec<PairedObservation>,
    mut report: FilterReport,
) -> Result<PreparedPanel> {
    if pairs.is_empty() {
        return Err(Error::EmptySample("no paired observations".to_string()));
    }
    let n = pairs.len();
    let age: Vec<f64> = pairs.iter().map(|p| p.age).collect();
    let gender: Vec<u8> = pairs.iter().map(|p| p.gender).collect();
    let worker_ids: Vec<u64> = pairs.iter().map(|p| p.worker_id).collect();
    let team_keys: Vec<_> = pairs.iter().map(|p| p.team_prev).collect();

    // Levels: residualize on the full paired sample.
    let mut resid_level_t: Vec<f64> = pairs.iter().map(|p| p.wage_t).collect();
    let mut resid_level_prev: Vec<f64> = pairs.iter().map(|p| p.wage_prev).collect();
    let residual_info_level = crate::panel::residualize_wages(
        &mut [&mut resid_level_t, &mut resid_level_prev],
        &age,
        &gender,
    )?;

    // Logs: restricted to pairs with positive wages in both periods.
    let log_valid: Vec<bool> = pairs
        .iter()
        .map(|p| p.wage_t > 0.0 && p.wage_prev > 0.0)
        .collect();
    let n_log = log_valid.iter().filter(|&&v| v).count();
    report.add("nonpositive_wage_log", (n - n_log) as u64);
    let mut resid_log_t = vec![f64::NAN; n];
    let mut resid_log_prev = vec![f64::NAN; n];
    let mut residual_info_log = None;
    if n_log > 0 {
        let rows: Vec<usize> = (0..n).filter(|&i| log_valid[i]).collect();
        let mut lt: Vec<f64> = rows.iter().map(|&i| pairs[i].wage_t.ln()).collect();
        let mut lp: Vec<f64> = rows.iter().map(|&i| pairs[i].wage_prev.ln()).collect();
        let sub_age: Vec<f64> = rows.iter().map(|&i| age[i]).collect();
        let sub_gender: Vec<u8> = rows.iter().map(|&i| gender[i]).collect();
        residual_info_log = Some(crate::panel::residualize_wages(
            &mut [&mut lt, &mut lp],
            &sub_age,
            &sub_gender,
        )?);
        for (k, &i) in rows.iter().enumerate() {
            resid_log_t[i] = lt[k];
            resid_log_prev[i] = lp[k];
        }
    }

    // Symmetric growth from raw wages.
    let mut growth = vec![f64::NAN; n];
    let mut growth_valid = vec![false; n];
    let mut zero_denominator = 0u64;
    for (i, p) in pairs.iter().enumerate() {
        match crate::decomp::symmetric_growth(p.wage_t, p.wage_prev) {
            Some(g) => {
                growth[i] = g;
                growth_valid[i] = true;
            }
            None => zero_denominator += 1,
        }
    }
    report.add("zero_denominator_growth", zero_denominator);

    let same_cz: Vec<bool> = pairs.iter().map(|p| p.cz_id_t == p.cz_id_prev).collect();
    report.add(
        "cross_cz_mover",
        same_cz.iter().filter(|&&s| !s).count() as u64,
    );

    // Coworker statistics from the lagged team, on the same residualized
    // wages each specification uses.
    let stats_level = compute_panel_coworker_stats(&team_keys, &worker_ids, &resid_level_prev);
    let stats_log = if n_log > 0 {
        let rows: Vec<usize> = (0..n).filter(|&i| log_valid[i]).collect();
        let sub_keys: Vec<_> = rows.iter().map(|&i| team_keys[i]).collect();
        let sub_ids: Vec<u64> = rows.iter().map(|&i| worker_ids[i]).collect();
        let sub_wages: Vec<f64> = rows.iter().map(|&i| resid_log_prev[i]).collect();
        let sub_stats = compute_panel_coworker_stats(&sub_keys, &sub_ids, &sub_wages);
        let mut full = vec![TeamStatsRow::default(); n];
        for (k, &i) in rows.iter().enumerate() {
            full[i] = sub_stats[k];
        }
        full
    } else {
        vec![TeamStatsRow::default(); n]
    };

    Ok(PreparedPanel {
        pairs,
        resid_level_t,
        resid_level_prev,
        resid_log_t,
        resid_log_prev,
        log_valid,
        growth,
        growth_valid,
        same_cz,
        stats_level,
        stats_log,
        report,
        residual_info_level,
        residual_info_log,
    })
}

/// Filters, deduplicates, and deflates one cross-section.
pub fn prepare_cross_section(
    rows: &[crate::panel::PanelRow],
    opts: &PrepareOptions,
    cpi: &CpiSeries,
    report: &mut FilterReport,
) -> Result<Vec<PanelRecord>> {
    let (records, filter_report) = apply_sample_filters(rows, &opts.filter);
    report.merge(&filter_report);
    let mut records = dedup_jobs(records, report);
    deflate_wages(&mut records, cpi)?;
    Ok(records)
}

/// Everything loaded from a panel directory, before estimation.
pub struct PreparedInputs {
    pub prepared: PreparedPanel,
    pub cz_table: CzTable,
    pub records_prev: Vec<PanelRecord>,
    pub records_curr: Vec<PanelRecord>,
}

/// Reads `panel_prev.csv`, `panel_curr.csv`, `cz_table.csv`, and `cpi.csv`
/// from a directory and runs the full preparation pipeline.
pub fn prepare_dir(panel_dir: &Path, opts: &PrepareOptions) -> Result<PreparedInputs> {
    let cz_table = load_cz_table(&panel_dir.join("cz_table.csv"))?;
    let cpi_map = load_cpi_table(&panel_dir.join("cpi.csv"))?;
    let cpi = CpiSeries::new(cpi_map, opts.base_year)?;

    let mut report = FilterReport::default();
    let (rows_prev, load_prev) = load_panel(
        &panel_dir.join("panel_prev.csv"),
        &opts.schema,
        opts.row_error_budget,
    )?;
    let (rows_curr, load_curr) = load_panel(
        &panel_dir.join("panel_curr.csv"),
        &opts.schema,
        opts.row_error_budget,
    )?;
    report.add("unparseable_row", load_prev.row_errors + load_curr.row_errors);

    let records_prev = prepare_cross_section(&rows_prev, opts, &cpi, &mut report)?;
    let records_curr = prepare_cross_section(&rows_curr, opts, &cpi, &mut report)?;

    let pairs = build_paired_panel(&records_prev, &records_curr, &cz_table, &mut report)?;
    let prepared = prepare_pairs(pairs, report)?;
    Ok(PreparedInputs {
        prepared,
        cz_table,
        records_prev,
        records_curr,
    })
}
