//! Machine-readable output tables (comma-delimited, UTF-8, LF, header row,
//! full precision) and the human-readable summary with paper-style rounding.

use std::fmt::Write as _;
use std::path::Path;

use crate::decomp::{DecompositionReport, FeBin, SecondStageResult};
use crate::error::Result;
use crate::mobility::{EeRegressionResult, SelfFlowTable};
use crate::pipeline::PreparedPanel;
use crate::solver::FeTable;

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Wide first-stage table: one estimate and standard-error column pair per
/// specification, coefficient rows first, then sample-size and fit rows.
pub fn write_panel_a(path: &Path, report: &DecompositionReport) -> Result<()> {
    // Union of coefficient names, in first-appearance order.
    let mut terms: Vec<String> = Vec::new();
    for cell in &report.cells {
        for name in &cell.coef_names {
            if !terms.contains(name) {
                terms.push(name.clone());
            }
        }
    }
    let mut s = String::from("term");
    for cell in &report.cells {
        let _ = write!(s, ",{}_est,{}_se", cell.label, cell.label);
    }
    s.push('\n');
    for term in &terms {
        let _ = write!(s, "{term}");
        for cell in &report.cells {
            match cell.coef_names.iter().position(|n| n == term) {
                Some(i) => {
                    let _ = write!(s, ",{},{}", cell.beta[i], cell.se[i]);
                }
                None => s.push_str(",,"),
            }
        }
        s.push('\n');
    }
    let _ = write!(s, "lagged_firm_fe");
    for cell in &report.cells {
        let _ = write!(
            s,
            ",{},",
            if cell.controls.has_firm_fe() { "yes" } else { "no" }
        );
    }
    s.push('\n');
    let _ = write!(s, "n_obs");
    for cell in &report.cells {
        let _ = write!(s, ",{},", cell.n_obs);
    }
    s.push('\n');
    let _ = write!(s, "r2");
    for cell in &report.cells {
        let _ = write!(s, ",{},", cell.first_stage_r2);
    }
    s.push('\n');
    write_file(path, &s)
}

/// Second-stage table: one row per specification with the semi-elasticity,
/// its robust standard error, fit, and percent changes relative to the
/// baseline cell (empty for the baseline itself).
pub fn write_panel_b(path: &Path, report: &DecompositionReport) -> Result<()> {
    let mut s =
        String::from("spec,alpha,se_alpha,alpha0,n_cz,r2,alpha_change_pct,r2_change_pct\n");
    for cell in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            cell.label,
            cell.second.alpha,
            cell.second.se_alpha,
            cell.second.alpha0,
            cell.second.n_cz,
            cell.second.r2,
            fmt_opt(cell.alpha_change_pct),
            fmt_opt(cell.r2_change_pct),
        );
    }
    write_file(path, &s)
}

pub fn write_fe_bins(path: &Path, bins: &[FeBin]) -> Result<()> {
    let mut s = String::from("bin,mean_log_population,mean_fe,n_cz\n");
    for (i, b) in bins.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", i + 1, b.mean_log_population, b.mean_fe, b.n_cz);
    }
    write_file(path, &s)
}

pub fn write_fe_values(path: &Path, tables: &[FeTable]) -> Result<()> {
    let mut s = String::from("factor,level,estimate,component\n");
    for t in tables {
        for ((label, value), component) in t.labels.iter().zip(&t.values).zip(&t.component) {
            let _ = writeln!(s, "{},{},{},{}", t.factor, label, value, component);
        }
    }
    write_file(path, &s)
}

pub fn write_ee_regressions(path: &Path, results: &[(String, EeRegressionResult)]) -> Result<()> {
    let mut s = String::from(
        "spec,alpha0,se_alpha0,alpha_pop,se_alpha_pop,beta_wage,se_beta_wage,r2,n_obs\n",
    );
    for (label, r) in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            label,
            r.alpha0,
            r.se_alpha0,
            r.alpha_pop,
            r.se_alpha_pop,
            fmt_opt(r.beta_wage),
            fmt_opt(r.se_beta_wage),
            r.r2,
            r.n_obs
        );
    }
    write_file(path, &s)
}

pub fn write_self_flow(path: &Path, t: &SelfFlowTable) -> Result<()> {
    let mut s = String::from("grouping,share_pct\n");
    let _ = writeln!(s, "occ1,{}", t.occ1);
    let _ = writeln!(s, "firm,{}", t.firm);
    let _ = writeln!(s, "establishment,{}", t.establishment);
    let _ = writeln!(s, "establishment_occ1,{}", t.establishment_occ1);
    let _ = writeln!(s, "n_linked,{}", t.n_linked);
    write_file(path, &s)
}

pub fn write_firm_projection(path: &Path, s2: &SecondStageResult) -> Result<()> {
    let mut s = String::from("slope,se_slope,intercept,n_cz,r2\n");
    let _ = writeln!(s, "{},{},{},{},{}", s2.alpha, s2.se_alpha, s2.alpha0, s2.n_cz, s2.r2);
    write_file(path, &s)
}

/// Per-stage summary of the cumulative moments battery.
pub struct MomentsStageRow {
    pub stage: usize,
    pub label: String,
    pub n_obs: usize,
    pub first_stage_r2: f64,
    pub alpha: f64,
    pub se_alpha: f64,
    pub alpha_change_pct: Option<f64>,
    pub dropped_collinear: Vec<String>,
}

pub fn write_moments(path: &Path, rows: &[MomentsStageRow]) -> Result<()> {
    let mut s = String::from(
        "stage,label,n_obs,first_stage_r2,alpha,se_alpha,alpha_change_pct,dropped_collinear\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.stage,
            r.label,
            r.n_obs,
            r.first_stage_r2,
            r.alpha,
            r.se_alpha,
            fmt_opt(r.alpha_change_pct),
            r.dropped_collinear.join(";")
        );
    }
    write_file(path, &s)
}

/// Worker-level coworker statistics and lagged-team moments.
pub fn write_stats_table(path: &Path, prep: &PreparedPanel, use_log: bool) -> Result<()> {
    let stats = if use_log { &prep.stats_log } else { &prep.stats_level };
    let mut s = String::from(
        "worker_id,y1_plus,y1_minus,y2_plus,y2_minus,team_size,no_coworkers,\
         mean,variance,skewness,kurtosis,p1,p10,p90,p99\n",
    );
    for (i, (p, row)) in prep.pairs.iter().zip(stats).enumerate() {
        if use_log && !prep.log_valid[i] {
            continue;
        }
        let m = &row.moments;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.worker_id,
            row.stats.y1_plus,
            row.stats.y1_minus,
            row.stats.y2_plus,
            row.stats.y2_minus,
            row.team_size,
            row.no_coworkers as u8,
            m.mean,
            m.variance,
            m.skewness,
            m.kurtosis,
            m.p1,
            m.p10,
            m.p90,
            m.p99
        );
    }
    write_file(path, &s)
}

fn fmt_or_empty(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

/// The paired estimation sample with every derived column; invalid log and
/// growth entries are left empty.
pub fn write_prepared_pairs(path: &Path, prep: &PreparedPanel) -> Result<()> {
    let mut s = String::from(
        "worker_id,cz_id_t,cz_id_prev,establishment_prev,occ1_prev,firm_prev,is_ee,age,gender,\
         wage_t,wage_prev,resid_level_t,resid_level_prev,resid_log_t,resid_log_prev,growth,same_cz\n",
    );
    for (i, p) in prep.pairs.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.worker_id,
            p.cz_id_t,
            p.cz_id_prev,
            p.team_prev.establishment_id,
            p.team_prev.occ1,
            p.firm_prev.firm_id,
            p.is_ee as u8,
            p.age,
            p.gender,
            p.wage_t,
            p.wage_prev,
            prep.resid_level_t[i],
            prep.resid_level_prev[i],
            fmt_or_empty(prep.resid_log_t[i]),
            fmt_or_empty(prep.resid_log_prev[i]),
            fmt_or_empty(prep.growth[i]),
            prep.same_cz[i] as u8
        );
    }
    write_file(path, &s)
}

pub fn write_run_metadata(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut s = String::from("key,value\n");
    for (k, v) in entries {
        let _ = writeln!(s, "{k},{v}");
    }
    write_file(path, &s)
}

/// Paper-style human summary: semi-elasticities to five decimals, standard
/// errors to four, percent changes to one.
pub fn render_summary(reports: &[DecompositionReport]) -> String {
    let mut s = String::new();
    for report in reports {
        let _ = writeln!(
            s,
            "== second stage: dependent variable {} / sample {} ==",
            report.dv.label(),
            report.sample.label()
        );
        for cell in &report.cells {
            let change = cell
                .alpha_change_pct
                .map(|p| format!("  change vs baseline {}", crate::decomp::format_percent(p)))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "  {:<28} alpha {:.5} ({:.4})  R2 {:.4}  n_cz {}{}",
                cell.label,
                cell.second.alpha,
                cell.second.se_alpha,
                cell.second.r2,
                cell.second.n_cz,
                change
            );
        }
        s.push('\n');
    }
    s
}

pub fn write_summary(path: &Path, reports: &[DecompositionReport]) -> Result<()> {
    write_file(path, &render_summary(reports))
}
