use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use uwp_core::decomp::{
    build_report, project_firm_fes, run_first_stage, run_moments_specification, run_second_stage,
    ControlSet, DecompositionReport, DepVar, FirstStage, ReportCell, Sample, SecondStageResult,
    SpecId,
};
use uwp_core::mobility::{ee_regression, self_flow_rates};
use uwp_core::pipeline::PreparedInputs;
use uwp_core::report::{self, MomentsStageRow};

use crate::config::RunConfig;
use crate::CliError;

pub fn run(cfg: &RunConfig, panel: &Path, out: &Path, only: Option<&str>) -> Result<(), CliError> {
    match run_inner(cfg, panel, out, only) {
        Ok(()) => Ok(()),
        Err(e) => {
            super::mark_failed(out, &e.message());
            Err(e)
        }
    }
}

fn control_list(cfg: &RunConfig, only: Option<&str>) -> Result<Vec<ControlSet>, CliError> {
    match only {
        None => Ok(cfg.grid.controls.clone()),
        Some(raw) => {
            let chosen = ControlSet::parse(raw)
                .ok_or_else(|| CliError::Config(format!("unknown control set `{raw}`")))?;
            if chosen == ControlSet::Baseline {
                Ok(vec![ControlSet::Baseline])
            } else {
                Ok(vec![ControlSet::Baseline, chosen])
            }
        }
    }
}

fn run_inner(cfg: &RunConfig, panel: &Path, out: &Path, only: Option<&str>) -> Result<(), CliError> {
    let inputs: PreparedInputs =
        uwp_core::pipeline::prepare_dir(panel, &cfg.prepare).map_err(CliError::stage("prepare"))?;
    let prep = &inputs.prepared;
    let cz_table = &inputs.cz_table;
    let controls = control_list(cfg, only)?;

    // Employment weights for the optional weighted second stage.
    let weights: BTreeMap<u32, f64> = {
        let mut w = BTreeMap::new();
        for (i, p) in prep.pairs.iter().enumerate() {
            if prep.same_cz[i] {
                *w.entry(p.cz_id_t).or_insert(0.0) += 1.0;
            }
        }
        w
    };
    let weights_arg = cfg.grid.weighted_second_stage.then_some(&weights);

    let mut cache: BTreeMap<SpecId, FirstStage> = BTreeMap::new();
    let mut fetch = |spec: SpecId| -> Result<FirstStage, CliError> {
        if let Some(hit) = cache.get(&spec) {
            return Ok(hit.clone());
        }
        let stage = run_first_stage(prep, spec, &cfg.solver)
            .map_err(CliError::stage(&format!("estimate:{}", spec.label())))?;
        cache.insert(spec, stage.clone());
        Ok(stage)
    };

    let mut reports: Vec<DecompositionReport> = Vec::new();
    for &dv in &cfg.grid.dvs {
        for &sample in &cfg.grid.samples {
            let mut cells = Vec::new();
            if sample == Sample::Stayers {
                let spec = SpecId {
                    controls: ControlSet::Baseline,
                    dv,
                    sample: Sample::All,
                };
                let stage = fetch(spec)?;
                let second = second_stage_for(&stage, cz_table, weights_arg, &spec)?;
                cells.push(ReportCell::new("baseline_full_sample", &stage, second));
            }
            for &control in &controls {
                let spec = SpecId {
                    controls: control,
                    dv,
                    sample,
                };
                let stage = fetch(spec)?;
                let second = second_stage_for(&stage, cz_table, weights_arg, &spec)?;
                cells.push(ReportCell::new(&spec.label(), &stage, second));
            }
            let report = build_report(dv, sample, cells)
                .map_err(CliError::stage(&format!("report:{}_{}", dv.label(), sample.label())))?;
            report::write_panel_a(
                &out.join(format!("panel_a_{}_{}.csv", dv.label(), sample.label())),
                &report,
            )
            .map_err(CliError::stage("report"))?;
            report::write_panel_b(
                &out.join(format!("panel_b_{}_{}.csv", dv.label(), sample.label())),
                &report,
            )
            .map_err(CliError::stage("report"))?;
            reports.push(report);
        }
    }

    // Plot-ready binned zone effects, recovered effect tables, and the
    // convergence log for every estimated cell.
    let mut convergence = String::from(
        "spec,n_obs,demean_iterations,n_components,singleton_groups,dropped_collinear\n",
    );
    for (spec, stage) in &cache {
        let label = spec.label();
        let bins = uwp_core::decomp::bin_fe_by_population(&stage.cz_fe, cz_table, cfg.grid.n_bins)
            .map_err(CliError::stage("report:bins"))?;
        report::write_fe_bins(&out.join(format!("fe_bins_{label}.csv")), &bins)
            .map_err(CliError::stage("report"))?;
        report::write_fe_values(
            &out.join(format!("fe_values_{label}.csv")),
            &stage.result.fe_values,
        )
        .map_err(CliError::stage("report"))?;
        let _ = writeln!(
            convergence,
            "{},{},{},{},{},{}",
            label,
            stage.result.n_obs,
            stage.result.n_iterations,
            stage.result.n_components,
            stage.result.dropped_singletons,
            stage.result.dropped_collinear.join(";")
        );
    }
    std::fs::write(out.join("convergence_log.csv"), convergence)
        .map_err(|e| CliError::Stage {
            stage: "report".to_string(),
            source: e.into(),
        })?;

    // Cumulative distribution-moment battery on the level/all grid.
    if cfg.grid.moments
        && cfg.grid.dvs.contains(&DepVar::Level)
        && cfg.grid.samples.contains(&Sample::All)
    {
        let mut rows = Vec::new();
        let mut base_alpha = None;
        for stage_no in 1..=9 {
            let fitted =
                run_moments_specification(prep, stage_no, DepVar::Level, Sample::All, &cfg.solver)
                    .map_err(CliError::stage(&format!("estimate:moments_stage_{stage_no}")))?;
            let second = run_second_stage(&fitted.cz_fe, cz_table, weights_arg)
                .map_err(CliError::stage("estimate:moments_second_stage"))?;
            if stage_no == 1 {
                base_alpha = Some(second.alpha);
            }
            rows.push(MomentsStageRow {
                stage: stage_no,
                label: moments_label(stage_no),
                n_obs: fitted.result.n_obs,
                first_stage_r2: fitted.result.r2,
                alpha: second.alpha,
                se_alpha: second.se_alpha,
                alpha_change_pct: base_alpha.and_then(|b| {
                    (stage_no > 1).then(|| uwp_core::decomp::percent_change(second.alpha, b).ok())?
                }),
                dropped_collinear: fitted.result.dropped_collinear.clone(),
            });
        }
        report::write_moments(&out.join("moments_level_all.csv"), &rows)
            .map_err(CliError::stage("report"))?;
    }

    // Job-to-job transition regressions and self-flow rates.
    let ee_1 = ee_regression(&prep.pairs, &prep.resid_level_prev, cz_table, false)
        .map_err(CliError::stage("estimate:ee_1"))?;
    let ee_2 = ee_regression(&prep.pairs, &prep.resid_level_prev, cz_table, true)
        .map_err(CliError::stage("estimate:ee_2"))?;
    report::write_ee_regressions(
        &out.join("ee_regressions.csv"),
        &[("ee_1".to_string(), ee_1), ("ee_2".to_string(), ee_2)],
    )
    .map_err(CliError::stage("report"))?;
    let flows = self_flow_rates(&inputs.records_prev, &inputs.records_curr);
    report::write_self_flow(&out.join("self_flow_rates.csv"), &flows)
        .map_err(CliError::stage("report"))?;

    // Firm-effect projection from the level/all firm-effect specification.
    let firm_spec = SpecId {
        controls: ControlSet::FirmFe,
        dv: DepVar::Level,
        sample: Sample::All,
    };
    if let Some(stage) = cache.get(&firm_spec) {
        let projection = project_firm_fes(
            stage.firm_fe.as_ref().expect("firm effects absorbed"),
            prep,
            &stage.rows_used,
            cz_table,
        )
        .map_err(CliError::stage("estimate:firm_projection"))?;
        report::write_firm_projection(&out.join("firm_fe_projection.csv"), &projection)
            .map_err(CliError::stage("report"))?;
    }

    prep.report
        .write_csv(&out.join("filter_report.csv"))
        .map_err(CliError::stage("report"))?;
    report::write_summary(&out.join("summary.txt"), &reports)
        .map_err(CliError::stage("report"))?;
    super::write_metadata(out, cfg, "decompose")?;
    eprintln!(
        "decomposition finished: {} grids, {} first-stage cells",
        reports.len(),
        cache.len()
    );
    Ok(())
}

fn second_stage_for(
    stage: &FirstStage,
    cz_table: &uwp_core::panel::CzTable,
    weights: Option<&BTreeMap<u32, f64>>,
    spec: &SpecId,
) -> Result<SecondStageResult, CliError> {
    run_second_stage(&stage.cz_fe, cz_table, weights)
        .map_err(CliError::stage(&format!("second_stage:{}", spec.label())))
}

fn moments_label(stage: usize) -> String {
    let names = [
        "baseline", "mean", "variance", "skewness", "kurtosis", "p1", "p10", "p90", "p99",
    ];
    if stage == 1 {
        "baseline".to_string()
    } else {
        format!("+{}", names[stage - 1])
    }
}
