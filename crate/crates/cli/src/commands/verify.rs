use std::path::Path;

use uwp_core::kernel::deviation_stats;
use uwp_core::verify::{
    firm_projection_check, fwl_check, growth_measure_check, kernel_mean_identity_check,
    kernel_oracle_check, kernel_scaling_check, percent_change_check, planted_recovery_battery,
    sorting_mechanism_check, CheckOutcome,
};

use crate::config::RunConfig;
use crate::CliError;

pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let v = &cfg.verify;
    let seed = cfg.synth.seed;
    let mut outcomes: Vec<CheckOutcome> = Vec::new();

    outcomes.push(kernel_oracle_check(
        v.kernel_teams,
        v.kernel_max_size,
        v.kernel_tie_rate,
        seed,
        &deviation_stats,
    ));
    outcomes.push(kernel_mean_identity_check(v.kernel_teams, v.kernel_max_size, seed));
    let scaling = kernel_scaling_check(
        v.scaling_rows_small,
        v.scaling_rows_large,
        v.scaling_reps,
        seed,
        v.scaling_max_ratio,
        v.scaling_budget_secs,
    );
    outcomes.push(scaling.outcome.clone());
    outcomes.push(fwl_check(v.fwl_instances, v.fwl_max_rows, seed));
    outcomes.extend(
        planted_recovery_battery(v.recovery_czs, v.recovery_workers, seed)
            .map_err(CliError::stage("verify:planted_recovery"))?,
    );
    outcomes.push(
        firm_projection_check(v.recovery_czs, v.projection_workers, seed)
            .map_err(CliError::stage("verify:firm_projection"))?,
    );
    outcomes.push(
        sorting_mechanism_check(v.recovery_czs, v.sorting_workers, seed)
            .map_err(CliError::stage("verify:sorting_mechanism"))?,
    );
    outcomes.push(percent_change_check());
    outcomes.push(growth_measure_check(100_000, seed));

    let mut failures = 0;
    for o in &outcomes {
        println!("{} {} -- {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    println!(
        "kernel timing: {:.3}s at {} rows, {:.3}s at {} rows (ratio {:.2})",
        scaling.median_small_secs,
        v.scaling_rows_small,
        scaling.median_large_secs,
        v.scaling_rows_large,
        scaling.ratio
    );
    for o in &outcomes {
        if !o.pass {
            failures += 1;
        }
    }

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Stage {
            stage: "verify".to_string(),
            source: e.into(),
        })?;
        let mut s = String::from("check,pass,detail\n");
        for o in &outcomes {
            s.push_str(&format!("{},{},\"{}\"\n", o.name, o.pass, o.detail.replace('"', "'")));
        }
        std::fs::write(dir.join("verify_report.csv"), s).map_err(|e| CliError::Stage {
            stage: "verify".to_string(),
            source: e.into(),
        })?;
        super::write_metadata(dir, cfg, "verify")?;
    }

    if failures > 0 {
        return Err(CliError::VerifyFailed(format!(
            "{failures} of {} verification checks failed",
            outcomes.len()
        )));
    }
    Ok(())
}
