use std::path::Path;

use uwp_core::pipeline::prepare_dir;
use uwp_core::report;

use crate::config::RunConfig;
use crate::CliError;

pub fn run(cfg: &RunConfig, panel: &Path, out: &Path) -> Result<(), CliError> {
    let tag = CliError::stage("prepare");
    let inputs = prepare_dir(panel, &cfg.prepare).map_err(&tag)?;
    let prep = &inputs.prepared;
    report::write_prepared_pairs(&out.join("prepared_pairs.csv"), prep).map_err(&tag)?;
    report::write_stats_table(&out.join("coworker_stats.csv"), prep, false).map_err(&tag)?;
    report::write_stats_table(&out.join("coworker_stats_log.csv"), prep, true).map_err(&tag)?;
    prep.report
        .write_csv(&out.join("filter_report.csv"))
        .map_err(&tag)?;
    super::write_metadata(out, cfg, "prepare")?;
    eprintln!(
        "prepared {} pairs ({} dropped rows recorded in filter_report.csv)",
        prep.n_pairs(),
        prep.report.iter().map(|(_, v)| v).sum::<u64>()
    );
    Ok(())
}
