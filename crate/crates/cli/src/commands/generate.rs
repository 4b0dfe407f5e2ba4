use std::path::Path;

use uwp_core::synth::{simulate_panel, write_synthetic_dir};

use crate::config::RunConfig;
use crate::CliError;

pub fn run(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    // Validate before touching the filesystem.
    cfg.synth.validate().map_err(CliError::stage("generate"))?;
    let output = simulate_panel(&cfg.synth).map_err(CliError::stage("generate"))?;
    write_synthetic_dir(out, &cfg.synth, &output).map_err(CliError::stage("generate"))?;
    super::write_metadata(out, cfg, "generate")?;
    eprintln!(
        "generated {} workers across {} commuting zones (seat/worker ratio {:.3})",
        output.emitted_workers,
        output.cz_table.len(),
        output.seat_worker_ratio
    );
    Ok(())
}
