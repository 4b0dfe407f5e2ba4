pub mod decompose;
pub mod generate;
pub mod prepare;
pub mod verify;

use std::path::Path;

use crate::config::RunConfig;
use crate::CliError;

/// Writes the run-metadata echo every command emits.
pub fn write_metadata(out: &Path, cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    let mut entries = vec![
        ("library_version".to_string(), uwp_core::VERSION.to_string()),
        ("command".to_string(), command.to_string()),
        ("seed".to_string(), cfg.synth.seed.to_string()),
    ];
    entries.extend(cfg.echo_entries());
    uwp_core::report::write_run_metadata(&out.join("run_metadata.csv"), &entries)
        .map_err(CliError::stage(command))
}

/// Marks a failed run in its output directory, best effort.
pub fn mark_failed(out: &Path, message: &str) {
    let _ = std::fs::create_dir_all(out);
    let _ = std::fs::write(out.join("FAILED"), message);
}
