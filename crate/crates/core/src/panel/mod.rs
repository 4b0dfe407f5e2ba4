//! Panel data model: ingestion, sample filters, wage construction,
//! residualization, and two-period pairing.

mod deflate;
mod filters;
mod load;
mod pairing;
mod residualize;
mod types;

pub use deflate::{deflate_wages, CpiSeries};
pub use filters::{apply_sample_filters, dedup_jobs, FilterConfig, FilterReport};
pub use load::{load_cpi_table, load_cz_table, load_panel, LoadReport, Schema, REQUIRED_COLUMNS};
pub use pairing::build_paired_panel;
pub use residualize::{residualize_wages, ResidualizeInfo};
pub use types::{
    is_valid_occ1, CzRow, CzTable, FirmKey, PairedObservation, PanelRecord, PanelRow, TeamKey,
    VALID_OCC1,
};
