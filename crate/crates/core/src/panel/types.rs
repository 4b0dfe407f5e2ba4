use std::fmt;

use crate::error::{Error, Result};

/// Valid 1-digit occupation codes; 7 and 8 are unused in the source coding.
pub const VALID_OCC1: [u8; 7] = [1, 2, 3, 4, 5, 6, 9];

pub fn is_valid_occ1(code: u8) -> bool {
    VALID_OCC1.contains(&code)
}

/// One worker-year row as parsed from disk. Fields that may legitimately be
/// absent in raw extracts are optional here; `apply_sample_filters` turns
/// surviving rows into dense [`PanelRecord`]s.
#[derive(Debug, Clone, Default)]
pub struct PanelRow {
    pub worker_id: Option<u64>,
    pub year: Option<i32>,
    pub firm_id: Option<u64>,
    pub establishment_id: Option<u64>,
    pub occ1: Option<u8>,
    pub cz_id: Option<u32>,
    pub gross_annual_wage: Option<f64>,
    pub hours: Option<f64>,
    pub age: Option<f64>,
    pub gender: Option<u8>,
    pub hourly_wage: Option<f64>,
    /// 1-based data row in the source file (header excluded).
    pub source_row: u64,
}

/// One worker-year observation with all required fields present.
/// `hourly_wage` is filled by `deflate_wages` (real terms, base-year units).
#[derive(Debug, Clone)]
pub struct PanelRecord {
    pub worker_id: u64,
    pub year: i32,
    pub firm_id: u64,
    pub establishment_id: u64,
    pub occ1: u8,
    pub cz_id: u32,
    pub gross_annual_wage: f64,
    pub hours: f64,
    pub age: f64,
    pub gender: u8,
    pub hourly_wage: Option<f64>,
}

impl PanelRecord {
    pub fn team_key(&self) -> TeamKey {
        TeamKey {
            establishment_id: self.establishment_id,
            occ1: self.occ1,
        }
    }

    pub fn firm_key(&self) -> FirmKey {
        FirmKey {
            firm_id: self.firm_id,
            occ1: self.occ1,
        }
    }
}

/// A team is an establishment crossed with a 1-digit occupation code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TeamKey {
    pub establishment_id: u64,
    pub occ1: u8,
}

impl fmt::Display for TeamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.establishment_id, self.occ1)
    }
}

/// The fixed-effect unit for lagged employers: employer crossed with the
/// 1-digit occupation code (establishment ids would not be separately
/// identified from commuting-zone effects).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FirmKey {
    pub firm_id: u64,
    pub occ1: u8,
}

impl fmt::Display for FirmKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.firm_id, self.occ1)
    }
}

/// A worker linked across two consecutive years. Wages are real hourly wages;
/// the employer keys are taken from the earlier year.
#[derive(Debug, Clone)]
pub struct PairedObservation {
    pub worker_id: u64,
    pub wage_t: f64,
    pub wage_prev: f64,
    pub cz_id_t: u32,
    pub cz_id_prev: u32,
    pub team_prev: TeamKey,
    pub firm_prev: FirmKey,
    /// True iff the establishment or the 1-digit occupation changed.
    pub is_ee: bool,
    pub age: f64,
    pub gender: u8,
}

/// Commuting-zone population lookup.
#[derive(Debug, Clone)]
pub struct CzTable {
    /// Sorted by cz_id.
    pub rows: Vec<CzRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct CzRow {
    pub cz_id: u32,
    pub population: f64,
    pub log_population: f64,
}

impl CzTable {
    pub fn new(mut entries: Vec<(u32, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        let mut rows = Vec::with_capacity(entries.len());
        let mut last: Option<u32> = None;
        for (cz_id, population) in entries {
            if population <= 0.0 || !population.is_finite() {
                return Err(Error::InvalidCzTable(format!(
                    "cz {cz_id} has non-positive population {population}"
                )));
            }
            if last == Some(cz_id) {
                return Err(Error::InvalidCzTable(format!("duplicate cz id {cz_id}")));
            }
            last = Some(cz_id);
            rows.push(CzRow {
                cz_id,
                population,
                log_population: population.ln(),
            });
        }
        Ok(CzTable { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, cz_id: u32) -> Option<&CzRow> {
        self.rows
            .binary_search_by_key(&cz_id, |r| r.cz_id)
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn log_population(&self, cz_id: u32) -> Option<f64> {
        self.get(cz_id).map(|r| r.log_population)
    }
}
