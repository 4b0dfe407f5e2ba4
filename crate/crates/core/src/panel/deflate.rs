use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::panel::types::PanelRecord;

/// CPI series with a base year; wages are deflated to base-year units.
#[derive(Debug, Clone)]
pub struct CpiSeries {
    indices: BTreeMap<i32, f64>,
    base_year: i32,
}

impl CpiSeries {
    pub fn new(indices: BTreeMap<i32, f64>, base_year: i32) -> Result<Self> {
        if !indices.contains_key(&base_year) {
            return Err(Error::MissingCpiYear(base_year));
        }
        Ok(CpiSeries { indices, base_year })
    }

    /// A flat series (identity deflation) covering the given years.
    pub fn flat(years: &[i32], base_year: i32) -> Result<Self> {
        let mut indices = BTreeMap::new();
        for &y in years {
            indices.insert(y, 100.0);
        }
        CpiSeries::new(indices, base_year)
    }

    pub fn base_year(&self) -> i32 {
        self.base_year
    }

    pub fn deflator(&self, year: i32) -> Result<f64> {
        let base = self.indices[&self.base_year];
        let idx = self
            .indices
            .get(&year)
            .ok_or(Error::MissingCpiYear(year))?;
        Ok(base / idx)
    }
}

/// Sets `hourly_wage = gross_annual_wage * cpi(base)/cpi(year) / hours`.
/// Records must have passed the sample filters (hours > 0).
pub fn deflate_wages(records: &mut [PanelRecord], cpi: &CpiSeries) -> Result<()> {
    // Resolve each year once so a missing year fails before any mutation.
    let mut deflators: BTreeMap<i32, f64> = BTreeMap::new();
    for rec in records.iter() {
        if !deflators.contains_key(&rec.year) {
            deflators.insert(rec.year, cpi.deflator(rec.year)?);
        }
    }
    for rec in records.iter_mut() {
        let deflator = deflators[&rec.year];
        rec.hourly_wage = Some(rec.gross_annual_wage * deflator / rec.hours);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(year: i32, wage: f64, hours: f64) -> PanelRecord {
        PanelRecord {
            worker_id: 1,
            year,
            firm_id: 1,
            establishment_id: 1,
            occ1: 3,
            cz_id: 1,
            gross_annual_wage: wage,
            hours,
            age: 40.0,
            gender: 1,
            hourly_wage: None,
        }
    }

    #[test]
    fn base_year_deflation_is_identity() {
        let cpi = CpiSeries::new([(2015, 110.0)].into_iter().collect(), 2015).unwrap();
        let mut records = vec![rec(2015, 32000.0, 1600.0)];
        deflate_wages(&mut records, &cpi).unwrap();
        assert_eq!(records[0].hourly_wage, Some(32000.0 / 1600.0));
    }

    #[test]
    fn deflator_arithmetic() {
        // cpi(year)=100, cpi(base)=110, wage 1100, hours 100 -> 12.1/hour.
        let cpi = CpiSeries::new(
            [(2014, 100.0), (2015, 110.0)].into_iter().collect(),
            2015,
        )
        .unwrap();
        let mut records = vec![rec(2014, 1100.0, 100.0)];
        deflate_wages(&mut records, &cpi).unwrap();
        assert!((records[0].hourly_wage.unwrap() - 12.1).abs() < 1e-12);
    }

    #[test]
    fn missing_year_is_an_error() {
        let cpi = CpiSeries::new([(2015, 100.0)].into_iter().collect(), 2015).unwrap();
        let mut records = vec![rec(2013, 1000.0, 100.0)];
        assert!(matches!(
            deflate_wages(&mut records, &cpi),
            Err(Error::MissingCpiYear(2013))
        ));
    }

    #[test]
    fn missing_base_year_rejected_at_construction() {
        assert!(CpiSeries::new([(2014, 100.0)].into_iter().collect(), 2015).is_err());
    }
}
