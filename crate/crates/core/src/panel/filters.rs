use std::collections::BTreeMap;
use std::path::Path;

use crate::error::Result;
use crate::panel::types::{PanelRecord, PanelRow};

/// Sample restrictions applied to each cross-section.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub age_min: f64,
    pub age_max: f64,
    /// Floor on the nominal annual wage, applied before deflation.
    pub min_annual_wage: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            age_min: 18.0,
            age_max: 65.0,
            min_annual_wage: 100.0,
        }
    }
}

/// Per-rule drop counts, accumulated across pipeline stages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterReport {
    counts: BTreeMap<String, u64>,
}

impl FilterReport {
    pub fn bump(&mut self, rule: &str) {
        *self.counts.entry(rule.to_string()).or_insert(0) += 1;
    }

    pub fn add(&mut self, rule: &str, n: u64) {
        if n > 0 {
            *self.counts.entry(rule.to_string()).or_insert(0) += n;
        }
    }

    pub fn get(&self, rule: &str) -> u64 {
        self.counts.get(rule).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &FilterReport) {
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += v;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Writes the report as a key,count file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("rule,dropped\n");
        for (k, v) in self.iter() {
            out.push_str(&format!("{k},{v}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Drops rows outside the age bounds, below the nominal annual wage floor,
/// with missing required fields, or with non-positive hours. Filtering is
/// total: every input row is either retained (as a dense record) or counted
/// under exactly one rule.
pub fn apply_sample_filters(
    rows: &[PanelRow],
    config: &FilterConfig,
) -> (Vec<PanelRecord>, FilterReport) {
    let mut report = FilterReport::default();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let required = [
            row.worker_id.is_some(),
            row.year.is_some(),
            row.firm_id.is_some(),
            row.establishment_id.is_some(),
            row.occ1.is_some(),
            row.cz_id.is_some(),
            row.gross_annual_wage.is_some(),
            row.hours.is_some(),
            row.age.is_some(),
            row.gender.is_some(),
        ];
        if required.iter().any(|p| !p) {
            report.bump("missing_field");
            continue;
        }
        let hours = row.hours.unwrap();
        let wage = row.gross_annual_wage.unwrap();
        let age = row.age.unwrap();
        if !hours.is_finite() || hours <= 0.0 {
            report.bump("nonpositive_hours");
            continue;
        }
        if !wage.is_finite() || !age.is_finite() {
            report.bump("missing_field");
            continue;
        }
        if age < config.age_min || age > config.age_max {
            report.bump("age_out_of_range");
            continue;
        }
        if wage < config.min_annual_wage {
            report.bump("below_wage_floor");
            continue;
        }
        out.push(PanelRecord {
            worker_id: row.worker_id.unwrap(),
            year: row.year.unwrap(),
            firm_id: row.firm_id.unwrap(),
            establishment_id: row.establishment_id.unwrap(),
            occ1: row.occ1.unwrap(),
            cz_id: row.cz_id.unwrap(),
            gross_annual_wage: wage,
            hours,
            age,
            gender: row.gender.unwrap(),
            hourly_wage: row.hourly_wage,
        });
    }
    (out, report)
}

/// Resolves multiple jobs per worker-year: keep the job with maximum hours,
/// ties broken by higher gross wage, then by lowest establishment id.
/// Output is sorted by (worker_id, year).
pub fn dedup_jobs(records: Vec<PanelRecord>, report: &mut FilterReport) -> Vec<PanelRecord> {
    let mut best: BTreeMap<(u64, i32), PanelRecord> = BTreeMap::new();
    let mut dropped = 0u64;
    for rec in records {
        match best.entry((rec.worker_id, rec.year)) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(rec);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                dropped += 1;
                let cur = e.get();
                let better = (rec.hours, rec.gross_annual_wage, std::cmp::Reverse(rec.establishment_id))
                    > (cur.hours, cur.gross_annual_wage, std::cmp::Reverse(cur.establishment_id));
                if better {
                    e.insert(rec);
                }
            }
        }
    }
    report.add("duplicate_worker_year", dropped);
    best.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(age: f64, wage: f64) -> PanelRow {
        PanelRow {
            worker_id: Some(1),
            year: Some(2014),
            firm_id: Some(10),
            establishment_id: Some(100),
            occ1: Some(3),
            cz_id: Some(5),
            gross_annual_wage: Some(wage),
            hours: Some(1600.0),
            age: Some(age),
            gender: Some(1),
            ..Default::default()
        }
    }

    fn rec(worker_id: u64, hours: f64, wage: f64, estab: u64) -> PanelRecord {
        PanelRecord {
            worker_id,
            year: 2014,
            firm_id: 10,
            establishment_id: estab,
            occ1: 3,
            cz_id: 5,
            gross_annual_wage: wage,
            hours,
            age: 40.0,
            gender: 1,
            hourly_wage: None,
        }
    }

    #[test]
    fn drops_age_seventeen() {
        let (kept, report) = apply_sample_filters(&[row(17.0, 20000.0)], &FilterConfig::default());
        assert!(kept.is_empty());
        assert_eq!(report.get("age_out_of_range"), 1);
    }

    #[test]
    fn drops_below_wage_floor() {
        let (kept, report) = apply_sample_filters(&[row(40.0, 99.0)], &FilterConfig::default());
        assert!(kept.is_empty());
        assert_eq!(report.get("below_wage_floor"), 1);
    }

    #[test]
    fn retains_valid_record_and_no_upper_trim() {
        let (kept, report) =
            apply_sample_filters(&[row(40.0, 20000.0), row(40.0, 9.9e9)], &FilterConfig::default());
        assert_eq!(kept.len(), 2);
        assert_eq!(report.iter().map(|(_, v)| v).sum::<u64>(), 0);
    }

    #[test]
    fn bounds_are_inclusive() {
        let (kept, _) =
            apply_sample_filters(&[row(18.0, 100.0), row(65.0, 100.0)], &FilterConfig::default());
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn missing_field_counted() {
        let mut r = row(40.0, 20000.0);
        r.gender = None;
        let (kept, report) = apply_sample_filters(&[r], &FilterConfig::default());
        assert!(kept.is_empty());
        assert_eq!(report.get("missing_field"), 1);
    }

    #[test]
    fn filter_is_idempotent() {
        let rows: Vec<PanelRow> = vec![row(17.0, 5e4), row(40.0, 5e4), row(40.0, 50.0)];
        let config = FilterConfig::default();
        let (once, _) = apply_sample_filters(&rows, &config);
        // Re-filtering the survivors must be the identity.
        let as_rows: Vec<PanelRow> = once
            .iter()
            .map(|r| PanelRow {
                worker_id: Some(r.worker_id),
                year: Some(r.year),
                firm_id: Some(r.firm_id),
                establishment_id: Some(r.establishment_id),
                occ1: Some(r.occ1),
                cz_id: Some(r.cz_id),
                gross_annual_wage: Some(r.gross_annual_wage),
                hours: Some(r.hours),
                age: Some(r.age),
                gender: Some(r.gender),
                hourly_wage: r.hourly_wage,
                source_row: 0,
            })
            .collect();
        let (twice, report) = apply_sample_filters(&as_rows, &config);
        assert_eq!(twice.len(), once.len());
        assert_eq!(report.iter().map(|(_, v)| v).sum::<u64>(), 0);
    }

    #[test]
    fn dedup_keeps_max_hours_then_wage_then_lowest_establishment() {
        let mut report = FilterReport::default();
        let out = dedup_jobs(
            vec![
                rec(1, 800.0, 10000.0, 101),
                rec(1, 1600.0, 8000.0, 102),
                rec(2, 1000.0, 9000.0, 103),
                rec(2, 1000.0, 9000.0, 101),
                rec(2, 1000.0, 9500.0, 104),
            ],
            &mut report,
        );
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].establishment_id, 102); // worker 1: max hours wins
        assert_eq!(out[1].establishment_id, 104); // worker 2: higher wage wins
        assert_eq!(report.get("duplicate_worker_year"), 3);
    }

    #[test]
    fn dedup_tie_breaks_to_lowest_establishment() {
        let mut report = FilterReport::default();
        let out = dedup_jobs(
            vec![rec(1, 1000.0, 9000.0, 105), rec(1, 1000.0, 9000.0, 101)],
            &mut report,
        );
        assert_eq!(out[0].establishment_id, 101);
    }
}
