use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::panel::filters::FilterReport;
use crate::panel::types::{CzTable, PairedObservation, PanelRecord};

/// Links workers present in both cross-sections. Employer keys come from the
/// earlier year; `is_ee` flags a change of establishment or 1-digit
/// occupation. Workers whose current commuting zone is not in the table are
/// dropped with their own counter. Output is sorted by worker_id.
pub fn build_paired_panel(
    records_prev: &[PanelRecord],
    records_t: &[PanelRecord],
    cz_table: &CzTable,
    report: &mut FilterReport,
) -> Result<Vec<PairedObservation>> {
    let prev = index_by_worker(records_prev)?;
    let cur = index_by_worker(records_t)?;

    let mut pairs = Vec::new();
    for (worker_id, rec_t) in &cur {
        let Some(rec_prev) = prev.get(worker_id) else {
            continue;
        };
        if cz_table.get(rec_t.cz_id).is_none() {
            report.bump("missing_cz");
            continue;
        }
        let (Some(wage_t), Some(wage_prev)) = (rec_t.hourly_wage, rec_prev.hourly_wage) else {
            return Err(Error::Data(format!(
                "worker {worker_id}: hourly wage missing; deflate before pairing"
            )));
        };
        let team_prev = rec_prev.team_key();
        pairs.push(PairedObservation {
            worker_id: *worker_id,
            wage_t,
            wage_prev,
            cz_id_t: rec_t.cz_id,
            cz_id_prev: rec_prev.cz_id,
            team_prev,
            firm_prev: rec_prev.firm_key(),
            is_ee: rec_t.team_key() != team_prev,
            age: rec_t.age,
            gender: rec_t.gender,
        });
    }
    Ok(pairs)
}

fn index_by_worker(records: &[PanelRecord]) -> Result<BTreeMap<u64, &PanelRecord>> {
    let mut map = BTreeMap::new();
    for rec in records {
        if map.insert(rec.worker_id, rec).is_some() {
            return Err(Error::DuplicateWorkerYear {
                worker_id: rec.worker_id,
                year: rec.year,
            });
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(worker_id: u64, year: i32, estab: u64, occ1: u8, cz_id: u32) -> PanelRecord {
        PanelRecord {
            worker_id,
            year,
            firm_id: estab / 10,
            establishment_id: estab,
            occ1,
            cz_id,
            gross_annual_wage: 30000.0,
            hours: 1500.0,
            age: 40.0,
            gender: 1,
            hourly_wage: Some(20.0),
        }
    }

    fn cz() -> CzTable {
        CzTable::new(vec![(1, 1000.0), (2, 500.0)]).unwrap()
    }

    #[test]
    fn stayer_has_is_ee_false() {
        let mut report = FilterReport::default();
        let pairs = build_paired_panel(
            &[rec(1, 2014, 100, 3, 1)],
            &[rec(1, 2015, 100, 3, 1)],
            &cz(),
            &mut report,
        )
        .unwrap();
        assert_eq!(pairs.len(), 1);
        assert!(!pairs[0].is_ee);
    }

    #[test]
    fn occupation_change_within_establishment_is_ee() {
        let mut report = FilterReport::default();
        let pairs = build_paired_panel(
            &[rec(1, 2014, 100, 3, 1)],
            &[rec(1, 2015, 100, 5, 1)],
            &cz(),
            &mut report,
        )
        .unwrap();
        assert!(pairs[0].is_ee);
    }

    #[test]
    fn unmatched_workers_are_excluded() {
        let mut report = FilterReport::default();
        let pairs = build_paired_panel(
            &[rec(1, 2014, 100, 3, 1), rec(2, 2014, 100, 3, 1)],
            &[rec(2, 2015, 100, 3, 1), rec(3, 2015, 100, 3, 1)],
            &cz(),
            &mut report,
        )
        .unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].worker_id, 2);
    }

    #[test]
    fn pair_count_bounded_by_smaller_year() {
        let prev: Vec<_> = (0..5).map(|i| rec(i, 2014, 100, 3, 1)).collect();
        let cur: Vec<_> = (3..10).map(|i| rec(i, 2015, 100, 3, 1)).collect();
        let mut report = FilterReport::default();
        let pairs = build_paired_panel(&prev, &cur, &cz(), &mut report).unwrap();
        assert!(pairs.len() <= prev.len().min(cur.len()));
        assert_eq!(pairs.len(), 2);
    }

    #[test]
    fn duplicate_worker_year_is_hard_error() {
        let mut report = FilterReport::default();
        let err = build_paired_panel(
            &[rec(1, 2014, 100, 3, 1), rec(1, 2014, 101, 3, 1)],
            &[rec(1, 2015, 100, 3, 1)],
            &cz(),
            &mut report,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateWorkerYear { .. }));
    }

    #[test]
    fn missing_cz_dropped_with_counter() {
        let mut report = FilterReport::default();
        let pairs = build_paired_panel(
            &[rec(1, 2014, 100, 3, 1)],
            &[rec(1, 2015, 100, 3, 99)],
            &cz(),
            &mut report,
        )
        .unwrap();
        assert!(pairs.is_empty());
        assert_eq!(report.get("missing_cz"), 1);
    }

    #[test]
    fn lagged_keys_come_from_earlier_year() {
        let mut report = FilterReport::default();
        let pairs = build_paired_panel(
            &[rec(1, 2014, 100, 3, 1)],
            &[rec(1, 2015, 200, 5, 2)],
            &cz(),
            &mut report,
        )
        .unwrap();
        assert_eq!(pairs[0].team_prev.establishment_id, 100);
        assert_eq!(pairs[0].team_prev.occ1, 3);
        assert_eq!(pairs[0].firm_prev.firm_id, 10);
        assert_eq!(pairs[0].cz_id_t, 2);
        assert_eq!(pairs[0].cz_id_prev, 1);
        assert!(pairs[0].is_ee);
    }
}
