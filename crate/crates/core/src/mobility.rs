//! Employer-to-employer transition analysis: linear-probability regressions
//! of job transitions on log city population, and self-flow rates across
//! organizational groupings.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::panel::{CzTable, PairedObservation, PanelRecord};
use crate::solver::{clustered_vcov, gram_and_xty, solve_kept, FactorColumn};

/// Worker-level linear probability model of the transition flag on an
/// intercept and log population, optionally adding the lagged wage.
/// Standard errors are clustered by commuting zone.
#[derive(Debug, Clone)]
pub struct EeRegressionResult {
    pub alpha0: f64,
    pub alpha_pop: f64,
    pub beta_wage: Option<f64>,
    pub se_alpha0: f64,
    pub se_alpha_pop: f64,
    pub se_beta_wage: Option<f64>,
    pub r2: f64,
    pub n_obs: usize,
}

pub fn ee_regression(
    pairs: &[PairedObservation],
    lagged_wage: &[f64],
    cz_table: &CzTable,
    include_lagged_wage: bool,
) -> Result<EeRegressionResult> {
    if pairs.is_empty() {
        return Err(Error::EmptySample("EE regression".to_string()));
    }
    assert_eq!(pairs.len(), lagged_wage.len());
    let n = pairs.len();
    let y: Vec<f64> = pairs.iter().map(|p| if p.is_ee { 1.0 } else { 0.0 }).collect();
    let mut logpop = Vec::with_capacity(n);
    for p in pairs {
        let lp = cz_table
            .log_population(p.cz_id_t)
            .ok_or_else(|| Error::Data(format!("cz {} missing from table", p.cz_id_t)))?;
        logpop.push(lp);
    }
    let mut x_cols: Vec<Vec<f64>> = vec![vec![1.0; n], logpop];
    if include_lagged_wage {
        x_cols.push(lagged_wage.to_vec());
    }

    let (gram, xty) = gram_and_xty(&x_cols, &y);
    let kept: Vec<usize> = (0..x_cols.len()).collect();
    let solve = solve_kept(&gram, &xty, &kept)?;

    let mut residuals = y.clone();
    for (j, col) in x_cols.iter().enumerate() {
        let b = solve.beta[j];
        for (r, x) in residuals.iter_mut().zip(col) {
            *r -= b * x;
        }
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let r2 = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 0.0 };

    let cz_keys: Vec<u32> = pairs.iter().map(|p| p.cz_id_t).collect();
    let (cluster, _) = FactorColumn::from_keys("cz", &cz_keys);
    let vcov = clustered_vcov(&x_cols, &residuals, &cluster, x_cols.len())?;
    let se = |j: usize| vcov[(j, j)].max(0.0).sqrt();

    Ok(EeRegressionResult {
        alpha0: solve.beta[0],
        alpha_pop: solve.beta[1],
        beta_wage: include_lagged_wage.then(|| solve.beta[2]),
        se_alpha0: se(0),
        se_alpha_pop: se(1),
        se_beta_wage: include_lagged_wage.then(|| se(2)),
        r2,
        n_obs: n,
    })
}

/// Share of linked workers remaining in the same organizational unit across
/// the two years, in percent.
#[derive(Debug, Clone, Copy, Default)]
pub struct SelfFlowTable {
    pub occ1: f64,
    pub firm: f64,
    pub establishment: f64,
    pub establishment_occ1: f64,
    pub n_linked: u64,
}

pub fn self_flow_rates(prev: &[PanelRecord], curr: &[PanelRecord]) -> SelfFlowTable {
    let prev_by_id: BTreeMap<u64, &PanelRecord> = prev.iter().map(|r| (r.worker_id, r)).collect();
    let mut n = 0u64;
    let mut same_occ = 0u64;
    let mut same_firm = 0u64;
    let mut same_estab = 0u64;
    let mut same_team = 0u64;
    for cur in curr {
        let Some(old) = prev_by_id.get(&cur.worker_id) else {
            continue;
        };
        n += 1;
        if old.occ1 == cur.occ1 {
            same_occ += 1;
        }
        if old.firm_id == cur.firm_id {
            same_firm += 1;
        }
        if old.establishment_id == cur.establishment_id {
            same_estab += 1;
        }
        if old.team_key() == cur.team_key() {
            same_team += 1;
        }
    }
    let pct = |x: u64| if n > 0 { 100.0 * x as f64 / n as f64 } else { 0.0 };
    SelfFlowTable {
        occ1: pct(same_occ),
        firm: pct(same_firm),
        establishment: pct(same_estab),
        establishment_occ1: pct(same_team),
        n_linked: n,
    }
}

/// Indices of the pairs that did not transition jobs.
pub fn stayer_filter(pairs: &[PairedObservation]) -> Vec<usize> {
    (0..pairs.len()).filter(|&i| !pairs[i].is_ee).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{FirmKey, TeamKey};

    fn pair(worker_id: u64, cz_id: u32, is_ee: bool, wage_prev: f64) -> PairedObservation {
        PairedObservation {
            worker_id,
            wage_t: 10.0,
            wage_prev,
            cz_id_t: cz_id,
            cz_id_prev: cz_id,
            team_prev: TeamKey {
                establishment_id: 1,
                occ1: 3,
            },
            firm_prev: FirmKey {
                firm_id: 1,
                occ1: 3,
            },
            is_ee,
            age: 40.0,
            gender: 1,
        }
    }

    fn rec(worker_id: u64, firm: u64, estab: u64, occ1: u8, year: i32) -> PanelRecord {
        PanelRecord {
            worker_id,
            year,
            firm_id: firm,
            establishment_id: estab,
            occ1,
            cz_id: 1,
            gross_annual_wage: 20_000.0,
            hours: 1_600.0,
            age: 40.0,
            gender: 1,
            hourly_wage: Some(12.5),
        }
    }

    #[test]
    fn constant_response_gives_zero_slope_and_r2() {
        let cz = CzTable::new(vec![(1, 1000.0), (2, 4000.0)]).unwrap();
        let pairs: Vec<_> = (0..40)
            .map(|i| pair(i, 1 + (i % 2) as u32, false, 10.0))
            .collect();
        let wages: Vec<f64> = pairs.iter().map(|p| p.wage_prev).collect();
        let res = ee_regression(&pairs, &wages, &cz, false).unwrap();
        assert!(res.alpha_pop.abs() < 1e-12);
        assert_eq!(res.r2, 0.0);
    }

    #[test]
    fn single_cz_is_an_error() {
        let cz = CzTable::new(vec![(1, 1000.0)]).unwrap();
        let pairs: Vec<_> = (0..10).map(|i| pair(i, 1, i % 2 == 0, 10.0)).collect();
        let wages: Vec<f64> = pairs.iter().map(|p| p.wage_prev).collect();
        assert!(matches!(
            ee_regression(&pairs, &wages, &cz, false),
            Err(Error::SingleCluster)
        ));
    }

    #[test]
    fn lpm_residual_mean_is_zero() {
        let cz = CzTable::new(vec![(1, 1000.0), (2, 8000.0), (3, 500.0)]).unwrap();
        let pairs: Vec<_> = (0..60)
            .map(|i| pair(i, 1 + (i % 3) as u32, i % 4 == 0, 8.0 + (i % 7) as f64))
            .collect();
        let wages: Vec<f64> = pairs.iter().map(|p| p.wage_prev).collect();
        let res = ee_regression(&pairs, &wages, &cz, true).unwrap();
        // Reconstruct residual mean from the coefficients.
        let mut total = 0.0;
        for p in &pairs {
            let yhat = res.alpha0
                + res.alpha_pop * cz.log_population(p.cz_id_t).unwrap()
                + res.beta_wage.unwrap() * p.wage_prev;
            total += (if p.is_ee { 1.0 } else { 0.0 }) - yhat;
        }
        assert!((total / 60.0).abs() < 1e-10);
    }

    #[test]
    fn frozen_panel_has_all_self_flows_at_100() {
        let prev: Vec<_> = (0..5).map(|i| rec(i, 1, 10, 3, 2014)).collect();
        let curr: Vec<_> = (0..5).map(|i| rec(i, 1, 10, 3, 2015)).collect();
        let t = self_flow_rates(&prev, &curr);
        assert_eq!(t.occ1, 100.0);
        assert_eq!(t.firm, 100.0);
        assert_eq!(t.establishment, 100.0);
        assert_eq!(t.establishment_occ1, 100.0);
    }

    #[test]
    fn nesting_inequality_holds() {
        // Worker 0 changes occupation, worker 1 changes establishment within
        // the firm, worker 2 changes firm, worker 3 stays.
        let prev = vec![
            rec(0, 1, 10, 3, 2014),
            rec(1, 1, 10, 3, 2014),
            rec(2, 1, 10, 3, 2014),
            rec(3, 1, 10, 3, 2014),
        ];
        let curr = vec![
            rec(0, 1, 10, 5, 2015),
            rec(1, 1, 11, 3, 2015),
            rec(2, 2, 12, 3, 2015),
            rec(3, 1, 10, 3, 2015),
        ];
        let t = self_flow_rates(&prev, &curr);
        assert!(t.establishment_occ1 <= t.establishment);
        assert!(t.establishment_occ1 <= t.occ1);
        assert_eq!(t.establishment_occ1, 25.0);
        assert_eq!(t.firm, 75.0);
    }

    #[test]
    fn stayers_and_movers_partition_the_panel() {
        let pairs: Vec<_> = (0..10).map(|i| pair(i, 1, i < 4, 10.0)).collect();
        let stayers = stayer_filter(&pairs);
        assert_eq!(stayers.len(), 6);
        assert!(stayers.iter().all(|&i| !pairs[i].is_ee));
        let movers: Vec<usize> = (0..10).filter(|i| pairs[*i].is_ee).collect();
        assert_eq!(stayers.len() + movers.len(), pairs.len());
    }
}
