//! End-to-end checks on generated panels: write-load round trips, planted
//! parameter recovery through the full preparation and estimation pipeline,
//! and the transition-rate machinery.

use std::collections::BTreeMap;

use uwp_core::decomp::{
    project_firm_fes, run_first_stage, run_second_stage, ControlSet, DepVar, Sample, SpecId,
};
use uwp_core::mobility::{ee_regression, self_flow_rates};
use uwp_core::pipeline::{prepare_dir, prepare_pairs, PrepareOptions};
use uwp_core::panel::FilterReport;
use uwp_core::solver::SolverOptions;
use uwp_core::synth::{simulate_panel, write_synthetic_dir, DgpParams};

fn spec(controls: ControlSet, dv: DepVar, sample: Sample) -> SpecId {
    SpecId {
        controls,
        dv,
        sample,
    }
}

#[test]
fn generated_panel_round_trips_through_ingestion() {
    let params = DgpParams {
        n_cz: 12,
        n_workers: 4_000,
        seed: 404,
        ..Default::default()
    };
    let out = simulate_panel(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dir(dir.path(), &params, &out).unwrap();

    let inputs = prepare_dir(dir.path(), &PrepareOptions::default()).unwrap();
    // Record count equals the generator's emitted count: the generator only
    // produces rows that pass the sample filters, and pairing is balanced.
    assert_eq!(inputs.records_prev.len() as u64, out.emitted_workers);
    assert_eq!(inputs.records_curr.len() as u64, out.emitted_workers);
    assert_eq!(inputs.prepared.n_pairs() as u64, out.emitted_workers);

    // Real hourly wages survive the gross/hours round trip bit-exactly
    // (hours are a power of two and the CPI is flat).
    let truth: BTreeMap<u64, f64> = out
        .ground_truth
        .workers
        .iter()
        .map(|w| (w.worker_id, w.wage_prev))
        .collect();
    for rec in &inputs.records_prev {
        assert_eq!(rec.hourly_wage.unwrap(), truth[&rec.worker_id]);
    }
}

#[test]
fn planted_ee_flags_match_team_changes() {
    let params = DgpParams {
        n_cz: 10,
        n_workers: 6_000,
        ee_intercept: 0.2,
        ee_pop_slope: 0.0,
        seed: 7,
        ..Default::default()
    };
    let out = simulate_panel(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dir(dir.path(), &params, &out).unwrap();
    let inputs = prepare_dir(dir.path(), &PrepareOptions::default()).unwrap();

    let moved: BTreeMap<u64, bool> = out
        .ground_truth
        .workers
        .iter()
        .map(|w| (w.worker_id, w.moved))
        .collect();
    for p in &inputs.prepared.pairs {
        assert_eq!(p.is_ee, moved[&p.worker_id], "worker {}", p.worker_id);
    }

    // Planted 20% team-change rate: establishment x occupation self-flow is
    // 80% within 3-sigma binomial bounds.
    let flows = self_flow_rates(&inputs.records_prev, &inputs.records_curr);
    let n = flows.n_linked as f64;
    let sigma = (0.2 * 0.8 / n).sqrt() * 100.0;
    assert!(
        (flows.establishment_occ1 - 80.0).abs() <= 3.0 * sigma,
        "self-flow {} vs 80 +/- {:.2}",
        flows.establishment_occ1,
        3.0 * sigma
    );
    assert!(flows.establishment_occ1 <= flows.establishment);
    assert!(flows.establishment_occ1 <= flows.occ1);
}

#[test]
fn noiseless_linear_dgp_recovers_thetas_exactly() {
    // theta2 = 0 and zero noise: the coworker specification with firm
    // effects is an exact fit, so coefficients recover to 1e-6. Constant
    // demographics make residualization a pure translation, which the
    // coworker deviations and absorbed effects are invariant to.
    let params = DgpParams {
        n_cz: 8,
        n_workers: 3_000,
        nu: 0.8,
        noise_sd: 0.0,
        psi_noise_sd: 0.03,
        mu_noise_sd: 0.02,
        theta_plus_1: 0.2,
        theta_minus_1: 0.05,
        theta_plus_2: 0.0,
        theta_minus_2: 0.0,
        seed: 99,
        ..Default::default()
    };
    let mut out = simulate_panel(&params).unwrap();
    for rec in out.records_prev.iter_mut().chain(out.records_curr.iter_mut()) {
        rec.age = 40.0;
        rec.gender = 1;
    }
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dir(dir.path(), &params, &out).unwrap();
    let inputs = prepare_dir(dir.path(), &PrepareOptions::default()).unwrap();

    let stage = run_first_stage(
        &inputs.prepared,
        spec(ControlSet::CoworkersFirmFe, DepVar::Level, Sample::All),
        &SolverOptions::default(),
    )
    .unwrap();
    let coef = |name: &str| stage.result.coef(name).unwrap();
    assert!((coef("lagged_wage") - 0.8).abs() < 1e-6, "nu {}", coef("lagged_wage"));
    assert!((coef("y1_plus") - 0.2).abs() < 1e-6, "th1+ {}", coef("y1_plus"));
    assert!((coef("y1_minus") - 0.05).abs() < 1e-6, "th1- {}", coef("y1_minus"));
    assert!(coef("y2_plus").abs() < 1e-6);
    assert!(coef("y2_minus").abs() < 1e-6);
}

#[test]
fn planted_recovery_within_two_clustered_ses_at_medium_scale() {
    let params = DgpParams {
        n_cz: 40,
        n_workers: 60_000,
        seed: 777,
        ..Default::default()
    };
    let out = simulate_panel(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dir(dir.path(), &params, &out).unwrap();
    let inputs = prepare_dir(dir.path(), &PrepareOptions::default()).unwrap();

    let stage = run_first_stage(
        &inputs.prepared,
        spec(ControlSet::CoworkersFirmFe, DepVar::Level, Sample::All),
        &SolverOptions::default(),
    )
    .unwrap();
    for (name, planted) in [
        ("lagged_wage", params.nu),
        ("y1_plus", params.theta_plus_1),
        ("y1_minus", params.theta_minus_1),
        ("y2_plus", 0.0),
        ("y2_minus", 0.0),
    ] {
        let est = stage.result.coef(name).unwrap();
        let se = stage.result.coef_se(name).unwrap();
        assert!(
            (est - planted).abs() <= 2.0 * se,
            "{name}: {est} vs planted {planted} (se {se})"
        );
    }
}

#[test]
fn firm_effect_projection_recovers_planted_slope() {
    let params = DgpParams {
        n_cz: 40,
        n_workers: 60_000,
        firm_fe_pop_slope: 0.0496,
        mu_noise_sd: 0.3,
        seed: 555,
        ..Default::default()
    };
    let out = simulate_panel(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dir(dir.path(), &params, &out).unwrap();
    let inputs = prepare_dir(dir.path(), &PrepareOptions::default()).unwrap();

    let stage = run_first_stage(
        &inputs.prepared,
        spec(ControlSet::FirmFe, DepVar::Level, Sample::All),
        &SolverOptions::default(),
    )
    .unwrap();
    let projection = project_firm_fes(
        stage.firm_fe.as_ref().unwrap(),
        &inputs.prepared,
        &stage.rows_used,
        &inputs.cz_table,
    )
    .unwrap();
    assert!(
        (projection.alpha - 0.0496).abs() <= 2.0 * projection.se_alpha,
        "slope {} (se {})",
        projection.alpha,
        projection.se_alpha
    );
}

#[test]
fn ee_regression_recovers_planted_slope_and_null_wage_effect() {
    let params = DgpParams {
        n_cz: 40,
        n_workers: 80_000,
        ee_intercept: -0.15,
        ee_pop_slope: 0.0296,
        seed: 77,
        ..Default::default()
    };
    let out = simulate_panel(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dir(dir.path(), &params, &out).unwrap();
    let inputs = prepare_dir(dir.path(), &PrepareOptions::default()).unwrap();

    let wages: Vec<f64> = inputs.prepared.resid_level_prev.clone();
    let base = ee_regression(&inputs.prepared.pairs, &wages, &inputs.cz_table, false).unwrap();
    assert!(
        (base.alpha_pop - 0.0296).abs() <= 2.0 * base.se_alpha_pop,
        "alpha {} (se {})",
        base.alpha_pop,
        base.se_alpha_pop
    );

    // Transitions are wage-independent in this DGP, so the wage coefficient
    // is near zero and the population slope barely moves.
    let with_wage = ee_regression(&inputs.prepared.pairs, &wages, &inputs.cz_table, true).unwrap();
    let beta = with_wage.beta_wage.unwrap();
    let se = with_wage.se_beta_wage.unwrap();
    assert!(beta.abs() <= 2.0 * se, "beta_wage {beta} (se {se})");
    assert!(
        (with_wage.alpha_pop - base.alpha_pop).abs() <= base.se_alpha_pop,
        "slope moved from {} to {}",
        base.alpha_pop,
        with_wage.alpha_pop
    );
}

#[test]
fn ee_frequency_matches_planted_probability_per_zone() {
    let params = DgpParams {
        n_cz: 6,
        n_workers: 30_000,
        ee_intercept: -0.15,
        ee_pop_slope: 0.0296,
        seed: 31,
        ..Default::default()
    };
    let out = simulate_panel(&params).unwrap();
    let mut per_cz: BTreeMap<u32, (u64, u64, f64)> = BTreeMap::new();
    let cz_of: BTreeMap<u64, u32> = out
        .records_prev
        .iter()
        .map(|r| (r.worker_id, r.cz_id))
        .collect();
    for w in &out.ground_truth.workers {
        let e = per_cz.entry(cz_of[&w.worker_id]).or_insert((0, 0, w.ee_prob));
        e.0 += 1;
        e.1 += w.moved as u64;
    }
    for (cz, (n, moved, p)) in per_cz {
        if n < 1000 {
            continue;
        }
        let rate = moved as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (rate - p).abs() <= 3.0 * sigma,
            "cz {cz}: rate {rate} vs planted {p} (sigma {sigma})"
        );
    }
}

#[test]
fn nesting_coworker_spec_with_zero_thetas_reproduces_baseline_fe() {
    // Fit the baseline, then rebuild its zone effects from the coworker
    // specification with the theta coefficients constrained to zero: the
    // recovered effects must match exactly.
    let params = DgpParams {
        n_cz: 8,
        n_workers: 4_000,
        seed: 21,
        ..Default::default()
    };
    let out = simulate_panel(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dir(dir.path(), &params, &out).unwrap();
    let inputs = prepare_dir(dir.path(), &PrepareOptions::default()).unwrap();

    let baseline = run_first_stage(
        &inputs.prepared,
        spec(ControlSet::Baseline, DepVar::Level, Sample::All),
        &SolverOptions::default(),
    )
    .unwrap();

    // Constraining the four thetas to zero leaves the baseline regression;
    // recompute zone effects from the baseline coefficient directly.
    let nu = baseline.result.coef("lagged_wage").unwrap();
    let mut sums: BTreeMap<u32, (f64, u64)> = BTreeMap::new();
    let prep = &inputs.prepared;
    for i in 0..prep.n_pairs() {
        if !prep.same_cz[i] {
            continue;
        }
        let e = sums.entry(prep.pairs[i].cz_id_t).or_insert((0.0, 0));
        e.0 += prep.resid_level_t[i] - nu * prep.resid_level_prev[i];
        e.1 += 1;
    }
    for &(cz, fe) in &baseline.cz_fe {
        let (s, c) = sums[&cz];
        assert!((fe - s / c as f64).abs() < 1e-8, "cz {cz}");
    }
}

#[test]
fn stayer_sample_restricts_to_non_transitions() {
    let params = DgpParams {
        n_cz: 8,
        n_workers: 5_000,
        ee_intercept: 0.25,
        ee_pop_slope: 0.0,
        seed: 3,
        ..Default::default()
    };
    let out = simulate_panel(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dir(dir.path(), &params, &out).unwrap();
    let inputs = prepare_dir(dir.path(), &PrepareOptions::default()).unwrap();

    let all = run_first_stage(
        &inputs.prepared,
        spec(ControlSet::Baseline, DepVar::Level, Sample::All),
        &SolverOptions::default(),
    )
    .unwrap();
    let stayers = run_first_stage(
        &inputs.prepared,
        spec(ControlSet::Baseline, DepVar::Level, Sample::Stayers),
        &SolverOptions::default(),
    )
    .unwrap();
    let n_stayers = inputs.prepared.pairs.iter().filter(|p| !p.is_ee).count();
    assert_eq!(stayers.result.n_obs, n_stayers);
    assert!(stayers.result.n_obs < all.result.n_obs);
}

#[test]
fn growth_responses_bounded_for_positive_wages() {
    let params = DgpParams {
        n_cz: 8,
        n_workers: 4_000,
        seed: 63,
        ..Default::default()
    };
    let out = simulate_panel(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dir(dir.path(), &params, &out).unwrap();
    let inputs = prepare_dir(dir.path(), &PrepareOptions::default()).unwrap();
    let prep = &inputs.prepared;
    for i in 0..prep.n_pairs() {
        let p = &prep.pairs[i];
        if p.wage_t > 0.0 && p.wage_prev > 0.0 {
            assert!(prep.growth_valid[i]);
            assert!(prep.growth[i] > -2.0 && prep.growth[i] < 2.0);
        }
    }

    // The growth baseline runs with zone effects only (no lagged wage).
    let stage = run_first_stage(
        &inputs.prepared,
        spec(ControlSet::Baseline, DepVar::Growth, Sample::All),
        &SolverOptions::default(),
    )
    .unwrap();
    assert!(stage.result.beta.is_empty());
    let second = run_second_stage(&stage.cz_fe, &inputs.cz_table, None).unwrap();
    assert_eq!(second.n_cz, 8);
}

#[test]
fn second_stage_weighted_mode_runs() {
    let params = DgpParams {
        n_cz: 12,
        n_workers: 6_000,
        seed: 8,
        ..Default::default()
    };
    let out = simulate_panel(&params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dir(dir.path(), &params, &out).unwrap();
    let inputs = prepare_dir(dir.path(), &PrepareOptions::default()).unwrap();
    let stage = run_first_stage(
        &inputs.prepared,
        spec(ControlSet::Baseline, DepVar::Level, Sample::All),
        &SolverOptions::default(),
    )
    .unwrap();
    let mut weights = BTreeMap::new();
    for p in &inputs.prepared.pairs {
        *weights.entry(p.cz_id_t).or_insert(0.0) += 1.0;
    }
    let unweighted = run_second_stage(&stage.cz_fe, &inputs.cz_table, None).unwrap();
    let weighted = run_second_stage(&stage.cz_fe, &inputs.cz_table, Some(&weights)).unwrap();
    assert_eq!(unweighted.n_cz, weighted.n_cz);
    assert!(weighted.alpha.is_finite());
}

#[test]
fn prepare_pairs_rejects_empty_input() {
    assert!(prepare_pairs(Vec::new(), FilterReport::default()).is_err());
}
