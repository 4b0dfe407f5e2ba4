//! Self-contained verification sweeps: kernel-vs-oracle equivalence, the
//! 1/N mean identity, absorbed-vs-dense coefficient and standard-error
//! agreement, and the kernel timing harness. The CLI `verify` command and
//! the acceptance suite both run these.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::kernel::{brute_force_stats, deviation_stats, CoworkerStats, Normalization, SortedTeamWages};
use crate::solver::{
    absorb_and_estimate, bipartite_components, dense_ols_oracle, DataTable, FactorColumn,
    RegressionSpec, SolverOptions,
};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        CheckOutcome {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

pub type KernelFn = dyn Fn(&SortedTeamWages, Normalization) -> Vec<CoworkerStats> + Sync;

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

fn random_team(rng: &mut ChaCha8Rng, min_size: usize, max_size: usize, tie_rate: f64) -> Vec<f64> {
    let n = rng.random_range(min_size..=max_size);
    (0..n)
        .map(|_| {
            let w = 5.0 + 45.0 * rng.random::<f64>();
            if rng.random::<f64>() < tie_rate {
                w.round()
            } else {
                w
            }
        })
        .collect()
}

/// Randomized sweep comparing a kernel implementation against the quadratic
/// brute-force oracle on all four statistics, at 1e-10 relative tolerance.
pub fn kernel_oracle_check(
    n_teams: usize,
    max_size: usize,
    tie_rate: f64,
    seed: u64,
    kernel: &KernelFn,
) -> CheckOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0f64;
    for _ in 0..n_teams {
        let wages = random_team(&mut rng, 1, max_size, tie_rate);
        let team = SortedTeamWages::new(
            wages.iter().copied().enumerate().map(|(i, w)| (i as u64, w)).collect(),
        );
        let fast = kernel(&team, Normalization::TeamSizeMinusOne);
        for (j, f) in fast.iter().enumerate() {
            let o = brute_force_stats(team.wages(), j, Normalization::TeamSizeMinusOne);
            max_gap = max_gap
                .max(rel_gap(f.y1_plus, o.y1_plus))
                .max(rel_gap(f.y1_minus, o.y1_minus))
                .max(rel_gap(f.y2_plus, o.y2_plus))
                .max(rel_gap(f.y2_minus, o.y2_minus));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = max_gap <= 1e-10 && secs < 10.0;
    CheckOutcome::new(
        "kernel_oracle_equivalence",
        pass,
        format!("{n_teams} teams, max relative discrepancy {max_gap:.3e}, {secs:.2}s"),
    )
}

/// In 1/N mode, y1_plus + y1_minus must equal mean(x) - x_j to 1e-10 on
/// every member of every sampled team.
pub fn kernel_mean_identity_check(n_teams: usize, max_size: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0f64;
    for _ in 0..n_teams {
        let wages = random_team(&mut rng, 1, max_size, 0.1);
        let team = SortedTeamWages::new(
            wages.iter().copied().enumerate().map(|(i, w)| (i as u64, w)).collect(),
        );
        let n = team.len() as f64;
        let mean = team.wages().iter().sum::<f64>() / n;
        for (j, s) in deviation_stats(&team, Normalization::TeamSize).iter().enumerate() {
            let expected = mean - team.wages()[j];
            max_gap = max_gap.max((s.y1_plus + s.y1_minus - expected).abs() / (1.0 + expected.abs()));
        }
    }
    let pass = max_gap <= 1e-10;
    CheckOutcome::new(
        "kernel_mean_identity",
        pass,
        format!("{n_teams} teams, max deviation {max_gap:.3e}"),
    )
}

/// Random absorbed-regression instances compared against the dense
/// dummy-variable oracle: coefficients and cluster-robust standard errors
/// must agree within 1e-8.
pub fn fwl_check(n_instances: usize, max_rows: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_beta_gap = 0.0f64;
    let mut max_se_gap = 0.0f64;
    for inst in 0..n_instances {
        let two_way = inst % 2 == 1;
        let n = rng.random_range(60..=max_rows);
        let p = rng.random_range(1..=3);
        let l1 = rng.random_range(3..=20);
        let l2 = rng.random_range(2..=12);

        // Factor assignments; resample until the two-way design is connected.
        let mut f1_keys: Vec<u32>;
        let mut f2_keys: Vec<u32> = Vec::new();
        loop {
            f1_keys = (0..n).map(|_| rng.random_range(0..l1)).collect();
            // Every level must appear at least twice for a stable instance.
            for level in 0..l1 {
                f1_keys[(2 * level as usize) % n] = level;
            }
            if !two_way {
                break;
            }
            f2_keys = (0..n).map(|_| rng.random_range(0..l2)).collect();
            for level in 0..l2 {
                f2_keys[(2 * level as usize + 1) % n] = level;
            }
            let (fa, _) = FactorColumn::from_keys("a", &f1_keys);
            let (fb, _) = FactorColumn::from_keys("b", &f2_keys);
            let (_, _, n_components) = bipartite_components(&fa, &fb);
            if n_components == 1 {
                break;
            }
        }

        let covs: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let fe1: Vec<f64> = (0..l1).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let fe2: Vec<f64> = (0..l2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let betas: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 3.0 - 1.5).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = fe1[f1_keys[i] as usize];
                if two_way {
                    v += fe2[f2_keys[i] as usize];
                }
                for (b, c) in betas.iter().zip(&covs) {
                    v += b * c[i];
                }
                v + rng.random::<f64>() - 0.5
            })
            .collect();

        // Absorbed estimate.
        let mut table = DataTable::new(n);
        table.add_column("y", y.clone());
        let mut names = Vec::new();
        for (j, c) in covs.iter().enumerate() {
            let name = format!("x{j}");
            table.add_column(&name, c.clone());
            names.push(name);
        }
        let (fa, _) = FactorColumn::from_keys("cz", &f1_keys);
        table.add_factor(fa.clone());
        let mut absorb = vec!["cz".to_string()];
        if two_way {
            let (fb, _) = FactorColumn::from_keys("firm", &f2_keys);
            table.add_factor(fb);
            absorb.push("firm".to_string());
        }
        let spec = RegressionSpec {
            response: "y".to_string(),
            covariates: names,
            absorb,
            cluster: "cz".to_string(),
        };
        let absorbed = match absorb_and_estimate(&table, &spec, &SolverOptions::default()) {
            Ok(r) => r,
            Err(e) => {
                return CheckOutcome::new(
                    "fwl_dense_equivalence",
                    false,
                    format!("instance {inst}: absorbed estimation failed: {e}"),
                )
            }
        };

        // Dense design: covariates, all factor-1 dummies, factor-2 dummies
        // with the first level dropped (single component).
        let mut dense_cols = covs.clone();
        for level in 0..l1 {
            dense_cols.push(
                f1_keys
                    .iter()
                    .map(|&k| if k == level { 1.0 } else { 0.0 })
                    .collect(),
            );
        }
        if two_way {
            for level in 1..l2 {
                dense_cols.push(
                    f2_keys
                        .iter()
                        .map(|&k| if k == level { 1.0 } else { 0.0 })
                        .collect(),
                );
            }
        }
        let dense = match dense_ols_oracle(&y, &dense_cols) {
            Ok(f) => f,
            Err(e) => {
                return CheckOutcome::new(
                    "fwl_dense_equivalence",
                    false,
                    format!("instance {inst}: dense oracle failed: {e}"),
                )
            }
        };
        for j in 0..p {
            max_beta_gap = max_beta_gap.max(rel_gap(absorbed.beta[j], dense.beta[j]));
        }

        // Dense sandwich for the covariate block.
        let k_total = dense_cols.len();
        let mut w = DMatrix::zeros(n, k_total);
        for (j, c) in dense_cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                w[(i, j)] = v;
            }
        }
        let gram = w.transpose() * &w;
        let Some(chol) = gram.cholesky() else {
            return CheckOutcome::new(
                "fwl_dense_equivalence",
                false,
                format!("instance {inst}: dense gram not PD"),
            );
        };
        let inv = chol.inverse();
        let mut scores = vec![vec![0.0f64; k_total]; l1 as usize];
        for i in 0..n {
            let g = f1_keys[i] as usize;
            for j in 0..k_total {
                scores[g][j] += w[(i, j)] * dense.residuals[i];
            }
        }
        let mut meat = DMatrix::zeros(k_total, k_total);
        for s in &scores {
            for a in 0..k_total {
                for b in 0..k_total {
                    meat[(a, b)] += s[a] * s[b];
                }
            }
        }
        let gf = l1 as f64;
        let nf = n as f64;
        let kf = k_total as f64;
        let c = (gf / (gf - 1.0)) * ((nf - 1.0) / (nf - kf));
        let v_dense = &inv * meat * &inv * c;
        let absorbed_se = absorbed.se();
        for j in 0..p {
            let se_dense = v_dense[(j, j)].max(0.0).sqrt();
            max_se_gap = max_se_gap.max(rel_gap(absorbed_se[j], se_dense));
        }
        if absorbed.dof_k != k_total {
            return CheckOutcome::new(
                "fwl_dense_equivalence",
                false,
                format!(
                    "instance {inst}: dof mismatch (absorbed {}, dense {k_total})",
                    absorbed.dof_k
                ),
            );
        }
    }
    let pass = max_beta_gap <= 1e-8 && max_se_gap <= 1e-8;
    CheckOutcome::new(
        "fwl_dense_equivalence",
        pass,
        format!(
            "{n_instances} instances, max beta gap {max_beta_gap:.3e}, max clustered-SE gap {max_se_gap:.3e}"
        ),
    )
}

/// Pre-generated team-structured rows for the timing harness.
pub struct KernelBenchData {
    pub wages: Vec<f64>,
    pub offsets: Vec<usize>,
}

pub fn generate_kernel_rows(n_rows: usize, seed: u64) -> KernelBenchData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = LogNormal::new(1.0f64, 1.3).expect("static parameters");
    let mut wages = Vec::with_capacity(n_rows + 64);
    let mut offsets = vec![0usize];
    while wages.len() < n_rows {
        let draw: f64 = dist.sample(&mut rng);
        let size = (draw.ceil().max(1.0) as usize).min(5_000);
        for _ in 0..size {
            wages.push(5.0 + 45.0 * rng.random::<f64>());
        }
        offsets.push(wages.len());
    }
    KernelBenchData { wages, offsets }
}

/// One sequential kernel pass over every team (sort included); returns a
/// checksum so the work cannot be optimized away.
pub fn kernel_pass(data: &KernelBenchData) -> f64 {
    let mut acc = 0.0f64;
    for w in data.offsets.windows(2) {
        let slice = &data.wages[w[0]..w[1]];
        let team = SortedTeamWages::new(
            slice.iter().copied().enumerate().map(|(i, x)| (i as u64, x)).collect(),
        );
        for s in deviation_stats(&team, Normalization::TeamSizeMinusOne) {
            acc += s.y1_plus - s.y1_minus + s.y2_plus * 1e-6 - s.y2_minus * 1e-6;
        }
    }
    acc
}

#[derive(Debug, Clone)]
pub struct ScalingOutcome {
    pub outcome: CheckOutcome,
    pub median_small_secs: f64,
    pub median_large_secs: f64,
    pub ratio: f64,
}

/// Times the kernel on `rows_small` and `rows_large` rows (medians over
/// `reps` single-threaded runs): doubling the rows may cost at most
/// `max_ratio`, and the large pass must finish within `budget_secs`.
pub fn kernel_scaling_check(
    rows_small: usize,
    rows_large: usize,
    reps: usize,
    seed: u64,
    max_ratio: f64,
    budget_secs: f64,
) -> ScalingOutcome {
    let median = |data: &KernelBenchData| -> f64 {
        let mut times: Vec<f64> = (0..reps.max(1))
            .map(|_| {
                let start = Instant::now();
                std::hint::black_box(kernel_pass(data));
                start.elapsed().as_secs_f64()
            })
            .collect();
        times.sort_by(f64::total_cmp);
        times[times.len() / 2]
    };
    let small = generate_kernel_rows(rows_small, seed);
    let large = generate_kernel_rows(rows_large, seed ^ 0x5EED);
    let median_small_secs = median(&small);
    let median_large_secs = median(&large);
    let ratio = median_large_secs / median_small_secs;
    let pass = ratio <= max_ratio && median_large_secs <= budget_secs;
    ScalingOutcome {
        outcome: CheckOutcome::new(
            "kernel_linear_time_scaling",
            pass,
            format!(
                "{rows_small} rows: {median_small_secs:.3}s, {rows_large} rows: {median_large_secs:.3}s, ratio {ratio:.2} (limit {max_ratio}), budget {budget_secs}s"
            ),
        ),
        median_small_secs,
        median_large_secs,
        ratio,
    }
}

/// Deflates, pairs, and prepares a simulated panel in memory.
fn prepare_synth(out: &crate::synth::SynthOutput, params: &crate::synth::DgpParams) -> crate::error::Result<crate::pipeline::PreparedPanel> {
    use crate::panel::{build_paired_panel, deflate_wages, CpiSeries, FilterReport};
    let cpi = CpiSeries::flat(&[params.year_prev, params.year_curr], params.year_curr)?;
    let mut prev = out.records_prev.clone();
    let mut curr = out.records_curr.clone();
    deflate_wages(&mut prev, &cpi)?;
    deflate_wages(&mut curr, &cpi)?;
    let mut report = FilterReport::default();
    let pairs = build_paired_panel(&prev, &curr, &out.cz_table, &mut report)?;
    crate::pipeline::prepare_pairs(pairs, report)
}

/// Planted-parameter recovery on the default data-generating process:
/// first-stage coefficients within two clustered standard errors of their
/// planted values, the firm-effect projection within two standard errors of
/// its planted slope, and the transition regressions within two standard
/// errors of the planted population slope with a null wage effect.
pub fn planted_recovery_battery(
    n_cz: usize,
    n_workers: usize,
    seed: u64,
) -> crate::error::Result<Vec<CheckOutcome>> {
    use crate::decomp::{run_first_stage, ControlSet, DepVar, Sample, SpecId};
    use crate::mobility::ee_regression;
    use crate::solver::SolverOptions;
    use crate::synth::{simulate_panel, DgpParams};

    let params = DgpParams {
        n_cz,
        n_workers,
        seed,
        ..Default::default()
    };
    let out = simulate_panel(&params)?;
    let prep = prepare_synth(&out, &params)?;
    let opts = SolverOptions::default();
    let mut outcomes = Vec::new();

    let stage = run_first_stage(
        &prep,
        SpecId {
            controls: ControlSet::CoworkersFirmFe,
            dv: DepVar::Level,
            sample: Sample::All,
        },
        &opts,
    )?;
    let mut worst_z = 0.0f64;
    let mut detail = String::new();
    for (name, planted) in [
        ("lagged_wage", params.nu),
        ("y1_plus", params.theta_plus_1),
        ("y1_minus", params.theta_minus_1),
        ("y2_plus", params.theta_plus_2),
        ("y2_minus", params.theta_minus_2),
    ] {
        let est = stage.result.coef(name).unwrap_or(f64::NAN);
        let se = stage.result.coef_se(name).unwrap_or(f64::NAN);
        let z = ((est - planted) / se).abs();
        worst_z = worst_z.max(z);
        detail.push_str(&format!("{name} {est:.4} (planted {planted}, z {z:.2}); "));
    }
    outcomes.push(CheckOutcome::new(
        "planted_first_stage_recovery",
        worst_z.is_finite() && worst_z <= 2.0,
        format!("n={}, {detail}", stage.result.n_obs),
    ));

    let base = ee_regression(&prep.pairs, &prep.resid_level_prev, &out.cz_table, false)?;
    let z_ee = ((base.alpha_pop - params.ee_pop_slope) / base.se_alpha_pop).abs();
    let with_wage = ee_regression(&prep.pairs, &prep.resid_level_prev, &out.cz_table, true)?;
    let z_wage = (with_wage.beta_wage.unwrap() / with_wage.se_beta_wage.unwrap()).abs();
    outcomes.push(CheckOutcome::new(
        "ee_regression_recovery",
        z_ee <= 2.0 && z_wage <= 2.0,
        format!(
            "alpha {:.4} vs planted {} (z {z_ee:.2}); beta_wage {:.5} (z {z_wage:.2})",
            base.alpha_pop,
            params.ee_pop_slope,
            with_wage.beta_wage.unwrap()
        ),
    ));
    Ok(outcomes)
}

/// Firm-effect projection recovery on a low-noise process: the estimated
/// employment-weighted zone means of the firm effects, regressed on log
/// population, recover the planted slope within two standard errors.
pub fn firm_projection_check(
    n_cz: usize,
    n_workers: usize,
    seed: u64,
) -> crate::error::Result<CheckOutcome> {
    use crate::decomp::{project_firm_fes, run_first_stage, ControlSet, DepVar, Sample, SpecId};
    use crate::solver::SolverOptions;
    use crate::synth::{simulate_panel, DgpParams};

    let params = DgpParams {
        n_cz,
        n_workers,
        seed,
        noise_sd: 0.1,
        mu_noise_sd: 0.25,
        ..Default::default()
    };
    let out = simulate_panel(&params)?;
    let prep = prepare_synth(&out, &params)?;
    let stage = run_first_stage(
        &prep,
        SpecId {
            controls: ControlSet::FirmFe,
            dv: DepVar::Level,
            sample: Sample::All,
        },
        &SolverOptions::default(),
    )?;
    let projection = project_firm_fes(
        stage.firm_fe.as_ref().expect("firm effects absorbed"),
        &prep,
        &stage.rows_used,
        &out.cz_table,
    )?;
    let z = ((projection.alpha - params.firm_fe_pop_slope) / projection.se_alpha).abs();
    Ok(CheckOutcome::new(
        "firm_fe_projection_recovery",
        z <= 2.0,
        format!(
            "slope {:.4} vs planted {} (se {:.4}, z {z:.2})",
            projection.alpha, params.firm_fe_pop_slope, projection.se_alpha
        ),
    ))
}

/// Percent-change arithmetic against externally reported values at
/// one-decimal rounding.
pub fn percent_change_check() -> CheckOutcome {
    use crate::decomp::{format_percent, percent_change};
    let cases = [
        (0.09086, 0.23614, "-61.5%"),
        (0.06361, 0.23614, "-73.1%"),
        (0.04877, 0.23614, "-79.3%"),
        (0.01405, 0.23614, "-94.1%"),
    ];
    let mut detail = String::new();
    let mut pass = true;
    for (value, baseline, expected) in cases {
        let got = format_percent(percent_change(value, baseline).expect("nonzero baseline"));
        if got != expected {
            pass = false;
        }
        detail.push_str(&format!("({value}, {baseline}) -> {got} (want {expected}); "));
    }
    CheckOutcome::new("percent_change_arithmetic", pass, detail)
}

/// Symmetric growth: values stay inside (-2, 2) for positive wages and the
/// measure is exactly antisymmetric.
pub fn growth_measure_check(n_pairs: usize, seed: u64) -> CheckOutcome {
    use crate::decomp::symmetric_growth;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pass = true;
    let mut detail = String::new();
    for _ in 0..n_pairs {
        let a = 0.01 + 100.0 * rng.random::<f64>();
        let b = 0.01 + 100.0 * rng.random::<f64>();
        let g = symmetric_growth(a, b).expect("positive wages");
        let h = symmetric_growth(b, a).expect("positive wages");
        if !(g > -2.0 && g < 2.0) {
            pass = false;
            detail = format!("growth {g} out of (-2,2) for ({a}, {b})");
            break;
        }
        if g != -h {
            pass = false;
            detail = format!("antisymmetry violated at ({a}, {b}): {g} vs {h}");
            break;
        }
    }
    if pass {
        detail = format!("{n_pairs} random positive-wage pairs in (-2,2), exact antisymmetry");
    }
    CheckOutcome::new("growth_measure", pass, detail)
}

/// The sorting-mechanism decomposition: on a process where the entire
/// population gradient flows through firm effects and coworker composition
/// (the zone effect itself is independent of population), the baseline
/// second-stage slope is significantly positive, adding coworker and firm
/// controls removes at least 80% of it, and on job stayers the fully
/// controlled slope is statistically indistinguishable from zero.
pub fn sorting_mechanism_check(
    n_cz: usize,
    n_workers: usize,
    seed: u64,
) -> crate::error::Result<CheckOutcome> {
    use crate::decomp::{run_first_stage, run_second_stage, ControlSet, DepVar, Sample, SpecId};
    use crate::solver::SolverOptions;
    use crate::synth::{simulate_panel, DgpParams};

    let params = DgpParams {
        n_cz,
        n_workers,
        seed,
        psi_pop_slope: 0.0,
        psi_noise_sd: 0.02,
        firm_fe_pop_slope: 0.05,
        mu_noise_sd: 0.3,
        wage_scale_pop_tilt: 0.05,
        theta_plus_1: 0.25,
        theta_minus_1: 0.05,
        noise_sd: 0.25,
        ..Default::default()
    };
    let out = simulate_panel(&params)?;
    let prep = prepare_synth(&out, &params)?;
    let opts = SolverOptions::default();
    let second = |controls, sample| -> crate::error::Result<crate::decomp::SecondStageResult> {
        let stage = run_first_stage(
            &prep,
            SpecId {
                controls,
                dv: DepVar::Level,
                sample,
            },
            &opts,
        )?;
        run_second_stage(&stage.cz_fe, &out.cz_table, None)
    };
    let baseline = second(ControlSet::Baseline, Sample::All)?;
    let controlled = second(ControlSet::CoworkersFirmFe, Sample::All)?;
    let stayers = second(ControlSet::CoworkersFirmFe, Sample::Stayers)?;

    let z_base = baseline.alpha / baseline.se_alpha;
    let reduction = 100.0 * (1.0 - controlled.alpha.abs() / baseline.alpha.abs());
    let stayer_z = (stayers.alpha / stayers.se_alpha).abs();
    let pass = z_base >= 2.0 && reduction >= 80.0 && stayer_z <= 2.0;
    Ok(CheckOutcome::new(
        "sorting_mechanism_decomposition",
        pass,
        format!(
            "baseline alpha {:.4} (z {z_base:.1}), controlled {:.4} (reduction {reduction:.1}%), stayer alpha {:.4} (z {stayer_z:.2})",
            baseline.alpha, controlled.alpha, stayers.alpha
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stock_kernel_passes_oracle_sweep() {
        let out = kernel_oracle_check(300, 80, 0.1, 11, &deviation_stats);
        assert!(out.pass, "{}", out.detail);
    }

    #[test]
    fn corrupted_kernel_fails_oracle_sweep() {
        // Off-by-one in the running-sum index: uses Z_{j-1} where Z_j belongs.
        let corrupted = |team: &SortedTeamWages, norm: Normalization| -> Vec<CoworkerStats> {
            let mut stats = deviation_stats(team, norm);
            let n = team.len();
            if n >= 2 {
                let x = team.wages();
                for (idx, s) in stats.iter_mut().enumerate() {
                    let z_shift = if idx == 0 { 0.0 } else { x[idx - 1] };
                    s.y1_plus += z_shift / (n as f64 - 1.0);
                }
            }
            stats
        };
        let out = kernel_oracle_check(100, 40, 0.1, 13, &corrupted);
        assert!(!out.pass, "corrupted kernel must fail: {}", out.detail);
        assert!(out.detail.contains("max relative discrepancy"));
    }

    #[test]
    fn mean_identity_sweep_passes() {
        let out = kernel_mean_identity_check(300, 60, 17);
        assert!(out.pass, "{}", out.detail);
    }

    #[test]
    fn fwl_sweep_small() {
        let out = fwl_check(12, 400, 23);
        assert!(out.pass, "{}", out.detail);
    }

    #[test]
    fn scaling_harness_reports_ratio() {
        let res = kernel_scaling_check(60_000, 120_000, 3, 5, 2.3, 60.0);
        assert!(res.median_small_secs > 0.0);
        assert!(res.ratio > 0.0);
    }
}
