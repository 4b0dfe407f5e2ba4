//! Synthetic matched employer-employee two-period panels drawn from a fully
//! specified data-generating process with planted parameters, so every
//! estimator can be verified against known ground truth.
//!
//! City populations follow a deterministic rank-size law; teams
//! (establishment x occupation cells) are allocated proportionally to
//! population with heavy-tailed sizes; firms group establishments and are
//! chained across neighboring commuting zones so the zone-firm graph has a
//! single connected component. Current-period wages follow
//!
//!   w_t = nu w_prev + psi_c + mu_j + th1+ y1+ + th1- y1- + th2+ y2+ + th2- y2- + eps
//!
//! with the coworker terms computed from the previous-period team by the
//! same kernel the estimators use. Job movers are redrawn to a random team
//! in the same commuting zone with probability ee_intercept +
//! ee_pop_slope * log population.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{deviation_stats, Normalization, SortedTeamWages};
use crate::panel::{CzTable, FirmKey, PanelRecord, TeamKey};

#[derive(Debug, Clone)]
pub struct DgpParams {
    pub n_cz: usize,
    /// Rank-size exponent: population of rank r is proportional to r^(-1/a).
    pub zipf_exponent: f64,
    /// Population of the largest commuting zone.
    pub city_pop_base: f64,
    /// Approximate number of workers (seats are drawn until this is met).
    pub n_workers: usize,
    /// Seats are targeted at `teams_per_cz_scale * n_workers`, split across
    /// zones proportionally to population.
    pub teams_per_cz_scale: f64,
    /// Target unweighted mean team size.
    pub team_size_target: f64,
    /// Lognormal shape of the team-size distribution.
    pub team_size_shape: f64,
    /// Maximum occupation cells per establishment.
    pub occ_cells_max: usize,
    /// Establishments grouped into one firm.
    pub estabs_per_firm: u32,
    /// Wage persistence.
    pub nu: f64,
    pub psi_intercept: f64,
    /// Planted gradient of the zone growth effect per unit log population.
    pub psi_pop_slope: f64,
    pub psi_noise_sd: f64,
    /// Planted firm-effect gradient in log population.
    pub firm_fe_pop_slope: f64,
    pub mu_noise_sd: f64,
    pub theta_plus_1: f64,
    pub theta_minus_1: f64,
    pub theta_plus_2: f64,
    pub theta_minus_2: f64,
    pub ee_intercept: f64,
    /// Planted gradient of the job-transition probability in log population.
    pub ee_pop_slope: f64,
    /// Wage-shock standard deviation.
    pub noise_sd: f64,
    /// Lognormal location/scale of the period t-1 hourly wage.
    pub base_wage_location: f64,
    pub base_wage_scale: f64,
    /// Optional tilts of the wage distribution in centered log population;
    /// the scale tilt plants a coworker-composition gradient.
    pub wage_location_pop_tilt: f64,
    pub wage_scale_pop_tilt: f64,
    pub hours_per_year: f64,
    pub year_prev: i32,
    pub year_curr: i32,
    pub seed: u64,
}

impl Default for DgpParams {
    fn default() -> Self {
        DgpParams {
            n_cz: 304,
            zipf_exponent: 1.0,
            city_pop_base: 2_000_000.0,
            n_workers: 100_000,
            teams_per_cz_scale: 1.0,
            team_size_target: 4.66,
            team_size_shape: 1.5,
            occ_cells_max: 3,
            estabs_per_firm: 2,
            nu: 0.8,
            psi_intercept: 0.0,
            psi_pop_slope: 0.0,
            psi_noise_sd: 0.05,
            firm_fe_pop_slope: 0.0496,
            mu_noise_sd: 0.5,
            theta_plus_1: 0.14,
            theta_minus_1: 0.13,
            theta_plus_2: 0.0,
            theta_minus_2: 0.0,
            ee_intercept: -0.15,
            ee_pop_slope: 0.0296,
            noise_sd: 1.0,
            base_wage_location: 2.6,
            base_wage_scale: 0.35,
            wage_location_pop_tilt: 0.0,
            wage_scale_pop_tilt: 0.0,
            hours_per_year: 2048.0,
            year_prev: 2014,
            year_curr: 2015,
            seed: 20140101,
        }
    }
}

impl DgpParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_cz < 2 {
            return Err(Error::InvalidDgp(format!("n_cz must be >= 2, got {}", self.n_cz)));
        }
        if !(self.zipf_exponent > 0.0) {
            return Err(Error::InvalidDgp("zipf_exponent must be > 0".to_string()));
        }
        if self.n_workers == 0 {
            return Err(Error::InvalidDgp("n_workers must be >= 1".to_string()));
        }
        if !(self.teams_per_cz_scale > 0.0) {
            return Err(Error::InvalidDgp("teams_per_cz_scale must be > 0".to_string()));
        }
        if !(self.team_size_target > 1.0) {
            return Err(Error::InvalidDgp("team_size_target must exceed 1".to_string()));
        }
        if self.team_size_shape < 0.0 || self.noise_sd < 0.0 || self.psi_noise_sd < 0.0 || self.mu_noise_sd < 0.0 {
            return Err(Error::InvalidDgp("standard deviations must be >= 0".to_string()));
        }
        if self.occ_cells_max == 0 || self.occ_cells_max > 7 {
            return Err(Error::InvalidDgp("occ_cells_max must be in 1..=7".to_string()));
        }
        if self.estabs_per_firm == 0 {
            return Err(Error::InvalidDgp("estabs_per_firm must be >= 1".to_string()));
        }
        if !(self.hours_per_year > 0.0) {
            return Err(Error::InvalidDgp("hours_per_year must be > 0".to_string()));
        }
        if self.year_curr <= self.year_prev {
            return Err(Error::InvalidDgp("year_curr must follow year_prev".to_string()));
        }
        Ok(())
    }

    /// Echo of every parameter in a flat key = value format, stable order.
    pub fn echo(&self) -> String {
        let mut s = String::from("[synthgen]\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n_cz", self.n_cz.to_string());
        kv("zipf_exponent", self.zipf_exponent.to_string());
        kv("city_pop_base", self.city_pop_base.to_string());
        kv("n_workers", self.n_workers.to_string());
        kv("teams_per_cz_scale", self.teams_per_cz_scale.to_string());
        kv("team_size_target", self.team_size_target.to_string());
        kv("team_size_shape", self.team_size_shape.to_string());
        kv("occ_cells_max", self.occ_cells_max.to_string());
        kv("estabs_per_firm", self.estabs_per_firm.to_string());
        kv("nu", self.nu.to_string());
        kv("psi_intercept", self.psi_intercept.to_string());
        kv("psi_pop_slope", self.psi_pop_slope.to_string());
        kv("psi_noise_sd", self.psi_noise_sd.to_string());
        kv("firm_fe_pop_slope", self.firm_fe_pop_slope.to_string());
        kv("mu_noise_sd", self.mu_noise_sd.to_string());
        kv("theta_plus_1", self.theta_plus_1.to_string());
        kv("theta_minus_1", self.theta_minus_1.to_string());
        kv("theta_plus_2", self.theta_plus_2.to_string());
        kv("theta_minus_2", self.theta_minus_2.to_string());
        kv("ee_intercept", self.ee_intercept.to_string());
        kv("ee_pop_slope", self.ee_pop_slope.to_string());
        kv("noise_sd", self.noise_sd.to_string());
        kv("base_wage_location", self.base_wage_location.to_string());
        kv("base_wage_scale", self.base_wage_scale.to_string());
        kv("wage_location_pop_tilt", self.wage_location_pop_tilt.to_string());
        kv("wage_scale_pop_tilt", self.wage_scale_pop_tilt.to_string());
        kv("hours_per_year", self.hours_per_year.to_string());
        kv("year_prev", self.year_prev.to_string());
        kv("year_curr", self.year_curr.to_string());
        kv("seed", self.seed.to_string());
        s
    }
}

const STREAM_EMPLOYERS: u64 = 1;
const STREAM_WORKERS: u64 = 2;
const STREAM_PSI: u64 = 3;
const STREAM_MU: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// One child seed per (stream, index) so per-zone generation is independent
/// and reproducible regardless of thread count.
fn child_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(seed ^ stream.wrapping_mul(0xA076_1D64_78BD_642F)) ^ index);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Deterministic rank-size city system: population of rank r is
/// `city_pop_base * r^(-1/zipf_exponent)`; cz ids are the ranks.
pub fn sample_city_system(params: &DgpParams) -> Result<CzTable> {
    if params.n_cz == 0 {
        return Err(Error::InvalidDgp("n_cz must be >= 1".to_string()));
    }
    if !(params.zipf_exponent > 0.0) {
        return Err(Error::InvalidDgp("zipf_exponent must be > 0".to_string()));
    }
    let entries: Vec<(u32, f64)> = (1..=params.n_cz)
        .map(|r| {
            let pop = params.city_pop_base * (r as f64).powf(-1.0 / params.zipf_exponent);
            (r as u32, pop)
        })
        .collect();
    CzTable::new(entries)
}

/// A team with its nesting: one establishment, one occupation cell, one firm,
/// one commuting zone.
#[derive(Debug, Clone, Copy)]
pub struct Team {
    pub cz_id: u32,
    pub establishment_id: u64,
    pub occ1: u8,
    pub firm_id: u64,
    pub seats: u32,
}

impl Team {
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

#[derive(Debug, Clone)]
pub struct Employers {
    pub teams: Vec<Team>,
    /// Team index range per commuting zone, aligned with `cz_table.rows`.
    pub cz_team_ranges: Vec<(usize, usize)>,
    pub total_seats: u64,
    /// Home-zone log population per firm id.
    pub firm_home_logpop: BTreeMap<u64, f64>,
}

impl Employers {
    pub fn seat_worker_ratio(&self, n_workers: usize) -> f64 {
        self.total_seats as f64 / n_workers as f64
    }
}

fn team_size_location(params: &DgpParams) -> f64 {
    // Aim the lognormal mean at target - 0.5 so the ceiling lands near the
    // target on average.
    (params.team_size_target - 0.5).max(0.5).ln() - 0.5 * params.team_size_shape * params.team_size_shape
}

fn draw_team_size(rng: &mut ChaCha8Rng, dist: &LogNormal<f64>) -> u32 {
    let draw = dist.sample(rng);
    (draw.ceil().max(1.0) as u32).min(1_000_000)
}

/// Allocates teams, establishments, and firms to commuting zones. Team counts
/// per zone are proportional to population; team sizes are heavy-tailed with
/// unweighted mean near the configured target; each team nests in exactly one
/// firm and one zone. One linking establishment per zone chains neighboring
/// zones' firms so the zone-firm graph is connected.
pub fn sample_employers(cz_table: &CzTable, params: &DgpParams, seed: u64) -> Result<Employers> {
    if cz_table.is_empty() {
        return Err(Error::InvalidDgp("commuting-zone table is empty".to_string()));
    }
    let size_dist = LogNormal::new(team_size_location(params), params.team_size_shape)
        .map_err(|e| Error::InvalidDgp(format!("team size distribution: {e}")))?;
    let total_pop: f64 = cz_table.rows.iter().map(|r| r.population).sum();
    let total_target = params.teams_per_cz_scale * params.n_workers as f64;

    struct LocalTeam {
        estab_local: u64,
        occ1: u8,
        firm_local: u64,
        seats: u32,
    }

    // Per-zone sampling is independent given the child seeds.
    let locals: Vec<(Vec<LocalTeam>, u64, u64)> = cz_table
        .rows
        .par_iter()
        .enumerate()
        .map(|(idx, row)| {
            let mut rng = child_rng(seed, STREAM_EMPLOYERS, idx as u64);
            let target = (total_target * row.population / total_pop).max(1.0);
            let mut teams = Vec::new();
            let mut seats = 0u64;
            let mut estab_local = 0u64;
            loop {
                let mut occs = crate::panel::VALID_OCC1.to_vec();
                occs.shuffle(&mut rng);
                let n_cells = rng.random_range(1..=params.occ_cells_max.min(occs.len()));
                let firm_local = estab_local / params.estabs_per_firm as u64;
                for &occ1 in occs.iter().take(n_cells) {
                    let mut s = draw_team_size(&mut rng, &size_dist);
                    // Trim the final team to the remaining target so heavy
                    // tails do not overshoot the seat budget.
                    let remaining = (target - seats as f64).ceil().max(1.0) as u32;
                    s = s.min(remaining);
                    seats += s as u64;
                    teams.push(LocalTeam {
                        estab_local,
                        occ1,
                        firm_local,
                        seats: s,
                    });
                    if seats as f64 >= target {
                        break;
                    }
                }
                estab_local += 1;
                if seats as f64 >= target {
                    break;
                }
            }
            let n_estabs = estab_local;
            let n_firms = (n_estabs + params.estabs_per_firm as u64 - 1) / params.estabs_per_firm as u64;
            (teams, n_estabs, n_firms)
        })
        .collect();

    // Global id blocks per zone.
    let mut estab_offset = Vec::with_capacity(locals.len());
    let mut firm_offset = Vec::with_capacity(locals.len());
    let mut next_estab = 0u64;
    let mut next_firm = 0u64;
    for (_, n_estabs, n_firms) in &locals {
        estab_offset.push(next_estab);
        firm_offset.push(next_firm);
        next_estab += n_estabs;
        next_firm += n_firms;
    }

    let mut teams = Vec::new();
    let mut cz_team_ranges = Vec::with_capacity(locals.len());
    let mut total_seats = 0u64;
    let mut firm_home_logpop: BTreeMap<u64, f64> = BTreeMap::new();
    for (idx, (local, _, n_firms)) in locals.iter().enumerate() {
        let row = &cz_table.rows[idx];
        let start = teams.len();
        for t in local {
            teams.push(Team {
                cz_id: row.cz_id,
                establishment_id: estab_offset[idx] + t.estab_local,
                occ1: t.occ1,
                firm_id: firm_offset[idx] + t.firm_local,
                seats: t.seats,
            });
            total_seats += t.seats as u64;
        }
        for f in 0..*n_firms {
            firm_home_logpop.insert(firm_offset[idx] + f, row.log_population);
        }
        cz_team_ranges.push((start, teams.len()));
    }

    // Linking pass: one small extra establishment per zone r >= 2, attached
    // to the first firm of the largest zone with a matching occupation cell.
    // The hub keeps the zone-firmkey bipartite graph in one component with a
    // diameter of two, which the fixed-effect solver handles well. Link
    // employment stays near 0.4% of the panel so it identifies cross-zone
    // effect levels without distorting zone aggregates.
    if cz_table.len() > 1 {
        let hub_first = teams[cz_team_ranges[0].0];
        let link_seats = ((0.004 * params.n_workers as f64 / (cz_table.len() - 1) as f64).round()
            as u32)
            .clamp(2, 64);
        let mut extra: Vec<(usize, Team)> = Vec::new();
        for idx in 1..cz_table.len() {
            let seats = link_seats;
            total_seats += seats as u64;
            extra.push((
                idx,
                Team {
                    cz_id: cz_table.rows[idx].cz_id,
                    establishment_id: next_estab + (idx as u64 - 1),
                    occ1: hub_first.occ1,
                    firm_id: hub_first.firm_id,
                    seats,
                },
            ));
        }
        // Rebuild the team list with the extras appended per zone.
        let mut rebuilt = Vec::with_capacity(teams.len() + extra.len());
        let mut ranges = Vec::with_capacity(cz_team_ranges.len());
        for idx in 0..cz_table.len() {
            let start = rebuilt.len();
            let (s, e) = cz_team_ranges[idx];
            rebuilt.extend_from_slice(&teams[s..e]);
            for (i, t) in &extra {
                if *i == idx {
                    rebuilt.push(*t);
                }
            }
            ranges.push((start, rebuilt.len()));
        }
        teams = rebuilt;
        cz_team_ranges = ranges;
    }

    Ok(Employers {
        teams,
        cz_team_ranges,
        total_seats,
        firm_home_logpop,
    })
}

/// Everything needed to reconstruct each generated wage.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub psi_by_cz: Vec<(u32, f64)>,
    pub mu_by_firm: Vec<(FirmKey, f64)>,
    pub workers: Vec<WorkerTruth>,
}

#[derive(Debug, Clone, Copy)]
pub struct WorkerTruth {
    pub worker_id: u64,
    pub wage_prev: f64,
    pub y1_plus: f64,
    pub y1_minus: f64,
    pub y2_plus: f64,
    pub y2_minus: f64,
    pub ee_prob: f64,
    pub moved: bool,
    pub noise: f64,
    pub wage_t: f64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub cz_table: CzTable,
    pub records_prev: Vec<PanelRecord>,
    pub records_curr: Vec<PanelRecord>,
    pub ground_truth: GroundTruth,
    pub seat_worker_ratio: f64,
    pub emitted_workers: u64,
}

/// Simulates the two-period panel. All randomness flows from the seed; runs
/// are bit-reproducible regardless of thread count.
pub fn simulate_panel(params: &DgpParams) -> Result<SynthOutput> {
    params.validate()?;
    let cz_table = sample_city_system(params)?;
    let employers = sample_employers(&cz_table, params, params.seed)?;

    // Job-transition probabilities; reject configurations that are out of
    // [0,1] for every zone.
    let ee_raw: Vec<f64> = cz_table
        .rows
        .iter()
        .map(|r| params.ee_intercept + params.ee_pop_slope * r.log_population)
        .collect();
    if ee_raw.iter().all(|&p| p < 0.0) || ee_raw.iter().all(|&p| p > 1.0) {
        return Err(Error::InvalidDgp(
            "job-transition probability lies outside [0,1] for every commuting zone".to_string(),
        ));
    }
    let ee_prob: Vec<f64> = ee_raw.iter().map(|p| p.clamp(0.0, 1.0)).collect();

    // Zone growth effects, in zone order.
    let mut psi_rng = child_rng(params.seed, STREAM_PSI, 0);
    let psi_noise = Normal::new(0.0, params.psi_noise_sd)
        .map_err(|e| Error::InvalidDgp(format!("psi noise: {e}")))?;
    let psi: Vec<f64> = cz_table
        .rows
        .iter()
        .map(|r| {
            params.psi_intercept
                + params.psi_pop_slope * r.log_population
                + psi_noise.sample(&mut psi_rng)
        })
        .collect();

    // Firm effects per (firm, occupation) cell, keyed off the firm's home
    // zone, drawn in sorted key order.
    let mut firm_keys: Vec<FirmKey> = employers
        .teams
        .iter()
        .map(Team::firm_key)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    firm_keys.sort();
    let mut mu_rng = child_rng(params.seed, STREAM_MU, 0);
    let mu_noise = Normal::new(0.0, params.mu_noise_sd)
        .map_err(|e| Error::InvalidDgp(format!("mu noise: {e}")))?;
    let mu_by_firm: BTreeMap<FirmKey, f64> = firm_keys
        .iter()
        .map(|fk| {
            let home = employers.firm_home_logpop[&fk.firm_id];
            let mu = params.firm_fe_pop_slope * home + mu_noise.sample(&mut mu_rng);
            (*fk, mu)
        })
        .collect();

    // Worker-id blocks per zone.
    let seats_per_cz: Vec<u64> = employers
        .cz_team_ranges
        .iter()
        .map(|&(s, e)| employers.teams[s..e].iter().map(|t| t.seats as u64).sum())
        .collect();
    let mut worker_offset = Vec::with_capacity(seats_per_cz.len());
    let mut next_worker = 1u64;
    for s in &seats_per_cz {
        worker_offset.push(next_worker);
        next_worker += s;
    }

    let mean_logpop: f64 =
        cz_table.rows.iter().map(|r| r.log_population).sum::<f64>() / cz_table.len() as f64;

    struct CzOutput {
        records_prev: Vec<PanelRecord>,
        records_curr: Vec<PanelRecord>,
        truths: Vec<WorkerTruth>,
    }

    let noise_dist = Normal::new(0.0, params.noise_sd)
        .map_err(|e| Error::InvalidDgp(format!("wage noise: {e}")))?;

    let per_cz: Vec<CzOutput> = cz_table
        .rows
        .par_iter()
        .enumerate()
        .map(|(idx, row)| {
            let mut rng = child_rng(params.seed, STREAM_WORKERS, idx as u64);
            let (t_start, t_end) = employers.cz_team_ranges[idx];
            let teams = &employers.teams[t_start..t_end];
            let centered = row.log_population - mean_logpop;
            let loc = params.base_wage_location + params.wage_location_pop_tilt * centered;
            let scale = (params.base_wage_scale + params.wage_scale_pop_tilt * centered).max(0.01);
            let wage_dist = LogNormal::new(loc, scale).expect("validated scale");
            let p_move = ee_prob[idx];

            // Seats: draw every worker's attributes and lagged wage.
            let mut worker_team: Vec<usize> = Vec::new();
            let mut ages: Vec<f64> = Vec::new();
            let mut genders: Vec<u8> = Vec::new();
            let mut wages_prev: Vec<f64> = Vec::new();
            for (ti, team) in teams.iter().enumerate() {
                for _ in 0..team.seats {
                    worker_team.push(ti);
                    ages.push(rng.random_range(20..=60) as f64);
                    genders.push(if rng.random::<bool>() { 1 } else { 2 });
                    wages_prev.push(wage_dist.sample(&mut rng));
                }
            }
            let n = worker_team.len();
            let base_id = worker_offset[idx];

            // Coworker terms from the period t-1 teams, via the shared kernel.
            let mut y_terms = vec![crate::kernel::CoworkerStats::default(); n];
            let mut members: Vec<Vec<(u64, f64)>> = vec![Vec::new(); teams.len()];
            for w in 0..n {
                members[worker_team[w]].push((base_id + w as u64, wages_prev[w]));
            }
            for team_members in members {
                if team_members.is_empty() {
                    continue;
                }
                let sorted = SortedTeamWages::new(team_members);
                let stats = deviation_stats(&sorted, Normalization::TeamSizeMinusOne);
                for (mid, s) in sorted.member_ids().iter().zip(stats) {
                    y_terms[(mid - base_id) as usize] = s;
                }
            }

            // Transitions, then wages.
            let mut records_prev = Vec::with_capacity(n);
            let mut records_curr = Vec::with_capacity(n);
            let mut truths = Vec::with_capacity(n);
            for w in 0..n {
                let worker_id = base_id + w as u64;
                let home_team = &teams[worker_team[w]];
                let moved = teams.len() >= 2 && rng.random::<f64>() < p_move;
                let dest_team = if moved {
                    let mut d = rng.random_range(0..teams.len() - 1);
                    if d >= worker_team[w] {
                        d += 1;
                    }
                    &teams[d]
                } else {
                    home_team
                };
                let noise = noise_dist.sample(&mut rng);
                let y = &y_terms[w];
                let mu = mu_by_firm[&home_team.firm_key()];
                let wage_t = params.nu * wages_prev[w]
                    + psi[idx]
                    + mu
                    + params.theta_plus_1 * y.y1_plus
                    + params.theta_minus_1 * y.y1_minus
                    + params.theta_plus_2 * y.y2_plus
                    + params.theta_minus_2 * y.y2_minus
                    + noise;

                records_prev.push(PanelRecord {
                    worker_id,
                    year: params.year_prev,
                    firm_id: home_team.firm_id,
                    establishment_id: home_team.establishment_id,
                    occ1: home_team.occ1,
                    cz_id: row.cz_id,
                    gross_annual_wage: wages_prev[w] * params.hours_per_year,
                    hours: params.hours_per_year,
                    age: ages[w],
                    gender: genders[w],
                    hourly_wage: None,
                });
                records_curr.push(PanelRecord {
                    worker_id,
                    year: params.year_curr,
                    firm_id: dest_team.firm_id,
                    establishment_id: dest_team.establishment_id,
                    occ1: dest_team.occ1,
                    cz_id: row.cz_id,
                    gross_annual_wage: wage_t * params.hours_per_year,
                    hours: params.hours_per_year,
                    age: ages[w] + 1.0,
                    gender: genders[w],
                    hourly_wage: None,
                });
                truths.push(WorkerTruth {
                    worker_id,
                    wage_prev: wages_prev[w],
                    y1_plus: y.y1_plus,
                    y1_minus: y.y1_minus,
                    y2_plus: y.y2_plus,
                    y2_minus: y.y2_minus,
                    ee_prob: p_move,
                    moved,
                    noise,
                    wage_t,
                });
            }
            CzOutput {
                records_prev,
                records_curr,
                truths,
            }
        })
        .collect();

    let mut records_prev = Vec::with_capacity(employers.total_seats as usize);
    let mut records_curr = Vec::with_capacity(employers.total_seats as usize);
    let mut workers = Vec::with_capacity(employers.total_seats as usize);
    for out in per_cz {
        records_prev.extend(out.records_prev);
        records_curr.extend(out.records_curr);
        workers.extend(out.truths);
    }
    let emitted_workers = workers.len() as u64;

    Ok(SynthOutput {
        ground_truth: GroundTruth {
            psi_by_cz: cz_table
                .rows
                .iter()
                .zip(&psi)
                .map(|(r, &p)| (r.cz_id, p))
                .collect(),
            mu_by_firm: mu_by_firm.into_iter().collect(),
            workers,
        },
        cz_table,
        records_prev,
        records_curr,
        seat_worker_ratio: employers.seat_worker_ratio(params.n_workers),
        emitted_workers,
    })
}

fn panel_csv(records: &[PanelRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 64 + 128);
    s.push_str(
        "worker_id,year,firm_id,establishment_id,occ1,cz_id,gross_annual_wage,hours,age,gender\n",
    );
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.worker_id,
            r.year,
            r.firm_id,
            r.establishment_id,
            r.occ1,
            r.cz_id,
            r.gross_annual_wage,
            r.hours,
            r.age,
            r.gender
        );
    }
    s
}

/// Writes the panel in the format the ingestion layer reads, the zone and CPI
/// tables, the ground-truth files, and a parameter echo.
pub fn write_synthetic_dir(out_dir: &Path, params: &DgpParams, output: &SynthOutput) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("panel_prev.csv"), panel_csv(&output.records_prev))?;
    std::fs::write(out_dir.join("panel_curr.csv"), panel_csv(&output.records_curr))?;

    let mut cz = String::from("cz_id,population\n");
    for r in &output.cz_table.rows {
        let _ = writeln!(cz, "{},{}", r.cz_id, r.population);
    }
    std::fs::write(out_dir.join("cz_table.csv"), cz)?;

    let mut cpi = String::from("year,index\n");
    let _ = writeln!(cpi, "{},100", params.year_prev);
    let _ = writeln!(cpi, "{},100", params.year_curr);
    std::fs::write(out_dir.join("cpi.csv"), cpi)?;

    let gt_dir = out_dir.join("ground_truth");
    std::fs::create_dir_all(&gt_dir)?;
    let mut psi = String::from("cz_id,log_population,psi\n");
    for ((cz_id, p), row) in output.ground_truth.psi_by_cz.iter().zip(&output.cz_table.rows) {
        let _ = writeln!(psi, "{},{},{}", cz_id, row.log_population, p);
    }
    std::fs::write(gt_dir.join("psi_by_cz.csv"), psi)?;

    let mut mu = String::from("firm_id,occ1,mu\n");
    for (fk, m) in &output.ground_truth.mu_by_firm {
        let _ = writeln!(mu, "{},{},{}", fk.firm_id, fk.occ1, m);
    }
    std::fs::write(gt_dir.join("mu_by_firm.csv"), mu)?;

    let mut wt = String::from(
        "worker_id,wage_prev,y1_plus,y1_minus,y2_plus,y2_minus,ee_prob,moved,noise,wage_t\n",
    );
    for w in &output.ground_truth.workers {
        let _ = writeln!(
            wt,
            "{},{},{},{},{},{},{},{},{},{}",
            w.worker_id,
            w.wage_prev,
            w.y1_plus,
            w.y1_minus,
            w.y2_plus,
            w.y2_minus,
            w.ee_prob,
            w.moved as u8,
            w.noise,
            w.wage_t
        );
    }
    std::fs::write(gt_dir.join("worker_terms.csv"), wt)?;

    let mut echo = params.echo();
    let _ = writeln!(echo, "\n[generated]");
    let _ = writeln!(echo, "emitted_workers = {}", output.emitted_workers);
    let _ = writeln!(echo, "seat_worker_ratio = {}", output.seat_worker_ratio);
    std::fs::write(out_dir.join("params_echo.ini"), echo)?;
    Ok(())
}
