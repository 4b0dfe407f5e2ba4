//! Coworker wage-deviation statistics in linear time after sorting.
//!
//! For each member j of a team with sorted lagged wages x_1 <= ... <= x_N,
//! the four statistics are the sums over higher-paid and lower-paid
//! coworkers of the wage gap and the squared wage gap. Running sums over the
//! sorted wages give every member's sums in a single pass:
//!
//!   S1+_j = Z_N - Z_j - (N-j) x_j
//!   S1-_j = Z_j - j x_j
//!   S2+_j = (Z2_N - Z2_j) - 2 x_j (Z_N - Z_j) + (N-j) x_j^2
//!   S2-_j = Z2_j - 2 x_j (Z_j - x_j) + (j-2) x_j^2
//!
//! with Z_j and Z2_j the running sums of x_i and x_i^2. A quadratic
//! brute-force evaluator serves as the testing oracle.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::panel::TeamKey;

/// Divisor applied to the raw sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Divide by N-1 (zero for singleton teams); the estimated specification.
    TeamSizeMinusOne,
    /// Divide by N; used for the mean-identity checks.
    TeamSize,
}

/// Wages of one team-year, ascending, with member ids aligned to the sort.
/// Sorting is stable on (wage, worker_id) so tied wages order predictably.
#[derive(Debug, Clone)]
pub struct SortedTeamWages {
    wages: Vec<f64>,
    member_ids: Vec<u64>,
}

impl SortedTeamWages {
    pub fn new(mut members: Vec<(u64, f64)>) -> Self {
        members.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        SortedTeamWages {
            wages: members.iter().map(|m| m.1).collect(),
            member_ids: members.iter().map(|m| m.0).collect(),
        }
    }

    /// Wages already ascending; callers own the invariant.
    pub fn from_sorted(wages: Vec<f64>) -> Self {
        debug_assert!(wages.windows(2).all(|w| w[0] <= w[1]));
        let member_ids = (0..wages.len() as u64).collect();
        SortedTeamWages { wages, member_ids }
    }

    pub fn len(&self) -> usize {
        self.wages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wages.is_empty()
    }

    pub fn wages(&self) -> &[f64] {
        &self.wages
    }

    pub fn member_ids(&self) -> &[u64] {
        &self.member_ids
    }
}

/// Running sums Z_j = sum_{i<=j} x_i and Z2_j = sum_{i<=j} x_i^2.
#[derive(Debug, Clone)]
pub struct PrefixSums {
    pub z: Vec<f64>,
    pub z2: Vec<f64>,
}

/// Teams above this size accumulate Z2 with compensated summation to bound
/// cancellation in the lower-tail quadratic term.
const COMPENSATED_THRESHOLD: usize = 100_000;

pub fn prefix_sums(team: &SortedTeamWages) -> PrefixSums {
    let x = team.wages();
    let n = x.len();
    let mut z = Vec::with_capacity(n);
    let mut z2 = Vec::with_capacity(n);
    if n > COMPENSATED_THRESHOLD {
        let mut sum = 0.0f64;
        let mut acc2 = NeumaierSum::default();
        for &xi in x {
            sum += xi;
            z.push(sum);
            acc2.add(xi * xi);
            z2.push(acc2.value());
        }
    } else {
        let mut sum = 0.0f64;
        let mut sum2 = 0.0f64;
        for &xi in x {
            sum += xi;
            sum2 += xi * xi;
            z.push(sum);
            z2.push(sum2);
        }
    }
    PrefixSums { z, z2 }
}

#[derive(Default)]
struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// The four deviation statistics for one worker within a lagged team.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoworkerStats {
    /// Average gap to higher-paid coworkers; >= 0.
    pub y1_plus: f64,
    /// Average gap to lower-paid coworkers; <= 0.
    pub y1_minus: f64,
    /// Average squared gap to higher-paid coworkers; >= 0.
    pub y2_plus: f64,
    /// Average squared gap to lower-paid coworkers; >= 0.
    pub y2_minus: f64,
}

fn divisor(n: usize, norm: Normalization) -> Option<f64> {
    match norm {
        Normalization::TeamSizeMinusOne => {
            if n >= 2 {
                Some((n - 1) as f64)
            } else {
                None
            }
        }
        Normalization::TeamSize => Some(n as f64),
    }
}

/// Computes all members' statistics in O(N) after the sort.
/// Singleton teams get zeros under the N-1 normalization.
pub fn deviation_stats(team: &SortedTeamWages, norm: Normalization) -> Vec<CoworkerStats> {
    let x = team.wages();
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let Some(div) = divisor(n, norm) else {
        return vec![CoworkerStats::default(); n];
    };
    let sums = prefix_sums(team);
    let (z, z2) = (&sums.z, &sums.z2);
    let z_n = z[n - 1];
    let z2_n = z2[n - 1];
    let mut out = Vec::with_capacity(n);
    for (idx, &xj) in x.iter().enumerate() {
        let j = (idx + 1) as f64; // 1-based position in the sorted order
        let n_f = n as f64;
        let s1_plus = z_n - z[idx] - (n_f - j) * xj;
        let s1_minus = z[idx] - j * xj;
        let s2_plus = (z2_n - z2[idx]) - 2.0 * xj * (z_n - z[idx]) + (n_f - j) * xj * xj;
        let s2_minus = z2[idx] - 2.0 * xj * (z[idx] - xj) + (j - 2.0) * xj * xj;
        out.push(CoworkerStats {
            y1_plus: s1_plus / div,
            y1_minus: s1_minus / div,
            y2_plus: s2_plus / div,
            y2_minus: s2_minus / div,
        });
    }
    out
}

/// Direct O(N)-per-member evaluation over all coworkers; the testing oracle
/// for `deviation_stats`. The self term contributes zero, so sums run over
/// every i.
pub fn brute_force_stats(wages: &[f64], j: usize, norm: Normalization) -> CoworkerStats {
    let n = wages.len();
    assert!(j < n, "member index out of range");
    let Some(div) = divisor(n, norm) else {
        return CoworkerStats::default();
    };
    let xj = wages[j];
    let mut s1_plus = 0.0;
    let mut s1_minus = 0.0;
    let mut s2_plus = 0.0;
    let mut s2_minus = 0.0;
    for &xi in wages {
        let d = xi - xj;
        let up = d.max(0.0);
        let down = d.min(0.0);
        s1_plus += up;
        s1_minus += down;
        s2_plus += up * up;
        s2_minus += down * down;
    }
    CoworkerStats {
        y1_plus: s1_plus / div,
        y1_minus: s1_minus / div,
        y2_plus: s2_plus / div,
        y2_minus: s2_minus / div,
    }
}

/// Distribution moments of one team's wages. Variance uses denominator N;
/// skewness and kurtosis are the standardized third and fourth central
/// moments (kurtosis non-excess), reported as zero for degenerate teams.
/// Percentiles are nearest-rank.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TeamMoments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub p1: f64,
    pub p10: f64,
    pub p90: f64,
    pub p99: f64,
}

pub const MOMENT_NAMES: [&str; 8] = [
    "mean", "variance", "skewness", "kurtosis", "p1", "p10", "p90", "p99",
];

impl TeamMoments {
    pub fn as_array(&self) -> [f64; 8] {
        [
            self.mean,
            self.variance,
            self.skewness,
            self.kurtosis,
            self.p1,
            self.p10,
            self.p90,
            self.p99,
        ]
    }
}

fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

pub fn team_moments(team: &SortedTeamWages) -> TeamMoments {
    let x = team.wages();
    let n = x.len();
    assert!(n >= 1, "moments need at least one member");
    let n_f = n as f64;
    let mean = x.iter().sum::<f64>() / n_f;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &xi in x {
        let d = xi - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n_f;
    m3 /= n_f;
    m4 /= n_f;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    TeamMoments {
        mean,
        variance: m2,
        skewness,
        kurtosis,
        p1: nearest_rank(x, 1.0),
        p10: nearest_rank(x, 10.0),
        p90: nearest_rank(x, 90.0),
        p99: nearest_rank(x, 99.0),
    }
}

/// Per-worker kernel output after the group-by: the four deviation
/// statistics, team size, a no-coworkers flag for singleton teams, and the
/// team's distribution moments.
#[derive(Debug, Clone, Copy, Default)]
pub struct TeamStatsRow {
    pub stats: CoworkerStats,
    pub team_size: u32,
    pub no_coworkers: bool,
    pub moments: TeamMoments,
}

/// Groups rows by lagged team, runs the kernel per team, and joins results
/// back by row position. Teams are processed in parallel; output is
/// deterministic because each team's computation is sequential and results
/// scatter to fixed row indices.
pub fn compute_panel_coworker_stats(
    team_keys: &[TeamKey],
    worker_ids: &[u64],
    lagged_wages: &[f64],
) -> Vec<TeamStatsRow> {
    assert_eq!(team_keys.len(), worker_ids.len());
    assert_eq!(team_keys.len(), lagged_wages.len());
    let mut groups: BTreeMap<TeamKey, Vec<u32>> = BTreeMap::new();
    for (row, key) in team_keys.iter().enumerate() {
        groups.entry(*key).or_default().push(row as u32);
    }
    let groups: Vec<Vec<u32>> = groups.into_values().collect();

    let per_team: Vec<Vec<(u32, TeamStatsRow)>> = groups
        .par_iter()
        .map(|rows| {
            let members: Vec<(u64, f64)> = rows
                .iter()
                .map(|&r| (worker_ids[r as usize], lagged_wages[r as usize]))
                .collect();
            let mut order: Vec<u32> = rows.clone();
            // Align row ids with the (wage, worker_id) sort used by the team.
            order.sort_by(|&a, &b| {
                let (ai, bi) = (a as usize, b as usize);
                lagged_wages[ai]
                    .total_cmp(&lagged_wages[bi])
                    .then(worker_ids[ai].cmp(&worker_ids[bi]))
            });
            let team = SortedTeamWages::new(members);
            let stats = deviation_stats(&team, Normalization::TeamSizeMinusOne);
            let moments = team_moments(&team);
            let n = team.len();
            order
                .iter()
                .zip(stats)
                .map(|(&row, s)| {
                    (
                        row,
                        TeamStatsRow {
                            stats: s,
                            team_size: n as u32,
                            no_coworkers: n == 1,
                            moments,
                        },
                    )
                })
                .collect()
        })
        .collect();

    let mut out = vec![TeamStatsRow::default(); team_keys.len()];
    for team in per_team {
        for (row, stats) in team {
            out[row as usize] = stats;
        }
    }
    out
}
