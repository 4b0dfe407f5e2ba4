//! Flat key-value run configuration (INI-style sections). Unknown keys are
//! rejected; every resolved value, including defaults, is echoed into run
//! metadata.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use uwp_core::decomp::{ControlSet, DepVar, Sample};
use uwp_core::panel::FilterConfig;
use uwp_core::pipeline::PrepareOptions;
use uwp_core::solver::{DemeanOptions, SolverOptions};
use uwp_core::synth::DgpParams;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

struct Ini {
    values: BTreeMap<(String, String), String>,
    used: RefCell<BTreeSet<(String, String)>>,
}

impl Ini {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(ConfigError(format!(
                        "line {}: malformed section header `{line}`",
                        lineno + 1
                    )));
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if section.is_empty() {
                return Err(ConfigError(format!(
                    "line {}: key `{key}` outside any [section]",
                    lineno + 1
                )));
            }
            if values.insert((section.clone(), key.clone()), value).is_some() {
                return Err(ConfigError(format!("duplicate key `{section}.{key}`")));
            }
        }
        Ok(Ini {
            values,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn get<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, ConfigError> {
        let id = (section.to_string(), key.to_string());
        match self.values.get(&id) {
            Some(raw) => {
                self.used.borrow_mut().insert(id);
                raw.parse::<T>().map_err(|_| {
                    ConfigError(format!("cannot parse `{raw}` for {section}.{key}"))
                })
            }
            None => Ok(default),
        }
    }

    fn get_string(&self, section: &str, key: &str, default: &str) -> String {
        let id = (section.to_string(), key.to_string());
        match self.values.get(&id) {
            Some(raw) => {
                self.used.borrow_mut().insert(id);
                raw.clone()
            }
            None => default.to_string(),
        }
    }

    fn reject_unknown(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        for id in self.values.keys() {
            if !used.contains(id) {
                return Err(ConfigError(format!("unknown key `{}.{}`", id.0, id.1)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub dvs: Vec<DepVar>,
    pub samples: Vec<Sample>,
    pub controls: Vec<ControlSet>,
    pub moments: bool,
    pub weighted_second_stage: bool,
    pub n_bins: usize,
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub kernel_teams: usize,
    pub kernel_max_size: usize,
    pub kernel_tie_rate: f64,
    pub fwl_instances: usize,
    pub fwl_max_rows: usize,
    pub scaling_rows_small: usize,
    pub scaling_rows_large: usize,
    pub scaling_reps: usize,
    pub scaling_max_ratio: f64,
    pub scaling_budget_secs: f64,
    pub recovery_czs: usize,
    pub recovery_workers: usize,
    pub projection_workers: usize,
    pub sorting_workers: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub synth: DgpParams,
    pub prepare: PrepareOptions,
    pub solver: SolverOptions,
    pub grid: GridConfig,
    pub verify: VerifyConfig,
    pub threads: usize,
}

fn parse_list<T, F: Fn(&str) -> Option<T>>(
    raw: &str,
    what: &str,
    parse: F,
) -> Result<Vec<T>, ConfigError> {
    let mut out = Vec::new();
    for item in raw.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        out.push(
            parse(item).ok_or_else(|| ConfigError(format!("unknown {what} `{item}`")))?,
        );
    }
    if out.is_empty() {
        return Err(ConfigError(format!("empty {what} list")));
    }
    Ok(out)
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::parse(text)?;
        let d = DgpParams::default();
        let synth = DgpParams {
            n_cz: ini.get("synthgen", "n_cz", d.n_cz)?,
            zipf_exponent: ini.get("synthgen", "zipf_exponent", d.zipf_exponent)?,
            city_pop_base: ini.get("synthgen", "city_pop_base", d.city_pop_base)?,
            n_workers: ini.get("synthgen", "n_workers", d.n_workers)?,
            teams_per_cz_scale: ini.get("synthgen", "teams_per_cz_scale", d.teams_per_cz_scale)?,
            team_size_target: ini.get("synthgen", "team_size_target", d.team_size_target)?,
            team_size_shape: ini.get("synthgen", "team_size_shape", d.team_size_shape)?,
            occ_cells_max: ini.get("synthgen", "occ_cells_max", d.occ_cells_max)?,
            estabs_per_firm: ini.get("synthgen", "estabs_per_firm", d.estabs_per_firm)?,
            nu: ini.get("synthgen", "nu", d.nu)?,
            psi_intercept: ini.get("synthgen", "psi_intercept", d.psi_intercept)?,
            psi_pop_slope: ini.get("synthgen", "psi_pop_slope", d.psi_pop_slope)?,
            psi_noise_sd: ini.get("synthgen", "psi_noise_sd", d.psi_noise_sd)?,
            firm_fe_pop_slope: ini.get("synthgen", "firm_fe_pop_slope", d.firm_fe_pop_slope)?,
            mu_noise_sd: ini.get("synthgen", "mu_noise_sd", d.mu_noise_sd)?,
            theta_plus_1: ini.get("synthgen", "theta_plus_1", d.theta_plus_1)?,
            theta_minus_1: ini.get("synthgen", "theta_minus_1", d.theta_minus_1)?,
            theta_plus_2: ini.get("synthgen", "theta_plus_2", d.theta_plus_2)?,
            theta_minus_2: ini.get("synthgen", "theta_minus_2", d.theta_minus_2)?,
            ee_intercept: ini.get("synthgen", "ee_intercept", d.ee_intercept)?,
            ee_pop_slope: ini.get("synthgen", "ee_pop_slope", d.ee_pop_slope)?,
            noise_sd: ini.get("synthgen", "noise_sd", d.noise_sd)?,
            base_wage_location: ini.get("synthgen", "base_wage_location", d.base_wage_location)?,
            base_wage_scale: ini.get("synthgen", "base_wage_scale", d.base_wage_scale)?,
            wage_location_pop_tilt: ini.get(
                "synthgen",
                "wage_location_pop_tilt",
                d.wage_location_pop_tilt,
            )?,
            wage_scale_pop_tilt: ini.get("synthgen", "wage_scale_pop_tilt", d.wage_scale_pop_tilt)?,
            hours_per_year: ini.get("synthgen", "hours_per_year", d.hours_per_year)?,
            year_prev: ini.get("synthgen", "year_prev", d.year_prev)?,
            year_curr: ini.get("synthgen", "year_curr", d.year_curr)?,
            seed: ini.get("synthgen", "seed", d.seed)?,
        };

        let fd = FilterConfig::default();
        let prepare = PrepareOptions {
            filter: FilterConfig {
                age_min: ini.get("panel", "age_min", fd.age_min)?,
                age_max: ini.get("panel", "age_max", fd.age_max)?,
                min_annual_wage: ini.get("panel", "min_annual_wage", fd.min_annual_wage)?,
            },
            row_error_budget: ini.get("panel", "row_error_budget", 0u64)?,
            base_year: ini.get("panel", "base_year", synth.year_curr)?,
            schema: Default::default(),
        };

        let sd = DemeanOptions::default();
        let solver = SolverOptions {
            demean: DemeanOptions {
                tol: ini.get("solver", "demean_tol", sd.tol)?,
                max_sweeps: ini.get("solver", "max_sweeps", sd.max_sweeps)?,
            },
            ..Default::default()
        };

        let dvs_raw = ini.get_string("decomposition", "dvs", "level,log,growth");
        let samples_raw = ini.get_string("decomposition", "samples", "all,stayers");
        let controls_raw = ini.get_string(
            "decomposition",
            "controls",
            "baseline,firm_fe,coworkers,coworkers_firm_fe",
        );
        let grid = GridConfig {
            dvs: parse_list(&dvs_raw, "dependent variable", DepVar::parse)?,
            samples: parse_list(&samples_raw, "sample", Sample::parse)?,
            controls: parse_list(&controls_raw, "control set", ControlSet::parse)?,
            moments: ini.get("decomposition", "moments", true)?,
            weighted_second_stage: ini.get("decomposition", "weighted_second_stage", false)?,
            n_bins: ini.get("decomposition", "n_bins", 50usize)?,
        };

        let verify = VerifyConfig {
            kernel_teams: ini.get("verify", "kernel_teams", 5_000)?,
            kernel_max_size: ini.get("verify", "kernel_max_size", 200)?,
            kernel_tie_rate: ini.get("verify", "kernel_tie_rate", 0.1)?,
            fwl_instances: ini.get("verify", "fwl_instances", 200)?,
            fwl_max_rows: ini.get("verify", "fwl_max_rows", 2_000)?,
            scaling_rows_small: ini.get("verify", "scaling_rows_small", 5_000_000)?,
            scaling_rows_large: ini.get("verify", "scaling_rows_large", 10_000_000)?,
            scaling_reps: ini.get("verify", "scaling_reps", 3)?,
            scaling_max_ratio: ini.get("verify", "scaling_max_ratio", 2.3)?,
            scaling_budget_secs: ini.get("verify", "scaling_budget_secs", 60.0)?,
            recovery_czs: ini.get("verify", "recovery_czs", 304)?,
            recovery_workers: ini.get("verify", "recovery_workers", 500_000)?,
            projection_workers: ini.get("verify", "projection_workers", 200_000)?,
            sorting_workers: ini.get("verify", "sorting_workers", 300_000)?,
        };

        let threads = ini.get("run", "threads", 0usize)?;
        ini.reject_unknown()?;
        Ok(RunConfig {
            synth,
            prepare,
            solver,
            grid,
            verify,
            threads,
        })
    }

    /// Every resolved value, for the run-metadata echo.
    pub fn echo_entries(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut kv = |k: &str, v: String| out.push((k.to_string(), v));
        for line in self.synth.echo().lines() {
            if let Some((k, v)) = line.split_once('=') {
                kv(&format!("synthgen.{}", k.trim()), v.trim().to_string());
            }
        }
        kv("panel.age_min", self.prepare.filter.age_min.to_string());
        kv("panel.age_max", self.prepare.filter.age_max.to_string());
        kv(
            "panel.min_annual_wage",
            self.prepare.filter.min_annual_wage.to_string(),
        );
        kv(
            "panel.row_error_budget",
            self.prepare.row_error_budget.to_string(),
        );
        kv("panel.base_year", self.prepare.base_year.to_string());
        kv("solver.demean_tol", self.solver.demean.tol.to_string());
        kv("solver.max_sweeps", self.solver.demean.max_sweeps.to_string());
        kv(
            "decomposition.dvs",
            self.grid
                .dvs
                .iter()
                .map(|d| d.label())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv(
            "decomposition.samples",
            self.grid
                .samples
                .iter()
                .map(|s| s.label())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv(
            "decomposition.controls",
            self.grid
                .controls
                .iter()
                .map(|c| c.label())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("decomposition.moments", self.grid.moments.to_string());
        kv(
            "decomposition.weighted_second_stage",
            self.grid.weighted_second_stage.to_string(),
        );
        kv("decomposition.n_bins", self.grid.n_bins.to_string());
        kv("run.threads", self.threads.to_string());
        // Fixed methodological choices, declared for reproducibility.
        kv("method.percentiles", "nearest_rank".to_string());
        kv(
            "method.residualization",
            "intercept+age+age_sq+gender, fit on the full paired sample".to_string(),
        );
        kv(
            "method.kernel_normalization",
            "team_size_minus_one".to_string(),
        );
        kv(
            "method.fe_normalization",
            "per-component observation-weighted mean of firm effects set to zero".to_string(),
        );
        kv(
            "method.second_stage",
            "unweighted CZ-level OLS, HC1 robust errors".to_string(),
        );
        kv("method.clustered_se", "CR1 small-sample factor".to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_config() {
        let cfg = RunConfig::from_str("").unwrap();
        assert_eq!(cfg.synth.n_cz, 304);
        assert_eq!(cfg.grid.dvs.len(), 3);
        assert_eq!(cfg.verify.recovery_workers, 500_000);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunConfig::from_str("[synthgen]\nn_czz = 3\n").unwrap_err();
        assert!(err.0.contains("unknown key"), "{}", err.0);
    }

    #[test]
    fn values_override_defaults() {
        let cfg = RunConfig::from_str(
            "[synthgen]\nn_cz = 12\nseed = 9\n[decomposition]\ndvs = level\nmoments = false\n",
        )
        .unwrap();
        assert_eq!(cfg.synth.n_cz, 12);
        assert_eq!(cfg.synth.seed, 9);
        assert_eq!(cfg.grid.dvs, vec![DepVar::Level]);
        assert!(!cfg.grid.moments);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(RunConfig::from_str("[synthgen\n").is_err());
        assert!(RunConfig::from_str("[synthgen]\nnocheck\n").is_err());
        assert!(RunConfig::from_str("stray = 1\n").is_err());
        assert!(RunConfig::from_str("[synthgen]\nn_cz = twelve\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = RunConfig::from_str("# comment\n\n[synthgen]\n; other\nn_cz = 7\n").unwrap();
        assert_eq!(cfg.synth.n_cz, 7);
    }

    #[test]
    fn echo_covers_all_sections() {
        let cfg = RunConfig::from_str("").unwrap();
        let echo = cfg.echo_entries();
        for prefix in ["synthgen.", "panel.", "solver.", "decomposition.", "method."] {
            assert!(echo.iter().any(|(k, _)| k.starts_with(prefix)), "{prefix}");
        }
    }
}
