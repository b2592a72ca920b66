//! TOML experiment configuration.
//!
//! ```toml
//! seed = 20240917
//! replicas = 100000
//! output_dir = "polyaflow-out"
//! suite = ["polya-marginals", "duality"]
//! grid = [0.25, 0.5, 0.75]
//!
//! [flow]
//! variant = "polya_sum"
//! rho = { lo = 0.0, hi = 1.0, masses = [2.0] }
//!
//! [params]
//! alpha = 0.01
//! ```

use crate::error::{param, Error, Result};
use crate::kernels::{FlowSpec, MAX_UNIT_TIME};
use crate::measures::{CellMeasure, Window};
use crate::suites;
use crate::verify::stats::MIN_SAMPLES;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 20240917;

/// Knobs of the individual suites. Every field has a default, shown by
/// `list-suites --verbose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteParams {
    /// Family-wise significance level; split evenly over the statistical
    /// reports of a suite.
    pub alpha: f64,
    pub sampling_z: f64,
    pub sampling_q: f64,
    pub condensation_gamma: f64,
    pub condensation_z: f64,
    /// Times at which the Pólya exit limit is compared with `Gamma(ρ(B),1)`.
    pub exit_times: Vec<f64>,
    pub exit_ks_max: f64,
    /// Times swept by the `exit-limit` subcommand.
    pub exit_sweep: Vec<f64>,
    pub mixture_grid: Vec<f64>,
    pub duality_s: f64,
    pub duality_t: f64,
    pub generator_s: f64,
    pub generator_steps: Vec<f64>,
    pub generator_rel_tol: f64,
    pub enumeration_max_count: u64,
    pub quadrature_nodes: usize,
    pub limit_replicas: usize,
    pub poisson_horizon: f64,
    pub poisson_band: f64,
    pub poisson_coverage: f64,
    pub difference_horizons: Vec<f64>,
    pub thinning_q: Vec<f64>,
    pub laplace_z: f64,
    pub mecke_z: f64,
    pub laplace_f: f64,
    /// Grid points per path of the `monotonicity` suite.
    pub monotone_grid_points: usize,
    /// Paths per suite written to `paths.jsonl`.
    pub paths_per_suite: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            sampling_z: 0.6,
            sampling_q: 0.5,
            condensation_gamma: 0.2,
            condensation_z: 0.6,
            exit_times: vec![0.999],
            exit_ks_max: 0.02,
            exit_sweep: vec![0.9, 0.99, 0.999, 0.9999],
            mixture_grid: vec![0.4, 0.8],
            duality_s: 0.3,
            duality_t: 0.6,
            generator_s: 0.3,
            generator_steps: vec![1e-3, 1e-4],
            generator_rel_tol: 1e-2,
            enumeration_max_count: 400,
            quadrature_nodes: 64,
            limit_replicas: 10_000,
            poisson_horizon: 1000.0,
            poisson_band: 0.15,
            poisson_coverage: 0.99,
            difference_horizons: vec![10.0, 100.0, 1000.0],
            thinning_q: vec![0.7, 0.4],
            laplace_z: 0.6,
            mecke_z: 0.6,
            laplace_f: 0.5,
            monotone_grid_points: 10,
            paths_per_suite: 4,
        }
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub flow: FlowSpec,
    pub grid: Vec<f64>,
    pub replicas: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub suite: Vec<String>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub params: SuiteParams,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_output() -> PathBuf {
    PathBuf::from("polyaflow-out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let rho = CellMeasure::new(Window::unit(1).expect("unit window"), vec![2.0]).expect("finite mass");
        Self {
            flow: FlowSpec::polya_sum(rho).expect("valid default flow"),
            grid: vec![0.25, 0.5, 0.75],
            replicas: 100_000,
            seed: DEFAULT_SEED,
            suite: suites::registry().iter().map(|s| s.name.to_string()).collect(),
            output_dir: default_output(),
            params: SuiteParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML without semantic validation.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| param(format!("config: {}", e.message())))
    }

    /// Parses and validates; the error lists every violated constraint.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config = Self::parse(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Parameter(problems.join("\n")))
        }
    }

    /// Every violated constraint, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out: Vec<String> = self.flow.problems().into_iter().map(|p| format!("flow: {p}")).collect();
        if self.replicas < 1 {
            out.push(format!("replicas must be ≥ 1, got {}", self.replicas));
        } else if self.replicas < MIN_SAMPLES && !self.suite.is_empty() {
            out.push(format!(
                "replicas must be ≥ {MIN_SAMPLES} for the goodness-of-fit tests, got {}",
                self.replicas
            ));
        }
        let horizon = self.flow.horizon();
        if self.grid.is_empty() {
            out.push("grid must not be empty".into());
        }
        for (k, &t) in self.grid.iter().enumerate() {
            if !horizon.contains(t) {
                out.push(format!("grid[{k}] = {t} outside the {} horizon", self.flow.variant));
            }
            if k > 0 && self.grid[k - 1] >= t {
                out.push(format!("grid must be strictly increasing at index {k}"));
            }
        }
        let known = suites::registry();
        for name in &self.suite {
            if !known.iter().any(|s| s.name == name) {
                out.push(format!("unknown suite \"{name}\""));
            }
        }
        if self.suite.iter().any(|s| s == "backward-consistency") && self.grid.len() < 2 {
            out.push("backward-consistency needs a grid of at least 2 times".into());
        }
        if self.suite.iter().any(|s| needs_polya_rho(s)) && !(self.flow.rho.total() > 0.0) {
            out.push("flow.rho must have positive total mass for the selected suites".into());
        }
        out.extend(self.params.problems());
        out
    }

    /// Total base mass `ρ(B)` used by the one-window suites.
    pub fn rho_total(&self) -> f64 {
        self.flow.rho.total()
    }
}

fn needs_polya_rho(suite: &str) -> bool {
    suite != "polya-marginals" && suite != "backward-consistency"
}

fn unit_open(t: f64) -> bool {
    t > 0.0 && t < 1.0
}

impl SuiteParams {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                out.push(format!("params.{msg}"));
            }
        };
        need(unit_open(self.alpha), format!("alpha must lie in (0,1), got {}", self.alpha));
        need(
            unit_open(self.sampling_z),
            format!("sampling_z must lie in (0,1), got {}", self.sampling_z),
        );
        need(
            self.sampling_q > 0.0 && self.sampling_q <= 1.0,
            format!("sampling_q must lie in (0,1], got {}", self.sampling_q),
        );
        need(
            unit_open(self.condensation_z),
            format!("condensation_z must lie in (0,1), got {}", self.condensation_z),
        );
        need(
            self.condensation_gamma >= 0.0 && self.condensation_gamma <= self.condensation_z,
            format!(
                "condensation_gamma must lie in [0, condensation_z], got {}",
                self.condensation_gamma
            ),
        );
        need(!self.exit_times.is_empty(), "exit_times must not be empty".into());
        for &t in self.exit_times.iter().chain(&self.exit_sweep) {
            need(
                t > 0.0 && t <= MAX_UNIT_TIME,
                format!("exit time {t} must lie in (0, {MAX_UNIT_TIME}]"),
            );
        }
        need(
            self.exit_ks_max > 0.0,
            format!("exit_ks_max must be positive, got {}", self.exit_ks_max),
        );
        need(
            self.mixture_grid.len() == 2
                && unit_open(self.mixture_grid[0])
                && self.mixture_grid[0] < self.mixture_grid[1]
                && self.mixture_grid[1] <= MAX_UNIT_TIME,
            format!("mixture_grid must be two increasing times in (0,1), got {:?}", self.mixture_grid),
        );
        need(
            unit_open(self.duality_s) && self.duality_s < self.duality_t && self.duality_t <= MAX_UNIT_TIME,
            format!(
                "duality times must satisfy 0 < s < t < 1, got ({}, {})",
                self.duality_s, self.duality_t
            ),
        );
        need(
            unit_open(self.generator_s),
            format!("generator_s must lie in (0,1), got {}", self.generator_s),
        );
        need(
            self.generator_steps.len() >= 2
                && self
                    .generator_steps
                    .iter()
                    .all(|&h| h > 0.0 && self.generator_s + h <= MAX_UNIT_TIME)
                && self.generator_steps.windows(2).all(|w| w[0] > w[1]),
            format!(
                "generator_steps must be ≥ 2 decreasing positive steps, got {:?}",
                self.generator_steps
            ),
        );
        need(
            self.generator_rel_tol > 0.0,
            format!("generator_rel_tol must be positive, got {}", self.generator_rel_tol),
        );
        need(
            self.enumeration_max_count >= 10,
            format!("enumeration_max_count must be ≥ 10, got {}", self.enumeration_max_count),
        );
        need(
            self.quadrature_nodes >= 2,
            format!("quadrature_nodes must be ≥ 2, got {}", self.quadrature_nodes),
        );
        need(
            self.limit_replicas >= 1,
            format!("limit_replicas must be ≥ 1, got {}", self.limit_replicas),
        );
        need(
            self.poisson_horizon > 0.0 && self.poisson_horizon.is_finite(),
            format!("poisson_horizon must be positive, got {}", self.poisson_horizon),
        );
        need(
            self.poisson_band > 0.0,
            format!("poisson_band must be positive, got {}", self.poisson_band),
        );
        need(
            unit_open(self.poisson_coverage),
            format!("poisson_coverage must lie in (0,1), got {}", self.poisson_coverage),
        );
        need(
            !self.difference_horizons.is_empty()
                && self.difference_horizons[0] > 0.0
                && self.difference_horizons.windows(2).all(|w| w[0] < w[1])
                && self.difference_horizons.iter().all(|t| t.is_finite()),
            format!(
                "difference_horizons must be increasing positive times, got {:?}",
                self.difference_horizons
            ),
        );
        need(
            self.thinning_q.len() == 2 && self.thinning_q.iter().all(|&q| q > 0.0 && q <= 1.0),
            format!("thinning_q must be two retentions in (0,1], got {:?}", self.thinning_q),
        );
        need(
            unit_open(self.laplace_z),
            format!("laplace_z must lie in (0,1), got {}", self.laplace_z),
        );
        need(unit_open(self.mecke_z), format!("mecke_z must lie in (0,1), got {}", self.mecke_z));
        need(self.laplace_f >= 0.0, format!("laplace_f must be ≥ 0, got {}", self.laplace_f));
        need(
            self.monotone_grid_points >= 2,
            format!("monotone_grid_points must be ≥ 2, got {}", self.monotone_grid_points),
        );
        out
    }
}

/// Seed precedence: command-line flag, then the `POLYAFLOW_SEED`
/// environment variable, then the config file.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| param(format!("POLYAFLOW_SEED is not a 64-bit unsigned integer: {v:?}"))),
        None => Ok(config),
    }
}
