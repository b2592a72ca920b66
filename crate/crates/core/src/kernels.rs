//! Parameter maps and transition kernels of the monotone flows.
//!
//! Two clocks are in use. The Pólya clock has `Y_0 = 0` and
//! `Y_t ~ Poy_{t,ρ}`; `polya_sum` runs on it. The condensation clock has
//! `Y_t ~ P_{1−t}` where `P_q = Cox(Λ/q)` is the `q`-condensation of the Cox
//! process directed by `Λ`, so `Y_0 ~ Cox(Λ)`; `cox_mixture` runs on it.
//! `poisson` and `polya_difference` live on `[0, ∞)`.

use crate::error::{domain, param, Result};
use crate::measures::{cell_counts, CellMeasure, PointConfig};
use crate::samplers::{sample_poisson_process, sample_polya_sum_on, thin};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Largest admissible time on the `[0, 1)` horizon.
pub const MAX_UNIT_TIME: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PolyaSum,
    Poisson,
    PolyaDifference,
    CoxMixture,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::PolyaSum => "polya_sum",
            Variant::Poisson => "poisson",
            Variant::PolyaDifference => "polya_difference",
            Variant::CoxMixture => "cox_mixture",
        }
    }

    pub fn horizon(&self) -> Horizon {
        match self {
            Variant::PolyaSum | Variant::CoxMixture => Horizon::Unit,
            Variant::Poisson | Variant::PolyaDifference => Horizon::HalfLine,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// `[0, 1)`, capped at [`MAX_UNIT_TIME`].
    Unit,
    /// `[0, ∞)`.
    HalfLine,
}

impl Horizon {
    pub fn contains(&self, t: f64) -> bool {
        match self {
            Horizon::Unit => (0.0..=MAX_UNIT_TIME).contains(&t),
            Horizon::HalfLine => t >= 0.0 && t.is_finite(),
        }
    }
}

/// Clock of a `[0,1)` flow, see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    Polya,
    Condensation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub intensity: CellMeasure,
}

/// Which flow to run and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub variant: Variant,
    /// Base measure: `ρ` of the Pólya/Poisson flows, the Gamma shapes of a
    /// Gamma-conjugate Cox environment, the (integer) base configuration of
    /// the Pólya difference flow.
    pub rho: CellMeasure,
    /// Pólya difference parameter for one-shot draws; the flow itself is
    /// parameterized by time.
    #[serde(default)]
    pub z: Option<f64>,
    /// Finite mixture environment for `cox_mixture`; `None` selects the
    /// Gamma-conjugate environment `Λ_i ~ Gamma(ρ_i, gamma_rate)`.
    #[serde(default)]
    pub mixture: Option<Vec<MixtureComponent>>,
    #[serde(default = "default_rate")]
    pub gamma_rate: f64,
}

fn default_rate() -> f64 {
    1.0
}

impl FlowSpec {
    pub fn polya_sum(rho: CellMeasure) -> Result<Self> {
        Self::build(Variant::PolyaSum, rho, None, None, 1.0)
    }

    pub fn poisson(rho: CellMeasure) -> Result<Self> {
        Self::build(Variant::Poisson, rho, None, None, 1.0)
    }

    pub fn polya_difference(rho: CellMeasure) -> Result<Self> {
        Self::build(Variant::PolyaDifference, rho, None, None, 1.0)
    }

    pub fn cox_gamma(shape: CellMeasure, rate: f64) -> Result<Self> {
        Self::build(Variant::CoxMixture, shape, None, None, rate)
    }

    pub fn cox_mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components.first().ok_or_else(|| param("a mixture needs at least one component"))?;
        let rho = CellMeasure::zero(*first.intensity.window());
        Self::build(Variant::CoxMixture, rho, None, Some(components), 1.0)
    }

    pub fn build(
        variant: Variant,
        rho: CellMeasure,
        z: Option<f64>,
        mixture: Option<Vec<MixtureComponent>>,
        gamma_rate: f64,
    ) -> Result<Self> {
        let spec = Self {
            variant,
            rho,
            z,
            mixture,
            gamma_rate,
        };
        let problems = spec.problems();
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(param(problems.join("; ")))
        }
    }

    /// Every violated constraint, in a stable order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.variant {
            Variant::PolyaSum | Variant::Poisson => {
                if self.rho.total() <= 0.0 {
                    out.push(format!("{}: rho must have positive total mass", self.variant));
                }
            }
            Variant::PolyaDifference => {
                if let Some(m) = self.rho.masses().iter().find(|m| m.fract() != 0.0) {
                    out.push(format!("polya_difference: rho masses must be integers, got {m}"));
                }
            }
            Variant::CoxMixture => match &self.mixture {
                Some(components) => {
                    if components.is_empty() {
                        out.push("cox_mixture: mixture must not be empty".into());
                    }
                    let total: f64 = components.iter().map(|c| c.weight).sum();
                    if components.iter().any(|c| !(c.weight >= 0.0)) {
                        out.push("cox_mixture: mixture weights must be ≥ 0".into());
                    }
                    if (total - 1.0).abs() > 1e-9 {
                        out.push(format!("cox_mixture: mixture weights sum to {total}, expected 1"));
                    }
                    if components.iter().any(|c| c.intensity.window() != self.rho.window()) {
                        out.push("cox_mixture: component windows must match rho's window".into());
                    }
                }
                None => {
                    if self.rho.total() <= 0.0 {
                        out.push("cox_mixture: Gamma shapes (rho) must have positive total mass".into());
                    }
                    if !(self.gamma_rate > 0.0 && self.gamma_rate.is_finite()) {
                        out.push(format!("cox_mixture: gamma_rate must be positive, got {}", self.gamma_rate));
                    }
                }
            },
        }
        if let Some(z) = self.z {
            if !(z > 0.0) {
                out.push(format!("z must be positive, got {z}"));
            }
        }
        out
    }

    pub fn horizon(&self) -> Horizon {
        self.variant.horizon()
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if self.horizon().contains(t) {
            Ok(())
        } else {
            Err(param(format!("time {t} outside the {} horizon", self.variant)))
        }
    }

    /// `ρ` read as a configuration (Pólya difference base).
    pub fn rho_config(&self) -> Result<PointConfig> {
        self.rho.to_config()
    }
}

/// Retention of a `q`-thinning of `Poy_{z,ρ}`: `γ(z,q) = zq/(1−z(1−q))`.
pub fn gamma_param(z: f64, q: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(param(format!("z must lie in (0,1), got {z}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(param(format!("q must lie in (0,1], got {q}")));
    }
    Ok(z * q / (1.0 - z * (1.0 - q)))
}

/// Same map for the Pólya difference process: `zq/(1+z(1−q))`.
pub fn gamma_param_difference(z: f64, q: f64) -> Result<f64> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(param(format!("z must be positive, got {z}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(param(format!("q must lie in (0,1], got {q}")));
    }
    Ok(z * q / (1.0 + z * (1.0 - q)))
}

fn check_order(spec: &FlowSpec, s: f64, t: f64) -> Result<()> {
    spec.check_time(s)?;
    spec.check_time(t)?;
    if s > t {
        return Err(param(format!("time order violated: s = {s} > t = {t}")));
    }
    Ok(())
}

/// Draws the increment `Y_t − Y_s` given `Y_s = state`.
pub fn forward_increment<R: Rng + ?Sized>(spec: &FlowSpec, s: f64, t: f64, state: &PointConfig, rng: &mut R) -> Result<PointConfig> {
    check_order(spec, s, t)?;
    spec.rho.window().check_same(state.window())?;
    let window = *state.window();
    if s == t {
        return Ok(PointConfig::empty(window));
    }
    match spec.variant {
        Variant::PolyaSum => sample_polya_sum_on((t - s) / (1.0 - s), &spec.rho, state, rng),
        Variant::Poisson => Ok(sample_poisson_process(&spec.rho.scaled(t - s)?, rng)),
        Variant::PolyaDifference => {
            let rest = spec
                .rho_config()?
                .difference(state)
                .map_err(|_| domain("polya_difference state exceeds the base configuration"))?;
            // GP_{(t−s)/(1+s), ρ−ν} is thinning with retention (t−s)/(1+t)
            thin(&rest, (t - s) / (1.0 + t), rng)
        }
        Variant::CoxMixture => {
            let q = 1.0 - t;
            let p = (1.0 - t) / (1.0 - s);
            let posterior = split_posterior(spec, q, p, state)?;
            Ok(posterior.sample_increment((1.0 - p) / q, &spec.rho, rng))
        }
    }
}

/// Retention probability of the backward kernel from time `t` to `s ≤ t`.
pub fn backward_ratio(variant: Variant, s: f64, t: f64) -> f64 {
    if s == t {
        return 1.0;
    }
    match variant {
        Variant::PolyaSum => s * (1.0 - t) / (t * (1.0 - s)),
        Variant::CoxMixture => (1.0 - t) / (1.0 - s),
        Variant::Poisson => s / t,
        Variant::PolyaDifference => s * (1.0 + t) / (t * (1.0 + s)),
    }
}

/// Draws `Y_s` given `Y_t = state_t` by independent thinning.
pub fn backward_thin<R: Rng + ?Sized>(spec: &FlowSpec, s: f64, t: f64, state_t: &PointConfig, rng: &mut R) -> Result<PointConfig> {
    check_order(spec, s, t)?;
    thin(state_t, backward_ratio(spec.variant, s, t), rng)
}

/// Conditional law of the directing environment after observing the kept
/// part of a `p`-thinning of `P_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoxPosterior {
    Mixture { weights: Vec<f64>, components: Vec<CellMeasure> },
    Gamma { shape: Vec<f64>, rate: f64 },
}

impl CoxPosterior {
    /// Draws `Λ` from the posterior and then `Poisson(scale · Λ)`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, scale: f64, like: &CellMeasure, rng: &mut R) -> PointConfig {
        let intensity = self.sample_environment(like, rng);
        sample_poisson_process(&intensity.scaled(scale).expect("finite scale"), rng)
    }

    pub fn sample_environment<R: Rng + ?Sized>(&self, like: &CellMeasure, rng: &mut R) -> CellMeasure {
        match self {
            CoxPosterior::Mixture { weights, components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, c) in weights.iter().zip(components) {
                    acc += w;
                    if u < acc {
                        return c.clone();
                    }
                }
                components.last().expect("nonempty mixture").clone()
            }
            CoxPosterior::Gamma { shape, rate } => {
                let masses = shape
                    .iter()
                    .map(|&a| {
                        if a == 0.0 {
                            0.0
                        } else {
                            Gamma::new(a, 1.0 / rate).expect("valid gamma").sample(rng)
                        }
                    })
                    .collect();
                CellMeasure::new(*like.window(), masses).expect("finite gamma draws")
            }
        }
    }

    /// Posterior mean of the increment count per cell for `Poisson(scale · Λ)`.
    pub fn mean_increment(&self, scale: f64) -> Vec<f64> {
        match self {
            CoxPosterior::Mixture { weights, components } => {
                let cells = components[0].masses().len();
                (0..cells)
                    .map(|i| scale * weights.iter().zip(components).map(|(w, c)| w * c.masses()[i]).sum::<f64>())
                    .collect()
            }
            CoxPosterior::Gamma { shape, rate } => shape.iter().map(|a| scale * a / rate).collect(),
        }
    }
}

/// Splitting-kernel posterior: the kept part of a `p`-thinning of
/// `P_q = Cox(Λ/q)` is `Cox(pΛ/q)`; condition `Λ` on observing `observed`.
pub fn split_posterior(spec: &FlowSpec, q: f64, p: f64, observed: &PointConfig) -> Result<CoxPosterior> {
    if spec.variant != Variant::CoxMixture {
        return Err(domain(format!("split_posterior needs cox_mixture, got {}", spec.variant)));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(param(format!("condensation level q must lie in (0,1], got {q}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(param(format!("thinning p must lie in (0,1], got {p}")));
    }
    spec.rho.window().check_same(observed.window())?;
    let counts = cell_counts(observed);
    let exposure = p / q;
    match &spec.mixture {
        Some(components) => {
            let logs: Vec<f64> = components
                .iter()
                .map(|c| {
                    let ll: f64 = c
                        .intensity
                        .masses()
                        .iter()
                        .zip(&counts)
                        .map(|(&lam, &n)| log_poisson(exposure * lam, n))
                        .sum();
                    c.weight.ln() + ll
                })
                .collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(domain("observed configuration has zero likelihood under every component"));
            }
            let raw: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
            let norm: f64 = raw.iter().sum();
            Ok(CoxPosterior::Mixture {
                weights: raw.into_iter().map(|w| w / norm).collect(),
                components: components.iter().map(|c| c.intensity.clone()).collect(),
            })
        }
        None => Ok(CoxPosterior::Gamma {
            shape: spec.rho.masses().iter().zip(&counts).map(|(a, &n)| a + n as f64).collect(),
            rate: spec.gamma_rate + exposure,
        }),
    }
}

fn log_poisson(lambda: f64, n: u64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    n as f64 * lambda.ln() - lambda - ln_gamma(n as f64 + 1.0)
}

/// Draws `Y_t` directly from its one-time marginal.
pub fn sample_marginal<R: Rng + ?Sized>(spec: &FlowSpec, t: f64, rng: &mut R) -> Result<PointConfig> {
    spec.check_time(t)?;
    let window = *spec.rho.window();
    match spec.variant {
        Variant::PolyaSum => {
            if t == 0.0 {
                Ok(PointConfig::empty(window))
            } else {
                sample_polya_sum_on(t, &spec.rho, &PointConfig::empty(window), rng)
            }
        }
        Variant::Poisson => Ok(sample_poisson_process(&spec.rho.scaled(t)?, rng)),
        Variant::PolyaDifference => thin(&spec.rho_config()?, t / (1.0 + t), rng),
        Variant::CoxMixture => {
            let prior = prior_environment(spec);
            Ok(prior.sample_increment(1.0 / (1.0 - t), &spec.rho, rng))
        }
    }
}

/// The directing environment before any observation.
pub fn prior_environment(spec: &FlowSpec) -> CoxPosterior {
    match &spec.mixture {
        Some(components) => CoxPosterior::Mixture {
            weights: components.iter().map(|c| c.weight).collect(),
            components: components.iter().map(|c| c.intensity.clone()).collect(),
        },
        None => CoxPosterior::Gamma {
            shape: spec.rho.masses().to_vec(),
            rate: spec.gamma_rate,
        },
    }
}
