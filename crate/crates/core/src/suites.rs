//! Named verification suites and the experiment runner.
//!
//! Every suite draws from its own stream `RngStream::new(seed, index)` with
//! `index` its position in [`registry`], so a suite's reports do not depend
//! on which other suites were selected. Statistical reports within a suite
//! are Bonferroni corrected (`alpha / m`).

use crate::config::{ExperimentConfig, SuiteParams};
use crate::dist::{binomial_pmf, nb_pmf, poisson_pmf};
use crate::error::{param, Error, Result};
use crate::flows::discrete::{generator_apply, mecke_polya_exact, semigroup_derivative, DiscreteModel, ModelClock};
use crate::flows::{backward_resample, exit_limit, sample_extremal_flow, simulate_path, Path};
use crate::kernels::{gamma_param, Clock, FlowSpec, Variant, MAX_UNIT_TIME};
use crate::mc::{replicate, replicate_over};
use crate::measures::{CellMeasure, PointConfig, StepFunction};
use crate::rng::{RngStream, RNG_ALGORITHM};
use crate::samplers::{sample_gamma_measure, sample_poisson_process, sample_polya_sum, sample_polya_sum_on, thin, PolyaParams};
use crate::verify::{
    chi_square_counts, chi_square_two_sample_report, duality_check, duality_exact_report, duality_mc, ks_distance, laplace_mc,
    laplace_poisson_exact, laplace_polya_exact, mc_agreement, mecke_gamma_sides, mecke_polya_sides, CheckKind, TestReport,
};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Gamma};
use std::io::Write;

/// A registered suite: what it checks and which result it rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SuiteInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub anchor: &'static str,
}

const REGISTRY: &[SuiteInfo] = &[
    SuiteInfo {
        name: "sampling-lemma",
        description: "q-thinning of Poy_{z,rho} has the NB(rho(B), gamma(z,q)) window count",
        anchor: "Lemma, sampling from the Polya sum process: gamma = gamma(z,q) = zq/(1-z(1-q))",
    },
    SuiteInfo {
        name: "condensation-lemma",
        description: "Poy_{(z-g)/(1-g), rho+nu} on top of nu ~ Poy_{g,rho} has the NB(rho(B), z) window count",
        anchor: "Lemma, condensation of the Polya sum process: then P = Poy_{z,rho}",
    },
    SuiteInfo {
        name: "polya-marginals",
        description: "one-time window counts of simulated paths of the configured flow at every positive grid time",
        anchor: "Remark on the marginal chain: Y_t(B) ~ NB(rho(B), t)",
    },
    SuiteInfo {
        name: "backward-consistency",
        description: "backward resampling from the last grid time leaves the earlier window-count laws invariant (two-sample)",
        anchor: "Remark on Gibbsianness: Pr pi_T = Pr",
    },
    SuiteInfo {
        name: "exit-limit",
        description: "KS distance of (1-t) Y_t(B) on the Polya clock from Gamma(rho(B), 1)",
        anchor: "Lemma on the exit limit exp(-t/(1-t) int 1-e^{-f} dnu) and the theorem with the Poisson-Gamma directing measure",
    },
    SuiteInfo {
        name: "mixture-representation",
        description: "Gamma environment plus extremal flow against direct Polya flow: both marginals and the increment (two-sample)",
        anchor: "Theorem, mixture over extremal processes: Pr(Phi) = int P_nu(Phi) R(dnu)",
    },
    SuiteInfo {
        name: "duality",
        description: "duality identity by exact enumeration on one cell (both clocks) and by Monte Carlo against the enumerated value",
        anchor: "Corollary, duality: int p*_{s,t}(., psi) phi dP_{1-t} = int psi p_{s,t}(., phi) dP_{1-s}",
    },
    SuiteInfo {
        name: "generator",
        description:
            "Palm generator formula against (T_{s,s+h} phi - phi)/h on one cell for three test functions; Polya-clock ratio reported",
        anchor: "Lemma, the generator of Y is given by A_s phi(nu) = ((1-s) P^!(zeta=0))^{-1} int_{zeta=1} (phi(nu+mu) - phi(nu)) dP^!",
    },
    SuiteInfo {
        name: "mecke",
        description: "Polya sum Mecke identity (exact and Monte Carlo) and the Gamma measure Campbell identity with h = e^{-Q_i}",
        anchor: "Papangelou kernel z(rho+mu) of the Polya sum process; integration by parts formula C_R(h) of the Poisson-Gamma measure",
    },
    SuiteInfo {
        name: "variant-limits",
        description: "Poisson flow Y_T/T concentrates at rho(B); Polya difference flow terminal state equals rho",
        anchor: "Closing remark on the Poisson and Polya difference flows: Q = rho a.s.",
    },
    SuiteInfo {
        name: "thinning-semigroup",
        description: "thinning twice with q1, q2 equals thinning once with q1 q2 on Polya sum samples",
        anchor: "Thinning lemma and the Markov property of the backward dynamics",
    },
    SuiteInfo {
        name: "laplace-functionals",
        description: "Monte Carlo Laplace functionals of Poisson and Polya sum samples against their closed forms; monotonicity in f",
        anchor: "Laplace functionals exp(-Y_t(f)) of the exit-limit lemma",
    },
    SuiteInfo {
        name: "monotonicity",
        description: "simulates paths of all four flows on a fine grid; every state must lie below its successor",
        anchor: "Construction of Y as a Markov process with increasing paths",
    },
];

pub fn registry() -> &'static [SuiteInfo] {
    REGISTRY
}

pub fn find(name: &str) -> Option<(usize, &'static SuiteInfo)> {
    REGISTRY.iter().enumerate().find(|(_, s)| s.name == name)
}

/// Everything one suite produced.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub suite: &'static str,
    pub reports: Vec<TestReport>,
    /// A few sample paths kept for `paths.jsonl`.
    pub paths: Vec<Path>,
    /// Consecutive state pairs compared with `config_leq`.
    pub path_steps: u64,
    pub violations: u64,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub replicas: usize,
    pub flow: FlowSpec,
    pub outcomes: Vec<SuiteOutcome>,
    /// Monotonicity over every simulated path of the run.
    pub monotonicity: TestReport,
}

impl RunOutput {
    pub fn reports(&self) -> Vec<TestReport> {
        self.outcomes
            .iter()
            .flat_map(|o| o.reports.iter().cloned())
            .chain(std::iter::once(self.monotonicity.clone()))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.monotonicity.passed && self.outcomes.iter().all(SuiteOutcome::passed)
    }

    pub fn path_steps(&self) -> u64 {
        self.outcomes.iter().map(|o| o.path_steps).sum()
    }

    pub fn violations(&self) -> u64 {
        self.outcomes.iter().map(|o| o.violations).sum()
    }
}

struct Ctx<'a> {
    suite: &'static str,
    config: &'a ExperimentConfig,
    params: &'a SuiteParams,
    stream: RngStream,
    n: usize,
    reports: Vec<TestReport>,
    kept: Vec<Path>,
    steps: u64,
    violations: u64,
}

impl<'a> Ctx<'a> {
    fn seed(&self) -> u64 {
        self.config.seed
    }

    fn alpha(&self) -> f64 {
        self.params.alpha
    }

    fn push(&mut self, report: TestReport) {
        let name = format!("{}:{}", self.suite, report.name);
        self.reports.push(report.renamed(name));
    }

    fn paths(&mut self, paths: &[Path]) {
        for p in paths {
            self.steps += p.len().saturating_sub(1) as u64;
            self.violations += p.monotonicity_violations() as u64;
        }
        let room = self.params.paths_per_suite.saturating_sub(self.kept.len());
        self.kept.extend(paths.iter().take(room).cloned());
    }

    fn rho(&self) -> &CellMeasure {
        &self.config.flow.rho
    }

    fn rho_b(&self) -> f64 {
        self.config.flow.rho.total()
    }

    /// One-cell measure carrying `ρ(B)`.
    fn rho_one_cell(&self) -> Result<CellMeasure> {
        let w = self.rho().window();
        CellMeasure::new(crate::measures::Window::new(w.lo(), w.hi(), 1)?, vec![self.rho_b()])
    }

    fn polya_spec(&self) -> Result<FlowSpec> {
        FlowSpec::polya_sum(self.rho().clone())
    }

    fn simulate(&mut self, spec: &FlowSpec, grid: &[f64], n: usize, block: u64) -> Result<Vec<Path>> {
        let paths = collect(replicate(n, self.stream, block, |rng| simulate_path(spec, grid, rng)))?;
        self.paths(&paths);
        Ok(paths)
    }
}

fn collect<T>(items: Vec<Result<T>>) -> Result<Vec<T>> {
    items.into_iter().collect()
}

fn totals(configs: impl IntoIterator<Item = impl std::borrow::Borrow<PointConfig>>) -> Vec<u64> {
    configs.into_iter().map(|c| c.borrow().total()).collect()
}

/// Pmf of the window count `Y_t(B)` of the configured flow.
fn window_marginal(spec: &FlowSpec, t: f64) -> Box<dyn Fn(u64) -> f64 + '_> {
    let rho_b = spec.rho.total();
    match spec.variant {
        Variant::PolyaSum => Box::new(move |n| nb_pmf(rho_b, t, n)),
        Variant::Poisson => Box::new(move |n| poisson_pmf(t * rho_b, n)),
        Variant::PolyaDifference => Box::new(move |n| binomial_pmf(rho_b.round() as u64, t / (1.0 + t), n)),
        Variant::CoxMixture => match &spec.mixture {
            None => {
                let z = 1.0 / (1.0 + spec.gamma_rate * (1.0 - t));
                Box::new(move |n| nb_pmf(rho_b, z, n))
            }
            Some(components) => Box::new(move |n| {
                components
                    .iter()
                    .map(|c| c.weight * poisson_pmf(c.intensity.total() / (1.0 - t), n))
                    .sum()
            }),
        },
    }
}

fn sampling_lemma(ctx: &mut Ctx) -> Result<()> {
    let (z, q) = (ctx.params.sampling_z, ctx.params.sampling_q);
    let params = PolyaParams::new(z, ctx.rho().clone())?;
    let gamma = gamma_param(z, q)?;
    let draws = collect(replicate(ctx.n, ctx.stream, 1, |rng| thin(&sample_polya_sum(&params, rng), q, rng)))?;
    let rho_b = ctx.rho_b();
    let report = chi_square_counts(
        "thinned-count",
        &totals(&draws),
        &|n| nb_pmf(rho_b, gamma, n),
        ctx.alpha(),
        ctx.seed(),
    )?;
    ctx.push(report.with_note(format!("NB({rho_b}, {gamma:.10})")));
    Ok(())
}

fn condensation_lemma(ctx: &mut Ctx) -> Result<()> {
    let (g, z) = (ctx.params.condensation_gamma, ctx.params.condensation_z);
    let rho = ctx.rho().clone();
    let draws = collect(replicate(ctx.n, ctx.stream, 2, |rng| {
        let nu = if g > 0.0 {
            sample_polya_sum(&PolyaParams::new(g, rho.clone())?, rng)
        } else {
            PointConfig::empty(*rho.window())
        };
        let mu = sample_polya_sum_on((z - g) / (1.0 - g), &rho, &nu, rng)?;
        nu.superpose(&mu)
    }))?;
    let rho_b = ctx.rho_b();
    let report = chi_square_counts(
        "two-stage-count",
        &totals(&draws),
        &|n| nb_pmf(rho_b, z, n),
        ctx.alpha(),
        ctx.seed(),
    )?;
    ctx.push(report.with_note(format!("NB({rho_b}, {z})")));
    Ok(())
}

fn polya_marginals(ctx: &mut Ctx) -> Result<()> {
    let spec = ctx.config.flow.clone();
    let grid = ctx.config.grid.clone();
    let paths = ctx.simulate(&spec, &grid, ctx.n, 3)?;
    for (k, &t) in grid.iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        let counts: Vec<u64> = paths.iter().map(|p| p.states()[k].total()).collect();
        let pmf = window_marginal(&spec, t);
        let report = chi_square_counts(&format!("t={t}"), &counts, &*pmf, ctx.alpha(), ctx.seed())?;
        ctx.push(report);
    }
    Ok(())
}

fn backward_consistency(ctx: &mut Ctx) -> Result<()> {
    let spec = ctx.config.flow.clone();
    let grid = ctx.config.grid.clone();
    let pivot = grid.len() - 1;
    let direct = ctx.simulate(&spec, &grid, ctx.n, 4)?;
    let source = ctx.simulate(&spec, &grid, ctx.n, 5)?;
    let resampled = collect(replicate_over(&source, ctx.stream, 6, |p, rng| {
        backward_resample(&spec, p, pivot, rng)
    }))?;
    ctx.paths(&resampled);
    for (k, &t) in grid.iter().enumerate().take(pivot) {
        if t == 0.0 {
            continue;
        }
        let a: Vec<u64> = direct.iter().map(|p| p.states()[k].total()).collect();
        let b: Vec<u64> = resampled.iter().map(|p| p.states()[k].total()).collect();
        ctx.push(chi_square_two_sample_report(&format!("t={t}"), &a, &b, ctx.alpha(), ctx.seed())?);
    }
    Ok(())
}

fn exit_limit_suite(ctx: &mut Ctx) -> Result<()> {
    let spec = ctx.polya_spec()?;
    let rho_b = ctx.rho_b();
    let gamma = Gamma::new(rho_b, 1.0).map_err(|e| param(e.to_string()))?;
    for (j, &t) in ctx.params.exit_times.clone().iter().enumerate() {
        let mut grid: Vec<f64> = ctx.config.grid.iter().copied().filter(|&g| g < t && g <= MAX_UNIT_TIME).collect();
        if ctx.config.flow.horizon() != spec.horizon() {
            grid.clear();
        }
        grid.push(t);
        let paths = ctx.simulate(&spec, &grid, ctx.n, 16 + j as u64)?;
        let scaled = collect(paths.iter().map(|p| exit_limit(p).map(|m| m.total())).collect())?;
        let ks = ks_distance(&scaled, &|x| gamma.cdf(x))?;
        let report = TestReport::numeric(format!("ks-t={t}"), ks, ks, scaled.len() as u64, ctx.params.exit_ks_max, ctx.seed())
            .with_note(format!("(1-t) Y_t(B) against Gamma({rho_b}, 1)"));
        ctx.push(report);
    }
    Ok(())
}

/// KS distances of `(1−t) Y_t(B)` from `Gamma(ρ(B), 1)` for each `t` in
/// `times`, one independent batch of `n` paths per time.
pub fn exit_limit_sweep(rho: &CellMeasure, times: &[f64], n: usize, stream: RngStream) -> Result<Vec<(f64, f64)>> {
    let spec = FlowSpec::polya_sum(rho.clone())?;
    let gamma = Gamma::new(rho.total(), 1.0).map_err(|e| param(e.to_string()))?;
    let mut out = Vec::with_capacity(times.len());
    for (j, &t) in times.iter().enumerate() {
        let paths = collect(replicate(n, stream, 64 + j as u64, |rng| simulate_path(&spec, &[t], rng)))?;
        let scaled = collect(paths.iter().map(|p| exit_limit(p).map(|m| m.total())).collect())?;
        out.push((t, ks_distance(&scaled, &|x| gamma.cdf(x))?));
    }
    Ok(out)
}

fn mixture_representation(ctx: &mut Ctx) -> Result<()> {
    let spec = ctx.polya_spec()?;
    let grid = ctx.params.mixture_grid.clone();
    let direct = ctx.simulate(&spec, &grid, ctx.n, 7)?;
    let rho = ctx.rho().clone();
    let mixed = collect(replicate(ctx.n, ctx.stream, 8, |rng| {
        let nu = sample_gamma_measure(&rho, rng);
        sample_extremal_flow(&nu, &grid, Clock::Polya, rng)
    }))?;
    ctx.paths(&mixed);
    let first = |ps: &[Path]| -> Vec<u64> { ps.iter().map(|p| p.states()[0].total()).collect() };
    let second = |ps: &[Path]| -> Vec<u64> { ps.iter().map(|p| p.states()[1].total()).collect() };
    let (a0, b0) = (first(&direct), first(&mixed));
    let (a1, b1) = (second(&direct), second(&mixed));
    let inc_a: Vec<u64> = a1.iter().zip(&a0).map(|(x, y)| x - y).collect();
    let inc_b: Vec<u64> = b1.iter().zip(&b0).map(|(x, y)| x - y).collect();
    let seed = ctx.seed();
    ctx.push(chi_square_two_sample_report(
        &format!("t={}", grid[0]),
        &a0,
        &b0,
        ctx.alpha(),
        seed,
    )?);
    ctx.push(chi_square_two_sample_report(
        &format!("t={}", grid[1]),
        &a1,
        &b1,
        ctx.alpha(),
        seed,
    )?);
    ctx.push(chi_square_two_sample_report("increment", &inc_a, &inc_b, ctx.alpha(), seed)?);
    Ok(())
}

/// Test functions of the duality suite: `φ = 1{n ≤ 2}`, `ψ = 1{n = 1}`.
pub fn duality_phi(n: &[u64]) -> f64 {
    f64::from(n.iter().sum::<u64>() <= 2)
}

pub fn duality_psi(n: &[u64]) -> f64 {
    f64::from(n.iter().sum::<u64>() == 1)
}

fn duality_suite(ctx: &mut Ctx) -> Result<()> {
    let (s, t) = (ctx.params.duality_s, ctx.params.duality_t);
    let rho_b = ctx.rho_b();
    let max = ctx.params.enumeration_max_count;
    let polya = DiscreteModel::new(vec![rho_b], max, ModelClock::Polya, t)?;
    let exact = duality_exact_report(&polya, s, t, &duality_phi, &duality_psi, 1e-9)?;
    let lhs_exact = exact.statistic;
    ctx.push(exact.renamed("exact-polya-clock"));
    let cond = DiscreteModel::new(vec![rho_b], max, ModelClock::Condensation { rate: 1.0 }, t)?;
    ctx.push(duality_exact_report(&cond, s, t, &duality_phi, &duality_psi, 1e-9)?.renamed("exact-condensation-clock"));

    let spec = FlowSpec::polya_sum(ctx.rho_one_cell()?)?;
    let seed = ctx.seed();
    ctx.push(duality_check(&spec, s, t, &duality_phi, &duality_psi, ctx.n, ctx.stream)?.renamed("mc"));
    let (lhs, rhs) = duality_mc(&spec, s, t, &duality_phi, &duality_psi, ctx.n, ctx.stream)?;
    ctx.push(mc_agreement("mc-lhs-vs-exact", &lhs, lhs_exact, seed));
    ctx.push(mc_agreement("mc-rhs-vs-exact", &rhs, lhs_exact, seed));
    Ok(())
}

/// A named test function on count vectors.
pub type NamedCountFn = (&'static str, fn(&[u64]) -> f64);

/// The three test functions of the generator suite.
pub fn generator_test_functions() -> [NamedCountFn; 3] {
    [
        ("indicator-le-2", |n| f64::from(n[0] <= 2)),
        ("exp-half", |n| (-(n[0] as f64) / 2.0).exp()),
        ("n-over-1-plus-n", |n| n[0] as f64 / (1.0 + n[0] as f64)),
    ]
}

/// States at which the generator is compared.
pub const GENERATOR_STATES: [u64; 4] = [0, 1, 2, 3];

/// Normalized sup error `max_ν |𝒜φ(ν) − D_h φ(ν)| / max_ν |𝒜φ(ν)|` per step `h`.
pub fn generator_errors(model: &DiscreteModel, s: f64, steps: &[f64], phi: &(dyn Fn(&[u64]) -> f64 + Sync)) -> Result<Vec<f64>> {
    let gen: Vec<f64> = GENERATOR_STATES
        .iter()
        .map(|&n| generator_apply(model, s, &phi, &[n]))
        .collect::<Result<_>>()?;
    let scale = gen.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if scale == 0.0 {
        return Err(param("test function with vanishing generator"));
    }
    steps
        .iter()
        .map(|&h| {
            let mut err = 0.0f64;
            for (k, &n) in GENERATOR_STATES.iter().enumerate() {
                err = err.max((semigroup_derivative(model, s, h, &phi, &[n])? - gen[k]).abs());
            }
            Ok(err / scale)
        })
        .collect()
}

fn generator_suite(ctx: &mut Ctx) -> Result<()> {
    let s = ctx.params.generator_s;
    let steps = ctx.params.generator_steps.clone();
    let h_max = steps.iter().cloned().fold(0.0, f64::max);
    let rho_b = ctx.rho_b();
    let max = ctx.params.enumeration_max_count;
    let cond = DiscreteModel::new(vec![rho_b], max, ModelClock::Condensation { rate: 1.0 }, s + h_max)?;
    let tol = ctx.params.generator_rel_tol;
    for (name, phi) in generator_test_functions() {
        let errs = generator_errors(&cond, s, &steps, &phi)?;
        let last = *errs.last().expect("at least two steps");
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let mut report = TestReport::numeric(name, last, last, 0, tol, 0).with_note(format!(
            "condensation clock, s = {s}; relative errors {:?} at h = {:?}; decreasing: {decreasing}",
            errs, steps
        ));
        report.passed &= decreasing;
        ctx.push(report);
    }
    // Verbatim formula with P := law(Y_s) on the Pólya clock: the semigroup
    // derivative exceeds it by exactly 1/s.
    let polya = DiscreteModel::new(vec![rho_b], max, ModelClock::Polya, s + h_max)?;
    let h = *steps.last().expect("at least two steps");
    let phi = generator_test_functions()[1].1;
    let gen = generator_apply(&polya, s, &phi, &[1])?;
    let deriv = semigroup_derivative(&polya, s, h, &phi, &[1])?;
    let ratio = gen / deriv;
    let report = TestReport::numeric("polya-clock-ratio", ratio, (ratio - s).abs() / s, 0, tol, 0).with_note(format!(
        "on the Polya clock the generator formula equals {ratio:.6} times (T_{{s,s+h}} phi - phi)/h at nu = 1, h = {h}; the factor is s = {s}"
    ));
    ctx.push(report);
    Ok(())
}

/// Closed form `Σ_i ρ_i 2^{−(ρ_i+1)}` of both sides of the Gamma Campbell
/// identity with `h(i, Q) = e^{−Q_i}`.
pub fn mecke_gamma_closed_form(rho: &CellMeasure) -> f64 {
    rho.masses().iter().map(|&r| r * 2f64.powf(-(r + 1.0))).sum()
}

fn mecke_suite(ctx: &mut Ctx) -> Result<()> {
    let z = ctx.params.mecke_z;
    let rho_b = ctx.rho_b();
    let seed = ctx.seed();
    let mut worst = 0.0f64;
    for k in 0..6u64 {
        let (l, r) = mecke_polya_exact(z, &[rho_b], ctx.params.enumeration_max_count, &move |_, mu: &[u64]| {
            f64::from(mu[0] == k)
        })?;
        worst = worst.max((l - r).abs());
    }
    ctx.push(TestReport::numeric("polya-exact", worst, worst, 0, 1e-10, 0).with_note("h(x, mu) = 1{mu(B) = k}, k = 0..5, one cell"));

    let sides = mecke_polya_sides(z, ctx.rho(), &|_, _| 1.0, ctx.n, ctx.stream)?;
    let first_moment = ctx.rho().total() * z / (1.0 - z);
    ctx.push(mc_agreement("polya-mc-lhs", &sides.lhs, first_moment, seed));
    ctx.push(mc_agreement("polya-mc-rhs", &sides.rhs, first_moment, seed));

    let nodes = ctx.params.quadrature_nodes;
    let h = |i: usize, q: &[f64]| (-q[i]).exp();
    let sides = mecke_gamma_sides(ctx.rho(), &h, ctx.n, nodes, ctx.stream.substream(9, 0))?;
    let closed = mecke_gamma_closed_form(ctx.rho());
    let d: Vec<f64> = sides.lhs.iter().zip(&sides.rhs).map(|(a, b)| a - b).collect();
    ctx.push(mc_agreement("gamma-mc-paired", &d, 0.0, seed));
    ctx.push(mc_agreement("gamma-mc-lhs", &sides.lhs, closed, seed));
    let mut rhs = mc_agreement("gamma-mc-rhs", &sides.rhs, closed, seed);
    rhs.threshold += sides.quadrature_error;
    rhs.passed = rhs.max_abs_error.is_some_and(|e| e < rhs.threshold);
    ctx.push(rhs.with_note(format!(
        "{nodes}-node Gauss-Laguerre, quadrature error {:.3e}",
        sides.quadrature_error
    )));
    Ok(())
}

fn variant_limits(ctx: &mut Ctx) -> Result<()> {
    let seed = ctx.seed();
    let n = ctx.params.limit_replicas;
    let rho_b = ctx.rho_b();
    let horizon = ctx.params.poisson_horizon;
    let poisson = FlowSpec::poisson(ctx.rho().clone())?;
    let paths = ctx.simulate(&poisson, &[horizon / 100.0, horizon / 10.0, horizon], n, 10)?;
    let band = ctx.params.poisson_band;
    let inside = collect(
        paths
            .iter()
            .map(|p| exit_limit(p).map(|q| (q.total() - rho_b).abs() <= band))
            .collect(),
    )?;
    let freq = inside.iter().filter(|&&b| b).count() as f64 / n as f64;
    let coverage = ctx.params.poisson_coverage;
    let report = TestReport::numeric("poisson-coverage", freq, 1.0 - freq, n as u64, 1.0 - coverage + 1e-12, seed).with_note(format!(
        "fraction of |Y_T(B)/T - rho(B)| <= {band} at T = {horizon}; required >= {coverage}"
    ));
    ctx.push(report);

    let base = CellMeasure::new(*ctx.rho().window(), ctx.rho().masses().iter().map(|m| m.round()).collect())?;
    if base.total() == 0.0 {
        return Err(param("rho rounds to the zero configuration; no Polya difference limit to check"));
    }
    let diff = FlowSpec::polya_difference(base.clone())?;
    let horizons = ctx.params.difference_horizons.clone();
    let paths = ctx.simulate(&diff, &horizons, n, 11)?;
    let target: Vec<u64> = base.masses().iter().map(|&m| m as u64).collect();
    let mut freqs = Vec::new();
    for (k, &t) in horizons.iter().enumerate() {
        let hits: Vec<f64> = paths
            .iter()
            .map(|p| f64::from(crate::measures::cell_counts(&p.states()[k]) == target))
            .collect();
        freqs.push(hits.iter().sum::<f64>() / n as f64);
        let exact = (t / (1.0 + t)).powf(base.total());
        ctx.push(mc_agreement(&format!("difference-hit-T={t}"), &hits, exact, seed));
    }
    let drops = freqs.windows(2).filter(|w| w[1] < w[0]).count();
    ctx.push(
        TestReport::numeric(
            "difference-monotone-in-T",
            *freqs.last().expect("nonempty"),
            drops as f64,
            n as u64,
            0.5,
            seed,
        )
        .with_note(format!("hit frequencies {freqs:?} at T = {horizons:?}")),
    );
    Ok(())
}

fn thinning_semigroup(ctx: &mut Ctx) -> Result<()> {
    let z = ctx.params.sampling_z;
    let (q1, q2) = (ctx.params.thinning_q[0], ctx.params.thinning_q[1]);
    let params = PolyaParams::new(z, ctx.rho().clone())?;
    let twice = collect(replicate(ctx.n, ctx.stream, 12, |rng| {
        let c = sample_polya_sum(&params, rng);
        thin(&thin(&c, q1, rng)?, q2, rng)
    }))?;
    let once = collect(replicate(ctx.n, ctx.stream, 13, |rng| {
        thin(&sample_polya_sum(&params, rng), q1 * q2, rng)
    }))?;
    let (a, b) = (totals(&twice), totals(&once));
    let seed = ctx.seed();
    ctx.push(chi_square_two_sample_report("twice-vs-once", &a, &b, ctx.alpha(), seed)?);
    let gamma = gamma_param(z, q1 * q2)?;
    let rho_b = ctx.rho_b();
    ctx.push(chi_square_counts(
        "twice-vs-nb",
        &a,
        &|n| nb_pmf(rho_b, gamma, n),
        ctx.alpha(),
        seed,
    )?);
    Ok(())
}

fn laplace_functionals(ctx: &mut Ctx) -> Result<()> {
    let rho = ctx.rho().clone();
    let w = *rho.window();
    let f = StepFunction::new(
        w,
        (0..w.cells())
            .map(|i| ctx.params.laplace_f * (i + 1) as f64 / w.cells() as f64)
            .collect(),
    )?;
    let f2 = StepFunction::new(w, f.values().iter().map(|v| 2.0 * v).collect())?;
    let seed = ctx.seed();
    let poisson: Vec<PointConfig> = replicate(ctx.n, ctx.stream, 14, |rng| sample_poisson_process(&rho, rng));
    let z = ctx.params.laplace_z;
    let params = PolyaParams::new(z, rho.clone())?;
    let polya: Vec<PointConfig> = replicate(ctx.n, ctx.stream, 15, |rng| sample_polya_sum(&params, rng));
    for (name, sample, exact) in [
        ("poisson", &poisson, laplace_poisson_exact(&rho, &f)),
        ("polya", &polya, laplace_polya_exact(z, &rho, &f)),
    ] {
        let (est, se) = laplace_mc(sample, &f)?;
        let thr = (3.0 * se).max(1e-12);
        ctx.push(
            TestReport::numeric(name, est, (est - exact).abs(), sample.len() as u64, thr, seed)
                .with_note(format!("exact {exact:.10}, se {se:.3e}")),
        );
        let (est2, _) = laplace_mc(sample, &f2)?;
        ctx.push(
            TestReport::numeric(
                format!("{name}-monotone-in-f"),
                est2,
                (est2 - est).max(0.0),
                sample.len() as u64,
                1e-15,
                seed,
            )
            .with_note("estimate at 2f must not exceed the estimate at f"),
        );
    }
    Ok(())
}

fn monotonicity(ctx: &mut Ctx) -> Result<()> {
    let m = ctx.params.monotone_grid_points;
    let unit: Vec<f64> = (1..=m).map(|k| 0.95 * k as f64 / m as f64).collect();
    let half: Vec<f64> = (1..=m).map(|k| 10.0 * k as f64 / m as f64).collect();
    let rho = ctx.rho().clone();
    let base = CellMeasure::new(*rho.window(), rho.masses().iter().map(|x| x.round().max(1.0)).collect())?;
    let specs = [
        (FlowSpec::polya_sum(rho.clone())?, &unit),
        (FlowSpec::poisson(rho.clone())?, &half),
        (FlowSpec::polya_difference(base)?, &half),
        (FlowSpec::cox_gamma(rho, 1.0)?, &unit),
    ];
    for (j, (spec, grid)) in specs.iter().enumerate() {
        let before = (ctx.steps, ctx.violations);
        ctx.simulate(spec, grid, ctx.n, 32 + j as u64)?;
        let steps = ctx.steps - before.0;
        let bad = ctx.violations - before.1;
        ctx.push(
            TestReport::numeric(spec.variant.name(), steps as f64, bad as f64, ctx.n as u64, 0.5, ctx.seed())
                .with_note(format!("{bad} violations in {steps} path steps")),
        );
    }
    Ok(())
}

type SuiteFn = fn(&mut Ctx) -> Result<()>;

fn suite_fn(name: &str) -> Option<SuiteFn> {
    Some(match name {
        "sampling-lemma" => sampling_lemma,
        "condensation-lemma" => condensation_lemma,
        "polya-marginals" => polya_marginals,
        "backward-consistency" => backward_consistency,
        "exit-limit" => exit_limit_suite,
        "mixture-representation" => mixture_representation,
        "duality" => duality_suite,
        "generator" => generator_suite,
        "mecke" => mecke_suite,
        "variant-limits" => variant_limits,
        "thinning-semigroup" => thinning_semigroup,
        "laplace-functionals" => laplace_functionals,
        "monotonicity" => monotonicity,
        _ => return None,
    })
}

/// Runs one suite. Errors inside the suite become a failing report.
pub fn run_suite(name: &str, config: &ExperimentConfig) -> Result<SuiteOutcome> {
    let (index, info) = find(name).ok_or_else(|| param(format!("unknown suite \"{name}\"")))?;
    let f = suite_fn(name).expect("every registered suite has a runner");
    let mut ctx = Ctx {
        suite: info.name,
        config,
        params: &config.params,
        stream: RngStream::new(config.seed, index as u64 + 1),
        n: config.replicas,
        reports: Vec::new(),
        kept: Vec::new(),
        steps: 0,
        violations: 0,
    };
    if let Err(e) = f(&mut ctx) {
        ctx.push(TestReport::numeric("error", 0.0, f64::INFINITY, 0, 0.0, config.seed).with_note(e.to_string()));
    }
    let statistical = ctx.reports.iter().filter(|r| r.kind == CheckKind::Statistical).count();
    if statistical > 1 {
        let thr = config.params.alpha / statistical as f64;
        ctx.reports = ctx
            .reports
            .into_iter()
            .map(|r| if r.kind == CheckKind::Statistical { r.at_threshold(thr) } else { r })
            .collect();
    }
    Ok(SuiteOutcome {
        suite: info.name,
        reports: ctx.reports,
        paths: ctx.kept,
        path_steps: ctx.steps,
        violations: ctx.violations,
    })
}

/// Runs every suite listed in the config, in config order.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let outcomes = config.suite.iter().map(|s| run_suite(s, config)).collect::<Result<Vec<_>>>()?;
    let steps: u64 = outcomes.iter().map(|o| o.path_steps).sum();
    let bad: u64 = outcomes.iter().map(|o| o.violations).sum();
    let monotonicity = TestReport::numeric("run:path-monotonicity", steps as f64, bad as f64, steps, 0.5, config.seed)
        .with_note(format!("{bad} violations in {steps} path steps across all suites"));
    Ok(RunOutput {
        seed: config.seed,
        replicas: config.replicas,
        flow: config.flow.clone(),
        outcomes,
        monotonicity,
    })
}

/// Writes `report.json`, `summary.csv` and `paths.jsonl` into `dir`.
pub fn write_outputs(run: &RunOutput, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let reports = run.reports();
    let doc = serde_json::json!({
        "rng": RNG_ALGORITHM,
        "seed": run.seed,
        "replicas": run.replicas,
        "flow": run.flow,
        "passed": run.passed(),
        "reports": reports,
    });
    let mut json = serde_json::to_string_pretty(&doc)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    std::fs::write(dir.join("summary.csv"), crate::verify::csv_summary(&reports))?;
    let file = std::fs::File::create(dir.join("paths.jsonl"))?;
    write_paths(run.outcomes.iter().flat_map(|o| o.paths.iter()), file)
}

/// Writes one JSON object per path and line.
pub fn write_paths<'a>(paths: impl IntoIterator<Item = &'a Path>, out: impl Write) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    for p in paths {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush().map_err(Error::from)
}
