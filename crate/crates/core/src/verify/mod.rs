//! Verification harness: goodness-of-fit statistics, Laplace functionals,
//! Mecke/Campbell identity checkers and the duality checker.
//!
//! Monte Carlo checkers report `|LHS − RHS|` against `3` standard errors; every
//! one of them has an exact twin on a [`DiscreteModel`](crate::flows::discrete::DiscreteModel)
//! or a closed form.

pub mod quadrature;
pub mod report;
pub mod stats;

use crate::error::{param, Result};
use crate::flows::discrete::{duality_exact, DiscreteModel};
use crate::kernels::{backward_thin, forward_increment, sample_marginal, FlowSpec};
use crate::mc::replicate;
use crate::measures::{cell_counts, config_integrate, CellMeasure, PointConfig, StepFunction};
use crate::rng::RngStream;
use crate::samplers::{sample_gamma_measure, sample_polya_sum, PolyaParams};
use quadrature::GaussLaguerre;
pub use report::{csv_summary, CheckKind, TestReport};
pub use stats::{chi_square_counts, chi_square_two_sample_report, ks_distance, mean_se};

/// Number of standard errors a Monte Carlo identity may deviate by.
pub const SE_MULTIPLIER: f64 = 3.0;

/// A function of per-cell count vectors, shareable across workers.
pub type CountFn<'a> = &'a (dyn Fn(&[u64]) -> f64 + Sync);

/// Mean and standard error of `exp(−∫ f dc)` over `configs`.
pub fn laplace_mc(configs: &[PointConfig], f: &StepFunction) -> Result<(f64, f64)> {
    if configs.is_empty() {
        return Err(param("Laplace estimate of an empty sample"));
    }
    let values = configs
        .iter()
        .map(|c| config_integrate(c, f).map(|v| (-v).exp()))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_se(&values))
}

/// `exp(−Σ ρ_i (1 − e^{−f_i}))`.
pub fn laplace_poisson_exact(rho: &CellMeasure, f: &StepFunction) -> f64 {
    let s: f64 = rho.masses().iter().zip(f.values()).map(|(r, v)| r * (1.0 - (-v).exp())).sum();
    (-s).exp()
}

/// `Π_i ((1−z)/(1−z e^{−f_i}))^{ρ_i}`.
pub fn laplace_polya_exact(z: f64, rho: &CellMeasure, f: &StepFunction) -> f64 {
    let s: f64 = rho
        .masses()
        .iter()
        .zip(f.values())
        .map(|(r, v)| r * ((1.0 - z) / (1.0 - z * (-v).exp())).ln())
        .sum();
    s.exp()
}

/// Compares a Monte Carlo sample mean with an exact value.
pub fn mc_agreement(name: &str, values: &[f64], exact: f64, seed: u64) -> TestReport {
    let (mean, se) = mean_se(values);
    TestReport::numeric(name, mean, (mean - exact).abs(), values.len() as u64, threshold_from_se(se), seed)
        .with_note(format!("exact {exact:.10}, se {se:.3e}"))
}

/// `3·SE`, floored so that a zero-variance identity `0 = 0` passes.
fn threshold_from_se(se: f64) -> f64 {
    (SE_MULTIPLIER * se).max(1e-12)
}

/// Per-replica Monte Carlo values of the two sides of a Mecke identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MeckeSides {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Mean quadrature error estimate carried by `rhs` (zero for Pólya).
    pub quadrature_error: f64,
}

impl MeckeSides {
    fn report(&self, name: &str, seed: u64) -> TestReport {
        let d: Vec<f64> = self.lhs.iter().zip(&self.rhs).map(|(l, r)| l - r).collect();
        let (mean_d, se_d) = mean_se(&d);
        let (mean_l, _) = mean_se(&self.lhs);
        let quad = self.quadrature_error;
        TestReport::numeric(
            name,
            mean_l,
            mean_d.abs(),
            self.lhs.len() as u64,
            threshold_from_se(se_d) + quad,
            seed,
        )
        .with_note(format!("paired difference se {se_d:.3e}, quadrature error {quad:.3e}"))
    }
}

/// Samples both sides of the Pólya sum Mecke identity
/// `E Σ_i μ_i h(i, μ) = z E Σ_i (ρ_i + μ_i) h(i, μ + e_i)`.
pub fn mecke_polya_sides(
    z: f64,
    rho: &CellMeasure,
    h: &(dyn Fn(usize, &[u64]) -> f64 + Sync),
    n: usize,
    stream: RngStream,
) -> Result<MeckeSides> {
    let params = PolyaParams::new(z, rho.clone())?;
    let rows: Vec<(f64, f64)> = replicate(n, stream, 0x4d45_434b, |rng| {
        let mu = cell_counts(&sample_polya_sum(&params, rng));
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..mu.len() {
            lhs += mu[i] as f64 * h(i, &mu);
            let mut up = mu.clone();
            up[i] += 1;
            rhs += z * (rho.masses()[i] + mu[i] as f64) * h(i, &up);
        }
        (lhs, rhs)
    });
    Ok(MeckeSides {
        lhs: rows.iter().map(|r| r.0).collect(),
        rhs: rows.iter().map(|r| r.1).collect(),
        quadrature_error: 0.0,
    })
}

/// Pólya sum Mecke identity by Monte Carlo, paired difference against `3·SE`.
pub fn mecke_check_polya(
    z: f64,
    rho: &CellMeasure,
    h: &(dyn Fn(usize, &[u64]) -> f64 + Sync),
    n: usize,
    stream: RngStream,
) -> Result<TestReport> {
    Ok(mecke_polya_sides(z, rho, h, n, stream)?.report("mecke-polya-mc", stream.seed))
}

/// Samples both sides of the Gamma random measure Campbell identity
/// `E Σ_i Q_i h(i, Q) = E Σ_i ρ_i ∫ h(i, Q + r e_i) e^{−r} dr`.
///
/// The `r`-integral uses a `nodes`-point Gauss–Laguerre rule; the mean
/// difference to a rule with half the nodes is the quadrature error estimate.
pub fn mecke_gamma_sides(
    rho: &CellMeasure,
    h: &(dyn Fn(usize, &[f64]) -> f64 + Sync),
    n: usize,
    nodes: usize,
    stream: RngStream,
) -> Result<MeckeSides> {
    if nodes < 2 {
        return Err(param("quadrature needs at least 2 nodes"));
    }
    let rule = GaussLaguerre::new(nodes);
    let coarse = GaussLaguerre::new(nodes / 2);
    let rows: Vec<(f64, f64, f64)> = replicate(n, stream, 0x4741_4d4d, |rng| {
        let q = sample_gamma_measure(rho, rng);
        let masses = q.masses();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        let mut quad_err = 0.0;
        for i in 0..masses.len() {
            lhs += masses[i] * h(i, masses);
            let shifted = |r: f64| {
                let mut m = masses.to_vec();
                m[i] += r;
                h(i, &m)
            };
            let fine = rule.integrate(shifted);
            let rough = coarse.integrate(shifted);
            rhs += rho.masses()[i] * fine;
            quad_err += rho.masses()[i] * (fine - rough).abs();
        }
        (lhs, rhs, quad_err)
    });
    Ok(MeckeSides {
        lhs: rows.iter().map(|r| r.0).collect(),
        rhs: rows.iter().map(|r| r.1).collect(),
        quadrature_error: rows.iter().map(|r| r.2).sum::<f64>() / n.max(1) as f64,
    })
}

/// Gamma Campbell identity by Monte Carlo, paired difference against
/// `3·SE` plus the quadrature error estimate.
pub fn mecke_check_gamma(
    rho: &CellMeasure,
    h: &(dyn Fn(usize, &[f64]) -> f64 + Sync),
    n: usize,
    nodes: usize,
    stream: RngStream,
) -> Result<TestReport> {
    Ok(mecke_gamma_sides(rho, h, n, nodes, stream)?.report("mecke-gamma-mc", stream.seed))
}

/// Both sides of the duality identity by Monte Carlo, from independent
/// samples: `E[φ(Y_t) ψ(Ŷ_s)]` with `Ŷ_s` a backward draw from `Y_t`, and
/// `E[ψ(Y_s) φ(Y_s + ΔY)]` with a forward increment.
pub fn duality_mc(
    spec: &FlowSpec,
    s: f64,
    t: f64,
    phi: CountFn,
    psi: CountFn,
    n: usize,
    stream: RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.check_time(s)?;
    spec.check_time(t)?;
    if s > t {
        return Err(param(format!("time order violated: s = {s} > t = {t}")));
    }
    let lhs: Vec<Result<f64>> = replicate(n, stream, 0x4455_414c, |rng| {
        let yt = sample_marginal(spec, t, rng)?;
        let ys = backward_thin(spec, s, t, &yt, rng)?;
        Ok(phi(&cell_counts(&yt)) * psi(&cell_counts(&ys)))
    });
    let rhs: Vec<Result<f64>> = replicate(n, stream, 0x4455_414d, |rng| {
        let ys = sample_marginal(spec, s, rng)?;
        let inc = forward_increment(spec, s, t, &ys, rng)?;
        Ok(psi(&cell_counts(&ys)) * phi(&cell_counts(&ys.superpose(&inc)?)))
    });
    Ok((lhs.into_iter().collect::<Result<_>>()?, rhs.into_iter().collect::<Result<_>>()?))
}

/// Duality by Monte Carlo: `|mean_L − mean_R|` against `3·sqrt(se_L² + se_R²)`.
pub fn duality_check(spec: &FlowSpec, s: f64, t: f64, phi: CountFn, psi: CountFn, n: usize, stream: RngStream) -> Result<TestReport> {
    let (lhs, rhs) = duality_mc(spec, s, t, phi, psi, n, stream)?;
    let (ml, sl) = mean_se(&lhs);
    let (mr, sr) = mean_se(&rhs);
    let se = (sl * sl + sr * sr).sqrt();
    Ok(
        TestReport::numeric("duality-mc", ml, (ml - mr).abs(), 2 * n as u64, threshold_from_se(se), stream.seed)
            .with_note(format!("lhs {ml:.6}, rhs {mr:.6}, combined se {se:.3e}")),
    )
}

/// Duality on the enumeration oracle, `|LHS − RHS| < tolerance`.
pub fn duality_exact_report(model: &DiscreteModel, s: f64, t: f64, phi: CountFn, psi: CountFn, tolerance: f64) -> Result<TestReport> {
    let (lhs, rhs) = duality_exact(model, s, t, &phi, &psi)?;
    Ok(TestReport::numeric("duality-exact", lhs, (lhs - rhs).abs(), 0, tolerance, 0).with_note(format!("lhs {lhs:.15}, rhs {rhs:.15}")))
}
