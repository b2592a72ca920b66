//! Exact enumeration oracle on 1–3 cells.
//!
//! A [`DiscreteModel`] describes the count process `(Y_t(B_i))_i` of a
//! Gamma-directed flow. Conditioned on the current counts the per-cell
//! increments are independent negative binomials, so every transition
//! expectation is a finite sum over a truncated product grid.
//!
//! * Pólya clock: `Y_s ~ ⊗ NB(ρ_i, s)`, increment `NB(ρ_i+ν_i, (t−s)/(1−s))`.
//! * Condensation clock with Gamma rate `b`: `Y_s = Cox(Λ/(1−s))`,
//!   `Λ_i ~ Gamma(ρ_i, b)`, so `Y_s ~ ⊗ NB(ρ_i, 1/(1+b(1−s)))` and the
//!   increment is `NB(ρ_i+ν_i, z')` with `z'/(1−z') = (t−s)/((1−t)(1+b(1−s)))`.

use crate::dist::{binomial_pmf, nb_cutoff, nb_pmf, nb_tail};
use crate::error::{domain, numeric, param, Result};
use crate::kernels::MAX_UNIT_TIME;
use serde::{Deserialize, Serialize};

/// Tail mass below which a per-cell sum is cut short.
const NEGLIGIBLE_TAIL: f64 = 1e-17;
/// Marginal mass below which a starting state is left out of a sum.
const NEGLIGIBLE_STATE: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "clock")]
pub enum ModelClock {
    Polya,
    Condensation { rate: f64 },
}

/// Truncated count-level model of a Gamma-directed flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModel {
    rho: Vec<f64>,
    max_count: u64,
    clock: ModelClock,
    t_max: f64,
    tolerance: f64,
}

/// A real function of per-cell count vectors.
pub trait CountFunction: Sync {
    fn eval(&self, counts: &[u64]) -> Result<f64>;
}

impl<F> CountFunction for F
where
    F: Fn(&[u64]) -> f64 + Sync,
{
    fn eval(&self, counts: &[u64]) -> Result<f64> {
        Ok(self(counts))
    }
}

/// Pmf on the box `[0, dims_0) × … × [0, dims_{k−1})`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPmf {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl CountPmf {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn index(&self, counts: &[u64]) -> Option<usize> {
        let mut idx = 0usize;
        for (&c, &d) in counts.iter().zip(&self.dims) {
            if c as usize >= d {
                return None;
            }
            idx = idx * d + c as usize;
        }
        Some(idx)
    }

    /// Probability of `counts`, zero outside the box.
    pub fn prob(&self, counts: &[u64]) -> f64 {
        self.index(counts).map_or(0.0, |i| self.probs[i])
    }

    /// Iterates `(counts, probability)` over the box.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<u64>, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(mut i, &p)| {
            let mut counts = vec![0u64; self.dims.len()];
            for k in (0..self.dims.len()).rev() {
                counts[k] = (i % self.dims[k]) as u64;
                i /= self.dims[k];
            }
            (counts, p)
        })
    }

    fn product(marginals: &[Vec<f64>]) -> Self {
        let dims: Vec<usize> = marginals.iter().map(Vec::len).collect();
        let mut probs = vec![1.0];
        for m in marginals {
            probs = probs.iter().flat_map(|&p| m.iter().map(move |&q| p * q)).collect();
        }
        Self { dims, probs }
    }
}

impl DiscreteModel {
    /// Builds a model and checks that the truncated marginal tail at every
    /// time up to `t_max` stays below `1e−10` in every cell.
    pub fn new(rho: Vec<f64>, max_count: u64, clock: ModelClock, t_max: f64) -> Result<Self> {
        if rho.is_empty() || rho.len() > 3 {
            return Err(param(format!("discrete models have 1–3 cells, got {}", rho.len())));
        }
        if rho.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(param("cell masses must be finite and ≥ 0"));
        }
        if max_count == 0 {
            return Err(param("max_count must be positive"));
        }
        if let ModelClock::Condensation { rate } = clock {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(param(format!("condensation clock needs a positive Gamma rate, got {rate}")));
            }
        }
        if !(0.0..=MAX_UNIT_TIME).contains(&t_max) {
            return Err(param(format!("t_max must lie in [0, 1), got {t_max}")));
        }
        let model = Self {
            rho,
            max_count,
            clock,
            t_max,
            tolerance: 1e-10,
        };
        // marginal z is increasing in time on both clocks
        let z = model.marginal_z(t_max);
        for (i, &r) in model.rho.iter().enumerate() {
            let tail = nb_tail(r, z, max_count);
            if tail >= model.tolerance {
                return Err(numeric(format!(
                    "truncation at {max_count} leaves tail mass {tail:e} in cell {i} at t = {t_max}"
                )));
            }
        }
        Ok(model)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn cells(&self) -> usize {
        self.rho.len()
    }

    pub fn max_count(&self) -> u64 {
        self.max_count
    }

    pub fn clock(&self) -> ModelClock {
        self.clock
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.t_max).contains(&t) {
            Ok(())
        } else {
            Err(param(format!("time {t} outside [0, {}]", self.t_max)))
        }
    }

    /// NB parameter of the one-time marginal `Y_s(B_i) ~ NB(ρ_i, z)`.
    pub fn marginal_z(&self, s: f64) -> f64 {
        match self.clock {
            ModelClock::Polya => s,
            ModelClock::Condensation { rate } => 1.0 / (1.0 + rate * (1.0 - s)),
        }
    }

    /// NB parameter of the increment over `[s, t]`, shapes `ρ_i + ν_i`.
    pub fn increment_z(&self, s: f64, t: f64) -> f64 {
        match self.clock {
            ModelClock::Polya => (t - s) / (1.0 - s),
            ModelClock::Condensation { rate } => {
                let odds = (t - s) / ((1.0 - t) * (1.0 + rate * (1.0 - s)));
                odds / (1.0 + odds)
            }
        }
    }

    /// Retention of the backward thinning from `t` to `s`.
    pub fn backward_ratio(&self, s: f64, t: f64) -> f64 {
        if s == t {
            return 1.0;
        }
        match self.clock {
            ModelClock::Polya => s * (1.0 - t) / (t * (1.0 - s)),
            ModelClock::Condensation { .. } => (1.0 - t) / (1.0 - s),
        }
    }

    /// Per-cell NB pmf vector, cut where the tail is negligible. Errors when
    /// the tail beyond `max_count` exceeds the model tolerance.
    fn nb_vector(&self, shape: f64, z: f64) -> Result<Vec<f64>> {
        let tail = nb_tail(shape, z, self.max_count);
        if tail >= self.tolerance {
            return Err(numeric(format!(
                "truncation bound violated: NB({shape}, {z}) tail beyond {} is {tail:e}",
                self.max_count
            )));
        }
        let cut = nb_cutoff(shape, z, NEGLIGIBLE_TAIL, self.max_count);
        Ok((0..=cut).map(|n| nb_pmf(shape, z, n)).collect())
    }

    /// Truncated joint marginal of `Y_s` on `[0, max_count]^cells`.
    pub fn marginal_pmf(&self, s: f64) -> Result<CountPmf> {
        self.check_time(s)?;
        let z = self.marginal_z(s);
        let cells: Vec<Vec<f64>> = self
            .rho
            .iter()
            .map(|&r| (0..=self.max_count).map(|n| nb_pmf(r, z, n)).collect())
            .collect();
        Ok(CountPmf::product(&cells))
    }

    /// Truncated pmf of the increment over `[s, t]` from state `nu`.
    pub fn increment_pmf(&self, s: f64, t: f64, nu: &[u64]) -> Result<CountPmf> {
        self.check_pair(s, t)?;
        self.check_state(nu)?;
        let z = self.increment_z(s, t);
        let cells = self
            .rho
            .iter()
            .zip(nu)
            .map(|(&r, &n)| self.nb_vector(r + n as f64, z))
            .collect::<Result<Vec<_>>>()?;
        Ok(CountPmf::product(&cells))
    }

    fn check_pair(&self, s: f64, t: f64) -> Result<()> {
        self.check_time(s)?;
        self.check_time(t)?;
        if s > t {
            return Err(param(format!("time order violated: s = {s} > t = {t}")));
        }
        Ok(())
    }

    fn check_state(&self, nu: &[u64]) -> Result<()> {
        if nu.len() != self.cells() {
            return Err(param(format!("state has {} cells, model has {}", nu.len(), self.cells())));
        }
        Ok(())
    }
}

/// `T_{s,t}φ` as a lazily evaluated count function.
pub struct Semigroup<'a> {
    model: &'a DiscreteModel,
    s: f64,
    t: f64,
    phi: &'a dyn CountFunction,
}

impl CountFunction for Semigroup<'_> {
    fn eval(&self, nu: &[u64]) -> Result<f64> {
        if self.s == self.t {
            return self.phi.eval(nu);
        }
        let inc = self.model.increment_pmf(self.s, self.t, nu)?;
        let mut total = 0.0;
        for (delta, p) in inc.iter() {
            let next: Vec<u64> = nu.iter().zip(&delta).map(|(a, b)| a + b).collect();
            total += p * self.phi.eval(&next)?;
        }
        Ok(total)
    }
}

/// Exact `T_{s,t}φ(ν) = E[φ(ν + ΔY)]` over the truncated increment pmf.
pub fn semigroup_apply<'a>(model: &'a DiscreteModel, s: f64, t: f64, phi: &'a dyn CountFunction) -> Result<Semigroup<'a>> {
    model.check_pair(s, t)?;
    Ok(Semigroup { model, s, t, phi })
}

/// Iterated reduced Palm distribution of the law of `Y_s` at counts `nu`.
///
/// Each unit of `nu` in cell `i` applies `p!(μ) ∝ (μ_i + 1) p(μ + e_i)` to the
/// enumerated joint pmf, shrinking the box by one in that cell.
pub fn reduced_palm_enumerate(model: &DiscreteModel, s: f64, nu: &[u64]) -> Result<CountPmf> {
    model.check_state(nu)?;
    if nu.iter().any(|&n| n >= model.max_count) {
        return Err(param("Palm configuration outside the truncation box"));
    }
    let mut pmf = model.marginal_pmf(s)?;
    for (cell, &units) in nu.iter().enumerate() {
        for _ in 0..units {
            pmf = palm_step(&pmf, cell);
        }
    }
    let norm: f64 = pmf.probs.iter().sum();
    if !(norm > 0.0) {
        return Err(domain("zero Palm normalizer: configuration outside the support"));
    }
    pmf.probs.iter_mut().for_each(|p| *p /= norm);
    Ok(pmf)
}

fn palm_step(pmf: &CountPmf, cell: usize) -> CountPmf {
    let mut dims = pmf.dims.clone();
    dims[cell] -= 1;
    let size: usize = dims.iter().product();
    let mut out = CountPmf {
        dims,
        probs: vec![0.0; size],
    };
    let entries: Vec<(Vec<u64>, f64)> = out.iter().collect();
    for (k, (mu, _)) in entries.into_iter().enumerate() {
        let mut up = mu.clone();
        up[cell] += 1;
        out.probs[k] = (mu[cell] + 1) as f64 * pmf.prob(&up);
    }
    out
}

/// Generator formula
/// `𝒜_sφ(ν) = [(1−s) P^!_ν(ζ=0)]^{−1} Σ_{|μ|=1} (φ(ν+μ) − φ(ν)) P^!_ν(μ)`
/// with `P^!` the enumerated reduced Palm law of `Y_s`.
pub fn generator_apply(model: &DiscreteModel, s: f64, phi: &dyn CountFunction, nu: &[u64]) -> Result<f64> {
    let palm = reduced_palm_enumerate(model, s, nu)?;
    let cells = model.cells();
    let void = palm.prob(&vec![0; cells]);
    if !(void > 0.0) {
        return Err(numeric("zero void probability in the Palm law"));
    }
    let base = phi.eval(nu)?;
    let mut total = 0.0;
    for i in 0..cells {
        let mut e = vec![0u64; cells];
        e[i] = 1;
        let mass = palm.prob(&e);
        if mass == 0.0 {
            continue;
        }
        let mut next = nu.to_vec();
        next[i] += 1;
        total += (phi.eval(&next)? - base) * mass;
    }
    Ok(total / ((1.0 - s) * void))
}

/// Forward difference `(T_{s,s+h}φ(ν) − φ(ν))/h`.
pub fn semigroup_derivative(model: &DiscreteModel, s: f64, h: f64, phi: &dyn CountFunction, nu: &[u64]) -> Result<f64> {
    let t = semigroup_apply(model, s, s + h, phi)?;
    Ok((t.eval(nu)? - phi.eval(nu)?) / h)
}

/// Both sides of the duality identity
/// `∫ p*_{s,t}(·,ψ) φ dLaw(Y_t) = ∫ ψ p_{s,t}(·,φ) dLaw(Y_s)`, exactly.
pub fn duality_exact(model: &DiscreteModel, s: f64, t: f64, phi: &dyn CountFunction, psi: &dyn CountFunction) -> Result<(f64, f64)> {
    model.check_pair(s, t)?;
    let r = model.backward_ratio(s, t);
    let law_t = model.marginal_pmf(t)?;
    let mut lhs = 0.0;
    for (mu, p) in law_t.iter() {
        if p == 0.0 {
            continue;
        }
        lhs += p * phi.eval(&mu)? * binomial_expectation(&mu, r, psi)?;
    }
    let law_s = model.marginal_pmf(s)?;
    let forward = semigroup_apply(model, s, t, phi)?;
    let mut rhs = 0.0;
    for (nu, p) in law_s.iter() {
        // states this unlikely may have increments outside the box
        if p < NEGLIGIBLE_STATE {
            continue;
        }
        let w = psi.eval(&nu)?;
        if w != 0.0 {
            rhs += p * w * forward.eval(&nu)?;
        }
    }
    Ok((lhs, rhs))
}

/// `E ψ(K)` with `K_i ~ Binomial(μ_i, r)` independent.
fn binomial_expectation(mu: &[u64], r: f64, psi: &dyn CountFunction) -> Result<f64> {
    let cells: Vec<Vec<f64>> = mu.iter().map(|&m| (0..=m).map(|k| binomial_pmf(m, r, k)).collect()).collect();
    let pmf = CountPmf::product(&cells);
    let mut total = 0.0;
    for (k, p) in pmf.iter() {
        if p != 0.0 {
            total += p * psi.eval(&k)?;
        }
    }
    Ok(total)
}

/// Both sides of the Pólya sum Mecke identity
/// `E Σ_i μ_i h(i, μ) = z E Σ_i (ρ_i + μ_i) h(i, μ + e_i)` under `⊗ NB(ρ_i, z)`.
pub fn mecke_polya_exact(z: f64, rho: &[f64], max_count: u64, h: &(dyn Fn(usize, &[u64]) -> f64 + Sync)) -> Result<(f64, f64)> {
    if !(z > 0.0 && z < 1.0) {
        return Err(param(format!("z must lie in (0,1), got {z}")));
    }
    let model = DiscreteModel::new(rho.to_vec(), max_count, ModelClock::Polya, z.min(MAX_UNIT_TIME))?;
    let law = model.marginal_pmf(z)?;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (mu, p) in law.iter() {
        for i in 0..mu.len() {
            lhs += p * mu[i] as f64 * h(i, &mu);
            let mut up = mu.clone();
            up[i] += 1;
            rhs += p * z * (rho[i] + mu[i] as f64) * h(i, &up);
        }
    }
    Ok((lhs, rhs))
}
