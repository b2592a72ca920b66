//! Seeded samplers for the base processes.
//!
//! All samplers draw from a caller-supplied generator, normally obtained from
//! [`RngStream::rng`](crate::RngStream::rng). Locations are uniform within
//! their cell; only deliberate placement onto existing atoms produces
//! multiplicities above one.

use crate::error::{param, Result};
use crate::measures::{CellMeasure, PointConfig, Window};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

/// Parameters `(z, ρ)` of the Pólya sum process `Poy_{z,ρ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyaParams {
    z: f64,
    rho: CellMeasure,
}

impl PolyaParams {
    pub fn new(z: f64, rho: CellMeasure) -> Result<Self> {
        if !(z > 0.0 && z < 1.0) {
            return Err(param(format!("Pólya sum parameter z must lie in (0,1), got {z}")));
        }
        if rho.total() <= 0.0 {
            return Err(param("Pólya sum base measure must have positive mass"));
        }
        Ok(Self { z, rho })
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn rho(&self) -> &CellMeasure {
        &self.rho
    }
}

pub fn poisson_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("finite positive rate").sample(rng) as u64
}

fn uniform_in_cell<R: Rng + ?Sized>(window: &Window, k: usize, rng: &mut R) -> f64 {
    let (a, b) = (window.boundary(k), window.boundary(k + 1));
    let x = a + rng.random::<f64>() * (b - a);
    if window.cell_of(x) == Some(k) {
        x
    } else {
        a
    }
}

/// Poisson process with the given cell intensity.
pub fn sample_poisson_process<R: Rng + ?Sized>(intensity: &CellMeasure, rng: &mut R) -> PointConfig {
    let window = *intensity.window();
    let mut points = Vec::new();
    for (k, &mass) in intensity.masses().iter().enumerate() {
        let n = poisson_count(mass, rng);
        points.extend((0..n).map(|_| (uniform_in_cell(&window, k, rng), 1)));
    }
    PointConfig::from_points(window, points).expect("locations drawn inside the window")
}

/// `NB(r, z)` count via its Gamma–Poisson mixture.
pub fn sample_negative_binomial<R: Rng + ?Sized>(r: f64, z: f64, rng: &mut R) -> Result<u64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(param(format!("negative binomial shape must be positive, got {r}")));
    }
    if !(0.0..1.0).contains(&z) {
        return Err(param(format!("negative binomial z must lie in [0,1), got {z}")));
    }
    if z == 0.0 {
        return Ok(0);
    }
    let rate = Gamma::new(r, z / (1.0 - z)).expect("valid gamma").sample(rng);
    Ok(poisson_count(rate, rng))
}

/// Logarithmic-series variate `P(m) = −z^m / (m ln(1−z))`, `m ≥ 1`.
///
/// Inversion for moderate `z`; Kemp's LK generator near 1 where the inversion
/// loop would walk through `O(1/(1−z))` terms.
pub fn sample_log_series<R: Rng + ?Sized>(z: f64, rng: &mut R) -> u64 {
    debug_assert!(z > 0.0 && z < 1.0);
    if z < 0.9 {
        let u: f64 = rng.random();
        let mut p = -z / (-z).ln_1p();
        let mut cdf = p;
        let mut m = 1u64;
        while u > cdf && p > 0.0 {
            p *= z * m as f64 / (m + 1) as f64;
            m += 1;
            cdf += p;
        }
        m
    } else {
        let h = (-z).ln_1p();
        let v = loop {
            let v: f64 = rng.random();
            if v > 0.0 {
                break v;
            }
        };
        if v >= z {
            return 1;
        }
        let u: f64 = rng.random();
        let q = -(u * h).exp_m1();
        if v <= q * q {
            let m = (1.0 + v.ln() / q.ln()).floor();
            if m.is_finite() && m >= 1.0 {
                return m as u64;
            }
            return 1;
        }
        if v <= q {
            2
        } else {
            1
        }
    }
}

/// Count placed at a single location by a Pólya tower cluster of base mass `mass`.
fn polya_cluster_multiplicities<R: Rng + ?Sized>(mass: f64, z: f64, rng: &mut R) -> impl Iterator<Item = u64> {
    let towers = poisson_count(-mass * (-z).ln_1p(), rng);
    (0..towers).map(|_| sample_log_series(z, rng)).collect::<Vec<_>>().into_iter()
}

/// `Poy_{z,ρ}` as a compound Poisson–logarithmic process.
pub fn sample_polya_sum<R: Rng + ?Sized>(params: &PolyaParams, rng: &mut R) -> PointConfig {
    let empty = PointConfig::empty(*params.rho.window());
    sample_polya_sum_on(params.z, &params.rho, &empty, rng).expect("windows agree")
}

/// `Poy_{z,ρ+ν}` where `ρ` is diffuse on cells and `ν` is atomic.
///
/// The diffuse part puts each tower at a fresh uniform location; the atomic
/// part adds `NB(m, z)` points exactly at every atom `(x, m)` of `ν`.
pub fn sample_polya_sum_on<R: Rng + ?Sized>(z: f64, rho: &CellMeasure, atoms: &PointConfig, rng: &mut R) -> Result<PointConfig> {
    rho.window().check_same(atoms.window())?;
    if !(z > 0.0 && z < 1.0) {
        return Err(param(format!("Pólya sum parameter z must lie in (0,1), got {z}")));
    }
    let window = *rho.window();
    let mut points = Vec::new();
    for (k, &mass) in rho.masses().iter().enumerate() {
        for m in polya_cluster_multiplicities(mass, z, rng) {
            points.push((uniform_in_cell(&window, k, rng), m));
        }
    }
    for &(x, mult) in atoms.atoms() {
        let extra: u64 = polya_cluster_multiplicities(mult as f64, z, rng).sum();
        points.push((x, extra));
    }
    PointConfig::from_points(window, points)
}

/// Independent thinning: each unit of multiplicity survives with probability `q`.
pub fn thin<R: Rng + ?Sized>(c: &PointConfig, q: f64, rng: &mut R) -> Result<PointConfig> {
    if !(0.0..=1.0).contains(&q) {
        return Err(param(format!("thinning probability must lie in [0,1], got {q}")));
    }
    if q == 1.0 {
        return Ok(c.clone());
    }
    if q == 0.0 {
        return Ok(PointConfig::empty(*c.window()));
    }
    let kept: Vec<u64> = c
        .atoms()
        .iter()
        .map(|&(_, m)| Binomial::new(m, q).expect("valid binomial").sample(rng))
        .collect();
    Ok(c.with_multiplicities(kept))
}

/// Pólya difference process `GP_{z,ν}` for a configuration `ν`: binomial
/// thinning with retention `z/(1+z)`. `z = ∞` keeps everything.
pub fn sample_polya_difference<R: Rng + ?Sized>(z: f64, base: &PointConfig, rng: &mut R) -> Result<PointConfig> {
    if !(z > 0.0) {
        return Err(param(format!("Pólya difference parameter must be positive, got {z}")));
    }
    let q = if z.is_infinite() { 1.0 } else { z / (1.0 + z) };
    thin(base, q, rng)
}

/// Gamma random measure at cell level: `Gamma(ρ_i, 1)` per cell, independent.
pub fn sample_gamma_measure<R: Rng + ?Sized>(rho: &CellMeasure, rng: &mut R) -> CellMeasure {
    let masses = rho
        .masses()
        .iter()
        .map(|&shape| {
            if shape == 0.0 {
                0.0
            } else {
                Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
            }
        })
        .collect();
    CellMeasure::new(*rho.window(), masses).expect("gamma draws are finite and ≥ 0")
}
