//! Closed-form pmfs and tails of the count distributions used as oracles.
//!
//! Negative binomial convention throughout: `NB(r, z)` has pmf
//! `Γ(r+n)/(Γ(r) n!) (1−z)^r z^n`, mean `r z/(1−z)`.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

pub fn nb_pmf(r: f64, z: f64, n: u64) -> f64 {
    if r == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if z == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let n_f = n as f64;
    (ln_gamma(r + n_f) - ln_gamma(r) - ln_gamma(n_f + 1.0) + r * (-z).ln_1p() + n_f * z.ln()).exp()
}

/// `P(N > n)` for `N ~ NB(r, z)`.
pub fn nb_tail(r: f64, z: f64, n: u64) -> f64 {
    if r == 0.0 || z == 0.0 {
        return 0.0;
    }
    beta_reg(n as f64 + 1.0, r, z)
}

pub fn nb_mean(r: f64, z: f64) -> f64 {
    r * z / (1.0 - z)
}

pub fn poisson_pmf(lambda: f64, n: u64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let n_f = n as f64;
    (n_f * lambda.ln() - lambda - ln_gamma(n_f + 1.0)).exp()
}

pub fn binomial_pmf(trials: u64, p: f64, k: u64) -> f64 {
    if k > trials {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == trials { 1.0 } else { 0.0 };
    }
    let (n, k) = (trials as f64, k as f64);
    (ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0) + k * p.ln() + (n - k) * (-p).ln_1p()).exp()
}

/// Logarithmic-series pmf `−z^m / (m ln(1−z))`, `m ≥ 1`.
pub fn log_series_pmf(z: f64, m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let m_f = m as f64;
    (m_f * z.ln()).exp() / (-m_f * (-z).ln_1p())
}

/// Smallest `n` with `P(N > n) < eps`, capped at `cap`.
pub(crate) fn nb_cutoff(r: f64, z: f64, eps: f64, cap: u64) -> u64 {
    if nb_tail(r, z, cap) >= eps {
        return cap;
    }
    let (mut lo, mut hi) = (0u64, cap);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if nb_tail(r, z, mid) < eps {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}
