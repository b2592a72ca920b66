//! Chi-square and Kolmogorov–Smirnov statistics with tail pooling.

use crate::error::{param, Result};
use crate::verify::report::TestReport;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;

/// Minimum number of samples a goodness-of-fit test accepts.
pub const MIN_SAMPLES: usize = 1000;
/// Minimum expected count per pooled bin.
pub const MIN_EXPECTED: f64 = 5.0;

fn chi2_sf(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).expect("positive df").sf(stat)
}

/// Pearson statistic and p-value of 1-d counts against an exact pmf.
///
/// Bins `0, 1, …` are kept while their expected count is at least 5; the
/// remaining upper tail is one pooled bin (merged into the last kept bin when
/// its own expectation is below 5).
pub fn chi_square_pmf(samples: &[u64], pmf: &dyn Fn(u64) -> f64) -> Result<(f64, f64, usize)> {
    if samples.len() < MIN_SAMPLES {
        return Err(param(format!("chi-square needs ≥ {MIN_SAMPLES} samples, got {}", samples.len())));
    }
    let n = samples.len() as f64;
    // bins as (upper-exclusive edge, expected), last bin open-ended
    let mut edges: Vec<u64> = Vec::new();
    let mut expected: Vec<f64> = Vec::new();
    let mut acc_p = 0.0;
    let mut k = 0u64;
    let mut bin_p = 0.0;
    loop {
        let p = pmf(k);
        bin_p += p;
        acc_p += p;
        k += 1;
        let tail = (1.0 - acc_p).max(0.0);
        if bin_p * n >= MIN_EXPECTED {
            edges.push(k);
            expected.push(bin_p * n);
            bin_p = 0.0;
            if tail * n < MIN_EXPECTED {
                break;
            }
        }
        if k > 1_000_000 {
            break;
        }
    }
    // pool the remainder (tail plus any open partial bin) into the last bin
    let remainder = (1.0 - acc_p).max(0.0) + bin_p;
    if expected.is_empty() {
        return Ok((0.0, 1.0, 1));
    }
    let last = expected.len() - 1;
    expected[last] += remainder * n;
    edges[last] = u64::MAX;
    let mut observed = vec![0f64; expected.len()];
    for &x in samples {
        let bin = edges.partition_point(|&e| e <= x);
        observed[bin.min(last)] += 1.0;
    }
    let stat: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = expected.len().saturating_sub(1);
    Ok((stat, chi2_sf(stat, df), expected.len()))
}

/// Goodness of fit of 1-d counts against an exact pmf, as a report.
pub fn chi_square_counts(name: &str, samples: &[u64], pmf: &dyn Fn(u64) -> f64, threshold: f64, seed: u64) -> Result<TestReport> {
    let (stat, p, bins) = chi_square_pmf(samples, pmf)?;
    Ok(TestReport::statistical(name, stat, p, samples.len() as u64, threshold, seed).with_note(format!("{bins} bins")))
}

/// Two-sample chi-square (2×K homogeneity) over ordered categories.
///
/// Categories are swept in order and pooled, using the combined counts, until
/// each pooled bin's expected count is at least 5 in both rows; a short
/// remainder joins the last bin.
pub fn chi_square_two_sample<K: Ord + Clone>(a: &[K], b: &[K]) -> Result<(f64, f64, usize)> {
    if a.len() < MIN_SAMPLES || b.len() < MIN_SAMPLES {
        return Err(param(format!("two-sample chi-square needs ≥ {MIN_SAMPLES} samples per side")));
    }
    let mut table: BTreeMap<K, (f64, f64)> = BTreeMap::new();
    for x in a {
        table.entry(x.clone()).or_default().0 += 1.0;
    }
    for x in b {
        table.entry(x.clone()).or_default().1 += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let need = MIN_EXPECTED * n / na.min(nb);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut cur = (0.0, 0.0);
    for &(ca, cb) in table.values() {
        cur.0 += ca;
        cur.1 += cb;
        if cur.0 + cur.1 >= need {
            bins.push(cur);
            cur = (0.0, 0.0);
        }
    }
    if cur.0 + cur.1 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += cur.0;
                last.1 += cur.1;
            }
            None => bins.push(cur),
        }
    }
    let mut stat = 0.0;
    for &(ca, cb) in &bins {
        let total = ca + cb;
        let ea = total * na / n;
        let eb = total * nb / n;
        stat += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
    }
    let df = bins.len().saturating_sub(1);
    Ok((stat, chi2_sf(stat, df), bins.len()))
}

pub fn chi_square_two_sample_report<K: Ord + Clone>(name: &str, a: &[K], b: &[K], threshold: f64, seed: u64) -> Result<TestReport> {
    let (stat, p, bins) = chi_square_two_sample(a, b)?;
    Ok(TestReport::statistical(name, stat, p, (a.len() + b.len()) as u64, threshold, seed).with_note(format!("{bins} pooled bins")))
}

/// Pools the sorted support of a sample into bins each holding at least
/// `min_frac` of it; returns the upper-exclusive edges (last one open).
fn pool_margin(values: &[u64], min_frac: f64) -> Vec<u64> {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    let need = (min_frac * values.len() as f64).ceil() as usize;
    let mut edges = Vec::new();
    let mut acc = 0;
    for (&v, &c) in &counts {
        acc += c;
        if acc >= need {
            edges.push(v + 1);
            acc = 0;
        }
    }
    if acc > 0 && !edges.is_empty() {
        edges.pop();
    }
    edges.push(u64::MAX);
    edges
}

/// Chi-square test of independence between two count coordinates.
///
/// Each margin is pooled so that every marginal bin carries at least
/// `sqrt(5/n)` of the sample, which guarantees expected cell counts ≥ 5.
pub fn chi_square_independence(pairs: &[(u64, u64)]) -> Result<(f64, f64, usize)> {
    if pairs.len() < MIN_SAMPLES {
        return Err(param(format!("independence test needs ≥ {MIN_SAMPLES} samples")));
    }
    let n = pairs.len() as f64;
    let min_frac = (MIN_EXPECTED / n).sqrt();
    let xs: Vec<u64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<u64> = pairs.iter().map(|p| p.1).collect();
    let ex = pool_margin(&xs, min_frac);
    let ey = pool_margin(&ys, min_frac);
    let mut table = vec![vec![0f64; ey.len()]; ex.len()];
    for &(x, y) in pairs {
        let i = ex.partition_point(|&e| e <= x);
        let j = ey.partition_point(|&e| e <= y);
        table[i][j] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..ey.len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                stat += (o - e) * (o - e) / e;
            }
        }
    }
    let df = (ex.len().saturating_sub(1)) * (ey.len().saturating_sub(1));
    Ok((stat, chi2_sf(stat, df), df))
}

/// One-sample Kolmogorov–Smirnov distance `sup |F_n − F|`, tie aware.
pub fn ks_distance(samples: &[f64], cdf: &dyn Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(param("KS distance of an empty sample"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let f = cdf(x);
        let below = i as f64 / n;
        let at = j as f64 / n;
        d = d.max((f - below).abs()).max((at - f).abs());
        i = j;
    }
    Ok(d)
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
