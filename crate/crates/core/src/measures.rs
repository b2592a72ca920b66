//! Point configurations, cell measures and step functions on a 1-d window.
//!
//! A [`Window`] `[lo, hi)` is split into `cells` equal half-open cells. All
//! measures and test functions in the crate are cell-measurable, so every
//! identity downstream reduces to statements about per-cell counts or masses.

use crate::error::{param, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WindowRepr")]
pub struct Window {
    lo: f64,
    hi: f64,
    cells: usize,
}

#[derive(Deserialize)]
struct WindowRepr {
    lo: f64,
    hi: f64,
    cells: usize,
}

impl TryFrom<WindowRepr> for Window {
    type Error = crate::Error;
    fn try_from(r: WindowRepr) -> Result<Self> {
        Window::new(r.lo, r.hi, r.cells)
    }
}

impl Window {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(param(format!("window needs finite lo < hi, got [{lo}, {hi})")));
        }
        if cells == 0 {
            return Err(param("window needs at least one cell"));
        }
        Ok(Self { lo, hi, cells })
    }

    /// `[0, 1)` split into `cells` cells.
    pub fn unit(cells: usize) -> Result<Self> {
        Self::new(0.0, 1.0, cells)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Left boundary of cell `k`; `boundary(cells) == hi`.
    pub fn boundary(&self, k: usize) -> f64 {
        if k >= self.cells {
            return self.hi;
        }
        self.lo + k as f64 * (self.hi - self.lo) / self.cells as f64
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }

    /// Cell holding `x` under half-open binning, `None` outside the window.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let raw = ((x - self.lo) / (self.hi - self.lo) * self.cells as f64).floor();
        let mut k = (raw.max(0.0) as usize).min(self.cells - 1);
        while k > 0 && x < self.boundary(k) {
            k -= 1;
        }
        while k + 1 < self.cells && x >= self.boundary(k + 1) {
            k += 1;
        }
        Some(k)
    }

    /// Midpoint of cell `k`.
    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.boundary(k) + self.boundary(k + 1))
    }

    pub(crate) fn check_same(&self, other: &Window) -> Result<()> {
        if self != other {
            return Err(param(format!(
                "window mismatch: [{}, {})x{} vs [{}, {})x{}",
                self.lo, self.hi, self.cells, other.lo, other.hi, other.cells
            )));
        }
        Ok(())
    }
}

/// A finite integer-multiplicity point configuration on a window.
///
/// Atoms are kept sorted by strictly increasing location; multiplicities are
/// at least one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointConfigRepr", into = "PointConfigRepr")]
pub struct PointConfig {
    window: Window,
    atoms: Vec<(f64, u64)>,
}

#[derive(Serialize, Deserialize)]
struct PointConfigRepr {
    lo: f64,
    hi: f64,
    cells: usize,
    atoms: Vec<(f64, u64)>,
}

impl TryFrom<PointConfigRepr> for PointConfig {
    type Error = crate::Error;
    fn try_from(r: PointConfigRepr) -> Result<Self> {
        PointConfig::from_atoms(Window::new(r.lo, r.hi, r.cells)?, r.atoms)
    }
}

impl From<PointConfig> for PointConfigRepr {
    fn from(c: PointConfig) -> Self {
        Self {
            lo: c.window.lo,
            hi: c.window.hi,
            cells: c.window.cells,
            atoms: c.atoms,
        }
    }
}

impl PointConfig {
    pub fn empty(window: Window) -> Self {
        Self { window, atoms: Vec::new() }
    }

    /// Strict constructor: locations must be strictly increasing, inside the
    /// window, with multiplicities ≥ 1.
    pub fn from_atoms(window: Window, atoms: Vec<(f64, u64)>) -> Result<Self> {
        for (i, &(x, m)) in atoms.iter().enumerate() {
            if !window.contains(x) {
                return Err(param(format!("atom location {x} outside the window")));
            }
            if m == 0 {
                return Err(param(format!("atom at {x} has zero multiplicity")));
            }
            if i > 0 && atoms[i - 1].0 >= x {
                return Err(param("atom locations must be strictly increasing"));
            }
        }
        let total = atoms.iter().try_fold(0u64, |acc, &(_, m)| acc.checked_add(m));
        if total.is_none() {
            return Err(param("total multiplicity overflows"));
        }
        Ok(Self { window, atoms })
    }

    /// Builds a configuration from unordered points, merging equal locations.
    pub fn from_points(window: Window, points: impl IntoIterator<Item = (f64, u64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, u64)> = points.into_iter().filter(|&(_, m)| m > 0).collect();
        for &(x, _) in &atoms {
            if !window.contains(x) {
                return Err(param(format!("atom location {x} outside the window")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            window,
            atoms: merge_sorted(atoms),
        })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn atoms(&self) -> &[(f64, u64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.atoms.iter().map(|&(_, m)| m).sum()
    }

    /// Multiplicity at exactly `x`.
    pub fn multiplicity(&self, x: f64) -> u64 {
        match self.atoms.binary_search_by(|a| a.0.total_cmp(&x)) {
            Ok(i) => self.atoms[i].1,
            Err(_) => 0,
        }
    }

    /// Atomwise superposition; equal locations add their multiplicities.
    pub fn superpose(&self, other: &PointConfig) -> Result<PointConfig> {
        self.window.check_same(&other.window)?;
        let mut atoms = Vec::with_capacity(self.atoms.len() + other.atoms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.atoms.len() && j < other.atoms.len() {
            let (a, b) = (self.atoms[i], other.atoms[j]);
            match a.0.total_cmp(&b.0) {
                std::cmp::Ordering::Less => {
                    atoms.push(a);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    atoms.push(b);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    atoms.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        atoms.extend_from_slice(&self.atoms[i..]);
        atoms.extend_from_slice(&other.atoms[j..]);
        Ok(PointConfig {
            window: self.window,
            atoms,
        })
    }

    /// `self − sub`, defined only when `sub ≤ self`.
    pub fn difference(&self, sub: &PointConfig) -> Result<PointConfig> {
        if !config_leq(sub, self)? {
            return Err(param("difference requires sub ≤ self"));
        }
        let atoms = self
            .atoms
            .iter()
            .filter_map(|&(x, m)| {
                let left = m - sub.multiplicity(x);
                (left > 0).then_some((x, left))
            })
            .collect();
        Ok(PointConfig {
            window: self.window,
            atoms,
        })
    }

    /// Same atoms with new multiplicities; zero entries drop the atom.
    pub(crate) fn with_multiplicities(&self, mults: impl IntoIterator<Item = u64>) -> PointConfig {
        let atoms = self
            .atoms
            .iter()
            .zip(mults)
            .filter_map(|(&(x, _), m)| (m > 0).then_some((x, m)))
            .collect();
        PointConfig {
            window: self.window,
            atoms,
        }
    }
}

fn merge_sorted(atoms: Vec<(f64, u64)>) -> Vec<(f64, u64)> {
    let mut out: Vec<(f64, u64)> = Vec::with_capacity(atoms.len());
    for (x, m) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += m,
            _ => out.push((x, m)),
        }
    }
    out
}

/// Finite nonnegative measure given by its mass on each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CellMeasureRepr", into = "CellMeasureRepr")]
pub struct CellMeasure {
    window: Window,
    masses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CellMeasureRepr {
    lo: f64,
    hi: f64,
    masses: Vec<f64>,
}

impl TryFrom<CellMeasureRepr> for CellMeasure {
    type Error = crate::Error;
    fn try_from(r: CellMeasureRepr) -> Result<Self> {
        CellMeasure::new(Window::new(r.lo, r.hi, r.masses.len())?, r.masses)
    }
}

impl From<CellMeasure> for CellMeasureRepr {
    fn from(m: CellMeasure) -> Self {
        Self {
            lo: m.window.lo,
            hi: m.window.hi,
            masses: m.masses,
        }
    }
}

impl CellMeasure {
    pub fn new(window: Window, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != window.cells {
            return Err(param(format!("{} masses for a window of {} cells", masses.len(), window.cells)));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(param(format!("cell masses must be finite and ≥ 0, got {m}")));
        }
        Ok(Self { window, masses })
    }

    pub fn zero(window: Window) -> Self {
        Self {
            masses: vec![0.0; window.cells],
            window,
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<CellMeasure> {
        CellMeasure::new(self.window, self.masses.iter().map(|m| m * factor).collect())
    }

    /// The measure of `c` binned into cells (counts as masses).
    pub fn from_counts(c: &PointConfig) -> CellMeasure {
        CellMeasure {
            window: c.window,
            masses: cell_counts(c).into_iter().map(|n| n as f64).collect(),
        }
    }

    /// Reads the measure as a configuration: one atom per cell at the
    /// midpoint carrying the cell mass. Masses must be integers.
    pub fn to_config(&self) -> Result<PointConfig> {
        let mut atoms = Vec::new();
        for (k, &m) in self.masses.iter().enumerate() {
            if m.fract() != 0.0 {
                return Err(param(format!("cell {k} mass {m} is not an integer")));
            }
            if m > 0.0 {
                atoms.push((self.window.midpoint(k), m as u64));
            }
        }
        PointConfig::from_atoms(self.window, atoms)
    }
}

/// Nonnegative cell-piecewise-constant test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    window: Window,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(window: Window, values: Vec<f64>) -> Result<Self> {
        if values.len() != window.cells {
            return Err(param(format!("{} values for a window of {} cells", values.len(), window.cells)));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(param(format!("step function values must be finite and ≥ 0, got {v}")));
        }
        Ok(Self { window, values })
    }

    pub fn constant(window: Window, value: f64) -> Result<Self> {
        Self::new(window, vec![value; window.cells])
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `x`; zero outside the window.
    pub fn eval(&self, x: f64) -> f64 {
        self.window.cell_of(x).map_or(0.0, |k| self.values[k])
    }
}

/// `a ≤ b`: every atom of `a` is dominated by `b` at the same location.
pub fn config_leq(a: &PointConfig, b: &PointConfig) -> Result<bool> {
    a.window.check_same(&b.window)?;
    let mut j = 0;
    for &(x, m) in &a.atoms {
        while j < b.atoms.len() && b.atoms[j].0 < x {
            j += 1;
        }
        if j == b.atoms.len() || b.atoms[j].0 != x || b.atoms[j].1 < m {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `∫ f dc = Σ multiplicity · f(location)`.
pub fn config_integrate(c: &PointConfig, f: &StepFunction) -> Result<f64> {
    c.window.check_same(&f.window)?;
    Ok(c.atoms.iter().map(|&(x, m)| m as f64 * f.eval(x)).sum())
}

/// Total multiplicity per cell.
pub fn cell_counts(c: &PointConfig) -> Vec<u64> {
    let mut counts = vec![0u64; c.window.cells];
    for &(x, m) in &c.atoms {
        // atoms are validated to lie in the window
        let k = c.window.cell_of(x).expect("atom inside window");
        counts[k] += m;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(cells: usize) -> Window {
        Window::unit(cells).unwrap()
    }

    fn cfg(cells: usize, atoms: &[(f64, u64)]) -> PointConfig {
        PointConfig::from_atoms(unit(cells), atoms.to_vec()).unwrap()
    }

    #[test]
    fn window_validation() {
        assert!(Window::new(1.0, 1.0, 1).is_err());
        assert!(Window::new(0.0, 1.0, 0).is_err());
        assert!(Window::new(0.0, f64::NAN, 2).is_err());
    }

    #[test]
    fn binning_is_half_open() {
        let w = unit(2);
        assert_eq!(w.cell_of(0.0), Some(0));
        assert_eq!(w.cell_of(0.5), Some(1));
        assert_eq!(w.cell_of(0.4999999), Some(0));
        assert_eq!(w.cell_of(1.0), None);
        let w3 = Window::new(0.0, 0.3, 3).unwrap();
        for k in 0..3 {
            assert_eq!(w3.cell_of(w3.boundary(k)), Some(k));
        }
    }

    #[test]
    fn leq_examples() {
        let b = cfg(2, &[(0.2, 1), (0.7, 3)]);
        assert!(config_leq(&PointConfig::empty(unit(2)), &b).unwrap());
        let a = cfg(2, &[(0.3, 2)]);
        assert!(config_leq(&a, &a).unwrap());
        let b = cfg(2, &[(0.3, 1), (0.7, 5)]);
        assert!(!config_leq(&a, &b).unwrap());
    }

    #[test]
    fn leq_window_mismatch() {
        let a = PointConfig::empty(unit(2));
        let b = PointConfig::empty(unit(3));
        assert!(matches!(config_leq(&a, &b), Err(crate::Error::Parameter(_))));
    }

    #[test]
    fn integrate_examples() {
        let f = StepFunction::new(unit(2), vec![2.0, 0.5]).unwrap();
        assert_eq!(config_integrate(&PointConfig::empty(unit(2)), &f).unwrap(), 0.0);
        let one = StepFunction::constant(unit(2), 1.0).unwrap();
        assert_eq!(config_integrate(&cfg(2, &[(0.4, 3)]), &one).unwrap(), 3.0);
        let c = cfg(2, &[(0.1, 1), (0.6, 2)]);
        assert_eq!(config_integrate(&c, &f).unwrap(), 3.0);
        let g = StepFunction::constant(unit(3), 1.0).unwrap();
        assert!(config_integrate(&c, &g).is_err());
    }

    #[test]
    fn counts_examples() {
        assert_eq!(cell_counts(&PointConfig::empty(unit(3))), vec![0, 0, 0]);
        assert_eq!(cell_counts(&cfg(2, &[(0.1, 4)])), vec![4, 0]);
        assert_eq!(cell_counts(&cfg(2, &[(0.1, 1), (0.2, 2), (0.9, 1)])), vec![3, 1]);
    }

    #[test]
    fn constructor_rejects_bad_atoms() {
        assert!(PointConfig::from_atoms(unit(1), vec![(0.5, 0)]).is_err());
        assert!(PointConfig::from_atoms(unit(1), vec![(0.5, 1), (0.5, 1)]).is_err());
        assert!(PointConfig::from_atoms(unit(1), vec![(1.5, 1)]).is_err());
        assert!(CellMeasure::new(unit(2), vec![1.0]).is_err());
        assert!(CellMeasure::new(unit(1), vec![-1.0]).is_err());
    }

    #[test]
    fn from_points_merges() {
        let c = PointConfig::from_points(unit(1), vec![(0.5, 1), (0.2, 2), (0.5, 3)]).unwrap();
        assert_eq!(c.atoms(), &[(0.2, 2), (0.5, 4)]);
    }

    #[test]
    fn difference_and_to_config() {
        let rho = CellMeasure::new(unit(2), vec![2.0, 1.0]).unwrap();
        let c = rho.to_config().unwrap();
        assert_eq!(cell_counts(&c), vec![2, 1]);
        let part = PointConfig::from_atoms(unit(2), vec![(0.25, 1)]).unwrap();
        let rest = c.difference(&part).unwrap();
        assert_eq!(cell_counts(&rest), vec![1, 1]);
        assert!(part.difference(&c).is_err());
        assert!(CellMeasure::new(unit(1), vec![1.5]).unwrap().to_config().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = cfg(2, &[(0.1, 1), (0.6, 2)]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"lo":0.0,"hi":1.0,"cells":2,"atoms":[[0.1,1],[0.6,2]]}"#);
        let back: PointConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let m: CellMeasure = serde_json::from_str(r#"{"lo":0,"hi":2,"masses":[1.5,0]}"#).unwrap();
        assert_eq!(m.window().cells(), 2);
        assert!(serde_json::from_str::<PointConfig>(r#"{"lo":0,"hi":1,"cells":1,"atoms":[[0.5,0]]}"#).is_err());
    }

    fn arb_config(cells: usize) -> impl Strategy<Value = PointConfig> {
        // small location lattice so that atoms collide across configurations
        prop::collection::vec((0u32..8, 1u64..4), 0..6).prop_map(move |pts| {
            PointConfig::from_points(Window::unit(cells).unwrap(), pts.into_iter().map(|(k, m)| (k as f64 / 8.0, m))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn leq_is_partial_order(a in arb_config(2), b in arb_config(2), c in arb_config(2)) {
            prop_assert!(config_leq(&a, &a).unwrap());
            if config_leq(&a, &b).unwrap() && config_leq(&b, &a).unwrap() {
                prop_assert_eq!(&a, &b);
            }
            if config_leq(&a, &b).unwrap() && config_leq(&b, &c).unwrap() {
                prop_assert!(config_leq(&a, &c).unwrap());
            }
            let ab = a.superpose(&b).unwrap();
            prop_assert!(config_leq(&a, &ab).unwrap());
            prop_assert_eq!(ab.difference(&a).unwrap(), b.clone());
        }

        #[test]
        fn integrate_and_counts_are_additive(
            a in arb_config(3),
            b in arb_config(3),
            vals in prop::collection::vec(0.0f64..5.0, 3),
        ) {
            let f = StepFunction::new(Window::unit(3).unwrap(), vals).unwrap();
            let ab = a.superpose(&b).unwrap();
            let lhs = config_integrate(&ab, &f).unwrap();
            let rhs = config_integrate(&a, &f).unwrap() + config_integrate(&b, &f).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
            let sum: Vec<u64> = cell_counts(&a).iter().zip(cell_counts(&b)).map(|(x, y)| x + y).collect();
            prop_assert_eq!(cell_counts(&ab), sum);
        }
    }
}
