//! Path simulation, backward resampling, exit limits and extremal flows.

pub mod discrete;

use crate::error::{param, Result};
use crate::kernels::{backward_ratio, backward_thin, forward_increment, sample_marginal, Clock, FlowSpec, Variant};
use crate::measures::{cell_counts, config_leq, CellMeasure, PointConfig, Window};
use crate::samplers::{sample_poisson_process, thin};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A realization of `(Y_t)` on a finite time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathRepr", into = "PathRepr")]
pub struct Path {
    variant: Variant,
    window: Window,
    grid: Vec<f64>,
    states: Vec<PointConfig>,
}

/// JSON-lines form: one object per path, states as bare atom lists.
#[derive(Serialize, Deserialize)]
struct PathRepr {
    variant: Variant,
    lo: f64,
    hi: f64,
    cells: usize,
    grid: Vec<f64>,
    states: Vec<Vec<(f64, u64)>>,
}

impl TryFrom<PathRepr> for Path {
    type Error = crate::Error;
    fn try_from(r: PathRepr) -> Result<Self> {
        let window = Window::new(r.lo, r.hi, r.cells)?;
        if r.grid.len() != r.states.len() {
            return Err(param("path grid and states differ in length"));
        }
        check_grid(&r.grid, r.variant)?;
        let states = r
            .states
            .into_iter()
            .map(|atoms| PointConfig::from_atoms(window, atoms))
            .collect::<Result<Vec<_>>>()?;
        Path::new(r.variant, window, r.grid, states)
    }
}

impl From<Path> for PathRepr {
    fn from(p: Path) -> Self {
        let window = p.window;
        PathRepr {
            variant: p.variant,
            lo: window.lo(),
            hi: window.hi(),
            cells: window.cells(),
            grid: p.grid,
            states: p.states.into_iter().map(|s| s.atoms().to_vec()).collect(),
        }
    }
}

fn check_grid(grid: &[f64], variant: Variant) -> Result<()> {
    let horizon = variant.horizon();
    for (k, &t) in grid.iter().enumerate() {
        if !horizon.contains(t) {
            return Err(param(format!("grid time {t} outside the {variant} horizon")));
        }
        if k > 0 && grid[k - 1] >= t {
            return Err(param("grid must be strictly increasing"));
        }
    }
    Ok(())
}

impl Path {
    /// Validating constructor; states must be monotone.
    pub fn new(variant: Variant, window: Window, grid: Vec<f64>, states: Vec<PointConfig>) -> Result<Self> {
        check_grid(&grid, variant)?;
        if grid.len() != states.len() {
            return Err(param("path grid and states differ in length"));
        }
        for s in &states {
            window.check_same(s.window())?;
        }
        let path = Self {
            variant,
            window,
            grid,
            states,
        };
        if path.monotonicity_violations() > 0 {
            return Err(param("path states are not increasing"));
        }
        Ok(path)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn states(&self) -> &[PointConfig] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Number of `k` with `states[k] ≰ states[k+1]`.
    pub fn monotonicity_violations(&self) -> usize {
        self.states
            .windows(2)
            .filter(|w| !config_leq(&w[0], &w[1]).unwrap_or(false))
            .count()
    }

    /// Cell counts of every state.
    pub fn counts(&self) -> Vec<Vec<u64>> {
        self.states.iter().map(cell_counts).collect()
    }
}

/// Initial state at time 0: empty, except `Y_0 ~ Cox(Λ)` on the
/// condensation clock.
fn initial_state<R: Rng + ?Sized>(spec: &FlowSpec, rng: &mut R) -> Result<PointConfig> {
    match spec.variant {
        Variant::CoxMixture => sample_marginal(spec, 0.0, rng),
        _ => Ok(PointConfig::empty(*spec.rho.window())),
    }
}

/// Simulates `Y` on `grid` by iterated forward increments from time 0.
pub fn simulate_path<R: Rng + ?Sized>(spec: &FlowSpec, grid: &[f64], rng: &mut R) -> Result<Path> {
    check_grid(grid, spec.variant)?;
    let mut state = initial_state(spec, rng)?;
    let mut time = 0.0;
    let mut states = Vec::with_capacity(grid.len());
    for &t in grid {
        if t > time {
            let inc = forward_increment(spec, time, t, &state, rng)?;
            state = state.superpose(&inc)?;
            time = t;
        }
        states.push(state.clone());
    }
    Ok(Path {
        variant: spec.variant,
        window: *spec.rho.window(),
        grid: grid.to_vec(),
        states,
    })
}

/// Keeps `states[pivot..]` and redraws the earlier states backwards.
pub fn backward_resample<R: Rng + ?Sized>(spec: &FlowSpec, path: &Path, pivot: usize, rng: &mut R) -> Result<Path> {
    if pivot >= path.len() {
        return Err(param(format!("pivot index {pivot} out of range for a path of {}", path.len())));
    }
    if spec.variant != path.variant {
        return Err(param(format!("path variant {} does not match spec {}", path.variant, spec.variant)));
    }
    let mut states = path.states.clone();
    for k in (0..pivot).rev() {
        states[k] = backward_thin(spec, path.grid[k], path.grid[k + 1], &states[k + 1], rng)?;
    }
    Ok(Path {
        variant: path.variant,
        window: path.window,
        grid: path.grid.clone(),
        states,
    })
}

/// Scaled terminal state approximating the directing measure.
pub fn exit_limit(path: &Path) -> Result<CellMeasure> {
    let (last_t, last) = match (path.grid.last(), path.states.last()) {
        (Some(&t), Some(s)) => (t, s),
        _ => return Err(param("exit limit of an empty path")),
    };
    let counts = CellMeasure::from_counts(last);
    match path.variant {
        Variant::PolyaSum | Variant::CoxMixture => counts.scaled(1.0 - last_t),
        Variant::Poisson => {
            if last_t == 0.0 {
                return Err(param("poisson exit limit needs a positive terminal time"));
            }
            counts.scaled(1.0 / last_t)
        }
        Variant::PolyaDifference => Ok(counts),
    }
}

/// Extremal process `𝖯_ν`: Poisson terminal state, earlier states by
/// backward thinning.
///
/// On the Pólya clock the terminal intensity is `t_n/(1−t_n) · ν`; on the
/// condensation clock it is `ν/(1−t_n)`.
pub fn sample_extremal_flow<R: Rng + ?Sized>(nu: &CellMeasure, grid: &[f64], clock: Clock, rng: &mut R) -> Result<Path> {
    let variant = match clock {
        Clock::Polya => Variant::PolyaSum,
        Clock::Condensation => Variant::CoxMixture,
    };
    check_grid(grid, variant)?;
    let window = *nu.window();
    let Some(&t_last) = grid.last() else {
        return Ok(Path {
            variant,
            window,
            grid: Vec::new(),
            states: Vec::new(),
        });
    };
    let scale = match clock {
        Clock::Polya => t_last / (1.0 - t_last),
        Clock::Condensation => 1.0 / (1.0 - t_last),
    };
    let mut states = vec![PointConfig::empty(window); grid.len()];
    states[grid.len() - 1] = sample_poisson_process(&nu.scaled(scale)?, rng);
    for k in (0..grid.len() - 1).rev() {
        states[k] = thin(&states[k + 1], backward_ratio(variant, grid[k], grid[k + 1]), rng)?;
    }
    Ok(Path {
        variant,
        window,
        grid: grid.to_vec(),
        states,
    })
}
