use polyaflow::dist::{nb_pmf, poisson_pmf};
use polyaflow::flows::discrete::{
    generator_apply, reduced_palm_enumerate, semigroup_apply, semigroup_derivative, CountFunction, DiscreteModel, ModelClock,
};
use polyaflow::kernels::Clock;
use polyaflow::mc::replicate;
use polyaflow::measures::cell_counts;
use polyaflow::samplers::sample_gamma_measure;
use polyaflow::verify::stats::{chi_square_pmf, chi_square_two_sample, ks_distance};
use polyaflow::{backward_resample, exit_limit, sample_extremal_flow, simulate_path, CellMeasure, FlowSpec, Path, RngStream, Window};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Gamma};

const N: usize = 100_000;

fn measure(masses: &[f64]) -> CellMeasure {
    CellMeasure::new(Window::unit(masses.len()).unwrap(), masses.to_vec()).unwrap()
}

fn polya(rho: f64) -> FlowSpec {
    FlowSpec::polya_sum(measure(&[rho])).unwrap()
}

#[test]
fn empty_grid_gives_empty_path() {
    let mut rng = RngStream::new(1, 0).rng();
    assert!(simulate_path(&polya(2.0), &[], &mut rng).unwrap().is_empty());
    assert!(simulate_path(&polya(2.0), &[0.5, 0.5], &mut rng).is_err());
    assert!(simulate_path(&polya(2.0), &[0.5, 1.0], &mut rng).is_err());
}

#[test]
fn polya_marginal_at_half() {
    let counts = replicate(N, RngStream::new(2, 0), 0, |rng| {
        simulate_path(&polya(2.0), &[0.5], rng).unwrap().counts()[0][0]
    });
    let (_, p, _) = chi_square_pmf(&counts, &|n| nb_pmf(2.0, 0.5, n)).unwrap();
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn polya_marginals_on_a_grid_two_cells() {
    let spec = FlowSpec::polya_sum(measure(&[1.0, 0.5])).unwrap();
    let grid = [0.25, 0.5, 0.75];
    let paths = replicate(N, RngStream::new(3, 0), 0, |rng| simulate_path(&spec, &grid, rng).unwrap());
    for (k, &t) in grid.iter().enumerate() {
        for (cell, &rho) in [1.0, 0.5].iter().enumerate() {
            let counts: Vec<u64> = paths.iter().map(|p| cell_counts(&p.states()[k])[cell]).collect();
            let (_, p, _) = chi_square_pmf(&counts, &|n| nb_pmf(rho, t, n)).unwrap();
            // six tests at 1%
            assert!(p > 0.01 / 6.0, "t = {t}, cell {cell}: p = {p}");
        }
    }
    assert!(paths.iter().all(|p| p.monotonicity_violations() == 0));
}

#[test]
fn poisson_marginals() {
    let spec = FlowSpec::poisson(measure(&[1.0])).unwrap();
    let grid = [1.0, 2.0, 4.0];
    let paths = replicate(N, RngStream::new(4, 0), 0, |rng| simulate_path(&spec, &grid, rng).unwrap());
    for (k, &t) in grid.iter().enumerate() {
        let counts: Vec<u64> = paths.iter().map(|p| p.counts()[k][0]).collect();
        let (_, p, _) = chi_square_pmf(&counts, &|n| poisson_pmf(t, n)).unwrap();
        assert!(p > 0.01 / 3.0, "t = {t}: p = {p}");
    }
}

#[test]
fn backward_resample_edge_cases() {
    let spec = polya(2.0);
    let mut rng = RngStream::new(5, 0).rng();
    let path = simulate_path(&spec, &[0.25, 0.5], &mut rng).unwrap();
    assert_eq!(backward_resample(&spec, &path, 0, &mut rng).unwrap(), path);
    assert!(backward_resample(&spec, &path, 2, &mut rng).is_err());
    let empty = Path::new(
        path.variant(),
        *path.window(),
        vec![0.25, 0.5],
        vec![polyaflow::PointConfig::empty(*path.window()); 2],
    )
    .unwrap();
    let r = backward_resample(&spec, &empty, 1, &mut rng).unwrap();
    assert!(r.states()[0].is_empty());
}

#[test]
fn backward_resample_preserves_law() {
    let spec = polya(2.0);
    for (s, t) in [(0.25, 0.5), (0.5, 0.9)] {
        let direct = replicate(N, RngStream::new(6, 0), 0, |rng| {
            simulate_path(&spec, &[s, t], rng).unwrap().counts()[0][0]
        });
        let resampled = replicate(N, RngStream::new(6, 1), 0, |rng| {
            let p = simulate_path(&spec, &[s, t], rng).unwrap();
            backward_resample(&spec, &p, 1, rng).unwrap().counts()[0][0]
        });
        let (_, p, _) = chi_square_two_sample(&direct, &resampled).unwrap();
        assert!(p > 0.01 / 2.0, "(s, t) = ({s}, {t}): p = {p}");
    }
}

#[test]
fn exit_limit_is_gamma() {
    let spec = polya(2.0);
    let masses: Vec<f64> = replicate(N, RngStream::new(7, 0), 0, |rng| {
        exit_limit(&simulate_path(&spec, &[0.999], rng).unwrap()).unwrap().masses()[0]
    });
    let g = Gamma::new(2.0, 1.0).unwrap();
    let ks = ks_distance(&masses, &|x| g.cdf(x)).unwrap();
    assert!(ks < 0.02, "KS = {ks}");
}

#[test]
fn exit_limit_of_poisson_and_empty() {
    let spec = FlowSpec::poisson(measure(&[1.0])).unwrap();
    let mut rng = RngStream::new(8, 0).rng();
    let q = exit_limit(&simulate_path(&spec, &[1000.0], &mut rng).unwrap()).unwrap();
    assert!((q.masses()[0] - 1.0).abs() < 0.15);
    let empty = simulate_path(&spec, &[], &mut rng).unwrap();
    assert!(exit_limit(&empty).is_err());
    let zero = Path::new(
        polyaflow::Variant::PolyaSum,
        Window::unit(1).unwrap(),
        vec![0.5],
        vec![polyaflow::PointConfig::empty(Window::unit(1).unwrap())],
    )
    .unwrap();
    assert_eq!(exit_limit(&zero).unwrap().masses(), &[0.0]);
}

#[test]
fn extremal_flow_edge_cases() {
    let mut rng = RngStream::new(9, 0).rng();
    let zero = CellMeasure::zero(Window::unit(2).unwrap());
    let p = sample_extremal_flow(&zero, &[0.2, 0.6, 0.9], Clock::Polya, &mut rng).unwrap();
    assert!(p.states().iter().all(|s| s.is_empty()));
    let counts = replicate(N, RngStream::new(9, 1), 0, |rng| {
        sample_extremal_flow(&measure(&[1.0]), &[0.5], Clock::Polya, rng).unwrap().counts()[0][0]
    });
    let (_, pv, _) = chi_square_pmf(&counts, &|n| poisson_pmf(1.0, n)).unwrap();
    assert!(pv > 0.01, "p = {pv}");
}

#[test]
fn gamma_mixture_of_extremal_flows_is_the_polya_flow() {
    let rho = measure(&[2.0]);
    let spec = FlowSpec::polya_sum(rho.clone()).unwrap();
    let grid = [0.4, 0.8];
    let direct = replicate(N, RngStream::new(10, 0), 0, |rng| {
        simulate_path(&spec, &grid, rng).unwrap().counts()
    });
    let mixed = replicate(N, RngStream::new(10, 1), 0, |rng| {
        let q = sample_gamma_measure(&rho, rng);
        sample_extremal_flow(&q, &grid, Clock::Polya, rng).unwrap().counts()
    });
    let pair = |v: &Vec<Vec<u64>>| (v[0][0], v[1][0]);
    let a: Vec<(u64, u64)> = direct.iter().map(pair).collect();
    let b: Vec<(u64, u64)> = mixed.iter().map(pair).collect();
    let (_, p, _) = chi_square_two_sample(&a, &b).unwrap();
    assert!(p > 0.01, "joint p = {p}");
}

#[test]
fn polya_difference_paths_stay_below_base() {
    let spec = FlowSpec::polya_difference(measure(&[3.0, 1.0])).unwrap();
    let paths = replicate(1000, RngStream::new(11, 0), 0, |rng| {
        simulate_path(&spec, &[0.5, 2.0, 50.0], rng).unwrap()
    });
    for p in &paths {
        assert_eq!(p.monotonicity_violations(), 0);
        let last = p.counts().pop().unwrap();
        assert!(last[0] <= 3 && last[1] <= 1);
    }
}

#[test]
fn cox_mixture_paths_are_monotone() {
    let spec = FlowSpec::cox_gamma(measure(&[1.0, 2.0]), 0.5).unwrap();
    let paths = replicate(2000, RngStream::new(12, 0), 0, |rng| {
        simulate_path(&spec, &[0.1, 0.5, 0.9], rng).unwrap()
    });
    assert!(paths.iter().all(|p| p.monotonicity_violations() == 0));
}

fn oracle(rho: Vec<f64>) -> DiscreteModel {
    DiscreteModel::new(rho, 400, ModelClock::Polya, 0.9).unwrap()
}

fn ck_deviation(model: &DiscreteModel, phi: &dyn CountFunction, states: &[Vec<u64>]) -> f64 {
    let tu = semigroup_apply(model, 0.3, 0.6, phi).unwrap();
    let composed = semigroup_apply(model, 0.1, 0.3, &tu).unwrap();
    let direct = semigroup_apply(model, 0.1, 0.6, phi).unwrap();
    states
        .iter()
        .map(|nu| (composed.eval(nu).unwrap() - direct.eval(nu).unwrap()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn chapman_kolmogorov() {
    let one = DiscreteModel::new(vec![2.0], 400, ModelClock::Polya, 0.6).unwrap();
    let phi = |c: &[u64]| (-(c[0] as f64) * 0.3).exp() + (c[0] as f64).sqrt();
    let states: Vec<Vec<u64>> = (0..20).map(|n| vec![n]).collect();
    let worst = ck_deviation(&one, &phi, &states);
    assert!(worst < 1e-9, "one cell: sup deviation {worst}");

    let two = DiscreteModel::new(vec![0.5, 0.3], 120, ModelClock::Polya, 0.6).unwrap();
    let phi = |c: &[u64]| (-(c[0] as f64) * 0.3).exp() + (c[1] as f64 / (1.0 + c[0] as f64));
    let states: Vec<Vec<u64>> = (0..3).flat_map(|a| (0..3).map(move |b| vec![a, b])).collect();
    let worst = ck_deviation(&two, &phi, &states);
    assert!(worst < 1e-9, "two cells: sup deviation {worst}");
}

#[test]
fn semigroup_nb_mean_from_zero() {
    let model = oracle(vec![1.0]);
    let phi = |c: &[u64]| c[0] as f64;
    let t = semigroup_apply(&model, 0.0, 0.5, &phi).unwrap();
    assert!((t.eval(&[0]).unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn palm_of_zero_is_the_marginal() {
    let model = oracle(vec![1.0, 2.0]);
    let palm = reduced_palm_enumerate(&model, 0.5, &[0, 0]).unwrap();
    let law = model.marginal_pmf(0.5).unwrap();
    for (mu, p) in law.iter().take(200) {
        assert!((palm.prob(&mu) - p).abs() < 1e-15);
    }
}

#[test]
fn polya_palm_raises_the_shape() {
    let model = oracle(vec![1.5]);
    let palm = reduced_palm_enumerate(&model, 0.4, &[1]).unwrap();
    for n in 0..40 {
        assert!((palm.prob(&[n]) - nb_pmf(2.5, 0.4, n)).abs() < 1e-12, "n = {n}");
    }
}

#[test]
fn generator_vanishes_on_constants() {
    let model = oracle(vec![2.0]);
    let one = |_: &[u64]| 1.0;
    assert_eq!(generator_apply(&model, 0.3, &one, &[2]).unwrap(), 0.0);
}

#[test]
fn generator_matches_semigroup_derivative_on_condensation_clock() {
    let model = DiscreteModel::new(vec![2.0], 400, ModelClock::Condensation { rate: 1.0 }, 0.5).unwrap();
    let phi = |c: &[u64]| (-0.5 * c[0] as f64).exp();
    for nu in [[0u64], [1], [3]] {
        let g = generator_apply(&model, 0.3, &phi, &nu).unwrap();
        let coarse = ((semigroup_derivative(&model, 0.3, 1e-3, &phi, &nu).unwrap() - g) / g).abs();
        let fine = ((semigroup_derivative(&model, 0.3, 1e-4, &phi, &nu).unwrap() - g) / g).abs();
        assert!(fine < 1e-2 && fine < coarse, "nu = {nu:?}: {coarse} -> {fine}");
    }
}

#[test]
fn count_functions_compose() {
    let model = oracle(vec![1.0]);
    let phi = |c: &[u64]| c[0] as f64;
    let id = semigroup_apply(&model, 0.2, 0.2, &phi).unwrap();
    assert_eq!(id.eval(&[5]).unwrap(), 5.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn path_json_round_trip(seed in any::<u64>(), cells in 1usize..4, t1 in 0.01f64..0.5, dt in 0.01f64..0.49) {
        let spec = FlowSpec::polya_sum(measure(&vec![1.5; cells])).unwrap();
        let mut rng = RngStream::new(seed, 0).rng();
        let path = simulate_path(&spec, &[t1, t1 + dt], &mut rng).unwrap();
        let line = serde_json::to_string(&path).unwrap();
        prop_assert!(!line.contains('\n'));
        let back: Path = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(back, path);
    }

    #[test]
    fn simulated_paths_are_monotone(seed in any::<u64>(), rho in 0.1f64..5.0) {
        let mut rng = RngStream::new(seed, 0).rng();
        let path = simulate_path(&polya(rho), &[0.1, 0.3, 0.6, 0.9, 0.99], &mut rng).unwrap();
        prop_assert_eq!(path.monotonicity_violations(), 0);
    }
}

#[test]
fn decreasing_path_json_is_rejected() {
    let line = r#"{"variant":"polya_sum","lo":0.0,"hi":1.0,"cells":1,"grid":[0.2,0.4],"states":[[[0.5,2]],[[0.5,1]]]}"#;
    assert!(serde_json::from_str::<Path>(line).is_err());
}
