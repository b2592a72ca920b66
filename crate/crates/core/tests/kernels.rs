use polyaflow::dist::{nb_pmf, poisson_pmf};
use polyaflow::kernels::{
    backward_ratio, backward_thin, forward_increment, gamma_param, gamma_param_difference, split_posterior, CoxPosterior, MixtureComponent,
};
use polyaflow::mc::replicate;
use polyaflow::samplers::{sample_polya_sum, thin, PolyaParams};
use polyaflow::verify::stats::{chi_square_pmf, chi_square_two_sample};
use polyaflow::{CellMeasure, FlowSpec, PointConfig, RngStream, Variant, Window};
use proptest::prelude::*;

const N: usize = 100_000;

fn measure(masses: &[f64]) -> CellMeasure {
    CellMeasure::new(Window::unit(masses.len()).unwrap(), masses.to_vec()).unwrap()
}

fn empty1() -> PointConfig {
    PointConfig::empty(Window::unit(1).unwrap())
}

#[test]
fn gamma_param_values() {
    assert_eq!(gamma_param(0.37, 1.0).unwrap(), 0.37);
    assert!((gamma_param(0.5, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let (z, q1, q2) = (0.7, 0.4, 0.6);
    let lhs = gamma_param(z, q1 * q2).unwrap();
    let rhs = gamma_param(gamma_param(z, q2).unwrap(), q1).unwrap();
    assert!((lhs - rhs).abs() < 1e-12);
    assert!(gamma_param(0.0, 0.5).is_err());
    assert!(gamma_param(0.5, 0.0).is_err());
    assert!(gamma_param(0.5, 1.1).is_err());
}

#[test]
fn gamma_param_difference_values() {
    assert_eq!(gamma_param_difference(2.5, 1.0).unwrap(), 2.5);
    assert!((gamma_param_difference(1.0, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let lhs = gamma_param_difference(1.0, 0.24).unwrap();
    let rhs = gamma_param_difference(gamma_param_difference(1.0, 0.6).unwrap(), 0.4).unwrap();
    assert!((lhs - rhs).abs() < 1e-12);
    assert!(gamma_param_difference(-1.0, 0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gamma_param_composes(z in 0.001f64..0.999, q1 in 0.001f64..=1.0, q2 in 0.001f64..=1.0) {
        let lhs = gamma_param(z, q1 * q2).unwrap();
        let rhs = gamma_param(gamma_param(z, q2).unwrap(), q1).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
        prop_assert!(lhs > 0.0 && lhs < 1.0);
    }

    #[test]
    fn gamma_param_difference_composes(z in 0.001f64..50.0, q1 in 0.001f64..=1.0, q2 in 0.001f64..=1.0) {
        let lhs = gamma_param_difference(z, q1 * q2).unwrap();
        let rhs = gamma_param_difference(gamma_param_difference(z, q2).unwrap(), q1).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn backward_ratios_are_probabilities(s in 0.0f64..0.99, dt in 0.0f64..0.5) {
        let t = (s + dt).min(0.999);
        for v in [Variant::PolyaSum, Variant::CoxMixture, Variant::PolyaDifference] {
            let r = backward_ratio(v, s, t);
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}

#[test]
fn backward_ratio_values() {
    assert_eq!(backward_ratio(Variant::PolyaSum, 0.4, 0.4), 1.0);
    assert_eq!(backward_ratio(Variant::PolyaSum, 0.0, 0.5), 0.0);
    assert!((backward_ratio(Variant::PolyaSum, 0.25, 0.5) - 1.0 / 3.0).abs() < 1e-15);
    assert!((backward_ratio(Variant::Poisson, 1.0, 4.0) - 0.25).abs() < 1e-15);
}

#[test]
fn backward_thin_from_zero_is_empty() {
    let spec = FlowSpec::polya_sum(measure(&[2.0])).unwrap();
    let state = PointConfig::from_atoms(Window::unit(1).unwrap(), vec![(0.3, 4)]).unwrap();
    let mut rng = RngStream::new(1, 0).rng();
    assert!(backward_thin(&spec, 0.0, 0.5, &state, &mut rng).unwrap().is_empty());
    assert!(backward_thin(&spec, 0.6, 0.5, &state, &mut rng).is_err());
}

#[test]
fn forward_increment_polya_sum_from_zero() {
    let spec = FlowSpec::polya_sum(measure(&[1.0])).unwrap();
    let counts = replicate(N, RngStream::new(2, 0), 0, |rng| {
        forward_increment(&spec, 0.0, 0.5, &empty1(), rng).unwrap().total()
    });
    let (_, p, _) = chi_square_pmf(&counts, &|n| nb_pmf(1.0, 0.5, n)).unwrap();
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn forward_increment_short_step_is_usually_empty() {
    let spec = FlowSpec::polya_sum(measure(&[1.0])).unwrap();
    let nonempty = replicate(10_000, RngStream::new(3, 0), 0, |rng| {
        !forward_increment(&spec, 0.3, 0.3 + 1e-7, &empty1(), rng).unwrap().is_empty()
    });
    assert!(nonempty.iter().filter(|&&b| b).count() <= 2);
}

#[test]
fn forward_increment_poisson() {
    let spec = FlowSpec::poisson(measure(&[1.0])).unwrap();
    let counts = replicate(N, RngStream::new(4, 0), 0, |rng| {
        forward_increment(&spec, 1.0, 3.0, &empty1(), rng).unwrap().total()
    });
    let (_, p, _) = chi_square_pmf(&counts, &|n| poisson_pmf(2.0, n)).unwrap();
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn forward_increment_checks_order_and_domain() {
    let mut rng = RngStream::new(5, 0).rng();
    let spec = FlowSpec::polya_sum(measure(&[1.0])).unwrap();
    assert!(forward_increment(&spec, 0.5, 0.2, &empty1(), &mut rng).is_err());
    let diff = FlowSpec::polya_difference(measure(&[2.0])).unwrap();
    let too_big = PointConfig::from_atoms(Window::unit(1).unwrap(), vec![(0.5, 3)]).unwrap();
    assert!(forward_increment(&diff, 0.0, 1.0, &too_big, &mut rng).is_err());
}

#[test]
fn sampling_lemma_second_pair() {
    let (z, q) = (0.3, 0.8);
    let params = PolyaParams::new(z, measure(&[2.0])).unwrap();
    let counts = replicate(N, RngStream::new(6, 0), 0, |rng| {
        thin(&sample_polya_sum(&params, rng), q, rng).unwrap().total()
    });
    let g = gamma_param(z, q).unwrap();
    let (_, p, _) = chi_square_pmf(&counts, &|n| nb_pmf(2.0, g, n)).unwrap();
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn single_component_posterior_is_prior() {
    let lam = measure(&[2.0]);
    let spec = FlowSpec::cox_mixture(vec![MixtureComponent {
        weight: 1.0,
        intensity: lam.clone(),
    }])
    .unwrap();
    let obs = PointConfig::from_atoms(Window::unit(1).unwrap(), vec![(0.5, 5)]).unwrap();
    match split_posterior(&spec, 0.5, 0.4, &obs).unwrap() {
        CoxPosterior::Mixture { weights, components } => {
            assert_eq!(weights, vec![1.0]);
            assert_eq!(components, vec![lam]);
        }
        other => panic!("unexpected posterior {other:?}"),
    }
}

#[test]
fn two_component_posterior_weights() {
    let spec = FlowSpec::cox_mixture(vec![
        MixtureComponent {
            weight: 0.5,
            intensity: measure(&[1.0]),
        },
        MixtureComponent {
            weight: 0.5,
            intensity: measure(&[4.0]),
        },
    ])
    .unwrap();
    // exposure p/q = 1
    let CoxPosterior::Mixture { weights, .. } = split_posterior(&spec, 0.5, 0.5, &empty1()).unwrap() else {
        panic!("mixture expected");
    };
    let e1 = (-1.0f64).exp();
    let e4 = (-4.0f64).exp();
    assert!((weights[0] - e1 / (e1 + e4)).abs() < 1e-14);
    assert!((weights[1] - e4 / (e1 + e4)).abs() < 1e-14);
}

#[test]
fn gamma_posterior_is_conjugate() {
    let spec = FlowSpec::cox_gamma(measure(&[1.5]), 1.0).unwrap();
    let obs = PointConfig::from_atoms(Window::unit(1).unwrap(), vec![(0.2, 2), (0.7, 1)]).unwrap();
    let post = split_posterior(&spec, 0.5, 0.25, &obs).unwrap();
    assert_eq!(
        post,
        CoxPosterior::Gamma {
            shape: vec![4.5],
            rate: 1.5
        }
    );
    assert!(split_posterior(&FlowSpec::polya_sum(measure(&[1.0])).unwrap(), 0.5, 0.5, &obs).is_err());
}

#[test]
fn splitting_reconstructs_the_marginal() {
    // P_q = Cox(Λ/q) with a two-point environment; kept part ⊕ posterior increment ~ P_q
    let spec = FlowSpec::cox_mixture(vec![
        MixtureComponent {
            weight: 0.3,
            intensity: measure(&[0.5]),
        },
        MixtureComponent {
            weight: 0.7,
            intensity: measure(&[2.0]),
        },
    ])
    .unwrap();
    let (q, p) = (0.5, 0.4);
    let direct = replicate(N, RngStream::new(7, 0), 0, |rng| {
        let env = polyaflow::kernels::prior_environment(&spec).sample_environment(&spec.rho, rng);
        polyaflow::samplers::sample_poisson_process(&env.scaled(1.0 / q).unwrap(), rng).total()
    });
    let split = replicate(N, RngStream::new(7, 1), 0, |rng| {
        let env = polyaflow::kernels::prior_environment(&spec).sample_environment(&spec.rho, rng);
        let kept = polyaflow::samplers::sample_poisson_process(&env.scaled(p / q).unwrap(), rng);
        let post = split_posterior(&spec, q, p, &kept).unwrap();
        kept.total() + post.sample_increment((1.0 - p) / q, &spec.rho, rng).total()
    });
    let (_, pv, _) = chi_square_two_sample(&direct, &split).unwrap();
    assert!(pv > 0.01, "p = {pv}");
}
