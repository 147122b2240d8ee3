//! Sampling-level checks of the simulated heterodyne pipeline, all with
//! fixed seeds.

use std::f64::consts::SQRT_2;

use statrs::distribution::{ContinuousCDF, Normal};

use microrev::heterodyne::{
    bootstrap, estimate_log_ratio, ml_fit, run_protocol, sample_heterodyne, BootstrapConfig, ProtocolConfig,
};
use microrev::reversibility::predicted_log_ratio;
use microrev::{BathSpec, BeamSplitterSpec, ComplexAmplitude, DisplacedThermalState, TransitionQuery};

fn amp(re: f64, im: f64) -> ComplexAmplitude {
    ComplexAmplitude { re, im }
}

fn xs(state: &DisplacedThermalState, n: usize, seed: u64) -> Vec<f64> {
    sample_heterodyne(state, n, seed)
        .unwrap()
        .samples()
        .iter()
        .map(|s| s.x)
        .collect()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn vacuum_quadrature_variance() {
    let (_, var) = mean_var(&xs(&DisplacedThermalState::vacuum(), 1_000_000, 11));
    assert!((var - 1.0).abs() < 0.01, "{var}");
}

#[test]
fn displaced_quadrature_mean() {
    let s = DisplacedThermalState::new(amp(2.0, 0.0), 1.0).unwrap();
    let (m, _) = mean_var(&xs(&s, 50_000, 12));
    assert!((m - SQRT_2 * 2.0).abs() < 5.0 * (2.0f64 / 50_000.0).sqrt(), "{m}");
}

#[test]
fn ks_against_analytic_marginal() {
    let s = DisplacedThermalState::new(amp(0.7, -1.1), 0.8).unwrap();
    let law = Normal::new(SQRT_2 * 0.7, 1.8f64.sqrt()).unwrap();
    let n = 100_000;
    let critical = 1.628 / (n as f64).sqrt();
    let passes = (0..10u64)
        .filter(|&trial| {
            let mut v = xs(&s, n, 1000 + trial);
            v.sort_by(f64::total_cmp);
            let d = v
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = law.cdf(x);
                    (f - i as f64 / n as f64)
                        .abs()
                        .max(((i + 1) as f64 / n as f64 - f).abs())
                })
                .fold(0.0, f64::max);
            d < critical
        })
        .count();
    assert!(passes >= 9, "{passes}/10");
}

#[test]
fn fit_recovers_mean() {
    let s = DisplacedThermalState::new(amp(1.5, 0.0), 0.62).unwrap();
    let n = 50_000;
    let fit = ml_fit(&sample_heterodyne(&s, n, 13).unwrap()).unwrap();
    let err = ComplexAmplitude {
        re: fit.mean.re - 1.5,
        im: fit.mean.im,
    }
    .abs();
    assert!(err < 5.0 * fit.variance.sqrt() / (n as f64).sqrt());
}

#[test]
fn fit_recovers_vacuum_variance() {
    let fit = ml_fit(&sample_heterodyne(&DisplacedThermalState::vacuum(), 1_000_000, 14).unwrap()).unwrap();
    assert!((fit.variance - 1.0).abs() < 0.01);
}

#[test]
fn fitted_variance_is_consistent() {
    let s = DisplacedThermalState::new(amp(-0.4, 0.9), 1.3).unwrap();
    let n = 100_000;
    let fit = ml_fit(&sample_heterodyne(&s, n, 15).unwrap()).unwrap();
    // the pooled estimator has 2N degrees of freedom: sd = σ²/√N
    let se = s.q_width() / (n as f64).sqrt();
    assert!((fit.variance - s.q_width()).abs() < 5.0 * se);
}

#[test]
fn bootstrap_standard_error_of_mean() {
    let data = sample_heterodyne(&DisplacedThermalState::vacuum(), 50_000, 16).unwrap();
    let est = bootstrap(&data, |f| SQRT_2 * f.mean.re, BootstrapConfig::default(), 17).unwrap();
    let expected = 1.0 / 1000f64.sqrt();
    assert!((est.std_error / expected - 1.0).abs() < 0.15, "{}", est.std_error);
    assert!(est.ci_low <= est.point && est.point <= est.ci_high);
    assert_eq!(
        est,
        bootstrap(&data, |f| SQRT_2 * f.mean.re, BootstrapConfig::default(), 17).unwrap()
    );
}

#[test]
fn null_transition_estimate() {
    let q = TransitionQuery::from_parts(ComplexAmplitude::ZERO, ComplexAmplitude::ZERO, 1.0, 0.5).unwrap();
    let est = estimate_log_ratio(&q, 50_000, 18).unwrap();
    assert!(est.ci_low <= 0.0 && 0.0 <= est.ci_high, "{est:?}");
    assert!(est.point.abs() < 4.0 * est.std_error);
}

#[test]
fn reference_estimate_matches_prediction() {
    let q = TransitionQuery::from_parts(amp(2.0, 0.0), amp(1.5, 0.0), 1.62, 0.15).unwrap();
    let est = estimate_log_ratio(&q, 50_000, 19).unwrap();
    let predicted = predicted_log_ratio(q.alpha_i, q.alpha_f, &q.bath);
    assert!(
        (est.point - predicted).abs() < 4.0 * est.std_error,
        "{est:?} vs {predicted}"
    );
    assert_eq!(est, estimate_log_ratio(&q, 50_000, 19).unwrap());
}

#[test]
fn classical_limit_is_antisymmetric_under_swap() {
    let bath = BathSpec::from_beta(0.01).unwrap();
    let bs = BeamSplitterSpec::from_tau(0.5).unwrap();
    for (a, b) in [(1.0, 2.0), (0.5, 1.5), (2.5, 1.2)] {
        let fwd = TransitionQuery::new(amp(a, 0.0), amp(b, 0.0), bath, bs).unwrap();
        let rev = TransitionQuery::new(amp(b, 0.0), amp(a, 0.0), bath, bs).unwrap();
        let e1 = estimate_log_ratio(&fwd, 50_000, 20).unwrap();
        let e2 = estimate_log_ratio(&rev, 50_000, 21).unwrap();
        let se = e1.std_error.hypot(e2.std_error);
        assert!(
            (e1.point + e2.point).abs() < 4.0 * se,
            "{a}, {b}: {} {}",
            e1.point,
            e2.point
        );
    }
}

#[test]
fn small_protocol_runs_use_all_points() {
    let q = TransitionQuery::from_parts(amp(1.0, 0.0), amp(0.8, 0.0), 1.22, 0.3).unwrap();
    let out = run_protocol(&q, ProtocolConfig::new(10, 22)).unwrap();
    assert_eq!(out.estimate.resample_size, 10);
    assert_eq!(out.forward_fit.n_samples, 10);
}
