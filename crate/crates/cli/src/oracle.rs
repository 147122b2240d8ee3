use std::f64::consts::FRAC_PI_4;
use std::process::ExitCode;

use num_complex::Complex64;
use serde::Serialize;

use microrev::fock::{self, beam_splitter, coherent_ket, FockEngine, FockKet, Truncation};
use microrev::{gaussian, BathSpec, BeamSplitterSpec, ComplexAmplitude, Result, TransitionQuery};

use crate::error::CliError;
use crate::output::print_json;
use crate::OracleArgs;

const UNITARITY_THRESHOLD: f64 = 1e-12;
const ENERGY_THRESHOLD: f64 = 1e-12;
const FIXED_POINT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Serialize)]
struct CheckReport {
    name: &'static str,
    passed: bool,
    max_error: Option<f64>,
    threshold: f64,
    evaluations: usize,
    error_kind: Option<&'static str>,
    error: Option<String>,
}

fn error_kind(e: &microrev::Error) -> &'static str {
    use microrev::Error::*;
    match e {
        Domain(_) => "Domain",
        TruncationTooSmall { .. } => "TruncationTooSmall",
        ZeroBackwardProbability(_) => "ZeroBackwardProbability",
        DegenerateBath => "DegenerateBath",
        DegenerateData(_) => "DegenerateData",
        NumericalUnderflow { .. } => "NumericalUnderflow",
        Parse(_) => "Parse",
    }
}

#[derive(Debug, Serialize)]
struct OracleReport {
    dim: usize,
    tolerance: f64,
    passed: bool,
    checks: Vec<CheckReport>,
}

/// Runs `cases`, keeping the worst error; the first failing case aborts the
/// check and is reported.
fn check<I>(name: &'static str, threshold: f64, cases: I) -> CheckReport
where
    I: IntoIterator<Item = (String, Box<dyn FnOnce() -> Result<f64>>)>,
{
    let mut worst: Option<f64> = None;
    let mut evaluations = 0;
    for (label, case) in cases {
        match case() {
            Ok(err) => {
                evaluations += 1;
                worst = Some(worst.map_or(err, |w: f64| w.max(err)));
            }
            Err(e) => {
                return CheckReport {
                    name,
                    passed: false,
                    max_error: worst,
                    threshold,
                    evaluations,
                    error_kind: Some(error_kind(&e)),
                    error: Some(format!("{label}: {e}")),
                }
            }
        }
    }
    CheckReport {
        name,
        passed: worst.is_some_and(|w| w <= threshold),
        max_error: worst,
        threshold,
        evaluations,
        error_kind: None,
        error: None,
    }
}

type Case = (String, Box<dyn FnOnce() -> Result<f64>>);

fn case(label: String, f: impl FnOnce() -> Result<f64> + 'static) -> Case {
    (label, Box::new(f))
}

fn amp(re: f64, im: f64) -> ComplexAmplitude {
    ComplexAmplitude { re, im }
}

fn theta(tau: f64) -> f64 {
    tau.sqrt().acos()
}

const SPLITTER_TAUS: [f64; 4] = [0.15, 0.3, 0.5, 0.85];

fn unitarity(dim: usize, threshold: f64) -> CheckReport {
    let cases = SPLITTER_TAUS.iter().map(|&tau| {
        case(format!("tau={tau}"), move || {
            Ok(beam_splitter(theta(tau), dim)?.unitarity_error())
        })
    });
    check("unitarity", threshold, cases.collect::<Vec<_>>())
}

fn energy_conservation(dim: usize, threshold: f64) -> CheckReport {
    let cases = SPLITTER_TAUS.iter().map(|&tau| {
        case(format!("tau={tau}"), move || {
            fock::energy_conservation_check(theta(tau), dim)
        })
    });
    check("energy_conservation", threshold, cases.collect::<Vec<_>>())
}

fn fixed_point(dim: usize, threshold: f64) -> CheckReport {
    let cases = vec![case("n_th=1 theta=pi/4".into(), move || {
        fock::fixed_point_check(&BathSpec::from_nth(1.0)?, FRAC_PI_4, Truncation::new(dim))
    })];
    check("fixed_point", threshold, cases)
}

/// Fock-oracle forward and backward probabilities against the Gaussian
/// engine, as relative errors.
fn gaussian_equivalence(dim: usize, threshold: f64) -> CheckReport {
    let amplitudes = [
        amp(0.0, 0.0),
        amp(0.5, 0.0),
        amp(1.0, 0.5),
        amp(2.0, 0.0),
        amp(-1.3, 0.7),
    ];
    let mut cases = Vec::new();
    for n_th in [0.5, 1.0, 1.62] {
        for tau in [0.3, 0.7] {
            cases.push(case(format!("n_th={n_th} tau={tau}"), move || {
                let bath = BathSpec::from_nth(n_th)?;
                let engine = FockEngine::new(&bath, theta(tau), Truncation::new(dim))?;
                let bs = BeamSplitterSpec::from_tau(tau)?;
                let mut worst = 0.0f64;
                for ai in amplitudes {
                    for af in amplitudes {
                        let q = TransitionQuery::new(ai, af, bath, bs)?;
                        let gf = gaussian::forward_probability(&q);
                        let gb = gaussian::backward_probability(&q)?;
                        let f = engine.forward(ai, af)?;
                        let b = engine.backward(ai, af)?;
                        worst = worst.max(((f - gf) / gf).abs()).max(((b - gb) / gb).abs());
                    }
                }
                Ok(worst)
            }));
        }
    }
    check("gaussian_equivalence", threshold, cases)
}

/// Both sides of the general relation for number-state superpositions and
/// one coherent state.
fn general_ratio(dim: usize, threshold: f64) -> CheckReport {
    let sup = |c: &'static [(usize, f64)]| move || FockKet::superposition(c, dim);
    type KetFn = Box<dyn Fn() -> Result<FockKet>>;
    let complex: KetFn = Box::new(move || {
        let mut a = vec![Complex64::new(0.0, 0.0); dim.max(3)];
        a[1] = Complex64::new(0.6, 0.0);
        a[2] = Complex64::new(0.0, 0.8);
        FockKet::from_amplitudes(a)
    });
    let pairs: Vec<(&str, KetFn, KetFn, f64, f64)> = vec![
        (
            "(|0>+|2>)/sqrt2 -> |alpha=0.8>",
            Box::new(sup(&[(0, 1.0), (2, 1.0)])),
            Box::new(move || coherent_ket(amp(0.8, 0.0), Truncation::new(dim))),
            1.0,
            0.7,
        ),
        (
            "|1> -> |3>",
            Box::new(sup(&[(1, 1.0)])),
            Box::new(sup(&[(3, 1.0)])),
            1.0,
            0.5,
        ),
        (
            "(|0>+|4>)/sqrt2 -> (|1>-|2>)/sqrt2",
            Box::new(sup(&[(0, 1.0), (4, 1.0)])),
            Box::new(sup(&[(1, 1.0), (2, -1.0)])),
            1.62,
            0.3,
        ),
        ("0.6|1>+0.8i|2> -> |2>", complex, Box::new(sup(&[(2, 1.0)])), 1.22, 0.85),
        (
            "(|1>+2|3>+|5>)/sqrt6 -> (|0>+|1>+|2>)/sqrt3",
            Box::new(sup(&[(1, 1.0), (3, 2.0), (5, 1.0)])),
            Box::new(sup(&[(0, 1.0), (1, 1.0), (2, 1.0)])),
            1.0,
            0.6,
        ),
    ];
    let cases: Vec<Case> = pairs
        .into_iter()
        .map(|(label, ki, kf, n_th, tau)| {
            case(label.to_string(), move || {
                let r = fock::general_ratio_check(
                    &ki()?,
                    &kf()?,
                    &BathSpec::from_nth(n_th)?,
                    theta(tau),
                    Truncation::new(dim),
                )?;
                Ok(r.relative_error())
            })
        })
        .collect();
    check("general_ratio", threshold, cases)
}

pub fn cmd_oracle_check(args: &OracleArgs) -> Result<ExitCode, CliError> {
    if args.dim < 2 {
        return Err(CliError::Usage(format!("--dim must be at least 2, got {}", args.dim)));
    }
    if !(args.tolerance >= 0.0 && args.tolerance.is_finite()) {
        return Err(CliError::Usage(format!(
            "--tolerance must be a non-negative number, got {}",
            args.tolerance
        )));
    }
    let (d, tol) = (args.dim, args.tolerance);
    let checks = vec![
        unitarity(d, UNITARITY_THRESHOLD.min(tol)),
        energy_conservation(d, ENERGY_THRESHOLD.min(tol)),
        fixed_point(d, FIXED_POINT_THRESHOLD.min(tol)),
        gaussian_equivalence(d, tol),
        general_ratio(d, tol),
    ];
    let passed = checks.iter().all(|c| c.passed);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    print_json(&OracleReport {
        dim: d,
        tolerance: tol,
        passed,
        checks,
    })?;
    if passed {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("microrev: failed checks: {}", failed.join(", "));
        Ok(ExitCode::from(1))
    }
}
