use std::process::ExitCode;

use serde::Serialize;

use microrev::heterodyne::{run_protocol, BootstrapConfig, ProtocolConfig, ProtocolOutcome};
use microrev::{BootstrapEstimate, IsotropicGaussianFit, TransitionQuery};

use crate::error::CliError;
use crate::output::{print_json, resolve, write_csv, write_json};
use crate::ExperimentArgs;

/// CSV layout: one row holding both fits, the estimate and the prediction.
#[derive(Debug, Serialize)]
struct ExperimentRow {
    alpha_i_re: f64,
    alpha_i_im: f64,
    alpha_f_re: f64,
    alpha_f_im: f64,
    n_th: f64,
    beta: f64,
    tau: f64,
    n_samples: usize,
    seed: u64,
    forward_mean_re: f64,
    forward_mean_im: f64,
    forward_variance: f64,
    backward_mean_re: f64,
    backward_mean_im: f64,
    backward_variance: f64,
    log_p_forward: f64,
    log_p_backward: f64,
    estimate: f64,
    std_error: f64,
    ci_low: f64,
    ci_high: f64,
    n_resamples: usize,
    resample_size: usize,
    predicted_log_ratio: f64,
    z_score: f64,
}

#[derive(Debug, Serialize)]
struct ExperimentSummary {
    query: TransitionQuery,
    n_samples: usize,
    seed: u64,
    forward_fit: IsotropicGaussianFit,
    backward_fit: IsotropicGaussianFit,
    log_p_forward: f64,
    log_p_backward: f64,
    estimate: BootstrapEstimate,
    predicted_log_ratio: f64,
    z_score: f64,
    within_4_se: bool,
}

fn summary(q: TransitionQuery, n_samples: usize, seed: u64, out: ProtocolOutcome) -> ExperimentSummary {
    let z = (out.estimate.point - out.predicted_log_ratio) / out.estimate.std_error;
    ExperimentSummary {
        query: q,
        n_samples,
        seed,
        forward_fit: out.forward_fit,
        backward_fit: out.backward_fit,
        log_p_forward: out.log_p_forward,
        log_p_backward: out.log_p_backward,
        estimate: out.estimate,
        predicted_log_ratio: out.predicted_log_ratio,
        z_score: z,
        within_4_se: z.abs() <= 4.0,
    }
}

fn row(s: &ExperimentSummary) -> ExperimentRow {
    let q = &s.query;
    ExperimentRow {
        alpha_i_re: q.alpha_i.re,
        alpha_i_im: q.alpha_i.im,
        alpha_f_re: q.alpha_f.re,
        alpha_f_im: q.alpha_f.im,
        n_th: q.bath.n_th(),
        beta: q.bath.beta(),
        tau: q.bs.tau(),
        n_samples: s.n_samples,
        seed: s.seed,
        forward_mean_re: s.forward_fit.mean.re,
        forward_mean_im: s.forward_fit.mean.im,
        forward_variance: s.forward_fit.variance,
        backward_mean_re: s.backward_fit.mean.re,
        backward_mean_im: s.backward_fit.mean.im,
        backward_variance: s.backward_fit.variance,
        log_p_forward: s.log_p_forward,
        log_p_backward: s.log_p_backward,
        estimate: s.estimate.point,
        std_error: s.estimate.std_error,
        ci_low: s.estimate.ci_low,
        ci_high: s.estimate.ci_high,
        n_resamples: s.estimate.n_resamples,
        resample_size: s.estimate.resample_size,
        predicted_log_ratio: s.predicted_log_ratio,
        z_score: s.z_score,
    }
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<ExitCode, CliError> {
    let q = args.query.query()?;
    if args.samples < 3 {
        return Err(CliError::Usage(format!(
            "--samples must be at least 3, got {}",
            args.samples
        )));
    }
    if args.resamples < 2 || args.resample_size < 3 {
        return Err(CliError::Usage("need --resamples >= 2 and --resample-size >= 3".into()));
    }
    let cfg = ProtocolConfig {
        n_samples: args.samples,
        bootstrap: BootstrapConfig {
            n_resamples: args.resamples,
            resample_size: args.resample_size.min(args.samples),
        },
        seed: args.seed,
    };
    let out = run_protocol(&q, cfg)?;
    let s = summary(q, args.samples, args.seed, out);

    let csv_path = resolve(&args.output);
    let json_path = csv_path.with_extension("json");
    write_csv(&csv_path, &[row(&s)])?;
    write_json(&json_path, &s)?;
    print_json(&s)?;
    eprintln!("microrev: wrote {} and {}", csv_path.display(), json_path.display());
    Ok(ExitCode::SUCCESS)
}
