use std::process::ExitCode;

use serde::Serialize;

use microrev::fock::Truncation;
use microrev::heterodyne::{run_protocol, ProtocolConfig};
use microrev::{reversibility, BootstrapEstimate, TransitionQuery, TransitionResult};

use crate::error::CliError;
use crate::output::print_json;
use crate::{Engine, RatioArgs};

/// One (query, engine) evaluation, flat so that it serializes identically
/// to a JSON object and a CSV row.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub engine: &'static str,
    pub status: &'static str,
    pub error: Option<String>,
    pub alpha_i_re: f64,
    pub alpha_i_im: f64,
    pub alpha_f_re: f64,
    pub alpha_f_im: f64,
    pub n_th: f64,
    pub beta: f64,
    pub tau: f64,
    pub theta: f64,
    pub p_fwd: Option<f64>,
    pub p_bwd: Option<f64>,
    pub log_ratio: Option<f64>,
    pub predicted_log_ratio: f64,
    pub heat: f64,
    pub classical_log_ratio: f64,
    pub log_upsilon: Option<f64>,
    pub upsilon: Option<f64>,
    pub alpha_sq_tot: f64,
    pub delta_alpha_sq: f64,
    pub dim: Option<usize>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub std_error: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_resamples: Option<usize>,
    pub resample_size: Option<usize>,
}

impl Engine {
    pub fn tag(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Fock => "fock",
            Engine::Montecarlo => "montecarlo",
        }
    }
}

impl ResultRecord {
    /// A record with the query and the closed-form columns filled in and
    /// no engine output yet.
    pub fn blank(q: &TransitionQuery, engine: Engine) -> Self {
        let theory = TransitionResult::from_log_probabilities(q, 0.0, 0.0);
        ResultRecord {
            engine: engine.tag(),
            status: "ok",
            error: None,
            alpha_i_re: q.alpha_i.re,
            alpha_i_im: q.alpha_i.im,
            alpha_f_re: q.alpha_f.re,
            alpha_f_im: q.alpha_f.im,
            n_th: q.bath.n_th(),
            beta: q.bath.beta(),
            tau: q.bs.tau(),
            theta: q.bs.theta(),
            p_fwd: None,
            p_bwd: None,
            log_ratio: None,
            predicted_log_ratio: theory.predicted_log_ratio,
            heat: theory.heat,
            classical_log_ratio: theory.classical_log_ratio,
            log_upsilon: None,
            upsilon: None,
            alpha_sq_tot: theory.alpha_sq_tot,
            delta_alpha_sq: theory.delta_alpha_sq,
            dim: None,
            n_samples: None,
            seed: None,
            std_error: None,
            ci_low: None,
            ci_high: None,
            n_resamples: None,
            resample_size: None,
        }
    }

    fn with_result(mut self, r: &TransitionResult) -> Self {
        self.p_fwd = Some(r.p_fwd);
        self.p_bwd = Some(r.p_bwd);
        self.log_ratio = Some(r.log_ratio);
        self.log_upsilon = Some(r.log_upsilon);
        self.upsilon = Some(r.upsilon());
        self
    }

    fn with_bootstrap(mut self, b: &BootstrapEstimate) -> Self {
        self.std_error = Some(b.std_error);
        self.ci_low = Some(b.ci_low);
        self.ci_high = Some(b.ci_high);
        self.n_resamples = Some(b.n_resamples);
        self.resample_size = Some(b.resample_size);
        self
    }

    pub fn failed(mut self, e: impl ToString) -> Self {
        self.status = "failed";
        self.error = Some(e.to_string());
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn analytic(q: &TransitionQuery) -> Self {
        let rec = Self::blank(q, Engine::Analytic);
        match reversibility::evaluate(q) {
            Ok(r) => rec.with_result(&r),
            Err(e) => rec.failed(e),
        }
    }

    pub fn fock(q: &TransitionQuery, trunc: Truncation) -> Self {
        let mut rec = Self::blank(q, Engine::Fock);
        rec.dim = Some(trunc.dim);
        match reversibility::evaluate_fock(q, trunc) {
            Ok(r) => rec.with_result(&r),
            Err(e) => rec.failed(e),
        }
    }

    pub fn montecarlo(q: &TransitionQuery, n_samples: usize, seed: u64) -> Self {
        let mut rec = Self::blank(q, Engine::Montecarlo);
        rec.n_samples = Some(n_samples);
        rec.seed = Some(seed);
        match run_protocol(q, ProtocolConfig::new(n_samples, seed)) {
            Ok(out) => {
                let r = TransitionResult::from_log_probabilities(q, out.log_p_forward, out.log_p_backward);
                rec.with_result(&r).with_bootstrap(&out.estimate)
            }
            Err(e) => rec.failed(e),
        }
    }
}

pub fn cmd_ratio(args: &RatioArgs) -> Result<ExitCode, CliError> {
    let q = args.query.query()?;
    let rec = match args.engine {
        Engine::Analytic => ResultRecord::analytic(&q),
        Engine::Fock => {
            if args.dim < 2 {
                return Err(CliError::Usage(format!("--dim must be at least 2, got {}", args.dim)));
            }
            if !(args.budget > 0.0 && args.budget.is_finite()) {
                return Err(CliError::Usage(format!(
                    "--budget must be positive, got {}",
                    args.budget
                )));
            }
            ResultRecord::fock(&q, Truncation::new(args.dim).with_budget(args.budget))
        }
        Engine::Montecarlo => {
            if args.samples < 3 {
                return Err(CliError::Usage(format!(
                    "--samples must be at least 3, got {}",
                    args.samples
                )));
            }
            ResultRecord::montecarlo(&q, args.samples, args.seed)
        }
    };
    if let Some(e) = &rec.error {
        return Err(CliError::Failed(format!("{} engine: {e}", rec.engine)));
    }
    print_json(&rec)?;
    Ok(ExitCode::SUCCESS)
}
