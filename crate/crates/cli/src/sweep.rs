use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use microrev::heterodyne::{derive_seed, run_protocol, ProtocolConfig};
use microrev::reversibility::{self, upsilon_closed_form};
use microrev::{BathSpec, BeamSplitterSpec, ComplexAmplitude, TransitionQuery};

use crate::error::CliError;
use crate::output::{print_json, resolve, write_csv};
use crate::record::ResultRecord;
use crate::SweepArgs;

const FIG3_AMPLITUDES_I: [f64; 5] = [1.46, 2.0, 2.4, 2.8, 3.36];
const FIG3_AMPLITUDES_F: [f64; 5] = [1.0, 1.5, 1.8, 2.1, 2.5];
const FIG3_NTH: [f64; 4] = [1.22, 1.62, 2.4, 3.57];
const UPSILON_BETAS: [f64; 5] = [0.01, 0.1, 0.25, 0.58, 1.0];
const DEFAULT_SEED: u64 = 20_231_101;

/// Transmissivity used for a bath when no tau list is given.
fn default_tau(n_th: f64) -> f64 {
    if (n_th - 1.62).abs() < 1e-9 {
        0.15
    } else {
        0.30
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// amplitudes_i[k] goes with amplitudes_f[k]
    Zip,
    /// every initial amplitude with every final amplitude
    Product,
}

/// Sweep configuration as read from a JSON file. Absent fields take the
/// defaults of the subcommand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub amplitudes_i: Option<Vec<ComplexAmplitude>>,
    pub amplitudes_f: Option<Vec<ComplexAmplitude>>,
    pub nth_list: Option<Vec<f64>>,
    pub beta_list: Option<Vec<f64>>,
    pub tau_list: Option<Vec<f64>>,
    pub pairing: Option<Pairing>,
    pub mc_samples: Option<usize>,
    pub base_seed: Option<u64>,
    pub output_path: Option<PathBuf>,
}

#[derive(Clone, Copy)]
enum Kind {
    Fig3,
    Upsilon,
}

/// A validated sweep: the query grid in row order plus run settings.
struct Sweep {
    queries: Vec<TransitionQuery>,
    mc_samples: usize,
    base_seed: u64,
    output: PathBuf,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn non_empty<T>(name: &str, v: Option<Vec<T>>) -> Result<Option<Vec<T>>, CliError> {
    match v {
        Some(v) if v.is_empty() => Err(usage(format!("{name} must not be empty"))),
        v => Ok(v),
    }
}

impl SweepConfig {
    fn load(args: SweepArgs) -> Result<Self, CliError> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?
            }
            None => SweepConfig::default(),
        };
        macro_rules! overlay {
            ($($f:ident),*) => { $(if args.$f.is_some() { cfg.$f = args.$f; })* };
        }
        overlay!(
            amplitudes_i,
            amplitudes_f,
            nth_list,
            beta_list,
            tau_list,
            pairing,
            mc_samples,
            base_seed,
            output_path
        );
        Ok(cfg)
    }

    fn resolve(self, kind: Kind) -> Result<Sweep, CliError> {
        let amps = |v: &[f64]| {
            v.iter()
                .map(|&r| ComplexAmplitude { re: r, im: 0.0 })
                .collect::<Vec<_>>()
        };
        let user_temps = self.nth_list.is_some() || self.beta_list.is_some();
        let amplitudes_i = non_empty("amplitudes_i", self.amplitudes_i)?.unwrap_or_else(|| amps(&FIG3_AMPLITUDES_I));
        let amplitudes_f = non_empty("amplitudes_f", self.amplitudes_f)?.unwrap_or_else(|| match kind {
            Kind::Fig3 => amps(&FIG3_AMPLITUDES_F),
            Kind::Upsilon => amps(&FIG3_AMPLITUDES_I),
        });
        let nth_list = non_empty("nth_list", self.nth_list)?;
        let beta_list = non_empty("beta_list", self.beta_list)?;
        let tau_list = non_empty("tau_list", self.tau_list)?;

        let mut baths = Vec::new();
        let (nth_list, beta_list) = if user_temps {
            (nth_list.unwrap_or_default(), beta_list.unwrap_or_default())
        } else {
            let betas = match kind {
                Kind::Fig3 => vec![],
                Kind::Upsilon => UPSILON_BETAS.to_vec(),
            };
            (FIG3_NTH.to_vec(), betas)
        };
        for n in nth_list {
            baths.push(BathSpec::from_nth(n)?);
        }
        for b in beta_list {
            baths.push(BathSpec::from_beta(b)?);
        }
        if let Some(b) = baths.iter().find(|b| !b.is_finite_temperature()) {
            return Err(usage(format!("bath must have 0 < beta < inf, got beta = {}", b.beta())));
        }

        let pairing = self.pairing.unwrap_or(match kind {
            Kind::Fig3 => Pairing::Zip,
            Kind::Upsilon => Pairing::Product,
        });
        let pairs: Vec<(ComplexAmplitude, ComplexAmplitude)> = match pairing {
            Pairing::Zip => {
                if amplitudes_i.len() != amplitudes_f.len() {
                    return Err(usage(format!(
                        "zip pairing needs equal-length amplitude lists, got {} and {}",
                        amplitudes_i.len(),
                        amplitudes_f.len()
                    )));
                }
                amplitudes_i.into_iter().zip(amplitudes_f).collect()
            }
            Pairing::Product => amplitudes_i
                .iter()
                .flat_map(|&a| amplitudes_f.iter().map(move |&b| (a, b)))
                .collect(),
        };

        let mut queries = Vec::new();
        for bath in &baths {
            let taus = tau_list.clone().unwrap_or_else(|| vec![default_tau(bath.n_th())]);
            for tau in taus {
                let bs = BeamSplitterSpec::from_tau(tau)?;
                for &(ai, af) in &pairs {
                    queries.push(TransitionQuery::new(ai, af, *bath, bs)?);
                }
            }
        }

        let mc_samples = self.mc_samples.unwrap_or(match kind {
            Kind::Fig3 => 50_000,
            Kind::Upsilon => 0,
        });
        if mc_samples > 0 && mc_samples < 3 {
            return Err(usage(format!("mc_samples must be 0 or at least 3, got {mc_samples}")));
        }
        let default_name = match kind {
            Kind::Fig3 => "fig3.csv",
            Kind::Upsilon => "upsilon.csv",
        };
        Ok(Sweep {
            queries,
            mc_samples,
            base_seed: self.base_seed.unwrap_or(DEFAULT_SEED),
            output: resolve(&self.output_path.unwrap_or_else(|| PathBuf::from(default_name))),
        })
    }
}

#[derive(Serialize)]
struct SweepSummary {
    output: String,
    rows: usize,
    failed: usize,
}

fn finish(output: &std::path::Path, rows: usize, failed: usize) -> Result<ExitCode, CliError> {
    print_json(&SweepSummary {
        output: output.display().to_string(),
        rows,
        failed,
    })?;
    if failed > 0 {
        eprintln!("microrev: {failed} of {rows} rows failed");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

/// Analytic row for every query, followed by a Monte Carlo row when
/// sampling is enabled. Query `k` samples with `derive_seed(base_seed, k)`.
pub fn cmd_sweep_fig3(args: SweepArgs) -> Result<ExitCode, CliError> {
    let sweep = SweepConfig::load(args)?.resolve(Kind::Fig3)?;
    let rows: Vec<ResultRecord> = sweep
        .queries
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, q)| {
            let mut out = vec![ResultRecord::analytic(q)];
            if sweep.mc_samples > 0 {
                out.push(ResultRecord::montecarlo(
                    q,
                    sweep.mc_samples,
                    derive_seed(sweep.base_seed, k as u64),
                ));
            }
            out
        })
        .collect();
    write_csv(&sweep.output, &rows)?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    finish(&sweep.output, rows.len(), failed)
}

#[derive(Debug, Serialize)]
struct UpsilonRow {
    status: &'static str,
    error: Option<String>,
    series: &'static str,
    alpha_i_re: f64,
    alpha_i_im: f64,
    alpha_f_re: f64,
    alpha_f_im: f64,
    n_th: f64,
    beta: f64,
    tau: f64,
    alpha_sq_tot: f64,
    delta_alpha_sq: f64,
    /// from the analytic engine's forward/backward probabilities
    log_upsilon: Option<f64>,
    /// closed form
    log_upsilon_theory: f64,
    log_upsilon_per_tot: Option<f64>,
    log_upsilon_theory_per_tot: Option<f64>,
    half_beta_sq: f64,
    upsilon: Option<f64>,
    mc_log_upsilon: Option<f64>,
    mc_std_error: Option<f64>,
    mc_ci_low: Option<f64>,
    mc_ci_high: Option<f64>,
}

fn fail(row: &mut UpsilonRow, e: String) {
    row.status = "failed";
    row.error = Some(e);
}

fn upsilon_row(q: &TransitionQuery, mc_samples: usize, seed: u64) -> UpsilonRow {
    let beta = q.bath.beta();
    let tot = q.alpha_i.norm_sqr() + q.alpha_f.norm_sqr();
    let delta = reversibility::heat(q.alpha_i, q.alpha_f);
    let theory = upsilon_closed_form(q.alpha_i, q.alpha_f, &q.bath);
    let per_tot = |v: f64| (tot > 0.0).then(|| v / tot);
    let mut row = UpsilonRow {
        status: "ok",
        error: None,
        series: if delta == 0.0 { "balanced" } else { "general" },
        alpha_i_re: q.alpha_i.re,
        alpha_i_im: q.alpha_i.im,
        alpha_f_re: q.alpha_f.re,
        alpha_f_im: q.alpha_f.im,
        n_th: q.bath.n_th(),
        beta,
        tau: q.bs.tau(),
        alpha_sq_tot: tot,
        delta_alpha_sq: delta,
        log_upsilon: None,
        log_upsilon_theory: theory,
        log_upsilon_per_tot: None,
        log_upsilon_theory_per_tot: per_tot(theory),
        half_beta_sq: 0.5 * beta * beta,
        upsilon: None,
        mc_log_upsilon: None,
        mc_std_error: None,
        mc_ci_low: None,
        mc_ci_high: None,
    };
    match reversibility::evaluate(q) {
        Ok(r) => {
            row.log_upsilon = Some(r.log_upsilon);
            row.log_upsilon_per_tot = per_tot(r.log_upsilon);
            row.upsilon = Some(r.upsilon());
        }
        Err(e) => fail(&mut row, e.to_string()),
    }
    if mc_samples > 0 {
        // log Υ = β·ΔQ + log ratio, so the bootstrap interval shifts rigidly
        match run_protocol(q, ProtocolConfig::new(mc_samples, seed)) {
            Ok(out) => {
                let shift = beta * delta;
                row.mc_log_upsilon = Some(out.estimate.point + shift);
                row.mc_std_error = Some(out.estimate.std_error);
                row.mc_ci_low = Some(out.estimate.ci_low + shift);
                row.mc_ci_high = Some(out.estimate.ci_high + shift);
            }
            Err(e) => fail(&mut row, format!("montecarlo: {e}")),
        }
    }
    row
}

pub fn cmd_sweep_upsilon(args: SweepArgs) -> Result<ExitCode, CliError> {
    let sweep = SweepConfig::load(args)?.resolve(Kind::Upsilon)?;
    let rows: Vec<UpsilonRow> = sweep
        .queries
        .par_iter()
        .enumerate()
        .map(|(k, q)| upsilon_row(q, sweep.mc_samples, derive_seed(sweep.base_seed, k as u64)))
        .collect();
    write_csv(&sweep.output, &rows)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    finish(&sweep.output, rows.len(), failed)
}
