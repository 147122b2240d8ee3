//! Simulated heterodyne measurement of the beam-splitter output.
//!
//! Outcomes are drawn from the output Husimi distribution, an isotropic
//! Gaussian is fitted by maximum likelihood, and the fitted density is
//! evaluated at the target amplitude. Uncertainties come from a
//! resample-with-replacement bootstrap.
//!
//! Quadratures follow `a = (x̂ + ip̂)/√2`, so an outcome `(x, p)` is the
//! amplitude `(x + ip)/√2` and the vacuum has unit variance per quadrature.
//!
//! Seeds: a pipeline run takes one base seed, and every stage and every
//! bootstrap resample draws from its own stream obtained with
//! [`derive_seed`], so results do not depend on thread scheduling.

use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{interact, DisplacedThermalState};
use crate::reversibility::{gibbs_rescale_final, gibbs_rescale_initial, predicted_log_ratio};
use crate::types::{ComplexAmplitude, TransitionQuery};

/// Fitted-SD distance beyond which the fitted density is not trusted.
pub const UNDERFLOW_LIMIT: f64 = 8.0;

pub const STAGE_FORWARD: u64 = 0;
pub const STAGE_BACKWARD: u64 = 1;
pub const STAGE_BOOTSTRAP: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sub-stream `index` of `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSample {
    pub x: f64,
    pub p: f64,
}

impl QuadratureSample {
    pub fn amplitude(&self) -> ComplexAmplitude {
        ComplexAmplitude {
            re: self.x / SQRT_2,
            im: self.p / SQRT_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterodyneDataset {
    samples: Vec<QuadratureSample>,
    seed: u64,
    source: DisplacedThermalState,
}

impl HeterodyneDataset {
    pub fn new(samples: Vec<QuadratureSample>, seed: u64, source: DisplacedThermalState) -> Result<Self> {
        if samples.iter().any(|s| !s.x.is_finite() || !s.p.is_finite()) {
            return Err(Error::domain("quadrature samples must be finite"));
        }
        Ok(HeterodyneDataset { samples, seed, source })
    }

    pub fn samples(&self) -> &[QuadratureSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn source_state(&self) -> &DisplacedThermalState {
        &self.source
    }
}

/// `n` heterodyne outcomes for `state`: `x ~ N(√2·Re μ, n̄+1)`,
/// `p ~ N(√2·Im μ, n̄+1)`, independent.
pub fn sample_heterodyne(state: &DisplacedThermalState, n: usize, seed: u64) -> Result<HeterodyneDataset> {
    if n == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let sd = state.q_width().sqrt();
    let nx = Normal::new(SQRT_2 * state.mu.re, sd).map_err(|e| Error::domain(e.to_string()))?;
    let np = Normal::new(SQRT_2 * state.mu.im, sd).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let x = nx.sample(&mut rng);
            let p = np.sample(&mut rng);
            QuadratureSample { x, p }
        })
        .collect();
    HeterodyneDataset::new(samples, seed, *state)
}

/// Maximum-likelihood isotropic Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsotropicGaussianFit {
    /// fitted `μ̂`
    pub mean: ComplexAmplitude,
    /// per-quadrature variance, an estimate of `n̄ + 1`
    pub variance: f64,
    pub n_samples: usize,
}

impl IsotropicGaussianFit {
    pub fn nbar(&self) -> f64 {
        self.variance - 1.0
    }

    /// Distance of `alpha` from the fitted mean in fitted quadrature SDs.
    pub fn distance(&self, alpha: ComplexAmplitude) -> f64 {
        let d = ComplexAmplitude {
            re: alpha.re - self.mean.re,
            im: alpha.im - self.mean.im,
        };
        SQRT_2 * d.abs() / self.variance.sqrt()
    }

    /// `log⟨α|ρ̂|α⟩ = −|α − μ̂|²/σ̂² − ln σ̂²` with no range check.
    pub fn log_density_unchecked(&self, alpha: ComplexAmplitude) -> f64 {
        let d = ComplexAmplitude {
            re: alpha.re - self.mean.re,
            im: alpha.im - self.mean.im,
        };
        -d.norm_sqr() / self.variance - self.variance.ln()
    }

    pub fn log_density(&self, alpha: ComplexAmplitude) -> Result<f64> {
        let distance = self.distance(alpha);
        if distance > UNDERFLOW_LIMIT {
            return Err(Error::NumericalUnderflow {
                distance,
                limit: UNDERFLOW_LIMIT,
            });
        }
        Ok(self.log_density_unchecked(alpha))
    }
}

fn fit_iter<'a>(samples: impl Iterator<Item = &'a QuadratureSample> + Clone) -> Result<IsotropicGaussianFit> {
    let mut n = 0usize;
    let (mut sx, mut sp) = (0.0, 0.0);
    for s in samples.clone() {
        n += 1;
        sx += s.x;
        sp += s.p;
    }
    if n < 3 {
        return Err(Error::DegenerateData(format!(
            "maximum-likelihood fit needs at least 3 samples, got {n}"
        )));
    }
    let (mx, mp) = (sx / n as f64, sp / n as f64);
    let ss: f64 = samples.map(|s| (s.x - mx).powi(2) + (s.p - mp).powi(2)).sum();
    let variance = ss / (2 * n) as f64;
    if !(variance > 0.0) {
        return Err(Error::DegenerateData("all samples coincide".into()));
    }
    Ok(IsotropicGaussianFit {
        mean: ComplexAmplitude {
            re: mx / SQRT_2,
            im: mp / SQRT_2,
        },
        variance,
        n_samples: n,
    })
}

pub fn ml_fit(data: &HeterodyneDataset) -> Result<IsotropicGaussianFit> {
    fit_iter(data.samples.iter())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub resample_size: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_resamples: 1000,
            resample_size: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapEstimate {
    pub point: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_resamples: usize,
    pub resample_size: usize,
}

/// Linear-interpolation percentile of sorted data, `q ∈ [0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(point: f64, mut values: Vec<f64>, cfg: BootstrapConfig) -> Result<BootstrapEstimate> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("bootstrap statistic is not finite".into()));
    }
    // deviations from the first value keep a constant statistic at exactly 0
    let shift = values[0];
    let n = values.len() as f64;
    let mean_dev = values.iter().map(|v| v - shift).sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - shift - mean_dev).powi(2)).sum();
    let std_error = if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    values.sort_by(f64::total_cmp);
    Ok(BootstrapEstimate {
        point,
        std_error,
        ci_low: percentile(&values, 0.025).min(point),
        ci_high: percentile(&values, 0.975).max(point),
        n_resamples: cfg.n_resamples,
        resample_size: cfg.resample_size,
    })
}

fn check_config(cfg: BootstrapConfig, available: usize) -> Result<()> {
    if cfg.n_resamples < 1 {
        return Err(Error::domain("need at least one bootstrap resample"));
    }
    if cfg.resample_size < 3 || cfg.resample_size > available {
        return Err(Error::domain(format!(
            "resample size {} must lie in [3, {available}]",
            cfg.resample_size
        )));
    }
    Ok(())
}

fn resample_fit(data: &HeterodyneDataset, size: usize, rng: &mut ChaCha8Rng) -> Result<IsotropicGaussianFit> {
    let picked: Vec<QuadratureSample> = (0..size)
        .map(|_| data.samples[rng.random_range(0..data.len())])
        .collect();
    fit_iter(picked.iter())
}

/// Bootstrap of a fit-derived statistic. The point estimate uses the fit
/// of the full dataset.
pub fn bootstrap<F>(
    data: &HeterodyneDataset,
    statistic: F,
    cfg: BootstrapConfig,
    seed: u64,
) -> Result<BootstrapEstimate>
where
    F: Fn(&IsotropicGaussianFit) -> f64 + Sync,
{
    check_config(cfg, data.len())?;
    let point = statistic(&ml_fit(data)?);
    let values = (0..cfg.n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
            Ok(statistic(&resample_fit(data, cfg.resample_size, &mut rng)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    summarize(point, values, cfg)
}

/// Bootstrap of a statistic of two independent datasets, resampled
/// independently in each replicate.
pub fn bootstrap_pair<F>(
    first: &HeterodyneDataset,
    second: &HeterodyneDataset,
    statistic: F,
    cfg: BootstrapConfig,
    seed: u64,
) -> Result<BootstrapEstimate>
where
    F: Fn(&IsotropicGaussianFit, &IsotropicGaussianFit) -> f64 + Sync,
{
    check_config(cfg, first.len().min(second.len()))?;
    let point = statistic(&ml_fit(first)?, &ml_fit(second)?);
    let values = (0..cfg.n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
            let a = resample_fit(first, cfg.resample_size, &mut rng)?;
            let b = resample_fit(second, cfg.resample_size, &mut rng)?;
            Ok(statistic(&a, &b))
        })
        .collect::<Result<Vec<f64>>>()?;
    summarize(point, values, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub n_samples: usize,
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
}

impl ProtocolConfig {
    /// Supplement-style defaults: 1000 resamples of 1000 points each, or of
    /// all points when fewer were taken.
    pub fn new(n_samples: usize, seed: u64) -> Self {
        ProtocolConfig {
            n_samples,
            bootstrap: BootstrapConfig {
                n_resamples: 1000,
                resample_size: n_samples.min(1000),
            },
            seed,
        }
    }
}

/// Everything one forward/backward measurement run produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolOutcome {
    pub forward_fit: IsotropicGaussianFit,
    pub backward_fit: IsotropicGaussianFit,
    /// fitted `log P→` at `α_f`
    pub log_p_forward: f64,
    /// fitted `log P←` at `α̃_i`
    pub log_p_backward: f64,
    pub estimate: BootstrapEstimate,
    pub predicted_log_ratio: f64,
}

/// Forward run (input `α_i`, fitted density at `α_f`) and backward run
/// (input `α̃_f`, fitted density at `α̃_i`) on independent sample streams.
pub fn run_protocol(q: &TransitionQuery, cfg: ProtocolConfig) -> Result<ProtocolOutcome> {
    let beta = q.bath.beta();
    if !beta.is_finite() {
        return Err(Error::DegenerateBath);
    }
    if !(beta > 0.0) {
        return Err(Error::domain("heterodyne protocol needs a bath with β > 0"));
    }
    if cfg.n_samples < 3 {
        return Err(Error::domain("heterodyne protocol needs at least 3 samples"));
    }
    let target_f = q.alpha_f;
    let input_b = gibbs_rescale_final(q.alpha_f, beta);
    let target_b = gibbs_rescale_initial(q.alpha_i, beta);

    let fwd_state = interact(q.alpha_i, &q.bath, &q.bs);
    let bwd_state = interact(input_b, &q.bath, &q.bs);
    let fwd = sample_heterodyne(&fwd_state, cfg.n_samples, derive_seed(cfg.seed, STAGE_FORWARD))?;
    let bwd = sample_heterodyne(&bwd_state, cfg.n_samples, derive_seed(cfg.seed, STAGE_BACKWARD))?;
    let forward_fit = ml_fit(&fwd)?;
    let backward_fit = ml_fit(&bwd)?;
    let log_p_forward = forward_fit.log_density(target_f)?;
    let log_p_backward = backward_fit.log_density(target_b)?;

    let estimate = bootstrap_pair(
        &fwd,
        &bwd,
        |a, b| a.log_density_unchecked(target_f) - b.log_density_unchecked(target_b),
        cfg.bootstrap,
        derive_seed(cfg.seed, STAGE_BOOTSTRAP),
    )?;
    Ok(ProtocolOutcome {
        forward_fit,
        backward_fit,
        log_p_forward,
        log_p_backward,
        estimate,
        predicted_log_ratio: predicted_log_ratio(q.alpha_i, q.alpha_f, &q.bath),
    })
}

/// `log(P̂→/P̂←)` with bootstrap errors, at the supplement's protocol
/// sizes (`n ≥ 1000`).
pub fn estimate_log_ratio(q: &TransitionQuery, n: usize, seed: u64) -> Result<BootstrapEstimate> {
    if n < 1000 {
        return Err(Error::domain(format!("estimate_log_ratio needs n ≥ 1000, got {n}")));
    }
    Ok(run_protocol(q, ProtocolConfig::new(n, seed))?.estimate)
}
