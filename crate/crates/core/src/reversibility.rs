//! Closed-form side of the quantum microscopic-reversibility relation.
//!
//! For coherent states mixed with a thermal bath by any energy-conserving
//! unitary, the forward/backward ratio is fixed by the two amplitudes alone:
//!
//! ```text
//! P→(α_f | α_i) / P←(α̃_i | α̃_f) = exp[ |α_i|²/n_th − |α_f|²/(n_th + 1) ]
//! ```
//!
//! where the backward trajectory runs between the Gibbs-rescaled,
//! time-reversed amplitudes `α̃_i = conj(α_i)·e^{β/2}` and
//! `α̃_f = conj(α_f)·e^{−β/2}`. The quantum modification factor Υ measures
//! the departure from the classical value `e^{−βQ}`; it is always carried in
//! log domain here.
//!
//! Functions in this module accept `beta = 0`, where every formula has a
//! finite classical limit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{EnergyStatistics, Truncation};
use crate::gaussian;
use crate::types::{BathSpec, ComplexAmplitude, TransitionQuery};

/// Mean thermal occupation `e^{−β}/(1 − e^{−β})`.
pub fn nth_from_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    Ok(1.0 / beta.exp_m1())
}

/// Inverse of [`nth_from_beta`]: `β = ln(1 + 1/n_th)`.
pub fn beta_from_nth(n_th: f64) -> Result<f64> {
    if !(n_th > 0.0) {
        return Err(Error::domain(format!("n_th must be positive, got {n_th}")));
    }
    Ok((1.0 / n_th).ln_1p())
}

/// `α̃_i = conj(α_i)·e^{+β/2}`, the end point of the backward trajectory.
pub fn gibbs_rescale_initial(alpha: ComplexAmplitude, beta: f64) -> ComplexAmplitude {
    debug_assert!(beta >= 0.0);
    alpha.conj().scale((0.5 * beta).exp())
}

/// `α̃_f = conj(α_f)·e^{−β/2}`, the input of the backward trajectory.
pub fn gibbs_rescale_final(alpha: ComplexAmplitude, beta: f64) -> ComplexAmplitude {
    debug_assert!(beta >= 0.0);
    alpha.conj().scale((-0.5 * beta).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescaledPair {
    pub alpha_i_tilde: ComplexAmplitude,
    pub alpha_f_tilde: ComplexAmplitude,
}

pub fn gibbs_rescale_pair(alpha_i: ComplexAmplitude, alpha_f: ComplexAmplitude, beta: f64) -> RescaledPair {
    RescaledPair {
        alpha_i_tilde: gibbs_rescale_initial(alpha_i, beta),
        alpha_f_tilde: gibbs_rescale_final(alpha_f, beta),
    }
}

/// `|α_i|²/n_th − |α_f|²/(n_th + 1)`, written through β so that the
/// classical limit `β → 0` stays finite.
pub fn predicted_log_ratio(alpha_i: ComplexAmplitude, alpha_f: ComplexAmplitude, bath: &BathSpec) -> f64 {
    let beta = bath.beta();
    if beta == 0.0 {
        return 0.0;
    }
    // 1/n_th = e^β − 1 and 1/(n_th + 1) = 1 − e^{−β}
    let inv_nth = beta.exp_m1();
    let inv_nth1 = -(-beta).exp_m1();
    if beta.is_infinite() {
        // only the final-state term survives a zero-temperature bath
        return if alpha_i.norm_sqr() == 0.0 {
            -alpha_f.norm_sqr()
        } else {
            f64::INFINITY
        };
    }
    alpha_i.norm_sqr() * inv_nth - alpha_f.norm_sqr() * inv_nth1
}

/// Heat drawn from the bath, `Q = |α_f|² − |α_i|²` in units of ħω₀.
pub fn heat(alpha_i: ComplexAmplitude, alpha_f: ComplexAmplitude) -> f64 {
    alpha_f.norm_sqr() - alpha_i.norm_sqr()
}

/// The classical microscopic-reversibility value `−βQ`.
pub fn classical_log_ratio(alpha_i: ComplexAmplitude, alpha_f: ComplexAmplitude, bath: &BathSpec) -> f64 {
    let q = heat(alpha_i, alpha_f);
    if q == 0.0 {
        0.0
    } else {
        -bath.beta() * q
    }
}

/// `cosh x − 1`, accurate for small `x`.
pub fn cosh_m1(x: f64) -> f64 {
    let s = (0.5 * x).sinh();
    2.0 * s * s
}

/// `sinh x − x`, accurate for small `x`.
pub fn sinh_m_id(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        // x³/3! + x⁵/5! + … + x¹⁹/19!; the next term is below 1e-20 relative
        let mut term = x * x2 / 6.0;
        let mut sum = term;
        for k in (5..=19).step_by(2) {
            term *= x2 / ((k - 1) * k) as f64;
            sum += term;
        }
        sum
    } else {
        x.sinh() - x
    }
}

/// Coefficients `(A, B) = (cosh β − 1, sinh β − β)` of the closed form
/// `log Υ = A·|α|²_tot − B·Δ|α|²`.
pub fn upsilon_coefficients(beta: f64) -> (f64, f64) {
    (cosh_m1(beta), sinh_m_id(beta))
}

/// `log Υ` for coherent states; non-negative for every pair of amplitudes.
pub fn upsilon_closed_form(alpha_i: ComplexAmplitude, alpha_f: ComplexAmplitude, bath: &BathSpec) -> f64 {
    let (a, b) = upsilon_coefficients(bath.beta());
    let tot = alpha_i.norm_sqr() + alpha_f.norm_sqr();
    let delta = heat(alpha_i, alpha_f);
    a * tot - b * delta
}

/// `log Υ` straight from its definition,
///
/// ```text
/// log⟨ψ_i|e^{βH}|ψ_i⟩ − β⟨ψ_i|H|ψ_i⟩ + log⟨ψ_f|e^{−βH}|ψ_f⟩ + β⟨ψ_f|H|ψ_f⟩
/// ```
///
/// for any state representation that can report its energy statistics.
pub fn upsilon_from_definition<I, F>(psi_i: &I, psi_f: &F, bath: &BathSpec) -> Result<f64>
where
    I: EnergyStatistics + ?Sized,
    F: EnergyStatistics + ?Sized,
{
    let beta = bath.beta();
    if !beta.is_finite() {
        return Err(Error::DegenerateBath);
    }
    let initial = psi_i.log_exp_energy(beta)? - beta * psi_i.mean_energy();
    let fin = psi_f.log_exp_energy(-beta)? + beta * psi_f.mean_energy();
    Ok(initial + fin)
}

/// Lowest-order expansion `log Υ ≈ (β²/2)[Var_i(H) + Var_f(H)]`.
pub fn lowest_order_log_upsilon<I, F>(psi_i: &I, psi_f: &F, beta: f64) -> f64
where
    I: EnergyStatistics + ?Sized,
    F: EnergyStatistics + ?Sized,
{
    0.5 * beta * beta * (psi_i.energy_variance() + psi_f.energy_variance())
}

/// Everything known about one transition, computed by one engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionResult {
    pub p_fwd: f64,
    pub p_bwd: f64,
    pub log_ratio: f64,
    pub predicted_log_ratio: f64,
    pub heat: f64,
    pub classical_log_ratio: f64,
    pub log_upsilon: f64,
    pub alpha_sq_tot: f64,
    pub delta_alpha_sq: f64,
}

impl TransitionResult {
    /// Assembles a result from an engine's forward/backward log-densities.
    pub fn from_log_probabilities(q: &TransitionQuery, log_fwd: f64, log_bwd: f64) -> Self {
        let heat = heat(q.alpha_i, q.alpha_f);
        let log_ratio = log_fwd - log_bwd;
        TransitionResult {
            p_fwd: log_fwd.exp(),
            p_bwd: log_bwd.exp(),
            log_ratio,
            predicted_log_ratio: predicted_log_ratio(q.alpha_i, q.alpha_f, &q.bath),
            heat,
            classical_log_ratio: classical_log_ratio(q.alpha_i, q.alpha_f, &q.bath),
            log_upsilon: q.bath.beta() * heat + log_ratio,
            alpha_sq_tot: q.alpha_i.norm_sqr() + q.alpha_f.norm_sqr(),
            delta_alpha_sq: heat,
        }
    }

    pub fn upsilon(&self) -> f64 {
        self.log_upsilon.exp()
    }
}

/// Evaluates a query with the exact Gaussian engine.
pub fn evaluate(q: &TransitionQuery) -> Result<TransitionResult> {
    let log_fwd = gaussian::log_forward_probability(q);
    let log_bwd = gaussian::log_backward_probability(q)?;
    Ok(TransitionResult::from_log_probabilities(q, log_fwd, log_bwd))
}

/// Evaluates a query with the truncated-Fock oracle.
pub fn evaluate_fock(q: &TransitionQuery, trunc: Truncation) -> Result<TransitionResult> {
    let p_fwd = crate::fock::forward_probability_fock(q, trunc)?;
    let p_bwd = crate::fock::backward_probability_fock(q, trunc)?;
    if !(p_bwd > 0.0) {
        return Err(Error::ZeroBackwardProbability(p_bwd));
    }
    Ok(TransitionResult::from_log_probabilities(q, p_fwd.ln(), p_bwd.ln()))
}
