//! Exact Gaussian engine.
//!
//! A coherent state `|α⟩` mixed with a thermal mode of occupation `n_th` on a
//! beam splitter leaves the system in a displaced thermal state: mean field
//! `μ = √τ·α`, thermal occupation `n̄ = (1 − τ)·n_th`. Its Husimi function is
//! an isotropic complex Gaussian of width `n̄ + 1`, and the transition
//! probability density to a coherent state `|β⟩` is `⟨β|ρ|β⟩ = π·Q(β)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::reversibility::{gibbs_rescale_final, gibbs_rescale_initial};
use crate::types::{BathSpec, BeamSplitterSpec, ComplexAmplitude, TransitionQuery};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisplacedThermalState {
    pub mu: ComplexAmplitude,
    pub nbar: f64,
}

impl DisplacedThermalState {
    pub fn new(mu: ComplexAmplitude, nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) || !nbar.is_finite() || !mu.is_finite() {
            return Err(Error::domain(format!(
                "invalid displaced thermal state mu={mu}, nbar={nbar}"
            )));
        }
        Ok(DisplacedThermalState { mu, nbar })
    }

    pub fn vacuum() -> Self {
        DisplacedThermalState {
            mu: ComplexAmplitude::ZERO,
            nbar: 0.0,
        }
    }

    /// Per-quadrature variance of heterodyne outcomes, `n̄ + 1`.
    pub fn q_width(&self) -> f64 {
        self.nbar + 1.0
    }
}

/// Which splitter port the coherent state enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputPort {
    /// `μ = √τ·α`, `n̄ = (1 − τ)·n_th`.
    #[default]
    Transmitted,
    /// `μ = −i√(1 − τ)·α`, `n̄ = τ·n_th`.
    Reflected,
}

pub fn interact(alpha_in: ComplexAmplitude, bath: &BathSpec, bs: &BeamSplitterSpec) -> DisplacedThermalState {
    interact_via(alpha_in, bath, bs, InputPort::Transmitted)
}

pub fn interact_via(
    alpha_in: ComplexAmplitude,
    bath: &BathSpec,
    bs: &BeamSplitterSpec,
    port: InputPort,
) -> DisplacedThermalState {
    let tau = bs.tau();
    let (mu, bath_share) = match port {
        InputPort::Transmitted => (alpha_in.scale(tau.sqrt()), 1.0 - tau),
        InputPort::Reflected => {
            let r = (1.0 - tau).sqrt();
            (
                ComplexAmplitude {
                    re: alpha_in.im * r,
                    im: -alpha_in.re * r,
                },
                tau,
            )
        }
    };
    // a fully blocked bath port contributes nothing, even at n_th = ∞
    let nbar = if bath_share == 0.0 {
        0.0
    } else {
        bath_share * bath.n_th()
    };
    DisplacedThermalState { mu, nbar }
}

/// `Q(α) = exp(−|α − μ|²/(n̄ + 1)) / (π(n̄ + 1))`.
pub fn q_function(state: &DisplacedThermalState, alpha: ComplexAmplitude) -> f64 {
    log_overlap_density(state, alpha).exp() / PI
}

/// `log⟨α|ρ|α⟩ = −|α − μ|²/(n̄ + 1) − ln(n̄ + 1)`.
pub fn log_overlap_density(state: &DisplacedThermalState, alpha: ComplexAmplitude) -> f64 {
    let w = state.q_width();
    let d = ComplexAmplitude {
        re: alpha.re - state.mu.re,
        im: alpha.im - state.mu.im,
    };
    -d.norm_sqr() / w - w.ln()
}

pub fn forward_probability(q: &TransitionQuery) -> f64 {
    log_forward_probability(q).exp()
}

pub fn log_forward_probability(q: &TransitionQuery) -> f64 {
    log_forward_probability_via(q, InputPort::Transmitted)
}

pub fn log_forward_probability_via(q: &TransitionQuery, port: InputPort) -> f64 {
    let out = interact_via(q.alpha_i, &q.bath, &q.bs, port);
    log_overlap_density(&out, q.alpha_f)
}

/// Density of the Gibbs-rescaled reverse trajectory: the input `α̃_f` is
/// sent through the same splitter and bath, and the output is projected on
/// `α̃_i`.
pub fn backward_probability(q: &TransitionQuery) -> Result<f64> {
    Ok(log_backward_probability(q)?.exp())
}

pub fn log_backward_probability(q: &TransitionQuery) -> Result<f64> {
    log_backward_probability_via(q, InputPort::Transmitted)
}

pub fn log_backward_probability_via(q: &TransitionQuery, port: InputPort) -> Result<f64> {
    let beta = q.bath.beta();
    if !beta.is_finite() {
        return Err(Error::DegenerateBath);
    }
    let input = gibbs_rescale_final(q.alpha_f, beta);
    let target = gibbs_rescale_initial(q.alpha_i, beta);
    let out = interact_via(input, &q.bath, &q.bs, port);
    Ok(log_overlap_density(&out, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amp(re: f64, im: f64) -> ComplexAmplitude {
        ComplexAmplitude { re, im }
    }

    fn bath(n: f64) -> BathSpec {
        BathSpec::from_nth(n).unwrap()
    }

    fn bs(tau: f64) -> BeamSplitterSpec {
        BeamSplitterSpec::from_tau(tau).unwrap()
    }

    #[test]
    fn interaction_moments() {
        let s = interact(amp(2.0, 0.0), &bath(1.0), &bs(1.0));
        assert_eq!((s.mu, s.nbar), (amp(2.0, 0.0), 0.0));
        let s = interact(amp(2.0, 0.0), &bath(1.0), &bs(0.0));
        assert_eq!(s.nbar, 1.0);
        assert!(s.mu.abs() < 1e-16);
        let s = interact(amp(2.0, 0.0), &bath(1.0), &bs(0.5));
        assert!((s.mu.re - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.nbar - 0.5).abs() < 1e-15);
    }

    #[test]
    fn q_function_peaks() {
        let v = q_function(&DisplacedThermalState::vacuum(), ComplexAmplitude::ZERO);
        assert!((v - 1.0 / PI).abs() < 1e-16);
        let s = DisplacedThermalState::new(amp(1.0, 1.0), 2.0).unwrap();
        assert!((q_function(&s, amp(1.0, 1.0)) - 1.0 / (3.0 * PI)).abs() < 1e-16);
        assert!(DisplacedThermalState::new(ComplexAmplitude::ZERO, -0.1).is_err());
    }

    #[test]
    fn q_function_integrates_to_one() {
        // polar midpoint rule over a disk of radius |μ| + 8√(n̄+1) around the origin
        for (mu, nbar) in [(amp(0.0, 0.0), 0.0), (amp(1.0, -0.5), 0.5), (amp(-2.0, 1.5), 2.3)] {
            let s = DisplacedThermalState::new(mu, nbar).unwrap();
            let radius = mu.abs() + 8.0 * s.q_width().sqrt();
            let (nr, nphi) = (4000, 720);
            let (dr, dphi) = (radius / nr as f64, 2.0 * PI / nphi as f64);
            let mut total = 0.0;
            for i in 0..nr {
                let r = (i as f64 + 0.5) * dr;
                for j in 0..nphi {
                    let phi = (j as f64 + 0.5) * dphi;
                    total += q_function(&s, ComplexAmplitude::from_polar(r, phi)) * r * dr * dphi;
                }
            }
            assert!((total - 1.0).abs() < 1e-6, "mu={mu} nbar={nbar}: {total}");
        }
    }

    #[test]
    fn trivial_transitions() {
        let vac = TransitionQuery::new(
            ComplexAmplitude::ZERO,
            ComplexAmplitude::ZERO,
            BathSpec::from_beta(60.0).unwrap(),
            bs(0.4),
        )
        .unwrap();
        assert!((forward_probability(&vac) - 1.0).abs() < 1e-12);
        assert_eq!(backward_probability(&vac).unwrap(), forward_probability(&vac));

        let q = TransitionQuery::from_parts(amp(1.0, 0.0), amp(1.0, 0.0), 1.0, 1.0).unwrap();
        assert_eq!(forward_probability(&q), 1.0);

        // β → 0⁺ with a fully transmitting splitter
        let q = TransitionQuery::new(
            amp(1.0, 0.0),
            amp(1.0, 0.0),
            BathSpec::from_beta(1e-12).unwrap(),
            bs(1.0),
        )
        .unwrap();
        assert!((backward_probability(&q).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn zero_temperature_backward_is_rejected() {
        let q = TransitionQuery::new(amp(1.0, 0.0), amp(0.5, 0.0), BathSpec::zero_temperature(), bs(0.5)).unwrap();
        assert!(forward_probability(&q) > 0.0);
        assert_eq!(backward_probability(&q), Err(Error::DegenerateBath));
    }
}
