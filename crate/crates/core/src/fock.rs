//! Brute-force oracle in a truncated two-mode Fock space.
//!
//! Everything here is computed from the trace formulas directly, without
//! any Gaussian shortcut, so it can be used to check the closed forms in
//! [`crate::gaussian`] and [`crate::reversibility`].
//!
//! The system and bath inputs live in `span{|0⟩, …, |D−1⟩}` each. The
//! beam splitter conserves the total photon number `N`, so it is stored as
//! one `(N+1)×(N+1)` block per sector `N = 0..=2(D−1)`; sectors are kept
//! complete, which makes `[U, N̂]` vanish by construction. Every state
//! builder checks the probability mass it drops against an explicit budget
//! and fails with [`Error::TruncationTooSmall`] rather than truncating
//! silently.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::reversibility::{gibbs_rescale_final, gibbs_rescale_initial};
use crate::types::{BathSpec, ComplexAmplitude, TransitionQuery};

pub const DEFAULT_BUDGET: f64 = 1e-10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Fock-space cutoff `dim` together with the tail mass it may neglect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub dim: usize,
    pub budget: f64,
}

impl Truncation {
    pub fn new(dim: usize) -> Self {
        Truncation {
            dim,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_budget(self, budget: f64) -> Self {
        Truncation { budget, ..self }
    }

    fn check(&self, what: &'static str, tail: f64) -> Result<()> {
        if tail > self.budget || tail.is_nan() {
            return Err(Error::TruncationTooSmall {
                what,
                dim: self.dim,
                tail,
                budget: self.budget,
            });
        }
        Ok(())
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `Σ_{n ≥ dim} e^{−x} xⁿ/n!`, summed directly so tiny tails keep their
/// relative precision.
pub fn poisson_tail(x: f64, dim: usize) -> f64 {
    if x == 0.0 {
        return if dim == 0 { 1.0 } else { 0.0 };
    }
    let mut log_term = -x + dim as f64 * x.ln() - ln_factorial(dim);
    let mut n = dim;
    let mut sum = 0.0;
    loop {
        let term = log_term.exp();
        sum += term;
        n += 1;
        if (n as f64 > x && term <= sum * 1e-17) || n > dim + 100_000 {
            break;
        }
        log_term += x.ln() - (n as f64).ln();
    }
    sum.min(1.0)
}

/// Coherent-state amplitudes `e^{−|α|²/2} αⁿ/√n!` for `n < dim`.
fn coherent_amplitudes(alpha: ComplexAmplitude, dim: usize) -> Vec<Complex64> {
    let a = alpha.to_complex();
    let mut amps = Vec::with_capacity(dim);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        amps.push(c);
        c *= a / ((n + 1) as f64).sqrt();
    }
    amps
}

/// Pure state in the single-mode truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockKet {
    amps: Vec<Complex64>,
    /// probability mass known to lie beyond the cutoff
    tail: f64,
}

impl FockKet {
    /// Normalizes arbitrary amplitudes with exact support below the cutoff.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::domain("Fock dimension must be at least 2"));
        }
        let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("cannot normalize a zero or non-finite ket"));
        }
        Ok(FockKet {
            amps: amps.into_iter().map(|c| c / norm).collect(),
            tail: 0.0,
        })
    }

    /// `Σ_n c_n |n⟩` from real coefficients.
    pub fn superposition(coeffs: &[(usize, f64)], dim: usize) -> Result<Self> {
        let mut amps = vec![ZERO; dim];
        for &(n, c) in coeffs {
            if n >= dim {
                return Err(Error::domain(format!("level {n} outside dimension {dim}")));
            }
            amps[n] += Complex64::new(c, 0.0);
        }
        Self::from_amplitudes(amps)
    }

    pub fn number(n: usize, dim: usize) -> Result<Self> {
        Self::superposition(&[(n, 1.0)], dim)
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::number(0, dim)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Probability mass known to be dropped by the cutoff.
    pub fn tail_mass(&self) -> f64 {
        self.tail
    }

    /// `|⟨ψ|ψ⟩ − 1|` as stored.
    pub fn norm_deviation(&self) -> f64 {
        (self.amps.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs()
    }

    /// Time reversal: complex conjugation of the Fock amplitudes.
    pub fn time_reversed(&self) -> Self {
        FockKet {
            amps: self.amps.iter().map(|c| c.conj()).collect(),
            tail: self.tail,
        }
    }

    pub fn inner(&self, other: &FockKet) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn mean_number(&self) -> f64 {
        self.amps.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum()
    }

    pub fn number_variance(&self) -> f64 {
        let mean = self.mean_number();
        self.amps
            .iter()
            .enumerate()
            .map(|(n, c)| (n as f64 - mean).powi(2) * c.norm_sqr())
            .sum()
    }

    /// Weights `|ψ_n|² e^{s n}` and an estimate of the tilted tail beyond
    /// the cutoff, relative to the tilted total.
    fn tilted_weights(&self, s: f64) -> (Vec<f64>, f64) {
        let w: Vec<f64> = self
            .amps
            .iter()
            .enumerate()
            .map(|(n, c)| c.norm_sqr() * (s * n as f64).exp())
            .collect();
        let total: f64 = w.iter().sum();
        if self.tail == 0.0 {
            return (w, 0.0);
        }
        let d = w.len();
        let (last, prev) = (w[d - 1], w[d - 2]);
        // successive-term ratios of Poisson-like tails only shrink, so a
        // geometric continuation from the last pair bounds what is missing
        let ratio = if prev > 0.0 {
            last / prev
        } else if last > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let geometric = if ratio >= 1.0 {
            f64::INFINITY
        } else {
            last * ratio / (1.0 - ratio)
        };
        let floor = self.tail * (s * d as f64).exp();
        let tail = geometric.max(floor) / total;
        (w, tail)
    }

    /// Normalized `e^{s n̂/2}|ψ⟩`.
    pub fn gibbs_tilted(&self, s: f64, budget: f64) -> Result<Self> {
        let (w, tail) = self.tilted_weights(s);
        Truncation {
            dim: self.dim(),
            budget,
        }
        .check("Gibbs-tilted ket", tail)?;
        let norm = w.iter().sum::<f64>().sqrt();
        Ok(FockKet {
            amps: self
                .amps
                .iter()
                .enumerate()
                .map(|(n, c)| c * (0.5 * s * n as f64).exp() / norm)
                .collect(),
            tail,
        })
    }

    fn padded(&self, dim: usize) -> Result<Vec<Complex64>> {
        if self.dim() > dim {
            return Err(Error::domain(format!(
                "ket of dimension {} exceeds cutoff {dim}",
                self.dim()
            )));
        }
        let mut v = self.amps.clone();
        v.resize(dim, ZERO);
        Ok(v)
    }
}

pub fn coherent_ket(alpha: ComplexAmplitude, trunc: Truncation) -> Result<FockKet> {
    if trunc.dim < 2 {
        return Err(Error::domain("Fock dimension must be at least 2"));
    }
    let tail = poisson_tail(alpha.norm_sqr(), trunc.dim);
    trunc.check("coherent state", tail)?;
    Ok(FockKet {
        amps: coherent_amplitudes(alpha, trunc.dim),
        tail,
    })
}

/// Density matrix in the single-mode truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensity {
    mat: DMatrix<Complex64>,
    tail: f64,
}

impl FockDensity {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|c| c.re).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.mat.diagonal().iter().map(|c| c.re).collect()
    }

    pub fn mean_number(&self) -> f64 {
        self.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.mat - self.mat.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.mat.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Thermal state `p_n ∝ e^{−βn}`, populations not renormalized after the
/// cutoff (the dropped mass `e^{−βD}` is reported).
pub fn thermal_density(bath: &BathSpec, trunc: Truncation) -> Result<FockDensity> {
    if trunc.dim < 2 {
        return Err(Error::domain("Fock dimension must be at least 2"));
    }
    let beta = bath.beta();
    if beta == 0.0 {
        return Err(Error::domain(
            "infinite-temperature bath has no normalizable thermal state",
        ));
    }
    let mut mat = DMatrix::from_element(trunc.dim, trunc.dim, ZERO);
    let tail = if beta.is_infinite() {
        mat[(0, 0)] = ONE;
        0.0
    } else {
        let p0 = -(-beta).exp_m1();
        for n in 0..trunc.dim {
            mat[(n, n)] = Complex64::new(p0 * (-beta * n as f64).exp(), 0.0);
        }
        (-beta * trunc.dim as f64).exp()
    };
    trunc.check("thermal state", tail)?;
    Ok(FockDensity { mat, tail })
}

/// `exp[−iθ(ab† + a†b)]`, one unitary block per total photon number.
///
/// Within sector `N` the basis is `|j, N−j⟩`, `j` counting system photons.
#[derive(Debug, Clone)]
pub struct NumberBlockUnitary {
    theta: f64,
    dim: usize,
    blocks: Vec<DMatrix<Complex64>>,
}

/// Generator `ab† + a†b` restricted to sector `n`.
pub fn sector_generator(n: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n + 1, n + 1);
    for j in 0..n {
        let v = (((j + 1) * (n - j)) as f64).sqrt();
        g[(j + 1, j)] = v;
        g[(j, j + 1)] = v;
    }
    g
}

fn sector_unitary(theta: f64, n: usize) -> DMatrix<Complex64> {
    if theta == 0.0 || n == 0 {
        return DMatrix::identity(n + 1, n + 1);
    }
    let eig = SymmetricEigen::new(sector_generator(n));
    let v = &eig.eigenvectors;
    // the spectrum is exactly {−N, −N+2, …, N}; snapping removes the
    // eigensolver's rounding from the phases
    let snapped = eig.eigenvalues.map(|lambda| {
        debug_assert!((lambda.round() - lambda).abs() < 1e-6);
        lambda.round()
    });
    let mut vc = v.clone();
    let mut vs = v.clone();
    for k in 0..=n {
        vc.column_mut(k).scale_mut((theta * snapped[k]).cos());
        vs.column_mut(k).scale_mut(-(theta * snapped[k]).sin());
    }
    let re = vc * v.transpose();
    let im = vs * v.transpose();
    DMatrix::from_fn(n + 1, n + 1, |r, c| Complex64::new(re[(r, c)], im[(r, c)]))
}

pub fn beam_splitter(theta: f64, dim: usize) -> Result<NumberBlockUnitary> {
    if dim < 2 {
        return Err(Error::domain("Fock dimension must be at least 2"));
    }
    if !theta.is_finite() {
        return Err(Error::domain("mixing angle must be finite"));
    }
    let blocks = (0..2 * dim - 1)
        .into_par_iter()
        .map(|n| sector_unitary(theta, n))
        .collect();
    Ok(NumberBlockUnitary { theta, dim, blocks })
}

impl NumberBlockUnitary {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }

    pub fn block(&self, n: usize) -> &DMatrix<Complex64> {
        &self.blocks[n]
    }

    /// `max_N ‖U_N†U_N − 1‖_max`.
    pub fn unitarity_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|u| {
                let d = u.adjoint() * u - DMatrix::<Complex64>::identity(u.nrows(), u.ncols());
                d.iter().map(|c| c.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, state: &TwoModeState) -> TwoModeState {
        let sectors = state
            .sectors
            .iter()
            .enumerate()
            .map(|(n, amps)| {
                let u = &self.blocks[n];
                let mut out = vec![ZERO; amps.len()];
                for (j, &a) in amps.iter().enumerate() {
                    if a == ZERO {
                        continue;
                    }
                    for (o, &uij) in out.iter_mut().zip(u.column(j).iter()) {
                        *o += uij * a;
                    }
                }
                out
            })
            .collect();
        TwoModeState { sectors }
    }

    /// Dense matrix on the box `j, k < dim` (index `j·dim + k`), keeping
    /// only the sectors `N < dim` that the box contains completely.
    pub fn dense_interior(&self) -> DMatrix<Complex64> {
        let d = self.dim;
        let mut m = DMatrix::from_element(d * d, d * d, ZERO);
        for (n, u) in self.blocks.iter().enumerate().take(d) {
            for j_in in 0..=n {
                for j_out in 0..=n {
                    m[(j_out * d + (n - j_out), j_in * d + (n - j_in))] = u[(j_out, j_in)];
                }
            }
        }
        m
    }
}

/// Two-mode pure state stored sector by sector: `sectors[N][j]` is the
/// amplitude of `|j⟩_system ⊗ |N−j⟩_bath`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    sectors: Vec<Vec<Complex64>>,
}

impl TwoModeState {
    /// `|ψ⟩ ⊗ |m⟩` in a space with sectors `0..n_sectors`.
    pub fn product_with_number(system: &[Complex64], bath_photons: usize, n_sectors: usize) -> Self {
        let mut sectors: Vec<Vec<Complex64>> = (0..n_sectors).map(|n| vec![ZERO; n + 1]).collect();
        for (j, &c) in system.iter().enumerate() {
            if let Some(s) = sectors.get_mut(j + bath_photons) {
                s[j] = c;
            }
        }
        TwoModeState { sectors }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.sectors.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    /// `Σ_k |⟨φ, k|Ψ⟩|²`: the probability of finding the system in `|φ⟩`
    /// with the bath traced out.
    pub fn project_system(&self, phi: &[Complex64]) -> f64 {
        let mut by_bath = vec![ZERO; self.sectors.len()];
        for (n, amps) in self.sectors.iter().enumerate() {
            for (j, &a) in amps.iter().enumerate().take(phi.len()) {
                by_bath[n - j] += phi[j].conj() * a;
            }
        }
        by_bath.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨a†a⟩` of the system mode.
    pub fn system_mean_number(&self) -> f64 {
        self.sectors
            .iter()
            .flat_map(|amps| amps.iter().enumerate().map(|(j, c)| j as f64 * c.norm_sqr()))
            .sum()
    }

    /// Reduced system amplitude mean `⟨a⟩`.
    pub fn system_mean_field(&self) -> Complex64 {
        let mut acc = ZERO;
        for (n, amps) in self.sectors.iter().enumerate() {
            // a|j, N−j⟩ = √j |j−1, N−j⟩ lives in sector N−1 at index j−1
            if n == 0 {
                continue;
            }
            let lower = &self.sectors[n - 1];
            for j in 1..amps.len() {
                acc += lower[j - 1].conj() * amps[j] * (j as f64).sqrt();
            }
        }
        acc
    }
}

/// `Tr[U(|ψ_in⟩⟨ψ_in| ⊗ ρ_th)U† (|ψ_out⟩⟨ψ_out| ⊗ 1)]`.
pub fn transition_probability(
    input: &FockKet,
    thermal: &FockDensity,
    unitary: &NumberBlockUnitary,
    output: &[Complex64],
) -> Result<f64> {
    let d = unitary.dim();
    if thermal.dim() > d {
        return Err(Error::domain("thermal state exceeds the unitary's cutoff"));
    }
    let psi = input.padded(d)?;
    let n_sectors = 2 * d - 1;
    let terms: Vec<f64> = thermal
        .populations()
        .into_par_iter()
        .enumerate()
        .map(|(m, p)| {
            if p == 0.0 {
                return 0.0;
            }
            let evolved = unitary.apply(&TwoModeState::product_with_number(&psi, m, n_sectors));
            p * evolved.project_system(output)
        })
        .collect();
    Ok(terms.iter().sum())
}

/// Largest bath cutoff [`bath_dim`] will choose.
pub const MAX_BATH_DIM: usize = 512;

/// Bath levels needed to keep the thermal tail `e^{−βD}` within the
/// budget, and never fewer than the system cutoff.
pub fn bath_dim(bath: &BathSpec, trunc: Truncation) -> Result<usize> {
    let beta = bath.beta();
    if beta.is_infinite() || trunc.budget >= 1.0 {
        return Ok(trunc.dim);
    }
    let needed = (-trunc.budget.ln() / beta).ceil();
    if !(needed <= MAX_BATH_DIM as f64) {
        return Err(Error::TruncationTooSmall {
            what: "thermal state",
            dim: MAX_BATH_DIM,
            tail: (-beta * MAX_BATH_DIM as f64).exp(),
            budget: trunc.budget,
        });
    }
    Ok(trunc.dim.max(needed as usize))
}

/// Oracle for a family of queries sharing one bath and one splitter.
///
/// The system mode is cut at `trunc.dim`; the bath mode gets as many
/// levels as its thermal tail needs (see [`bath_dim`]).
#[derive(Debug, Clone)]
pub struct FockEngine {
    trunc: Truncation,
    bath: BathSpec,
    thermal: FockDensity,
    unitary: NumberBlockUnitary,
}

impl FockEngine {
    pub fn new(bath: &BathSpec, theta: f64, trunc: Truncation) -> Result<Self> {
        if trunc.dim < 2 {
            return Err(Error::domain("Fock dimension must be at least 2"));
        }
        let bath_trunc = Truncation {
            dim: bath_dim(bath, trunc)?,
            ..trunc
        };
        Ok(FockEngine {
            trunc,
            bath: *bath,
            thermal: thermal_density(bath, bath_trunc)?,
            unitary: beam_splitter(theta, bath_trunc.dim)?,
        })
    }

    pub fn system_dim(&self) -> usize {
        self.trunc.dim
    }

    pub fn bath_dim(&self) -> usize {
        self.thermal.dim()
    }

    pub fn unitary(&self) -> &NumberBlockUnitary {
        &self.unitary
    }

    pub fn thermal(&self) -> &FockDensity {
        &self.thermal
    }

    /// Coherent projector amplitudes over every system level the evolved
    /// state can reach, so the projection itself drops nothing.
    fn evaluation_point(&self, alpha: ComplexAmplitude) -> Vec<Complex64> {
        coherent_amplitudes(alpha, 2 * self.unitary.dim() - 1)
    }

    pub fn coherent_transition(&self, from: ComplexAmplitude, to: ComplexAmplitude) -> Result<f64> {
        let input = coherent_ket(from, self.trunc)?;
        let output = self.evaluation_point(to);
        transition_probability(&input, &self.thermal, &self.unitary, &output)
    }

    pub fn ket_transition(&self, from: &FockKet, to: &FockKet) -> Result<f64> {
        transition_probability(from, &self.thermal, &self.unitary, to.amplitudes())
    }

    pub fn forward(&self, alpha_i: ComplexAmplitude, alpha_f: ComplexAmplitude) -> Result<f64> {
        self.coherent_transition(alpha_i, alpha_f)
    }

    /// Reverse trajectory with `U_R = U`: input `α̃_f`, projector `α̃_i`.
    pub fn backward(&self, alpha_i: ComplexAmplitude, alpha_f: ComplexAmplitude) -> Result<f64> {
        let beta = self.bath.beta();
        if !beta.is_finite() {
            return Err(Error::DegenerateBath);
        }
        self.coherent_transition(gibbs_rescale_final(alpha_f, beta), gibbs_rescale_initial(alpha_i, beta))
    }
}

pub fn forward_probability_fock(q: &TransitionQuery, trunc: Truncation) -> Result<f64> {
    FockEngine::new(&q.bath, q.bs.theta(), trunc)?.forward(q.alpha_i, q.alpha_f)
}

pub fn backward_probability_fock(q: &TransitionQuery, trunc: Truncation) -> Result<f64> {
    if !q.bath.beta().is_finite() {
        return Err(Error::DegenerateBath);
    }
    FockEngine::new(&q.bath, q.bs.theta(), trunc)?.backward(q.alpha_i, q.alpha_f)
}

/// `⟨ψ|e^{s n̂}|ψ⟩` with `H = n̂` (zero-point dropped).
pub fn exp_beta_h_expectation(psi: &FockKet, s: f64) -> Result<f64> {
    exp_beta_h_expectation_with_budget(psi, s, DEFAULT_BUDGET)
}

pub fn exp_beta_h_expectation_with_budget(psi: &FockKet, s: f64, budget: f64) -> Result<f64> {
    let (w, tail) = psi.tilted_weights(s);
    Truncation { dim: psi.dim(), budget }.check("exponentially tilted expectation", tail)?;
    Ok(w.iter().sum())
}

/// `⟨ψ|e^{s(n̂ + offset)}|ψ⟩`, for checking that a constant energy shift
/// drops out of every ratio.
pub fn exp_h_expectation_with_offset(psi: &FockKet, s: f64, offset: f64) -> Result<f64> {
    Ok((s * offset).exp() * exp_beta_h_expectation(psi, s)?)
}

/// `⟨α|α·e^{s/2}⟩` evaluated in the Fock basis.
pub fn rescaled_overlap(alpha: ComplexAmplitude, s: f64, trunc: Truncation) -> Result<Complex64> {
    let a = coherent_ket(alpha, trunc)?;
    let b = coherent_ket(alpha.scale((0.5 * s).exp()), trunc)?;
    Ok(a.inner(&b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralRatio {
    /// `P→(ψ_f|ψ_i) / P←(ψ̃_i|ψ̃_f)` from the trace formulas
    pub lhs: f64,
    /// `⟨ψ_i|e^{βH}|ψ_i⟩⟨ψ_f|e^{−βH}|ψ_f⟩`
    pub rhs: f64,
    pub p_fwd: f64,
    pub p_bwd: f64,
}

impl GeneralRatio {
    pub fn relative_error(&self) -> f64 {
        ((self.lhs - self.rhs) / self.rhs).abs()
    }
}

/// Both sides of the general reversibility relation for arbitrary pure
/// states. The caller decides what agreement is good enough.
pub fn general_ratio_check(
    psi_i: &FockKet,
    psi_f: &FockKet,
    bath: &BathSpec,
    theta: f64,
    trunc: Truncation,
) -> Result<GeneralRatio> {
    let beta = bath.beta();
    if !beta.is_finite() {
        return Err(Error::DegenerateBath);
    }
    let engine = FockEngine::new(bath, theta, trunc)?;
    let d = trunc.dim;
    let pad = |k: &FockKet| -> Result<FockKet> {
        Ok(FockKet {
            amps: k.padded(d)?,
            tail: k.tail,
        })
    };
    let (psi_i, psi_f) = (pad(psi_i)?, pad(psi_f)?);

    let p_fwd = engine.ket_transition(&psi_i, &psi_f)?;
    let tilde_i = psi_i.time_reversed().gibbs_tilted(beta, trunc.budget)?;
    let tilde_f = psi_f.time_reversed().gibbs_tilted(-beta, trunc.budget)?;
    let p_bwd = engine.ket_transition(&tilde_f, &tilde_i)?;
    if !(p_bwd > f64::MIN_POSITIVE) {
        return Err(Error::ZeroBackwardProbability(p_bwd));
    }
    let rhs = exp_beta_h_expectation_with_budget(&psi_i, beta, trunc.budget)?
        * exp_beta_h_expectation_with_budget(&psi_f, -beta, trunc.budget)?;
    Ok(GeneralRatio {
        lhs: p_fwd / p_bwd,
        rhs,
        p_fwd,
        p_bwd,
    })
}

/// Trace distance between `U(ρ_eq ⊗ ρ_th)U†` and `ρ_eq ⊗ ρ_th`, with the
/// system equilibrated at the bath temperature.
///
/// Both states are block diagonal in `N`. On a sector `N < dim` the input
/// weights `p_j p_{N−j} ∝ e^{−βN}` are all equal, so the block is a
/// multiple of the identity and contributes nothing. On a boundary sector
/// the input is `c_N·P` with `P` projecting on the levels the box keeps,
/// and `‖UPU† − P‖₁ = 2 Σ sin θ_k` over the principal angles between the
/// two ranges, read off the singular values of the smaller diagonal block
/// of `U`.
pub fn fixed_point_check(bath: &BathSpec, theta: f64, trunc: Truncation) -> Result<f64> {
    let p = thermal_density(bath, trunc)?.populations();
    let u = beam_splitter(theta, trunc.dim)?;
    let d = trunc.dim;
    let terms: Vec<f64> = (d..2 * d - 1)
        .into_par_iter()
        .map(|n| {
            let kept = (n + 1 - d)..d;
            let weight = p[kept.start] * p[n - kept.start];
            let block = u.block(n);
            let idx: Vec<usize> = if 2 * kept.len() <= n + 1 {
                kept.collect()
            } else {
                (0..=n).filter(|j| !kept.contains(j)).collect()
            };
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| block[(idx[r], idx[c])]);
            let sines: f64 = sub
                .singular_values()
                .iter()
                .map(|s| (1.0 - s * s).max(0.0).sqrt())
                .sum();
            weight * sines
        })
        .collect();
    Ok(terms.iter().sum())
}

/// `max |[U, N̂_total]|` over the interior of the truncated box (sectors
/// `N < dim`, which the box contains completely).
pub fn energy_conservation_check(theta: f64, dim: usize) -> Result<f64> {
    let dense = beam_splitter(theta, dim)?.dense_interior();
    let number = |idx: usize| ((idx / dim) + (idx % dim)) as f64;
    let mut worst = 0.0f64;
    for c in 0..dense.ncols() {
        for r in 0..dense.nrows() {
            // (U N − N U)_{rc} = U_{rc}(N_c − N_r)
            worst = worst.max((dense[(r, c)] * (number(c) - number(r))).norm());
        }
    }
    Ok(worst)
}

/// Energy statistics of a pure state, with `H = n̂`.
pub trait EnergyStatistics {
    fn mean_energy(&self) -> f64;
    fn energy_variance(&self) -> f64;
    /// `log⟨ψ|e^{sH}|ψ⟩`.
    fn log_exp_energy(&self, s: f64) -> Result<f64>;
}

impl EnergyStatistics for FockKet {
    fn mean_energy(&self) -> f64 {
        self.mean_number()
    }

    fn energy_variance(&self) -> f64 {
        self.number_variance()
    }

    fn log_exp_energy(&self, s: f64) -> Result<f64> {
        Ok(exp_beta_h_expectation(self, s)?.ln())
    }
}

/// Coherent state represented by its Poisson photon-number series, summed
/// term by term in log domain until the terms stop contributing. Reaches
/// amplitudes and tilts for which a dense Fock ket would be impractical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentSeries(pub ComplexAmplitude);

impl CoherentSeries {
    /// `(n, log p_n + s·n)` for every term that matters.
    fn log_terms(&self, s: f64) -> Vec<f64> {
        let x = self.0.norm_sqr();
        if x == 0.0 {
            return vec![0.0];
        }
        let peak = x * s.exp();
        let mut out = Vec::new();
        let mut log_term = -x;
        let mut best = f64::NEG_INFINITY;
        let mut n = 0usize;
        loop {
            out.push(log_term);
            best = best.max(log_term);
            n += 1;
            if n as f64 > peak && log_term < best - 60.0 {
                break;
            }
            log_term += x.ln() + s - (n as f64).ln();
        }
        out
    }

    fn moments(&self) -> (f64, f64) {
        let lt = self.log_terms(0.0);
        let max = lt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = lt.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = p.iter().sum();
        let mean = p.iter().enumerate().map(|(n, w)| n as f64 * w).sum::<f64>() / z;
        let var = p
            .iter()
            .enumerate()
            .map(|(n, w)| (n as f64 - mean).powi(2) * w)
            .sum::<f64>()
            / z;
        (mean, var)
    }
}

impl EnergyStatistics for CoherentSeries {
    fn mean_energy(&self) -> f64 {
        self.moments().0
    }

    fn energy_variance(&self) -> f64 {
        self.moments().1
    }

    fn log_exp_energy(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::domain("tilt must be finite"));
        }
        let lt = self.log_terms(s);
        let max = lt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(max + lt.iter().map(|l| (l - max).exp()).sum::<f64>().ln())
    }
}
