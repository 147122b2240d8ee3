//! Parameter types shared by every engine.
//!
//! All energies are measured in units of the oscillator quantum, so a bath
//! is fully described by the dimensionless inverse temperature
//! `beta = β·ħω₀` or, equivalently, by its mean occupation `n_th`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reversibility::{beta_from_nth, nth_from_beta};

/// Coherent-state amplitude α in quadrature units, `a = (x + ip)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ComplexAmplitude {
    pub re: f64,
    pub im: f64,
}

impl ComplexAmplitude {
    pub const ZERO: ComplexAmplitude = ComplexAmplitude { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::domain(format!("non-finite amplitude {re}+{im}i")));
        }
        Ok(ComplexAmplitude { re, im })
    }

    pub fn real(re: f64) -> Self {
        ComplexAmplitude { re, im: 0.0 }
    }

    pub fn from_polar(r: f64, phi: f64) -> Self {
        ComplexAmplitude {
            re: r * phi.cos(),
            im: r * phi.sin(),
        }
    }

    /// |α|², the mean photon number of the coherent state.
    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn conj(self) -> Self {
        ComplexAmplitude {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn scale(self, k: f64) -> Self {
        ComplexAmplitude {
            re: self.re * k,
            im: self.im * k,
        }
    }

    pub fn rotate(self, phi: f64) -> Self {
        (self.to_complex() * Complex64::from_polar(1.0, phi)).into()
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl From<Complex64> for ComplexAmplitude {
    fn from(z: Complex64) -> Self {
        ComplexAmplitude { re: z.re, im: z.im }
    }
}

impl From<ComplexAmplitude> for Complex64 {
    fn from(a: ComplexAmplitude) -> Self {
        a.to_complex()
    }
}

impl fmt::Display for ComplexAmplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im == 0.0 {
            write!(f, "{}", self.re)
        } else if self.im.is_sign_negative() {
            write!(f, "{}-{}i", self.re, -self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

/// Accepts `"a"`, `"a+bi"`, `"a-bi"`, `"bi"` (with `j` as an alias of `i`).
impl FromStr for ComplexAmplitude {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Parse(format!("cannot parse complex amplitude {s:?}"));
        if s.is_empty() {
            return Err(bad());
        }
        let number = |t: &str| -> Result<f64> {
            match t {
                "" | "+" => Ok(1.0),
                "-" => Ok(-1.0),
                _ => t.parse::<f64>().map_err(|_| bad()),
            }
        };
        let amp = match s.strip_suffix(['i', 'j']) {
            None => ComplexAmplitude::real(s.parse::<f64>().map_err(|_| bad())?),
            Some(body) => {
                // split at the last sign that is not a leading sign or an exponent sign
                let bytes = body.as_bytes();
                let split = (1..bytes.len())
                    .rev()
                    .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
                match split {
                    Some(k) => ComplexAmplitude {
                        re: body[..k].parse::<f64>().map_err(|_| bad())?,
                        im: number(&body[k..])?,
                    },
                    None => ComplexAmplitude {
                        re: 0.0,
                        im: number(body)?,
                    },
                }
            }
        };
        ComplexAmplitude::new(amp.re, amp.im).map_err(|_| bad())
    }
}

impl<'de> Deserialize<'de> for ComplexAmplitude {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Real(f64),
            Text(String),
            Parts {
                re: f64,
                #[serde(default)]
                im: f64,
            },
        }
        let amp = match Repr::deserialize(d)? {
            Repr::Real(re) => ComplexAmplitude::new(re, 0.0),
            Repr::Text(s) => s.parse(),
            Repr::Parts { re, im } => ComplexAmplitude::new(re, im),
        };
        amp.map_err(serde::de::Error::custom)
    }
}

/// Thermal bath, stored as both the dimensionless inverse temperature and
/// the equivalent mean occupation.
///
/// `beta` ranges over `[0, ∞]`: `beta = ∞` is the zero-temperature bath
/// (`n_th = 0`) and `beta = 0` the infinite-temperature limit
/// (`n_th = ∞`). The probability engines need a finite, positive `beta`;
/// see [`BathSpec::is_finite_temperature`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BathSpec {
    beta: f64,
    n_th: f64,
}

impl BathSpec {
    pub fn from_beta(beta: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::domain(format!("inverse temperature must be >= 0, got {beta}")));
        }
        let n_th = if beta == 0.0 {
            f64::INFINITY
        } else {
            nth_from_beta(beta)?
        };
        Ok(BathSpec { beta, n_th })
    }

    pub fn from_nth(n_th: f64) -> Result<Self> {
        if n_th.is_nan() || n_th < 0.0 {
            return Err(Error::domain(format!("thermal occupation must be >= 0, got {n_th}")));
        }
        let beta = if n_th == 0.0 {
            f64::INFINITY
        } else if n_th.is_infinite() {
            0.0
        } else {
            beta_from_nth(n_th)?
        };
        Ok(BathSpec { beta, n_th })
    }

    pub fn zero_temperature() -> Self {
        BathSpec {
            beta: f64::INFINITY,
            n_th: 0.0,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_th(&self) -> f64 {
        self.n_th
    }

    /// `0 < beta < ∞`, the domain on which forward and backward
    /// probabilities are both defined.
    pub fn is_finite_temperature(&self) -> bool {
        self.beta > 0.0 && self.beta.is_finite()
    }

    /// Ratio `e^{-beta}` of successive thermal populations.
    pub fn boltzmann_ratio(&self) -> f64 {
        (-self.beta).exp()
    }
}

impl<'de> Deserialize<'de> for BathSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            beta: Option<f64>,
            n_th: Option<f64>,
        }
        let r = Repr::deserialize(d)?;
        match (r.beta, r.n_th) {
            (Some(b), _) => BathSpec::from_beta(b),
            (None, Some(n)) => BathSpec::from_nth(n),
            (None, None) => Err(Error::domain("bath needs beta or n_th")),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Beam splitter `U(θ) = exp[-iθ(ab† + a†b)]`; `tau = cos²θ` is the power
/// transmissivity seen by the system (coherent) input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamSplitterSpec {
    tau: f64,
    theta: f64,
}

impl BeamSplitterSpec {
    pub fn from_tau(tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::domain(format!("transmissivity must lie in [0, 1], got {tau}")));
        }
        Ok(BeamSplitterSpec {
            tau,
            theta: tau.sqrt().acos(),
        })
    }

    /// Mixing angle in `[0, π/2]`.
    pub fn from_theta(theta: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
            return Err(Error::domain(format!(
                "mixing angle must lie in [0, pi/2], got {theta}"
            )));
        }
        let c = theta.cos();
        Ok(BeamSplitterSpec { tau: c * c, theta })
    }

    /// Builds the splitter from the reflectivity of the bath port,
    /// `tau = 1 - R`.
    pub fn from_reflectivity(r: f64) -> Result<Self> {
        Self::from_tau(1.0 - r)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl<'de> Deserialize<'de> for BeamSplitterSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            tau: f64,
        }
        BeamSplitterSpec::from_tau(Repr::deserialize(d)?.tau).map_err(serde::de::Error::custom)
    }
}

/// One forward/backward transition: initial and final coherent amplitudes,
/// the bath and the splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionQuery {
    pub alpha_i: ComplexAmplitude,
    pub alpha_f: ComplexAmplitude,
    pub bath: BathSpec,
    pub bs: BeamSplitterSpec,
}

impl TransitionQuery {
    pub fn new(
        alpha_i: ComplexAmplitude,
        alpha_f: ComplexAmplitude,
        bath: BathSpec,
        bs: BeamSplitterSpec,
    ) -> Result<Self> {
        if !alpha_i.is_finite() || !alpha_f.is_finite() {
            return Err(Error::domain("non-finite amplitude in query"));
        }
        if !bath.n_th().is_finite() {
            return Err(Error::domain("bath occupation must be finite (beta > 0)"));
        }
        Ok(TransitionQuery {
            alpha_i,
            alpha_f,
            bath,
            bs,
        })
    }

    /// Convenience constructor from plain numbers.
    pub fn from_parts(alpha_i: ComplexAmplitude, alpha_f: ComplexAmplitude, n_th: f64, tau: f64) -> Result<Self> {
        Self::new(
            alpha_i,
            alpha_f,
            BathSpec::from_nth(n_th)?,
            BeamSplitterSpec::from_tau(tau)?,
        )
    }
}
