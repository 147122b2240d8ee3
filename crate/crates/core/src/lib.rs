//! Microscopic reversibility of coherent-state transitions through a
//! thermal beam splitter.
//!
//! * [`gaussian`]: exact closed-form transition densities.
//! * [`fock`]: brute-force truncated Fock-space oracle.
//! * [`reversibility`]: log-ratio predictions, heat and the coherence factor Υ.
//! * [`heterodyne`]: simulated heterodyne experiment with bootstrap errors.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fock;
pub mod gaussian;
pub mod heterodyne;
pub mod reversibility;
pub mod types;

pub use error::{Error, Result};
pub use fock::{EnergyStatistics, FockKet, Truncation};
pub use gaussian::{DisplacedThermalState, InputPort};
pub use heterodyne::{BootstrapConfig, BootstrapEstimate, HeterodyneDataset, IsotropicGaussianFit, QuadratureSample};
pub use reversibility::TransitionResult;
pub use types::{BathSpec, BeamSplitterSpec, ComplexAmplitude, TransitionQuery};
