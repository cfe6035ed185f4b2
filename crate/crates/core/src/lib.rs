//! Spectral analysis of a dissipative collective spin coupled to a polarized
//! Markovian bath.
//!
//! The pipeline is:
//!
//! 1. [`spin`] builds the collective `su(2)` generators for spin length `j`.
//! 2. [`liouvillian`] builds the vectorized Lindblad generator (two independent
//!    constructions) and splits it into weak-symmetry sectors `M = m - m'`.
//! 3. [`spectral`] computes the steady state, the full complex spectrum with
//!    near-degeneracy flags, and emission spectra `S(w)` from the resolvent.
//! 4. [`lineshape`] fits Lorentzian / Lorentzian + super-Lorentzian models and
//!    reports the EP weight `r` together with `dBIC` and `dAIC`.
//! 5. [`jordan`] holds closed-form size-two Jordan-block systems used as
//!    ground truth for the resolvent and fitting machinery.
//!
//! All numerical code is generic over [`Real`]; the `*64` aliases below pin
//! the `f64` instantiation used by the CLI.

pub mod error;
pub mod jordan;
pub mod lineshape;
pub mod liouvillian;
pub mod scalar;
pub mod spectral;
pub mod spin;

pub use error::{Error, Result};
pub use jordan::{JordanBlockSystem, Unfolding};
pub use lineshape::{
    aic, bic, ep_diagnostics, eval_model, fit, EPDiagnostics, FitOptions, FitResult, LineModel,
    ModelAParams, ModelBParams, ModelParamsAny,
};
pub use liouvillian::{
    bath_inverse_temperature, build_liouvillian_explicit, build_liouvillian_generic,
    devectorize, sector_decompose, vectorize, InverseTemperature, Liouvillian, ModelParams,
    Sector, SectorDecomposition, VecConvention,
};
pub use scalar::{Cx, Real};
pub use spectral::{
    default_grid, emission_spectrum_source, emission_spectrum_steady, frequency_grid,
    full_spectrum, random_full_rank_state, steady_state, EmissionSolver, LiouvSpectrum,
    SourceKind, SpectrumTrace, SteadyState,
};
pub use spin::{build_spin_ops, commutator, SpinLength, SpinOps};

pub type SpinOps64 = SpinOps<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type Liouvillian64 = Liouvillian<f64>;
pub type SectorDecomposition64 = SectorDecomposition<f64>;
pub type SteadyState64 = SteadyState<f64>;
pub type LiouvSpectrum64 = LiouvSpectrum<f64>;
pub type SpectrumTrace64 = SpectrumTrace<f64>;
pub type FitResult64 = FitResult<f64>;
pub type EPDiagnostics64 = EPDiagnostics<f64>;
pub type JordanBlockSystem64 = JordanBlockSystem<f64>;

pub type SpinOps32 = SpinOps<f32>;
pub type Liouvillian32 = Liouvillian<f32>;
