//! Two-state interferometric entanglement detection in truncated Fock
//! space.
//!
//! The library simulates a measurement scheme in which two copies (or two
//! independently prepared states) of a two-mode optical field interfere
//! pairwise on balanced beam splitters, and photon-number-resolved counts
//! at one output per splitter are collected while the relative phases are
//! stepped around a small discrete grid. Fourier analysis of the
//! phase-dependent counting correlators reconstructs products of
//! moments of the two states, from which second-order separability minors
//! are assembled: a negative minor certifies entanglement of the
//! underlying state.
//!
//! The main layers, bottom up:
//!
//! * [`fock`] — numerically exact truncated two-mode states (weighted
//!   mixtures of pure components), normally ordered moment evaluation,
//!   and Gaussian operations (displacement, squeezing, rotation, beam
//!   splitting) in [`fock::gaussian`];
//! * [`stirling`] — exact integer tables connecting raw, factorial, and
//!   normally ordered photon-number moments;
//! * [`states`] — the built-in state families (two-mode squeezed vacuum,
//!   entangled cat pairs, two-branch number states, coherent products,
//!   and a hyperbolic-well ground state), with noise channels and
//!   phase-space transformations;
//! * [`interferometer`] — the balanced splitter pair: exact joint count
//!   distributions at the monitored outputs, detector loss, and raw
//!   counting correlators;
//! * [`fourier`] — phase-grid planning and extraction of the top-frequency
//!   moment products from correlator scans;
//! * [`witness`] — minor specifications, exact/analytic/extracted witness
//!   evaluation, reference-state optimisation, loss-aware variants, and
//!   quadrature-based criteria for comparison;
//! * [`sampling`] — finite-shot simulation of the full protocol with
//!   reproducible pseudo-randomness, theoretical shot-noise budgets, and
//!   sample-complexity bounds.
//!
//! # Example
//!
//! Witness the entanglement of a two-mode squeezed vacuum against a
//! matched coherent reference:
//!
//! ```
//! use fockwitness::states::{FamilyTag, StateFamily};
//! use fockwitness::witness::{minor_dprime, optimal_reference, MinorSpec};
//!
//! let family = StateFamily::new(FamilyTag::Tmsv {
//!     lambda: 0.5,
//!     displacement: None,
//! });
//! let state = family.build()?;
//! let spec = MinorSpec::new(1, 0, 0, 1)?;
//! let reference = optimal_reference(&state, &spec)?.family().build()?;
//! let result = minor_dprime(&state, &reference, &spec)?;
//! assert!(result.witnessed);
//! assert!((result.value - (-1.0 / 6.0)).abs() < 1e-9);
//! # Ok::<(), fockwitness::Error>(())
//! ```

pub mod error;
pub mod fock;
pub mod fourier;
pub mod interferometer;
pub mod sampling;
pub mod states;
pub mod stirling;
pub mod witness;

pub use error::{Error, Result};
pub use fock::{expectation, Mode, ModeMonomial, PureComponent, TruncatedState};
pub use fourier::{extract_top_coefficients, plan_grid, CorrelatorGrid, TopCoefficients};
pub use interferometer::{apply_loss, correlator, interfere, DetectorPmf, PhasePair};
pub use sampling::{
    estimate_minor, estimate_minor_exact, minor_shot_variance, run_coverage_trials,
    CoverageReport, ShotVariance,
};
pub use states::{FamilyTag, PmTransform, SqueezeOrientation, StateFamily};
pub use witness::{
    analytic_minor, minor_d, minor_dprime, optimal_reference, MinorSpec, Provenance,
    WitnessResult,
};
