//! Second-order separability minors and collective-quadrature criteria.
//!
//! For exponents `(m, n, p, q)` the single-state minor is
//!
//! ```text
//! d = ⟨a†ᵐaᵐ b†ⁿbⁿ⟩ ⟨a†ᵖaᵖ b†^q b^q⟩ − |⟨a†ᵐaᵖ b†^q bⁿ⟩|²
//! ```
//!
//! which is non-negative on every separable two-mode state; `d < 0`
//! certifies entanglement. The interferometric scheme measures the
//! *two-state* relaxation
//!
//! ```text
//! d′ = ½(F₁ + F₂) − Re(⟨G⟩₁ ⟨G†⟩₂),   Fᵢ = ⟨A⟩ᵢ⟨B⟩ᵢ,
//! ```
//!
//! which satisfies `d′ = ½(d⁽¹⁾ + d⁽²⁾) + ε` with the mismatch penalty
//! `ε = ½|⟨G⟩₁ − ⟨G⟩₂|² ≥ 0`; a negative `d′` therefore certifies that at
//! least one of the two states is entangled, and feeding the same state
//! twice recovers `d` exactly. Choosing the second state as a coherent
//! product matched to `⟨G⟩₁` (see [`optimal_reference`]) zeroes both `ε`
//! and `d⁽²⁾`, so the measured value is `½ d⁽¹⁾` — half the single-state
//! minor without ever tomographing the state.
//!
//! The module also provides the covariance-matrix criteria used for the
//! wavefunction family: the variance-product test and the stronger
//! determinant-based second-moment test on the collective quadratures
//! `r± = x₁ ± x₂`, `s∓ = p₁ ∓ p₂` (unnormalised, vacuum variance 1).

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{expectation, ModeMonomial, TruncatedState};
use crate::fourier::{extract_top_coefficients, plan_grid, CorrelatorGrid};
use crate::states::{FamilyTag, StateFamily};

/// Guaranteed bound on `|value − (first − second)|` for every
/// [`WitnessResult`] produced by this module.
pub const DECOMPOSITION_TOL: f64 = 1e-12;

/// Exponents `(m, n, p, q)` selecting one second-order minor.
///
/// Validity: not all zero; within each mode pair — `{m, p}` for mode a,
/// `{n, q}` for mode b — at most one exponent may be nonzero (the minor
/// otherwise mixes raising and lowering on the same mode and is not one
/// of the measurable second-order determinants). A pair may be entirely
/// zero; such *degenerate* specs reduce to single-mode variance checks
/// that are sound but can never flag entanglement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinorSpec {
    m: usize,
    n: usize,
    p: usize,
    q: usize,
}

/// Which top-frequency branch of the phase scan feeds the cross term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanBranch {
    /// Frequency `(+m′, +n′)`: both modes lowering on state 1.
    Plus,
    /// Frequency `(+m′, −n′)`: mode a lowering, mode b raising on state 1.
    Minus,
}

impl MinorSpec {
    pub fn new(m: usize, n: usize, p: usize, q: usize) -> Result<Self> {
        if m + n + p + q == 0 {
            return Err(Error::InvalidParameter(
                "minor exponents cannot all be zero".into(),
            ));
        }
        if m > 0 && p > 0 {
            return Err(Error::InvalidParameter(format!(
                "minor ({m},{n},{p},{q}) sets both mode-a exponents; only one of m, p may be nonzero"
            )));
        }
        if n > 0 && q > 0 {
            return Err(Error::InvalidParameter(format!(
                "minor ({m},{n},{p},{q}) sets both mode-b exponents; only one of n, q may be nonzero"
            )));
        }
        Ok(Self { m, n, p, q })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn exponents(&self) -> (usize, usize, usize, usize) {
        (self.m, self.n, self.p, self.q)
    }

    /// Total operator order `K = m + n + p + q`.
    pub fn order(&self) -> usize {
        self.m + self.n + self.p + self.q
    }

    /// `(m′, n′) = (max(m, p), max(n, q))` — the count-correlator
    /// exponents whose top Fourier coefficients carry the cross term.
    pub fn top_frequencies(&self) -> (usize, usize) {
        (self.m.max(self.p), self.n.max(self.q))
    }

    /// True when one mode is unused: the minor degenerates to a
    /// single-mode variance bound (sound, never a witness).
    pub fn is_degenerate(&self) -> bool {
        (self.m == 0 && self.p == 0) || (self.n == 0 && self.q == 0)
    }

    /// The scan branch whose coefficient equals `⟨G⟩₁⟨G†⟩₂` (up to
    /// conjugation, which the real part ignores).
    pub fn branch(&self) -> ScanBranch {
        let (m_prime, n_prime) = self.top_frequencies();
        if m_prime == 0 || n_prime == 0 {
            // The branches coincide at frequency (m′, 0) or (0, n′).
            return ScanBranch::Plus;
        }
        if (self.m > 0 && self.q > 0) || (self.p > 0 && self.n > 0) {
            ScanBranch::Plus
        } else {
            ScanBranch::Minus
        }
    }

    /// `A = a†ᵐaᵐ b†ⁿbⁿ` — the first diagonal factor.
    pub fn first_factor(&self) -> ModeMonomial {
        ModeMonomial::new(self.m, self.m, self.n, self.n)
    }

    /// `B = a†ᵖaᵖ b†^q b^q` — the second diagonal factor.
    pub fn second_factor(&self) -> ModeMonomial {
        ModeMonomial::new(self.p, self.p, self.q, self.q)
    }

    /// `G = a†ᵐaᵖ b†^q bⁿ` — the cross operator.
    pub fn cross_operator(&self) -> ModeMonomial {
        ModeMonomial::new(self.m, self.p, self.q, self.n)
    }
}

impl std::fmt::Display for MinorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{},{})", self.m, self.n, self.p, self.q)
    }
}

/// How a witness value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Closed-form evaluation from family parameters.
    Analytic,
    /// Exact moments on the truncated number basis.
    FockNumeric,
    /// Top Fourier coefficients of a simulated phase scan.
    FourierExtracted,
    /// Finite-shot estimate from simulated detector records.
    ShotEstimated,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::FockNumeric => "fock-numeric",
            Provenance::FourierExtracted => "fourier-extracted",
            Provenance::ShotEstimated => "shot-estimated",
        }
    }
}

/// Free-form context attached to a witness evaluation.
#[derive(Debug, Clone, Default)]
pub struct WitnessMetadata {
    pub notes: Vec<String>,
    /// Standard error of `value` (shot-estimated results).
    pub standard_error: Option<f64>,
    /// Shots spent per measurement setting (shot-estimated results).
    pub shots_per_setting: Option<u64>,
    /// Number of measurement settings (shot-estimated results).
    pub settings: Option<usize>,
}

/// Outcome of one witness evaluation. `value = first − second` within
/// [`DECOMPOSITION_TOL`]; `witnessed` means strictly negative `value`.
#[derive(Debug, Clone)]
pub struct WitnessResult {
    pub value: f64,
    /// The diagonal part: `⟨A⟩⟨B⟩`, or `½(F₁ + F₂)` for two states.
    pub first: f64,
    /// The cross part: `|⟨G⟩|²`, or `Re(⟨G⟩₁⟨G†⟩₂)` for two states.
    pub second: f64,
    /// Mismatch penalty `ε = ½|⟨G⟩₁ − ⟨G⟩₂|²` when both cross moments
    /// are individually known.
    pub epsilon: Option<f64>,
    pub provenance: Provenance,
    pub witnessed: bool,
    /// Whether a negative `value` actually certifies entanglement under
    /// the stated conditions (detector-efficiency caveats and the like).
    pub sound: Option<bool>,
    pub metadata: WitnessMetadata,
}

/// Shared assembly for the two-state form. Feeding identical inputs
/// reproduces the single-state minor bit for bit: `½(f + f) = f` and
/// `z·z̄` expands to exactly `re² + im²`.
fn assemble(
    f1: f64,
    f2: f64,
    z1: Complex64,
    z2: Complex64,
    provenance: Provenance,
) -> WitnessResult {
    let first = 0.5 * (f1 + f2);
    let second = z1.re * z2.re + z1.im * z2.im;
    let value = first - second;
    let epsilon = 0.5 * (z1 - z2).norm_sqr();
    WitnessResult {
        value,
        first,
        second,
        epsilon: Some(epsilon),
        provenance,
        witnessed: value < 0.0,
        sound: Some(true),
        metadata: WitnessMetadata::default(),
    }
}

/// Single-state minor `d` from exact truncated-basis moments.
pub fn minor_d(state: &TruncatedState, spec: &MinorSpec) -> Result<WitnessResult> {
    let f = expectation(state, spec.first_factor())?.re
        * expectation(state, spec.second_factor())?.re;
    let z = expectation(state, spec.cross_operator())?;
    Ok(assemble(f, f, z, z, Provenance::FockNumeric))
}

/// Two-state minor `d′` from exact truncated-basis moments.
pub fn minor_dprime(
    state1: &TruncatedState,
    state2: &TruncatedState,
    spec: &MinorSpec,
) -> Result<WitnessResult> {
    let f1 = expectation(state1, spec.first_factor())?.re
        * expectation(state1, spec.second_factor())?.re;
    let f2 = expectation(state2, spec.first_factor())?.re
        * expectation(state2, spec.second_factor())?.re;
    let z1 = expectation(state1, spec.cross_operator())?;
    let z2 = expectation(state2, spec.cross_operator())?;
    Ok(assemble(f1, f2, z1, z2, Provenance::FockNumeric))
}

/// Two-state minor evaluated the way the experiment measures it: the
/// diagonal factors from direct photon counting on each state, the cross
/// term from the top Fourier coefficient of a minimal phase scan.
///
/// The individual cross moments are not separately resolved by the scan,
/// so no mismatch penalty `ε` is reported.
pub fn minor_dprime_extracted(
    state1: &TruncatedState,
    state2: &TruncatedState,
    spec: &MinorSpec,
) -> Result<WitnessResult> {
    let f1 = expectation(state1, spec.first_factor())?.re
        * expectation(state1, spec.second_factor())?.re;
    let f2 = expectation(state2, spec.first_factor())?.re
        * expectation(state2, spec.second_factor())?.re;

    let (m_prime, n_prime) = spec.top_frequencies();
    let (u, v) = plan_grid(m_prime, n_prime)?;
    let grid = CorrelatorGrid::from_states(state1, state2, m_prime, n_prime, u, v)?;
    let top = extract_top_coefficients(&grid)?;
    let product = match spec.branch() {
        ScanBranch::Plus => top.product_plus,
        ScanBranch::Minus => top.product_minus,
    };

    let first = 0.5 * (f1 + f2);
    let second = product.re;
    let value = first - second;
    let mut metadata = WitnessMetadata::default();
    metadata.notes.push(format!(
        "phase scan {u}×{v}; discarded imaginary residue {:.3e}",
        product.im
    ));
    Ok(WitnessResult {
        value,
        first,
        second,
        epsilon: None,
        provenance: Provenance::FourierExtracted,
        witnessed: value < 0.0,
        sound: Some(true),
        metadata,
    })
}

/// Single-state minor assembled from loss-degraded data, replica form.
/// See [`minor_dprime_lossy`] for the conventions.
pub fn minor_d_lossy(
    state: &TruncatedState,
    spec: &MinorSpec,
    eta_direct: f64,
    eta_scan: f64,
) -> Result<WitnessResult> {
    minor_dprime_lossy(state, state, spec, eta_direct, eta_scan)
}

/// Two-state minor assembled from loss-degraded data *without* loss
/// compensation.
///
/// The direct counters (efficiency `η₁`) scale every factorial moment by
/// `η₁` per operator order, so the diagonal part arrives as `η₁ᴷ·first`.
/// The interferometric detectors (efficiency `η₂`) see the splitter
/// outputs, and the *raw* top Fourier coefficient — taken here without
/// the `2ᴷ` rescaling that undoes the balanced split — arrives as
/// `(η₂/2)ᴷ·second`. The resulting test
///
/// ```text
/// value = η₁ᴷ·first − (η₂/2)ᴷ·second
/// ```
///
/// remains sound (non-negative on separable pairs) if and only if
/// `η₁ ≥ η₂/2`: the halving works in the witness's favour, buying
/// tolerance to imbalanced detector quality at the price of a weaker
/// signal. The `sound` flag records the check.
pub fn minor_dprime_lossy(
    state1: &TruncatedState,
    state2: &TruncatedState,
    spec: &MinorSpec,
    eta_direct: f64,
    eta_scan: f64,
) -> Result<WitnessResult> {
    for (name, eta) in [("η₁", eta_direct), ("η₂", eta_scan)] {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "detector efficiency {name} must lie in [0, 1], got {eta}"
            )));
        }
    }
    let ideal = minor_dprime(state1, state2, spec)?;
    let k = spec.order() as i32;
    let first = eta_direct.powi(k) * ideal.first;
    let second = (0.5 * eta_scan).powi(k) * ideal.second;
    let value = first - second;
    let mut metadata = WitnessMetadata::default();
    metadata.notes.push(format!(
        "uncompensated efficiencies η₁={eta_direct}, η₂={eta_scan}, order {}",
        spec.order()
    ));
    Ok(WitnessResult {
        value,
        first,
        second,
        epsilon: None,
        provenance: Provenance::FockNumeric,
        witnessed: value < 0.0,
        sound: Some(eta_direct >= 0.5 * eta_scan),
        metadata,
    })
}

/// A coherent product `|γ⟩⊗|δ⟩` fitted to reproduce a target cross
/// moment, plus a degeneracy marker for vanishing targets.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceFit {
    pub gamma: Complex64,
    pub delta: Complex64,
    /// The target cross moment vanished; the vacuum reference matches it
    /// but carries no phase information.
    pub degenerate: bool,
}

impl ReferenceFit {
    pub fn family(&self) -> StateFamily {
        StateFamily::new(FamilyTag::CoherentProduct {
            gamma: self.gamma,
            delta: self.delta,
        })
    }
}

/// Fit the coherent reference whose cross moment `⟨G⟩` equals that of
/// `state`. Coherent products have vanishing minors, so pairing the state
/// with this reference makes the two-state minor exactly `½ d⁽¹⁾`:
/// the mismatch penalty and the reference's own minor both vanish.
///
/// The match fixes only the product of powers, so a canonical gauge is
/// chosen: the mode-a amplitude is real non-negative and carries an equal
/// share of the magnitude; the mode-b amplitude absorbs the phase via a
/// principal root.
pub fn optimal_reference(state: &TruncatedState, spec: &MinorSpec) -> Result<ReferenceFit> {
    let target = expectation(state, spec.cross_operator())?;
    // ⟨G⟩ on |γ,δ⟩ is γ̄ᵐγᵖ · δ̄^q δⁿ: one factor per mode, conjugated
    // when the raising exponent is the nonzero one.
    let exp_a = spec.m + spec.p;
    let conj_a = spec.m > 0;
    let exp_b = spec.n + spec.q;
    let conj_b = spec.q > 0;

    let principal_root = |w: Complex64, order: usize| -> Complex64 {
        Complex64::from_polar(w.norm().powf(1.0 / order as f64), w.arg() / order as f64)
    };

    let zero = Complex64::new(0.0, 0.0);
    let (gamma, delta, degenerate) = if exp_a > 0 && exp_b > 0 {
        if target.norm() == 0.0 {
            (zero, zero, true)
        } else {
            let mag = target.norm().powf(1.0 / (exp_a + exp_b) as f64);
            let gamma = Complex64::new(mag, 0.0);
            let remainder = target / gamma.re.powi(exp_a as i32);
            let root = principal_root(remainder, exp_b);
            let delta = if conj_b { root.conj() } else { root };
            (gamma, delta, false)
        }
    } else if exp_a > 0 {
        if target.norm() == 0.0 {
            (zero, zero, true)
        } else {
            let root = principal_root(target, exp_a);
            let gamma = if conj_a { root.conj() } else { root };
            (gamma, zero, false)
        }
    } else {
        // exp_b > 0 (specs with all exponents zero are unconstructible).
        if target.norm() == 0.0 {
            (zero, zero, true)
        } else {
            let root = principal_root(target, exp_b);
            let delta = if conj_b { root.conj() } else { root };
            (zero, delta, false)
        }
    };
    Ok(ReferenceFit {
        gamma,
        delta,
        degenerate,
    })
}

/// Closed-form minors for the family/spec combinations with known
/// analytic values; anything else returns [`Error::Unsupported`] and
/// should go through the numeric path. Collective-mode transforms are
/// never folded in analytically.
pub fn analytic_minor(family: &StateFamily, spec: &MinorSpec) -> Result<WitnessResult> {
    family.validate()?;
    if family.pm_transform.is_some() {
        return Err(Error::Unsupported(
            "analytic minors cover untransformed families only; build the state and \
             use the numeric minors instead"
                .into(),
        ));
    }
    let (m, n, p, q) = spec.exponents();
    let result = match &family.tag {
        FamilyTag::CoherentProduct { gamma, delta } => {
            // Coherent products are the minimizers: both minor terms are
            // |γ|^{2(m+p)} |δ|^{2(n+q)}, so the value is exactly zero.
            let z = gamma.conj().powu(m as u32)
                * gamma.powu(p as u32)
                * delta.conj().powu(q as u32)
                * delta.powu(n as u32);
            let second = z.re * z.re + z.im * z.im;
            WitnessResult {
                value: 0.0,
                first: second,
                second,
                epsilon: Some(0.0),
                provenance: Provenance::Analytic,
                witnessed: false,
                sound: Some(true),
                metadata: WitnessMetadata::default(),
            }
        }
        FamilyTag::Tmsv {
            lambda,
            displacement,
        } => {
            if (m, n, p, q) != (1, 0, 0, 1) {
                return Err(Error::Unsupported(format!(
                    "no closed form for minor {spec} on the two-mode squeezed family; \
                     use the numeric path"
                )));
            }
            let nu = lambda * lambda / (1.0 - lambda * lambda);
            let mu = lambda / (1.0 - lambda * lambda);
            let (alpha, beta) = displacement.unwrap_or((
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ));
            let f = (nu + alpha.norm_sqr()) * (nu + beta.norm_sqr());
            // ⟨a†b†⟩ = conj(⟨ab⟩) = μ + conj(αβ).
            let z = Complex64::new(mu, 0.0) + (alpha * beta).conj();
            let mut out = assemble(f, f, z, z, Provenance::Analytic);
            out.epsilon = Some(0.0);
            out
        }
        FamilyTag::Noon {
            n: big_n,
            alpha,
            beta,
        } => {
            let nn = *big_n as usize;
            if (m, n, p, q) != (0, 0, nn, nn) {
                return Err(Error::Unsupported(format!(
                    "no closed form for minor {spec} on the two-branch number family; \
                     the natural choice is (0,0,N,N); use the numeric path otherwise"
                )));
            }
            // ⟨B⟩ needs N photons in both modes at once: identically zero.
            let factorial: f64 = (1..=nn).map(|i| i as f64).product();
            let z = (1.0 - family.dephasing) * alpha * beta.conj() * factorial;
            assemble(0.0, 0.0, z, z, Provenance::Analytic)
        }
        FamilyTag::Cat { alpha, beta, theta } => {
            if p != 0 || q != 0 {
                return Err(Error::Unsupported(format!(
                    "closed-form minors on the two-branch coherent family cover the \
                     (m,n,0,0) patterns; got {spec}"
                )));
            }
            let delta_overlap = 2.0 * (alpha.norm_sqr() + beta.norm_sqr());
            let s = (-delta_overlap).exp();
            let g = (1.0 - family.dephasing) * s;
            let den = 1.0 + g * theta.cos();
            if den.abs() < 1e-12 {
                return Err(Error::InvalidParameter(
                    "branch interference cancels the state normalization".into(),
                ));
            }
            let parity_sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
            let diag_factor = (1.0 + parity_sign * g * theta.cos()) / den;
            let diag =
                alpha.norm_sqr().powi(m as i32) * beta.norm_sqr().powi(n as i32) * diag_factor;
            let cross_factor = match (m % 2 == 0, n % 2 == 0) {
                (true, true) => Complex64::new(1.0, 0.0),
                (false, false) => Complex64::new((1.0 - g * theta.cos()) / den, 0.0),
                (false, true) => Complex64::new(0.0, g * theta.sin() / den),
                (true, false) => Complex64::new(0.0, -g * theta.sin() / den),
            };
            let z = alpha.conj().powu(m as u32) * beta.powu(n as u32) * cross_factor;
            assemble(diag, diag, z, z, Provenance::Analytic)
        }
        FamilyTag::HermiteGaussian {
            sigma_plus,
            sigma_minus,
        } => {
            let sp2 = sigma_plus * sigma_plus;
            let sm2 = sigma_minus * sigma_minus;
            let x1_sq = (3.0 * sp2 + sm2) / 4.0;
            let p1_sq = (sp2 + 3.0 * sm2) / (4.0 * sp2 * sm2);
            let x1x2 = (3.0 * sp2 - sm2) / 4.0;
            let p1p2 = (3.0 * sm2 - sp2) / (4.0 * sp2 * sm2);
            let number = 0.5 * (x1_sq + p1_sq - 1.0);
            match (m, n, p, q) {
                (1, 0, 0, 1) => {
                    let f = number * number;
                    // ⟨a†b†⟩ real: the wavefunction is real, so the
                    // cross xp blocks vanish.
                    let z = Complex64::new(0.5 * (x1x2 - p1p2), 0.0);
                    assemble(f, f, z, z, Provenance::Analytic)
                }
                (1, 1, 0, 0) => {
                    let x1x2_sq = (3.0 / 16.0) * (5.0 * sp2 * sp2 - 2.0 * sp2 * sm2 + sm2 * sm2);
                    let mixed = (3.0 / 16.0) * (sp2 + sm2) * (sp2 + sm2) / (sp2 * sm2);
                    let p1p2_sq = (3.0 / 16.0)
                        * (sp2 * sp2 - 2.0 * sp2 * sm2 + 5.0 * sm2 * sm2)
                        / (sp2 * sp2 * sm2 * sm2);
                    let joint_number = 0.25
                        * (x1x2_sq + 2.0 * mixed + p1p2_sq - 2.0 * x1_sq - 2.0 * p1_sq + 1.0);
                    let z = Complex64::new(0.5 * (x1x2 + p1p2), 0.0);
                    assemble(joint_number, joint_number, z, z, Provenance::Analytic)
                }
                _ => {
                    return Err(Error::Unsupported(format!(
                        "closed-form minors on the wavefunction family cover (1,0,0,1) \
                         and (1,1,0,0); got {spec}"
                    )))
                }
            }
        }
    };
    Ok(result)
}

/// Which collective-quadrature pairing a criterion tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraturePairing {
    /// `r₊ = x₁ + x₂` with `s₋ = p₁ − p₂`.
    PlusMinus,
    /// `r₋ = x₁ − x₂` with `s₊ = p₁ + p₂`.
    MinusPlus,
}

/// Variances (and covariance) of one collective pairing extracted from a
/// 4×4 covariance matrix ordered `(x₁, p₁, x₂, p₂)`.
fn collective_blocks(cov: &Matrix4<f64>, pairing: QuadraturePairing) -> (f64, f64, f64) {
    let sign = match pairing {
        QuadraturePairing::PlusMinus => 1.0,
        QuadraturePairing::MinusPlus => -1.0,
    };
    // r = x₁ + sign·x₂, s = p₁ − sign·p₂.
    let var_r = cov[(0, 0)] + cov[(2, 2)] + 2.0 * sign * cov[(0, 2)];
    let var_s = cov[(1, 1)] + cov[(3, 3)] - 2.0 * sign * cov[(1, 3)];
    let cov_rs = cov[(0, 1)] - sign * cov[(0, 3)] + sign * cov[(2, 1)] - cov[(2, 3)];
    (var_r, var_s, cov_rs)
}

/// Result of a variance-product test: `value = σ²_r σ²_s`, entangled when
/// below one.
#[derive(Debug, Clone, Copy)]
pub struct ProductCriterion {
    pub var_r: f64,
    pub var_s: f64,
    pub value: f64,
    pub witnessed: bool,
}

/// Variance-product criterion on the chosen collective pairing. The
/// collective quadratures are unnormalised (`r± = x₁ ± x₂`), so the
/// separable floor is `σ²_r σ²_s ≥ 1`.
pub fn variance_product(cov: &Matrix4<f64>, pairing: QuadraturePairing) -> ProductCriterion {
    let (var_r, var_s, _) = collective_blocks(cov, pairing);
    let value = var_r * var_s;
    ProductCriterion {
        var_r,
        var_s,
        value,
        witnessed: value < 1.0,
    }
}

/// Result of the determinant-based second-moment test: entangled when
/// `value < 0`.
#[derive(Debug, Clone, Copy)]
pub struct SecondMomentCriterion {
    pub var_r: f64,
    pub var_s: f64,
    pub cov_rs: f64,
    pub value: f64,
    pub witnessed: bool,
}

/// Second-moment separability test on the chosen pairing:
/// `(σ²_r + 1)(σ²_s + 1) − σ⁴_{rs} − 4 ≥ 0` on separable states, where
/// `σ²_{rs}` is the collective covariance. Including the covariance makes
/// the test invariant under the counter-rotations that mix `r` and `s`.
pub fn second_moment_criterion(
    cov: &Matrix4<f64>,
    pairing: QuadraturePairing,
) -> SecondMomentCriterion {
    let (var_r, var_s, cov_rs) = collective_blocks(cov, pairing);
    let value = (var_r + 1.0) * (var_s + 1.0) - cov_rs * cov_rs - 4.0;
    SecondMomentCriterion {
        var_r,
        var_s,
        cov_rs,
        value,
        witnessed: value < 0.0,
    }
}

/// Covariance matrix of `(x₁, p₁, x₂, p₂)` with `x = (a + a†)/√2`,
/// `p = i(a† − a)/√2`, means subtracted. Needs second-order moments, so
/// the state cutoff must be at least 2.
pub fn quadrature_covariance(state: &TruncatedState) -> Result<Matrix4<f64>> {
    let mom = |nn, mm, kk, ll| expectation(state, ModeMonomial::new(nn, mm, kk, ll));
    let za = mom(0, 1, 0, 0)?;
    let zb = mom(0, 0, 0, 1)?;
    let za2 = mom(0, 2, 0, 0)?;
    let zb2 = mom(0, 0, 0, 2)?;
    let na = mom(1, 1, 0, 0)?.re;
    let nb = mom(0, 0, 1, 1)?.re;
    let zab = mom(0, 1, 0, 1)?;
    let zadb = mom(1, 0, 0, 1)?;

    let sqrt2 = std::f64::consts::SQRT_2;
    let mx1 = sqrt2 * za.re;
    let mp1 = sqrt2 * za.im;
    let mx2 = sqrt2 * zb.re;
    let mp2 = sqrt2 * zb.im;

    // Raw symmetrized second moments.
    let x1x1 = na + 0.5 + za2.re;
    let p1p1 = na + 0.5 - za2.re;
    let x1p1 = za2.im;
    let x2x2 = nb + 0.5 + zb2.re;
    let p2p2 = nb + 0.5 - zb2.re;
    let x2p2 = zb2.im;
    let x1x2 = zab.re + zadb.re;
    let p1p2 = zadb.re - zab.re;
    let x1p2 = zadb.im + zab.im;
    let p1x2 = zab.im - zadb.im;

    Ok(Matrix4::new(
        x1x1 - mx1 * mx1,
        x1p1 - mx1 * mp1,
        x1x2 - mx1 * mx2,
        x1p2 - mx1 * mp2,
        x1p1 - mx1 * mp1,
        p1p1 - mp1 * mp1,
        p1x2 - mp1 * mx2,
        p1p2 - mp1 * mp2,
        x1x2 - mx1 * mx2,
        p1x2 - mp1 * mx2,
        x2x2 - mx2 * mx2,
        x2p2 - mx2 * mp2,
        x1p2 - mx1 * mp2,
        p1p2 - mp1 * mp2,
        x2p2 - mx2 * mp2,
        p2p2 - mp2 * mp2,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::StateFamily;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec(m: usize, n: usize, p: usize, q: usize) -> MinorSpec {
        MinorSpec::new(m, n, p, q).unwrap()
    }

    fn tmsv(lambda: f64) -> TruncatedState {
        StateFamily::new(FamilyTag::Tmsv {
            lambda,
            displacement: None,
        })
        .build()
        .unwrap()
    }

    fn check_decomposition(r: &WitnessResult) {
        assert!(
            (r.value - (r.first - r.second)).abs() <= DECOMPOSITION_TOL,
            "value decomposition broke: {} vs {} - {}",
            r.value,
            r.first,
            r.second
        );
    }

    #[test]
    fn spec_validation_and_classification() {
        assert!(MinorSpec::new(0, 0, 0, 0).is_err());
        assert!(MinorSpec::new(1, 0, 1, 0).is_err());
        assert!(MinorSpec::new(0, 1, 0, 1).is_err());

        let s = spec(1, 0, 0, 1);
        assert_eq!(s.order(), 2);
        assert_eq!(s.top_frequencies(), (1, 1));
        assert_eq!(s.branch(), ScanBranch::Plus);
        assert!(!s.is_degenerate());

        let s = spec(1, 1, 0, 0);
        assert_eq!(s.branch(), ScanBranch::Minus);
        let s = spec(0, 0, 2, 2);
        assert_eq!(s.branch(), ScanBranch::Minus);
        let s = spec(0, 2, 1, 0);
        assert_eq!(s.branch(), ScanBranch::Plus);
        assert_eq!(s.top_frequencies(), (1, 2));

        let degenerate = spec(2, 0, 0, 0);
        assert!(degenerate.is_degenerate());
        assert_eq!(degenerate.top_frequencies(), (2, 0));
        assert_eq!(degenerate.branch(), ScanBranch::Plus);
    }

    #[test]
    fn tmsv_number_minor_matches_closed_form() {
        for lambda in [0.3, 0.5, -0.4] {
            let state = tmsv(lambda);
            let numeric = minor_d(&state, &spec(1, 0, 0, 1)).unwrap();
            let want = -lambda * lambda / (1.0 - lambda * lambda);
            assert_abs_diff_eq!(numeric.value, want, epsilon = 1e-10);
            assert!(numeric.witnessed);
            check_decomposition(&numeric);

            let family = StateFamily::new(FamilyTag::Tmsv {
                lambda,
                displacement: None,
            });
            let analytic = analytic_minor(&family, &spec(1, 0, 0, 1)).unwrap();
            assert_abs_diff_eq!(analytic.value, numeric.value, epsilon = 1e-10);
            assert_abs_diff_eq!(analytic.first, numeric.first, epsilon = 1e-10);
            assert_abs_diff_eq!(analytic.second, numeric.second, epsilon = 1e-10);
        }
    }

    #[test]
    fn displaced_tmsv_matches_formula() {
        let lambda = 0.4;
        let alpha = c(0.3, 0.2);
        let beta = c(-0.1, 0.5);
        let family = StateFamily::new(FamilyTag::Tmsv {
            lambda,
            displacement: Some((alpha, beta)),
        });
        let state = family.build().unwrap();
        let numeric = minor_d(&state, &spec(1, 0, 0, 1)).unwrap();
        let analytic = analytic_minor(&family, &spec(1, 0, 0, 1)).unwrap();
        let want = lambda
            * (lambda * (alpha.norm_sqr() + beta.norm_sqr() - 1.0)
                - 2.0 * (alpha * beta).re)
            / (1.0 - lambda * lambda);
        assert_abs_diff_eq!(analytic.value, want, epsilon = 1e-12);
        assert_abs_diff_eq!(numeric.value, want, epsilon = 1e-8);
        // This displacement orientation pushes the minor positive: local
        // displacements can defeat the (1,0,0,1) minor even though they
        // cannot change entanglement.
        assert!(want > 0.0);
        assert!(!numeric.witnessed);

        // Flipping one displacement restores detection.
        let flipped = StateFamily::new(FamilyTag::Tmsv {
            lambda,
            displacement: Some((alpha, -beta)),
        });
        let numeric2 = minor_d(&flipped.build().unwrap(), &spec(1, 0, 0, 1)).unwrap();
        let want2 = lambda
            * (lambda * (alpha.norm_sqr() + beta.norm_sqr() - 1.0)
                + 2.0 * (alpha * beta).re)
            / (1.0 - lambda * lambda);
        assert_abs_diff_eq!(numeric2.value, want2, epsilon = 1e-8);
        assert!(numeric2.witnessed);
    }

    #[test]
    fn optimal_reference_halves_the_minor() {
        let state = tmsv(0.5);
        let s = spec(1, 0, 0, 1);
        let fit = optimal_reference(&state, &s).unwrap();
        assert!(!fit.degenerate);
        // Canonical gauge: equal magnitudes, product 2/3.
        assert_abs_diff_eq!((fit.gamma * fit.delta).re, 2.0 / 3.0, epsilon = 1e-12);
        let reference = fit.family().build().unwrap();
        let paired = minor_dprime(&state, &reference, &s).unwrap();
        assert_abs_diff_eq!(paired.value, -0.5 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(paired.epsilon.unwrap(), 0.0, epsilon = 1e-9);
        check_decomposition(&paired);

        let single = minor_d(&state, &s).unwrap();
        assert_abs_diff_eq!(paired.value, 0.5 * single.value, epsilon = 1e-9);
    }

    #[test]
    fn noon_reference_is_balanced_unit_amplitude() {
        let family = StateFamily::new(FamilyTag::Noon {
            n: 2,
            alpha: c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            beta: c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        });
        let state = family.build().unwrap();
        let s = spec(0, 0, 2, 2);
        let fit = optimal_reference(&state, &s).unwrap();
        assert_abs_diff_eq!(fit.gamma.re, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.gamma.im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.delta.re, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.delta.im, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn replica_call_reproduces_single_state_minor_bitwise() {
        let state = tmsv(0.6);
        for s in [spec(1, 0, 0, 1), spec(1, 1, 0, 0), spec(0, 0, 2, 2)] {
            let single = minor_d(&state, &s).unwrap();
            let paired = minor_dprime(&state, &state, &s).unwrap();
            assert_eq!(single.value.to_bits(), paired.value.to_bits());
            assert_eq!(single.first.to_bits(), paired.first.to_bits());
            assert_eq!(single.second.to_bits(), paired.second.to_bits());
            assert_eq!(paired.epsilon, Some(0.0));
        }
    }

    #[test]
    fn cat_closed_forms_match_fock_numerics() {
        let alpha = c(0.8, 0.0);
        let beta = c(0.6, 0.0);
        for theta in [std::f64::consts::PI, 2.0, std::f64::consts::FRAC_PI_2] {
            for p in [0.0, 0.3] {
                let family = StateFamily::new(FamilyTag::Cat { alpha, beta, theta })
                    .with_dephasing(p);
                let state = family.build().unwrap();
                for s in [
                    spec(1, 1, 0, 0),
                    spec(2, 2, 0, 0),
                    spec(2, 1, 0, 0),
                    spec(1, 0, 0, 0),
                ] {
                    let analytic = analytic_minor(&family, &s).unwrap();
                    let numeric = minor_d(&state, &s).unwrap();
                    assert_abs_diff_eq!(analytic.value, numeric.value, epsilon = 1e-8);
                    assert_abs_diff_eq!(analytic.first, numeric.first, epsilon = 1e-8);
                    assert_abs_diff_eq!(analytic.second, numeric.second, epsilon = 1e-8);
                    check_decomposition(&analytic);
                }
            }
        }
    }

    #[test]
    fn odd_cat_is_witnessed_by_the_odd_odd_minor() {
        let family = StateFamily::new(FamilyTag::Cat {
            alpha: c(1.0, 0.0),
            beta: c(1.0, 0.0),
            theta: std::f64::consts::PI,
        });
        let result = analytic_minor(&family, &spec(1, 1, 0, 0)).unwrap();
        // At θ = π the cross factor is coth(Δ/2) > 1 while the diagonal
        // factor is 1, so the minor is negative for every amplitude.
        let delta: f64 = 2.0 * (1.0 + 1.0);
        let coth = 1.0 / (0.5 * delta).tanh();
        let want = 1.0 - coth * coth;
        assert_abs_diff_eq!(result.value, want, epsilon = 1e-12);
        assert!(result.witnessed);
    }

    #[test]
    fn noon_minor_and_dephasing_scaling() {
        let alpha = c(0.6, 0.0);
        let beta = c(0.8, 0.0);
        let family = StateFamily::new(FamilyTag::Noon { n: 3, alpha, beta });
        let s = spec(0, 0, 3, 3);
        let analytic = analytic_minor(&family, &s).unwrap();
        let want = -(0.6f64 * 0.8 * 6.0).powi(2);
        assert_abs_diff_eq!(analytic.value, want, epsilon = 1e-12);

        let state = family.build().unwrap();
        let numeric = minor_d(&state, &s).unwrap();
        assert_abs_diff_eq!(numeric.value, want, epsilon = 1e-10);

        let p = 0.25;
        let dephased_family = family.clone().with_dephasing(p);
        let analytic_p = analytic_minor(&dephased_family, &s).unwrap();
        assert_abs_diff_eq!(analytic_p.value, want * (1.0 - p) * (1.0 - p), epsilon = 1e-12);
        let numeric_p = minor_d(&dephased_family.build().unwrap(), &s).unwrap();
        assert_abs_diff_eq!(numeric_p.value, analytic_p.value, epsilon = 1e-10);
    }

    #[test]
    fn wavefunction_family_minors() {
        // At unit widths: the photon-pair minor is witnessed at −1/4, the
        // number-product minor sits at +1/4.
        let family = StateFamily::new(FamilyTag::HermiteGaussian {
            sigma_plus: 1.0,
            sigma_minus: 1.0,
        });
        let pair = analytic_minor(&family, &spec(1, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(pair.value, -0.25, epsilon = 1e-12);
        assert!(pair.witnessed);
        let number = analytic_minor(&family, &spec(1, 0, 0, 1)).unwrap();
        assert_abs_diff_eq!(number.value, 0.25, epsilon = 1e-12);
        assert!(!number.witnessed);

        let state = family.build().unwrap();
        let pair_numeric = minor_d(&state, &spec(1, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(pair_numeric.value, -0.25, epsilon = 1e-9);

        // Asymmetric widths against the numeric path.
        let family = StateFamily::new(FamilyTag::HermiteGaussian {
            sigma_plus: 1.3,
            sigma_minus: 0.8,
        });
        let state = family.build().unwrap();
        for s in [spec(1, 1, 0, 0), spec(1, 0, 0, 1)] {
            let analytic = analytic_minor(&family, &s).unwrap();
            let numeric = minor_d(&state, &s).unwrap();
            assert_abs_diff_eq!(analytic.value, numeric.value, epsilon = 1e-8);
        }
    }

    #[test]
    fn coherent_products_have_vanishing_minors() {
        let family = StateFamily::new(FamilyTag::CoherentProduct {
            gamma: c(0.9, -0.2),
            delta: c(0.4, 0.6),
        });
        let state = family.build().unwrap();
        for s in [
            spec(1, 0, 0, 1),
            spec(1, 1, 0, 0),
            spec(2, 0, 0, 1),
            spec(0, 2, 2, 0),
        ] {
            let analytic = analytic_minor(&family, &s).unwrap();
            assert_eq!(analytic.value, 0.0);
            assert!(!analytic.witnessed);
            let numeric = minor_d(&state, &s).unwrap();
            assert_abs_diff_eq!(numeric.value, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn uncompensated_loss_soundness_window() {
        let state = StateFamily::new(FamilyTag::CoherentProduct {
            gamma: c(0.9, 0.0),
            delta: c(0.5, 0.2),
        })
        .build()
        .unwrap();
        let s = spec(1, 0, 0, 1);
        // Balanced-enough detectors: sound, no false witness.
        let ok = minor_d_lossy(&state, &s, 0.8, 0.9).unwrap();
        assert_eq!(ok.sound, Some(true));
        assert!(ok.value >= -1e-12);
        check_decomposition(&ok);
        // Direct counters far worse than the scan detectors: the check
        // fails and the separable state produces a spurious negative.
        let bad = minor_d_lossy(&state, &s, 0.2, 0.9).unwrap();
        assert_eq!(bad.sound, Some(false));
        assert!(bad.value < 0.0);
    }

    #[test]
    fn lossy_minor_scales_the_two_terms_separately() {
        let state = tmsv(0.5);
        let s = spec(1, 0, 0, 1);
        let ideal = minor_d(&state, &s).unwrap();
        let eta1 = 0.85;
        let eta2 = 0.9;
        let lossy = minor_d_lossy(&state, &s, eta1, eta2).unwrap();
        assert_abs_diff_eq!(lossy.first, eta1.powi(2) * ideal.first, epsilon = 1e-12);
        assert_abs_diff_eq!(
            lossy.second,
            (0.5 * eta2).powi(2) * ideal.second,
            epsilon = 1e-12
        );
        check_decomposition(&lossy);
    }

    #[test]
    fn extracted_minor_agrees_with_exact_moments() {
        let state = tmsv(0.25);
        let s = spec(1, 0, 0, 1);
        let fit = optimal_reference(&state, &s).unwrap();
        let reference = fit.family().build().unwrap();
        let exact = minor_dprime(&state, &reference, &s).unwrap();
        let extracted = minor_dprime_extracted(&state, &reference, &s).unwrap();
        assert_abs_diff_eq!(extracted.value, exact.value, epsilon = 1e-8);
        assert_abs_diff_eq!(extracted.second, exact.second, epsilon = 1e-8);
        assert_eq!(extracted.provenance, Provenance::FourierExtracted);
        assert!(extracted.epsilon.is_none());
        check_decomposition(&extracted);
    }

    #[test]
    fn extracted_minus_branch_agrees_too() {
        // (1,1,0,0) reads the (m′, −n′) branch.
        let family = StateFamily::new(FamilyTag::HermiteGaussian {
            sigma_plus: 1.0,
            sigma_minus: 1.0,
        });
        let state = family.build().unwrap();
        let reference = StateFamily::new(FamilyTag::CoherentProduct {
            gamma: c(0.5, 0.1),
            delta: c(0.3, -0.2),
        })
        .build()
        .unwrap();
        let s = spec(1, 1, 0, 0);
        let exact = minor_dprime(&state, &reference, &s).unwrap();
        let extracted = minor_dprime_extracted(&state, &reference, &s).unwrap();
        assert_abs_diff_eq!(extracted.value, exact.value, epsilon = 1e-8);
    }

    #[test]
    fn vacuum_covariance_is_half_identity() {
        let vac = TruncatedState::vacuum(3);
        let cov = quadrature_covariance(&vac).unwrap();
        for r in 0..4 {
            for cidx in 0..4 {
                let want = if r == cidx { 0.5 } else { 0.0 };
                assert_abs_diff_eq!(cov[(r, cidx)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn coherent_covariance_equals_vacuum_covariance() {
        let state = StateFamily::new(FamilyTag::CoherentProduct {
            gamma: c(0.7, -0.3),
            delta: c(0.2, 0.4),
        })
        .build()
        .unwrap();
        let cov = quadrature_covariance(&state).unwrap();
        for r in 0..4 {
            for cidx in 0..4 {
                let want = if r == cidx { 0.5 } else { 0.0 };
                assert_abs_diff_eq!(cov[(r, cidx)], want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn tmsv_collective_variances_and_criteria() {
        let lambda = 0.5;
        let state = tmsv(lambda);
        let cov = quadrature_covariance(&state).unwrap();

        let squeezed = variance_product(&cov, QuadraturePairing::MinusPlus);
        let v = (1.0 - lambda) / (1.0 + lambda);
        assert_abs_diff_eq!(squeezed.var_r, v, epsilon = 1e-9);
        assert_abs_diff_eq!(squeezed.var_s, v, epsilon = 1e-9);
        assert!(squeezed.witnessed);

        let stretched = variance_product(&cov, QuadraturePairing::PlusMinus);
        assert_abs_diff_eq!(stretched.value, 1.0 / (v * v), epsilon = 1e-7);
        assert!(!stretched.witnessed);

        let second = second_moment_criterion(&cov, QuadraturePairing::MinusPlus);
        assert_abs_diff_eq!(second.value, (v + 1.0) * (v + 1.0) - 4.0, epsilon = 1e-7);
        assert!(second.witnessed);
        assert_abs_diff_eq!(second.cov_rs, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn analytic_rejects_transformed_families() {
        let family = StateFamily::new(FamilyTag::HermiteGaussian {
            sigma_plus: 1.0,
            sigma_minus: 1.0,
        })
        .with_pm_transform(crate::states::PmTransform::rotation(0.3));
        assert!(matches!(
            analytic_minor(&family, &spec(1, 1, 0, 0)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn degenerate_spec_is_a_variance_bound() {
        let state = tmsv(0.6);
        let s = spec(2, 0, 0, 0);
        assert!(s.is_degenerate());
        let r = minor_d(&state, &s).unwrap();
        // ⟨a†²a²⟩ − |⟨a†²⟩... the cross operator is a†², whose mean
        // vanishes on this family, leaving a non-negative moment.
        assert!(r.value >= -1e-12);
        assert!(!r.witnessed);
    }
}
