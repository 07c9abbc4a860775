//! State families and their construction into truncated Fock states.
//!
//! Every family auto-selects its cutoff so that a guard band of
//! [`HEADROOM`] nearly-empty levels sits below the truncation level; the
//! moment engine's tail checks then never fire spuriously for monomials up
//! to that order. Mixtures (photon-loss-free dephasing of two-branch
//! superpositions) are realised exactly as rank-2 eigendecompositions of
//! the 2×2 coherence matrix, never as dense density matrices.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::gaussian::{apply_gaussian_ops, squeeze_matrix, GaussianOp};
use crate::fock::{Mode, PureComponent, TruncatedState, DEFAULT_TAIL_BOUND};

/// Guard levels kept nearly empty below the cutoff so that moments up to
/// this order pass the tail checks without inflating the error budget.
pub const HEADROOM: usize = 8;
/// Auto-selected cutoffs are capped here; parameter regimes needing more
/// are reported as errors rather than silently truncated.
pub const MAX_AUTO_CUTOFF: usize = 256;

/// Which of the two collective quadrature directions the `ξ`-squeeze
/// stretches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SqueezeOrientation {
    /// `Var(x₁+x₂) → ξ²·Var(x₁+x₂)`, `Var(x₁−x₂) → Var(x₁−x₂)/ξ²`
    /// (momenta transform oppositely).
    #[default]
    AmplifyPlus,
    /// The mirror image: the minus quadrature is stretched instead.
    AmplifyMinus,
}

/// Optional passive rotation followed by a collective two-mode squeeze,
/// applied to a built state.
///
/// The rotation acts with angle `−φ` on mode a and `+φ` on mode b, so the
/// pair `(x₁+x₂, p₁−p₂)` rotates within its own plane (and likewise
/// `(x₁−x₂, p₁+p₂)`); rotation-invariant criteria stay exactly invariant
/// under it. The squeeze is `exp(r(ab − a†b†))` with `r = ∓ln ξ` depending
/// on orientation, realised as a balanced beamsplitter conjugating a pair
/// of opposite single-mode squeezes.
#[derive(Debug, Clone, Copy)]
pub struct PmTransform {
    pub phi: f64,
    /// Squeeze strength, `ξ ≥ 1`; `ξ = 1` is the identity.
    pub xi: f64,
    pub orientation: SqueezeOrientation,
}

impl PmTransform {
    pub fn rotation(phi: f64) -> Self {
        Self {
            phi,
            xi: 1.0,
            orientation: SqueezeOrientation::AmplifyPlus,
        }
    }
}

/// The supported two-mode state families.
#[derive(Debug, Clone)]
pub enum FamilyTag {
    /// Two-mode squeezed vacuum `√(1−λ²) Σ λⁿ |n,n⟩`, optionally displaced
    /// by `(α, β)` on modes (a, b).
    Tmsv {
        lambda: f64,
        displacement: Option<(Complex64, Complex64)>,
    },
    /// Two-branch coherent superposition
    /// `N(α,β)(|α,β⟩ + e^{iθ}|−α,−β⟩)` with
    /// `N(α,β) = [2 + 2cosθ·e^{−2(|α|²+|β|²)}]^{−1/2}`.
    Cat {
        alpha: Complex64,
        beta: Complex64,
        theta: f64,
    },
    /// `α|N,0⟩ + β|0,N⟩` with `|α|² + |β|² = 1`.
    Noon {
        n: u32,
        alpha: Complex64,
        beta: Complex64,
    },
    /// Product of coherent states `|γ⟩⊗|δ⟩` (separable reference).
    CoherentProduct { gamma: Complex64, delta: Complex64 },
    /// Two-mode Hermite–Gaussian wavefunction
    /// `ψ(x₁,x₂) ∝ (x₁+x₂)·exp(−¼[((x₁+x₂)/σ₊)² + ((x₁−x₂)/σ₋)²])`:
    /// a squeezed single excitation in the plus mode times squeezed vacuum
    /// in the minus mode.
    HermiteGaussian { sigma_plus: f64, sigma_minus: f64 },
}

impl FamilyTag {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyTag::Tmsv { .. } => "tmsv",
            FamilyTag::Cat { .. } => "cat",
            FamilyTag::Noon { .. } => "noon",
            FamilyTag::CoherentProduct { .. } => "coherent",
            FamilyTag::HermiteGaussian { .. } => "hermite-gaussian",
        }
    }
}

/// A family plus the environmental knobs applied at build time.
#[derive(Debug, Clone)]
pub struct StateFamily {
    pub tag: FamilyTag,
    /// Dephasing strength `p ∈ [0, 1]`: scales the inter-branch coherence
    /// of the two-branch families by `1 − p`. Zero for the others.
    pub dephasing: f64,
    pub pm_transform: Option<PmTransform>,
}

impl StateFamily {
    pub fn new(tag: FamilyTag) -> Self {
        Self {
            tag,
            dephasing: 0.0,
            pm_transform: None,
        }
    }

    pub fn with_dephasing(mut self, p: f64) -> Self {
        self.dephasing = p;
        self
    }

    pub fn with_pm_transform(mut self, pm: PmTransform) -> Self {
        self.pm_transform = Some(pm);
        self
    }

    /// Check all family parameter invariants.
    pub fn validate(&self) -> Result<()> {
        match &self.tag {
            FamilyTag::Tmsv {
                lambda,
                displacement,
            } => {
                if !lambda.is_finite() || lambda.abs() >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "squeezing parameter must satisfy |λ| < 1, got {lambda}"
                    )));
                }
                if let Some((a, b)) = displacement {
                    if !a.re.is_finite() || !a.im.is_finite() || !b.re.is_finite()
                        || !b.im.is_finite()
                    {
                        return Err(Error::InvalidParameter(
                            "displacement must be finite".into(),
                        ));
                    }
                }
            }
            FamilyTag::Cat { alpha, beta, theta } => {
                if !theta.is_finite() {
                    return Err(Error::InvalidParameter("cat phase must be finite".into()));
                }
                let delta = 2.0 * (alpha.norm_sqr() + beta.norm_sqr());
                if !delta.is_finite() {
                    return Err(Error::InvalidParameter(
                        "cat amplitudes must be finite".into(),
                    ));
                }
                if delta < 1e-4 {
                    return Err(Error::InvalidParameter(format!(
                        "cat amplitudes too small (|α|² + |β|² = {:.3e}): the two branches \
                         are numerically indistinguishable",
                        delta / 2.0
                    )));
                }
                let denom = 2.0 + 2.0 * (1.0 - self.dephasing) * theta.cos() * (-delta).exp();
                if denom <= 1e-12 {
                    return Err(Error::InvalidParameter(
                        "cat normalization degenerates: the two branches cancel".into(),
                    ));
                }
            }
            FamilyTag::Noon { n, alpha, beta } => {
                if *n < 1 {
                    return Err(Error::InvalidParameter(
                        "photon number N must be at least 1".into(),
                    ));
                }
                let norm = alpha.norm_sqr() + beta.norm_sqr();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "|α|² + |β|² = {norm} must equal 1 within 1e-12"
                    )));
                }
            }
            FamilyTag::CoherentProduct { gamma, delta } => {
                for (name, v) in [("γ", gamma), ("δ", delta)] {
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(Error::InvalidParameter(format!(
                            "coherent amplitude {name} must be finite"
                        )));
                    }
                }
            }
            FamilyTag::HermiteGaussian {
                sigma_plus,
                sigma_minus,
            } => {
                for (name, s) in [("σ₊", sigma_plus), ("σ₋", sigma_minus)] {
                    if !(s.is_finite() && *s > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "width {name} must be positive and finite, got {s}"
                        )));
                    }
                }
            }
        }
        if !(0.0..=1.0).contains(&self.dephasing) {
            return Err(Error::InvalidParameter(format!(
                "dephasing strength must lie in [0, 1], got {}",
                self.dephasing
            )));
        }
        if self.dephasing > 0.0
            && !matches!(self.tag, FamilyTag::Noon { .. } | FamilyTag::Cat { .. })
        {
            return Err(Error::InvalidParameter(format!(
                "dephasing is only defined for the two-branch families (noon, cat), \
                 not for {}",
                self.tag.name()
            )));
        }
        if let Some(pm) = &self.pm_transform {
            if !pm.phi.is_finite() {
                return Err(Error::InvalidParameter(
                    "transform angle must be finite".into(),
                ));
            }
            if !(pm.xi.is_finite() && pm.xi >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "squeeze strength ξ must satisfy ξ ≥ 1, got {}",
                    pm.xi
                )));
            }
        }
        Ok(())
    }

    /// Build the state at the default tail bound.
    pub fn build(&self) -> Result<TruncatedState> {
        Ok(self.build_detailed()?.state)
    }

    /// Build and report how the cutoff was chosen.
    pub fn build_detailed(&self) -> Result<Built> {
        self.build_with_tail_bound(DEFAULT_TAIL_BOUND)
    }

    pub fn build_with_tail_bound(&self, tail_bound: f64) -> Result<Built> {
        self.validate()?;
        let mut notes = Vec::new();
        let mut state = match &self.tag {
            FamilyTag::Tmsv {
                lambda,
                displacement,
            } => build_tmsv(*lambda, *displacement, tail_bound)?,
            FamilyTag::Cat { alpha, beta, theta } => {
                build_cat(*alpha, *beta, *theta, self.dephasing, tail_bound)?
            }
            FamilyTag::Noon { n, alpha, beta } => {
                build_noon(*n, *alpha, *beta, self.dephasing, tail_bound)?
            }
            FamilyTag::CoherentProduct { gamma, delta } => {
                build_coherent_product(*gamma, *delta, tail_bound)?
            }
            FamilyTag::HermiteGaussian {
                sigma_plus,
                sigma_minus,
            } => build_hermite_gaussian(*sigma_plus, *sigma_minus, tail_bound)?,
        };
        if let Some(pm) = &self.pm_transform {
            state = apply_pm_transform(&state, pm, tail_bound)?;
            notes.push(format!(
                "plus/minus transform applied: φ = {}, ξ = {}, orientation = {:?}",
                pm.phi, pm.xi, pm.orientation
            ));
        }
        let report = BuildReport {
            cutoff: state.cutoff(),
            headroom: HEADROOM,
            tail_bound,
            norm_defect: state.norm_defect(),
            notes,
        };
        Ok(Built { state, report })
    }
}

/// Mark a two-branch family as dephased with strength `p`.
///
/// The mixture is realised at build time through the exact rank-2
/// eigendecomposition of the branch-coherence matrix (the inter-branch
/// coherences scale by `1 − p`, populations are untouched).
pub fn apply_dephasing(family: &StateFamily, p: f64) -> Result<StateFamily> {
    let out = StateFamily {
        tag: family.tag.clone(),
        dephasing: p,
        pm_transform: family.pm_transform,
    };
    out.validate()?;
    Ok(out)
}

/// A built state together with the construction report.
#[derive(Debug, Clone)]
pub struct Built {
    pub state: TruncatedState,
    pub report: BuildReport,
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    pub cutoff: usize,
    pub headroom: usize,
    pub tail_bound: f64,
    pub norm_defect: f64,
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------------------
// family builders
// ---------------------------------------------------------------------------

/// Smallest level `L` such that a coherent state of modulus `|amp|` keeps
/// less than `tol` probability at levels `≥ L`.
fn poisson_level(amp_sq: f64, tol: f64) -> Result<usize> {
    let mut cumulative = 0.0;
    let mut term = (-amp_sq).exp(); // P(0)
    for n in 0..=4 * MAX_AUTO_CUTOFF {
        cumulative += term;
        if 1.0 - cumulative < tol {
            return Ok(n + 1);
        }
        term *= amp_sq / ((n + 1) as f64);
    }
    Err(Error::CutoffTooSmall(format!(
        "coherent amplitude with |amp|² = {amp_sq} needs more than {MAX_AUTO_CUTOFF} levels"
    )))
}

/// Unnormalised truncated coherent coefficients `e^{−|α|²/2} αʲ/√(j!)`.
fn coherent_coeffs(alpha: Complex64, cutoff: usize) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(cutoff + 1);
    let mut coeff = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for j in 0..=cutoff {
        v.push(coeff);
        coeff = coeff * alpha / ((j + 1) as f64).sqrt();
    }
    v
}

fn product_vector(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let side = b.len();
    let mut out = Vec::with_capacity(a.len() * side);
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let norm_sq: f64 = v.iter().map(|a| a.norm_sqr()).sum();
    let norm = norm_sq.sqrt();
    if norm > 0.0 {
        for a in v.iter_mut() {
            *a /= norm;
        }
    }
    norm
}

fn build_tmsv(
    lambda: f64,
    displacement: Option<(Complex64, Complex64)>,
    tail_bound: f64,
) -> Result<TruncatedState> {
    // Per-mode marginal is thermal: mass at levels ≥ K is λ^{2K}.
    let mu = lambda * lambda;
    let k = if mu < 1e-300 {
        1
    } else {
        ((tail_bound / 10.0).ln() / mu.ln()).ceil() as usize + 1
    };
    let mut cutoff = k + HEADROOM;
    if let Some((a, b)) = displacement {
        let extra = poisson_level(a.norm_sqr().max(b.norm_sqr()), tail_bound / 10.0)?;
        cutoff += extra;
    }
    if cutoff > MAX_AUTO_CUTOFF {
        return Err(Error::CutoffTooSmall(format!(
            "λ = {lambda} needs cutoff {cutoff} > {MAX_AUTO_CUTOFF}"
        )));
    }
    let side = cutoff + 1;
    let mut amps = vec![Complex64::new(0.0, 0.0); side * side];
    let mut coeff = 1.0f64;
    for j in 0..side {
        amps[j * side + j] = Complex64::new(coeff, 0.0);
        coeff *= lambda;
    }
    normalize(&mut amps);
    let state = TruncatedState::pure(cutoff, amps, tail_bound)?;
    match displacement {
        None => Ok(state),
        Some((a, b)) => apply_gaussian_ops(
            &state,
            &[
                GaussianOp::Displace {
                    mode: Mode::A,
                    alpha: a,
                },
                GaussianOp::Displace {
                    mode: Mode::B,
                    alpha: b,
                },
            ],
        ),
    }
}

fn build_coherent_product(
    gamma: Complex64,
    delta: Complex64,
    tail_bound: f64,
) -> Result<TruncatedState> {
    let level = poisson_level(gamma.norm_sqr(), tail_bound / 10.0)?
        .max(poisson_level(delta.norm_sqr(), tail_bound / 10.0)?);
    let cutoff = level + HEADROOM;
    if cutoff > MAX_AUTO_CUTOFF {
        return Err(Error::CutoffTooSmall(format!(
            "coherent amplitudes need cutoff {cutoff} > {MAX_AUTO_CUTOFF}"
        )));
    }
    let mut amps = product_vector(
        &coherent_coeffs(gamma, cutoff),
        &coherent_coeffs(delta, cutoff),
    );
    normalize(&mut amps);
    TruncatedState::pure(cutoff, amps, tail_bound)
}

fn build_noon(
    n: u32,
    alpha: Complex64,
    beta: Complex64,
    dephasing: f64,
    tail_bound: f64,
) -> Result<TruncatedState> {
    let n = n as usize;
    let cutoff = n + HEADROOM;
    if cutoff > MAX_AUTO_CUTOFF {
        return Err(Error::CutoffTooSmall(format!(
            "N = {n} needs cutoff {cutoff} > {MAX_AUTO_CUTOFF}"
        )));
    }
    let side = cutoff + 1;
    let dim = side * side;
    let idx_n0 = n * side;
    let idx_0n = n;
    if dephasing == 0.0 {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[idx_n0] = alpha;
        amps[idx_0n] = beta;
        return TruncatedState::pure(cutoff, amps, tail_bound);
    }
    // Branch-coherence matrix in the orthonormal basis {|N,0⟩, |0,N⟩}:
    // populations stay, the off-diagonal coherence scales by (1 − p).
    let coh = (1.0 - dephasing) * alpha * beta.conj();
    let pairs = eigh2(alpha.norm_sqr(), coh, beta.norm_sqr());
    let mut components = Vec::new();
    for (weight, v0, v1) in pairs {
        if weight < 1e-14 {
            continue;
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[idx_n0] = v0;
        amps[idx_0n] = v1;
        components.push(PureComponent {
            weight,
            amplitudes: amps,
        });
    }
    rescale_weights(&mut components);
    TruncatedState::from_components(cutoff, components, tail_bound)
}

fn build_cat(
    alpha: Complex64,
    beta: Complex64,
    theta: f64,
    dephasing: f64,
    tail_bound: f64,
) -> Result<TruncatedState> {
    let level = poisson_level(alpha.norm_sqr(), tail_bound / 10.0)?
        .max(poisson_level(beta.norm_sqr(), tail_bound / 10.0)?);
    let cutoff = level + HEADROOM;
    if cutoff > MAX_AUTO_CUTOFF {
        return Err(Error::CutoffTooSmall(format!(
            "cat amplitudes need cutoff {cutoff} > {MAX_AUTO_CUTOFF}"
        )));
    }
    // The two branches |α,β⟩ and |−α,−β⟩ as truncated product vectors.
    let plus = product_vector(
        &coherent_coeffs(alpha, cutoff),
        &coherent_coeffs(beta, cutoff),
    );
    let minus = product_vector(
        &coherent_coeffs(-alpha, cutoff),
        &coherent_coeffs(-beta, cutoff),
    );
    let phase = Complex64::from_polar(1.0, theta);
    if dephasing == 0.0 {
        let mut amps: Vec<Complex64> = plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| p + phase * m)
            .collect();
        normalize(&mut amps);
        return TruncatedState::pure(cutoff, amps, tail_bound);
    }
    // Dephased two-branch mixture: populations of both branches survive,
    // the cross coherence scales by (1 − p). Work in the orthonormal pair
    // u₁ = |α,β⟩, u₂ ⟂ u₁ spanning the branch plane.
    let mut u1 = plus;
    normalize(&mut u1);
    let mut v2 = minus;
    normalize(&mut v2);
    let overlap: Complex64 = u1.iter().zip(&v2).map(|(a, b)| a.conj() * b).sum();
    let s = overlap.re; // ⟨α,β|−α,−β⟩ = e^{−Δ}, real positive
    let orth = (1.0 - s * s).max(0.0).sqrt();
    let mut u2: Vec<Complex64> = v2
        .iter()
        .zip(&u1)
        .map(|(v, u)| (v - Complex64::new(s, 0.0) * u) / orth)
        .collect();
    normalize(&mut u2);
    // Unnormalised density: |c₁⟩⟨c₁| + |c₂⟩⟨c₂| + (1−p)(e^{iθ}|c₂⟩⟨c₁| + h.c.)
    // with c₁ = u₁ and c₂ = s·u₁ + orth·u₂, projected to the (u₁, u₂) plane:
    let g = 1.0 - dephasing;
    let a11 = 1.0 + s * s + g * 2.0 * theta.cos() * s;
    let a22 = orth * orth;
    let a12 = Complex64::new(s * orth, 0.0) + g * phase.conj() * orth;
    let trace = a11 + a22;
    let pairs = eigh2(a11 / trace, a12 / trace, a22 / trace);
    let mut components = Vec::new();
    for (weight, q1, q2) in pairs {
        if weight < 1e-14 {
            continue;
        }
        let mut amps: Vec<Complex64> = u1
            .iter()
            .zip(&u2)
            .map(|(x, y)| q1 * x + q2 * y)
            .collect();
        normalize(&mut amps);
        components.push(PureComponent {
            weight,
            amplitudes: amps,
        });
    }
    rescale_weights(&mut components);
    TruncatedState::from_components(cutoff, components, tail_bound)
}

fn build_hermite_gaussian(
    sigma_plus: f64,
    sigma_minus: f64,
    tail_bound: f64,
) -> Result<TruncatedState> {
    let mut build_cutoff = 32usize;
    loop {
        match try_build_hg(sigma_plus, sigma_minus, build_cutoff, tail_bound) {
            Ok(state) => {
                // Compact: find the smallest cutoff that keeps the guard
                // band empty, then trim.
                let target = compact_cutoff(&state, tail_bound);
                return state.with_cutoff(target);
            }
            Err(Error::CutoffTooSmall(_)) if build_cutoff < MAX_AUTO_CUTOFF => {
                build_cutoff = (build_cutoff * 2).min(MAX_AUTO_CUTOFF);
            }
            Err(e) => return Err(e),
        }
    }
}

fn try_build_hg(
    sigma_plus: f64,
    sigma_minus: f64,
    cutoff: usize,
    tail_bound: f64,
) -> Result<TruncatedState> {
    let side = cutoff + 1;
    // Plus mode: squeezed single excitation S(σ₊)|1⟩; minus mode: S(σ₋)|0⟩.
    let u_plus = squeeze_matrix(cutoff, sigma_plus);
    let u_minus = squeeze_matrix(cutoff, sigma_minus);
    let sq1: Vec<Complex64> = (0..side).map(|r| u_plus[(r, 1)]).collect();
    let sq0: Vec<Complex64> = (0..side).map(|r| u_minus[(r, 0)]).collect();
    for v in [&sq1, &sq0] {
        let top: f64 = v[side.saturating_sub(HEADROOM)..]
            .iter()
            .map(|a| a.norm_sqr())
            .sum();
        if top > tail_bound / 4.0 {
            return Err(Error::CutoffTooSmall(format!(
                "squeezed mode keeps probability {top:.3e} in the guard band at cutoff {cutoff}"
            )));
        }
    }
    let mut amps = product_vector(&sq1, &sq0);
    normalize(&mut amps);
    let pm_state = TruncatedState::pure(cutoff, amps, tail_bound)?;
    // One balanced beamsplitter maps the (plus, minus) pair to the
    // physical modes: a₁ = (a₊ + a₋)/√2, a₂ = (a₊ − a₋)/√2.
    apply_gaussian_ops(
        &pm_state,
        &[GaussianOp::Beamsplit {
            transmissivity: 0.5,
            phase: 0.0,
        }],
    )
}

/// Smallest cutoff that keeps both the guard band and the trimmed mass
/// within the bound.
fn compact_cutoff(state: &TruncatedState, tail_bound: f64) -> usize {
    let d = state.cutoff();
    let pmf_a = state.mode_pmf(Mode::A);
    let pmf_b = state.mode_pmf(Mode::B);
    // tail_at_or_above[l] = Σ_{j ≥ l} pmf[j]
    let mut tail_a = vec![0.0; d + 2];
    let mut tail_b = vec![0.0; d + 2];
    for j in (0..=d).rev() {
        tail_a[j] = tail_a[j + 1] + pmf_a[j];
        tail_b[j] = tail_b[j + 1] + pmf_b[j];
    }
    for target in (HEADROOM + 1)..d {
        let guard_start = target + 1 - HEADROOM;
        if tail_a[guard_start].max(tail_b[guard_start]) < tail_bound / 4.0 {
            return target;
        }
    }
    d
}

/// Rotation (counter-phased) followed by the collective squeeze.
fn apply_pm_transform(
    state: &TruncatedState,
    pm: &PmTransform,
    tail_bound: f64,
) -> Result<TruncatedState> {
    let mut ops = Vec::new();
    if pm.phi != 0.0 {
        ops.push(GaussianOp::Rotate {
            mode: Mode::A,
            theta: -pm.phi,
        });
        ops.push(GaussianOp::Rotate {
            mode: Mode::B,
            theta: pm.phi,
        });
    }
    if pm.xi != 1.0 {
        let (w_plus, w_minus) = match pm.orientation {
            SqueezeOrientation::AmplifyPlus => (pm.xi, 1.0 / pm.xi),
            SqueezeOrientation::AmplifyMinus => (1.0 / pm.xi, pm.xi),
        };
        // Balanced splitter → opposite single-mode squeezes → splitter back:
        // exactly the collective squeeze exp(r(ab − a†b†)).
        ops.push(GaussianOp::Beamsplit {
            transmissivity: 0.5,
            phase: 0.0,
        });
        ops.push(GaussianOp::Squeeze {
            mode: Mode::A,
            width: w_plus,
        });
        ops.push(GaussianOp::Squeeze {
            mode: Mode::B,
            width: w_minus,
        });
        ops.push(GaussianOp::Beamsplit {
            transmissivity: 0.5,
            phase: 0.0,
        });
    }
    if ops.is_empty() {
        return Ok(state.clone());
    }
    // The squeeze raises the energy by ~ξ², so work padded and retry if
    // the first guess is still too tight.
    let growth = pm.xi * pm.xi;
    let mut padded_cutoff =
        (((state.cutoff() + 6) as f64) * growth).ceil() as usize + HEADROOM;
    loop {
        if padded_cutoff > MAX_AUTO_CUTOFF {
            return Err(Error::CutoffTooSmall(format!(
                "transform with ξ = {} needs cutoff beyond {MAX_AUTO_CUTOFF}",
                pm.xi
            )));
        }
        let padded = state.with_cutoff(padded_cutoff)?;
        match apply_gaussian_ops(&padded, &ops) {
            Ok(out) => {
                let target = compact_cutoff(&out, tail_bound);
                return out.with_cutoff(target);
            }
            Err(Error::CutoffTooSmall(_)) if padded_cutoff < MAX_AUTO_CUTOFF => {
                padded_cutoff = (padded_cutoff * 3 / 2 + 8).min(MAX_AUTO_CUTOFF);
            }
            Err(e) => return Err(e),
        }
    }
}

fn rescale_weights(components: &mut [PureComponent]) {
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if total > 0.0 {
        for c in components.iter_mut() {
            c.weight /= total;
        }
    }
}

/// Eigen-pairs of the 2×2 Hermitian matrix [[a, c], [c*, d]], returned as
/// `(eigenvalue, v₀, v₁)` with orthonormal eigenvectors.
fn eigh2(a: f64, c: Complex64, d: f64) -> [(f64, Complex64, Complex64); 2] {
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = (half_diff * half_diff + c.norm_sqr()).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if c.norm_sqr() < 1e-300 {
        // Already diagonal; order eigenvalues to match eigenvectors.
        return if a >= d {
            [
                (a, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
                (d, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
            ]
        } else {
            [
                (d, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
                (a, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            ]
        };
    }
    let vec_for = |l: f64| {
        // (c, l − a) and (l − d, c̄) are both eigenvectors; pick the better
        // conditioned one.
        let n1 = c.norm_sqr() + (l - a) * (l - a);
        let n2 = (l - d) * (l - d) + c.norm_sqr();
        if n1 >= n2 {
            let n = n1.sqrt();
            (c / n, Complex64::new((l - a) / n, 0.0))
        } else {
            let n = n2.sqrt();
            (Complex64::new((l - d) / n, 0.0), c.conj() / n)
        }
    };
    let (v10, v11) = vec_for(l1);
    let (v20, v21) = vec_for(l2);
    [(l1, v10, v11), (l2, v20, v21)]
}

// ---------------------------------------------------------------------------
// closed-form covariance for the Hermite–Gaussian family
// ---------------------------------------------------------------------------

/// Symmetrised quadrature covariance matrix in the order `(x₁, p₁, x₂, p₂)`
/// from the closed-form second moments of the Hermite–Gaussian family,
/// including any plus/minus transform.
///
/// Only this family has a closed form here; other families go through the
/// numeric route.
pub fn covariance_matrix(family: &StateFamily) -> Result<Matrix4<f64>> {
    family.validate()?;
    let FamilyTag::HermiteGaussian {
        sigma_plus,
        sigma_minus,
    } = family.tag
    else {
        return Err(Error::Unsupported(format!(
            "closed-form covariance is only available for the hermite-gaussian family, \
             not {}",
            family.tag.name()
        )));
    };
    let sp2 = sigma_plus * sigma_plus;
    let sm2 = sigma_minus * sigma_minus;
    let xx = (3.0 * sp2 + sm2) / 4.0;
    let pp = (sp2 + 3.0 * sm2) / (4.0 * sp2 * sm2);
    let xx_cross = (3.0 * sp2 - sm2) / 4.0;
    let pp_cross = (3.0 * sm2 - sp2) / (4.0 * sp2 * sm2);
    let mut cov = Matrix4::zeros();
    cov[(0, 0)] = xx;
    cov[(2, 2)] = xx;
    cov[(1, 1)] = pp;
    cov[(3, 3)] = pp;
    cov[(0, 2)] = xx_cross;
    cov[(2, 0)] = xx_cross;
    cov[(1, 3)] = pp_cross;
    cov[(3, 1)] = pp_cross;
    if let Some(pm) = &family.pm_transform {
        let s = pm_symplectic(pm);
        cov = s * cov * s.transpose();
    }
    Ok(cov)
}

/// The 4×4 linear action of the plus/minus transform on `(x₁, p₁, x₂, p₂)`.
pub fn pm_symplectic(pm: &PmTransform) -> Matrix4<f64> {
    let (cph, sph) = (pm.phi.cos(), pm.phi.sin());
    // Counter-phased rotation: mode a by −φ, mode b by +φ.
    let rot = Matrix4::new(
        cph, -sph, 0.0, 0.0, //
        sph, cph, 0.0, 0.0, //
        0.0, 0.0, cph, sph, //
        0.0, 0.0, -sph, cph,
    );
    let r = match pm.orientation {
        SqueezeOrientation::AmplifyPlus => -pm.xi.ln(),
        SqueezeOrientation::AmplifyMinus => pm.xi.ln(),
    };
    let (ch, sh) = (r.cosh(), r.sinh());
    let sq = Matrix4::new(
        ch, 0.0, -sh, 0.0, //
        0.0, ch, 0.0, sh, //
        -sh, 0.0, ch, 0.0, //
        0.0, sh, 0.0, ch,
    );
    sq * rot
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation, ModeMonomial};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tmsv(lambda: f64) -> StateFamily {
        StateFamily::new(FamilyTag::Tmsv {
            lambda,
            displacement: None,
        })
    }

    #[test]
    fn tmsv_closed_form_moments() {
        for lambda in [0.5, -0.3, 0.85] {
            let s = tmsv(lambda).build().unwrap();
            let denom = 1.0 - lambda * lambda;
            let n_a = expectation(&s, ModeMonomial::new(1, 1, 0, 0)).unwrap();
            assert_abs_diff_eq!(n_a.re, lambda * lambda / denom, epsilon = 1e-9);
            let n_b = expectation(&s, ModeMonomial::new(0, 0, 1, 1)).unwrap();
            assert_abs_diff_eq!(n_b.re, lambda * lambda / denom, epsilon = 1e-9);
            let ab = expectation(&s, ModeMonomial::new(0, 1, 0, 1)).unwrap();
            assert_abs_diff_eq!(ab.re, lambda / denom, epsilon = 1e-9);
            assert_abs_diff_eq!(ab.im, 0.0, epsilon = 1e-12);
            let a_cross = expectation(&s, ModeMonomial::new(1, 0, 0, 1)).unwrap();
            assert_abs_diff_eq!(a_cross.norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn displaced_tmsv_means() {
        let d = (c(0.4, 0.1), c(-0.2, 0.3));
        let s = StateFamily::new(FamilyTag::Tmsv {
            lambda: 0.4,
            displacement: Some(d),
        })
        .build()
        .unwrap();
        let a = expectation(&s, ModeMonomial::new(0, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(a.re, d.0.re, epsilon = 1e-8);
        assert_abs_diff_eq!(a.im, d.0.im, epsilon = 1e-8);
        let b = expectation(&s, ModeMonomial::new(0, 0, 0, 1)).unwrap();
        assert_abs_diff_eq!(b.re, d.1.re, epsilon = 1e-8);
        assert_abs_diff_eq!(b.im, d.1.im, epsilon = 1e-8);
    }

    #[test]
    fn coherent_product_moments() {
        let gamma = c(0.9, -0.2);
        let delta = c(0.3, 0.4);
        let s = StateFamily::new(FamilyTag::CoherentProduct { gamma, delta })
            .build()
            .unwrap();
        let a = expectation(&s, ModeMonomial::new(0, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(a.re, gamma.re, epsilon = 1e-9);
        assert_abs_diff_eq!(a.im, gamma.im, epsilon = 1e-9);
        let ab = expectation(&s, ModeMonomial::new(0, 1, 0, 1)).unwrap();
        let want = gamma * delta;
        assert_abs_diff_eq!(ab.re, want.re, epsilon = 1e-9);
        assert_abs_diff_eq!(ab.im, want.im, epsilon = 1e-9);
    }

    #[test]
    fn noon_cross_moment() {
        let n = 3u32;
        let alpha = c(0.6, 0.0);
        let beta = c(0.0, 0.8);
        let s = StateFamily::new(FamilyTag::Noon { n, alpha, beta })
            .build()
            .unwrap();
        // ⟨a^N b†^N⟩ = α β̄ N!
        let v = expectation(&s, ModeMonomial::new(0, 3, 3, 0)).unwrap();
        let want = alpha * beta.conj() * 6.0;
        assert_abs_diff_eq!(v.re, want.re, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, want.im, epsilon = 1e-12);
        // The joint number moment vanishes: no branch populates both modes.
        let joint = expectation(&s, ModeMonomial::new(3, 3, 3, 3)).unwrap();
        assert_abs_diff_eq!(joint.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dephased_noon_scales_coherence() {
        let n = 2u32;
        let alpha = c(0.7, 0.0);
        let beta = c((1.0f64 - 0.49).sqrt(), 0.0);
        for p in [0.0, 0.3, 1.0] {
            let s = StateFamily::new(FamilyTag::Noon { n, alpha, beta })
                .with_dephasing(p)
                .build()
                .unwrap();
            let v = expectation(&s, ModeMonomial::new(0, 2, 2, 0)).unwrap();
            let want = alpha * beta.conj() * 2.0 * (1.0 - p);
            assert_abs_diff_eq!(v.re, want.re, epsilon = 1e-10);
            assert_abs_diff_eq!(v.im, want.im, epsilon = 1e-10);
            // Populations are untouched by dephasing.
            let pop = expectation(&s, ModeMonomial::new(2, 2, 0, 0)).unwrap();
            assert_abs_diff_eq!(pop.re, alpha.norm_sqr() * 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn cat_normalization_matches_closed_form() {
        let alpha = c(0.9, 0.0);
        let beta = c(0.6, 0.3);
        for theta in [0.0, std::f64::consts::PI, 1.2] {
            let delta = 2.0 * (alpha.norm_sqr() + beta.norm_sqr());
            let cutoff = 40;
            let plus = product_vector(
                &coherent_coeffs(alpha, cutoff),
                &coherent_coeffs(beta, cutoff),
            );
            let minus = product_vector(
                &coherent_coeffs(-alpha, cutoff),
                &coherent_coeffs(-beta, cutoff),
            );
            let phase = Complex64::from_polar(1.0, theta);
            let norm_sq: f64 = plus
                .iter()
                .zip(&minus)
                .map(|(p, m)| (p + phase * m).norm_sqr())
                .sum();
            let want = 2.0 + 2.0 * theta.cos() * (-delta).exp();
            assert_abs_diff_eq!(norm_sq, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn odd_cat_diagonal_moment_carries_coth_factor() {
        let alpha = c(0.8, 0.0);
        let beta = c(0.5, 0.0);
        let theta = std::f64::consts::PI;
        let s = StateFamily::new(FamilyTag::Cat { alpha, beta, theta })
            .build()
            .unwrap();
        let delta = 2.0 * (alpha.norm_sqr() + beta.norm_sqr());
        let coth = 1.0 / (delta / 2.0).tanh();
        // Odd-order single-mode moment picks up the coth(Δ/2) factor…
        let n_a = expectation(&s, ModeMonomial::new(1, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(n_a.re, alpha.norm_sqr() * coth, epsilon = 1e-9);
        // …while the even-parity joint moment does not.
        let joint = expectation(&s, ModeMonomial::new(1, 1, 1, 1)).unwrap();
        assert_abs_diff_eq!(
            joint.re,
            alpha.norm_sqr() * beta.norm_sqr(),
            epsilon = 1e-9
        );
        // Cross moment ⟨a†b⟩ (both exponents odd): ᾱβ·coth(Δ/2).
        let cross = expectation(&s, ModeMonomial::new(1, 0, 0, 1)).unwrap();
        let want = alpha.conj() * beta * coth;
        assert_abs_diff_eq!(cross.re, want.re, epsilon = 1e-9);
        assert_abs_diff_eq!(cross.im, want.im, epsilon = 1e-9);
    }

    #[test]
    fn dephased_cat_moments() {
        let alpha = c(0.8, 0.0);
        let beta = c(0.5, 0.0);
        let theta = std::f64::consts::PI;
        let p = 0.3;
        let s = StateFamily::new(FamilyTag::Cat { alpha, beta, theta })
            .with_dephasing(p)
            .build()
            .unwrap();
        let delta = 2.0 * (alpha.norm_sqr() + beta.norm_sqr());
        let g = (1.0 - p) * (-delta).exp(); // (1−p)·s with cosθ = −1
        // ⟨a†a⟩ = |α|²(1 + g)/(1 − g) once the coherence is scaled.
        let n_a = expectation(&s, ModeMonomial::new(1, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(
            n_a.re,
            alpha.norm_sqr() * (1.0 + g) / (1.0 - g),
            epsilon = 1e-9
        );
        // Trace is one: weights were rescaled after the eigensplit.
        let total: f64 = s.components().iter().map(|comp| comp.weight).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hermite_gaussian_balanced_point_is_the_single_photon_bell_pair() {
        let s = StateFamily::new(FamilyTag::HermiteGaussian {
            sigma_plus: 1.0,
            sigma_minus: 1.0,
        })
        .build()
        .unwrap();
        // At σ₊ = σ₋ = 1 the state is (|0,1⟩ + |1,0⟩)/√2.
        let side = s.cutoff() + 1;
        let amps = &s.components()[0].amplitudes;
        let a01 = amps[1];
        let a10 = amps[side];
        assert_abs_diff_eq!(a01.norm(), 1.0 / 2f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(a10.norm(), 1.0 / 2f64.sqrt(), epsilon = 1e-9);
        let rest: f64 = amps
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 1 && *i != side)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert!(rest < 1e-12, "unexpected support beyond the Bell pair: {rest:.3e}");
    }

    #[test]
    fn hermite_gaussian_covariance_matches_fock_numerics() {
        let family = StateFamily::new(FamilyTag::HermiteGaussian {
            sigma_plus: 1.3,
            sigma_minus: 0.8,
        });
        let closed = covariance_matrix(&family).unwrap();
        let state = family.build().unwrap();
        let numeric = crate::witness::quadrature_covariance(&state).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                assert_abs_diff_eq!(
                    closed[(r, col)],
                    numeric[(r, col)],
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn pm_transform_covariance_matches_fock_numerics() {
        let family = StateFamily::new(FamilyTag::HermiteGaussian {
            sigma_plus: 1.2,
            sigma_minus: 0.7,
        })
        .with_pm_transform(PmTransform {
            phi: 0.6,
            xi: 1.4,
            orientation: SqueezeOrientation::AmplifyPlus,
        });
        let closed = covariance_matrix(&family).unwrap();
        let state = family.build().unwrap();
        let numeric = crate::witness::quadrature_covariance(&state).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                assert_abs_diff_eq!(
                    closed[(r, col)],
                    numeric[(r, col)],
                    epsilon = 1e-7
                );
            }
        }
    }

    #[test]
    fn pm_squeeze_scales_collective_variances() {
        let xi = 1.5;
        let family = StateFamily::new(FamilyTag::HermiteGaussian {
            sigma_plus: 1.0,
            sigma_minus: 1.0,
        })
        .with_pm_transform(PmTransform {
            phi: 0.0,
            xi,
            orientation: SqueezeOrientation::AmplifyPlus,
        });
        let cov = covariance_matrix(&family).unwrap();
        // Var(x₁+x₂) = 3σ₊² ξ², Var(x₁−x₂) = σ₋²/ξ².
        let var_rplus = cov[(0, 0)] + cov[(2, 2)] + 2.0 * cov[(0, 2)];
        let var_rminus = cov[(0, 0)] + cov[(2, 2)] - 2.0 * cov[(0, 2)];
        assert_abs_diff_eq!(var_rplus, 3.0 * xi * xi, epsilon = 1e-12);
        assert_abs_diff_eq!(var_rminus, 1.0 / (xi * xi), epsilon = 1e-12);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(tmsv(1.0).validate().is_err());
        assert!(StateFamily::new(FamilyTag::Noon {
            n: 0,
            alpha: c(1.0, 0.0),
            beta: c(0.0, 0.0),
        })
        .validate()
        .is_err());
        assert!(StateFamily::new(FamilyTag::Noon {
            n: 2,
            alpha: c(0.8, 0.0),
            beta: c(0.7, 0.0),
        })
        .validate()
        .is_err());
        assert!(StateFamily::new(FamilyTag::HermiteGaussian {
            sigma_plus: -1.0,
            sigma_minus: 1.0,
        })
        .validate()
        .is_err());
        // Dephasing outside [0,1] and on an unsupported family.
        assert!(tmsv(0.5).with_dephasing(1.5).validate().is_err());
        assert!(tmsv(0.5).with_dephasing(0.5).validate().is_err());
        // Squeeze strength below one.
        let bad_pm = StateFamily::new(FamilyTag::HermiteGaussian {
            sigma_plus: 1.0,
            sigma_minus: 1.0,
        })
        .with_pm_transform(PmTransform {
            phi: 0.0,
            xi: 0.5,
            orientation: SqueezeOrientation::AmplifyPlus,
        });
        assert!(bad_pm.validate().is_err());
        // Degenerate cat: branches cancel exactly.
        assert!(StateFamily::new(FamilyTag::Cat {
            alpha: c(1e-4, 0.0),
            beta: c(0.0, 0.0),
            theta: std::f64::consts::PI,
        })
        .validate()
        .is_err());
    }

    #[test]
    fn auto_cutoff_reports_headroom() {
        let built = tmsv(0.5).build_detailed().unwrap();
        assert!(built.report.cutoff >= HEADROOM + 2);
        assert_eq!(built.report.headroom, HEADROOM);
        // The guard band really is empty up to the tail bound.
        let state = &built.state;
        let guard = state.mode_mass_at_or_above(
            Mode::A,
            state.cutoff() + 1 - HEADROOM,
        );
        assert!(guard < built.report.tail_bound);
    }

    #[test]
    fn apply_dephasing_validates_family() {
        let fam = tmsv(0.5);
        assert!(apply_dephasing(&fam, 0.3).is_err());
        let noon = StateFamily::new(FamilyTag::Noon {
            n: 1,
            alpha: c(0.6, 0.0),
            beta: c(0.8, 0.0),
        });
        let dephased = apply_dephasing(&noon, 0.3).unwrap();
        assert_abs_diff_eq!(dephased.dephasing, 0.3, epsilon = 0.0);
    }
}
