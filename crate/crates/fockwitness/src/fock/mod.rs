//! Truncated two-mode Fock-space states and exact moment evaluation.
//!
//! A state is stored as a weighted mixture of pure components; each
//! component is a complex amplitude vector over the product basis
//! `|j, k⟩` with `0 ≤ j, k ≤ D` for a shared cutoff `D`, flattened
//! row-major as `index = j·(D+1) + k`. Density matrices are never
//! materialised: every quantity in the library is a sum over components of
//! pure-state sesquilinear forms, which keeps memory at `O(rank·D²)`.
//!
//! The top level `D` acts as a guard band: constructors reject states that
//! park more than the configured tail bound there, so that lowering
//! operators acting inside the truncation stay faithful to the untruncated
//! state.

pub mod gaussian;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default bound on the probability of occupying the top truncation level.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-10;
/// Mixture weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Pure components must be unit-norm within this tolerance.
pub const NORM_TOL: f64 = 1e-10;
/// Renormalisation defects accumulated by truncated unitaries beyond this
/// bound indicate an under-resolved cutoff and are treated as errors.
pub const MAX_NORM_DEFECT: f64 = 1e-6;

/// One of the two bosonic modes of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    A,
    B,
}

/// A pure state entering a mixture with a given weight.
#[derive(Debug, Clone)]
pub struct PureComponent {
    pub weight: f64,
    /// Length `(D+1)²`, row-major over `(j, k)`.
    pub amplitudes: Vec<Complex64>,
}

/// A two-mode state truncated at Fock level `D` per mode, stored as a
/// weighted mixture of pure amplitude vectors.
#[derive(Debug, Clone)]
pub struct TruncatedState {
    cutoff: usize,
    components: Vec<PureComponent>,
    mode_labels: (char, char),
    tail_bound: f64,
    /// Total probability removed (and renormalised away) by truncated
    /// unitary operations applied to this state so far.
    norm_defect: f64,
}

impl TruncatedState {
    /// Validate and assemble a mixture.
    ///
    /// Requirements: `cutoff ≥ 1`; every component has `(cutoff+1)²`
    /// amplitudes, positive weight and unit norm within [`NORM_TOL`];
    /// weights sum to one within [`WEIGHT_SUM_TOL`]; the probability of
    /// occupying level `cutoff` in either mode stays below `tail_bound`.
    pub fn from_components(
        cutoff: usize,
        components: Vec<PureComponent>,
        tail_bound: f64,
    ) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidParameter(
                "cutoff must be at least 1".into(),
            ));
        }
        if tail_bound.is_nan() || tail_bound <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tail bound must be positive, got {tail_bound}"
            )));
        }
        if components.is_empty() {
            return Err(Error::InvalidParameter(
                "state needs at least one component".into(),
            ));
        }
        let dim = (cutoff + 1) * (cutoff + 1);
        let mut weight_sum = 0.0;
        for (i, c) in components.iter().enumerate() {
            if c.amplitudes.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "component {i}: expected {dim} amplitudes for cutoff {cutoff}, got {}",
                    c.amplitudes.len()
                )));
            }
            if c.weight.is_nan() || c.weight <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "component {i}: weight must be positive, got {}",
                    c.weight
                )));
            }
            let norm_sq: f64 = c.amplitudes.iter().map(|a| a.norm_sqr()).sum();
            if (norm_sq.sqrt() - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "component {i}: amplitude vector has norm {} (must be 1 within {NORM_TOL})",
                    norm_sq.sqrt()
                )));
            }
            weight_sum += c.weight;
        }
        if (weight_sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {weight_sum} (must be 1 within {WEIGHT_SUM_TOL})"
            )));
        }
        let state = Self {
            cutoff,
            components,
            mode_labels: ('a', 'b'),
            tail_bound,
            norm_defect: 0.0,
        };
        let tail = state.top_level_mass();
        if tail > tail_bound {
            return Err(Error::CutoffTooSmall(format!(
                "probability {tail:.3e} at truncation level {cutoff} exceeds tail bound {tail_bound:.3e}"
            )));
        }
        Ok(state)
    }

    /// A single pure state with weight one.
    pub fn pure(cutoff: usize, amplitudes: Vec<Complex64>, tail_bound: f64) -> Result<Self> {
        Self::from_components(
            cutoff,
            vec![PureComponent {
                weight: 1.0,
                amplitudes,
            }],
            tail_bound,
        )
    }

    /// The two-mode vacuum at the given cutoff.
    pub fn vacuum(cutoff: usize) -> Self {
        let dim = (cutoff + 1) * (cutoff + 1);
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self {
            cutoff,
            components: vec![PureComponent {
                weight: 1.0,
                amplitudes,
            }],
            mode_labels: ('a', 'b'),
            tail_bound: DEFAULT_TAIL_BOUND,
            norm_defect: 0.0,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn components(&self) -> &[PureComponent] {
        &self.components
    }

    pub fn mode_labels(&self) -> (char, char) {
        self.mode_labels
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn norm_defect(&self) -> f64 {
        self.norm_defect
    }

    pub(crate) fn add_norm_defect(&mut self, defect: f64) {
        self.norm_defect += defect;
    }

    pub(crate) fn components_mut(&mut self) -> &mut Vec<PureComponent> {
        &mut self.components
    }

    /// Flat index of the basis ket `|j, k⟩`.
    #[inline]
    pub fn idx(&self, j: usize, k: usize) -> usize {
        j * (self.cutoff + 1) + k
    }

    /// Probability that the given mode occupies a level `≥ level`.
    pub fn mode_mass_at_or_above(&self, mode: Mode, level: usize) -> f64 {
        let d = self.cutoff;
        let mut mass = 0.0;
        for c in &self.components {
            for j in 0..=d {
                for k in 0..=d {
                    let occupied = match mode {
                        Mode::A => j,
                        Mode::B => k,
                    };
                    if occupied >= level {
                        mass += c.weight * c.amplitudes[j * (d + 1) + k].norm_sqr();
                    }
                }
            }
        }
        mass
    }

    /// Probability of occupying the top truncation level in either mode.
    pub fn top_level_mass(&self) -> f64 {
        let d = self.cutoff;
        let mut mass = 0.0;
        for c in &self.components {
            for j in 0..=d {
                mass += c.weight * c.amplitudes[j * (d + 1) + d].norm_sqr();
                if j < d {
                    // avoid double-counting |D, D⟩
                    mass += c.weight * c.amplitudes[d * (d + 1) + j].norm_sqr();
                }
            }
        }
        mass
    }

    /// Joint photon-number distribution `P(j, k)`, row-major `(D+1)²`.
    pub fn photon_pmf(&self) -> Vec<f64> {
        let dim = (self.cutoff + 1) * (self.cutoff + 1);
        let mut pmf = vec![0.0; dim];
        for c in &self.components {
            for (slot, amp) in pmf.iter_mut().zip(&c.amplitudes) {
                *slot += c.weight * amp.norm_sqr();
            }
        }
        pmf
    }

    /// Distribution of the total photon number `j + k`, length `2D+1`.
    pub fn total_photon_pmf(&self) -> Vec<f64> {
        let d = self.cutoff;
        let mut pmf = vec![0.0; 2 * d + 1];
        for c in &self.components {
            for j in 0..=d {
                for k in 0..=d {
                    pmf[j + k] += c.weight * c.amplitudes[j * (d + 1) + k].norm_sqr();
                }
            }
        }
        pmf
    }

    /// Marginal photon-number distribution of one mode.
    pub fn mode_pmf(&self, mode: Mode) -> Vec<f64> {
        let d = self.cutoff;
        let mut pmf = vec![0.0; d + 1];
        for c in &self.components {
            for j in 0..=d {
                for k in 0..=d {
                    let level = match mode {
                        Mode::A => j,
                        Mode::B => k,
                    };
                    pmf[level] += c.weight * c.amplitudes[j * (d + 1) + k].norm_sqr();
                }
            }
        }
        pmf
    }

    /// Re-express the state at a different cutoff.
    ///
    /// Enlarging pads with zero amplitudes and is exact. Shrinking removes
    /// the discarded mass; it fails with [`Error::CutoffTooSmall`] if that
    /// mass (or the resulting top-level occupancy) exceeds the tail bound.
    pub fn with_cutoff(&self, new_cutoff: usize) -> Result<Self> {
        if new_cutoff == 0 {
            return Err(Error::InvalidParameter(
                "cutoff must be at least 1".into(),
            ));
        }
        if new_cutoff == self.cutoff {
            return Ok(self.clone());
        }
        let old = self.cutoff;
        let dim = (new_cutoff + 1) * (new_cutoff + 1);
        let mut components = Vec::with_capacity(self.components.len());
        let mut trimmed_total = 0.0;
        for c in &self.components {
            let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
            let mut kept_sq = 0.0;
            for j in 0..=old.min(new_cutoff) {
                for k in 0..=old.min(new_cutoff) {
                    let a = c.amplitudes[j * (old + 1) + k];
                    amplitudes[j * (new_cutoff + 1) + k] = a;
                    kept_sq += a.norm_sqr();
                }
            }
            if new_cutoff < old {
                let norm_sq: f64 = c.amplitudes.iter().map(|a| a.norm_sqr()).sum();
                trimmed_total += c.weight * (norm_sq - kept_sq);
                let scale = kept_sq.sqrt();
                if scale <= 0.0 {
                    return Err(Error::CutoffTooSmall(format!(
                        "component loses all amplitude when trimming to cutoff {new_cutoff}"
                    )));
                }
                for a in &mut amplitudes {
                    *a /= scale;
                }
            }
            components.push(PureComponent {
                weight: c.weight,
                amplitudes,
            });
        }
        if trimmed_total > self.tail_bound {
            return Err(Error::CutoffTooSmall(format!(
                "trimming to cutoff {new_cutoff} discards probability {trimmed_total:.3e} > tail bound {:.3e}",
                self.tail_bound
            )));
        }
        let mut state = Self {
            cutoff: new_cutoff,
            components,
            mode_labels: self.mode_labels,
            tail_bound: self.tail_bound,
            norm_defect: self.norm_defect + trimmed_total,
        };
        let tail = state.top_level_mass();
        if tail > state.tail_bound {
            return Err(Error::CutoffTooSmall(format!(
                "cutoff {new_cutoff} leaves probability {tail:.3e} at the top level"
            )));
        }
        // Trimming is a tail operation inside the bound, not a defect of a
        // unitary, but we still track the removed mass for transparency.
        if new_cutoff >= old {
            state.norm_defect = self.norm_defect;
        }
        Ok(state)
    }
}

/// A normally ordered two-mode ladder monomial `a†ⁿ aᵐ b†ᵏ bˡ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeMonomial {
    /// Power of `a†`.
    pub n: usize,
    /// Power of `a`.
    pub m: usize,
    /// Power of `b†`.
    pub k: usize,
    /// Power of `b`.
    pub l: usize,
}

impl ModeMonomial {
    pub fn new(n: usize, m: usize, k: usize, l: usize) -> Self {
        Self { n, m, k, l }
    }

    /// Total operator order `n + m + k + l`.
    pub fn order(&self) -> usize {
        self.n + self.m + self.k + self.l
    }

    /// The Hermitian adjoint monomial: `(a†ⁿaᵐb†ᵏbˡ)† = a†ᵐaⁿb†ˡbᵏ`.
    pub fn adjoint(&self) -> Self {
        Self {
            n: self.m,
            m: self.n,
            k: self.l,
            l: self.k,
        }
    }
}

/// Apply `a^times ⊗ b^times_b` (pure lowering) to an amplitude vector.
fn lower(amplitudes: &[Complex64], cutoff: usize, a_times: usize, b_times: usize) -> Vec<Complex64> {
    let d = cutoff;
    let side = d + 1;
    let mut cur = amplitudes.to_vec();
    for _ in 0..a_times {
        for j in 0..side {
            for k in 0..side {
                cur[j * side + k] = if j < d {
                    ((j + 1) as f64).sqrt() * cur[(j + 1) * side + k]
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
        }
    }
    for _ in 0..b_times {
        for j in 0..side {
            for k in 0..side {
                cur[j * side + k] = if k < d {
                    ((k + 1) as f64).sqrt() * cur[j * side + k + 1]
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
        }
    }
    cur
}

/// Exact expectation `⟨a†ⁿ aᵐ b†ᵏ bˡ⟩` on a truncated state.
///
/// Evaluated as `Σᵢ wᵢ ⟨aⁿbᵏ ψᵢ | aᵐbˡ ψᵢ⟩`: both ladder strings act purely
/// by lowering, so the value is exact for the stored state — no amplitude
/// ever moves above the cutoff.
///
/// Errors:
/// * [`Error::CutoffTooSmall`] if `n + m > D` or `k + l > D`, or if the
///   state keeps more than its tail bound of probability in the
///   `max(n, m)` (resp. `max(k, l)`) levels directly below the cutoff —
///   in that case the truncated moment is not a faithful stand-in for the
///   untruncated one.
pub fn expectation(state: &TruncatedState, mono: ModeMonomial) -> Result<Complex64> {
    let d = state.cutoff();
    if mono.n + mono.m > d || mono.k + mono.l > d {
        return Err(Error::CutoffTooSmall(format!(
            "monomial (n={}, m={}, k={}, l={}) needs cutoff ≥ {}, state has {d}",
            mono.n,
            mono.m,
            mono.k,
            mono.l,
            (mono.n + mono.m).max(mono.k + mono.l)
        )));
    }
    let h_a = mono.n.max(mono.m);
    let h_b = mono.k.max(mono.l);
    for (mode, h) in [(Mode::A, h_a), (Mode::B, h_b)] {
        if h == 0 {
            continue;
        }
        let mass = state.mode_mass_at_or_above(mode, d + 1 - h);
        if mass > state.tail_bound() {
            let label = match mode {
                Mode::A => state.mode_labels.0,
                Mode::B => state.mode_labels.1,
            };
            return Err(Error::CutoffTooSmall(format!(
                "mode {label} holds probability {mass:.3e} in the top {h} levels below cutoff {d}; \
                 order-{h} moments are unreliable (tail bound {:.3e})",
                state.tail_bound()
            )));
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for c in state.components() {
        let bra = lower(&c.amplitudes, d, mono.n, mono.k);
        let ket = lower(&c.amplitudes, d, mono.m, mono.l);
        let mut inner = Complex64::new(0.0, 0.0);
        for (x, y) in bra.iter().zip(&ket) {
            inner += x.conj() * y;
        }
        total += c.weight * inner;
    }
    Ok(total)
}

/// Index bookkeeping for the partial transpose on the second mode: the
/// expectation of a four-operator string on mode `b` with exponent tuple
/// `(s, r, k, l)` — i.e. `b†ˢ bʳ b†ᵏ bˡ` — equals, on the partially
/// transposed state, the expectation of the reversed tuple
/// `(l, k, r, s)`. No matrix is ever transposed; callers just re-index.
pub fn partial_transpose_indices(
    t: (usize, usize, usize, usize),
) -> (usize, usize, usize, usize) {
    (t.3, t.2, t.1, t.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// |α⟩⊗|0⟩ truncated at `d`, amplitudes renormalised.
    fn coherent_vacuum(alpha: Complex64, d: usize) -> TruncatedState {
        let side = d + 1;
        let mut amps = vec![c(0.0, 0.0); side * side];
        let mut coeff = c(1.0, 0.0);
        let mut norm_sq = 0.0;
        for j in 0..side {
            amps[j * side] = coeff;
            norm_sq += coeff.norm_sqr();
            coeff = coeff * alpha / ((j + 1) as f64).sqrt();
        }
        let scale = norm_sq.sqrt();
        for a in &mut amps {
            *a /= scale;
        }
        TruncatedState::pure(d, amps, DEFAULT_TAIL_BOUND).unwrap()
    }

    fn fock(d: usize, j: usize, k: usize) -> TruncatedState {
        let side = d + 1;
        let mut amps = vec![c(0.0, 0.0); side * side];
        amps[j * side + k] = c(1.0, 0.0);
        TruncatedState::pure(d, amps, DEFAULT_TAIL_BOUND).unwrap()
    }

    #[test]
    fn vacuum_moments() {
        let v = TruncatedState::vacuum(3);
        let one = expectation(&v, ModeMonomial::new(0, 0, 0, 0)).unwrap();
        assert_abs_diff_eq!(one.re, 1.0, epsilon = 1e-15);
        let n_a = expectation(&v, ModeMonomial::new(1, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(n_a.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fock_state_moments() {
        let s = fock(6, 2, 1);
        let n_a = expectation(&s, ModeMonomial::new(1, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(n_a.re, 2.0, epsilon = 1e-12);
        let n_b = expectation(&s, ModeMonomial::new(0, 0, 1, 1)).unwrap();
        assert_abs_diff_eq!(n_b.re, 1.0, epsilon = 1e-12);
        // ⟨a†²a²⟩ = j(j−1) = 2 on |2⟩.
        let f2 = expectation(&s, ModeMonomial::new(2, 2, 0, 0)).unwrap();
        assert_abs_diff_eq!(f2.re, 2.0, epsilon = 1e-12);
        let joint = expectation(&s, ModeMonomial::new(1, 1, 1, 1)).unwrap();
        assert_abs_diff_eq!(joint.re, 2.0, epsilon = 1e-12);
        // Off-diagonal monomials vanish on a number state.
        let ab = expectation(&s, ModeMonomial::new(0, 1, 0, 1)).unwrap();
        assert_abs_diff_eq!(ab.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn coherent_moments() {
        let alpha = c(0.5, 0.3);
        let s = coherent_vacuum(alpha, 30);
        let a = expectation(&s, ModeMonomial::new(0, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(a.re, alpha.re, epsilon = 1e-10);
        assert_abs_diff_eq!(a.im, alpha.im, epsilon = 1e-10);
        let n = expectation(&s, ModeMonomial::new(1, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(n.re, alpha.norm_sqr(), epsilon = 1e-10);
        let f2 = expectation(&s, ModeMonomial::new(2, 2, 0, 0)).unwrap();
        assert_abs_diff_eq!(f2.re, alpha.norm_sqr().powi(2), epsilon = 1e-10);
        let a2 = expectation(&s, ModeMonomial::new(0, 2, 0, 0)).unwrap();
        let want = alpha * alpha;
        assert_abs_diff_eq!(a2.re, want.re, epsilon = 1e-10);
        assert_abs_diff_eq!(a2.im, want.im, epsilon = 1e-10);
    }

    #[test]
    fn cross_mode_superposition_moment() {
        // (|2,0⟩ + |0,2⟩)/√2: ⟨a²b†²⟩ = 2!·(1/2) = 1.
        let d = 4;
        let side = d + 1;
        let mut amps = vec![c(0.0, 0.0); side * side];
        amps[2 * side] = c(1.0 / 2f64.sqrt(), 0.0);
        amps[2] = c(1.0 / 2f64.sqrt(), 0.0);
        let s = TruncatedState::pure(d, amps, DEFAULT_TAIL_BOUND).unwrap();
        let v = expectation(&s, ModeMonomial::new(0, 2, 2, 0)).unwrap();
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn adjoint_monomial_conjugates() {
        let s = coherent_vacuum(c(0.4, 0.2), 24);
        let m = ModeMonomial::new(1, 2, 0, 0);
        let v = expectation(&s, m).unwrap();
        let v_adj = expectation(&s, m.adjoint()).unwrap();
        assert_abs_diff_eq!(v.re, v_adj.re, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, -v_adj.im, epsilon = 1e-12);
    }

    #[test]
    fn order_beyond_cutoff_is_rejected() {
        let s = fock(3, 1, 0);
        let err = expectation(&s, ModeMonomial::new(2, 2, 0, 0)).unwrap_err();
        assert!(matches!(err, Error::CutoffTooSmall(_)));
    }

    #[test]
    fn heavy_tail_near_cutoff_is_rejected() {
        // A coherent state with mean photon number 4 at cutoff 8 keeps
        // noticeable mass in the top levels; order-2 moments must refuse.
        let side = 9usize;
        let alpha = 2.0;
        let mut amps = vec![c(0.0, 0.0); side * side];
        let mut coeff = 1.0;
        let mut norm_sq = 0.0;
        for j in 0..side {
            amps[j * side] = c(coeff, 0.0);
            norm_sq += coeff * coeff;
            coeff *= alpha / ((j + 1) as f64).sqrt();
        }
        let scale = norm_sq.sqrt();
        for a in &mut amps {
            *a /= scale;
        }
        let s = TruncatedState::pure(8, amps, 0.05).unwrap();
        let err = expectation(&s, ModeMonomial::new(2, 2, 0, 0)).unwrap_err();
        assert!(matches!(err, Error::CutoffTooSmall(_)));
    }

    #[test]
    fn partial_transpose_index_examples() {
        assert_eq!(partial_transpose_indices((1, 0, 0, 1)), (1, 0, 0, 1));
        assert_eq!(partial_transpose_indices((2, 1, 1, 0)), (0, 1, 1, 2));
    }

    #[test]
    fn pmf_and_expectation_agree() {
        let s = coherent_vacuum(c(0.7, 0.0), 30);
        let pmf = s.photon_pmf();
        let side = s.cutoff() + 1;
        let mut mean_j = 0.0;
        for j in 0..side {
            for k in 0..side {
                mean_j += j as f64 * pmf[j * side + k];
            }
        }
        let n = expectation(&s, ModeMonomial::new(1, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(mean_j, n.re, epsilon = 1e-12);
        let total: f64 = pmf.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn cutoff_roundtrip() {
        let s = coherent_vacuum(c(0.5, 0.1), 20);
        let padded = s.with_cutoff(30).unwrap();
        assert_eq!(padded.cutoff(), 30);
        let n0 = expectation(&s, ModeMonomial::new(1, 1, 0, 0)).unwrap();
        let n1 = expectation(&padded, ModeMonomial::new(1, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(n0.re, n1.re, epsilon = 1e-14);
        // Trimming back within the tail bound is fine...
        let trimmed = padded.with_cutoff(20).unwrap();
        assert_eq!(trimmed.cutoff(), 20);
        // ...but cutting into the bulk of the state is an error.
        let err = padded.with_cutoff(2).unwrap_err();
        assert!(matches!(err, Error::CutoffTooSmall(_)));
    }

    #[test]
    fn constructor_rejects_bad_mixtures() {
        let side = 4usize;
        let mut amps = vec![c(0.0, 0.0); side * side];
        amps[0] = c(1.0, 0.0);
        // Weight sum ≠ 1.
        let err = TruncatedState::from_components(
            3,
            vec![PureComponent {
                weight: 0.7,
                amplitudes: amps.clone(),
            }],
            DEFAULT_TAIL_BOUND,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        // Non-unit component.
        let mut bad = amps.clone();
        bad[0] = c(0.5, 0.0);
        let err =
            TruncatedState::pure(3, bad, DEFAULT_TAIL_BOUND).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        // Mass parked on the top level.
        let mut top = vec![c(0.0, 0.0); side * side];
        top[3 * side] = c(1.0, 0.0);
        let err = TruncatedState::pure(3, top, DEFAULT_TAIL_BOUND).unwrap_err();
        assert!(matches!(err, Error::CutoffTooSmall(_)));
    }
}
