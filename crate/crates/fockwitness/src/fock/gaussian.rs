//! Gaussian unitaries applied directly to truncated amplitude vectors.
//!
//! Phase rotations are exact diagonal phase masks. Displacement and
//! single-mode squeezing exponentiate the truncated generator through a
//! Hermitian eigendecomposition, which yields an exactly unitary matrix on
//! the truncated space; fidelity to the untruncated operation is then
//! policed by a tail-mass check on the result. Beamsplitters conserve the
//! total photon number, so they are applied sector by sector with a stable
//! column recurrence; amplitudes a sector would push past the per-mode
//! cutoff are removed, recorded as a norm defect, and the state is
//! renormalised. A defect above [`MAX_NORM_DEFECT`] means the cutoff
//! cannot host the operation and is reported as an error.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{Mode, TruncatedState, MAX_NORM_DEFECT};

/// A Gaussian unitary acting on one mode or on the mode pair.
#[derive(Debug, Clone)]
pub enum GaussianOp {
    /// Phase-space rotation: in the Heisenberg picture the mode operator
    /// picks up `a → a·e^{−iθ}`, i.e. `x → x·cosθ + p·sinθ`.
    Rotate { mode: Mode, theta: f64 },
    /// Displacement `exp(α a† − α* a)`.
    Displace { mode: Mode, alpha: Complex64 },
    /// Single-mode squeezing parametrised by the width factor `s > 0`: the
    /// position variance of the transformed state scales as `Var(x) → s²·Var(x)`
    /// (so `s < 1` squeezes position, `s > 1` stretches it).
    Squeeze { mode: Mode, width: f64 },
    /// Two-mode mixing with transmissivity `T ∈ [0, 1]` and phase `φ` on
    /// the first input: outputs `c₁ = √T e^{iφ} a + √(1−T) b`,
    /// `c₂ = √(1−T) e^{iφ} a − √T b`, stored back into modes (a, b).
    Beamsplit { transmissivity: f64, phase: f64 },
}

/// Apply a Gaussian unitary, renormalising and recording any truncation
/// defect on the returned state.
///
/// Errors with [`Error::CutoffTooSmall`] if the accumulated defect of this
/// application exceeds [`MAX_NORM_DEFECT`] or if the result parks more
/// than the state's tail bound at the truncation level.
pub fn apply_gaussian_op(state: &TruncatedState, op: &GaussianOp) -> Result<TruncatedState> {
    let mut out = state.clone();
    let defect = match op {
        GaussianOp::Rotate { mode, theta } => {
            apply_rotation(&mut out, *mode, *theta);
            0.0
        }
        GaussianOp::Displace { mode, alpha } => {
            let u = displacement_matrix(state.cutoff(), *alpha);
            apply_single_mode_matrix(&mut out, *mode, &u)
        }
        GaussianOp::Squeeze { mode, width } => {
            if !(width.is_finite() && *width > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "squeeze width must be positive and finite, got {width}"
                )));
            }
            let u = squeeze_matrix(state.cutoff(), *width);
            apply_single_mode_matrix(&mut out, *mode, &u)
        }
        GaussianOp::Beamsplit {
            transmissivity,
            phase,
        } => {
            if !(0.0..=1.0).contains(transmissivity) {
                return Err(Error::InvalidParameter(format!(
                    "beamsplitter transmissivity must lie in [0, 1], got {transmissivity}"
                )));
            }
            apply_beamsplit(&mut out, *transmissivity, *phase)
        }
    };
    if defect > MAX_NORM_DEFECT {
        return Err(Error::CutoffTooSmall(format!(
            "operation lost probability {defect:.3e} past the cutoff {} (limit {MAX_NORM_DEFECT:.0e})",
            state.cutoff()
        )));
    }
    out.add_norm_defect(defect);
    let tail = out.top_level_mass();
    if tail > out.tail_bound() {
        return Err(Error::CutoffTooSmall(format!(
            "operation leaves probability {tail:.3e} at truncation level {} (tail bound {:.3e})",
            out.cutoff(),
            out.tail_bound()
        )));
    }
    Ok(out)
}

/// Convenience: apply a sequence of operations in order.
pub fn apply_gaussian_ops(state: &TruncatedState, ops: &[GaussianOp]) -> Result<TruncatedState> {
    let mut cur = state.clone();
    for op in ops {
        cur = apply_gaussian_op(&cur, op)?;
    }
    Ok(cur)
}

fn apply_rotation(state: &mut TruncatedState, mode: Mode, theta: f64) {
    let d = state.cutoff();
    let side = d + 1;
    // Phases for U = exp(−iθ n̂): level n picks up e^{−inθ}.
    let phases: Vec<Complex64> = (0..side)
        .map(|n| Complex64::from_polar(1.0, -(n as f64) * theta))
        .collect();
    for comp in state.components_mut() {
        for j in 0..side {
            for k in 0..side {
                let phase = match mode {
                    Mode::A => phases[j],
                    Mode::B => phases[k],
                };
                comp.amplitudes[j * side + k] *= phase;
            }
        }
    }
}

/// `exp(α a† − α* a)` on levels `0..=cutoff`, exactly unitary on the
/// truncated space.
pub(crate) fn displacement_matrix(cutoff: usize, alpha: Complex64) -> DMatrix<Complex64> {
    let side = cutoff + 1;
    // H = i(α a† − α* a) is Hermitian; U = exp(−iH).
    let mut h = DMatrix::<Complex64>::zeros(side, side);
    let i = Complex64::new(0.0, 1.0);
    for j in 0..side.saturating_sub(1) {
        let root = ((j + 1) as f64).sqrt();
        h[(j + 1, j)] = i * alpha * root;
        h[(j, j + 1)] = -i * alpha.conj() * root;
    }
    unitary_from_hermitian_generator(h)
}

/// `S(r) = exp(r/2 (a² − a†²))` with `r = −ln(width)` so that the position
/// variance scales by `width²`.
pub(crate) fn squeeze_matrix(cutoff: usize, width: f64) -> DMatrix<Complex64> {
    let side = cutoff + 1;
    let r = -width.ln();
    let mut h = DMatrix::<Complex64>::zeros(side, side);
    let i = Complex64::new(0.0, 1.0);
    for j in 0..side.saturating_sub(2) {
        let root = (((j + 1) * (j + 2)) as f64).sqrt();
        h[(j, j + 2)] = i * (r / 2.0) * root;
        h[(j + 2, j)] = -i * (r / 2.0) * root;
    }
    unitary_from_hermitian_generator(h)
}

/// Given Hermitian `H`, return `exp(−iH)` via eigendecomposition.
fn unitary_from_hermitian_generator(h: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let side = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut phased = eig.eigenvectors.clone();
    // Scale column c by e^{−iλ_c}, then multiply by E†.
    for c in 0..side {
        let phase = Complex64::from_polar(1.0, -eig.eigenvalues[c]);
        for r in 0..side {
            phased[(r, c)] *= phase;
        }
    }
    phased * eig.eigenvectors.adjoint()
}

/// Apply a single-mode matrix along one axis of every component; returns
/// the weighted probability lost to non-unitarity (≈ rounding only, since
/// the matrix is unitary on the truncated space).
fn apply_single_mode_matrix(
    state: &mut TruncatedState,
    mode: Mode,
    u: &DMatrix<Complex64>,
) -> f64 {
    let d = state.cutoff();
    let side = d + 1;
    let mut defect = 0.0;
    for comp in state.components_mut() {
        let mut out = vec![Complex64::new(0.0, 0.0); side * side];
        match mode {
            Mode::A => {
                for s in 0..side {
                    for j in 0..side {
                        let w = u[(s, j)];
                        if w.norm_sqr() == 0.0 {
                            continue;
                        }
                        for k in 0..side {
                            out[s * side + k] += w * comp.amplitudes[j * side + k];
                        }
                    }
                }
            }
            Mode::B => {
                for j in 0..side {
                    for t in 0..side {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for k in 0..side {
                            acc += u[(t, k)] * comp.amplitudes[j * side + k];
                        }
                        out[j * side + t] = acc;
                    }
                }
            }
        }
        let norm_sq: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        defect += comp.weight * (1.0 - norm_sq).max(0.0);
        let scale = norm_sq.sqrt();
        if scale > 0.0 {
            for a in &mut out {
                *a /= scale;
            }
        }
        comp.amplitudes = out;
    }
    defect
}

/// Photon-number-conserving two-mode mixing, sector by sector.
fn apply_beamsplit(state: &mut TruncatedState, t: f64, phase: f64) -> f64 {
    let d = state.cutoff();
    let side = d + 1;
    let mut defect = 0.0;
    for comp in state.components_mut() {
        let mut out = vec![Complex64::new(0.0, 0.0); side * side];
        let mut kept_sq = 0.0;
        let mut input_sq = 0.0;
        for n in 0..=(2 * d) {
            let j_min = n.saturating_sub(d);
            let j_max = n.min(d);
            // Sector input coefficients v[j] for |j, n−j⟩.
            let mut any = false;
            let mut v = vec![Complex64::new(0.0, 0.0); n + 1];
            for (j, slot) in v.iter_mut().enumerate().take(j_max + 1).skip(j_min) {
                let a = comp.amplitudes[j * side + (n - j)];
                if a.norm_sqr() > 0.0 {
                    any = true;
                }
                *slot = a;
                input_sq += a.norm_sqr();
            }
            if !any {
                continue;
            }
            let cols = beamsplit_sector_columns(n, t, phase);
            // Output sector vector over s = photons in the first output.
            let mut w = vec![Complex64::new(0.0, 0.0); n + 1];
            for j in j_min..=j_max {
                if v[j].norm_sqr() == 0.0 {
                    continue;
                }
                for s in 0..=n {
                    w[s] += cols[j][s] * v[j];
                }
            }
            for (s, amp) in w.iter().enumerate() {
                if s <= d && n - s <= d {
                    out[s * side + (n - s)] = *amp;
                    kept_sq += amp.norm_sqr();
                }
            }
        }
        defect += comp.weight * (input_sq - kept_sq).max(0.0);
        let scale = kept_sq.sqrt();
        if scale > 0.0 {
            for a in &mut out {
                *a /= scale;
            }
        }
        comp.amplitudes = out;
    }
    defect
}

/// Columns of the sector-`n` beamsplitter matrix: `cols[j][s]` is the
/// amplitude of output `|s, n−s⟩` given input `|j, n−j⟩`.
///
/// Column 0 comes from expanding `b†ⁿ|0⟩` in the outputs; each next column
/// applies the tridiagonal operator `a†b` (expressed in output operators)
/// and divides by `√((j+1)(n−j))`. The recurrence is numerically stable:
/// it never forms the large alternating sums that a direct closed-form
/// element evaluation would.
fn beamsplit_sector_columns(n: usize, t: f64, phase: f64) -> Vec<Vec<Complex64>> {
    let rt = t.sqrt();
    let rr = (1.0 - t).sqrt();
    let step_phase = Complex64::from_polar(1.0, phase);
    let mut cols = Vec::with_capacity(n + 1);
    // col₀[s] = √C(n,s) rr^s (−rt)^{n−s}, built multiplicatively.
    let mut col0 = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut log_binom = 0.0f64; // ln C(n, s)
    for (s, slot) in col0.iter_mut().enumerate() {
        if s > 0 {
            log_binom += (((n - s + 1) as f64) / (s as f64)).ln();
        }
        let mag = (0.5 * log_binom).exp()
            * rr.powi(s as i32)
            * rt.powi((n - s) as i32);
        let sign = if (n - s) % 2 == 1 { -1.0 } else { 1.0 };
        *slot = Complex64::new(sign * mag, 0.0);
    }
    cols.push(col0);
    for j in 0..n {
        let prev = &cols[j];
        let mut next = vec![Complex64::new(0.0, 0.0); n + 1];
        let norm = (((j + 1) * (n - j)) as f64).sqrt();
        for s in 0..=n {
            // (a†b in output operators) applied to Σ x_s |s, n−s⟩:
            //   √(T(1−T))(2s−n)·x_s − T√(s(n−s+1))·x_{s−1}
            //   + (1−T)√((s+1)(n−s))·x_{s+1}, all times e^{iφ}.
            let mut acc = rt * rr * ((2 * s) as f64 - n as f64) * prev[s];
            if s > 0 {
                acc -= t * ((s * (n - s + 1)) as f64).sqrt() * prev[s - 1];
            }
            if s < n {
                acc += (1.0 - t) * (((s + 1) * (n - s)) as f64).sqrt() * prev[s + 1];
            }
            next[s] = step_phase * acc / norm;
        }
        cols.push(next);
    }
    cols
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation, ModeMonomial, DEFAULT_TAIL_BOUND};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fock(d: usize, j: usize, k: usize) -> TruncatedState {
        let side = d + 1;
        let mut amps = vec![c(0.0, 0.0); side * side];
        amps[j * side + k] = c(1.0, 0.0);
        TruncatedState::pure(d, amps, DEFAULT_TAIL_BOUND).unwrap()
    }

    #[test]
    fn displacement_builds_coherent_state() {
        let alpha = c(0.8, 0.2);
        let v = TruncatedState::vacuum(30);
        let s = apply_gaussian_op(
            &v,
            &GaussianOp::Displace {
                mode: Mode::A,
                alpha,
            },
        )
        .unwrap();
        // Compare the first few levels with e^{−|α|²/2} αʲ/√(j!).
        let side = 31;
        let norm = (-alpha.norm_sqr() / 2.0).exp();
        let mut expect = c(norm, 0.0);
        let amps = &s.components()[0].amplitudes;
        // Fix the irrelevant global phase by aligning level 0.
        let gauge = amps[0] / expect;
        for j in 0..10 {
            let got = amps[j * side] / gauge;
            assert_abs_diff_eq!(got.re, expect.re, epsilon = 1e-9);
            assert_abs_diff_eq!(got.im, expect.im, epsilon = 1e-9);
            expect = expect * alpha / ((j + 1) as f64).sqrt();
        }
        assert!(s.norm_defect() < 1e-10);
        let mean = expectation(&s, ModeMonomial::new(0, 1, 0, 0)).unwrap();
        assert_abs_diff_eq!(mean.re, alpha.re, epsilon = 1e-9);
        assert_abs_diff_eq!(mean.im, alpha.im, epsilon = 1e-9);
    }

    #[test]
    fn displacement_past_cutoff_is_rejected() {
        let v = TruncatedState::vacuum(3);
        let err = apply_gaussian_op(
            &v,
            &GaussianOp::Displace {
                mode: Mode::A,
                alpha: c(5.0, 0.0),
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::CutoffTooSmall(_)));
    }

    #[test]
    fn squeeze_scales_position_variance() {
        for width in [0.5, 1.7] {
            // Wide workspace: exponentiating the truncated generator
            // reflects a little amplitude off the boundary, so leave the
            // strongly squeezed tail plenty of room.
            let v = TruncatedState::vacuum(56);
            let s = apply_gaussian_op(
                &v,
                &GaussianOp::Squeeze {
                    mode: Mode::A,
                    width,
                },
            )
            .unwrap();
            // Var(x) = ⟨a†a⟩ + 1/2 + Re⟨a²⟩ for a zero-mean state.
            let n = expectation(&s, ModeMonomial::new(1, 1, 0, 0)).unwrap().re;
            let a2 = expectation(&s, ModeMonomial::new(0, 2, 0, 0)).unwrap().re;
            let var_x = n + 0.5 + a2;
            let var_p = n + 0.5 - a2;
            assert_abs_diff_eq!(var_x, width * width * 0.5, epsilon = 1e-9);
            assert_abs_diff_eq!(var_p, 0.5 / (width * width), epsilon = 1e-9);
        }
    }

    #[test]
    fn rotation_rotates_coherent_amplitude() {
        let alpha = c(0.6, 0.0);
        let v = TruncatedState::vacuum(24);
        let s = apply_gaussian_op(
            &v,
            &GaussianOp::Displace {
                mode: Mode::B,
                alpha,
            },
        )
        .unwrap();
        let theta = 0.7;
        let r = apply_gaussian_op(
            &s,
            &GaussianOp::Rotate {
                mode: Mode::B,
                theta,
            },
        )
        .unwrap();
        let got = expectation(&r, ModeMonomial::new(0, 0, 0, 1)).unwrap();
        let want = alpha * Complex64::from_polar(1.0, -theta);
        assert_abs_diff_eq!(got.re, want.re, epsilon = 1e-9);
        assert_abs_diff_eq!(got.im, want.im, epsilon = 1e-9);
    }

    #[test]
    fn balanced_beamsplit_splits_single_photon() {
        let s = fock(4, 1, 0);
        let out = apply_gaussian_op(
            &s,
            &GaussianOp::Beamsplit {
                transmissivity: 0.5,
                phase: 0.0,
            },
        )
        .unwrap();
        let amps = &out.components()[0].amplitudes;
        let side = 5;
        assert_abs_diff_eq!(amps[side].re, 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(amps[1].re, 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert!(out.norm_defect() < 1e-12);
    }

    #[test]
    fn balanced_beamsplit_is_self_inverse() {
        // (a+b)/√2, (a−b)/√2 applied twice is the identity.
        let d = 12;
        let side = d + 1;
        let mut amps = vec![c(0.0, 0.0); side * side];
        amps[2 * side + 1] = c(0.6, 0.0);
        amps[side + 2] = c(0.0, 0.8);
        let s = TruncatedState::pure(d, amps.clone(), DEFAULT_TAIL_BOUND).unwrap();
        let bs = GaussianOp::Beamsplit {
            transmissivity: 0.5,
            phase: 0.0,
        };
        let twice = apply_gaussian_op(&apply_gaussian_op(&s, &bs).unwrap(), &bs).unwrap();
        for (got, want) in twice.components()[0].amplitudes.iter().zip(&amps) {
            assert_abs_diff_eq!(got.re, want.re, epsilon = 1e-10);
            assert_abs_diff_eq!(got.im, want.im, epsilon = 1e-10);
        }
    }

    #[test]
    fn beamsplit_conserves_total_photon_number() {
        let d = 10;
        let side = d + 1;
        let mut amps = vec![c(0.0, 0.0); side * side];
        amps[3 * side + 1] = c(0.5, 0.5);
        amps[2 * side + 2] = c(0.5, -0.5);
        let s = TruncatedState::pure(d, amps, DEFAULT_TAIL_BOUND).unwrap();
        let before = s.total_photon_pmf();
        let out = apply_gaussian_op(
            &s,
            &GaussianOp::Beamsplit {
                transmissivity: 0.3,
                phase: 1.1,
            },
        )
        .unwrap();
        let after = out.total_photon_pmf();
        for (x, y) in before.iter().zip(&after) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn beamsplit_matches_binomial_statistics() {
        // |n, 0⟩ through transmissivity T: first output is Binomial(n, T).
        let n = 5;
        let t = 0.37;
        let s = fock(8, n, 0);
        let out = apply_gaussian_op(
            &s,
            &GaussianOp::Beamsplit {
                transmissivity: t,
                phase: 0.4,
            },
        )
        .unwrap();
        let pmf = out.mode_pmf(Mode::A);
        let mut binom = 1.0; // C(n, s) t^s (1−t)^{n−s} built iteratively
        for (s_idx, &got) in pmf.iter().enumerate().take(n + 1) {
            if s_idx > 0 {
                binom *= ((n - s_idx + 1) as f64) / (s_idx as f64);
            }
            let want = binom * t.powi(s_idx as i32) * (1.0 - t).powi((n - s_idx) as i32);
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn dense_state_past_cutoff_reports_defect_error() {
        // |2,2⟩ at cutoff 2: the sector n = 4 output spills past the
        // cutoff. Constructed with a permissive tail bound so the defect
        // check (not the constructor) is what trips.
        let side = 3usize;
        let mut amps = vec![c(0.0, 0.0); side * side];
        amps[2 * side + 2] = c(1.0, 0.0);
        let s = TruncatedState::pure(2, amps, 2.0).unwrap();
        let err = apply_gaussian_op(
            &s,
            &GaussianOp::Beamsplit {
                transmissivity: 0.5,
                phase: 0.0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::CutoffTooSmall(_)));
    }
}
