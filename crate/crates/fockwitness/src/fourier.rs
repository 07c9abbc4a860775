//! Recovering moment products from phase-scanned detector correlators.
//!
//! Scanning the splitter phases `(φ, φ′)` over a uniform grid and
//! recording the count correlator `⟨s^{m′} t^{n′}⟩` at each point yields a
//! trigonometric polynomial whose frequencies are bounded by `(m′, n′)`.
//! Its two *top-frequency* Fourier coefficients factor into products of
//! single-state moments:
//!
//! * frequency `(+m′, +n′)`: `2^{−(m′+n′)} ⟨a^{m′} b^{n′}⟩₁ ⟨a†^{m′} b†^{n′}⟩₂`
//! * frequency `(+m′, −n′)`: `2^{−(m′+n′)} ⟨a^{m′} b†^{n′}⟩₁ ⟨a†^{m′} b^{n′}⟩₂`
//!
//! (raising/lowering powers of number operators only contribute to lower
//! frequencies, so raw count powers and factorial powers share these top
//! coefficients). A `(2m′+1) × (2n′+1)` grid is the minimal exact design;
//! anything denser is redundant and lets us *verify* bandlimitedness: any
//! out-of-band coefficient mass signals a modelling inconsistency and is
//! reported as [`Error::AliasingDetected`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::TruncatedState;
use crate::interferometer::{correlator, interfere, PhasePair};

/// Default ceiling on out-of-band Fourier mass, relative to the largest
/// grid value. Exact (noise-free) grids sit many orders below this.
pub const DEFAULT_ALIAS_TOL: f64 = 1e-9;

/// Minimal phase-grid dimensions `(U, V)` that make the top coefficients
/// of an `(m′, n′)` correlator exactly recoverable: `(2m′+1, 2n′+1)`.
pub fn plan_grid(m_prime: usize, n_prime: usize) -> Result<(usize, usize)> {
    if m_prime == 0 && n_prime == 0 {
        return Err(Error::InvalidParameter(
            "phase scan needs a nonconstant correlator: both exponents are zero".into(),
        ));
    }
    Ok((2 * m_prime + 1, 2 * n_prime + 1))
}

/// Count correlators tabulated on a uniform `U × V` phase grid
/// (`φ_u = 2πu/U`, `φ′_v = 2πv/V`), tagged with the exponents used.
#[derive(Debug, Clone)]
pub struct CorrelatorGrid {
    m_prime: usize,
    n_prime: usize,
    u: usize,
    v: usize,
    /// Row-major `u × v`.
    values: Vec<f64>,
}

impl CorrelatorGrid {
    /// Wrap precomputed (or estimated) correlator values. The grid must
    /// satisfy the sampling bound `U ≥ 2m′+1`, `V ≥ 2n′+1`.
    pub fn new(
        m_prime: usize,
        n_prime: usize,
        u: usize,
        v: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if m_prime + n_prime == 0 {
            return Err(Error::InvalidParameter(
                "correlator grid needs at least one positive exponent".into(),
            ));
        }
        if u < 2 * m_prime + 1 || v < 2 * n_prime + 1 {
            return Err(Error::InvalidParameter(format!(
                "grid {u}×{v} undersamples exponents ({m_prime}, {n_prime}); \
                 need at least {}×{}",
                2 * m_prime + 1,
                2 * n_prime + 1
            )));
        }
        if values.len() != u * v {
            return Err(Error::InvalidParameter(format!(
                "grid storage holds {} values, expected {u}×{v} = {}",
                values.len(),
                u * v
            )));
        }
        Ok(Self {
            m_prime,
            n_prime,
            u,
            v,
            values,
        })
    }

    /// Simulate the full scan: interfere the two states at every grid
    /// phase and record the `(m′, n′)` count correlator.
    pub fn from_states(
        state1: &TruncatedState,
        state2: &TruncatedState,
        m_prime: usize,
        n_prime: usize,
        u: usize,
        v: usize,
    ) -> Result<Self> {
        if u == 0 || v == 0 {
            return Err(Error::InvalidParameter(
                "phase grid dimensions must be positive".into(),
            ));
        }
        let mut values = Vec::with_capacity(u * v);
        for iu in 0..u {
            for iv in 0..v {
                let phases = PhasePair::new(
                    std::f64::consts::TAU * iu as f64 / u as f64,
                    std::f64::consts::TAU * iv as f64 / v as f64,
                );
                let pmf = interfere(state1, state2, phases)?;
                values.push(correlator(&pmf, m_prime, n_prime)?);
            }
        }
        Self::new(m_prime, n_prime, u, v, values)
    }

    pub fn exponents(&self) -> (usize, usize) {
        (self.m_prime, self.n_prime)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.u, self.v)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn phase_at(&self, iu: usize, iv: usize) -> PhasePair {
        PhasePair::new(
            std::f64::consts::TAU * iu as f64 / self.u as f64,
            std::f64::consts::TAU * iv as f64 / self.v as f64,
        )
    }

    /// Direct DFT bin:
    /// `ĉ(f₁, f₂) = (UV)⁻¹ Σ_{u,v} values[u,v] e^{−i(f₁φ_u + f₂φ′_v)}`.
    ///
    /// Exposed mainly for diagnostics; the witness pipeline consumes
    /// [`extract_top_coefficients`].
    pub fn fourier_coefficient(&self, f1: i64, f2: i64) -> Complex64 {
        let mut row_phase = Vec::with_capacity(self.u);
        for iu in 0..self.u {
            let ang = -std::f64::consts::TAU * (f1 * iu as i64) as f64 / self.u as f64;
            row_phase.push(Complex64::from_polar(1.0, ang));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for iv in 0..self.v {
            let ang = -std::f64::consts::TAU * (f2 * iv as i64) as f64 / self.v as f64;
            let col = Complex64::from_polar(1.0, ang);
            let mut col_acc = Complex64::new(0.0, 0.0);
            for (iu, phase) in row_phase.iter().enumerate() {
                col_acc += phase * self.values[iu * self.v + iv];
            }
            acc += col * col_acc;
        }
        acc / (self.u * self.v) as f64
    }
}

/// The two top-frequency readouts of a phase scan.
#[derive(Debug, Clone, Copy)]
pub struct TopCoefficients {
    /// `2^{m′+n′} ĉ(m′, +n′)` — equals `⟨a^{m′} b^{n′}⟩₁ ⟨a†^{m′} b†^{n′}⟩₂`.
    pub product_plus: Complex64,
    /// `2^{m′+n′} ĉ(m′, −n′)` — equals `⟨a^{m′} b†^{n′}⟩₁ ⟨a†^{m′} b^{n′}⟩₂`.
    pub product_minus: Complex64,
    /// Raw Fourier coefficient at `(m′, +n′)`.
    pub coeff_plus: Complex64,
    /// Raw Fourier coefficient at `(m′, −n′)`.
    pub coeff_minus: Complex64,
    /// Largest out-of-band coefficient magnitude relative to the largest
    /// grid value; zero on a minimal grid (no out-of-band bins exist).
    pub alias_residual: f64,
}

/// Extract the top-frequency moment products with the default
/// bandlimitedness tolerance.
pub fn extract_top_coefficients(grid: &CorrelatorGrid) -> Result<TopCoefficients> {
    extract_top_coefficients_with_tol(grid, DEFAULT_ALIAS_TOL)
}

/// As [`extract_top_coefficients`], with an explicit aliasing tolerance.
/// Pass `f64::INFINITY` for shot-noise-limited grids where out-of-band
/// mass is expected statistical noise rather than a modelling error.
pub fn extract_top_coefficients_with_tol(
    grid: &CorrelatorGrid,
    tol: f64,
) -> Result<TopCoefficients> {
    let (m_prime, n_prime) = grid.exponents();
    let (u, v) = grid.dims();
    let coeff_plus = grid.fourier_coefficient(m_prime as i64, n_prime as i64);
    let coeff_minus = grid.fourier_coefficient(m_prime as i64, -(n_prime as i64));
    let scale = 2f64.powi((m_prime + n_prime) as i32);

    // Oversampled grids expose bins beyond the physical band; their mass
    // must be numerically negligible.
    let mut alias_residual = 0.0f64;
    if u > 2 * m_prime + 1 || v > 2 * n_prime + 1 {
        let peak = grid
            .values()
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        for bu in 0..u {
            // Signed frequency for bin index bu.
            let f1 = if bu <= u / 2 {
                bu as i64
            } else {
                bu as i64 - u as i64
            };
            for bv in 0..v {
                let f2 = if bv <= v / 2 {
                    bv as i64
                } else {
                    bv as i64 - v as i64
                };
                if f1.unsigned_abs() as usize <= m_prime
                    && f2.unsigned_abs() as usize <= n_prime
                {
                    continue;
                }
                let mag = grid.fourier_coefficient(f1, f2).norm();
                alias_residual = alias_residual.max(mag / peak);
            }
        }
        if alias_residual > tol {
            return Err(Error::AliasingDetected(format!(
                "out-of-band Fourier mass {alias_residual:.3e} exceeds tolerance {tol:.3e} \
                 on a {u}×{v} grid for exponents ({m_prime}, {n_prime})"
            )));
        }
    }

    Ok(TopCoefficients {
        product_plus: scale * coeff_plus,
        product_minus: scale * coeff_minus,
        coeff_plus,
        coeff_minus,
        alias_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation, ModeMonomial};
    use crate::states::{FamilyTag, StateFamily};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn coherent(gamma: Complex64, delta: Complex64) -> TruncatedState {
        StateFamily::new(FamilyTag::CoherentProduct { gamma, delta })
            .build()
            .unwrap()
    }

    /// ⟨a†^n a^m b†^k b^l⟩ on one state.
    fn moment(state: &TruncatedState, n: usize, m: usize, k: usize, l: usize) -> Complex64 {
        expectation(state, ModeMonomial::new(n, m, k, l)).unwrap()
    }

    #[test]
    fn plan_covers_band() {
        assert_eq!(plan_grid(1, 1).unwrap(), (3, 3));
        assert_eq!(plan_grid(2, 0).unwrap(), (5, 1));
        assert!(plan_grid(0, 0).is_err());
    }

    #[test]
    fn coherent_products_match_expectations() {
        let s1 = coherent(c(0.7, 0.1), c(0.3, -0.2));
        let s2 = coherent(c(0.5, -0.4), c(0.6, 0.0));
        let (u, v) = plan_grid(1, 1).unwrap();
        let grid = CorrelatorGrid::from_states(&s1, &s2, 1, 1, u, v).unwrap();
        let top = extract_top_coefficients(&grid).unwrap();

        let plus = moment(&s1, 0, 1, 0, 1) * moment(&s2, 1, 0, 1, 0);
        let minus = moment(&s1, 0, 1, 1, 0) * moment(&s2, 1, 0, 0, 1);
        assert_abs_diff_eq!(top.product_plus.re, plus.re, epsilon = 1e-9);
        assert_abs_diff_eq!(top.product_plus.im, plus.im, epsilon = 1e-9);
        assert_abs_diff_eq!(top.product_minus.re, minus.re, epsilon = 1e-9);
        assert_abs_diff_eq!(top.product_minus.im, minus.im, epsilon = 1e-9);
    }

    #[test]
    fn entangled_cross_moment_survives_the_scan() {
        let s1 = StateFamily::new(FamilyTag::Tmsv {
            lambda: 0.3,
            displacement: None,
        })
        .build()
        .unwrap();
        let s2 = coherent(c(0.7, 0.0), c(0.4, 0.3));
        let (u, v) = plan_grid(1, 1).unwrap();
        let grid = CorrelatorGrid::from_states(&s1, &s2, 1, 1, u, v).unwrap();
        let top = extract_top_coefficients(&grid).unwrap();

        let plus = moment(&s1, 0, 1, 0, 1) * moment(&s2, 1, 0, 1, 0);
        let minus = moment(&s1, 0, 1, 1, 0) * moment(&s2, 1, 0, 0, 1);
        assert_abs_diff_eq!(top.product_plus.re, plus.re, epsilon = 1e-8);
        assert_abs_diff_eq!(top.product_plus.im, plus.im, epsilon = 1e-8);
        // TMSV has no ⟨a b†⟩ coherence: the minus branch vanishes.
        assert_abs_diff_eq!(top.product_minus.norm(), minus.norm(), epsilon = 1e-8);
        assert_abs_diff_eq!(top.product_minus.norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn single_mode_scan_skips_the_second_phase() {
        let s1 = coherent(c(0.9, 0.2), c(0.0, 0.0));
        let s2 = coherent(c(0.4, -0.1), c(0.0, 0.0));
        let (u, v) = plan_grid(2, 0).unwrap();
        let grid = CorrelatorGrid::from_states(&s1, &s2, 2, 0, u, v).unwrap();
        let top = extract_top_coefficients(&grid).unwrap();
        let want = moment(&s1, 0, 2, 0, 0) * moment(&s2, 2, 0, 0, 0);
        assert_abs_diff_eq!(top.product_plus.re, want.re, epsilon = 1e-9);
        assert_abs_diff_eq!(top.product_plus.im, want.im, epsilon = 1e-9);
        // With n′ = 0 the two branches are the same frequency.
        assert_abs_diff_eq!(
            (top.product_plus - top.product_minus).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn real_grids_have_conjugate_symmetric_spectra() {
        let s1 = coherent(c(0.6, 0.3), c(0.2, 0.0));
        let s2 = coherent(c(0.3, 0.0), c(0.5, -0.2));
        let grid = CorrelatorGrid::from_states(&s1, &s2, 1, 1, 5, 5).unwrap();
        for f1 in -2i64..=2 {
            for f2 in -2i64..=2 {
                let a = grid.fourier_coefficient(f1, f2);
                let b = grid.fourier_coefficient(-f1, -f2).conj();
                assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
                assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn oversampling_changes_nothing() {
        let s1 = coherent(c(0.5, 0.1), c(0.4, 0.2));
        let s2 = coherent(c(0.6, 0.0), c(0.3, -0.3));
        let minimal = CorrelatorGrid::from_states(&s1, &s2, 1, 1, 3, 3).unwrap();
        let dense = CorrelatorGrid::from_states(&s1, &s2, 1, 1, 5, 6).unwrap();
        let a = extract_top_coefficients(&minimal).unwrap();
        let b = extract_top_coefficients(&dense).unwrap();
        assert_abs_diff_eq!(
            (a.product_plus - b.product_plus).norm(),
            0.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            (a.product_minus - b.product_minus).norm(),
            0.0,
            epsilon = 1e-10
        );
        assert!(b.alias_residual < 1e-10);
    }

    #[test]
    fn out_of_band_content_is_flagged() {
        // Hand-built grid carrying frequency 2 while claiming m′ = 1.
        let u = 7;
        let values: Vec<f64> = (0..u)
            .map(|iu| (2.0 * std::f64::consts::TAU * iu as f64 / u as f64).cos())
            .collect();
        let grid = CorrelatorGrid::new(1, 0, u, 1, values).unwrap();
        let err = extract_top_coefficients(&grid).unwrap_err();
        assert!(matches!(err, Error::AliasingDetected(_)));
        // The same grid passes with the tolerance disabled.
        let top = extract_top_coefficients_with_tol(&grid, f64::INFINITY).unwrap();
        assert!(top.alias_residual > 0.1);
    }

    #[test]
    fn grid_constructor_enforces_sampling_bound() {
        assert!(CorrelatorGrid::new(1, 1, 3, 2, vec![0.0; 6]).is_err());
        assert!(CorrelatorGrid::new(1, 1, 3, 3, vec![0.0; 8]).is_err());
        assert!(CorrelatorGrid::new(0, 0, 3, 3, vec![0.0; 9]).is_err());
        assert!(CorrelatorGrid::new(1, 1, 3, 3, vec![0.0; 9]).is_ok());
    }

    #[test]
    fn phase_lookup_matches_grid_convention() {
        let grid = CorrelatorGrid::new(1, 0, 4, 1, vec![0.0; 4]).unwrap();
        let p = grid.phase_at(1, 0);
        assert_abs_diff_eq!(p.phi(), std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.phi_prime(), 0.0, epsilon = 1e-12);
    }
}
