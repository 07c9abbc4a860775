//! Finite-shot simulation of the witness measurement protocol.
//!
//! A minor evaluation spends its shot budget across a fixed list of
//! measurement settings:
//!
//! * one *direct counting* setting per nontrivial diagonal factor per
//!   state — photon-number resolution on both modes of that state, the
//!   factor estimated by the empirical mean of falling factorials
//!   `(j)ₘ(k)ₙ` (unbiased for `⟨a†ᵐaᵐ b†ⁿbⁿ⟩`). When a state needs both
//!   diagonal factors they are estimated from *disjoint* batches so the
//!   product estimator stays unbiased;
//! * one *interference* setting per phase-grid point — counts at the two
//!   monitored splitter outputs, the correlator estimated by the
//!   empirical mean of `s^{m′} t^{n′}`, and the cross term obtained by
//!   pushing the estimated grid through the same Fourier extraction as
//!   the exact pipeline (a linear map, so unbiasedness survives).
//!
//! The total budget is split evenly across settings. Since every
//! estimator is an empirical mean, each simulated setting draws one
//! multinomial sample of its outcome distribution (sequential conditional
//! binomials), which costs `O(outcomes)` independent of the shot count.
//!
//! Determinism: all randomness derives from one `u64` seed; setting `i`
//! of trial `t` uses stream `t·4096 + i` of a counter-based generator, so
//! results are reproducible and trials are independent.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::fock::TruncatedState;
use crate::fourier::{extract_top_coefficients_with_tol, plan_grid, CorrelatorGrid};
use crate::interferometer::{interfere, PhasePair};
use crate::witness::{MinorSpec, Provenance, ScanBranch, WitnessMetadata, WitnessResult};

/// Stream stride between coverage trials: settings within one trial use
/// consecutive streams, trials are this far apart.
const TRIAL_STREAM_STRIDE: u64 = 4096;

/// One measurement setting: an outcome distribution and the observable
/// averaged over it.
struct Setting {
    label: String,
    probs: Vec<f64>,
    weights: Vec<f64>,
}

impl Setting {
    fn exact_mean(&self) -> f64 {
        self.probs
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| p * w)
            .sum()
    }

    fn single_shot_variance(&self) -> f64 {
        let mean = self.exact_mean();
        let second: f64 = self
            .probs
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| p * w * w)
            .sum();
        (second - mean * mean).max(0.0)
    }

    fn sampled_mean(&self, shots: u64, rng: &mut ChaCha12Rng) -> f64 {
        let counts = multinomial_counts(rng, shots, &self.probs);
        let total: f64 = counts
            .iter()
            .zip(&self.weights)
            .map(|(&c, w)| c as f64 * w)
            .sum();
        total / shots as f64
    }
}

/// Draw multinomial counts by peeling outcomes off with conditional
/// binomials. Cost is linear in the number of outcomes.
fn multinomial_counts(rng: &mut ChaCha12Rng, shots: u64, probs: &[f64]) -> Vec<u64> {
    let norm: f64 = probs.iter().sum();
    let mut counts = vec![0u64; probs.len()];
    let mut left_shots = shots;
    let mut left_mass = norm;
    let mut heaviest = 0usize;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[heaviest] {
            heaviest = i;
        }
        if left_shots == 0 {
            break;
        }
        if left_mass <= 0.0 {
            break;
        }
        let cond = (p / left_mass).clamp(0.0, 1.0);
        let c = if cond >= 1.0 {
            left_shots
        } else {
            Binomial::new(left_shots, cond).unwrap().sample(rng)
        };
        counts[i] = c;
        left_shots -= c;
        left_mass -= p;
    }
    // Round-off can strand a few shots; give them to the heaviest bin.
    counts[heaviest] += left_shots;
    counts
}

/// Per-state bookkeeping: which settings hold this state's diagonal
/// factor estimates (`None` = the factor is the identity).
#[derive(Clone, Copy, Default)]
struct DiagLayout {
    first_factor: Option<usize>,
    second_factor: Option<usize>,
}

/// The full measurement layout for one minor on one state pair.
struct MeasurementPlan {
    settings: Vec<Setting>,
    diag: [DiagLayout; 2],
    /// Indices of the grid settings in scan order (iu-major).
    grid: Vec<usize>,
    grid_dims: (usize, usize),
    exponents: (usize, usize),
    branch: ScanBranch,
    order: usize,
}

fn falling(j: usize, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if j < m {
        return 0.0;
    }
    (0..m).map(|i| (j - i) as f64).product()
}

impl MeasurementPlan {
    fn new(
        state1: &TruncatedState,
        state2: &TruncatedState,
        spec: &MinorSpec,
    ) -> Result<Self> {
        let (m_prime, n_prime) = spec.top_frequencies();
        let (u, v) = plan_grid(m_prime, n_prime)?;
        let mut settings = Vec::new();
        let mut diag = [DiagLayout::default(); 2];

        let (m, n, p, q) = spec.exponents();
        for (i, state) in [state1, state2].into_iter().enumerate() {
            let probs = state.photon_pmf();
            let side = state.cutoff() + 1;
            let factor_weights = |ma: usize, mb: usize| -> Vec<f64> {
                let mut w = vec![0.0; side * side];
                for j in 0..side {
                    let fa = falling(j, ma);
                    for k in 0..side {
                        w[j * side + k] = fa * falling(k, mb);
                    }
                }
                w
            };
            if m + n > 0 {
                diag[i].first_factor = Some(settings.len());
                settings.push(Setting {
                    label: format!("state{} direct counts, first factor", i + 1),
                    probs: probs.clone(),
                    weights: factor_weights(m, n),
                });
            }
            if p + q > 0 {
                diag[i].second_factor = Some(settings.len());
                settings.push(Setting {
                    label: format!("state{} direct counts, second factor", i + 1),
                    probs: probs.clone(),
                    weights: factor_weights(p, q),
                });
            }
        }

        let mut grid = Vec::with_capacity(u * v);
        for iu in 0..u {
            for iv in 0..v {
                let phases = PhasePair::new(
                    std::f64::consts::TAU * iu as f64 / u as f64,
                    std::f64::consts::TAU * iv as f64 / v as f64,
                );
                let pmf = interfere(state1, state2, phases)?;
                let side = pmf.side();
                let mut weights = vec![0.0; side * side];
                for s in 0..side {
                    let sp = (s as f64).powi(m_prime as i32);
                    for t in 0..side {
                        weights[s * side + t] = sp * (t as f64).powi(n_prime as i32);
                    }
                }
                grid.push(settings.len());
                settings.push(Setting {
                    label: format!("phase scan ({iu},{iv})"),
                    probs: pmf.table().to_vec(),
                    weights,
                });
            }
        }

        Ok(Self {
            settings,
            diag,
            grid,
            grid_dims: (u, v),
            exponents: (m_prime, n_prime),
            branch: spec.branch(),
            order: spec.order(),
        })
    }

    /// Assemble `(value, first, second)` from per-setting means.
    fn assemble(&self, means: &[f64]) -> Result<(f64, f64, f64)> {
        let mut f = [0.0f64; 2];
        for (slot, layout) in f.iter_mut().zip(&self.diag) {
            let a = layout.first_factor.map_or(1.0, |idx| means[idx]);
            let b = layout.second_factor.map_or(1.0, |idx| means[idx]);
            *slot = a * b;
        }
        let (u, v) = self.grid_dims;
        let values: Vec<f64> = self.grid.iter().map(|&idx| means[idx]).collect();
        let grid = CorrelatorGrid::new(self.exponents.0, self.exponents.1, u, v, values)?;
        // Statistical noise is expected out of band: disable the check.
        let top = extract_top_coefficients_with_tol(&grid, f64::INFINITY)?;
        let product = match self.branch {
            ScanBranch::Plus => top.product_plus,
            ScanBranch::Minus => top.product_minus,
        };
        let first = 0.5 * (f[0] + f[1]);
        let second = product.re;
        Ok((first - second, first, second))
    }

    fn exact_means(&self) -> Vec<f64> {
        self.settings.iter().map(Setting::exact_mean).collect()
    }

    fn sampled_means(&self, shots_per_setting: u64, seed: u64, trial: u64) -> Vec<f64> {
        self.settings
            .iter()
            .enumerate()
            .map(|(idx, setting)| {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(trial * TRIAL_STREAM_STRIDE + idx as u64);
                setting.sampled_mean(shots_per_setting, &mut rng)
            })
            .collect()
    }

    /// Per-setting variance contributions to the estimator, as
    /// (label, coefficient² × single-shot variance).
    fn variance_contributions(&self) -> Vec<(String, f64)> {
        let mut out = Vec::with_capacity(self.settings.len());
        for i in 0..2 {
            let layout = self.diag[i];
            let a_exact = layout
                .first_factor
                .map_or(1.0, |idx| self.settings[idx].exact_mean());
            let b_exact = layout
                .second_factor
                .map_or(1.0, |idx| self.settings[idx].exact_mean());
            if let Some(idx) = layout.first_factor {
                let coeff = 0.5 * b_exact;
                out.push((
                    self.settings[idx].label.clone(),
                    coeff * coeff * self.settings[idx].single_shot_variance(),
                ));
            }
            if let Some(idx) = layout.second_factor {
                let coeff = 0.5 * a_exact;
                out.push((
                    self.settings[idx].label.clone(),
                    coeff * coeff * self.settings[idx].single_shot_variance(),
                ));
            }
        }
        let (u, v) = self.grid_dims;
        let (m_prime, n_prime) = self.exponents;
        let f2 = match self.branch {
            ScanBranch::Plus => n_prime as f64,
            ScanBranch::Minus => -(n_prime as f64),
        };
        let scale = 2f64.powi(self.order as i32) / (u * v) as f64;
        for (pos, &idx) in self.grid.iter().enumerate() {
            let iu = pos / v;
            let iv = pos % v;
            let angle = -std::f64::consts::TAU
                * (m_prime as f64 * iu as f64 / u as f64 + f2 * iv as f64 / v as f64);
            let coeff = scale * angle.cos();
            out.push((
                self.settings[idx].label.clone(),
                coeff * coeff * self.settings[idx].single_shot_variance(),
            ));
        }
        out
    }
}

/// Theoretical shot-noise budget of the estimator for one state pair and
/// minor: `Var(d̂) = v_eff / total_shots` under even budget splitting.
#[derive(Debug, Clone)]
pub struct ShotVariance {
    /// Single-shot-equivalent variance.
    pub v_eff: f64,
    /// Number of measurement settings sharing the budget.
    pub settings: usize,
    /// Per-setting contributions (label, coefficient² × variance).
    pub contributions: Vec<(String, f64)>,
}

impl ShotVariance {
    /// Standard deviation of the estimate at a given total budget.
    pub fn standard_error(&self, total_shots: u64) -> f64 {
        (self.v_eff / total_shots as f64).sqrt()
    }
}

/// Compute the theoretical shot variance of the minor estimator.
pub fn minor_shot_variance(
    state1: &TruncatedState,
    state2: &TruncatedState,
    spec: &MinorSpec,
) -> Result<ShotVariance> {
    let plan = MeasurementPlan::new(state1, state2, spec)?;
    let contributions = plan.variance_contributions();
    let total: f64 = contributions.iter().map(|(_, c)| c).sum();
    Ok(ShotVariance {
        v_eff: plan.settings.len() as f64 * total,
        settings: plan.settings.len(),
        contributions,
    })
}

/// Simulate the full finite-shot protocol and estimate the two-state
/// minor. `total_shots` is divided evenly across the settings (the
/// remainder is discarded and noted).
pub fn estimate_minor(
    state1: &TruncatedState,
    state2: &TruncatedState,
    spec: &MinorSpec,
    total_shots: u64,
    seed: u64,
) -> Result<WitnessResult> {
    let plan = MeasurementPlan::new(state1, state2, spec)?;
    let s = plan.settings.len() as u64;
    let shots_per_setting = total_shots / s;
    if shots_per_setting == 0 {
        return Err(Error::InvalidParameter(format!(
            "budget of {total_shots} shots cannot cover {s} settings"
        )));
    }
    let means = plan.sampled_means(shots_per_setting, seed, 0);
    let (value, first, second) = plan.assemble(&means)?;

    let contributions = plan.variance_contributions();
    let sum: f64 = contributions.iter().map(|(_, c)| c).sum();
    let standard_error = (sum / shots_per_setting as f64).sqrt();

    let mut metadata = WitnessMetadata {
        standard_error: Some(standard_error),
        shots_per_setting: Some(shots_per_setting),
        settings: Some(plan.settings.len()),
        ..WitnessMetadata::default()
    };
    if total_shots % s != 0 {
        metadata.notes.push(format!(
            "budget trimmed to {} shots ({} per setting)",
            shots_per_setting * s,
            shots_per_setting
        ));
    }
    Ok(WitnessResult {
        value,
        first,
        second,
        epsilon: None,
        provenance: Provenance::ShotEstimated,
        witnessed: value < 0.0,
        sound: Some(true),
        metadata,
    })
}

/// The infinite-shot limit of [`estimate_minor`]: identical pipeline with
/// exact setting means. Agrees with the exact-moment minor up to
/// extraction round-off.
pub fn estimate_minor_exact(
    state1: &TruncatedState,
    state2: &TruncatedState,
    spec: &MinorSpec,
) -> Result<WitnessResult> {
    let plan = MeasurementPlan::new(state1, state2, spec)?;
    let means = plan.exact_means();
    let (value, first, second) = plan.assemble(&means)?;
    let mut metadata = WitnessMetadata::default();
    metadata
        .notes
        .push("infinite-shot limit of the sampling estimator".into());
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

/// Result of repeated independent simulations of the same estimate.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub trials: u32,
    /// Trials whose estimate landed within `epsilon` of the exact value.
    pub hits: u32,
    pub coverage: f64,
    pub epsilon: f64,
    pub exact_value: f64,
    pub mean_estimate: f64,
    /// Empirical standard deviation of the estimates.
    pub estimate_sd: f64,
    /// Theoretical standard error at this budget, for comparison.
    pub predicted_se: f64,
    /// The individual trial estimates, in trial order.
    pub estimates: Vec<f64>,
}

/// Run `trials` independent finite-shot estimates and report how often
/// the estimate lands within `epsilon` of the exact value.
pub fn run_coverage_trials(
    state1: &TruncatedState,
    state2: &TruncatedState,
    spec: &MinorSpec,
    total_shots: u64,
    trials: u32,
    epsilon: f64,
    seed: u64,
) -> Result<CoverageReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "coverage radius must be positive, got {epsilon}"
        )));
    }
    let plan = MeasurementPlan::new(state1, state2, spec)?;
    let s = plan.settings.len() as u64;
    let shots_per_setting = total_shots / s;
    if shots_per_setting == 0 {
        return Err(Error::InvalidParameter(format!(
            "budget of {total_shots} shots cannot cover {s} settings"
        )));
    }
    let exact = plan.assemble(&plan.exact_means())?.0;

    let mut estimates = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let means = plan.sampled_means(shots_per_setting, seed, trial as u64);
        estimates.push(plan.assemble(&means)?.0);
    }
    let hits = estimates
        .iter()
        .filter(|&&e| (e - exact).abs() <= epsilon)
        .count() as u32;
    let mean = estimates.iter().sum::<f64>() / trials as f64;
    let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
        / (trials as f64 - 1.0).max(1.0);

    let contributions = plan.variance_contributions();
    let sum: f64 = contributions.iter().map(|(_, c)| c).sum();

    Ok(CoverageReport {
        trials,
        hits,
        coverage: hits as f64 / trials as f64,
        epsilon,
        exact_value: exact,
        mean_estimate: mean,
        estimate_sd: var.sqrt(),
        predicted_se: (sum / shots_per_setting as f64).sqrt(),
        estimates,
    })
}

/// Draw one multinomial count table from a detector distribution — the
/// raw material of a simulated measurement record.
pub fn simulate_counts(probs: &[f64], shots: u64, seed: u64, stream: u64) -> Vec<u64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    multinomial_counts(&mut rng, shots, probs)
}

fn validate_tail_params(delta: f64, epsilon: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "failure probability must lie in (0, 1), got {delta}"
        )));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "accuracy target must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

fn ceil_to_shots(x: f64) -> Result<u64> {
    // 2⁶³ as an f64; anything above it is not a realizable budget.
    if !x.is_finite() || x > 9.223_372_036_854_776e18 {
        return Err(Error::Overflow(
            "required shot count exceeds the 2⁶³ budget representable here".into(),
        ));
    }
    Ok(x.ceil().max(1.0) as u64)
}

/// Chebyshev shot bound: `m ≥ Var / (δ ε²)` guarantees
/// `P(|d̂ − d| ≥ ε) ≤ δ`. A zero-variance estimator needs one shot.
pub fn m0_chebyshev(variance: f64, delta: f64, epsilon: f64) -> Result<u64> {
    validate_tail_params(delta, epsilon)?;
    if variance.is_nan() || variance < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "variance must be non-negative, got {variance}"
        )));
    }
    if variance == 0.0 {
        return Ok(1);
    }
    ceil_to_shots(variance / (delta * epsilon * epsilon))
}

/// Hoeffding shot bound for an estimator confined to an interval of the
/// given width: `m ≥ range² ln(2/δ) / (2ε²)`.
pub fn m0_hoeffding_range(range: f64, delta: f64, epsilon: f64) -> Result<u64> {
    validate_tail_params(delta, epsilon)?;
    if range.is_nan() || range <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "estimator range must be positive, got {range}"
        )));
    }
    ceil_to_shots(range * range * (2.0 / delta).ln() / (2.0 * epsilon * epsilon))
}

/// Hoeffding bound specialised to the `(0,0,N,N)` minor on two-branch
/// number states, where the per-shot estimator is confined to a range
/// growing as `(2N+1) N^{2N}`:
/// `m ≥ (2N+1)² N^{4N} ln(2/δ) / (2ε²)`.
///
/// The bound is astronomically loose beyond `N = 5` and overflows the
/// representable budget soon after; that overflow is reported rather
/// than saturated.
pub fn m0_hoeffding_noon(n: u32, delta: f64, epsilon: f64) -> Result<u64> {
    validate_tail_params(delta, epsilon)?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "the two-branch number family needs N ≥ 1".into(),
        ));
    }
    let nf = n as f64;
    let side = 2.0 * nf + 1.0;
    let range_sq = side * side * nf.powi(4 * n as i32);
    ceil_to_shots(range_sq * (2.0 / delta).ln() / (2.0 * epsilon * epsilon))
}

/// Accuracy target that pins down the witness sign: a quarter of the
/// conventional 0.1 scale, tightened further when the value itself is
/// smaller.
pub fn sign_resolving_epsilon(witness_value: f64) -> f64 {
    witness_value.abs().min(0.025)
}

/// Accuracy target scaled to the estimator's own shot noise:
/// `ε = scale · √v_eff` (single-shot-equivalent units).
pub fn noise_scaled_epsilon(v_eff: f64, scale: f64) -> f64 {
    scale * v_eff.sqrt()
}
