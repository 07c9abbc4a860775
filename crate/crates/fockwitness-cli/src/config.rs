//! Shared parameter plumbing: the flag set common to the state-facing
//! subcommands, the JSON config-file schema, flag-over-file merging, and
//! construction of library objects from the resolved parameters.

use std::path::Path;

use clap::Args;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use fockwitness::states::{FamilyTag, PmTransform, SqueezeOrientation, StateFamily};
use fockwitness::witness::MinorSpec;

use crate::error::{usage, CliResult};

/// State, minor, reference, and noise parameters. Every field is
/// optional; whether a field is required depends on the family and
/// command. Command-line values override config-file values.
#[derive(Args, Serialize, Debug, Clone, Default)]
pub struct Params {
    /// State family: tmsv | cat | noon | coherent | hg
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,

    /// Squeezing parameter λ, |λ| < 1 (tmsv)
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,

    /// First-mode amplitude α (cat, noon)
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,

    /// Second-mode amplitude β (cat, noon); defaults: cat β=α, noon β=√(1−α²)
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,

    /// Superposition phase θ (cat); default π (odd cat)
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,

    /// Excitation number N (noon)
    #[arg(long = "N", alias = "n", value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,

    /// Reference amplitude γ (coherent family or coherent reference)
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,

    /// Reference amplitude δ; defaults to γ when only γ is given
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,

    /// Reference amplitude product γδ (real); sets γ=√|γδ| and signed δ
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_delta: Option<f64>,

    /// Collective width σ₊ (hg)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_plus: Option<f64>,

    /// Collective width σ₋ (hg)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_minus: Option<f64>,

    /// Mode-a displacement, real part (tmsv)
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disp_a_re: Option<f64>,
    /// Mode-a displacement, imaginary part (tmsv)
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disp_a_im: Option<f64>,
    /// Mode-b displacement, real part (tmsv)
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disp_b_re: Option<f64>,
    /// Mode-b displacement, imaginary part (tmsv)
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disp_b_im: Option<f64>,

    /// Dephasing strength p ∈ [0, 1] (cat, noon)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dephasing: Option<f64>,

    /// Direct-counting detector efficiency η₁ ∈ [0, 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta1: Option<f64>,

    /// Phase-scan detector efficiency η₂ ∈ [0, 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,

    /// Minor specification "m,n,p,q" (operator orders)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,

    /// Reference state: replica | optimal | coherent
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,

    /// Counter-rotation angle φ applied to the state
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotate: Option<f64>,

    /// Collective squeeze strength ξ ≥ 1 applied to the state
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub squeeze: Option<f64>,

    /// Squeeze orientation: plus | minus
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation: Option<String>,

    /// Truncation tail bound (default 1e-10)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
}

/// The JSON config-file schema. Unknown keys are rejected. Keys mirror
/// the command-line flags; command-specific keys are ignored by the
/// other commands. In the `m0` command, `epsilon`/`delta` are the
/// accuracy and confidence parameters; elsewhere `delta` is the
/// reference amplitude.
#[derive(Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    // globals
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<String>,
    // shared state parameters
    pub family: Option<String>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub n: Option<u32>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub gamma_delta: Option<f64>,
    pub sigma_plus: Option<f64>,
    pub sigma_minus: Option<f64>,
    pub disp_a_re: Option<f64>,
    pub disp_a_im: Option<f64>,
    pub disp_b_re: Option<f64>,
    pub disp_b_im: Option<f64>,
    pub dephasing: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub spec: Option<String>,
    pub reference: Option<String>,
    pub rotate: Option<f64>,
    pub squeeze: Option<f64>,
    pub orientation: Option<String>,
    pub tail_bound: Option<f64>,
    // scan
    pub ranges: Option<Vec<String>>,
    pub criteria: Option<String>,
    pub grid_cap: Option<usize>,
    // shots
    pub shots: Option<u64>,
    pub trials: Option<u32>,
    pub epsilon: Option<f64>,
    // m0
    pub bound: Option<String>,
    pub variance: Option<f64>,
    pub range: Option<f64>,
}

/// Load and validate a config file, returning both the raw JSON (for
/// echoing) and the parsed schema.
pub fn load_config(path: &Path) -> CliResult<(serde_json::Value, FileConfig)> {
    let text = std::fs::read_to_string(path)?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let parsed: FileConfig = serde_json::from_value(raw.clone())?;
    Ok((raw, parsed))
}

macro_rules! fill_from_file {
    ($dst:expr, $src:expr, $($field:ident),+ $(,)?) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field.clone(); } )+
    };
}

/// Merge config-file values into flag values (flags win).
pub fn merge_params(flags: &Params, file: &FileConfig) -> Params {
    let mut out = flags.clone();
    fill_from_file!(
        out, file, family, lambda, alpha, beta, theta, n, gamma, delta, gamma_delta,
        sigma_plus, sigma_minus, disp_a_re, disp_a_im, disp_b_re, disp_b_im, dephasing,
        eta1, eta2, spec, reference, rotate, squeeze, orientation, tail_bound,
    );
    out
}

fn require<T: Copy>(v: Option<T>, what: &str) -> CliResult<T> {
    v.ok_or_else(|| usage(format!("missing parameter: {what}")))
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Resolve `gamma`/`delta`/`gamma_delta` into a coherent amplitude pair.
/// `gamma_delta` fixes the product: γ = √|γδ| and δ carries the sign.
/// A lone γ implies δ = γ.
pub fn coherent_amplitudes(p: &Params) -> CliResult<(Complex64, Complex64)> {
    if let Some(gd) = p.gamma_delta {
        if p.gamma.is_some() || p.delta.is_some() {
            return Err(usage(
                "give either --gamma-delta or --gamma/--delta, not both",
            ));
        }
        if gd == 0.0 {
            return Ok((c(0.0), c(0.0)));
        }
        let g = gd.abs().sqrt();
        return Ok((c(g), c(gd / g)));
    }
    let gamma = require(p.gamma, "--gamma")?;
    let delta = p.delta.unwrap_or(gamma);
    Ok((c(gamma), c(delta)))
}

/// Build the state family described by the resolved parameters.
pub fn resolve_family(p: &Params) -> CliResult<StateFamily> {
    let name = p
        .family
        .as_deref()
        .ok_or_else(|| usage("missing parameter: --family"))?;
    let tag = match name {
        "tmsv" => {
            let lambda = require(p.lambda, "--lambda")?;
            let any_disp = p.disp_a_re.is_some()
                || p.disp_a_im.is_some()
                || p.disp_b_re.is_some()
                || p.disp_b_im.is_some();
            let displacement = any_disp.then(|| {
                (
                    Complex64::new(p.disp_a_re.unwrap_or(0.0), p.disp_a_im.unwrap_or(0.0)),
                    Complex64::new(p.disp_b_re.unwrap_or(0.0), p.disp_b_im.unwrap_or(0.0)),
                )
            });
            FamilyTag::Tmsv {
                lambda,
                displacement,
            }
        }
        "cat" => {
            let alpha = require(p.alpha, "--alpha")?;
            let beta = p.beta.unwrap_or(alpha);
            let theta = p.theta.unwrap_or(std::f64::consts::PI);
            FamilyTag::Cat {
                alpha: c(alpha),
                beta: c(beta),
                theta,
            }
        }
        "noon" => {
            let n = require(p.n, "--N")?;
            let (alpha, beta) = match (p.alpha, p.beta) {
                (Some(a), Some(b)) => (a, b),
                (Some(a), None) => {
                    if a.abs() > 1.0 {
                        return Err(usage(format!(
                            "noon amplitude |α| must be ≤ 1 to infer β = √(1−α²), got {a}"
                        )));
                    }
                    (a, (1.0 - a * a).sqrt())
                }
                (None, Some(b)) => {
                    if b.abs() > 1.0 {
                        return Err(usage(format!(
                            "noon amplitude |β| must be ≤ 1 to infer α = √(1−β²), got {b}"
                        )));
                    }
                    ((1.0 - b * b).sqrt(), b)
                }
                (None, None) => {
                    let r = std::f64::consts::FRAC_1_SQRT_2;
                    (r, r)
                }
            };
            FamilyTag::Noon {
                n,
                alpha: c(alpha),
                beta: c(beta),
            }
        }
        "coherent" => {
            let (gamma, delta) = coherent_amplitudes(p)?;
            FamilyTag::CoherentProduct { gamma, delta }
        }
        "hg" | "hermite-gaussian" => FamilyTag::HermiteGaussian {
            sigma_plus: require(p.sigma_plus, "--sigma-plus")?,
            sigma_minus: require(p.sigma_minus, "--sigma-minus")?,
        },
        other => {
            return Err(usage(format!(
                "unknown family '{other}' (expected tmsv, cat, noon, coherent, or hg)"
            )))
        }
    };
    let mut family = StateFamily::new(tag);
    if let Some(dep) = p.dephasing {
        family = family.with_dephasing(dep);
    }
    if p.rotate.is_some() || p.squeeze.is_some() {
        let orientation = match p.orientation.as_deref() {
            None | Some("plus") => SqueezeOrientation::AmplifyPlus,
            Some("minus") => SqueezeOrientation::AmplifyMinus,
            Some(other) => {
                return Err(usage(format!(
                    "unknown orientation '{other}' (expected plus or minus)"
                )))
            }
        };
        family = family.with_pm_transform(PmTransform {
            phi: p.rotate.unwrap_or(0.0),
            xi: p.squeeze.unwrap_or(1.0),
            orientation,
        });
    }
    family.validate()?;
    Ok(family)
}

/// Parse "m,n,p,q". A tuple of the shape `0,n,0,q` (both middle entries
/// of the pairs occupied) is accepted as shorthand for the operator
/// orders `(0,0,n,q)`; the reinterpretation is warned about on stderr and
/// recorded in the returned note.
pub fn resolve_spec(p: &Params) -> CliResult<(MinorSpec, Option<String>)> {
    let text = p
        .spec
        .as_deref()
        .ok_or_else(|| usage("missing parameter: --spec m,n,p,q"))?;
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(usage(format!(
            "--spec expects four comma-separated orders, got '{text}'"
        )));
    }
    let mut vals = [0usize; 4];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|_| usage(format!("--spec entry '{part}' is not a non-negative integer")))?;
    }
    let [m, n, pp, q] = vals;
    match MinorSpec::new(m, n, pp, q) {
        Ok(spec) => Ok((spec, None)),
        Err(original) => {
            if m == 0 && pp == 0 && n > 0 && q > 0 {
                let spec = MinorSpec::new(0, 0, n, q)?;
                let note = format!(
                    "spec '{text}' interpreted as operator orders (0,0,{n},{q})"
                );
                eprintln!("warning: {note}");
                Ok((spec, Some(note)))
            } else {
                Err(original.into())
            }
        }
    }
}

/// The reference-state choice for two-state minors.
#[derive(Debug, Clone, Copy)]
pub enum RefChoice {
    /// Second copy of the state itself.
    Replica,
    /// Coherent product matched to the state's cross moment.
    Optimal,
    /// Explicit coherent product.
    Coherent(Complex64, Complex64),
}

pub fn resolve_reference(p: &Params) -> CliResult<RefChoice> {
    match p.reference.as_deref() {
        None => {
            if p.gamma.is_some() || p.gamma_delta.is_some() {
                let (g, d) = coherent_amplitudes(p)?;
                Ok(RefChoice::Coherent(g, d))
            } else {
                Ok(RefChoice::Replica)
            }
        }
        Some("replica") => Ok(RefChoice::Replica),
        Some("optimal") => Ok(RefChoice::Optimal),
        Some("coherent") => {
            let (g, d) = coherent_amplitudes(p)?;
            Ok(RefChoice::Coherent(g, d))
        }
        Some(other) => Err(usage(format!(
            "unknown reference '{other}' (expected replica, optimal, or coherent)"
        ))),
    }
}

/// Detector efficiencies with their lossless default.
pub fn efficiencies(p: &Params) -> (f64, f64, bool) {
    let eta1 = p.eta1.unwrap_or(1.0);
    let eta2 = p.eta2.unwrap_or(1.0);
    let lossy = eta1 < 1.0 || eta2 < 1.0;
    (eta1, eta2, lossy)
}
