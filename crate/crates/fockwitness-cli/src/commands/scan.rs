//! `scan`: sweep one or two parameters over a grid and tabulate the
//! requested entanglement criteria at every point. Points are evaluated
//! on a worker pool; output rows are ordered by grid index.

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use fockwitness::fock::DEFAULT_TAIL_BOUND;
use fockwitness::states::{FamilyTag, StateFamily};
use fockwitness::witness::{
    minor_d, minor_d_lossy, minor_dprime, minor_dprime_lossy, optimal_reference,
    quadrature_covariance, second_moment_criterion, variance_product, MinorSpec,
    QuadraturePairing,
};

use crate::commands::{echo_flags, Context, Globals};
use crate::config::{
    efficiencies, merge_params, resolve_family, resolve_reference, resolve_spec, Params, RefChoice,
};
use crate::error::{usage, CliResult};
use crate::output::{float_value, Format, Report};

const DEFAULT_GRID_CAP: usize = 100_000;

#[derive(Args, Serialize, Debug)]
pub struct ScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: Params,

    /// Axis "name=start:stop:count"; give twice for a 2-D grid.
    /// Names: lambda, alpha, beta, theta, gamma, delta, gamma_delta,
    /// sigma_plus, sigma_minus, dephasing, eta, eta1, eta2, rotate, squeeze
    #[arg(long = "range", value_name = "NAME=START:STOP:COUNT")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ranges: Vec<String>,

    /// Comma-separated subset of: d, dprime, mgvt, second
    /// (default: all; the quadrature criteria drop out when any η < 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criteria: Option<String>,

    /// Refuse grids with more points than this
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_cap: Option<usize>,
}

struct Axis {
    name: String,
    values: Vec<f64>,
}

/// Set the named scan parameter on a parameter set. `eta` fans out to
/// both detector efficiencies.
fn assign(p: &mut Params, name: &str, value: f64) -> CliResult<()> {
    match name {
        "lambda" => p.lambda = Some(value),
        "alpha" => p.alpha = Some(value),
        "beta" => p.beta = Some(value),
        "theta" => p.theta = Some(value),
        "gamma" => p.gamma = Some(value),
        "delta" => p.delta = Some(value),
        "gamma_delta" | "gamma-delta" => p.gamma_delta = Some(value),
        "sigma_plus" | "sigma-plus" => p.sigma_plus = Some(value),
        "sigma_minus" | "sigma-minus" => p.sigma_minus = Some(value),
        "dephasing" => p.dephasing = Some(value),
        "eta" => {
            p.eta1 = Some(value);
            p.eta2 = Some(value);
        }
        "eta1" => p.eta1 = Some(value),
        "eta2" => p.eta2 = Some(value),
        "rotate" => p.rotate = Some(value),
        "squeeze" => p.squeeze = Some(value),
        other => {
            return Err(usage(format!(
                "'{other}' is not a scannable parameter (see --help for the list)"
            )))
        }
    }
    Ok(())
}

fn parse_range(text: &str) -> CliResult<Axis> {
    let bad = || usage(format!("range '{text}' is not of the form name=start:stop:count"));
    let (name, rest) = text.split_once('=').ok_or_else(bad)?;
    let mut parts = rest.split(':');
    let (start, stop, count) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), Some(c), None) => (a, b, c),
        _ => return Err(bad()),
    };
    let start: f64 = start.trim().parse().map_err(|_| bad())?;
    let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if count == 0 {
        return Err(usage(format!("range '{text}' has zero points")));
    }
    let name = name.trim().to_string();
    // Validate the axis name up front so a bad name fails before any work.
    assign(&mut Params::default(), &name, start)?;
    let values = if count == 1 {
        vec![start]
    } else {
        let step = (stop - start) / (count - 1) as f64;
        (0..count).map(|i| start + step * i as f64).collect()
    };
    Ok(Axis { name, values })
}

#[derive(Clone, Copy)]
struct Criteria {
    d: bool,
    dprime: bool,
    mgvt: bool,
    second: bool,
}

fn parse_criteria(text: Option<&str>, may_be_lossy: bool) -> CliResult<(Criteria, Option<String>)> {
    let mut crit = match text {
        None => Criteria {
            d: true,
            dprime: true,
            mgvt: true,
            second: true,
        },
        Some(list) => {
            let mut crit = Criteria {
                d: false,
                dprime: false,
                mgvt: false,
                second: false,
            };
            for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                match item {
                    "d" => crit.d = true,
                    "dprime" | "d'" => crit.dprime = true,
                    "mgvt" => crit.mgvt = true,
                    "second" | "second-moment" => crit.second = true,
                    other => {
                        return Err(usage(format!(
                            "unknown criterion '{other}' (expected d, dprime, mgvt, second)"
                        )))
                    }
                }
            }
            if !(crit.d || crit.dprime || crit.mgvt || crit.second) {
                return Err(usage("criteria list is empty"));
            }
            crit
        }
    };
    let mut note = None;
    if may_be_lossy && (crit.mgvt || crit.second) {
        if text.is_some() {
            return Err(usage(
                "the quadrature criteria (mgvt, second) have no detector-loss model; \
                 drop them from --criteria or remove the efficiency settings",
            ));
        }
        crit.mgvt = false;
        crit.second = false;
        note = Some("quadrature criteria skipped: no loss model".to_string());
    }
    Ok((crit, note))
}

/// Evaluate all requested criteria at one fully-assigned parameter point.
fn eval_point(params: &Params, spec: &MinorSpec, crit: Criteria) -> CliResult<Map<String, Value>> {
    let family = resolve_family(params)?;
    let tail = params.tail_bound.unwrap_or(DEFAULT_TAIL_BOUND);
    let built = family.build_with_tail_bound(tail)?;
    let (eta1, eta2, lossy) = efficiencies(params);
    let mut rec = Map::new();

    if crit.d {
        let r = if lossy {
            minor_d_lossy(&built.state, spec, eta1, eta2)?
        } else {
            minor_d(&built.state, spec)?
        };
        rec.insert("d_value".into(), float_value(r.value));
        rec.insert("d_witnessed".into(), json!(r.witnessed));
        if lossy {
            rec.insert("d_sound".into(), r.sound.map_or(Value::Null, |s| json!(s)));
        }
    }
    if crit.dprime {
        let reference = match resolve_reference(params)? {
            RefChoice::Replica => None,
            RefChoice::Optimal => Some(optimal_reference(&built.state, spec)?.family()),
            RefChoice::Coherent(gamma, delta) => Some(StateFamily::new(
                FamilyTag::CoherentProduct { gamma, delta },
            )),
        };
        let r = match reference {
            None => {
                if lossy {
                    minor_d_lossy(&built.state, spec, eta1, eta2)?
                } else {
                    minor_d(&built.state, spec)?
                }
            }
            Some(ref_family) => {
                let ref_built = ref_family.build_with_tail_bound(tail)?;
                if lossy {
                    minor_dprime_lossy(&built.state, &ref_built.state, spec, eta1, eta2)?
                } else {
                    minor_dprime(&built.state, &ref_built.state, spec)?
                }
            }
        };
        rec.insert("dprime_value".into(), float_value(r.value));
        rec.insert("dprime_witnessed".into(), json!(r.witnessed));
        if lossy {
            rec.insert(
                "dprime_sound".into(),
                r.sound.map_or(Value::Null, |s| json!(s)),
            );
        }
    }
    if crit.mgvt || crit.second {
        let cov = quadrature_covariance(&built.state)?;
        if crit.mgvt {
            let a = variance_product(&cov, QuadraturePairing::PlusMinus);
            let b = variance_product(&cov, QuadraturePairing::MinusPlus);
            let best = if a.value <= b.value { a } else { b };
            rec.insert("mgvt_value".into(), float_value(best.value));
            rec.insert("mgvt_witnessed".into(), json!(best.witnessed));
        }
        if crit.second {
            let a = second_moment_criterion(&cov, QuadraturePairing::PlusMinus);
            let b = second_moment_criterion(&cov, QuadraturePairing::MinusPlus);
            let best = if a.value <= b.value { a } else { b };
            rec.insert("second_value".into(), float_value(best.value));
            rec.insert("second_witnessed".into(), json!(best.witnessed));
        }
    }
    rec.insert("cutoff".into(), json!(built.report.cutoff));
    Ok(rec)
}

pub fn run(globals: &Globals, args: &ScanArgs) -> CliResult<()> {
    let ctx = Context::new(globals)?;
    let params = merge_params(&args.params, &ctx.file);
    let (spec, spec_note) = resolve_spec(&params)?;

    let range_texts: Vec<String> = if args.ranges.is_empty() {
        ctx.file.ranges.clone().unwrap_or_default()
    } else {
        args.ranges.clone()
    };
    if range_texts.is_empty() {
        return Err(usage("scan needs at least one --range"));
    }
    if range_texts.len() > 2 {
        return Err(usage(format!(
            "scan supports at most two --range axes, got {}",
            range_texts.len()
        )));
    }
    let axes: Vec<Axis> = range_texts
        .iter()
        .map(|t| parse_range(t))
        .collect::<CliResult<_>>()?;

    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let cap = args
        .grid_cap
        .or(ctx.file.grid_cap)
        .unwrap_or(DEFAULT_GRID_CAP);
    if total > cap {
        return Err(usage(format!(
            "grid has {total} points, above the cap of {cap}; raise --grid-cap if intended"
        )));
    }

    let criteria_text = args.criteria.clone().or_else(|| ctx.file.criteria.clone());
    let (eta1, eta2, lossy_base) = efficiencies(&params);
    let may_be_lossy = lossy_base
        || axes
            .iter()
            .any(|a| matches!(a.name.as_str(), "eta" | "eta1" | "eta2"));
    let (crit, crit_note) = parse_criteria(criteria_text.as_deref(), may_be_lossy)?;

    let inner = axes.last().map_or(1, |a| a.values.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.threads.unwrap_or(0))
        .build()
        .map_err(|e| usage(format!("cannot build worker pool: {e}")))?;
    let records: Vec<Map<String, Value>> = pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|idx| -> CliResult<Map<String, Value>> {
                let mut point = params.clone();
                let mut rec = Map::new();
                rec.insert("index".into(), json!(idx));
                for (which, axis) in axes.iter().enumerate() {
                    let coord = if axes.len() == 2 {
                        if which == 0 {
                            idx / inner
                        } else {
                            idx % inner
                        }
                    } else {
                        idx
                    };
                    let value = axis.values[coord];
                    assign(&mut point, &axis.name, value)?;
                    rec.insert(axis.name.clone(), float_value(value));
                }
                rec.extend(eval_point(&point, &spec, crit)?);
                Ok(rec)
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let mut resolved = crate::commands::witness::resolved_map(&params, &spec)?;
    resolved.insert("ranges".into(), json!(range_texts));
    resolved.insert(
        "criteria".into(),
        json!({
            "d": crit.d,
            "dprime": crit.dprime,
            "mgvt": crit.mgvt,
            "second": crit.second,
        }),
    );
    resolved.insert("grid_points".into(), json!(total));
    resolved.insert("grid_cap".into(), json!(cap));
    resolved.insert("eta1".into(), float_value(eta1));
    resolved.insert("eta2".into(), float_value(eta2));
    let mut notes: Vec<String> = Vec::new();
    if let Some(n) = spec_note {
        notes.push(n);
    }
    if let Some(n) = crit_note {
        notes.push(n);
    }
    if !notes.is_empty() {
        resolved.insert("notes".into(), json!(notes.join("; ")));
    }

    let report = Report {
        command: "scan",
        seed: ctx.seed,
        flags: echo_flags(args)?,
        config_file: ctx.raw_config.clone(),
        resolved: Value::Object(resolved),
        summary: None,
        records,
    };
    report.write(ctx.format(Format::Csv)?, ctx.output.as_ref())
}
