//! `witness`: evaluate one separability minor on one state and emit a
//! single fully-annotated record.

use clap::Args;
use serde_json::{json, Map, Value};

use fockwitness::fock::DEFAULT_TAIL_BOUND;
use fockwitness::states::{FamilyTag, StateFamily};
use fockwitness::witness::{
    minor_d, minor_d_lossy, minor_dprime, minor_dprime_lossy, optimal_reference, MinorSpec,
    WitnessResult,
};

use crate::commands::{echo_flags, witness_fields, Context, Globals};
use crate::config::{
    efficiencies, merge_params, resolve_family, resolve_reference, resolve_spec, Params, RefChoice,
};
use crate::error::CliResult;
use crate::output::{complex_value, float_value, Format, Report};

#[derive(Args, Debug)]
pub struct WitnessArgs {
    #[command(flatten)]
    pub params: Params,
}

/// Everything resolved about one witness evaluation point; shared with
/// the scan command.
pub struct Evaluation {
    pub result: WitnessResult,
    pub cutoff_state: usize,
    pub cutoff_reference: Option<usize>,
    pub reference_kind: &'static str,
    pub reference_amplitudes: Option<(num_complex::Complex64, num_complex::Complex64)>,
}

/// Build the state, resolve the reference, and evaluate the minor with
/// the requested noise model.
pub fn evaluate(params: &Params, spec: &MinorSpec) -> CliResult<Evaluation> {
    let family = resolve_family(params)?;
    let choice = resolve_reference(params)?;
    let (eta1, eta2, lossy) = efficiencies(params);
    let tail = params.tail_bound.unwrap_or(DEFAULT_TAIL_BOUND);
    let built = family.build_with_tail_bound(tail)?;

    let (reference_kind, reference_family, fallback_note): (&'static str, Option<StateFamily>, _) =
        match choice {
            RefChoice::Replica => ("replica", None, None),
            RefChoice::Optimal => {
                let fit = optimal_reference(&built.state, spec)?;
                let note = fit.degenerate.then(|| {
                    "cross moment vanishes; optimal reference degenerates to vacuum".to_string()
                });
                ("optimal", Some(fit.family()), note)
            }
            RefChoice::Coherent(gamma, delta) => (
                "coherent",
                Some(StateFamily::new(FamilyTag::CoherentProduct { gamma, delta })),
                None,
            ),
        };

    let (mut result, cutoff_reference, reference_amplitudes) = match &reference_family {
        None => {
            let result = if lossy {
                minor_d_lossy(&built.state, spec, eta1, eta2)?
            } else {
                minor_d(&built.state, spec)?
            };
            (result, None, None)
        }
        Some(ref_family) => {
            let ref_built = ref_family.build_with_tail_bound(tail)?;
            let result = if lossy {
                minor_dprime_lossy(&built.state, &ref_built.state, spec, eta1, eta2)?
            } else {
                minor_dprime(&built.state, &ref_built.state, spec)?
            };
            let amps = match ref_family.tag {
                FamilyTag::CoherentProduct { gamma, delta } => Some((gamma, delta)),
                _ => None,
            };
            (result, Some(ref_built.report.cutoff), amps)
        }
    };
    if let Some(note) = fallback_note {
        result.metadata.notes.push(note);
    }
    Ok(Evaluation {
        result,
        cutoff_state: built.report.cutoff,
        cutoff_reference,
        reference_kind,
        reference_amplitudes,
    })
}

/// Resolved-parameter echo common to `witness` and `scan` records.
pub fn resolved_map(params: &Params, spec: &MinorSpec) -> CliResult<Map<String, Value>> {
    let mut map = match serde_json::to_value(params)? {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    let (m, n, p, q) = spec.exponents();
    map.insert("spec".into(), json!(format!("{m},{n},{p},{q}")));
    let (eta1, eta2, _) = efficiencies(params);
    map.insert("eta1".into(), float_value(eta1));
    map.insert("eta2".into(), float_value(eta2));
    map.insert(
        "tail_bound".into(),
        float_value(params.tail_bound.unwrap_or(DEFAULT_TAIL_BOUND)),
    );
    Ok(map)
}

pub fn run(globals: &Globals, args: &WitnessArgs) -> CliResult<()> {
    let ctx = Context::new(globals)?;
    let params = merge_params(&args.params, &ctx.file);
    let (spec, spec_note) = resolve_spec(&params)?;
    let mut eval = evaluate(&params, &spec)?;
    if let Some(note) = spec_note {
        eval.result.metadata.notes.push(note);
    }

    let mut rec = Map::new();
    rec.insert(
        "family".into(),
        json!(resolve_family(&params)?.tag.name()),
    );
    let (m, n, p, q) = spec.exponents();
    rec.insert("spec".into(), json!(format!("{m},{n},{p},{q}")));
    rec.insert("order".into(), json!(spec.order()));
    rec.insert("reference".into(), json!(eval.reference_kind));
    if let Some((gamma, delta)) = eval.reference_amplitudes {
        rec.insert("reference_gamma".into(), complex_value(gamma));
        rec.insert("reference_delta".into(), complex_value(delta));
    }
    witness_fields(&mut rec, &eval.result);
    let (eta1, eta2, _) = efficiencies(&params);
    rec.insert("eta1".into(), float_value(eta1));
    rec.insert("eta2".into(), float_value(eta2));
    if let Some(p) = params.dephasing {
        rec.insert("dephasing".into(), float_value(p));
    }
    rec.insert("cutoff".into(), json!(eval.cutoff_state));
    if let Some(c) = eval.cutoff_reference {
        rec.insert("cutoff_reference".into(), json!(c));
    }
    rec.insert(
        "tail_bound".into(),
        float_value(params.tail_bound.unwrap_or(DEFAULT_TAIL_BOUND)),
    );

    let report = Report {
        command: "witness",
        seed: ctx.seed,
        flags: echo_flags(&args.params)?,
        config_file: ctx.raw_config.clone(),
        resolved: Value::Object(resolved_map(&params, &spec)?),
        summary: None,
        records: vec![rec],
    };
    report.write(ctx.format(Format::Json)?, ctx.output.as_ref())
}
