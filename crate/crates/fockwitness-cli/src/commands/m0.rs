//! `m0`: critical sample counts from concentration bounds — the number
//! of shots per setting guaranteeing accuracy ε with confidence 1 − δ.

use clap::Args;
use serde::Serialize;
use serde_json::{json, Map, Value};

use fockwitness::sampling::{m0_chebyshev, m0_hoeffding_noon, m0_hoeffding_range};

use crate::commands::{echo_flags, Context, Globals};
use crate::error::{usage, CliResult};
use crate::output::{float_value, Format, Report};

#[derive(Args, Serialize, Debug)]
pub struct M0Args {
    /// Concentration bound: chebyshev | hoeffding-range | hoeffding-noon
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<String>,

    /// Accuracy target ε
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,

    /// Failure probability δ
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,

    /// Single-estimate variance (chebyshev)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,

    /// Hard range of the estimator (hoeffding-range)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,

    /// Excitation number N (hoeffding-noon)
    #[arg(long = "N", alias = "n", value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
}

pub fn run(globals: &Globals, args: &M0Args) -> CliResult<()> {
    let ctx = Context::new(globals)?;
    let bound = args
        .bound
        .clone()
        .or_else(|| ctx.file.bound.clone())
        .ok_or_else(|| usage("missing parameter: --bound"))?;
    let epsilon = args
        .epsilon
        .or(ctx.file.epsilon)
        .ok_or_else(|| usage("missing parameter: --epsilon"))?;
    let delta = args
        .delta
        .or(ctx.file.delta)
        .ok_or_else(|| usage("missing parameter: --delta"))?;

    let mut rec = Map::new();
    rec.insert("bound".into(), json!(bound));
    rec.insert("epsilon".into(), float_value(epsilon));
    rec.insert("delta".into(), float_value(delta));
    let m0 = match bound.as_str() {
        "chebyshev" => {
            let variance = args
                .variance
                .or(ctx.file.variance)
                .ok_or_else(|| usage("the chebyshev bound needs --variance"))?;
            rec.insert("variance".into(), float_value(variance));
            m0_chebyshev(variance, delta, epsilon)?
        }
        "hoeffding-range" => {
            let range = args
                .range
                .or(ctx.file.range)
                .ok_or_else(|| usage("the hoeffding-range bound needs --range"))?;
            rec.insert("range".into(), float_value(range));
            m0_hoeffding_range(range, delta, epsilon)?
        }
        "hoeffding-noon" => {
            let n = args
                .n
                .or(ctx.file.n)
                .ok_or_else(|| usage("the hoeffding-noon bound needs --N"))?;
            rec.insert("n".into(), json!(n));
            m0_hoeffding_noon(n, delta, epsilon)?
        }
        other => {
            return Err(usage(format!(
                "unknown bound '{other}' (expected chebyshev, hoeffding-range, or hoeffding-noon)"
            )))
        }
    };
    rec.insert("m0".into(), json!(m0));

    let report = Report {
        command: "m0",
        seed: ctx.seed,
        flags: echo_flags(args)?,
        config_file: ctx.raw_config.clone(),
        resolved: Value::Object(rec.clone()),
        summary: None,
        records: vec![rec],
    };
    report.write(ctx.format(Format::Json)?, ctx.output.as_ref())
}
