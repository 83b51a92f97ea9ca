use clap::Args;
use ifl_core::enumerate::{enum_accuracy, enum_agreement};
use ifl_core::model::{
    expected_accuracy, expected_agreement, q_components, rational_string, FrameworkParams,
};
use ifl_core::combinatorics::rational_to_f64;
use ifl_core::simulator::{mc_accuracy, mc_agreement, EstimateResult, EstimatorMode};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::params::{parse_zeta, ParamArgs};

pub const DEFAULT_ZETA: &str = "constant:0.9";

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Agreement function: constant:ETA, proportional:ETA, step:ETA[:THETA].
    #[arg(long, default_value = DEFAULT_ZETA)]
    pub zeta: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// rao (exact conditional probabilities) or bernoulli (sampled outcomes).
    #[arg(long, default_value = "rao")]
    pub mode: String,
}

pub fn closed_form(args: &ModelArgs) -> CliResult<Value> {
    let params = args.params.resolve()?;
    let zeta = parse_zeta(&args.zeta)?;
    let caps = params.validate()?;
    let acc = expected_accuracy(&params)?;
    let agr = expected_agreement(&params, &zeta)?;
    let q = q_components(&params)?;
    Ok(json!({
        "params": params,
        "zeta": zeta,
        "c_d": caps.c_d,
        "c_r": caps.c_r,
        "acc": acc,
        "agr": agr,
        "diff": acc - agr,
        "q1": q.q1,
        "q2": q.q2,
        "q3": q.q3,
    }))
}

#[derive(Serialize)]
struct Compared {
    #[serde(flatten)]
    estimate: EstimateResult,
    closed_form: f64,
    delta: f64,
}

fn compared(estimate: EstimateResult, closed_form: f64) -> Compared {
    Compared {
        estimate,
        closed_form,
        delta: estimate.mean - closed_form,
    }
}

pub fn simulate(args: &SimulateArgs) -> CliResult<Value> {
    let params = args.model.params.resolve()?;
    let zeta = parse_zeta(&args.model.zeta)?;
    let mode: EstimatorMode = args.mode.parse().map_err(CliError::usage)?;
    if args.samples == 0 {
        return Err(CliError::usage("--samples must be at least 1"));
    }
    params.validate()?;
    let acc = mc_accuracy(&params, args.samples, args.seed)?;
    let agr = mc_agreement(&params, &zeta, args.samples, args.seed, mode)?;
    Ok(json!({
        "params": params,
        "zeta": zeta,
        "mode": mode,
        "samples": args.samples,
        "seed": args.seed,
        "accuracy": compared(acc, expected_accuracy(&params)?),
        "agreement": compared(agr, expected_agreement(&params, &zeta)?),
    }))
}

pub fn enumerate(args: &ModelArgs) -> CliResult<Value> {
    let params: FrameworkParams = args.params.resolve()?;
    let zeta = parse_zeta(&args.zeta)?;
    params.validate()?;
    let acc = enum_accuracy(&params)?;
    let agr = enum_agreement(&params, &zeta)?;
    Ok(json!({
        "params": params,
        "zeta": zeta,
        "acc": rational_string(&acc),
        "agr": rational_string(&agr.agreement),
        "q1": rational_string(&agr.q1),
        "q2": agr.q2.iter().map(rational_string).collect::<Vec<_>>(),
        "q3": rational_string(&agr.q3),
        "acc_float": rational_to_f64(&acc),
        "agr_float": rational_to_f64(&agr.agreement),
        "closed_form_acc": expected_accuracy(&params)?,
        "closed_form_agr": expected_agreement(&params, &zeta)?,
    }))
}
