use std::path::PathBuf;

use clap::Args;
use ifl_core::model::FrameworkParams;
use ifl_core::sweep::{
    coupled_target, sweep_coupled, sweep_coverage, sweep_single, sweep_zeta, write_coverage_csv,
    write_csv, CoverageMc, CoverageRow, Grid, SweepRow, SweepSpec, SweepVar, ZetaFamily,
};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::model_cmds::DEFAULT_ZETA;
use crate::params::{parse_zeta, ParamArgs};

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Parameter to vary: p_d, c, t_d, t_r, n_d, n_r or beta.
    #[arg(long)]
    pub vary: String,
    /// Inclusive grid START:STOP:STEP.
    #[arg(long)]
    pub grid: String,
    /// Hold t_d = floor(ALPHA * t_r) or n_d = floor(ALPHA * n_r).
    #[arg(long)]
    pub couple: Option<f64>,
    #[arg(long, default_value = DEFAULT_ZETA)]
    pub zeta: String,
    /// Sweep an agreement-function family over --eta-grid as well.
    #[arg(long)]
    pub zeta_family: Option<String>,
    /// η grid for --zeta-family; defaults to the family's standard range.
    #[arg(long)]
    pub eta_grid: Option<String>,
    /// θ for the step family.
    #[arg(long, default_value_t = 0.8)]
    pub theta: f64,
    /// Monte-Carlo samples per point for beta sweeps (0 disables).
    #[arg(long, default_value_t = 0)]
    pub mc_samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path; the params sidecar goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value = "0:1:0.05")]
    pub grid: String,
    #[arg(long, default_value_t = 0)]
    pub mc_samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn coverage_summary(
    base: &FrameworkParams,
    grid: &Grid,
    rows: &[CoverageRow],
    mc: Option<CoverageMc>,
    out: &std::path::Path,
) -> Value {
    json!({
        "params": base,
        "vary": "beta",
        "grid": grid.text(),
        "rows": rows.len(),
        "mc_samples": mc.map(|m| m.samples),
        "seed": mc.map(|m| m.seed),
        "out": out,
    })
}

fn run_coverage(
    base: FrameworkParams,
    grid_text: &str,
    mc_samples: u64,
    seed: u64,
    out: &std::path::Path,
) -> CliResult<Value> {
    let grid = Grid::parse(grid_text)?;
    let mc = (mc_samples > 0).then_some(CoverageMc {
        samples: mc_samples,
        seed,
    });
    let rows = sweep_coverage(&base, &grid, mc)?;
    write_coverage_csv(&base, &rows, out)?;
    Ok(coverage_summary(&base, &grid, &rows, mc, out))
}

pub fn coverage(args: &CoverageArgs) -> CliResult<Value> {
    let base = args.params.resolve()?;
    run_coverage(base, &args.grid, args.mc_samples, args.seed, &args.out)
}

fn summary(rows: &[SweepRow]) -> (usize, usize) {
    let skipped = rows.iter().filter(|r| r.is_skipped()).count();
    (rows.len(), skipped)
}

pub fn sweep(args: &SweepArgs) -> CliResult<Value> {
    let base = args.params.resolve()?;
    let vary: SweepVar = args.vary.parse().map_err(CliError::usage)?;
    if vary == SweepVar::Beta {
        if args.couple.is_some() || args.zeta_family.is_some() {
            return Err(CliError::usage("beta sweeps take neither --couple nor --zeta-family"));
        }
        return run_coverage(base, &args.grid, args.mc_samples, args.seed, &args.out);
    }
    let spec = SweepSpec {
        base,
        vary,
        grid: Grid::parse(&args.grid)?,
        couple_alpha: args.couple,
        zeta: parse_zeta(&args.zeta)?,
    };
    let coupled_name = args
        .couple
        .and_then(|_| coupled_target(vary))
        .map(|t| t.name());
    let rows = match &args.zeta_family {
        Some(family) => {
            let family: ZetaFamily = family.parse().map_err(CliError::usage)?;
            let eta_text = args.eta_grid.as_deref().unwrap_or(family.default_grid());
            let eta_grid = Grid::parse(eta_text)?;
            sweep_zeta(&spec, family, &eta_grid, args.theta)?
        }
        None if args.couple.is_some() => sweep_coupled(&spec)?,
        None => sweep_single(&spec)?,
    };
    write_csv(&rows, coupled_name, &args.out)?;
    let (total, skipped) = summary(&rows);
    Ok(json!({
        "params": base,
        "vary": vary,
        "grid": spec.grid.text(),
        "couple": args.couple,
        "zeta": if args.zeta_family.is_some() { Value::Null } else { json!(spec.zeta) },
        "zeta_family": args.zeta_family,
        "eta_grid": args.zeta_family.as_ref().map(|f| {
            args.eta_grid.clone().unwrap_or_else(|| {
                f.parse::<ZetaFamily>().map(|z| z.default_grid().to_string()).unwrap_or_default()
            })
        }),
        "theta": args.theta,
        "rows": total,
        "skipped": skipped,
        "out": args.out,
    }))
}
