use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ifl_core::analytics::{
    confidence_feature_table, confidence_table, counts_table, data_model_counts, density_table,
    frequency_table, nearest_neighbors, neighbors_table, per_class_frequency, per_class_table,
    shared_error_csv, shared_error_table, split_feature_density, MistakeMode, PredictionMatrix,
};
use ifl_core::formats::{read_labels, read_tensor, write_tensor, Manifest};
use ifl_core::report::Table;
use ifl_core::tensor::{run_pipeline, InteractionTensor, PipelineConfig};
use serde_json::{json, Value};

use crate::error::{write_file, CliError, CliResult};

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output interaction-tensor file; metadata goes to OUT.meta.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Principal components per model (overrides the manifest).
    #[arg(long)]
    pub pcs: Option<usize>,
    #[arg(long)]
    pub corr_percentile: Option<f64>,
    #[arg(long)]
    pub data_percentile: Option<f64>,
    /// Explicit correlation threshold instead of the percentile.
    #[arg(long)]
    pub gamma_corr: Option<f64>,
    /// Explicit data threshold instead of the percentile.
    #[arg(long)]
    pub gamma_data: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Report {
    /// Data count per feature, most frequent first.
    O1,
    /// Ensemble confidence and feature count per datum.
    O2,
    /// Feature densities of fully-confident vs. remaining data.
    O2Density,
    /// Data and model counts per feature.
    O3,
    /// Shared features and shared errors per model pair.
    O4,
    Neighbors,
    Perclass,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub tensor: PathBuf,
    #[arg(long, value_enum)]
    pub report: Report,
    /// Manifest supplying prediction and label files.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    /// identical (same wrong label) or joint (both wrong).
    #[arg(long, default_value = "identical")]
    pub mistake_mode: String,
    #[arg(long)]
    pub index: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// Number of classes; inferred from the labels when absent.
    #[arg(long)]
    pub num_classes: Option<u32>,
}

#[derive(Debug, Args)]
pub struct NeighborsArgs {
    #[arg(long)]
    pub tensor: PathBuf,
    #[arg(long)]
    pub index: usize,
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn build(args: &BuildArgs) -> CliResult<Value> {
    let manifest = Manifest::read(&args.manifest)?;
    let config = PipelineConfig {
        pcs: args.pcs.unwrap_or(manifest.pcs),
        corr_percentile: args.corr_percentile.unwrap_or(manifest.corr_percentile),
        data_percentile: args.data_percentile.unwrap_or(manifest.data_percentile),
        gamma_corr: args.gamma_corr,
        gamma_data: args.gamma_data,
    };
    let models = manifest.load_activations()?;
    let output = run_pipeline(&models, &config)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    write_tensor(&output.tensor, &args.out)?;
    let t = &output.tensor;
    let meta = json!({
        "manifest": args.manifest,
        "models": manifest.models.iter().map(|m| &m.id).collect::<Vec<_>>(),
        "config": config,
        "gamma_corr": t.gamma_corr,
        "gamma_data": t.gamma_data,
        "m": t.m,
        "n": t.n,
        "t": t.t,
        "nnz": t.nnz(),
        "num_clusters": output.assignment.num_clusters(),
        "cluster_sizes": output.assignment.cluster_sizes(),
        "warnings": output.warnings,
    });
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
    write_file(&meta_path(&args.out), &text)?;
    Ok(meta)
}

struct Supervision {
    predictions: Option<PredictionMatrix>,
    labels: Option<Vec<u32>>,
    num_classes: Option<u32>,
}

fn load_supervision(manifest: Option<&Path>, num_classes: Option<u32>) -> CliResult<Supervision> {
    let Some(path) = manifest else {
        return Ok(Supervision {
            predictions: None,
            labels: None,
            num_classes,
        });
    };
    let manifest = Manifest::read(path)?;
    let labels: Option<Vec<u32>> = manifest
        .labels
        .as_ref()
        .map(|p| read_labels(p).map(|l| l.into_iter().map(u32::from).collect()))
        .transpose()?;
    let preds: Option<Vec<Vec<u32>>> = manifest
        .models
        .iter()
        .map(|m| {
            m.predictions
                .as_ref()
                .map(|p| read_labels(p).map(|l| l.into_iter().map(u32::from).collect()))
                .transpose()
        })
        .collect::<Result<Option<Vec<_>>, _>>()?;
    let observed = labels
        .iter()
        .flatten()
        .chain(preds.iter().flatten().flatten())
        .max()
        .map(|&m| m + 1);
    let num_classes = num_classes.or(observed);
    let predictions = match (preds, &labels, num_classes) {
        (Some(p), Some(l), Some(c)) => Some(PredictionMatrix::new(p, l.clone(), c)?),
        _ => None,
    };
    Ok(Supervision {
        predictions,
        labels,
        num_classes,
    })
}

fn require<T>(value: Option<T>, report: &str, what: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::usage(format!("report {report} needs {what} (pass --manifest)")))
}

fn check_data(tensor: &InteractionTensor, n: usize) -> CliResult<()> {
    if tensor.n as usize != n {
        return Err(CliError::usage(format!(
            "tensor has {} data but the labels cover {n}",
            tensor.n
        )));
    }
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<Value> {
    let tensor = read_tensor(&args.tensor)?;
    let mode: MistakeMode = args.mistake_mode.parse().map_err(CliError::usage)?;
    let sup = load_supervision(args.manifest.as_deref(), args.num_classes)?;
    let name = format!("{:?}", args.report).to_lowercase();
    let table: Table = match args.report {
        Report::O1 => frequency_table(&tensor),
        Report::O2 => {
            let preds = require(sup.predictions, "o2", "predictions and labels")?;
            confidence_table(&confidence_feature_table(&tensor, &preds)?)
        }
        Report::O2Density => {
            let preds = require(sup.predictions, "o2-density", "predictions and labels")?;
            density_table(&split_feature_density(&tensor, &preds)?)
        }
        Report::O3 => counts_table(&data_model_counts(&tensor)),
        Report::O4 => {
            let preds = require(sup.predictions, "o4", "predictions and labels")?;
            check_data(&tensor, preds.data())?;
            let (rows, warnings) = shared_error_table(&tensor.model_features(), &preds, mode)?;
            shared_error_csv(&rows, &warnings)
        }
        Report::Neighbors => {
            let index = args
                .index
                .ok_or_else(|| CliError::usage("report neighbors needs --index"))?;
            neighbors_table(&nearest_neighbors(&tensor.data_features(), index, args.top)?)
        }
        Report::Perclass => {
            let labels = require(sup.labels, "perclass", "labels")?;
            check_data(&tensor, labels.len())?;
            let classes = sup.num_classes.unwrap_or(1);
            per_class_table(
                &per_class_frequency(&tensor.data_features(), &labels, classes)?,
                classes,
            )
        }
    };
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    write_file(&args.out, &table.to_csv())?;
    Ok(json!({
        "tensor": args.tensor,
        "report": name,
        "mistake_mode": mode,
        "rows": table.rows.len(),
        "warnings": table.warnings,
        "out": args.out,
    }))
}

pub fn neighbors(args: &NeighborsArgs) -> CliResult<Value> {
    let tensor = read_tensor(&args.tensor)?;
    let found = nearest_neighbors(&tensor.data_features(), args.index, args.top)?;
    Ok(json!({
        "index": args.index,
        "top": args.top,
        "neighbors": found,
    }))
}
