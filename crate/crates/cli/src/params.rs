use std::fs;
use std::path::PathBuf;

use clap::Args;
use ifl_core::model::{AgreementFn, FrameworkParams};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Framework parameters: reference defaults, then the JSON file, then flags.
#[derive(Debug, Args, Clone)]
pub struct ParamArgs {
    /// JSON file with any of p_d, c, t_d, t_r, n_d, n_r.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long = "p-d")]
    pub p_d: Option<f64>,
    #[arg(long)]
    pub c: Option<u32>,
    #[arg(long = "t-d")]
    pub t_d: Option<u32>,
    #[arg(long = "t-r")]
    pub t_r: Option<u32>,
    #[arg(long = "n-d")]
    pub n_d: Option<u32>,
    #[arg(long = "n-r")]
    pub n_r: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialParams {
    p_d: Option<f64>,
    c: Option<u32>,
    t_d: Option<u32>,
    t_r: Option<u32>,
    n_d: Option<u32>,
    n_r: Option<u32>,
}

impl PartialParams {
    fn apply(self, p: &mut FrameworkParams) {
        p.p_d = self.p_d.unwrap_or(p.p_d);
        p.c = self.c.unwrap_or(p.c);
        p.t_d = self.t_d.unwrap_or(p.t_d);
        p.t_r = self.t_r.unwrap_or(p.t_r);
        p.n_d = self.n_d.unwrap_or(p.n_d);
        p.n_r = self.n_r.unwrap_or(p.n_r);
    }
}

/// Parses a params document, naming the offending field on failure.
pub fn parse_params_json(text: &str) -> CliResult<FrameworkParams> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let partial: PartialParams = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::usage(format!("invalid params JSON: {}", e.inner()))
        } else {
            CliError::usage(format!("invalid params JSON at field {path}: {}", e.inner()))
        }
    })?;
    let mut p = FrameworkParams::reference_defaults();
    partial.apply(&mut p);
    Ok(p)
}

impl ParamArgs {
    /// Resolved parameters; not yet validated.
    pub fn resolve(&self) -> CliResult<FrameworkParams> {
        let mut p = match &self.params {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::usage(format!("cannot read {}: {e}", path.display()))
                })?;
                parse_params_json(&text)?
            }
            None => FrameworkParams::reference_defaults(),
        };
        PartialParams {
            p_d: self.p_d,
            c: self.c,
            t_d: self.t_d,
            t_r: self.t_r,
            n_d: self.n_d,
            n_r: self.n_r,
        }
        .apply(&mut p);
        Ok(p)
    }
}

pub fn parse_zeta(s: &str) -> CliResult<AgreementFn> {
    s.parse().map_err(|e: ifl_core::model::ModelError| CliError::usage(e.to_string()))
}
