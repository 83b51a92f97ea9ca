//! Parameter sweeps over the closed forms, with CSV and params-sidecar output.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::combinatorics::{decimal_to_rational, rational_to_f64};
use crate::model::{
    coverage_bound, expected_accuracy, expected_agreement, AgreementFn, CoverageParams,
    FrameworkParams, ModelError,
};
use crate::report::{num, Table};
use crate::simulator::mc_coverage_accuracy;

/// Upper bound on grid points, to catch typos like a zero-ish step.
pub const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid grid {grid:?}: {reason}")]
    Grid { grid: String, reason: String },
    #[error("invalid coupling: {0}")]
    Coupling(String),
    #[error("parameter {0} cannot be swept here")]
    Variable(SweepVar),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    PD,
    C,
    TD,
    TR,
    ND,
    NR,
    Beta,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            Self::PD => "p_d",
            Self::C => "c",
            Self::TD => "t_d",
            Self::TR => "t_r",
            Self::ND => "n_d",
            Self::NR => "n_r",
            Self::Beta => "beta",
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "p_d" => Self::PD,
            "c" => Self::C,
            "t_d" => Self::TD,
            "t_r" => Self::TR,
            "n_d" => Self::ND,
            "n_r" => Self::NR,
            "beta" => Self::Beta,
            other => {
                return Err(format!(
                    "unknown parameter {other:?} (expected p_d, c, t_d, t_r, n_d, n_r or beta)"
                ))
            }
        })
    }
}

/// Inclusive arithmetic grid `start:stop:step` over exact decimals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    text: String,
    points: Vec<BigRational>,
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let x: f64 = s.trim().parse().ok()?;
    decimal_to_rational(x)
}

impl Grid {
    pub fn parse(text: &str) -> Result<Self, SweepError> {
        let fail = |reason: &str| SweepError::Grid {
            grid: text.to_string(),
            reason: reason.to_string(),
        };
        let parts: Vec<&str> = text.split(':').collect();
        let nums: Option<Vec<BigRational>> = parts.iter().map(|p| parse_decimal(p)).collect();
        let nums = nums.ok_or_else(|| fail("expected decimal numbers"))?;
        let (start, stop, step) = match nums.as_slice() {
            [v] => (v.clone(), v.clone(), BigRational::from_integer(BigInt::from(1))),
            [a, b, s] => (a.clone(), b.clone(), s.clone()),
            _ => return Err(fail("expected start:stop:step or a single value")),
        };
        if !step.is_positive() {
            return Err(fail("step must be positive"));
        }
        if start > stop {
            return Err(fail("start exceeds stop"));
        }
        let count = ((&stop - &start) / &step).floor().to_integer();
        let count = count
            .to_usize()
            .filter(|&c| c < MAX_GRID_POINTS)
            .ok_or_else(|| fail("too many grid points"))?;
        let points = (0..=count)
            .map(|i| &start + &step * BigRational::from_integer(BigInt::from(i)))
            .collect();
        Ok(Self {
            text: text.to_string(),
            points,
        })
    }

    pub fn points(&self) -> &[BigRational] {
        &self.points
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(rational_to_f64).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: FrameworkParams,
    pub vary: SweepVar,
    pub grid: Grid,
    pub couple_alpha: Option<f64>,
    pub zeta: AgreementFn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RowOutcome {
    Ok { acc: f64, agr: f64 },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    /// Value of the coupled dominant parameter, when coupling is active.
    pub coupled: Option<u32>,
    /// Agreement-function parameter, for ζ sweeps.
    pub eta: Option<f64>,
    /// Fully resolved parameters, when the grid value could be applied.
    pub params: Option<FrameworkParams>,
    pub outcome: RowOutcome,
}

impl SweepRow {
    pub fn diff(&self) -> Option<f64> {
        match self.outcome {
            RowOutcome::Ok { acc, agr } => Some(acc - agr),
            RowOutcome::Skipped { .. } => None,
        }
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self.outcome, RowOutcome::Skipped { .. })
    }
}

fn as_count(v: &BigRational) -> Result<u32, String> {
    if !v.is_integer() || v.is_negative() {
        return Err(format!("{} is not a non-negative integer", rational_to_f64(v)));
    }
    v.to_integer()
        .to_u32()
        .ok_or_else(|| format!("{} is out of range", rational_to_f64(v)))
}

fn apply(base: &FrameworkParams, var: SweepVar, v: &BigRational) -> Result<FrameworkParams, String> {
    let mut p = *base;
    match var {
        SweepVar::PD => p.p_d = rational_to_f64(v),
        SweepVar::C => p.c = as_count(v)?,
        SweepVar::TD => p.t_d = as_count(v)?,
        SweepVar::TR => p.t_r = as_count(v)?,
        SweepVar::ND => p.n_d = as_count(v)?,
        SweepVar::NR => p.n_r = as_count(v)?,
        SweepVar::Beta => return Err("beta is swept with sweep_coverage".into()),
    }
    Ok(p)
}

fn evaluate(params: FrameworkParams, zeta: &AgreementFn) -> RowOutcome {
    let result = expected_accuracy(&params).and_then(|acc| Ok((acc, expected_agreement(&params, zeta)?)));
    match result {
        Ok((acc, agr)) => RowOutcome::Ok { acc, agr },
        Err(e) => RowOutcome::Skipped {
            reason: e.to_string(),
        },
    }
}

fn skipped(param: f64, coupled: Option<u32>, params: Option<FrameworkParams>, reason: String) -> SweepRow {
    SweepRow {
        param,
        coupled,
        eta: None,
        params,
        outcome: RowOutcome::Skipped { reason },
    }
}

fn single_point(spec_base: &FrameworkParams, vary: SweepVar, zeta: &AgreementFn, v: &BigRational) -> SweepRow {
    let param = rational_to_f64(v);
    match apply(spec_base, vary, v) {
        Err(reason) => skipped(param, None, None, reason),
        Ok(p) => SweepRow {
            param,
            coupled: None,
            eta: None,
            params: Some(p),
            outcome: evaluate(p, zeta),
        },
    }
}

/// One row per grid point, in grid order.
pub fn sweep_single(spec: &SweepSpec) -> Result<Vec<SweepRow>, SweepError> {
    if spec.couple_alpha.is_some() {
        return Err(SweepError::Coupling("use sweep_coupled for coupled sweeps".into()));
    }
    if spec.vary == SweepVar::Beta {
        return Err(SweepError::Variable(spec.vary));
    }
    spec.zeta.validate()?;
    Ok(spec
        .grid
        .points()
        .par_iter()
        .map(|v| single_point(&spec.base, spec.vary, &spec.zeta, v))
        .collect())
}

/// The dominant parameter tied to a coupled rare one.
pub fn coupled_target(vary: SweepVar) -> Option<SweepVar> {
    match vary {
        SweepVar::TR => Some(SweepVar::TD),
        SweepVar::NR => Some(SweepVar::ND),
        _ => None,
    }
}

/// Sweeps `t_r` or `n_r` while holding the dominant counterpart at
/// `floor(alpha * value)`.
pub fn sweep_coupled(spec: &SweepSpec) -> Result<Vec<SweepRow>, SweepError> {
    let alpha = spec
        .couple_alpha
        .ok_or_else(|| SweepError::Coupling("no coupling factor given".into()))?;
    let target = coupled_target(spec.vary).ok_or_else(|| {
        SweepError::Coupling(format!("only t_r and n_r can be coupled, not {}", spec.vary))
    })?;
    let alpha_q = decimal_to_rational(alpha)
        .filter(|a| a.is_positive())
        .ok_or_else(|| SweepError::Coupling(format!("alpha must be positive, got {alpha}")))?;
    spec.zeta.validate()?;
    Ok(spec
        .grid
        .points()
        .par_iter()
        .map(|v| {
            let param = rational_to_f64(v);
            let base = match apply(&spec.base, spec.vary, v) {
                Ok(p) => p,
                Err(reason) => return skipped(param, None, None, reason),
            };
            let coupled_q = (&alpha_q * v).floor();
            let coupled = match as_count(&coupled_q) {
                Ok(c) => c,
                Err(reason) => return skipped(param, None, None, reason),
            };
            let p = apply(&base, target, &coupled_q).expect("integer coupled value applies");
            if coupled == 0 {
                let reason = format!("{target} = floor({alpha} * {param}) = 0");
                return skipped(param, Some(0), Some(p), reason);
            }
            SweepRow {
                param,
                coupled: Some(coupled),
                eta: None,
                params: Some(p),
                outcome: evaluate(p, &spec.zeta),
            }
        })
        .collect())
}

/// Agreement-function family for a ζ sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZetaFamily {
    Constant,
    Proportional,
    Step,
}

impl FromStr for ZetaFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(Self::Constant),
            "proportional" => Ok(Self::Proportional),
            "step" => Ok(Self::Step),
            other => Err(format!("unknown family {other:?} (expected constant, proportional or step)")),
        }
    }
}

impl ZetaFamily {
    /// Default η grid for the family.
    pub fn default_grid(self) -> &'static str {
        match self {
            Self::Constant => "0.5:0.95:0.05",
            Self::Proportional => "1:2.8:0.2",
            Self::Step => "0:9:1",
        }
    }

    pub fn build(self, eta: &BigRational, theta: f64) -> Result<AgreementFn, ModelError> {
        let x = rational_to_f64(eta);
        match self {
            Self::Constant => AgreementFn::constant(x),
            Self::Proportional => AgreementFn::proportional(x),
            Self::Step => {
                let k = as_count(eta).map_err(ModelError::AgreementFn)?;
                AgreementFn::step(k, theta)
            }
        }
    }
}

/// Diff surface over `(η, param)`: the outer loop runs over η. Coupling in
/// `spec` is honoured; `spec.zeta` is ignored.
pub fn sweep_zeta(
    spec: &SweepSpec,
    family: ZetaFamily,
    eta_grid: &Grid,
    theta: f64,
) -> Result<Vec<SweepRow>, SweepError> {
    let zetas: Vec<(f64, AgreementFn)> = eta_grid
        .points()
        .iter()
        .map(|eta| Ok((rational_to_f64(eta), family.build(eta, theta)?)))
        .collect::<Result<_, ModelError>>()?;
    let mut rows = Vec::with_capacity(zetas.len() * spec.grid.len());
    for (eta, zeta) in zetas {
        let inner = SweepSpec {
            zeta,
            ..spec.clone()
        };
        let block = if inner.couple_alpha.is_some() {
            sweep_coupled(&inner)?
        } else {
            sweep_single(&inner)?
        };
        rows.extend(block.into_iter().map(|r| SweepRow { eta: Some(eta), ..r }));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub beta: f64,
    pub bound: f64,
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
}

/// Optional Monte-Carlo column for [`sweep_coverage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverageMc {
    pub samples: u64,
    pub seed: u64,
}

/// Coverage bound with `beta_d = beta_r = beta` across the grid.
pub fn sweep_coverage(
    base: &FrameworkParams,
    beta_grid: &Grid,
    mc: Option<CoverageMc>,
) -> Result<Vec<CoverageRow>, SweepError> {
    base.validate()?;
    beta_grid
        .points()
        .par_iter()
        .map(|b| {
            let beta = rational_to_f64(b);
            let cov = CoverageParams::uniform(beta);
            let bound = coverage_bound(base, &cov)?;
            let est = mc
                .map(|m| mc_coverage_accuracy(base, &cov, m.samples, m.seed))
                .transpose()?;
            Ok(CoverageRow {
                beta,
                bound,
                mc_mean: est.as_ref().map(|e| e.mean),
                mc_stderr: est.as_ref().map(|e| e.stderr),
            })
        })
        .collect()
}

/// CSV rendering of sweep rows. `coupled_name` labels the coupled column.
pub fn rows_table(rows: &[SweepRow], coupled_name: Option<&str>) -> Table {
    let has_eta = rows.iter().any(|r| r.eta.is_some());
    let mut header = Vec::new();
    if has_eta {
        header.push("eta".to_string());
    }
    header.push("param".to_string());
    if let Some(name) = coupled_name {
        header.push(name.to_string());
    }
    header.extend(["acc", "agr", "diff", "skipped", "reason"].map(String::from));
    let mut t = Table::new(header);
    for r in rows {
        let mut cells = Vec::new();
        if has_eta {
            cells.push(r.eta.map(num).unwrap_or_default());
        }
        cells.push(num(r.param));
        if coupled_name.is_some() {
            cells.push(r.coupled.map(|c| c.to_string()).unwrap_or_default());
        }
        match &r.outcome {
            RowOutcome::Ok { acc, agr } => {
                cells.extend([num(*acc), num(*agr), num(acc - agr), "0".into(), String::new()])
            }
            RowOutcome::Skipped { reason } => {
                cells.extend([String::new(), String::new(), String::new(), "1".into(), reason.clone()])
            }
        }
        t.push(cells);
    }
    t
}

pub fn coverage_table(rows: &[CoverageRow]) -> Table {
    let with_mc = rows.iter().any(|r| r.mc_mean.is_some());
    let mut header = vec!["beta", "bound"];
    if with_mc {
        header.extend(["mc_mean", "mc_stderr"]);
    }
    let mut t = Table::new(header);
    for r in rows {
        let mut cells = vec![num(r.beta), num(r.bound)];
        if with_mc {
            cells.push(r.mc_mean.map(num).unwrap_or_default());
            cells.push(r.mc_stderr.map(num).unwrap_or_default());
        }
        t.push(cells);
    }
    t
}

/// `<dir>/<stem>.params.json` next to a CSV path.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.params.json"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), SweepError> {
    fs::write(path, contents).map_err(|source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the CSV and its params sidecar (one resolved parameter object per
/// row, `null` where the grid value could not be applied).
pub fn write_csv(rows: &[SweepRow], coupled_name: Option<&str>, path: &Path) -> Result<(), SweepError> {
    write_file(path, &rows_table(rows, coupled_name).to_csv())?;
    let params: Vec<Option<FrameworkParams>> = rows.iter().map(|r| r.params).collect();
    let json = serde_json::to_string_pretty(&params).expect("params serialize");
    write_file(&sidecar_path(path), &(json + "\n"))
}

/// Writes a coverage CSV and a sidecar holding the base parameters and betas.
pub fn write_coverage_csv(
    base: &FrameworkParams,
    rows: &[CoverageRow],
    path: &Path,
) -> Result<(), SweepError> {
    write_file(path, &coverage_table(rows).to_csv())?;
    let params: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(base).expect("params serialize");
            v["beta_d"] = r.beta.into();
            v["beta_r"] = r.beta.into();
            v
        })
        .collect();
    let json = serde_json::to_string_pretty(&params).expect("params serialize");
    write_file(&sidecar_path(path), &(json + "\n"))
}

/// Largest `|diff|` over evaluated rows.
pub fn max_abs_diff(rows: &[SweepRow]) -> f64 {
    rows.iter().filter_map(SweepRow::diff).map(f64::abs).fold(0.0, f64::max)
}

/// `max(diff) - min(diff)` over evaluated rows.
pub fn diff_range(rows: &[SweepRow]) -> f64 {
    let diffs: Vec<f64> = rows.iter().filter_map(SweepRow::diff).collect();
    if diffs.is_empty() {
        return 0.0;
    }
    let max = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::q_components;

    fn spec(vary: SweepVar, grid: &str) -> SweepSpec {
        SweepSpec {
            base: FrameworkParams::reference_defaults(),
            vary,
            grid: Grid::parse(grid).unwrap(),
            couple_alpha: None,
            zeta: AgreementFn::Constant(0.9),
        }
    }

    #[test]
    fn grid_semantics() {
        assert_eq!(Grid::parse("0.1:0.9:0.4").unwrap().values(), vec![0.1, 0.5, 0.9]);
        assert_eq!(Grid::parse("0.5:0.95:0.05").unwrap().len(), 10);
        assert_eq!(Grid::parse("0:1:0.05").unwrap().len(), 21);
        assert_eq!(Grid::parse("60:300:20").unwrap().len(), 13);
        assert_eq!(Grid::parse("1:2.8:0.2").unwrap().values().last(), Some(&2.8));
        assert_eq!(Grid::parse("0:1:0.3").unwrap().values(), vec![0.0, 0.3, 0.6, 0.9]);
        assert_eq!(Grid::parse("7").unwrap().values(), vec![7.0]);
        for bad in ["", "a:b:c", "1:0:1", "0:1:0", "0:1:-1", "0:1"] {
            assert!(Grid::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn single_rows() {
        let rows = sweep_single(&spec(SweepVar::PD, "0.1:0.9:0.4")).unwrap();
        assert_eq!(rows.iter().map(|r| r.param).collect::<Vec<_>>(), vec![0.1, 0.5, 0.9]);
        for r in &rows {
            let RowOutcome::Ok { acc, agr } = r.outcome else { panic!() };
            assert_eq!(r.diff(), Some(acc - agr));
        }
        assert_eq!(rows[1].params.unwrap().p_d, 0.5);
    }

    #[test]
    fn capacity_sweep_skips_odd() {
        let rows = sweep_single(&spec(SweepVar::C, "10:40:1")).unwrap();
        assert_eq!(rows.len(), 31);
        let mut last = 0.0;
        for r in &rows {
            let odd = (r.param as u32) % 2 == 1;
            assert_eq!(r.is_skipped(), odd);
            if let RowOutcome::Ok { acc, .. } = r.outcome {
                assert!(acc >= last);
                last = acc;
            } else {
                let RowOutcome::Skipped { reason } = &r.outcome else { unreachable!() };
                assert!(reason.contains("c must be even"));
            }
        }
        let frac = sweep_single(&spec(SweepVar::C, "10:11:0.5")).unwrap();
        assert!(frac[1].is_skipped() && frac[1].params.is_none());
    }

    #[test]
    fn coupling_rule() {
        let mut s = spec(SweepVar::NR, "4:10:6");
        s.couple_alpha = Some(0.2);
        let rows = sweep_coupled(&s).unwrap();
        assert_eq!(rows[0].coupled, Some(0));
        assert!(rows[0].is_skipped());
        assert_eq!(rows[1].coupled, Some(2));
        assert_eq!(rows[1].params.unwrap().n_d, 2);

        let mut s = spec(SweepVar::TR, "180");
        s.couple_alpha = Some(0.2);
        assert_eq!(sweep_coupled(&s).unwrap()[0].params.unwrap().t_d, 36);

        let mut bad = spec(SweepVar::PD, "0.5");
        bad.couple_alpha = Some(0.2);
        assert!(sweep_coupled(&bad).is_err());
        assert!(sweep_single(&bad).is_err());
        let mut neg = spec(SweepVar::TR, "180");
        neg.couple_alpha = Some(-1.0);
        assert!(sweep_coupled(&neg).is_err());
    }

    #[test]
    fn zeta_surface() {
        let s = spec(SweepVar::TR, "60:100:20");
        let eta = Grid::parse(ZetaFamily::Constant.default_grid()).unwrap();
        let rows = sweep_zeta(&s, ZetaFamily::Constant, &eta, 0.8).unwrap();
        assert_eq!(rows.len(), 30);
        assert_eq!(rows[0].eta, Some(0.5));
        for r in rows.iter().filter(|r| r.eta == Some(0.5)) {
            let p = r.params.unwrap();
            let acc = expected_accuracy(&p).unwrap();
            let q1 = q_components(&p).unwrap().q1;
            assert!((r.diff().unwrap() - (acc - (0.5 + 0.5 * q1))).abs() < 1e-12);
        }
        let step = Grid::parse(ZetaFamily::Step.default_grid()).unwrap();
        assert_eq!(sweep_zeta(&s, ZetaFamily::Step, &step, 0.8).unwrap().len(), 30);
        let out_of_domain = Grid::parse("0.2:0.4:0.1").unwrap();
        assert!(sweep_zeta(&s, ZetaFamily::Constant, &out_of_domain, 0.8).is_err());
        let fractional = Grid::parse("0.5").unwrap();
        assert!(sweep_zeta(&s, ZetaFamily::Step, &fractional, 0.8).is_err());
    }

    #[test]
    fn coverage_rows() {
        let base = FrameworkParams::reference_defaults();
        let rows = sweep_coverage(&base, &Grid::parse("0:1:0.05").unwrap(), None).unwrap();
        assert_eq!(rows.len(), 21);
        assert_eq!(rows[0].bound, 0.5);
        assert_eq!(rows[20].bound, 1.0);
        assert!(rows.windows(2).all(|w| w[0].bound <= w[1].bound));
        assert!(sweep_coverage(&base, &Grid::parse("0:2:1").unwrap(), None).is_err());
    }

    #[test]
    fn csv_output() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_csv(&[], None, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "param,acc,agr,diff,skipped,reason\n");
        assert_eq!(fs::read_to_string(dir.path().join("empty.params.json")).unwrap(), "[]\n");

        let rows = sweep_single(&spec(SweepVar::C, "18:21:1")).unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_csv(&rows, None, &a).unwrap();
        write_csv(&rows, None, &b).unwrap();
        let text = fs::read_to_string(&a).unwrap();
        assert_eq!(text, fs::read_to_string(&b).unwrap());

        let parsed: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
        for (row, cells) in rows.iter().zip(&parsed) {
            assert_eq!(cells[0].parse::<f64>().unwrap(), row.param);
            match row.outcome {
                RowOutcome::Ok { acc, agr } => {
                    assert!((cells[1].parse::<f64>().unwrap() - acc).abs() < 1e-10);
                    assert!((cells[2].parse::<f64>().unwrap() - agr).abs() < 1e-10);
                    assert_eq!(cells[4], "0");
                }
                RowOutcome::Skipped { .. } => {
                    assert_eq!(&cells[1..4], &["", "", ""]);
                    assert_eq!(cells[4], "1");
                }
            }
        }
        let sidecar: Vec<Option<FrameworkParams>> =
            serde_json::from_str(&fs::read_to_string(dir.path().join("a.params.json")).unwrap()).unwrap();
        assert_eq!(sidecar.len(), 4);
        assert_eq!(sidecar[1].unwrap().c, 19);
    }
}
