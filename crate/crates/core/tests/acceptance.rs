//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `RECORDED_FAILURES` are known not to hold for the
//! model as specified; they still print FAIL but do not fail the run.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ifl_core::analytics::{
    feature_frequency, feature_similarity, per_class_frequency, shared_error_pair, MistakeMode,
    PredictionMatrix,
};
use ifl_core::combinatorics::rational_to_f64;
use ifl_core::enumerate::{enum_accuracy, enum_agreement};
use ifl_core::formats::Manifest;
use ifl_core::model::{
    agreement_by_cases_exact, agreement_from_q_exact, coverage_bound, coverage_bound_exact,
    expected_accuracy, expected_accuracy_exact, expected_accuracy_fast, expected_agreement,
    expected_agreement_exact, expected_agreement_fast, q_components_exact, AgreementFn,
    CoverageParams, FrameworkParams,
};
use ifl_core::simulator::{mc_accuracy, mc_agreement, mc_coverage_accuracy, EstimatorMode};
use ifl_core::sweep::{
    max_abs_diff, sweep_coupled, sweep_single, Grid, RowOutcome, SweepRow, SweepSpec, SweepVar,
};
use ifl_core::tensor::{
    build_lambda, cluster_features, correlation_matrix, fit_pca, project, run_pipeline,
    ActivationMatrix, PipelineConfig,
};
use num_rational::BigRational;
use num_traits::One;

type Outcome = Result<String, String>;

const RECORDED_FAILURES: &[&str] = &["gde-coupling"];

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let battery = common::oracle_battery(60);
    let zetas = common::zeta_families();
    let mut checks = 0;
    for p in &battery {
        let acc = expected_accuracy_exact(p).map_err(|e| e.to_string())?;
        ensure(enum_accuracy(p).map_err(|e| e.to_string())? == acc, || format!("accuracy differs at {p:?}"))?;
        let acc_f = rational_to_f64(&acc);
        ensure(
            rel_close(expected_accuracy(p).unwrap(), acc_f) && rel_close(expected_accuracy_fast(p).unwrap(), acc_f),
            || format!("float accuracy off at {p:?}"),
        )?;
        for z in &zetas {
            let agr = expected_agreement_exact(p, z).map_err(|e| e.to_string())?;
            let e = enum_agreement(p, z).map_err(|e| e.to_string())?;
            ensure(e.agreement == agr, || format!("agreement differs at {p:?} {z}"))?;
            let agr_f = rational_to_f64(&agr);
            ensure(
                rel_close(expected_agreement(p, z).unwrap(), agr_f)
                    && rel_close(expected_agreement_fast(p, z).unwrap(), agr_f),
                || format!("float agreement off at {p:?} {z}"),
            )?;
            checks += 1;
        }
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(60))?;
    Ok(format!("{} parameter sets x {} agreement functions ({checks} pairs) exact in {elapsed:.1?}", battery.len(), zetas.len()))
}

fn reference_defaults() -> Outcome {
    let start = Instant::now();
    let p = FrameworkParams::reference_defaults();
    let z = AgreementFn::Constant(0.9);
    let acc = expected_accuracy(&p).map_err(|e| e.to_string())?;
    ensure((acc - 0.84471).abs() <= 1e-4, || format!("Acc = {acc}"))?;
    let agr = expected_agreement(&p, &z).map_err(|e| e.to_string())?;
    let (mut acc_hits, mut agr_hits) = (0, 0);
    for seed in 0..100 {
        if mc_accuracy(&p, 1_000_000, seed).unwrap().within(acc, 3.0) {
            acc_hits += 1;
        }
        if mc_agreement(&p, &z, 1_000_000, seed, EstimatorMode::Rao).unwrap().within(agr, 3.0) {
            agr_hits += 1;
        }
    }
    ensure(acc_hits >= 99 && agr_hits >= 99, || {
        format!("within 3 stderr: accuracy {acc_hits}/100, agreement {agr_hits}/100")
    })?;
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(300))?;
    Ok(format!(
        "Acc = {acc:.6}; Monte Carlo within 3 stderr for {acc_hits}/100 (accuracy) and {agr_hits}/100 (agreement) seeds at 1e6 samples in {elapsed:.1?}"
    ))
}

fn form_identity() -> Outcome {
    let battery = common::oracle_battery(60);
    let zetas = common::zeta_families();
    for p in &battery {
        let q = q_components_exact(p).map_err(|e| e.to_string())?;
        let total = q.q2.iter().fold(&q.q1 + &q.q3, |s, x| s + x);
        ensure(total == BigRational::one(), || format!("q1 + sum q2 + q3 != 1 at {p:?}"))?;
        for z in &zetas {
            ensure(
                agreement_from_q_exact(&q, z, p.c) == agreement_by_cases_exact(&q, z, p.c),
                || format!("forms differ at {p:?} {z}"),
            )?;
        }
    }
    Ok(format!("both agreement forms identical and q sums to 1 on {} parameter sets", battery.len()))
}

fn sweep(vary: SweepVar, grid: &str, couple: Option<f64>) -> Result<Vec<SweepRow>, String> {
    let spec = SweepSpec {
        base: FrameworkParams::reference_defaults(),
        vary,
        grid: Grid::parse(grid).map_err(|e| e.to_string())?,
        couple_alpha: couple,
        zeta: AgreementFn::Constant(0.9),
    };
    let rows = if couple.is_some() { sweep_coupled(&spec) } else { sweep_single(&spec) };
    rows.map_err(|e| e.to_string())
}

fn gde_coupling() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for (vary, grid) in [(SweepVar::TR, "60:300:20"), (SweepVar::NR, "5:25:5")] {
        let coupled = sweep(vary, grid, Some(0.2))?;
        let uncoupled = sweep(vary, grid, None)?;
        let (c, u) = (max_abs_diff(&coupled), max_abs_diff(&uncoupled));
        let line = format!("{vary}: coupled max|diff| {c:.6} vs uncoupled {u:.6}");
        if c < u {
            notes.push(line);
        } else {
            let worst = coupled
                .iter()
                .filter(|r| r.diff().is_some_and(|d| d.abs() == c))
                .map(|r| format!(" (worst at {vary}={}, coupled value {:?})", r.param, r.coupled))
                .next()
                .unwrap_or_default();
            failures.push(line + &worst);
        }
    }
    let accs: Vec<f64> = sweep(SweepVar::C, "10:40:2", None)?
        .iter()
        .map(|r| match r.outcome {
            RowOutcome::Ok { acc, .. } => acc,
            RowOutcome::Skipped { .. } => f64::NAN,
        })
        .collect();
    if accs.windows(2).all(|w| w[0] <= w[1]) {
        notes.push("Acc nondecreasing over even c in 10:40".into());
    } else {
        failures.push("Acc not monotone in c".into());
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(10) {
        failures.push(format!("took {elapsed:.1?}"));
    }
    if failures.is_empty() {
        Ok(notes.join("; "))
    } else {
        Err(format!("{}; holds: {}", failures.join("; "), notes.join("; ")))
    }
}

fn coverage() -> Outcome {
    let p = FrameworkParams::reference_defaults();
    let zero = coverage_bound_exact(&p, &CoverageParams::uniform(0.0)).map_err(|e| e.to_string())?;
    let one = coverage_bound_exact(&p, &CoverageParams::uniform(1.0)).map_err(|e| e.to_string())?;
    let half = BigRational::new(1.into(), 2.into());
    ensure(zero == half, || format!("bound(0) = {zero}"))?;
    ensure(one == BigRational::one(), || format!("bound(1) = {one}"))?;
    let mut mc = Vec::new();
    for beta in [0.25, 0.5, 0.75] {
        let cov = CoverageParams::uniform(beta);
        let bound = coverage_bound(&p, &cov).unwrap();
        let est = mc_coverage_accuracy(&p, &cov, 1_000_000, 0).unwrap();
        ensure(est.mean <= bound + 3.0 * est.stderr, || {
            format!("beta {beta}: MC {} exceeds bound {bound} + 3 stderr", est.mean)
        })?;
        mc.push(format!("{beta}: {:.4} <= {bound:.4}", est.mean));
    }
    let grid = Grid::parse("0:1:0.05").map_err(|e| e.to_string())?;
    let bounds: Vec<BigRational> = grid
        .values()
        .iter()
        .map(|&b| coverage_bound_exact(&p, &CoverageParams::uniform(b)).unwrap())
        .collect();
    ensure(bounds.windows(2).all(|w| w[0] <= w[1]), || "bound not monotone".into())?;
    Ok(format!("bound(0) = 1/2, bound(1) = 1 exactly; MC {}; monotone over {} grid points", mc.join(", "), bounds.len()))
}

fn pipeline() -> Outcome {
    // (a) self-correlation
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let act = common::random_activations("r", 500, 32, 1000 + seed);
        let p = project(&act, &fit_pca(&act, 32).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let c = correlation_matrix(&p, &p).map_err(|e| e.to_string())?;
        for a in 0..32 {
            for b in 0..32 {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((c[(a, b)] - target).abs());
            }
        }
    }
    ensure(worst < 1e-6, || format!("self-correlation deviates by {worst}"))?;

    // (b) planted clusters
    let models = common::planted_models(7);
    let proj: Vec<_> = models.iter().map(|a| project(a, &fit_pca(a, 4).unwrap()).unwrap()).collect();
    let assignment = cluster_features(&build_lambda(&proj).unwrap(), 0.9).map_err(|e| e.to_string())?;
    let recovered = assignment.num_clusters() == 4
        && (0..4).all(|a| (1..3).all(|m| assignment.cluster_of(m, a) == assignment.cluster_of(0, a)));
    ensure(recovered, || format!("planted fixture gave {} clusters", assignment.num_clusters()))?;

    // (c) golden files, repeated runs and thread counts
    let golden_dir = common::fixture_dir().join("golden");
    let reference = common::fixture_outputs();
    for (name, bytes) in &reference {
        let stored = fs::read(golden_dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(&stored == bytes, || format!("{name} differs from golden"))?;
    }
    ensure(common::fixture_outputs() == reference, || "second run differs".into())?;
    for threads in [1, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        ensure(pool.install(common::fixture_outputs) == reference, || {
            format!("outputs differ with {threads} threads")
        })?;
    }

    // (d) scale invariance
    let manifest = Manifest::read(&common::fixture_dir().join("manifest.json")).map_err(|e| e.to_string())?;
    let fixture_models = manifest.load_activations().map_err(|e| e.to_string())?;
    let mut scale_cases = vec![
        (fixture_models, common::fixture_config(&manifest)),
        (common::planted_models(11), PipelineConfig { pcs: 4, ..Default::default() }),
    ];
    scale_cases.push((
        (0..3).map(|m| common::random_activations(&format!("r{m}"), 200, 8, 100 + m)).collect(),
        PipelineConfig { pcs: 5, ..Default::default() },
    ));
    for (models, config) in &scale_cases {
        let base = run_pipeline(models, config).map_err(|e| e.to_string())?;
        for s in [4.0f32, 3.7, 0.01] {
            let rescaled: Vec<ActivationMatrix> = models
                .iter()
                .map(|a| {
                    ActivationMatrix::new(a.model_id(), a.rows(), a.cols(), a.values().iter().map(|v| v * s).collect())
                        .unwrap()
                })
                .collect();
            let out = run_pipeline(&rescaled, config).map_err(|e| e.to_string())?;
            let gap = base
                .projections
                .iter()
                .zip(&out.projections)
                .map(|(p, q)| (&p.normalized - &q.normalized).abs().max())
                .fold(0.0, f64::max);
            ensure(gap < 1e-6 && out.tensor.entries() == base.tensor.entries(), || {
                format!("scale {s} changes the pipeline (normalized gap {gap})")
            })?;
        }
    }
    let omega_bytes = reference
        .iter()
        .find(|(n, _)| *n == "omega.itns")
        .map(|(_, b)| b.len())
        .unwrap_or_default();
    Ok(format!(
        "self-correlation max deviation {worst:.1e}; planted 4 clusters recovered; golden Omega ({omega_bytes} bytes) and O.1-O.4 CSVs byte-identical across runs and 1/2/4 threads; Omega unchanged under rescaling by 4, 3.7, 0.01"
    ))
}

fn analytics() -> Outcome {
    let a: BTreeSet<usize> = [1, 2, 3].into();
    let b: BTreeSet<usize> = [2, 3, 4].into();
    let s = feature_similarity(&a, &b);
    ensure(s == 2.0 / 3.0, || format!("similarity {s}"))?;

    let manifest = Manifest::read(&common::fixture_dir().join("manifest.json")).map_err(|e| e.to_string())?;
    let models = manifest.load_activations().map_err(|e| e.to_string())?;
    let omega = run_pipeline(&models, &common::fixture_config(&manifest)).map_err(|e| e.to_string())?.tensor;
    let to_u32 = |v: Vec<u16>| v.into_iter().map(u32::from).collect::<Vec<_>>();
    let labels = to_u32(common::fixture_labels());
    let preds = PredictionMatrix::new(
        common::fixture_predictions().into_iter().map(to_u32).collect(),
        labels.clone(),
        3,
    )
    .map_err(|e| e.to_string())?;
    let per_class = per_class_frequency(&omega.data_features(), &labels, 3).map_err(|e| e.to_string())?;
    for f in feature_frequency(&omega) {
        let sum: usize = per_class[f.feature as usize].iter().sum();
        ensure(sum == f.data_count, || format!("feature {}: class sum {sum} vs {}", f.feature, f.data_count))?;
    }
    let mf = omega.model_features();
    for mode in [MistakeMode::Identical, MistakeMode::Joint] {
        for i in 0..preds.models() {
            for j in 0..preds.models() {
                let x = shared_error_pair(&mf, &preds, mode, i, j);
                let y = shared_error_pair(&mf, &preds, mode, j, i);
                ensure(x.shared_error == y.shared_error && x.shared_features == y.shared_features, || {
                    format!("shared error asymmetric for ({i}, {j})")
                })?;
            }
        }
    }
    Ok("Dice({1,2,3},{2,3,4}) = 2/3; per-class sums equal frequencies; shared error symmetric".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("oracle-equivalence", oracle_equivalence),
        ("reference-defaults", reference_defaults),
        ("form-identity", form_identity),
        ("gde-coupling", gde_coupling),
        ("coverage-bound", coverage),
        ("pipeline-correctness", pipeline),
        ("analytics-identities", analytics),
    ];
    let mut unexpected = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) if RECORDED_FAILURES.contains(&name) => {
                println!("FAIL {name} (recorded deviation): {detail}")
            }
            Err(detail) => {
                unexpected += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
