//! Shared fixtures for the integration suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ifl_core::analytics::{
    confidence_feature_table, confidence_table, counts_table, data_model_counts, frequency_table,
    shared_error_csv, shared_error_table, MistakeMode, PredictionMatrix,
};
use ifl_core::enumerate::{agreement_size, MAX_POOL};
use ifl_core::formats::{encode_tensor, Manifest};
use ifl_core::model::{AgreementFn, FrameworkParams};
use ifl_core::tensor::{run_pipeline, ActivationMatrix, PipelineConfig};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Valid parameter sets with pools up to 8, capacity up to 6 and datum sizes
/// up to 3, drawn deterministically and kept within the enumeration budget.
pub fn oracle_battery(count: usize) -> Vec<FrameworkParams> {
    let p_choices = [0.0, 0.25, 0.5, 0.6, 0.7, 0.9, 1.0, 0.35];
    let budget = BigUint::from(2_000_000u32);
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut out = Vec::new();
    while out.len() < count {
        let p = FrameworkParams {
            p_d: p_choices[rng.gen_range(0..p_choices.len())],
            c: 2 * rng.gen_range(1..=3),
            t_d: rng.gen_range(1..=8),
            t_r: rng.gen_range(1..=8),
            n_d: rng.gen_range(1..=3),
            n_r: rng.gen_range(1..=3),
        };
        let fits = p.validate().is_ok()
            && agreement_size(&p).map(|s| s <= budget).unwrap_or(false)
            && p.t_d <= MAX_POOL;
        if fits && !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// One or more members of every agreement-function family.
pub fn zeta_families() -> Vec<AgreementFn> {
    vec![
        AgreementFn::Constant(0.9),
        AgreementFn::Constant(0.5),
        AgreementFn::Constant(1.0),
        AgreementFn::Proportional(1.5),
        AgreementFn::Proportional(4.0),
        AgreementFn::Step { eta: 1, theta: 0.8 },
        AgreementFn::Step { eta: 2, theta: 0.6 },
    ]
}

/// Three models whose columns are noisy copies of four shared latent
/// signals with distinct variances, in a model-specific column order.
pub fn planted_models(seed: u64) -> Vec<ActivationMatrix> {
    const N: usize = 2000;
    const K: usize = 4;
    let sigma = 0.05;
    let scales = [2.0, 1.5, 1.0, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let noise = Normal::new(0.0, sigma).unwrap();
    let latent: Vec<[f64; K]> = (0..N)
        .map(|_| std::array::from_fn(|j| scales[j] * unit.sample(&mut rng)))
        .collect();
    let orders = [[0, 1, 2, 3], [2, 0, 3, 1], [3, 2, 1, 0]];
    orders
        .iter()
        .enumerate()
        .map(|(m, order)| {
            let mut values = Vec::with_capacity(N * K);
            for row in &latent {
                for &j in order {
                    values.push((row[j] + noise.sample(&mut rng)) as f32);
                }
            }
            ActivationMatrix::new(format!("planted{m}"), N, K, values).unwrap()
        })
        .collect()
}

pub fn random_activations(id: &str, rows: usize, cols: usize, seed: u64) -> ActivationMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..rows * cols).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    ActivationMatrix::new(id, rows, cols, values).unwrap()
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Pipeline configuration for the checked-in fixture.
pub fn fixture_config(manifest: &Manifest) -> PipelineConfig {
    PipelineConfig {
        pcs: manifest.pcs,
        corr_percentile: manifest.corr_percentile,
        data_percentile: manifest.data_percentile,
        gamma_corr: None,
        gamma_data: None,
    }
}

/// Ω bytes and the O.1 to O.4 CSVs for the checked-in fixture.
pub fn fixture_outputs() -> Vec<(&'static str, Vec<u8>)> {
    let manifest = Manifest::read(&fixture_dir().join("manifest.json")).unwrap();
    let models = manifest.load_activations().unwrap();
    let out = run_pipeline(&models, &fixture_config(&manifest)).unwrap();
    let omega = &out.tensor;
    let labels: Vec<u32> = ifl_core::formats::read_labels(manifest.labels.as_ref().unwrap())
        .unwrap()
        .into_iter()
        .map(u32::from)
        .collect();
    let preds: Vec<Vec<u32>> = manifest
        .models
        .iter()
        .map(|m| {
            ifl_core::formats::read_labels(m.predictions.as_ref().unwrap())
                .unwrap()
                .into_iter()
                .map(u32::from)
                .collect()
        })
        .collect();
    let preds = PredictionMatrix::new(preds, labels, 3).unwrap();
    let (pairs, warnings) =
        shared_error_table(&omega.model_features(), &preds, MistakeMode::Identical).unwrap();
    vec![
        ("omega.itns", encode_tensor(omega)),
        ("o1.csv", frequency_table(omega).to_csv().into_bytes()),
        (
            "o2.csv",
            confidence_table(&confidence_feature_table(omega, &preds).unwrap())
                .to_csv()
                .into_bytes(),
        ),
        ("o3.csv", counts_table(&data_model_counts(omega)).to_csv().into_bytes()),
        ("o4.csv", shared_error_csv(&pairs, &warnings).to_csv().into_bytes()),
    ]
}

const FIXTURE_ROWS: usize = 10;
const FIXTURE_DIM: usize = 4;

/// Hand-set activations: three models sharing three signals
/// `s1`, `s2`, `s3` over ten data, mixed into four columns with small
/// model-specific perturbations.
pub fn fixture_activations() -> Vec<ActivationMatrix> {
    let s1 = [3.0, -3.0, 2.0, -2.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0];
    let s2 = [0.0, 0.0, 0.0, 0.0, 2.0, -2.0, 1.5, -1.5, 1.0, -1.0];
    let s3 = [0.5, 0.5, -0.5, -0.5, 0.0, 0.0, 0.5, 0.5, -0.5, -0.5];
    let wobble = [
        [0.0, 0.1, -0.1, 0.0, 0.05, 0.0, -0.05, 0.1, 0.0, -0.1],
        [0.1, 0.0, 0.0, -0.1, 0.0, 0.05, 0.0, -0.05, 0.1, 0.0],
        [-0.05, 0.0, 0.1, 0.0, -0.1, 0.0, 0.05, 0.0, 0.0, 0.1],
    ];
    (0..3)
        .map(|m| {
            let w = &wobble[m];
            let mut values = Vec::with_capacity(FIXTURE_ROWS * FIXTURE_DIM);
            for n in 0..FIXTURE_ROWS {
                let row = match m {
                    0 => [s1[n] + w[n], s2[n], s3[n], w[n]],
                    1 => [s2[n] - w[n], s1[n] + s3[n], -s1[n] + s3[n], 0.5 * w[n]],
                    _ => [s3[n] + w[n], -s2[n], s1[n], s2[n] - w[n]],
                };
                values.extend(row.iter().map(|&v| v as f32));
            }
            ActivationMatrix::new(format!("model{m}"), FIXTURE_ROWS, FIXTURE_DIM, values).unwrap()
        })
        .collect()
}

pub fn fixture_labels() -> Vec<u16> {
    vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0]
}

pub fn fixture_predictions() -> Vec<Vec<u16>> {
    vec![
        vec![0, 1, 2, 0, 1, 2, 1, 1, 2, 2],
        vec![0, 1, 2, 1, 1, 2, 1, 0, 2, 0],
        vec![0, 1, 0, 0, 1, 2, 2, 1, 2, 2],
    ]
}

pub const FIXTURE_MANIFEST: &str = r#"{
  "models": [
    {"id": "model0", "activations": "model0.actv", "predictions": "model0.pred"},
    {"id": "model1", "activations": "model1.actv", "predictions": "model1.pred"},
    {"id": "model2", "activations": "model2.actv", "predictions": "model2.pred"}
  ],
  "labels": "labels.pred",
  "pcs": 3,
  "corr_percentile": 90,
  "data_percentile": 80
}
"#;

/// Fixture input files as `(name, bytes)`.
pub fn fixture_inputs() -> Vec<(String, Vec<u8>)> {
    use ifl_core::formats::{encode_activations, encode_labels};
    let mut files = vec![("manifest.json".to_string(), FIXTURE_MANIFEST.as_bytes().to_vec())];
    for (m, act) in fixture_activations().iter().enumerate() {
        files.push((format!("model{m}.actv"), encode_activations(act)));
    }
    for (m, preds) in fixture_predictions().iter().enumerate() {
        files.push((format!("model{m}.pred"), encode_labels(preds)));
    }
    files.push(("labels.pred".to_string(), encode_labels(&fixture_labels())));
    files
}

/// Regenerate fixture files when `IFL_BLESS=1`.
pub fn blessing() -> bool {
    std::env::var("IFL_BLESS").map(|v| v == "1").unwrap_or(false)
}
