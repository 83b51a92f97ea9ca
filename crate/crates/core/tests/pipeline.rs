mod common;

use ifl_core::formats::{decode_tensor, encode_tensor, Manifest};
use ifl_core::tensor::{
    build_lambda, cluster_features, correlation_matrix, fit_pca, project, run_pipeline,
    ActivationMatrix, PipelineConfig,
};

fn projections(models: &[ActivationMatrix], k: usize) -> Vec<ifl_core::tensor::ProjectedActivations> {
    models
        .iter()
        .map(|a| project(a, &fit_pca(a, k).unwrap()).unwrap())
        .collect()
}

fn scaled(act: &ActivationMatrix, s: f32) -> ActivationMatrix {
    let values = act.values().iter().map(|v| v * s).collect();
    ActivationMatrix::new(act.model_id(), act.rows(), act.cols(), values).unwrap()
}

#[test]
fn within_model_scores_are_uncorrelated() {
    for seed in 0..10 {
        let act = common::random_activations("r", 500, 32, seed);
        let p = &projections(&[act], 32)[0];
        let corr = correlation_matrix(p, p).unwrap();
        for a in 0..32 {
            assert!((corr[(a, a)] - 1.0).abs() < 1e-6);
            for b in (0..32).filter(|&b| b != a) {
                assert!(corr[(a, b)].abs() < 1e-6, "seed {seed} ({a},{b}) = {}", corr[(a, b)]);
            }
        }
    }
}

#[test]
fn planted_clusters_are_recovered() {
    let models = common::planted_models(7);
    let lambda = build_lambda(&projections(&models, 4)).unwrap();
    let assignment = cluster_features(&lambda, 0.9).unwrap();
    assert_eq!(assignment.num_clusters(), 4);
    // Model m's column order is known, so its feature a tracks latent a
    // after PCA sorts by variance; every cluster holds one feature per model.
    for a in 0..4 {
        let c = assignment.cluster_of(0, a);
        for m in 1..3 {
            assert_eq!(assignment.cluster_of(m, a), c);
        }
    }
    assert_eq!(assignment.cluster_sizes(), vec![3, 3, 3, 3]);
}

#[test]
fn identical_models_give_one_cluster_per_component() {
    let act = common::random_activations("a", 300, 20, 3);
    let twin = ActivationMatrix::new("b", 300, 20, act.values().to_vec()).unwrap();
    // Two identity blocks make 1/pcs of the off-diagonal entries equal to 1;
    // at pcs = 12 the 90th percentile stays below them.
    let out = run_pipeline(&[act, twin], &PipelineConfig { pcs: 12, ..Default::default() }).unwrap();
    assert!(out.tensor.gamma_corr < 1.0);
    assert_eq!(out.assignment.num_clusters(), 12);
    for a in 0..12 {
        assert_eq!(out.assignment.cluster_of(0, a), out.assignment.cluster_of(1, a));
    }
}

#[test]
fn scale_invariance() {
    let cases = [
        (common::planted_models(11), 4),
        (
            (0..3)
                .map(|m| common::random_activations(&format!("r{m}"), 200, 8, 100 + m as u64))
                .collect(),
            5,
        ),
    ];
    for (models, pcs) in cases {
        let config = PipelineConfig { pcs, ..Default::default() };
        let base = run_pipeline(&models, &config).unwrap();
        for s in [4.0f32, 3.7, 0.01] {
            let rescaled: Vec<ActivationMatrix> = models.iter().map(|a| scaled(a, s)).collect();
            let out = run_pipeline(&rescaled, &config).unwrap();
            for (p, q) in base.projections.iter().zip(&out.projections) {
                let gap = (&p.normalized - &q.normalized).abs().max();
                assert!(gap < 1e-6, "scale {s}: normalized gap {gap}");
            }
            let (l0, l1) = (build_lambda(&base.projections).unwrap(), build_lambda(&out.projections).unwrap());
            for i in 0..models.len() {
                for j in 0..models.len() {
                    assert!((l0.block(i, j) - l1.block(i, j)).abs().max() < 1e-6);
                }
            }
            assert!((out.tensor.gamma_corr - base.tensor.gamma_corr).abs() < 1e-6);
            assert!((out.tensor.gamma_data - base.tensor.gamma_data).abs() < 1e-6);
            assert_eq!(out.assignment.num_clusters(), base.assignment.num_clusters());
            for m in 0..models.len() {
                for a in 0..pcs {
                    assert_eq!(out.assignment.cluster_of(m, a), base.assignment.cluster_of(m, a));
                }
            }
            assert_eq!(out.tensor.entries(), base.tensor.entries(), "scale {s}");
        }
    }
}

#[test]
fn omega_matches_its_defining_predicate() {
    let manifest = Manifest::read(&common::fixture_dir().join("manifest.json")).unwrap();
    let models = manifest.load_activations().unwrap();
    let out = run_pipeline(&models, &common::fixture_config(&manifest)).unwrap();
    let t = &out.tensor;
    for (m, p) in out.projections.iter().enumerate() {
        for n in 0..p.n() {
            for cluster in 0..t.t {
                let expected = (0..p.k()).any(|a| {
                    !p.zero_columns[a]
                        && out.assignment.cluster_of(m, a) == cluster
                        && p.normalized[(n, a)] > t.gamma_data
                });
                assert_eq!(t.contains(m as u32, n as u32, cluster), expected, "({m},{n},{cluster})");
            }
        }
    }
    let df = t.data_features();
    for n in 0..t.n as usize {
        for c in 0..t.t {
            let any = (0..t.m).any(|m| t.contains(m, n as u32, c));
            assert_eq!(df.get(n, c as usize), any);
        }
    }
}

#[test]
fn pipeline_is_deterministic() {
    let models = common::planted_models(5);
    let config = PipelineConfig { pcs: 4, ..Default::default() };
    let a = encode_tensor(&run_pipeline(&models, &config).unwrap().tensor);
    let b = encode_tensor(&run_pipeline(&models, &config).unwrap().tensor);
    assert_eq!(a, b);
    let decoded = decode_tensor(&a).unwrap();
    assert_eq!(encode_tensor(&decoded), a);
}
