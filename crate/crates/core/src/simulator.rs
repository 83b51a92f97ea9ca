//! Monte-Carlo simulation of the generative process.
//!
//! Every sample `i` draws from its own ChaCha8 stream keyed by `(seed, i)`,
//! and samples are reduced in fixed-size chunks whose partial sums are
//! combined in chunk order. The estimate is therefore a pure function of
//! `(params, n_samples, seed)` whatever the rayon pool size.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{AgreementFn, Capacities, CoverageParams, FrameworkParams, ModelError};

const CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Dominant,
    Rare,
}

/// One feature of the universe: `2 * (t_d + t_r)` of them in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureId {
    pub class_label: u8,
    pub kind: FeatureKind,
    pub index: u32,
}

/// A datum: its label, kind, and the indices of its features inside the
/// `(label, kind)` pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPoint {
    pub label: u8,
    pub kind: FeatureKind,
    pub features: Vec<u32>,
}

impl DataPoint {
    pub fn feature_ids(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.features.iter().map(move |&index| FeatureId {
            class_label: self.label,
            kind: self.kind,
            index,
        })
    }
}

/// Features a model learned for one class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassFeatures {
    pub dominant: Vec<u32>,
    pub rare: Vec<u32>,
}

impl ClassFeatures {
    pub fn pool(&self, kind: FeatureKind) -> &[u32] {
        match kind {
            FeatureKind::Dominant => &self.dominant,
            FeatureKind::Rare => &self.rare,
        }
    }

    /// Number of features present in both.
    pub fn shared_with(&self, other: &ClassFeatures) -> u32 {
        count_shared(&self.dominant, &other.dominant) + count_shared(&self.rare, &other.rare)
    }
}

/// A model's learned feature set, indexed by class label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Hypothesis {
    pub classes: [ClassFeatures; 2],
}

impl Hypothesis {
    pub fn feature_ids(&self) -> impl Iterator<Item = FeatureId> + '_ {
        (0..2u8).flat_map(move |label| {
            let class = &self.classes[label as usize];
            let dom = class.dominant.iter().map(move |&index| FeatureId {
                class_label: label,
                kind: FeatureKind::Dominant,
                index,
            });
            let rare = class.rare.iter().map(move |&index| FeatureId {
                class_label: label,
                kind: FeatureKind::Rare,
                index,
            });
            dom.chain(rare)
        })
    }
}

/// How a pair of models behaves on one datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairCase {
    /// Both models share a feature with the datum and classify it correctly.
    BothCovered,
    /// Neither model covers the datum, but they share `shared >= 1` features
    /// of the datum's class, so their guesses are correlated.
    SharedGuess { shared: u32 },
    /// Anything else: at least one independent random guess.
    Independent,
}

impl PairCase {
    /// Conditional probability that the two models agree.
    pub fn agreement_prob(&self, zeta: &AgreementFn, c: u32) -> f64 {
        match *self {
            Self::BothCovered => 1.0,
            Self::SharedGuess { shared } => zeta.eval(shared, c),
            Self::Independent => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub mean: f64,
    pub stderr: f64,
    #[serde(rename = "n")]
    pub n_samples: u64,
    pub seed: u64,
}

impl EstimateResult {
    /// Whether `target` lies within `sigmas` standard errors of the mean.
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.stderr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    /// Each draw contributes its exact conditional agreement probability.
    Rao,
    /// Each draw contributes a coin flip with that probability.
    Bernoulli,
}

impl std::str::FromStr for EstimatorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rao" => Ok(Self::Rao),
            "bernoulli" => Ok(Self::Bernoulli),
            other => Err(format!("unknown estimator mode {other:?} (expected rao or bernoulli)")),
        }
    }
}

/// Uniform `k`-subset of `0..n` by Floyd's algorithm, written into `out`.
fn sample_distinct<R: Rng + ?Sized>(rng: &mut R, n: u32, k: u32, out: &mut Vec<u32>) {
    out.clear();
    debug_assert!(k <= n);
    for j in (n - k)..n {
        let t = rng.gen_range(0..=j);
        if out.contains(&t) {
            out.push(j);
        } else {
            out.push(t);
        }
    }
}

fn count_shared(a: &[u32], b: &[u32]) -> u32 {
    a.iter().filter(|x| b.contains(x)).count() as u32
}

fn intersects(a: &[u32], b: &[u32]) -> bool {
    a.iter().any(|x| b.contains(x))
}

/// Validated parameters plus the learnable pool sizes.
#[derive(Debug, Clone, Copy)]
struct Setup {
    params: FrameworkParams,
    caps: Capacities,
    /// Features of each pool a hypothesis may draw from (all of them unless
    /// coverage is restricted; the covered features are indices `0..pool`).
    learn_pool_d: u32,
    learn_pool_r: u32,
}

impl Setup {
    fn new(params: &FrameworkParams) -> Result<Self, ModelError> {
        let caps = params.validate()?;
        Ok(Self {
            params: *params,
            caps,
            learn_pool_d: params.t_d,
            learn_pool_r: params.t_r,
        })
    }

    fn with_coverage(params: &FrameworkParams, cov: &CoverageParams) -> Result<Self, ModelError> {
        cov.validate()?;
        let mut setup = Self::new(params)?;
        setup.learn_pool_d = CoverageParams::covered(cov.beta_d, params.t_d);
        setup.learn_pool_r = CoverageParams::covered(cov.beta_r, params.t_r);
        Ok(setup)
    }

    fn sample_datapoint_into<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut DataPoint) {
        x.label = rng.gen_range(0..2u8);
        x.kind = if rng.gen_bool(self.params.p_d) {
            FeatureKind::Dominant
        } else {
            FeatureKind::Rare
        };
        match x.kind {
            FeatureKind::Dominant => {
                sample_distinct(rng, self.params.t_d, self.params.n_d, &mut x.features)
            }
            FeatureKind::Rare => sample_distinct(rng, self.params.t_r, self.params.n_r, &mut x.features),
        }
    }

    fn sample_class_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut ClassFeatures) {
        // Capacity beyond the covered pool is spent on noise, which never
        // matches a datum feature and is not represented.
        let learn_d = self.caps.c_d.min(self.learn_pool_d);
        let learn_r = self.caps.c_r.min(self.learn_pool_r);
        sample_distinct(rng, self.learn_pool_d, learn_d, &mut out.dominant);
        sample_distinct(rng, self.learn_pool_r, learn_r, &mut out.rare);
    }
}

fn fresh_datapoint() -> DataPoint {
    DataPoint {
        label: 0,
        kind: FeatureKind::Dominant,
        features: Vec::new(),
    }
}

/// Draws one datum: uniform label, `Ber(p_d)` kind, and a uniform feature
/// subset of the matching pool.
pub fn sample_datapoint<R: Rng + ?Sized>(
    params: &FrameworkParams,
    rng: &mut R,
) -> Result<DataPoint, ModelError> {
    let setup = Setup::new(params)?;
    let mut x = fresh_datapoint();
    setup.sample_datapoint_into(rng, &mut x);
    x.features.sort_unstable();
    Ok(x)
}

/// Draws one model: `c_d` dominant and `c_r` rare features per class.
pub fn sample_hypothesis<R: Rng + ?Sized>(
    params: &FrameworkParams,
    rng: &mut R,
) -> Result<Hypothesis, ModelError> {
    let setup = Setup::new(params)?;
    let mut h = Hypothesis::default();
    for class in &mut h.classes {
        setup.sample_class_into(rng, class);
        class.dominant.sort_unstable();
        class.rare.sort_unstable();
    }
    Ok(h)
}

/// Probability that `h` classifies `x` correctly: 1 when it holds one of the
/// datum's features, otherwise a fair guess.
pub fn datapoint_correct_prob(h: &Hypothesis, x: &DataPoint) -> f64 {
    class_correct_prob(&h.classes[x.label as usize], x)
}

fn class_correct_prob(class: &ClassFeatures, x: &DataPoint) -> f64 {
    if intersects(class.pool(x.kind), &x.features) {
        1.0
    } else {
        0.5
    }
}

pub fn pair_case(f: &Hypothesis, g: &Hypothesis, x: &DataPoint) -> PairCase {
    let y = x.label as usize;
    class_pair_case(&f.classes[y], &g.classes[y], x)
}

fn class_pair_case(f: &ClassFeatures, g: &ClassFeatures, x: &DataPoint) -> PairCase {
    let f_hit = intersects(f.pool(x.kind), &x.features);
    let g_hit = intersects(g.pool(x.kind), &x.features);
    match (f_hit, g_hit) {
        (true, true) => PairCase::BothCovered,
        (false, false) => match f.shared_with(g) {
            0 => PairCase::Independent,
            shared => PairCase::SharedGuess { shared },
        },
        _ => PairCase::Independent,
    }
}

fn base_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `draw` once per sample index on that index's stream and returns the
/// mean with its standard error.
fn estimate<S, I, D>(n_samples: u64, seed: u64, init: I, draw: D) -> EstimateResult
where
    I: Fn() -> S + Sync,
    D: Fn(&mut S, &mut ChaCha8Rng) -> f64 + Sync,
{
    assert!(n_samples >= 1, "n_samples must be positive");
    let base = base_rng(seed);
    let chunks = n_samples.div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut scratch = init();
            let mut rng = base.clone();
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(n_samples);
            let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
            for i in start..end {
                rng.set_stream(i);
                rng.set_word_pos(0);
                let v = draw(&mut scratch, &mut rng);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(s, q), &(a, b)| (s + a, q + b));
    let n = n_samples as f64;
    let mean = sum / n;
    let stderr = if n_samples > 1 {
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    EstimateResult {
        mean,
        stderr,
        n_samples,
        seed,
    }
}

struct AccScratch {
    x: DataPoint,
    f: ClassFeatures,
}

fn acc_scratch() -> AccScratch {
    AccScratch {
        x: fresh_datapoint(),
        f: ClassFeatures::default(),
    }
}

fn accuracy_draw(setup: &Setup, s: &mut AccScratch, rng: &mut ChaCha8Rng) -> f64 {
    // Only the datum's class of the hypothesis affects the outcome, and the
    // two classes are sampled independently, so the other class is skipped.
    setup.sample_datapoint_into(rng, &mut s.x);
    setup.sample_class_into(rng, &mut s.f);
    class_correct_prob(&s.f, &s.x)
}

/// Monte-Carlo estimate of the expected accuracy.
pub fn mc_accuracy(
    params: &FrameworkParams,
    n_samples: u64,
    seed: u64,
) -> Result<EstimateResult, ModelError> {
    let setup = Setup::new(params)?;
    Ok(estimate(n_samples, seed, acc_scratch, |s, rng| {
        accuracy_draw(&setup, s, rng)
    }))
}

/// Accuracy when hypotheses may only learn the covered `floor(beta * t)`
/// features of each pool. With full coverage this reproduces
/// [`mc_accuracy`] draw for draw.
pub fn mc_coverage_accuracy(
    params: &FrameworkParams,
    cov: &CoverageParams,
    n_samples: u64,
    seed: u64,
) -> Result<EstimateResult, ModelError> {
    let setup = Setup::with_coverage(params, cov)?;
    Ok(estimate(n_samples, seed, acc_scratch, |s, rng| {
        accuracy_draw(&setup, s, rng)
    }))
}

struct AgrScratch {
    x: DataPoint,
    f: ClassFeatures,
    g: ClassFeatures,
}

/// Monte-Carlo estimate of the expected agreement of an i.i.d. model pair.
pub fn mc_agreement(
    params: &FrameworkParams,
    zeta: &AgreementFn,
    n_samples: u64,
    seed: u64,
    mode: EstimatorMode,
) -> Result<EstimateResult, ModelError> {
    zeta.validate()?;
    let setup = Setup::new(params)?;
    let c = params.c;
    let init = || AgrScratch {
        x: fresh_datapoint(),
        f: ClassFeatures::default(),
        g: ClassFeatures::default(),
    };
    Ok(estimate(n_samples, seed, init, |s, rng| {
        setup.sample_datapoint_into(rng, &mut s.x);
        setup.sample_class_into(rng, &mut s.f);
        setup.sample_class_into(rng, &mut s.g);
        let p = class_pair_case(&s.f, &s.g, &s.x).agreement_prob(zeta, c);
        match mode {
            EstimatorMode::Rao => p,
            EstimatorMode::Bernoulli => {
                if rng.gen::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }))
}
