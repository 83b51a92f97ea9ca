//! The combinatorial feature-learning model: parameters, capacity split,
//! agreement functions, and the closed forms for expected accuracy,
//! expected pairwise agreement and the coverage bound.
//!
//! Closed forms are evaluated exactly over big rationals and converted to
//! `f64` at the boundary. The `*_fast` variants evaluate the same formulas
//! directly in floating point with telescoped binomial ratios.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{
    decimal_to_rational, miss_ratio_f64, miss_ratio_q, overlap_pmf_f64, overlap_pmf_q,
    rational_to_f64,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("p_d must lie in [0, 1], got {0}")]
    ProbabilityOutOfRange(f64),
    #[error("c must be even, got {0}")]
    OddCapacity(u32),
    #[error("n_d must satisfy 1 <= n_d <= t_d (n_d = {n_d}, t_d = {t_d})")]
    DominantDatumSize { n_d: u32, t_d: u32 },
    #[error("n_r must satisfy 1 <= n_r <= t_r (n_r = {n_r}, t_r = {t_r})")]
    RareDatumSize { n_r: u32, t_r: u32 },
    #[error("c_d = {c_d} exceeds t_d = {t_d}")]
    DominantCapacity { c_d: u32, t_d: u32 },
    #[error("c_r = {c_r} exceeds t_r = {t_r}")]
    RareCapacity { c_r: u32, t_r: u32 },
    #[error("coverage {name} must lie in [0, 1], got {value}")]
    CoverageOutOfRange { name: &'static str, value: f64 },
    #[error("invalid agreement function: {0}")]
    AgreementFn(String),
}

/// The six free parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameworkParams {
    /// Probability that a datum is dominant.
    pub p_d: f64,
    /// Total model capacity in features; must be even.
    pub c: u32,
    /// Dominant features per class.
    pub t_d: u32,
    /// Rare features per class.
    pub t_r: u32,
    /// Features carried by a dominant datum.
    pub n_d: u32,
    /// Features carried by a rare datum.
    pub n_r: u32,
}

impl Default for FrameworkParams {
    fn default() -> Self {
        Self::reference_defaults()
    }
}

/// Per-class capacity split of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capacities {
    pub c_d: u32,
    pub c_r: u32,
}

impl FrameworkParams {
    /// p_d=0.7, c=20, t_d=20, t_r=180, n_d=5, n_r=10.
    pub const fn reference_defaults() -> Self {
        Self {
            p_d: 0.7,
            c: 20,
            t_d: 20,
            t_r: 180,
            n_d: 5,
            n_r: 10,
        }
    }

    pub fn p_r(&self) -> f64 {
        1.0 - self.p_d
    }

    /// `p_d` as the exact rational of its decimal representation.
    pub fn p_d_exact(&self) -> BigRational {
        decimal_to_rational(self.p_d).unwrap_or_else(BigRational::zero)
    }

    /// Checks every parameter invariant and returns the capacity split.
    pub fn validate(&self) -> Result<Capacities, ModelError> {
        if !(0.0..=1.0).contains(&self.p_d) || self.p_d.is_nan() {
            return Err(ModelError::ProbabilityOutOfRange(self.p_d));
        }
        if self.n_d == 0 || self.n_d > self.t_d {
            return Err(ModelError::DominantDatumSize {
                n_d: self.n_d,
                t_d: self.t_d,
            });
        }
        if self.n_r == 0 || self.n_r > self.t_r {
            return Err(ModelError::RareDatumSize {
                n_r: self.n_r,
                t_r: self.t_r,
            });
        }
        derived_capacities(self)
    }
}

/// Splits the per-class budget `c/2` into dominant and rare slots:
/// `c_d = round_half_up(p_d * c / 2)`, `c_r = c/2 - c_d`.
pub fn derived_capacities(params: &FrameworkParams) -> Result<Capacities, ModelError> {
    if !(0.0..=1.0).contains(&params.p_d) || params.p_d.is_nan() {
        return Err(ModelError::ProbabilityOutOfRange(params.p_d));
    }
    if params.c % 2 != 0 {
        return Err(ModelError::OddCapacity(params.c));
    }
    let half = params.c / 2;
    let scaled = params.p_d_exact() * BigRational::from_integer(BigInt::from(half))
        + BigRational::new(BigInt::one(), BigInt::from(2));
    let c_d = scaled.floor().to_integer();
    let c_d: u32 = u32::try_from(c_d).unwrap_or(half).min(half);
    let c_r = half - c_d;
    if c_d > params.t_d {
        return Err(ModelError::DominantCapacity { c_d, t_d: params.t_d });
    }
    if c_r > params.t_r {
        return Err(ModelError::RareCapacity { c_r, t_r: params.t_r });
    }
    Ok(Capacities { c_d, c_r })
}

/// Probability that two models agree on a datum neither can classify from
/// its features, as a function of the `k` class features they share and the
/// capacity `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AgreementFn {
    /// `eta` regardless of `k`; `eta` in `[0.5, 1]`.
    Constant(f64),
    /// `min(eta * k / c, 1)`; `eta > 0`.
    Proportional(f64),
    /// `theta` while `k <= eta`, `1` above.
    Step { eta: u32, theta: f64 },
}

impl AgreementFn {
    pub const DEFAULT_STEP_THETA: f64 = 0.8;

    pub fn constant(eta: f64) -> Result<Self, ModelError> {
        let z = Self::Constant(eta);
        z.validate()?;
        Ok(z)
    }

    pub fn proportional(eta: f64) -> Result<Self, ModelError> {
        let z = Self::Proportional(eta);
        z.validate()?;
        Ok(z)
    }

    pub fn step(eta: u32, theta: f64) -> Result<Self, ModelError> {
        let z = Self::Step { eta, theta };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            Self::Constant(eta) if !(0.5..=1.0).contains(&eta) => Err(ModelError::AgreementFn(
                format!("constant eta must lie in [0.5, 1], got {eta}"),
            )),
            Self::Proportional(eta) if !(eta > 0.0 && eta.is_finite()) => Err(
                ModelError::AgreementFn(format!("proportional eta must be positive, got {eta}")),
            ),
            Self::Step { theta, .. } if !(0.5..=1.0).contains(&theta) => Err(
                ModelError::AgreementFn(format!("step theta must lie in [0.5, 1], got {theta}")),
            ),
            _ => Ok(()),
        }
    }

    /// Evaluates the function at `k` shared features and capacity `c`.
    /// A zero capacity is treated as `c = 1`.
    pub fn eval(&self, k: u32, c: u32) -> f64 {
        match *self {
            Self::Constant(eta) => eta,
            Self::Proportional(eta) => (eta * k as f64 / c.max(1) as f64).min(1.0),
            Self::Step { eta, theta } => {
                if k <= eta {
                    theta
                } else {
                    1.0
                }
            }
        }
    }

    /// Exact evaluation with decimal parameters read as rationals.
    pub fn eval_exact(&self, k: u32, c: u32) -> BigRational {
        let q = |x: f64| decimal_to_rational(x).unwrap_or_else(BigRational::zero);
        match *self {
            Self::Constant(eta) => q(eta),
            Self::Proportional(eta) => {
                let v = q(eta) * BigRational::new(BigInt::from(k), BigInt::from(c.max(1)));
                if v > BigRational::one() {
                    BigRational::one()
                } else {
                    v
                }
            }
            Self::Step { eta, theta } => {
                if k <= eta {
                    q(theta)
                } else {
                    BigRational::one()
                }
            }
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Constant(_) => "constant",
            Self::Proportional(_) => "proportional",
            Self::Step { .. } => "step",
        }
    }
}

impl fmt::Display for AgreementFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(eta) => write!(f, "constant:{eta}"),
            Self::Proportional(eta) => write!(f, "proportional:{eta}"),
            Self::Step { eta, theta } => write!(f, "step:{eta}:{theta}"),
        }
    }
}

impl FromStr for AgreementFn {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::AgreementFn(format!("cannot parse {s:?}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["constant", eta] => Self::constant(num(eta)?),
            ["proportional", eta] => Self::proportional(num(eta)?),
            ["step", eta] => Self::step(
                eta.trim().parse().map_err(|_| bad())?,
                Self::DEFAULT_STEP_THETA,
            ),
            ["step", eta, theta] => Self::step(eta.trim().parse().map_err(|_| bad())?, num(theta)?),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for AgreementFn {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<AgreementFn> for String {
    fn from(z: AgreementFn) -> Self {
        z.to_string()
    }
}

/// Fractions of the dominant and rare feature pools present in training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageParams {
    pub beta_d: f64,
    pub beta_r: f64,
}

impl CoverageParams {
    pub fn uniform(beta: f64) -> Self {
        Self {
            beta_d: beta,
            beta_r: beta,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("beta_d", self.beta_d), ("beta_r", self.beta_r)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::CoverageOutOfRange { name, value });
            }
        }
        Ok(())
    }

    /// Number of learnable features `floor(beta * t)` in a pool of size `t`.
    pub fn covered(beta: f64, pool: u32) -> u32 {
        let q = decimal_to_rational(beta).unwrap_or_else(BigRational::zero)
            * BigRational::from_integer(BigInt::from(pool));
        u32::try_from(q.floor().to_integer()).unwrap_or(0).min(pool)
    }

    /// Number of unlearnable features `floor((1 - beta) * t)`.
    pub fn uncovered(beta: f64, pool: u32) -> u32 {
        let one_minus = BigRational::one() - decimal_to_rational(beta).unwrap_or_else(BigRational::zero);
        let q = one_minus * BigRational::from_integer(BigInt::from(pool));
        u32::try_from(q.floor().to_integer()).unwrap_or(0).min(pool)
    }
}

/// Event-space partition behind the agreement formula.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QComponents {
    /// Both models share a feature with the datum.
    pub q1: f64,
    /// `q2[k - 1]`: neither model overlaps the datum and they share `k`
    /// class features, for `k = 1..=c`.
    pub q2: Vec<f64>,
    /// Everything else.
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QComponentsExact {
    pub q1: BigRational,
    pub q2: Vec<BigRational>,
    pub q3: BigRational,
}

impl QComponentsExact {
    pub fn to_f64(&self) -> QComponents {
        QComponents {
            q1: rational_to_f64(&self.q1),
            q2: self.q2.iter().map(rational_to_f64).collect(),
            q3: rational_to_f64(&self.q3),
        }
    }
}

fn q_int(x: u32) -> i64 {
    i64::from(x)
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

/// Exact expected accuracy over the model and data distributions.
pub fn expected_accuracy_exact(params: &FrameworkParams) -> Result<BigRational, ModelError> {
    let caps = params.validate()?;
    let p_d = params.p_d_exact();
    let p_r = BigRational::one() - &p_d;
    let miss_d = miss_ratio_q(q_int(params.t_d), q_int(caps.c_d), q_int(params.n_d));
    let miss_r = miss_ratio_q(q_int(params.t_r), q_int(caps.c_r), q_int(params.n_r));
    let one = BigRational::one();
    Ok(p_d * (&one - half() * miss_d) + p_r * (&one - half() * miss_r))
}

pub fn expected_accuracy(params: &FrameworkParams) -> Result<f64, ModelError> {
    expected_accuracy_exact(params).map(|q| rational_to_f64(&q))
}

/// Float evaluation of the accuracy formula with telescoped ratios.
pub fn expected_accuracy_fast(params: &FrameworkParams) -> Result<f64, ModelError> {
    let caps = params.validate()?;
    let miss_d = miss_ratio_f64(q_int(params.t_d), q_int(caps.c_d), q_int(params.n_d));
    let miss_r = miss_ratio_f64(q_int(params.t_r), q_int(caps.c_r), q_int(params.n_r));
    Ok(params.p_d * (1.0 - 0.5 * miss_d) + params.p_r() * (1.0 - 0.5 * miss_r))
}

/// Exact `q1`, `q2(k)` for `k = 1..=c`, and `q3 = 1 - q1 - sum q2`.
pub fn q_components_exact(params: &FrameworkParams) -> Result<QComponentsExact, ModelError> {
    let caps = params.validate()?;
    let (t_d, t_r) = (q_int(params.t_d), q_int(params.t_r));
    let (n_d, n_r) = (q_int(params.n_d), q_int(params.n_r));
    let (c_d, c_r) = (q_int(caps.c_d), q_int(caps.c_r));
    let p_d = params.p_d_exact();
    let p_r = BigRational::one() - &p_d;
    let one = BigRational::one();

    let hit_d = &one - miss_ratio_q(t_d, c_d, n_d);
    let hit_r = &one - miss_ratio_q(t_r, c_r, n_r);
    let q1 = &p_d * &hit_d * &hit_d + &p_r * &hit_r * &hit_r;

    // Probability a single model misses a dominant (rare) datum entirely.
    let avoid_d = miss_ratio_q(t_d, n_d, c_d);
    let avoid_r = miss_ratio_q(t_r, n_r, c_r);
    let weight_d = &p_d * &avoid_d * &avoid_d;
    let weight_r = &p_r * &avoid_r * &avoid_r;

    let mut q2 = Vec::with_capacity(params.c as usize);
    for k in 1..=q_int(params.c) {
        let mut dominant_sum = BigRational::zero();
        let mut rare_sum = BigRational::zero();
        for a in 0..=k.min(c_d) {
            let b = k - a;
            if b > c_r {
                continue;
            }
            if !weight_d.is_zero() {
                dominant_sum +=
                    overlap_pmf_q(t_d - n_d, c_d, a) * overlap_pmf_q(t_r, c_r, b);
            }
            if !weight_r.is_zero() {
                rare_sum += overlap_pmf_q(t_d, c_d, a) * overlap_pmf_q(t_r - n_r, c_r, b);
            }
        }
        q2.push(&weight_d * dominant_sum + &weight_r * rare_sum);
    }
    let q3 = q2.iter().fold(&one - &q1, |acc, x| acc - x);
    Ok(QComponentsExact { q1, q2, q3 })
}

pub fn q_components(params: &FrameworkParams) -> Result<QComponents, ModelError> {
    q_components_exact(params).map(|q| q.to_f64())
}

/// Float evaluation of the q-components.
pub fn q_components_fast(params: &FrameworkParams) -> Result<QComponents, ModelError> {
    let caps = params.validate()?;
    let (t_d, t_r) = (q_int(params.t_d), q_int(params.t_r));
    let (n_d, n_r) = (q_int(params.n_d), q_int(params.n_r));
    let (c_d, c_r) = (q_int(caps.c_d), q_int(caps.c_r));
    let (p_d, p_r) = (params.p_d, params.p_r());
    let hit_d = 1.0 - miss_ratio_f64(t_d, c_d, n_d);
    let hit_r = 1.0 - miss_ratio_f64(t_r, c_r, n_r);
    let q1 = p_d * hit_d * hit_d + p_r * hit_r * hit_r;
    let avoid_d = miss_ratio_f64(t_d, n_d, c_d);
    let avoid_r = miss_ratio_f64(t_r, n_r, c_r);
    let weight_d = p_d * avoid_d * avoid_d;
    let weight_r = p_r * avoid_r * avoid_r;
    let mut q2 = Vec::with_capacity(params.c as usize);
    for k in 1..=q_int(params.c) {
        let mut total = 0.0;
        for a in 0..=k.min(c_d) {
            let b = k - a;
            if b > c_r {
                continue;
            }
            if weight_d != 0.0 {
                total += weight_d
                    * overlap_pmf_f64(t_d - n_d, c_d, a)
                    * overlap_pmf_f64(t_r, c_r, b);
            }
            if weight_r != 0.0 {
                total += weight_r
                    * overlap_pmf_f64(t_d, c_d, a)
                    * overlap_pmf_f64(t_r - n_r, c_r, b);
            }
        }
        q2.push(total);
    }
    let q3 = 1.0 - q1 - q2.iter().sum::<f64>();
    Ok(QComponents { q1, q2, q3 })
}

/// Agreement as `1/2 + q1/2 + sum_k (zeta(k, c) - 1/2) q2(k)`.
pub fn agreement_from_q_exact(q: &QComponentsExact, zeta: &AgreementFn, c: u32) -> BigRational {
    let h = half();
    let mut agr = &h + &h * &q.q1;
    for (i, q2k) in q.q2.iter().enumerate() {
        agr += (zeta.eval_exact(i as u32 + 1, c) - &h) * q2k;
    }
    agr
}

/// Agreement as `q1 + q3/2 + sum_k zeta(k, c) q2(k)`; the case-by-case form.
pub fn agreement_by_cases_exact(q: &QComponentsExact, zeta: &AgreementFn, c: u32) -> BigRational {
    let mut agr = &q.q1 + half() * &q.q3;
    for (i, q2k) in q.q2.iter().enumerate() {
        agr += zeta.eval_exact(i as u32 + 1, c) * q2k;
    }
    agr
}

pub fn expected_agreement_exact(
    params: &FrameworkParams,
    zeta: &AgreementFn,
) -> Result<BigRational, ModelError> {
    zeta.validate()?;
    let q = q_components_exact(params)?;
    Ok(agreement_from_q_exact(&q, zeta, params.c))
}

pub fn expected_agreement(params: &FrameworkParams, zeta: &AgreementFn) -> Result<f64, ModelError> {
    expected_agreement_exact(params, zeta).map(|q| rational_to_f64(&q))
}

pub fn expected_agreement_fast(
    params: &FrameworkParams,
    zeta: &AgreementFn,
) -> Result<f64, ModelError> {
    zeta.validate()?;
    let q = q_components_fast(params)?;
    let mut agr = 0.5 + 0.5 * q.q1;
    for (i, q2k) in q.q2.iter().enumerate() {
        agr += (zeta.eval(i as u32 + 1, params.c) - 0.5) * q2k;
    }
    Ok(agr)
}

/// Upper bound on accuracy when only a `beta` fraction of each pool can be
/// learned. Non-integer `(1 - beta) * t` is rounded down.
pub fn coverage_bound_exact(
    params: &FrameworkParams,
    cov: &CoverageParams,
) -> Result<BigRational, ModelError> {
    params.validate()?;
    cov.validate()?;
    let p_d = params.p_d_exact();
    let p_r = BigRational::one() - &p_d;
    let hidden_d = CoverageParams::uncovered(cov.beta_d, params.t_d);
    let hidden_r = CoverageParams::uncovered(cov.beta_r, params.t_r);
    // C(hidden, n) / C(t, n) == miss ratio with t - hidden features removed.
    let miss_d = miss_ratio_q(
        q_int(params.t_d),
        q_int(params.t_d - hidden_d),
        q_int(params.n_d),
    );
    let miss_r = miss_ratio_q(
        q_int(params.t_r),
        q_int(params.t_r - hidden_r),
        q_int(params.n_r),
    );
    let one = BigRational::one();
    Ok(p_d * (&one - half() * miss_d) + p_r * (&one - half() * miss_r))
}

pub fn coverage_bound(params: &FrameworkParams, cov: &CoverageParams) -> Result<f64, ModelError> {
    coverage_bound_exact(params, cov).map(|q| rational_to_f64(&q))
}

pub fn zeta_eval(zeta: &AgreementFn, k: u32, c: u32) -> f64 {
    zeta.eval(k, c)
}

/// Renders a rational as `"num/den"`, or just `"num"` for integers.
pub fn rational_string(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        let sign = if q.is_negative() { "-" } else { "" };
        let g = q.numer().abs().gcd(q.denom());
        debug_assert!(g.is_one());
        format!("{sign}{}/{}", q.numer().abs(), q.denom())
    }
}
