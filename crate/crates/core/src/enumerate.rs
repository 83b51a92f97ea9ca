//! Brute-force expectations over every hypothesis and datum configuration,
//! accumulated as exact rationals.
//!
//! These never touch the closed forms; they count outcomes over explicit
//! feature subsets (bitmasks) and weight them by the generative
//! probabilities. Only the datum's class matters for any outcome and the two
//! labels are exchangeable, so a single class is enumerated.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::combinatorics::binom;
use crate::model::{AgreementFn, FrameworkParams, ModelError};

/// Largest configuration count either oracle will walk.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Widest feature pool representable by the bitmask walker.
pub const MAX_POOL: u32 = 128;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnumError {
    #[error("enumeration needs {size} configurations, above the limit of {limit}")]
    TooLarge { size: BigUint, limit: u64 },
    #[error("feature pool of {pool} exceeds the enumerable width of {max}")]
    PoolTooWide { pool: u32, max: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl EnumError {
    pub fn is_resource_guard(&self) -> bool {
        matches!(self, Self::TooLarge { .. } | Self::PoolTooWide { .. })
    }
}

/// Exact agreement together with the event probabilities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedAgreement {
    pub agreement: BigRational,
    pub q1: BigRational,
    /// `q2[k - 1]` for `k = 1..=c`.
    pub q2: Vec<BigRational>,
    pub q3: BigRational,
}

/// Every `k`-subset of `0..n` as a bitmask, in Gosper order.
fn subsets(n: u32, k: u32) -> Vec<u128> {
    if k == 0 {
        return vec![0];
    }
    if k > n {
        return Vec::new();
    }
    let limit: u128 = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let mut out = Vec::new();
    let mut set: u128 = (1u128 << k) - 1;
    loop {
        out.push(set);
        let c = set & set.wrapping_neg();
        let (r, overflow) = set.overflowing_add(c);
        if overflow || r == 0 {
            break;
        }
        let next = (((r ^ set) >> 2) / c) | r;
        if next > limit || next < set {
            break;
        }
        set = next;
    }
    out
}

fn prefix_mask(n: u32) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

fn check_pools(params: &FrameworkParams) -> Result<(), EnumError> {
    for pool in [params.t_d, params.t_r] {
        if pool > MAX_POOL {
            return Err(EnumError::PoolTooWide { pool, max: MAX_POOL });
        }
    }
    Ok(())
}

fn guard(size: BigUint) -> Result<(), EnumError> {
    if size > BigUint::from(ENUMERATION_LIMIT) {
        Err(EnumError::TooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Configuration count walked by [`enum_accuracy`].
pub fn accuracy_size(params: &FrameworkParams) -> Result<BigUint, EnumError> {
    let caps = params.validate()?;
    let (t_d, t_r) = (i64::from(params.t_d), i64::from(params.t_r));
    let hyps = binom(t_d, i64::from(caps.c_d)) * binom(t_r, i64::from(caps.c_r));
    let data = binom(t_d, i64::from(params.n_d)) + binom(t_r, i64::from(params.n_r));
    Ok(hyps * data)
}

/// Configuration count walked by [`enum_agreement`]: every ordered pair of
/// class hypotheses against one canonical datum per kind.
pub fn agreement_size(params: &FrameworkParams) -> Result<BigUint, EnumError> {
    let caps = params.validate()?;
    let hyps = binom(i64::from(params.t_d), i64::from(caps.c_d))
        * binom(i64::from(params.t_r), i64::from(caps.c_r));
    Ok(&hyps * &hyps * BigUint::from(2u32))
}

fn p_kinds(params: &FrameworkParams) -> (BigRational, BigRational) {
    let p_d = params.p_d_exact();
    let p_r = BigRational::one() - &p_d;
    (p_d, p_r)
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact expected accuracy by walking every class hypothesis against every
/// datum feature set of both kinds.
pub fn enum_accuracy(params: &FrameworkParams) -> Result<BigRational, EnumError> {
    guard(accuracy_size(params)?)?;
    check_pools(params)?;
    let caps = params.validate()?;
    let hyp_dom = subsets(params.t_d, caps.c_d);
    let hyp_rare = subsets(params.t_r, caps.c_r);
    let data_dom = subsets(params.t_d, params.n_d);
    let data_rare = subsets(params.t_r, params.n_r);

    // Correctness counts in half-units: covered datum = 2, guess = 1.
    let mut score_dom = 0u64;
    let mut score_rare = 0u64;
    for &hd in &hyp_dom {
        for &hr in &hyp_rare {
            for &x in &data_dom {
                score_dom += if hd & x != 0 { 2 } else { 1 };
            }
            for &x in &data_rare {
                score_rare += if hr & x != 0 { 2 } else { 1 };
            }
        }
    }
    let hyps = (hyp_dom.len() * hyp_rare.len()) as u64;
    let (p_d, p_r) = p_kinds(params);
    let acc_dom = ratio(score_dom, 2 * hyps * data_dom.len() as u64);
    let acc_rare = ratio(score_rare, 2 * hyps * data_rare.len() as u64);
    Ok(p_d * acc_dom + p_r * acc_rare)
}

#[derive(Debug, Default, Clone)]
struct CaseCounts {
    covered: u64,
    shared: Vec<u64>,
    independent: u64,
}

/// Exact expected agreement by walking every ordered pair of class
/// hypotheses against a canonical datum of each kind (its features are the
/// first `n` of the pool; every datum is equivalent by relabelling).
pub fn enum_agreement(
    params: &FrameworkParams,
    zeta: &AgreementFn,
) -> Result<EnumeratedAgreement, EnumError> {
    zeta.validate()?;
    guard(agreement_size(params)?)?;
    check_pools(params)?;
    let caps = params.validate()?;

    let hyps: Vec<(u128, u128)> = subsets(params.t_d, caps.c_d)
        .iter()
        .flat_map(|&d| subsets(params.t_r, caps.c_r).into_iter().map(move |r| (d, r)))
        .collect();
    let x_dom = prefix_mask(params.n_d);
    let x_rare = prefix_mask(params.n_r);

    let width = params.c as usize;
    let mut dom = CaseCounts {
        shared: vec![0; width + 1],
        ..Default::default()
    };
    let mut rare = dom.clone();
    for &(fd, fr) in &hyps {
        for &(gd, gr) in &hyps {
            let shared = ((fd & gd).count_ones() + (fr & gr).count_ones()) as usize;
            for (counts, f_hit, g_hit) in [
                (&mut dom, fd & x_dom != 0, gd & x_dom != 0),
                (&mut rare, fr & x_rare != 0, gr & x_rare != 0),
            ] {
                match (f_hit, g_hit) {
                    (true, true) => counts.covered += 1,
                    (false, false) if shared > 0 => counts.shared[shared] += 1,
                    _ => counts.independent += 1,
                }
            }
        }
    }

    let pairs = (hyps.len() * hyps.len()) as u64;
    let (p_d, p_r) = p_kinds(params);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let prob = |n: u64| ratio(n, pairs);

    let q1 = &p_d * prob(dom.covered) + &p_r * prob(rare.covered);
    let q2: Vec<BigRational> = (1..=width)
        .map(|k| &p_d * prob(dom.shared[k]) + &p_r * prob(rare.shared[k]))
        .collect();
    let q3 = &p_d * prob(dom.independent) + &p_r * prob(rare.independent);

    let mut agreement = &q1 + &half * &q3;
    for (i, q2k) in q2.iter().enumerate() {
        agreement += zeta.eval_exact(i as u32 + 1, params.c) * q2k;
    }
    Ok(EnumeratedAgreement {
        agreement,
        q1,
        q2,
        q3,
    })
}

/// Size of a guard report as a float, for messages.
pub fn size_as_f64(size: &BigUint) -> f64 {
    size.to_f64().unwrap_or(f64::INFINITY)
}

impl EnumeratedAgreement {
    pub fn total_probability(&self) -> BigRational {
        self.q2.iter().fold(&self.q1 + &self.q3, |acc, x| acc + x)
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_probability() - BigRational::one()).is_zero()
    }
}
