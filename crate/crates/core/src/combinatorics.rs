//! Exact binomial coefficients and the float ratio helpers used by the fast
//! paths.
//!
//! Every binomial here follows the convention `C(n, r) = 0` whenever
//! `n < 0`, `r < 0` or `n < r`, which is what the closed forms rely on when a
//! pool is too small to avoid a datum's features.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Exact binomial coefficient with the zero convention for illegal arguments.
pub fn binom(n: i64, r: i64) -> BigUint {
    if n < 0 || r < 0 || n < r {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 1..=r {
        // acc * (n - r + i) is always divisible by i at this point.
        acc *= BigUint::from((n - r + i) as u64);
        acc /= BigUint::from(i as u64);
    }
    acc
}

/// `binom` lifted into the rationals.
pub fn binom_q(n: i64, r: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(binom(n, r)))
}

/// Float binomial by the multiplicative formula. Exact for results below
/// 2^53 and within a few ulps above that, up to roughly `C(1000, 500)`.
pub fn binom_f64(n: i64, r: i64) -> f64 {
    if n < 0 || r < 0 || n < r {
        return 0.0;
    }
    let r = r.min(n - r);
    let mut acc = 1.0f64;
    for i in 1..=r {
        acc = acc * (n - r + i) as f64 / i as f64;
    }
    acc
}

/// `C(n - removed, draws) / C(n, draws)` as a telescoping product.
///
/// This is the probability that `draws` items taken without replacement from
/// a pool of `n` all miss a fixed subset of size `removed`.
pub fn miss_ratio_f64(n: i64, removed: i64, draws: i64) -> f64 {
    if draws < 0 || n < draws {
        return 0.0;
    }
    if n - removed < draws {
        return 0.0;
    }
    let mut acc = 1.0f64;
    for i in 0..draws {
        acc *= (n - removed - i) as f64 / (n - i) as f64;
    }
    acc
}

/// Exact version of [`miss_ratio_f64`]; zero when the denominator vanishes.
pub fn miss_ratio_q(n: i64, removed: i64, draws: i64) -> BigRational {
    let den = binom(n, draws);
    if den.is_zero() {
        return BigRational::zero();
    }
    BigRational::new(
        BigInt::from(binom(n - removed, draws)),
        BigInt::from(den),
    )
}

/// Probability that two independent uniform `size`-subsets of a `pool`
/// intersect in exactly `shared` elements.
pub fn overlap_pmf_q(pool: i64, size: i64, shared: i64) -> BigRational {
    let den = binom(pool, size);
    if den.is_zero() {
        return BigRational::zero();
    }
    let num = binom(size, shared) * binom(pool - size, size - shared);
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn overlap_pmf_f64(pool: i64, size: i64, shared: i64) -> f64 {
    let den = binom_f64(pool, size);
    if den == 0.0 {
        return 0.0;
    }
    binom_f64(size, shared) * binom_f64(pool - size, size - shared) / den
}

/// Exact rational for the shortest decimal that round-trips to `x`.
///
/// `0.7_f64` maps to `7/10` rather than its binary expansion, so user-facing
/// parameters keep the value they were written with.
pub fn decimal_to_rational(x: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let text = format!("{x}");
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    let mantissa: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
    let value = BigRational::new(mantissa, scale);
    Some(if negative { -value } else { value })
}

/// Rational to `f64`, correctly rounded for the magnitudes used here.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}
