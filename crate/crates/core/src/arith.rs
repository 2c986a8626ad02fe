//! Continued fractions of the frequency, convergent denominators and the
//! finite-scale estimate of the exponential irrationality rate beta(alpha).
//!
//! All Gauss-map arithmetic is exact: the frequency is held as a ratio of big
//! integers and the Gauss map is a Euclid step. Quadratic irrationals are
//! approximated to 512 bits before expansion.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Remainders below this are treated as an exact rational.
pub const RATIONAL_FLOOR: f64 = 1e-15;

const PRECISION_BITS: u64 = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub alpha: f64,
    /// a_1, ..., a_K
    pub partial_quotients: Vec<u64>,
    /// q_1, ..., q_K (q_0 = 1 is implicit)
    pub convergent_denominators: Vec<u64>,
    pub beta_estimate: f64,
}

impl FrequencyProfile {
    pub fn depth(&self) -> usize {
        self.partial_quotients.len()
    }

    /// Numerators p_1..p_K of the convergents p_k/q_k.
    pub fn convergent_numerators(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.depth());
        let (mut p_prev, mut p) = (1u64, 0u64);
        for &a in &self.partial_quotients {
            let next = a.saturating_mul(p).saturating_add(p_prev);
            p_prev = p;
            p = next;
            out.push(p);
        }
        out
    }

    /// Value of the finite continued fraction [0; a_1, ..., a_K].
    pub fn reconstruct(&self) -> f64 {
        let mut x = 0.0f64;
        for &a in self.partial_quotients.iter().rev() {
            x = 1.0 / (a as f64 + x);
        }
        x
    }
}

/// Exact positive ratio num/den, used as the Gauss-map state.
#[derive(Debug, Clone)]
struct Ratio {
    num: BigUint,
    den: BigUint,
}

impl Ratio {
    fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.num, &self.den)
    }
}

fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = (den.bits() as i64 - num.bits() as i64 + 64).max(0) as u64;
    let scaled: BigUint = (num << shift) / den;
    let mantissa_bits = scaled.bits();
    let drop = mantissa_bits.saturating_sub(64);
    let top = (&scaled >> drop).to_u64().unwrap_or(u64::MAX) as f64;
    top * 2f64.powi(drop as i32 - shift as i32)
}

fn f64_to_ratio(alpha: f64) -> Result<Ratio> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "frequency must lie in (0,1), got {alpha}"
        )));
    }
    let bits = alpha.to_bits();
    let exponent = ((bits >> 52) & 0x7ff) as i64;
    let fraction = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if exponent == 0 {
        (fraction, -1074)
    } else {
        (fraction | (1u64 << 52), exponent - 1075)
    };
    // alpha < 1 so exp < 0
    Ok(Ratio {
        num: BigUint::from(mantissa),
        den: BigUint::one() << (-exp) as u64,
    })
}

fn expand(mut x: Ratio, alpha: f64, k: usize) -> Result<FrequencyProfile> {
    if k == 0 {
        return Err(Error::InvalidArgument("depth K must be at least 1".into()));
    }
    let mut quotients = Vec::with_capacity(k);
    let mut denominators = Vec::with_capacity(k);
    let (mut q_prev, mut q) = (0u64, 1u64);
    for depth in 1..=k {
        let remainder = x.to_f64();
        if x.num.is_zero() || remainder < RATIONAL_FLOOR {
            return Err(Error::RationalDetected { depth, remainder });
        }
        let (a, r) = x.den.div_rem(&x.num);
        let a = a.to_u64().ok_or(Error::Overflow { depth })?;
        let next = a
            .checked_mul(q)
            .and_then(|v| v.checked_add(q_prev))
            .ok_or(Error::Overflow { depth })?;
        quotients.push(a);
        denominators.push(next);
        q_prev = q;
        q = next;
        x = Ratio { num: r, den: x.num };
    }
    let mut profile = FrequencyProfile {
        alpha,
        partial_quotients: quotients,
        convergent_denominators: denominators,
        beta_estimate: 0.0,
    };
    profile.beta_estimate = beta_estimate(&profile);
    Ok(profile)
}

/// Continued fraction of a double-precision frequency. The double is expanded
/// exactly, so quotients are those of the binary value; beyond q_k ~ 1e8 they
/// may differ from those of the irrational it approximates.
pub fn continued_fraction(alpha: f64, k: usize) -> Result<FrequencyProfile> {
    let x = f64_to_ratio(alpha)?;
    expand(x, alpha, k)
}

/// Continued fraction of the exact ratio num/den in (0,1).
pub fn continued_fraction_exact(num: &BigUint, den: &BigUint, k: usize) -> Result<FrequencyProfile> {
    if num.is_zero() || num >= den {
        return Err(Error::InvalidArgument("ratio must lie in (0,1)".into()));
    }
    let x = Ratio { num: num.clone(), den: den.clone() };
    let alpha = x.to_f64();
    expand(x, alpha, k)
}

/// Running maximum of ln(a_{k+1}) / q_k over the available convergents.
/// A lower-biased surrogate of the limsup defining beta(alpha).
pub fn beta_estimate(profile: &FrequencyProfile) -> f64 {
    let a = &profile.partial_quotients;
    let q = &profile.convergent_denominators;
    let mut best = 0.0f64;
    for k in 1..a.len() {
        let term = (a[k] as f64).ln() / q[k - 1] as f64;
        best = best.max(term);
    }
    best
}

/// Running beta estimates for depths 2..=K; non-decreasing by construction.
pub fn beta_running(profile: &FrequencyProfile) -> Vec<f64> {
    let mut out = Vec::new();
    let mut best = 0.0f64;
    for k in 1..profile.depth() {
        let term = (profile.partial_quotients[k] as f64).ln()
            / profile.convergent_denominators[k - 1] as f64;
        best = best.max(term);
        out.push(best);
    }
    out
}

fn sqrt_ratio(n: u32) -> (BigUint, BigUint) {
    // sqrt(n) ~ isqrt(n * 4^B) / 2^B
    let scale = BigUint::one() << PRECISION_BITS;
    let root = (BigUint::from(n) * &scale * &scale).sqrt();
    (root, scale)
}

/// (sqrt5 - 1)/2 to 512 bits.
pub fn golden_ratio_exact() -> (BigUint, BigUint) {
    let (root, scale) = sqrt_ratio(5);
    (root - &scale, scale << 1)
}

/// sqrt2 - 1 to 512 bits.
pub fn silver_ratio_exact() -> (BigUint, BigUint) {
    let (root, scale) = sqrt_ratio(2);
    (root - &scale, scale)
}

pub fn golden(k: usize) -> Result<FrequencyProfile> {
    let (n, d) = golden_ratio_exact();
    continued_fraction_exact(&n, &d, k)
}

pub fn silver(k: usize) -> Result<FrequencyProfile> {
    let (n, d) = silver_ratio_exact();
    continued_fraction_exact(&n, &d, k)
}

pub fn golden_mean() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Frequency with prescribed quotients a_{k+1} = round(e^{c q_k}) (q_0 = 1).
/// The first K quotients are exact; the tail continues the same rule with the
/// next quotient e^{c q_K}, which typically lies far below double precision,
/// so `alpha` is the double nearest to the Liouville-type number itself.
pub fn liouville_frequency(c: f64, k: usize) -> Result<FrequencyProfile> {
    if !(c > 0.0 && c <= 5.0) {
        return Err(Error::InvalidArgument(format!("c must lie in (0,5], got {c}")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("depth K must be at least 1".into()));
    }
    let log_max = (u64::MAX as f64).ln();
    let mut quotients = Vec::with_capacity(k);
    let (mut q_prev, mut q) = (0u64, 1u64);
    for depth in 1..=k {
        let exponent = c * q as f64;
        if exponent >= log_max {
            return Err(Error::Overflow { depth });
        }
        let a = (exponent.exp().round() as u64).max(1);
        let next = a
            .checked_mul(q)
            .and_then(|v| v.checked_add(q_prev))
            .ok_or(Error::Overflow { depth })?;
        quotients.push(a);
        q_prev = q;
        q = next;
    }
    // alpha = (p_K x + p_{K-1}) / (q_K x + q_{K-1}) with x = round(e^{c q_K})
    let tail = (c * q as f64).exp();
    let x = if tail.is_finite() {
        BigUint::from_f64(tail.round().max(1.0)).expect("finite and positive")
    } else {
        BigUint::one() << 2048u32
    };
    let (mut p_prev, mut p) = (BigUint::one(), BigUint::zero());
    let (mut qq_prev, mut qq) = (BigUint::zero(), BigUint::one());
    for &a in &quotients {
        let pn = BigUint::from(a) * &p + &p_prev;
        let qn = BigUint::from(a) * &qq + &qq_prev;
        p_prev = std::mem::replace(&mut p, pn);
        qq_prev = std::mem::replace(&mut qq, qn);
    }
    let num = &p * &x + &p_prev;
    let den = &qq * &x + &qq_prev;
    continued_fraction_exact(&num, &den, k)
}

/// Parses a frequency expression: a decimal literal in (0,1), `golden`,
/// `silver` or `liouville:<c>`; expands it to depth K.
pub fn parse_alpha(expr: &str, k: usize) -> Result<FrequencyProfile> {
    let expr = expr.trim();
    match expr {
        "golden" => golden(k),
        "silver" => silver(k),
        _ => {
            if let Some(c) = expr.strip_prefix("liouville:") {
                let c: f64 = c
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad liouville parameter '{c}'")))?;
                liouville_frequency(c, k)
            } else {
                let (num, den) = parse_decimal(expr)?;
                continued_fraction_exact(&num, &den, k)
            }
        }
    }
}

fn parse_decimal(s: &str) -> Result<(BigUint, BigUint)> {
    let bad = || Error::InvalidArgument(format!("cannot parse frequency '{s}'"));
    let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    if int_part.trim_start_matches('0') != "" {
        return Err(Error::InvalidArgument(format!("frequency must lie in (0,1), got {s}")));
    }
    if frac_part.is_empty() {
        return Err(bad());
    }
    let num = BigUint::parse_bytes(frac_part.as_bytes(), 10).ok_or_else(bad)?;
    let den = BigUint::from(10u32).pow(frac_part.len() as u32);
    if num.is_zero() {
        return Err(Error::InvalidArgument("frequency must be positive".into()));
    }
    Ok((num, den))
}

/// Distance to the nearest integer.
pub fn circle_norm(x: f64) -> f64 {
    (x - x.round()).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_is_all_ones_with_fibonacci_denominators() {
        let p = continued_fraction(golden_mean(), 10).unwrap();
        assert!(p.partial_quotients.iter().all(|&a| a == 1));
        assert_eq!(p.convergent_denominators, vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
    }

    #[test]
    fn one_half_is_rational() {
        assert!(matches!(
            continued_fraction(0.5, 3),
            Err(Error::RationalDetected { depth: 2, .. })
        ));
    }

    #[test]
    fn pi_minus_three() {
        let p = continued_fraction(std::f64::consts::PI - 3.0, 4).unwrap();
        assert_eq!(p.partial_quotients, vec![7, 15, 1, 292]);
    }

    #[test]
    fn high_precision_golden_reaches_depth_forty() {
        let p = golden(40).unwrap();
        assert!(p.partial_quotients.iter().all(|&a| a == 1));
        let s = silver(40).unwrap();
        assert!(s.partial_quotients.iter().all(|&a| a == 2));
    }

    #[test]
    fn decimal_literal_one_tenth_is_rational() {
        assert!(matches!(parse_alpha("0.1", 3), Err(Error::RationalDetected { .. })));
        assert!(parse_alpha("1.5", 3).is_err());
    }

    #[test]
    fn liouville_overflows_for_large_c() {
        assert!(matches!(liouville_frequency(5.0, 20), Err(Error::Overflow { .. })));
    }

    #[test]
    fn liouville_quotients_follow_the_rule() {
        let p = liouville_frequency(0.5, 3).unwrap();
        // the tail quotient is ~1e50, so the double is the convergent 100/233
        // up to rounding and its own expansion may end in either 33 or 32, 1
        assert!((p.alpha - 100.0 / 233.0).abs() < 1e-16);
        let again = continued_fraction(p.alpha, 2).unwrap();
        assert_eq!(again.partial_quotients, vec![2, 3]);
        assert!((p.beta_estimate - 3f64.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn beta_of_bounded_quotients_vanishes() {
        let p = golden(30).unwrap();
        assert!(p.beta_estimate < 1e-3);
    }
}
