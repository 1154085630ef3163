//! Small numeric helpers shared by the statistics modules.

use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use std::ops::AddAssign;

/// ζ(2) = π²/6.
pub const ZETA2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

/// Σ_p 1/p², the prime zeta function at 2.
pub const PRIME_ZETA_2: f64 = 0.452_247_420_041_065_5;

/// Kahan-Babuška-Neumaier running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn rational(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_from_biguint(num: &BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `a/b`, an integer, or a decimal with optional exponent
/// (`0.25`, `1e-6`, `2.718281828`) into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = t.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(BigRational::new(num, den));
    }

    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = t[i + 1..].parse().map_err(|_| bad())?;
            (&t[..i], e)
        }
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(all_digits.parse::<BigInt>().map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i64;
    if scale.unsigned_abs() > 100_000 {
        return Err(Error::Parse(format!("exponent out of range in {text:?}")));
    }
    let ten = BigRational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= Pow::pow(&ten, scale as u64);
    } else {
        value /= Pow::pow(&ten, scale.unsigned_abs());
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Parses a non-negative integer that may be written in scientific notation.
pub fn parse_count(text: &str) -> Result<u64> {
    let r = parse_rational(text)?;
    if !r.is_integer() || r.is_negative() {
        return Err(Error::Parse(format!("not a non-negative integer: {text:?}")));
    }
    r.to_integer()
        .to_u64()
        .ok_or_else(|| Error::Parse(format!("integer too large: {text:?}")))
}

/// `num/den` rendering used in reports.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let mut acc = NeumaierSum::new();
        for x in [1.0, 1e100, 1.0, -1e100] {
            acc += x;
        }
        assert_eq!(acc.value(), 2.0);
        let naive: f64 = [1.0, 1e100, 1.0, -1e100].iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn neumaier_merge() {
        let a: NeumaierSum = (0..1000).map(|i| 0.1 * i as f64).collect();
        let b: NeumaierSum = (1000..2000).map(|i| 0.1 * i as f64).collect();
        let mut m = a;
        m.merge(&b);
        assert!((m.value() - 199_900.0).abs() < 1e-9);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("1/3").unwrap(), rational(1, 3));
        assert_eq!(parse_rational("0.25").unwrap(), rational(1, 4));
        assert_eq!(parse_rational("1e-6").unwrap(), rational(1, 1_000_000));
        assert_eq!(parse_rational("2.5E2").unwrap(), rational(250, 1));
        assert_eq!(parse_rational(".5").unwrap(), rational(1, 2));
        assert_eq!(parse_rational("10").unwrap(), rational(10, 1));
        assert_eq!(
            parse_rational("2718281828/1000000000").unwrap(),
            parse_rational("2.718281828").unwrap()
        );
        assert_eq!(parse_rational("-0.5").unwrap(), -rational(1, 2));
        for bad in ["", "abc", "1/0", "1.2.3", "e5", "1e", "--1"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parse_counts() {
        assert_eq!(parse_count("1e7").unwrap(), 10_000_000);
        assert_eq!(parse_count("12").unwrap(), 12);
        assert_eq!(parse_count("2.5e3").unwrap(), 2500);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("1e30").is_err());
    }

    #[test]
    fn constants() {
        assert!(ZETA2 > 1.644_934_066_8 && ZETA2 < 1.644_934_066_9);
        assert_eq!(format_rational(&rational(6, 7)), "6/7");
        assert_eq!(format_rational(&rational(14, 7)), "2");
    }
}
