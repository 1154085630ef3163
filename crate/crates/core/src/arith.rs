//! Point evaluation of σ, S_σ and S_s from a prime factorization.
//!
//! Everything here is arbitrary precision. `S_σ(n) = Σ_{d|n} σ(d)` is
//! multiplicative, and `S_s = S_σ − σ`, which is how `S_s` is evaluated at a
//! point. For coprime `a, b` the combination
//! `S_s(ab) = S_s(a)S_s(b) + σ(a)S_s(b) + σ(b)S_s(a)` gives a second route
//! that [`combine_coprime`] checks against the first.

use crate::error::{Error, Result};
use crate::primality::PrimalityEngine;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A positive integer carried together with its prime factorization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactoredInteger {
    factors: Vec<(BigUint, u32)>,
    value: BigUint,
}

impl FactoredInteger {
    pub fn one() -> Self {
        Self {
            factors: Vec::new(),
            value: BigUint::one(),
        }
    }

    /// Builds from `(prime, exponent)` pairs. Primes must be strictly
    /// increasing, exponents positive, and every base must pass the
    /// primality engine.
    pub fn new(factors: Vec<(BigUint, u32)>) -> Result<Self> {
        let engine = PrimalityEngine::default();
        let mut value = BigUint::one();
        for (i, (p, e)) in factors.iter().enumerate() {
            if *e == 0 {
                return Err(Error::InvalidFactorization(format!(
                    "exponent of {p} is zero"
                )));
            }
            if i > 0 && factors[i - 1].0 >= *p {
                return Err(Error::InvalidFactorization(format!(
                    "primes not strictly increasing at {p}"
                )));
            }
            if !engine.is_prime(p) {
                return Err(Error::InvalidFactorization(format!("{p} is not prime")));
            }
            value *= p.pow(*e);
        }
        Ok(Self { factors, value })
    }

    pub fn prime(p: impl Into<BigUint>) -> Result<Self> {
        Self::new(vec![(p.into(), 1)])
    }

    /// Product of distinct primes, given in any order.
    pub fn squarefree<I, P>(primes: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: Into<BigUint>,
    {
        let mut ps: Vec<BigUint> = primes.into_iter().map(Into::into).collect();
        ps.sort();
        Self::new(ps.into_iter().map(|p| (p, 1)).collect())
    }

    /// Factors a machine integer by trial division.
    pub fn from_u64(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidFactorization("zero has no factorization".into()));
        }
        let mut factors = Vec::new();
        let mut rest = n;
        let mut d = 2u64;
        while d * d <= rest {
            if rest % d == 0 {
                let mut e = 0;
                while rest % d == 0 {
                    rest /= d;
                    e += 1;
                }
                factors.push((BigUint::from(d), e));
            }
            d += if d == 2 { 1 } else { 2 };
        }
        if rest > 1 {
            factors.push((BigUint::from(rest), 1));
        }
        Ok(Self {
            factors,
            value: BigUint::from(n),
        })
    }

    pub fn factors(&self) -> &[(BigUint, u32)] {
        &self.factors
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|(_, e)| *e == 1)
    }

    pub fn primes(&self) -> impl Iterator<Item = &BigUint> {
        self.factors.iter().map(|(p, _)| p)
    }

    /// First prime shared with `other`, if any.
    pub fn common_prime(&self, other: &Self) -> Option<&BigUint> {
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() && j < other.factors.len() {
            match self.factors[i].0.cmp(&other.factors[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return Some(&self.factors[i].0),
            }
        }
        None
    }

    /// Product of two coprime factored integers.
    pub fn mul_coprime(&self, other: &Self) -> Result<Self> {
        if let Some(p) = self.common_prime(other) {
            return Err(Error::NotCoprime(p.to_string()));
        }
        let mut factors: Vec<_> = self
            .factors
            .iter()
            .chain(other.factors.iter())
            .cloned()
            .collect();
        factors.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self {
            factors,
            value: &self.value * &other.value,
        })
    }

    /// Euler's totient.
    pub fn totient(&self) -> BigUint {
        self.factors
            .iter()
            .map(|(p, e)| p.pow(e - 1) * (p - 1u32))
            .product()
    }
}

impl fmt::Display for FactoredInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        for (i, (p, e)) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, "·")?;
            }
            if *e == 1 {
                write!(f, "{p}")?;
            } else {
                write!(f, "{p}^{e}")?;
            }
        }
        Ok(())
    }
}

/// σ(n), S_σ(n) and S_s(n) at a single point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivisorStats {
    pub n: FactoredInteger,
    pub sigma: BigUint,
    pub big_s_sigma: BigUint,
    pub big_s_s: BigUint,
}

impl DivisorStats {
    /// S_s(n)/n as an exact rational.
    pub fn ratio(&self) -> BigRational {
        BigRational::new(self.big_s_s.clone().into(), self.n.value().clone().into())
    }

    /// S_σ(n)/n as an exact rational.
    pub fn sigma_sum_ratio(&self) -> BigRational {
        BigRational::new(
            self.big_s_sigma.clone().into(),
            self.n.value().clone().into(),
        )
    }
}

/// σ(p^ν) = (p^{ν+1} − 1)/(p − 1).
pub fn sigma_prime_power(p: &BigUint, nu: u32) -> BigUint {
    (p.pow(nu + 1) - 1u32) / (p - 1u32)
}

/// S_σ(p^ν) = Σ_{i=0}^{ν} σ(p^i) = ((p^{ν+2} − p)/(p − 1) − (ν + 1))/(p − 1).
pub fn s_sigma_prime_power(p: &BigUint, nu: u32) -> BigUint {
    let pm1 = p - 1u32;
    let geometric = (p.pow(nu + 2) - p) / &pm1;
    (geometric - BigUint::from(nu + 1)) / pm1
}

/// The closed forms
/// `σ(p^ν) = p^ν(1 + 1/(p−1)) − 1/(p−1)` and
/// `S_σ(p^ν) = p^ν(1 + 1/(p−1))² − (ν+1)/(p−1) − p/(p−1)²`
/// evaluated in exact rational arithmetic.
pub fn prime_power_closed_forms(p: &BigUint, nu: u32) -> (BigRational, BigRational) {
    let p = BigRational::from_integer(p.clone().into());
    let one = BigRational::one();
    let pm1 = &p - &one;
    let pnu = num_traits::pow(p.clone(), nu as usize);
    let lift = &one + &one / &pm1;
    let sigma = &pnu * &lift - &one / &pm1;
    let nu1 = BigRational::from_integer((nu + 1).into());
    let s_sigma = &pnu * &lift * &lift - nu1 / &pm1 - &p / (&pm1 * &pm1);
    (sigma, s_sigma)
}

/// Exact σ, S_σ, S_s built multiplicatively from prime-power values.
pub fn point_eval(n: &FactoredInteger) -> DivisorStats {
    let mut sigma = BigUint::one();
    let mut big_s_sigma = BigUint::one();
    for (p, e) in n.factors() {
        sigma *= sigma_prime_power(p, *e);
        big_s_sigma *= s_sigma_prime_power(p, *e);
    }
    let big_s_s = &big_s_sigma - &sigma;
    DivisorStats {
        n: n.clone(),
        sigma,
        big_s_sigma,
        big_s_s,
    }
}

/// Stats for `ab` from stats for coprime `a` and `b`.
///
/// S_s(ab) is computed both as `S_σ(a)S_σ(b) − σ(a)σ(b)` and through the
/// triple identity; a disagreement is reported as an error.
pub fn combine_coprime(a: &DivisorStats, b: &DivisorStats) -> Result<DivisorStats> {
    let n = a.n.mul_coprime(&b.n)?;
    let sigma = &a.sigma * &b.sigma;
    let big_s_sigma = &a.big_s_sigma * &b.big_s_sigma;
    let via_difference = &big_s_sigma - &sigma;
    let via_triple =
        &a.big_s_s * &b.big_s_s + &a.sigma * &b.big_s_s + &b.sigma * &a.big_s_s;
    if via_difference != via_triple {
        return Err(Error::RouteMismatch {
            route_a: via_difference.to_string(),
            route_b: via_triple.to_string(),
        });
    }
    Ok(DivisorStats {
        n,
        sigma,
        big_s_sigma,
        big_s_s: via_triple,
    })
}

/// Divisors of `n` by trial division; only meant for small oracles.
#[cfg(test)]
pub(crate) fn divisors_u64(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1u64;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}
