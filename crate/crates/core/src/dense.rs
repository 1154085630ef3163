//! Constructive approximation of any target `x >= 0` by values `S_s(N)/N`.
//!
//! The state of the construction is the pair `r = S_s(N)/N`, `t = S_σ(N)/N`
//! over a squarefree `N`. Adjoining a prime `q ∤ N` gives
//! `r' = r + (t + r)/q` and `t' = t(q + 2)/q`, so `N` itself is never needed.
//!
//! Starting from a product of consecutive primes with `r < x`, each step picks
//! the smallest prime `q` above `B = (t + r)/(x − r)`. Such a `q` lies below
//! `2B`, and the new ratio satisfies `(x + r)/2 < r' < x`, so the gap to the
//! target at least halves. Every comparison is on exact rationals.

use crate::arith::{point_eval, FactoredInteger};
use crate::error::{Error, Result};
use crate::numeric::format_rational;
use crate::primality::{deterministic_bound, PrimalityEngine, Regime};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

/// `(S_s(N)/N, S_σ(N)/N)` together with the primes of a squarefree `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioState {
    r: BigRational,
    t: BigRational,
    support: Vec<BigUint>,
}

impl RatioState {
    /// The state of `N = 1`.
    pub fn one() -> Self {
        Self {
            r: BigRational::zero(),
            t: BigRational::one(),
            support: Vec::new(),
        }
    }

    /// State of a squarefree `N`, evaluated from scratch.
    pub fn from_factored(n: &FactoredInteger) -> Result<Self> {
        if !n.is_squarefree() {
            return Err(Error::InvalidArgument(format!("{n} is not squarefree")));
        }
        let stats = point_eval(n);
        Ok(Self {
            r: stats.ratio(),
            t: stats.sigma_sum_ratio(),
            support: n.primes().cloned().collect(),
        })
    }

    pub fn r(&self) -> &BigRational {
        &self.r
    }

    pub fn t(&self) -> &BigRational {
        &self.t
    }

    pub fn support(&self) -> &[BigUint] {
        &self.support
    }

    pub fn largest_prime(&self) -> Option<&BigUint> {
        self.support.iter().max()
    }

    /// log10 N, for display only.
    pub fn log10_n(&self) -> f64 {
        self.support.iter().map(|p| biguint_log10(p)).sum()
    }

    pub fn n(&self) -> FactoredInteger {
        FactoredInteger::squarefree(self.support.iter().cloned())
            .expect("support holds distinct primes")
    }
}

fn biguint_log10(p: &BigUint) -> f64 {
    let shift = p.bits().saturating_sub(64);
    let top = (p >> shift).to_f64().unwrap_or(f64::NAN);
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}

/// Adjoins the prime `q` to `N`.
pub fn ratio_extend(state: &RatioState, q: &BigUint) -> Result<RatioState> {
    if state.support.contains(q) {
        return Err(Error::PrimeInSupport(q.to_string()));
    }
    let qr = BigRational::from_integer(BigInt::from(q.clone()));
    let r = &state.r + (&state.t + &state.r) / &qr;
    let t = &state.t * (&qr + BigRational::from_integer(2.into())) / &qr;
    let mut support = state.support.clone();
    let at = support.partition_point(|p| p < q);
    support.insert(at, q.clone());
    Ok(RatioState { r, t, support })
}

/// `B(N) = (t + r)/(x − r)`; defined only while `r < x`.
pub fn compute_b(state: &RatioState, x: &BigRational) -> Result<BigRational> {
    if &state.r >= x {
        return Err(Error::RatioNotBelowTarget {
            ratio: format_rational(&state.r),
            target: format_rational(x),
        });
    }
    Ok((&state.t + &state.r) / (x - &state.r))
}

/// Outcome of the consecutive-prime warm-up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bootstrap {
    /// `p_k, …, p_m`, or through `p_{m+1}` on an exact hit.
    pub primes: Vec<BigUint>,
    pub state: RatioState,
    /// True when the product of consecutive primes lands exactly on the target.
    pub exact_hit: bool,
}

fn smallest_prime_above(engine: &PrimalityEngine, bound: &BigRational) -> BigUint {
    let floor = bound.floor().to_integer();
    let floor = floor.to_biguint().unwrap_or_default();
    engine.next_prime_after(&floor)
}

/// Finds the least prime `p_k` with `1/p_k < x`, then multiplies in the
/// following primes while the ratio stays below `x`.
pub fn bootstrap(x: &BigRational) -> Result<Bootstrap> {
    if !x.is_positive() {
        return Err(Error::NonPositiveTarget(format_rational(x)));
    }
    let engine = PrimalityEngine::default();
    let first = smallest_prime_above(&engine, &x.recip());
    let mut primes = vec![first.clone()];
    let mut state = ratio_extend(&RatioState::one(), &first)?;
    loop {
        let next = engine.next_prime_after(primes.last().expect("non-empty"));
        let candidate = ratio_extend(&state, &next)?;
        match candidate.r.cmp(x) {
            std::cmp::Ordering::Less => {
                primes.push(next);
                state = candidate;
            }
            std::cmp::Ordering::Equal => {
                primes.push(next);
                return Ok(Bootstrap {
                    primes,
                    state: candidate,
                    exact_hit: true,
                });
            }
            std::cmp::Ordering::Greater => {
                return Ok(Bootstrap {
                    primes,
                    state,
                    exact_hit: false,
                })
            }
        }
    }
}

/// One halving step of the certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub b: BigRational,
    pub q: BigUint,
    pub r_after: BigRational,
    pub gap_after: BigRational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseCertificate {
    pub target: BigRational,
    pub epsilon: BigRational,
    pub bootstrap: Vec<BigUint>,
    pub steps: Vec<Step>,
    pub terminal_gap: BigRational,
    /// Probabilistic if any prime in the transcript sits above the
    /// deterministic Miller-Rabin bound.
    pub primality: Regime,
}

impl DenseCertificate {
    pub fn initial_gap(&self) -> Option<BigRational> {
        let n = FactoredInteger::squarefree(self.bootstrap.iter().cloned()).ok()?;
        Some((&self.target - point_eval(&n).ratio()).abs())
    }

    /// Ratio reached at the end of the transcript.
    pub fn final_ratio(&self) -> BigRational {
        match self.steps.last() {
            Some(s) => s.r_after.clone(),
            None if self.target.is_zero() => self.terminal_gap.clone(),
            None => &self.target - &self.terminal_gap,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CertificateJson::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CertificateJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.try_into()
    }
}

fn regime_of<'a>(primes: impl IntoIterator<Item = &'a BigUint>) -> Regime {
    if primes.into_iter().any(|p| p >= deterministic_bound()) {
        Regime::Probabilistic
    } else {
        Regime::Deterministic
    }
}

/// Certificate that `S_s(N)/N` comes within `epsilon` of `x > 0` from below.
pub fn approximate(x: &BigRational, epsilon: &BigRational) -> Result<DenseCertificate> {
    if !epsilon.is_positive() {
        return Err(Error::NonPositiveTolerance(format_rational(epsilon)));
    }
    let boot = bootstrap(x)?;
    if boot.exact_hit {
        return Ok(DenseCertificate {
            target: x.clone(),
            epsilon: epsilon.clone(),
            primality: regime_of(&boot.primes),
            bootstrap: boot.primes,
            steps: Vec::new(),
            terminal_gap: BigRational::zero(),
        });
    }

    let engine = PrimalityEngine::default();
    let mut state = boot.state;
    let mut gap = x - &state.r;
    let mut steps = Vec::new();
    while &gap > epsilon {
        let b = compute_b(&state, x)?;
        let q = smallest_prime_above(&engine, &b);
        let two_b = &b * BigRational::from_integer(2.into());
        if BigRational::from_integer(q.clone().into()) >= two_b {
            // Bertrand's postulate rules this out for B >= 1.
            return Err(Error::InvalidArgument(format!(
                "no prime found in ({}, {})",
                format_rational(&b),
                format_rational(&two_b)
            )));
        }
        state = ratio_extend(&state, &q)?;
        gap = x - &state.r;
        steps.push(Step {
            b,
            q,
            r_after: state.r.clone(),
            gap_after: gap.clone(),
        });
    }

    let primality = regime_of(boot.primes.iter().chain(steps.iter().map(|s| &s.q)));
    Ok(DenseCertificate {
        target: x.clone(),
        epsilon: epsilon.clone(),
        bootstrap: boot.primes,
        steps,
        terminal_gap: gap,
        primality,
    })
}

/// Certificate for the target zero: the least prime `p > 1/epsilon`.
pub fn approximate_zero(epsilon: &BigRational) -> Result<DenseCertificate> {
    if !epsilon.is_positive() {
        return Err(Error::NonPositiveTolerance(format_rational(epsilon)));
    }
    let engine = PrimalityEngine::default();
    let p = smallest_prime_above(&engine, &epsilon.recip());
    let r = BigRational::new(BigInt::one(), BigInt::from(p.clone()));
    Ok(DenseCertificate {
        target: BigRational::zero(),
        epsilon: epsilon.clone(),
        primality: regime_of([&p]),
        bootstrap: vec![p],
        steps: Vec::new(),
        terminal_gap: r,
    })
}

/// Dispatches on the target: zero goes to [`approximate_zero`].
pub fn approximate_any(x: &BigRational, epsilon: &BigRational) -> Result<DenseCertificate> {
    if x.is_zero() {
        approximate_zero(epsilon)
    } else {
        approximate(x, epsilon)
    }
}

/// Which invariant a certificate broke.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureKind {
    NonPositiveEpsilon,
    NegativeTarget,
    EmptyBootstrap,
    NotPrime,
    BootstrapNotConsecutive,
    BootstrapWrongStart,
    BootstrapNotMaximal,
    ClaimHypothesis,
    RepeatedPrime,
    BMismatch,
    OutsideBertrandInterval,
    RatioMismatch,
    GapMismatch,
    GapNotPositive,
    GapNotHalved,
    TerminalGapMismatch,
    ToleranceNotMet,
    ZeroTargetShape,
    PrimalityFlag,
}

impl FailureKind {
    pub fn describe(&self) -> &'static str {
        match self {
            FailureKind::NonPositiveEpsilon => "epsilon not positive",
            FailureKind::NegativeTarget => "target negative",
            FailureKind::EmptyBootstrap => "bootstrap empty",
            FailureKind::NotPrime => "q not prime",
            FailureKind::BootstrapNotConsecutive => "bootstrap primes not consecutive",
            FailureKind::BootstrapWrongStart => "bootstrap does not start at least prime with 1/p < x",
            FailureKind::BootstrapNotMaximal => "bootstrap stopped early",
            FailureKind::ClaimHypothesis => "prime factor not below B",
            FailureKind::RepeatedPrime => "q already divides N",
            FailureKind::BMismatch => "B mismatch",
            FailureKind::OutsideBertrandInterval => "q outside (B, 2B)",
            FailureKind::RatioMismatch => "ratio mismatch",
            FailureKind::GapMismatch => "gap mismatch",
            FailureKind::GapNotPositive => "gap not positive",
            FailureKind::GapNotHalved => "gap not halved",
            FailureKind::TerminalGapMismatch => "terminal gap mismatch",
            FailureKind::ToleranceNotMet => "terminal gap exceeds epsilon",
            FailureKind::ZeroTargetShape => "zero-target certificate malformed",
            FailureKind::PrimalityFlag => "primality regime flag inconsistent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyFailure {
    /// Index into `steps`, or `None` for bootstrap/global checks.
    pub step: Option<usize>,
    pub kind: FailureKind,
    pub detail: String,
}

impl fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(i) => write!(f, "step {i}: {} ({})", self.kind.describe(), self.detail),
            None => write!(f, "{} ({})", self.kind.describe(), self.detail),
        }
    }
}

/// Result of [`verify_certificate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verification {
    pub failure: Option<VerifyFailure>,
    pub steps_checked: usize,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Re-checks a certificate from scratch. Every ratio is recomputed by point
/// evaluation on the explicit factorization of `N_i`; nothing is taken from
/// the incremental update used to build the certificate.
pub fn verify_certificate(cert: &DenseCertificate) -> Verification {
    let mut steps_checked = 0;
    let failure = check(cert, &mut steps_checked).err();
    Verification {
        failure,
        steps_checked,
    }
}

fn fail(step: Option<usize>, kind: FailureKind, detail: impl Into<String>) -> VerifyFailure {
    VerifyFailure {
        step,
        kind,
        detail: detail.into(),
    }
}

fn check(cert: &DenseCertificate, steps_checked: &mut usize) -> std::result::Result<(), VerifyFailure> {
    let engine = PrimalityEngine::default();
    let x = &cert.target;
    if !cert.epsilon.is_positive() {
        return Err(fail(None, FailureKind::NonPositiveEpsilon, format_rational(&cert.epsilon)));
    }
    if x.is_negative() {
        return Err(fail(None, FailureKind::NegativeTarget, format_rational(x)));
    }
    let Some(first) = cert.bootstrap.first() else {
        return Err(fail(None, FailureKind::EmptyBootstrap, ""));
    };
    for p in &cert.bootstrap {
        if !engine.is_prime(p) {
            return Err(fail(None, FailureKind::NotPrime, format!("bootstrap entry {p}")));
        }
    }
    let expected_regime = regime_of(cert.bootstrap.iter().chain(cert.steps.iter().map(|s| &s.q)));
    if expected_regime != cert.primality {
        return Err(fail(None, FailureKind::PrimalityFlag, format!("{:?}", cert.primality)));
    }
    let expected_first = smallest_prime_above(
        &engine,
        &if x.is_zero() { cert.epsilon.recip() } else { x.recip() },
    );
    if first != &expected_first {
        return Err(fail(
            None,
            FailureKind::BootstrapWrongStart,
            format!("found {first}, expected {expected_first}"),
        ));
    }

    if x.is_zero() {
        if cert.bootstrap.len() != 1 || !cert.steps.is_empty() {
            return Err(fail(None, FailureKind::ZeroTargetShape, "expected one prime and no steps"));
        }
        let n = FactoredInteger::prime(first.clone())
            .map_err(|e| fail(None, FailureKind::NotPrime, e.to_string()))?;
        let r = point_eval(&n).ratio();
        if r != cert.terminal_gap {
            return Err(fail(None, FailureKind::TerminalGapMismatch, format_rational(&r)));
        }
        if r > cert.epsilon {
            return Err(fail(None, FailureKind::ToleranceNotMet, format_rational(&r)));
        }
        return Ok(());
    }

    for w in cert.bootstrap.windows(2) {
        if engine.next_prime_after(&w[0]) != w[1] {
            return Err(fail(
                None,
                FailureKind::BootstrapNotConsecutive,
                format!("{} then {}", w[0], w[1]),
            ));
        }
    }

    let mut n = FactoredInteger::squarefree(cert.bootstrap.iter().cloned())
        .map_err(|e| fail(None, FailureKind::RepeatedPrime, e.to_string()))?;
    let mut stats = point_eval(&n);
    let mut r = stats.ratio();
    let mut gap = x - &r;

    if gap.is_zero() {
        // Exact hit: nothing may follow.
        if !cert.steps.is_empty() || !cert.terminal_gap.is_zero() {
            return Err(fail(None, FailureKind::TerminalGapMismatch, "exact hit with trailing steps"));
        }
        return Ok(());
    }
    if gap.is_negative() {
        return Err(fail(None, FailureKind::GapNotPositive, format_rational(&gap)));
    }
    let last = cert.bootstrap.last().expect("non-empty");
    let following = engine.next_prime_after(last);
    let extended = point_eval(
        &n.mul_coprime(&FactoredInteger::prime(following.clone()).expect("prime"))
            .expect("coprime"),
    )
    .ratio();
    if &extended < x {
        return Err(fail(
            None,
            FailureKind::BootstrapNotMaximal,
            format!("adjoining {following} still stays below the target"),
        ));
    }

    for (i, step) in cert.steps.iter().enumerate() {
        let t = stats.sigma_sum_ratio();
        let b = (&t + &r) / (x - &r);
        if b != step.b {
            return Err(fail(Some(i), FailureKind::BMismatch, format_rational(&b)));
        }
        for p in n.primes() {
            if BigRational::from_integer(BigInt::from(p.clone())) >= b {
                return Err(fail(Some(i), FailureKind::ClaimHypothesis, format!("{p}")));
            }
        }
        if !engine.is_prime(&step.q) {
            return Err(fail(Some(i), FailureKind::NotPrime, step.q.to_string()));
        }
        let q_factored = FactoredInteger::prime(step.q.clone())
            .map_err(|e| fail(Some(i), FailureKind::NotPrime, e.to_string()))?;
        if n.common_prime(&q_factored).is_some() {
            return Err(fail(Some(i), FailureKind::RepeatedPrime, step.q.to_string()));
        }
        let qr = BigRational::from_integer(BigInt::from(step.q.clone()));
        if !(qr > b && qr < &b * BigRational::from_integer(2.into())) {
            return Err(fail(Some(i), FailureKind::OutsideBertrandInterval, step.q.to_string()));
        }
        n = n.mul_coprime(&q_factored).expect("checked coprime");
        stats = point_eval(&n);
        let r_next = stats.ratio();
        if r_next != step.r_after {
            return Err(fail(
                Some(i),
                FailureKind::RatioMismatch,
                format!(
                    "recorded {}, recomputed {}",
                    format_rational(&step.r_after),
                    format_rational(&r_next)
                ),
            ));
        }
        let gap_next = x - &r_next;
        if gap_next != step.gap_after {
            return Err(fail(Some(i), FailureKind::GapMismatch, format_rational(&gap_next)));
        }
        if !gap_next.is_positive() {
            return Err(fail(Some(i), FailureKind::GapNotPositive, format_rational(&gap_next)));
        }
        if gap_next >= &gap / BigRational::from_integer(2.into()) {
            return Err(fail(Some(i), FailureKind::GapNotHalved, format_rational(&gap_next)));
        }
        r = r_next;
        gap = gap_next;
        *steps_checked += 1;
    }

    if gap != cert.terminal_gap {
        return Err(fail(None, FailureKind::TerminalGapMismatch, format_rational(&gap)));
    }
    if gap > cert.epsilon {
        return Err(fail(None, FailureKind::ToleranceNotMet, format_rational(&gap)));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RationalJson {
    num: String,
    den: String,
}

impl From<&BigRational> for RationalJson {
    fn from(r: &BigRational) -> Self {
        Self {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

impl TryFrom<RationalJson> for BigRational {
    type Error = Error;
    fn try_from(j: RationalJson) -> Result<Self> {
        parse_pair(&j.num, &j.den)
    }
}

fn parse_pair(num: &str, den: &str) -> Result<BigRational> {
    let n: BigInt = num
        .parse()
        .map_err(|_| Error::Parse(format!("bad integer {num:?}")))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| Error::Parse(format!("bad integer {den:?}")))?;
    if d.is_zero() {
        return Err(Error::Parse("zero denominator".into()));
    }
    Ok(BigRational::new(n, d))
}

fn parse_natural(text: &str) -> Result<BigUint> {
    text.parse()
        .map_err(|_| Error::Parse(format!("bad natural number {text:?}")))
}

#[allow(non_snake_case)]
#[derive(Debug, Serialize, Deserialize)]
struct StepJson {
    B_num: String,
    B_den: String,
    q: String,
    r_num: String,
    r_den: String,
    gap_num: String,
    gap_den: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateJson {
    target: RationalJson,
    epsilon: RationalJson,
    bootstrap_primes: Vec<String>,
    steps: Vec<StepJson>,
    terminal_gap_num: String,
    terminal_gap_den: String,
    primality: Regime,
}

impl From<&DenseCertificate> for CertificateJson {
    fn from(c: &DenseCertificate) -> Self {
        Self {
            target: (&c.target).into(),
            epsilon: (&c.epsilon).into(),
            bootstrap_primes: c.bootstrap.iter().map(ToString::to_string).collect(),
            steps: c
                .steps
                .iter()
                .map(|s| StepJson {
                    B_num: s.b.numer().to_string(),
                    B_den: s.b.denom().to_string(),
                    q: s.q.to_string(),
                    r_num: s.r_after.numer().to_string(),
                    r_den: s.r_after.denom().to_string(),
                    gap_num: s.gap_after.numer().to_string(),
                    gap_den: s.gap_after.denom().to_string(),
                })
                .collect(),
            terminal_gap_num: c.terminal_gap.numer().to_string(),
            terminal_gap_den: c.terminal_gap.denom().to_string(),
            primality: c.primality,
        }
    }
}

impl TryFrom<CertificateJson> for DenseCertificate {
    type Error = Error;
    fn try_from(j: CertificateJson) -> Result<Self> {
        Ok(Self {
            target: j.target.try_into()?,
            epsilon: j.epsilon.try_into()?,
            bootstrap: j
                .bootstrap_primes
                .iter()
                .map(|p| parse_natural(p))
                .collect::<Result<_>>()?,
            steps: j
                .steps
                .into_iter()
                .map(|s| {
                    Ok(Step {
                        b: parse_pair(&s.B_num, &s.B_den)?,
                        q: parse_natural(&s.q)?,
                        r_after: parse_pair(&s.r_num, &s.r_den)?,
                        gap_after: parse_pair(&s.gap_num, &s.gap_den)?,
                    })
                })
                .collect::<Result<_>>()?,
            terminal_gap: parse_pair(&j.terminal_gap_num, &j.terminal_gap_den)?,
            primality: j.primality,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::divisors_u64;
    use crate::numeric::{parse_rational, rational};
    use proptest::prelude::*;

    fn q(n: u64, d: u64) -> BigRational {
        rational(n, d)
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn state_of(n: u64) -> RatioState {
        RatioState::from_factored(&FactoredInteger::from_u64(n).unwrap()).unwrap()
    }

    fn brute_ratio(n: u64) -> BigRational {
        let s: u64 = divisors_u64(n)
            .into_iter()
            .map(|d| divisors_u64(d).iter().sum::<u64>() - d)
            .sum();
        q(s, n)
    }

    #[test]
    fn extend_examples() {
        let two = state_of(2);
        assert_eq!(two.r(), &q(1, 2));
        assert_eq!(two.t(), &q(2, 1));
        assert_eq!(ratio_extend(&two, &big(7)).unwrap().r(), &q(6, 7));
        assert_eq!(ratio_extend(&two, &big(3)).unwrap().r(), &q(4, 3));
        let far = ratio_extend(&two, &big(1_000_000_007)).unwrap();
        assert!(far.r() > two.r() && far.r() - two.r() < q(1, 100_000_000));
        assert!(matches!(
            ratio_extend(&two, &big(2)),
            Err(Error::PrimeInSupport(_))
        ));
    }

    #[test]
    fn b_examples() {
        assert_eq!(compute_b(&state_of(2), &q(1, 1)).unwrap(), q(5, 1));
        let fourteen = state_of(14);
        assert_eq!(fourteen.t(), &q(18, 7));
        assert_eq!(compute_b(&fourteen, &q(1, 1)).unwrap(), q(24, 1));
        assert!(compute_b(&state_of(6), &q(1, 1)).is_err());
        // B grows without bound as x approaches r from above.
        let near = compute_b(&state_of(2), &(q(1, 2) + q(1, 1_000_000))).unwrap();
        assert!(near > q(1_000_000, 1));
    }

    #[test]
    fn bootstrap_examples() {
        let one = bootstrap(&q(1, 1)).unwrap();
        assert_eq!(one.primes, vec![big(2)]);
        assert!(!one.exact_hit);

        let third = bootstrap(&q(1, 3)).unwrap();
        assert_eq!(third.primes[0], big(5));

        let ten = bootstrap(&q(10, 1)).unwrap();
        assert!(ten.state.r() < &q(10, 1));
        let b = compute_b(&ten.state, &q(10, 1)).unwrap();
        let next = PrimalityEngine::default().next_prime_after(ten.primes.last().unwrap());
        assert!(BigRational::from_integer(next.into()) <= b);

        assert!(bootstrap(&q(0, 1)).is_err());
    }

    #[test]
    fn bootstrap_exact_hit() {
        // S_s(6)/6 = 4/3 is reached by the consecutive primes 2, 3.
        let boot = bootstrap(&q(4, 3)).unwrap();
        assert!(boot.exact_hit);
        assert_eq!(boot.primes, vec![big(2), big(3)]);
        let cert = approximate(&q(4, 3), &q(1, 1000)).unwrap();
        assert!(cert.steps.is_empty());
        assert!(cert.terminal_gap.is_zero());
        assert!(verify_certificate(&cert).passed());
    }

    #[test]
    fn approximate_one_quarter() {
        let cert = approximate(&q(1, 1), &q(1, 4)).unwrap();
        assert_eq!(cert.bootstrap, vec![big(2)]);
        assert_eq!(cert.steps.len(), 1);
        assert_eq!(cert.steps[0].q, big(7));
        assert_eq!(cert.steps[0].b, q(5, 1));
        assert_eq!(cert.steps[0].r_after, q(6, 7));
        assert_eq!(cert.terminal_gap, q(1, 7));
        assert!(verify_certificate(&cert).passed());
    }

    #[test]
    fn approximate_loose_tolerance_needs_no_steps() {
        let cert = approximate(&q(1, 1), &q(1, 1)).unwrap();
        assert!(cert.steps.is_empty());
        assert_eq!(cert.terminal_gap, q(1, 2));
        assert!(verify_certificate(&cert).passed());
    }

    #[test]
    fn approximate_e_tightly() {
        let x = parse_rational("2.718281828").unwrap();
        let eps = parse_rational("1e-6").unwrap();
        let cert = approximate(&x, &eps).unwrap();
        assert!(cert.terminal_gap <= eps);
        let gap0 = cert.initial_gap().unwrap();
        let bound = crate::numeric::to_f64(&(gap0 / &eps)).log2().ceil() as usize + 1;
        assert!(cert.steps.len() <= bound);
        let check = verify_certificate(&cert);
        assert!(check.passed(), "{:?}", check.failure);
        assert_eq!(check.steps_checked, cert.steps.len());
        let mut prev_b: Option<BigRational> = None;
        for s in &cert.steps {
            if let Some(pb) = prev_b {
                assert!(s.b >= &pb * q(2, 1));
            }
            prev_b = Some(s.b.clone());
        }
    }

    #[test]
    fn zero_target() {
        let c = approximate_zero(&q(1, 10)).unwrap();
        assert_eq!(c.bootstrap, vec![big(11)]);
        assert_eq!(c.terminal_gap, q(1, 11));
        assert!(verify_certificate(&c).passed());

        let c = approximate_zero(&q(1, 1)).unwrap();
        assert_eq!(c.bootstrap, vec![big(2)]);
        assert_eq!(c.final_ratio(), q(1, 2));

        let c = approximate_zero(&q(1, 1_000_000)).unwrap();
        assert_eq!(c.bootstrap, vec![big(1_000_003)]);
        assert!(verify_certificate(&c).passed());
        assert!(approximate_zero(&q(0, 1)).is_err());
    }

    #[test]
    fn corrupted_certificates_fail() {
        let cert = approximate(&q(1, 1), &q(1, 4)).unwrap();

        let mut composite = cert.clone();
        composite.steps[0].q = big(9);
        let v = verify_certificate(&composite);
        let f = v.failure.unwrap();
        assert_eq!(f.kind, FailureKind::NotPrime);
        assert_eq!(f.kind.describe(), "q not prime");
        assert_eq!(f.step, Some(0));

        let mut perturbed = cert.clone();
        perturbed.steps[0].r_after = q(6, 7) + q(1, 1_000_000);
        let f = verify_certificate(&perturbed).failure.unwrap();
        assert_eq!(f.kind, FailureKind::RatioMismatch);
        assert_eq!(f.kind.describe(), "ratio mismatch");

        let mut wrong_interval = cert.clone();
        wrong_interval.steps[0].q = big(11);
        let f = verify_certificate(&wrong_interval).failure.unwrap();
        assert_eq!(f.kind, FailureKind::OutsideBertrandInterval);

        let mut loose = cert.clone();
        loose.epsilon = q(1, 8);
        let f = verify_certificate(&loose).failure.unwrap();
        assert_eq!(f.kind, FailureKind::ToleranceNotMet);

        let mut skipped = cert;
        skipped.bootstrap = vec![big(3)];
        let f = verify_certificate(&skipped).failure.unwrap();
        assert_eq!(f.kind, FailureKind::BootstrapWrongStart);
    }

    #[test]
    fn json_round_trip() {
        let cert = approximate(&q(10, 1), &parse_rational("1e-6").unwrap()).unwrap();
        let text = cert.to_json();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["target", "epsilon", "bootstrap_primes", "steps", "terminal_gap_num", "terminal_gap_den"] {
            assert!(value.get(key).is_some(), "{key}");
        }
        let step = &value["steps"][0];
        for key in ["B_num", "B_den", "q", "r_num", "r_den", "gap_num", "gap_den"] {
            assert!(step[key].is_string(), "{key}");
        }
        assert_eq!(DenseCertificate::from_json(&text).unwrap(), cert);
        assert!(DenseCertificate::from_json("{}").is_err());
    }

    proptest! {
        #[test]
        fn extend_matches_brute_force(n in 1u64..10_000, qi in 0usize..40) {
            let f = FactoredInteger::from_u64(n).unwrap();
            prop_assume!(f.is_squarefree());
            let primes = crate::primality::primes_up_to(200);
            let qp = primes[qi];
            prop_assume!(n % qp != 0);
            let extended = ratio_extend(&RatioState::from_factored(&f).unwrap(), &big(qp)).unwrap();
            prop_assert_eq!(extended.r(), &brute_ratio(n * qp));
        }

        #[test]
        fn every_step_halves_the_gap(num in 1u64..100, den in 10u64..40, e in 2u32..9) {
            let x = q(num, den);
            let eps = q(1, 2u64.pow(e));
            let cert = approximate(&x, &eps).unwrap();
            let mut gap = cert.initial_gap().unwrap();
            let mut r = &x - &gap;
            for s in &cert.steps {
                prop_assert!(s.gap_after.is_positive());
                prop_assert!(&s.gap_after * q(2, 1) < gap);
                prop_assert!((&x + &r) / q(2, 1) < s.r_after && s.r_after < x);
                gap = s.gap_after.clone();
                r = s.r_after.clone();
            }
            prop_assert!(cert.terminal_gap <= eps);
            prop_assert!(verify_certificate(&cert).passed());
        }
    }
}
