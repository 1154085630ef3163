//! Moments of `S_s(n)/n`: empirical means, Euler products for the
//! multiplicative pieces `h_{k,j}`, and series diagnostics.

use crate::arith::{s_sigma_prime_power, sigma_prime_power};
use crate::error::{Error, Result};
use crate::numeric::{rational_from_biguint, NeumaierSum, PRIME_ZETA_2};
use crate::primality::{primes_up_to, PrimalityEngine};
use crate::sieve::{Accumulator, ArithmeticTable, DivisorSieve};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Pow;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

pub const DEFAULT_EULER_PRIMES: u64 = 100_000;
pub const DEFAULT_EULER_NU: u32 = 60;

/// Largest admissible bound on the dropped part of a local factor.
pub const INNER_TOLERANCE: f64 = 1e-6;

pub const GROWTH_CSV_HEADER: &str =
    "k,mu_k,loglog_ratio,carleman_ratio,stability,phi_moment_2k,phi_bound";
pub const SERIES_CSV_HEADER: &str = "series,bound,partial_sum,trend";

#[derive(Clone)]
struct MomentAcc {
    ratio: Vec<NeumaierSum>,
    phi: Vec<NeumaierSum>,
}

impl Accumulator for MomentAcc {
    fn push(&mut self, t: &ArithmeticTable, n: u64) {
        let r = t.big_s_s(n) as f64 / n as f64;
        let u = n as f64 / t.phi(n) as f64;
        let (mut rk, mut uk) = (1.0, 1.0);
        for (a, b) in self.ratio.iter_mut().zip(self.phi.iter_mut()) {
            rk *= r;
            uk *= u;
            a.add(rk);
            b.add(uk);
        }
    }

    fn merge(&mut self, later: &Self) {
        for (a, b) in self.ratio.iter_mut().zip(&later.ratio) {
            a.merge(b);
        }
        for (a, b) in self.phi.iter_mut().zip(&later.phi) {
            a.merge(b);
        }
    }
}

/// Empirical power means of `S_s(n)/n` and `n/φ(n)` at several
/// checkpoints, from one sieve pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentLadder {
    checkpoints: Vec<u64>,
    max_power: u32,
    ratio: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
}

impl MomentLadder {
    pub fn build(checkpoints: &[u64], max_power: u32) -> Result<Self> {
        if max_power == 0 {
            return Err(Error::InvalidArgument("max power must be >= 1".into()));
        }
        let mut cps = checkpoints.to_vec();
        cps.sort_unstable();
        cps.dedup();
        let Some(&last) = cps.last() else {
            return Err(Error::InvalidArgument("no checkpoints".into()));
        };
        let zero = MomentAcc {
            ratio: vec![NeumaierSum::new(); max_power as usize],
            phi: vec![NeumaierSum::new(); max_power as usize],
        };
        let snaps = DivisorSieve::new(last).prefix_scan(&cps, &zero)?;
        let means = |sums: &[NeumaierSum], x: u64| sums.iter().map(|s| s.value() / x as f64).collect();
        Ok(Self {
            ratio: snaps.iter().zip(&cps).map(|(a, &x)| means(&a.ratio, x)).collect(),
            phi: snaps.iter().zip(&cps).map(|(a, &x)| means(&a.phi, x)).collect(),
            checkpoints: cps,
            max_power,
        })
    }

    pub fn checkpoints(&self) -> &[u64] {
        &self.checkpoints
    }

    pub fn max_power(&self) -> u32 {
        self.max_power
    }

    fn index(&self, x: u64, k: u32) -> Option<usize> {
        if k == 0 || k > self.max_power {
            return None;
        }
        self.checkpoints.binary_search(&x).ok()
    }

    /// `(1/x) Σ_{n≤x} (S_s(n)/n)^k`.
    pub fn ratio_moment(&self, x: u64, k: u32) -> Option<f64> {
        self.index(x, k).map(|i| self.ratio[i][k as usize - 1])
    }

    /// `(1/x) Σ_{n≤x} (n/φ(n))^k`.
    pub fn phi_moment(&self, x: u64, k: u32) -> Option<f64> {
        self.index(x, k).map(|i| self.phi[i][k as usize - 1])
    }
}

/// `(1/x) Σ_{n≤x} (S_s(n)/n)^k`, each ratio rounded once to a double.
pub fn empirical_moment(k: u32, x: u64) -> Result<f64> {
    if k == 0 || x == 0 {
        return Err(Error::InvalidArgument(format!("need k >= 1 and x >= 1, got k = {k}, x = {x}")));
    }
    Ok(MomentLadder::build(&[x], k)?.ratio_moment(x, k).expect("built for x and k"))
}

fn check_kj(k: u32, j: u32) -> Result<()> {
    if j > k {
        return Err(Error::InvalidArgument(format!("need j <= k, got k = {k}, j = {j}")));
    }
    Ok(())
}

fn check_prime(p: u64) -> Result<()> {
    if !PrimalityEngine::default().is_prime_u64(p) {
        return Err(Error::InvalidArgument(format!("{p} is not prime")));
    }
    Ok(())
}

/// `h_{k,j}(p^ν) = (σ(p^ν)/p^ν)^j · (S_σ(p^ν)/p^ν)^{k−j}` exactly.
pub fn h_value_exact(k: u32, j: u32, p: u64, nu: u32) -> Result<BigRational> {
    check_kj(k, j)?;
    check_prime(p)?;
    let p = BigUint::from(p);
    let pn = Pow::pow(&p, nu);
    let x = rational_from_biguint(&sigma_prime_power(&p, nu), &pn);
    let y = rational_from_biguint(&s_sigma_prime_power(&p, nu), &pn);
    Ok(Pow::pow(&x, j) * Pow::pow(&y, k - j))
}

pub fn h_value(k: u32, j: u32, p: u64, nu: u32) -> Result<f64> {
    h_value_exact(k, j, p, nu).map(|r| crate::numeric::to_f64(&r))
}

/// `a^n − b^n` given `d = a − b` exactly, without cancellation.
fn pow_diff(a: f64, b: f64, d: f64, n: u32) -> f64 {
    let mut s = 0.0;
    let mut ai = 1.0;
    let mut bi = b.powi(n as i32 - 1);
    for _ in 0..n {
        s += ai * bi;
        ai *= a;
        bi /= b;
    }
    d * s
}

/// Walks ν = 1..=v for prime `p`, yielding `(ν, h_ν − h_{ν−1}, p^{−ν})`.
/// Uses `X_ν − X_{ν−1} = p^{−ν}` and `Y_ν − Y_{ν−1} = (ν+1) p^{−ν}` so that
/// no difference is formed by subtracting nearly equal doubles.
fn h_increments(k: u32, j: u32, p: u64, v: u32) -> impl Iterator<Item = (u32, f64, f64)> {
    let m = k - j;
    let inv = 1.0 / p as f64;
    let (mut x, mut y, mut pw) = (1.0f64, 1.0f64, 1.0f64);
    (1..=v).map(move |nu| {
        pw *= inv;
        let (dx, dy) = (pw, (nu + 1) as f64 * pw);
        let (x1, y1) = (x + dx, y + dy);
        let dh = x1.powi(j as i32) * pow_diff(y1, y, dy, m) + y.powi(m as i32) * pow_diff(x1, x, dx, j);
        x = x1;
        y = y1;
        (nu, dh, pw)
    })
}

/// Exact `Σ_{ν≥2} ν / p^{2ν+1} = (2p² − 1) / ((p² − 1)² p³)`.
pub fn nu_series(p: u64) -> Result<BigRational> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("need p >= 2, got {p}")));
    }
    let p = BigInt::from(p);
    let p2 = &p * &p;
    let num = BigInt::from(2) * &p2 - 1;
    let den = (&p2 - 1) * (&p2 - 1) * &p2 * &p;
    Ok(BigRational::new(num, den))
}

/// Truncation of the Euler product: primes `p <= primes`, exponents
/// `ν <= nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EulerConfig {
    #[serde(rename = "P")]
    pub primes: u64,
    #[serde(rename = "V")]
    pub nu: u32,
}

impl Default for EulerConfig {
    fn default() -> Self {
        Self {
            primes: DEFAULT_EULER_PRIMES,
            nu: DEFAULT_EULER_NU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerMean {
    pub k: u32,
    pub j: u32,
    /// `∏_{p≤P} (1−1/p) Σ_{ν≤V} h(p^ν) p^{−ν}`.
    pub truncated: f64,
    /// Log of the correction for primes above `P`, `(2k−j) Σ_{p>P} p^{−2}`.
    pub tail_log: f64,
    /// `estimate − truncated`.
    pub tail: f64,
    /// Largest bound, over `p <= P`, on the dropped `ν > V` part of a local
    /// factor.
    pub inner_remainder: f64,
    pub estimate: f64,
}

/// Mean value of `h_{k,j}` as a truncated Euler product with an outer tail
/// correction. A local factor is
/// `(1−1/p) Σ_ν h(p^ν) p^{−ν} = 1 + Σ_{ν≥1} (h_ν − h_{ν−1}) p^{−ν}`,
/// and for large `p` it is `1 + (2k−j)/p² + O(p^{−3})`, which gives the
/// tail. The increments are non-negative and sum to less than
/// `(p/(p−1))^{2k−j}`, so the part dropped at `ν > V` is at most that
/// times `p^{−(V+1)}`; exceeding [`INNER_TOLERANCE`] is an error.
pub fn euler_mean(k: u32, j: u32, cfg: EulerConfig) -> Result<EulerMean> {
    check_kj(k, j)?;
    if cfg.primes < 2 || cfg.nu == 0 {
        return Err(Error::InvalidArgument(format!(
            "need P >= 2 and V >= 1, got P = {}, V = {}",
            cfg.primes, cfg.nu
        )));
    }
    let primes = primes_up_to(cfg.primes);
    let a = 2 * k - j;
    let factors: Vec<(f64, f64)> = primes
        .par_iter()
        .map(|&p| {
            let delta: NeumaierSum = h_increments(k, j, p, cfg.nu).map(|(_, dh, pw)| dh * pw).collect();
            let pf = p as f64;
            let ceiling = (pf / (pf - 1.0)).powi(a as i32);
            let dropped = ceiling * pf.powi(-(cfg.nu as i32) - 1);
            (delta.value().ln_1p(), dropped)
        })
        .collect();
    for (&p, &(_, dropped)) in primes.iter().zip(&factors) {
        if dropped > INNER_TOLERANCE {
            return Err(Error::NonConvergentInnerSum { p, k, j });
        }
    }
    let log_truncated: NeumaierSum = factors.iter().map(|f| f.0).collect();
    let inner_remainder = factors.iter().map(|f| f.1).fold(0.0, f64::max);
    let inv_sq: NeumaierSum = primes.iter().map(|&p| 1.0 / (p as f64 * p as f64)).collect();
    let tail_log = a as f64 * (PRIME_ZETA_2 - inv_sq.value()).max(0.0);
    let truncated = log_truncated.value().exp();
    let estimate = (log_truncated.value() + tail_log).exp();
    Ok(EulerMean {
        k,
        j,
        truncated,
        tail_log,
        tail: estimate - truncated,
        inner_remainder,
        estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinomialTerm {
    pub j: u32,
    pub binom: u64,
    pub sign: i8,
    pub mean: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub k: u32,
    pub x: Option<u64>,
    pub empirical: Option<f64>,
    pub euler: f64,
    pub terms: Vec<BinomialTerm>,
    pub truncation: EulerConfig,
}

impl MomentReport {
    /// `|euler − empirical| / empirical`, when an empirical value is attached.
    pub fn relative_gap(&self) -> Option<f64> {
        self.empirical.map(|e| (self.euler - e).abs() / e)
    }

    pub fn with_empirical(mut self, x: u64, value: f64) -> Self {
        self.x = Some(x);
        self.empirical = Some(value);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `μ_k = Σ_j (−1)^j C(k,j) M(h_{k,j})`.
pub fn moment_via_binomial(k: u32, cfg: EulerConfig) -> Result<MomentReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let mut terms = Vec::with_capacity(k as usize + 1);
    let mut total = NeumaierSum::new();
    for j in 0..=k {
        let m = euler_mean(k, j, cfg)?;
        let binom = num_integer::binomial(k as u64, j as u64);
        let sign: i8 = if j % 2 == 0 { 1 } else { -1 };
        total.add(sign as f64 * binom as f64 * m.estimate);
        terms.push(BinomialTerm {
            j,
            binom,
            sign,
            mean: m.estimate,
            tail: m.tail,
        });
    }
    Ok(MomentReport {
        k,
        x: None,
        empirical: None,
        euler: total.value(),
        terms,
        truncation: cfg,
    })
}

/// Additive functions whose prime values have closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdditiveFunction {
    /// `log(σ(n)/n)`, `f(p) = log(1 + 1/p)`.
    LogSigma,
    /// `log(S_σ(n)/n)`, `f(p) = log(1 + 2/p)`.
    LogSSigma,
    /// `log(S_σ(n)/σ(n))`, `f(p) = log((p+2)/(p+1))`.
    LogSSigmaOverSigma,
    /// `log(S_s(n)/n)` at primes, `f(p) = −log p`.
    LogSS,
}

impl AdditiveFunction {
    pub const ALL: [AdditiveFunction; 4] =
        [Self::LogSigma, Self::LogSSigma, Self::LogSSigmaOverSigma, Self::LogSS];

    pub fn name(self) -> &'static str {
        match self {
            Self::LogSigma => "log_sigma",
            Self::LogSSigma => "log_S_sigma",
            Self::LogSSigmaOverSigma => "log_S_sigma_over_sigma",
            Self::LogSS => "log_S_s",
        }
    }

    pub fn at_prime(self, p: u64) -> f64 {
        let pf = p as f64;
        match self {
            Self::LogSigma => (1.0 / pf).ln_1p(),
            Self::LogSSigma => (2.0 / pf).ln_1p(),
            Self::LogSSigmaOverSigma => (1.0 / (pf + 1.0)).ln_1p(),
            Self::LogSS => -pf.ln(),
        }
    }
}

impl fmt::Display for AdditiveFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdditiveFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFunction(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Converging,
    DivergingLogLog,
    Inconclusive,
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converging => "converging",
            Self::DivergingLogLog => "diverging-log-log",
            Self::Inconclusive => "inconclusive",
        })
    }
}

/// Relative size below which the last contribution counts as negligible.
pub const CONVERGING_RELATIVE: f64 = 1e-6;
/// The last contribution must shrink at least this much against the one
/// before it to count as converging.
pub const CONVERGING_DECAY: f64 = 0.5;
/// Smallest slope against `log log` that counts as divergence.
pub const LOGLOG_MIN_SLOPE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesDiagnostic {
    pub id: String,
    pub bounds: Vec<u64>,
    pub partial_sums: Vec<f64>,
    pub trend: Trend,
    /// Least-squares slope of the partial sums against `log log bound`.
    pub loglog_slope: Option<f64>,
}

impl SeriesDiagnostic {
    fn new(id: String, bounds: Vec<u64>, partial_sums: Vec<f64>) -> Self {
        let loglog_slope = loglog_slope(&bounds, &partial_sums);
        let trend = classify(&partial_sums, loglog_slope);
        Self {
            id,
            bounds,
            partial_sums,
            trend,
            loglog_slope,
        }
    }

    pub fn write_csv_rows<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (b, s) in self.bounds.iter().zip(&self.partial_sums) {
            writeln!(out, "{},{b},{s},{}", self.id, self.trend)?;
        }
        Ok(())
    }
}

fn loglog_slope(bounds: &[u64], sums: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = bounds
        .iter()
        .zip(sums)
        .filter(|(&b, _)| b >= 3)
        .map(|(&b, &s)| ((b as f64).ln().ln(), s))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Converging when the last decade adds nothing, adds less than
/// [`CONVERGING_RELATIVE`] of the total, or adds at most
/// [`CONVERGING_DECAY`] times what the decade before it added. Diverging
/// like `log log` when every decade adds something and the slope against
/// `log log bound` is at least [`LOGLOG_MIN_SLOPE`].
fn classify(sums: &[f64], slope: Option<f64>) -> Trend {
    let contrib: Vec<f64> = sums.windows(2).map(|w| w[1] - w[0]).collect();
    let Some(&last) = contrib.last() else {
        return Trend::Inconclusive;
    };
    let total = sums.last().copied().unwrap_or(0.0);
    let prev = contrib.len().checked_sub(2).map(|i| contrib[i]);
    if last == 0.0
        || last.abs() < CONVERGING_RELATIVE * total.abs()
        || prev.is_some_and(|p| p != 0.0 && last.abs() <= CONVERGING_DECAY * p.abs())
    {
        return Trend::Converging;
    }
    if contrib.iter().all(|&c| c > 0.0) && slope.is_some_and(|s| s >= LOGLOG_MIN_SLOPE) {
        return Trend::DivergingLogLog;
    }
    Trend::Inconclusive
}

/// Powers of ten from `10^3` up to `bound`, with `bound` itself appended.
pub fn decade_bounds(bound: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (3..20).map(|e| 10u64.pow(e)).take_while(|&b| b < bound).collect();
    out.push(bound);
    out
}

/// Partial sums of `term(p)` over primes up to each bound.
fn prime_partial_sums(primes: &[u64], bounds: &[u64], term: impl Fn(u64) -> f64) -> Vec<f64> {
    let mut acc = NeumaierSum::new();
    let mut out = Vec::with_capacity(bounds.len());
    let mut it = primes.iter().peekable();
    for &b in bounds {
        while let Some(&&p) = it.peek() {
            if p > b {
                break;
            }
            acc.add(term(p));
            it.next();
        }
        out.push(acc.value());
    }
    out
}

/// The three Erdős–Wintner series of `f` with cutoff `r`:
/// (i) `Σ_{|f(p)|>R} 1/p`, (ii) `Σ_{|f(p)|≤R} f(p)²/p`,
/// (iii) `Σ_{|f(p)|≤R} f(p)/p`.
pub fn erdos_wintner_diagnostic(f: AdditiveFunction, r: f64, bounds: &[u64]) -> Result<[SeriesDiagnostic; 3]> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("R must be positive, got {r}")));
    }
    let bounds = sorted_bounds(bounds)?;
    let primes = primes_up_to(*bounds.last().expect("non-empty"));
    let big = |p: u64| f.at_prime(p).abs() > r;
    let series = |tag: &str, term: &dyn Fn(u64) -> f64| {
        SeriesDiagnostic::new(
            format!("{f}:{tag}"),
            bounds.clone(),
            prime_partial_sums(&primes, &bounds, term),
        )
    };
    Ok([
        series("i", &|p| if big(p) { 1.0 / p as f64 } else { 0.0 }),
        series("ii", &|p| if big(p) { 0.0 } else { f.at_prime(p).powi(2) / p as f64 }),
        series("iii", &|p| if big(p) { 0.0 } else { f.at_prime(p) / p as f64 }),
    ])
}

fn sorted_bounds(bounds: &[u64]) -> Result<Vec<u64>> {
    let mut b = bounds.to_vec();
    b.sort_unstable();
    b.dedup();
    if b.is_empty() || b[0] < 2 {
        return Err(Error::InvalidArgument("prime bounds must be >= 2".into()));
    }
    Ok(b)
}

/// Primes up to this bound fit the constant of the `C/p²` envelope; larger
/// primes are checked against it.
pub const WINTNER_FIT_BOUND: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WintnerReport {
    pub k: u32,
    pub j: u32,
    /// `Σ_p |h(p) − 1|/p`.
    pub condition_i: SeriesDiagnostic,
    /// `Σ_p Σ_{ν≥2} |h(p^ν) − h(p^{ν−1})|/p^ν`.
    pub condition_ii: SeriesDiagnostic,
    /// `max p²·|h(p) − 1|/p` over primes up to [`WINTNER_FIT_BOUND`].
    pub fitted_c: f64,
    /// Primes beyond the fit range whose summand exceeds `fitted_c/p²`.
    pub late_violations: Vec<u64>,
    /// Local slope of `log(inner sum of (ii))` against `log p` between the
    /// largest primes below `bound/10` and `bound`.
    pub inner_decay_exponent: Option<f64>,
    /// Inner sum of (ii) over [`nu_series`] at the largest prime.
    pub inner_to_nu_series: f64,
}

/// `h(p) − 1` for `h = h_{k,j}` without cancellation.
fn h_at_prime_minus_one(k: u32, j: u32, p: u64) -> f64 {
    let inv = 1.0 / p as f64;
    (j as f64 * inv.ln_1p() + (k - j) as f64 * (2.0 * inv).ln_1p()).exp_m1()
}

fn inner_condition_ii(k: u32, j: u32, p: u64) -> f64 {
    h_increments(k, j, p, DEFAULT_EULER_NU)
        .filter(|&(nu, _, _)| nu >= 2)
        .map(|(_, dh, pw)| dh.abs() * pw)
        .collect::<NeumaierSum>()
        .value()
}

pub fn wintner_condition_check(k: u32, j: u32, bound: u64) -> Result<WintnerReport> {
    check_kj(k, j)?;
    if bound < 2 {
        return Err(Error::InvalidArgument("prime bound must be >= 2".into()));
    }
    let bounds = decade_bounds(bound);
    let primes = primes_up_to(bound);
    let term_i = |p: u64| h_at_prime_minus_one(k, j, p).abs() / p as f64;
    let condition_i = SeriesDiagnostic::new(
        format!("wintner-i:k={k}:j={j}"),
        bounds.clone(),
        prime_partial_sums(&primes, &bounds, term_i),
    );
    let condition_ii = SeriesDiagnostic::new(
        format!("wintner-ii:k={k}:j={j}"),
        bounds.clone(),
        prime_partial_sums(&primes, &bounds, |p| inner_condition_ii(k, j, p)),
    );

    let scaled = |p: u64| term_i(p) * (p as f64).powi(2);
    let fitted_c = primes
        .iter()
        .take_while(|&&p| p <= WINTNER_FIT_BOUND)
        .map(|&p| scaled(p))
        .fold(0.0, f64::max);
    let late_violations = primes
        .iter()
        .copied()
        .filter(|&p| p > WINTNER_FIT_BOUND && scaled(p) > fitted_c * (1.0 + 1e-12))
        .collect();

    let last = *primes.last().expect("bound >= 2");
    let lower = primes.iter().copied().take_while(|&p| p <= bound / 10).last();
    let inner_last = inner_condition_ii(k, j, last);
    let inner_decay_exponent = lower.filter(|&p| p > 1 && p < last).map(|p| {
        (inner_last / inner_condition_ii(k, j, p)).ln() / (last as f64 / p as f64).ln()
    });
    let nu = crate::numeric::to_f64(&nu_series(last)?);
    Ok(WintnerReport {
        k,
        j,
        condition_i,
        condition_ii,
        fitted_c,
        late_violations,
        inner_decay_exponent,
        inner_to_nu_series: inner_last / nu,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub k: u32,
    pub mu_k: f64,
    /// `log μ_k / (k log log k)`.
    pub loglog_ratio: f64,
    /// `μ_{2k}^{1/(2k)} / k`.
    pub carleman_ratio: f64,
    /// `μ_k(x) / μ_k(x/10)`.
    pub stability: f64,
    /// Empirical `2k`-th moment of `n/φ(n)`.
    pub phi_moment_2k: f64,
    pub phi_bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthTable {
    pub x: u64,
    pub rows: Vec<GrowthRow>,
    /// Set when `loglog_ratio` rises by more than 10% between consecutive
    /// entries among the last three k.
    pub loglog_exploding: bool,
    pub carleman_exploding: bool,
}

impl GrowthTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{GROWTH_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.k, r.mu_k, r.loglog_ratio, r.carleman_ratio, r.stability, r.phi_moment_2k, r.phi_bound_holds
            )?;
        }
        Ok(())
    }
}

/// Largest tolerated rise between consecutive ratio entries at the tail.
pub const GROWTH_TOLERANCE: f64 = 1.10;

fn exploding(values: &[f64]) -> bool {
    let tail = &values[values.len().saturating_sub(3)..];
    tail.windows(2).any(|w| w[1] > GROWTH_TOLERANCE * w[0])
}

fn check_growth_args(k_max: u32, x: u64) -> Result<()> {
    if k_max < 4 || x < 10 {
        return Err(Error::InvalidArgument(format!(
            "need k_max >= 4 and x >= 10, got k_max = {k_max}, x = {x}"
        )));
    }
    Ok(())
}

/// Ratio tables for `k = 3..=k_max` at `x`, from one pass with checkpoints
/// `x/10` and `x`.
pub fn moment_growth_check(k_max: u32, x: u64) -> Result<GrowthTable> {
    check_growth_args(k_max, x)?;
    let ladder = MomentLadder::build(&[x / 10, x], 2 * k_max)?;
    growth_table(&ladder, k_max, x)
}

/// As [`moment_growth_check`], reusing a ladder that holds checkpoints
/// `x/10` and `x` and powers up to `2·k_max`.
pub fn growth_table(ladder: &MomentLadder, k_max: u32, x: u64) -> Result<GrowthTable> {
    check_growth_args(k_max, x)?;
    let missing = || Error::InvalidArgument(format!("ladder lacks x = {x}, x/10 or power {}", 2 * k_max));
    let mut rows = Vec::new();
    for k in 3..=k_max {
        let mu = ladder.ratio_moment(x, k).ok_or_else(missing)?;
        let mu_2k = ladder.ratio_moment(x, 2 * k).ok_or_else(missing)?;
        let earlier = ladder.ratio_moment(x / 10, k).ok_or_else(missing)?;
        let phi = ladder.phi_moment(x, 2 * k).ok_or_else(missing)?;
        let kf = k as f64;
        rows.push(GrowthRow {
            k,
            mu_k: mu,
            loglog_ratio: mu.ln() / (kf * kf.ln().ln()),
            carleman_ratio: mu_2k.powf(1.0 / (2.0 * kf)) / kf,
            stability: mu / earlier,
            phi_moment_2k: phi,
            phi_bound_holds: mu <= phi,
        });
    }
    let loglog: Vec<f64> = rows.iter().map(|r| r.loglog_ratio).collect();
    let carleman: Vec<f64> = rows.iter().map(|r| r.carleman_ratio).collect();
    Ok(GrowthTable {
        x,
        loglog_exploding: exploding(&loglog),
        carleman_exploding: exploding(&carleman),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{point_eval, FactoredInteger};
    use crate::numeric::{rational, to_f64};
    use crate::sieve::sieve_range;
    use num_traits::{One, Zero};
    use proptest::prelude::*;

    fn small() -> EulerConfig {
        EulerConfig { primes: 20_000, nu: 60 }
    }

    #[test]
    fn empirical_examples() {
        assert_eq!(empirical_moment(1, 3).unwrap(), (0.0 + 0.5 + 1.0 / 3.0) / 3.0);
        for k in 1..6 {
            assert_eq!(empirical_moment(k, 1).unwrap(), 0.0);
        }
        assert!(empirical_moment(0, 5).is_err());
        assert!(empirical_moment(1, 0).is_err());
    }

    #[test]
    fn ladder_matches_direct_sums() {
        let t = sieve_range(1, 2000).unwrap();
        let ladder = MomentLadder::build(&[500, 2000], 4).unwrap();
        for &x in &[500u64, 2000] {
            for k in 1..=4 {
                let direct: f64 = (1..=x).map(|n| (t.big_s_s(n) as f64 / n as f64).powi(k as i32)).sum::<f64>() / x as f64;
                let phi: f64 = (1..=x).map(|n| (n as f64 / t.phi(n) as f64).powi(k as i32)).sum::<f64>() / x as f64;
                assert!((ladder.ratio_moment(x, k).unwrap() - direct).abs() <= 1e-12 * direct);
                assert!((ladder.phi_moment(x, k).unwrap() - phi).abs() <= 1e-12 * phi);
            }
        }
        assert_eq!(ladder.ratio_moment(1000, 1), None);
        assert_eq!(ladder.ratio_moment(500, 5), None);
    }

    #[test]
    fn h_examples() {
        assert_eq!(h_value_exact(1, 0, 2, 1).unwrap(), rational(2, 1));
        assert_eq!(h_value_exact(2, 1, 3, 1).unwrap(), rational(20, 9));
        assert_eq!(h_value_exact(3, 3, 5, 2).unwrap(), Pow::pow(rational(31, 25), 3u32));
        assert_eq!(h_value_exact(0, 0, 7, 3).unwrap(), rational(1, 1));
        assert_eq!(h_value(2, 1, 3, 1).unwrap(), 20.0 / 9.0);
        assert!(h_value(1, 2, 3, 1).is_err());
        assert!(h_value(1, 1, 4, 1).is_err());
    }

    #[test]
    fn increments_match_exact_differences() {
        for &(k, j) in &[(1u32, 0u32), (1, 1), (3, 1), (6, 2), (6, 6)] {
            for &p in &[2u64, 3, 101] {
                for (nu, dh, pw) in h_increments(k, j, p, 12) {
                    let exact = h_value_exact(k, j, p, nu).unwrap() - h_value_exact(k, j, p, nu - 1).unwrap();
                    let e = to_f64(&exact);
                    assert!((dh - e).abs() <= 1e-13 * e.abs(), "k={k} j={j} p={p} nu={nu}: {dh} vs {e}");
                    let direct = (p as f64).powi(-(nu as i32));
                    assert!((pw - direct).abs() <= 1e-14 * direct);
                }
            }
        }
    }

    #[test]
    fn nu_series_closed_form() {
        assert_eq!(nu_series(2).unwrap(), rational(7, 72));
        // (2·9 − 1)/((9 − 1)²·27)
        assert_eq!(nu_series(3).unwrap(), rational(17, 1728));
        assert!(nu_series(1).is_err());
        let mut last = to_f64(&nu_series(2).unwrap());
        for p in primes_up_to(200).into_iter().skip(1) {
            let v = to_f64(&nu_series(p).unwrap());
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn nu_series_matches_direct_sum_exactly_for_small_p() {
        // Partial sums up to ν = 40 are within p^{-80} of the limit.
        for p in [2u64, 3, 5] {
            let mut s = BigRational::zero();
            for nu in 2..=200u32 {
                s += BigRational::new(BigInt::from(nu), Pow::pow(BigInt::from(p), 2 * nu + 1));
            }
            let diff = to_f64(&(nu_series(p).unwrap() - s));
            assert!(diff >= 0.0 && diff < 1e-100);
        }
    }

    #[test]
    fn euler_examples() {
        let one = euler_mean(0, 0, small()).unwrap();
        assert_eq!(one.estimate, 1.0);
        assert_eq!(one.tail, 0.0);
        let z = crate::numeric::ZETA2;
        let m11 = euler_mean(1, 1, small()).unwrap();
        assert!((m11.estimate - z).abs() < 1e-9 * z, "{m11:?}");
        assert!(m11.truncated < m11.estimate);
        let m10 = euler_mean(1, 0, small()).unwrap();
        assert!((m10.estimate - z * z).abs() < 1e-9 * z * z, "{m10:?}");
        let report = moment_via_binomial(1, small()).unwrap();
        assert!((report.euler - z * (z - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn euler_with_two_only_is_visibly_off() {
        let cfg = EulerConfig { primes: 2, nu: 60 };
        let m = euler_mean(1, 1, cfg).unwrap();
        assert!((m.truncated - 4.0 / 3.0).abs() < 1e-15);
        assert!(m.tail > 0.2);
        assert!((m.estimate - crate::numeric::ZETA2).abs() > 1e-3);
        assert!(euler_mean(1, 1, EulerConfig { primes: 1, nu: 60 }).is_err());
    }

    #[test]
    fn short_inner_sums_are_rejected() {
        let err = euler_mean(3, 0, EulerConfig { primes: 100, nu: 3 }).unwrap_err();
        assert!(matches!(err, Error::NonConvergentInnerSum { p: 2, k: 3, j: 0 }), "{err}");
    }

    #[test]
    fn report_json_shape() {
        let r = moment_via_binomial(2, EulerConfig { primes: 1000, nu: 40 })
            .unwrap()
            .with_empirical(100, 1.5);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["k"], 2);
        assert_eq!(v["x"], 100);
        assert_eq!(v["truncation"]["P"], 1000);
        assert_eq!(v["truncation"]["V"], 40);
        let terms = v["terms"].as_array().unwrap();
        assert_eq!(terms.len(), 3);
        assert_eq!(terms[1]["binom"], 2);
        assert_eq!(terms[1]["sign"], -1);
        for key in ["j", "binom", "sign", "mean", "tail"] {
            assert!(terms[0].get(key).is_some());
        }
    }

    #[test]
    fn additive_function_names() {
        for f in AdditiveFunction::ALL {
            assert_eq!(f.name().parse::<AdditiveFunction>().unwrap(), f);
        }
        assert!(matches!("log_phi".parse::<AdditiveFunction>(), Err(Error::UnknownFunction(_))));
    }

    #[test]
    fn erdos_wintner_examples() {
        let [i, ii, _] = erdos_wintner_diagnostic(AdditiveFunction::LogSigma, 1.0, &decade_bounds(100_000)).unwrap();
        assert!(i.partial_sums.iter().all(|&s| s == 0.0));
        assert_eq!(i.trend, Trend::Converging);
        assert_eq!(ii.trend, Trend::Converging);

        let [i, ii, iii] = erdos_wintner_diagnostic(AdditiveFunction::LogSS, 1.0, &decade_bounds(1_000_000)).unwrap();
        assert_eq!(i.trend, Trend::DivergingLogLog);
        assert!(i.partial_sums.windows(2).all(|w| w[0] < w[1]));
        // Only p = 2 has |log p| <= 1.
        let two = -(2f64.ln());
        assert_eq!(ii.partial_sums[0], two * two / 2.0);
        assert_eq!(iii.partial_sums[0], two / 2.0);
        assert!(erdos_wintner_diagnostic(AdditiveFunction::LogSS, 0.0, &[100]).is_err());
    }

    #[test]
    fn trend_rules() {
        assert_eq!(classify(&[1.0, 1.0, 1.0], None), Trend::Converging);
        assert_eq!(classify(&[1.0, 1.1, 1.12], None), Trend::Converging);
        assert_eq!(classify(&[1.0], None), Trend::Inconclusive);
        let bounds = decade_bounds(10_000_000);
        let sums: Vec<f64> = bounds.iter().map(|&b| (b as f64).ln().ln()).collect();
        let slope = loglog_slope(&bounds, &sums);
        assert!((slope.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(classify(&sums, slope), Trend::DivergingLogLog);
        assert_eq!(classify(&[3.0, 2.0, 1.0], Some(-1.0)), Trend::Inconclusive);
    }

    #[test]
    fn wintner_examples() {
        let r = wintner_condition_check(1, 1, 100_000).unwrap();
        for p in [2u64, 3, 97, 99_991] {
            let term = h_at_prime_minus_one(1, 1, p) / p as f64;
            let expect = 1.0 / (p as f64 * p as f64);
            assert!((term - expect).abs() <= 4.0 * f64::EPSILON * expect);
        }
        assert_eq!(r.condition_i.trend, Trend::Converging);
        assert_eq!(r.condition_ii.trend, Trend::Converging);
        assert!(r.late_violations.is_empty());

        let r = wintner_condition_check(3, 1, 1_000_000).unwrap();
        assert_eq!(r.condition_i.trend, Trend::Converging);
        assert_eq!(r.condition_ii.trend, Trend::Converging);
        assert!(r.late_violations.is_empty());
        assert!((r.fitted_c - 2.0 * (1.5f64 * 2.0 * 2.0 - 1.0)).abs() < 1e-12);

        // The inner sum of (ii) is 3/p⁴ + O(p⁻⁵) for k = 1, j = 0.
        let r = wintner_condition_check(1, 0, 100_000).unwrap();
        let e = r.inner_decay_exponent.unwrap();
        assert!((e + 4.0).abs() < 0.01, "{e}");
        assert!(wintner_condition_check(1, 2, 100).is_err());
    }

    #[test]
    fn growth_table_shape() {
        let g = moment_growth_check(5, 20_000).unwrap();
        assert_eq!(g.rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![3, 4, 5]);
        assert!(g.rows.iter().all(|r| r.mu_k.is_finite() && r.phi_bound_holds));
        assert!(moment_growth_check(3, 1000).is_err());
        let ladder = MomentLadder::build(&[2_000, 20_000], 10).unwrap();
        assert_eq!(growth_table(&ladder, 5, 20_000).unwrap(), g);
        assert!(growth_table(&ladder, 6, 20_000).is_err());
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with(GROWTH_CSV_HEADER));
        assert!(exploding(&[1.0, 1.0, 1.2]));
        assert!(!exploding(&[5.0, 1.0, 1.05, 1.1]));
    }

    #[test]
    fn phi_domination_pointwise() {
        let t = sieve_range(1, 20_000).unwrap();
        for n in 1..=20_000u64 {
            let (ss, s_sig, phi) = (t.big_s_s(n) as u128, t.big_s_sigma(n) as u128, t.phi(n) as u128);
            let n = n as u128;
            // S_s/n <= S_σ/n <= (n/φ)²
            assert!(ss <= s_sig);
            assert!(s_sig * phi * phi <= n * n * n);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn h_is_multiplicative_on_squarefree(n in 2u64..10_000, k in 0u32..5, j_seed in 0u32..5) {
            let f = FactoredInteger::from_u64(n).unwrap();
            prop_assume!(f.is_squarefree());
            let j = j_seed % (k + 1);
            let stats = point_eval(&f);
            let nk = Pow::pow(BigInt::from(n), k);
            let direct = BigRational::new(
                Pow::pow(BigInt::from(stats.sigma.clone()), j) * Pow::pow(BigInt::from(stats.big_s_sigma.clone()), k - j),
                nk,
            );
            let mut prod = BigRational::one();
            for p in f.primes() {
                let p: u64 = p.try_into().unwrap();
                prod *= h_value_exact(k, j, p, 1).unwrap();
            }
            prop_assert_eq!(direct, prod);
        }
    }
}
