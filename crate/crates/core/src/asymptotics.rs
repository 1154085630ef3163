//! Running means of σ, S_σ, S_s and S_s(n)/n against their ζ(2) limits.

use crate::error::{Error, Result};
use crate::primality::primes_up_to;
use crate::numeric::{format_rational, parse_count, to_f64, NeumaierSum, ZETA2};
use crate::sieve::{Accumulator, ArithmeticTable, DivisorSieve};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use std::fmt;
use std::io::{self, Write};

/// Header of the checkpoint export.
pub const CSV_HEADER: &str = "x,statistic,partial_sum,mean,limit,normalized_error";

/// Largest `x` for which `Σ S_s(n)/n` is kept as an exact rational. Beyond
/// it the sum is an exact integer part plus a compensated fractional part.
pub const EXACT_RATIO_LIMIT: u64 = 100_000;

/// Limit constants of the four statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub zeta2: f64,
    /// ζ(2)/2, the slope of `M_x(σ)`.
    pub c_mean_sigma: f64,
    /// ζ(2)²/2, the slope of `M_x(S_σ)`.
    pub c_mean_s_sigma: f64,
    /// ζ(2)(ζ(2)−1)/2, the slope of `M_x(S_s)`.
    pub c_mean_ss: f64,
    /// ζ(2)(ζ(2)−1), the mean of `S_s(n)/n`.
    pub c_mean_ratio: f64,
}

impl Constants {
    pub fn new() -> Self {
        Self {
            zeta2: ZETA2,
            c_mean_sigma: ZETA2 / 2.0,
            c_mean_s_sigma: ZETA2 * ZETA2 / 2.0,
            c_mean_ss: ZETA2 * (ZETA2 - 1.0) / 2.0,
            c_mean_ratio: ZETA2 * (ZETA2 - 1.0),
        }
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    Sigma,
    SSigma,
    SS,
    RatioSS,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Self::Sigma, Self::SSigma, Self::SS, Self::RatioSS];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sigma => "sigma",
            Self::SSigma => "S_sigma",
            Self::SS => "S_s",
            Self::RatioSS => "S_s/n",
        }
    }

    pub fn limit_constant(self, c: &Constants) -> f64 {
        match self {
            Self::Sigma => c.c_mean_sigma,
            Self::SSigma => c.c_mean_s_sigma,
            Self::SS => c.c_mean_ss,
            Self::RatioSS => c.c_mean_ratio,
        }
    }

    /// Power of `log x` in the error term.
    pub fn log_exponent(self) -> i32 {
        match self {
            Self::Sigma => 1,
            Self::SSigma | Self::SS => 2,
            Self::RatioSS => 3,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumMode {
    Exact,
    Compensated,
}

/// Exact partial sum, or for the ratio statistic beyond
/// [`EXACT_RATIO_LIMIT`] an exact integer part plus a compensated
/// fractional part.
#[derive(Debug, Clone, PartialEq)]
pub enum PartialSum {
    Integer(u128),
    Rational(BigRational),
    Compensated { integer: u128, fraction: f64 },
}

impl PartialSum {
    pub fn mode(&self) -> SumMode {
        match self {
            Self::Compensated { .. } => SumMode::Compensated,
            _ => SumMode::Exact,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Self::Integer(v) => *v as f64,
            Self::Rational(r) => to_f64(r),
            Self::Compensated { integer, fraction } => *integer as f64 + fraction,
        }
    }

    /// `partial_sum − c·x` evaluated so that the large leading parts cancel
    /// before rounding.
    fn minus_linear(&self, c: f64, x: u64) -> f64 {
        match self {
            Self::Integer(v) => *v as f64 - c * x as f64,
            Self::Rational(r) => {
                let whole = r.to_integer();
                let frac = to_f64(&(r - BigRational::from_integer(whole.clone())));
                (whole.to_f64().unwrap_or(f64::NAN) - c * x as f64) + frac
            }
            Self::Compensated { integer, fraction } => (*integer as f64 - c * x as f64) + fraction,
        }
    }
}

impl fmt::Display for PartialSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Integer(v) => write!(f, "{v}"),
            Self::Rational(r) => f.write_str(&format_rational(r)),
            Self::Compensated { integer, fraction } => write!(f, "{}", *integer as f64 + fraction),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanCheckpoint {
    pub statistic: Statistic,
    pub x: u64,
    pub partial_sum: PartialSum,
    pub mean: f64,
    pub limit_constant: f64,
    /// `|M_x(f) − c·x| / (log x)^e` for σ, S_σ and S_s, and
    /// `|Σ S_s(n)/n − c·x| / (log x)^3` for the ratio. Undefined at `x = 1`.
    pub normalized_error: Option<f64>,
}

impl MeanCheckpoint {
    fn new(statistic: Statistic, x: u64, partial_sum: PartialSum, c: &Constants) -> Self {
        let limit_constant = statistic.limit_constant(c);
        let xf = x as f64;
        let mean = partial_sum.to_f64() / xf;
        let normalized_error = (x >= 2).then(|| {
            let scale = xf.ln().powi(statistic.log_exponent());
            let err = match statistic {
                Statistic::RatioSS => partial_sum.minus_linear(limit_constant, x),
                // M_x(f) − c·x = (Σ − c·x²)/x
                _ => minus_quadratic(&partial_sum, limit_constant, x) / xf,
            };
            err.abs() / scale
        });
        Self {
            statistic,
            x,
            partial_sum,
            mean,
            limit_constant,
            normalized_error,
        }
    }

    /// `mean / x` for the unnormalized statistics, `mean` for the ratio:
    /// the quantity that tends to `limit_constant`.
    pub fn scaled_mean(&self) -> f64 {
        match self.statistic {
            Statistic::RatioSS => self.mean,
            _ => self.mean / self.x as f64,
        }
    }

    pub fn write_csv_row<W: Write>(&self, mut out: W) -> io::Result<()> {
        let err = self.normalized_error.map(|e| e.to_string()).unwrap_or_default();
        // Exact rationals run to tens of thousands of digits; the table
        // carries their decimal value.
        let sum = match &self.partial_sum {
            PartialSum::Rational(r) => to_f64(r).to_string(),
            other => other.to_string(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            self.x, self.statistic, sum, self.mean, self.limit_constant, err
        )
    }
}

fn minus_quadratic(sum: &PartialSum, c: f64, x: u64) -> f64 {
    let PartialSum::Integer(v) = sum else {
        unreachable!("σ, S_σ and S_s sums are integers")
    };
    // Split c·x² = c·x·x so the subtraction happens at full precision.
    let lead = c * x as f64 * x as f64;
    *v as f64 - lead
}

/// Parses `a,b,c` or `decades:lo:hi` (powers of ten from `10^lo` to `10^hi`).
pub fn parse_checkpoints(text: &str) -> Result<Vec<u64>> {
    let bad = |why: &str| Error::Parse(format!("checkpoints {text:?}: {why}"));
    let mut out = if let Some(rest) = text.strip_prefix("decades:") {
        let (lo, hi) = rest.split_once(':').ok_or_else(|| bad("expected decades:lo:hi"))?;
        let lo: u32 = lo.trim().parse().map_err(|_| bad("bad lower exponent"))?;
        let hi: u32 = hi.trim().parse().map_err(|_| bad("bad upper exponent"))?;
        if lo > hi || hi > 19 {
            return Err(bad("exponents must satisfy lo <= hi <= 19"));
        }
        (lo..=hi).map(|e| 10u64.pow(e)).collect::<Vec<_>>()
    } else {
        text.split(',').map(|t| parse_count(t.trim())).collect::<Result<Vec<_>>>()?
    };
    out.sort_unstable();
    out.dedup();
    if out.is_empty() || out[0] == 0 {
        return Err(bad("checkpoints must be positive"));
    }
    Ok(out)
}

#[derive(Clone)]
struct MeanAcc {
    sigma: u128,
    s_sigma: u128,
    s_s: u128,
    ratio_whole: u128,
    ratio_frac: NeumaierSum,
}

impl Accumulator for MeanAcc {
    fn push(&mut self, t: &ArithmeticTable, n: u64) {
        let ss = t.big_s_s(n);
        self.sigma += t.sigma(n) as u128;
        self.s_sigma += t.big_s_sigma(n) as u128;
        self.s_s += ss as u128;
        self.ratio_whole += (ss / n) as u128;
        let rem = ss % n;
        if rem != 0 {
            self.ratio_frac.add(rem as f64 / n as f64);
        }
    }

    fn merge(&mut self, later: &Self) {
        self.sigma += later.sigma;
        self.s_sigma += later.s_sigma;
        self.s_s += later.s_s;
        self.ratio_whole += later.ratio_whole;
        self.ratio_frac.merge(&later.ratio_frac);
    }
}

/// Exact `Σ_{n ≤ c} S_s(n)/n` for each checkpoint `c`, from the values
/// `S_s(1..=m)`. All terms share the denominator `lcm(1..=m)`.
fn exact_ratio_sums(s_s: &[u64], checkpoints: &[u64]) -> Vec<BigRational> {
    let Some(&m) = checkpoints.last() else {
        return Vec::new();
    };
    let mut lcm = BigUint::one();
    for p in primes_up_to(m) {
        let mut pk = p;
        while pk <= m / p {
            pk *= p;
        }
        lcm *= pk;
    }
    let mut num = BigUint::default();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for n in 1..=m {
        let v = s_s[(n - 1) as usize];
        if v != 0 {
            num += (&lcm / n) * v;
        }
        if next.peek() == Some(&&n) {
            out.push(BigRational::new(BigInt::from(num.clone()), BigInt::from(lcm.clone())));
            next.next();
        }
    }
    out
}

/// All four statistics at every checkpoint from a single sieve pass. Rows
/// are ordered by checkpoint, then by [`Statistic::ALL`].
pub fn mean_ladder(checkpoints: &[u64]) -> Result<Vec<MeanCheckpoint>> {
    let mut cps = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    if cps.first() == Some(&0) {
        return Err(Error::InvalidArgument("checkpoints must be positive".into()));
    }
    let Some(&last) = cps.last() else {
        return Ok(Vec::new());
    };
    let zero = MeanAcc {
        sigma: 0,
        s_sigma: 0,
        s_s: 0,
        ratio_whole: 0,
        ratio_frac: NeumaierSum::new(),
    };
    let sieve = DivisorSieve::new(last);
    let snaps = sieve.prefix_scan(&cps, &zero)?;

    let exact_cps: Vec<u64> = cps.iter().copied().filter(|&c| c <= EXACT_RATIO_LIMIT).collect();
    let exact = match exact_cps.last() {
        Some(&m) => {
            let t = sieve.table(1, m)?;
            exact_ratio_sums(t.big_s_s_values(), &exact_cps)
        }
        None => Vec::new(),
    };

    let c = Constants::new();
    let mut rows = Vec::with_capacity(4 * cps.len());
    for (i, (&x, acc)) in cps.iter().zip(&snaps).enumerate() {
        let ratio = match exact.get(i) {
            Some(r) => PartialSum::Rational(r.clone()),
            None => PartialSum::Compensated {
                integer: acc.ratio_whole,
                fraction: acc.ratio_frac.value(),
            },
        };
        rows.push(MeanCheckpoint::new(Statistic::Sigma, x, PartialSum::Integer(acc.sigma), &c));
        rows.push(MeanCheckpoint::new(Statistic::SSigma, x, PartialSum::Integer(acc.s_sigma), &c));
        rows.push(MeanCheckpoint::new(Statistic::SS, x, PartialSum::Integer(acc.s_s), &c));
        rows.push(MeanCheckpoint::new(Statistic::RatioSS, x, ratio, &c));
    }
    Ok(rows)
}

fn single(statistic: Statistic, x: u64) -> Result<MeanCheckpoint> {
    if x == 0 {
        return Err(Error::InvalidArgument("x must be >= 1".into()));
    }
    Ok(mean_ladder(&[x])?
        .into_iter()
        .find(|r| r.statistic == statistic)
        .expect("ladder emits every statistic"))
}

pub fn mean_sigma(x: u64) -> Result<MeanCheckpoint> {
    single(Statistic::Sigma, x)
}

pub fn mean_s_sigma(x: u64) -> Result<MeanCheckpoint> {
    single(Statistic::SSigma, x)
}

pub fn mean_s_s(x: u64) -> Result<MeanCheckpoint> {
    single(Statistic::SS, x)
}

pub fn mean_ratio_s_s(x: u64) -> Result<MeanCheckpoint> {
    single(Statistic::RatioSS, x)
}

/// Largest normalized error of `statistic` over the ladder.
pub fn max_normalized_error(rows: &[MeanCheckpoint], statistic: Statistic) -> Option<f64> {
    rows.iter()
        .filter(|r| r.statistic == statistic)
        .filter_map(|r| r.normalized_error)
        .reduce(f64::max)
}

pub fn write_csv<W: Write>(rows: &[MeanCheckpoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        r.write_csv_row(&mut out)?;
    }
    Ok(())
}
