//! Segmented multiplicative sieve for σ, s, S_σ, S_s and φ over a range.
//!
//! Each segment starts with `rem[n] = n` and all accumulators at one. Every
//! base prime `p <= √hi` strips its full power `p^ν` from the multiples it
//! hits and multiplies in σ(p^ν), S_σ(p^ν) and φ(p^ν); whatever is left in
//! `rem` afterwards is a single prime above `√hi`. Segments only need the
//! base primes, so no value below `lo` is ever materialized.

use crate::error::{Error, Result};
use crate::primality::primes_up_to;
use rayon::prelude::*;
use serde::Serialize;
use std::io::{self, Write};

/// Default segment width in entries.
pub const DEFAULT_SEGMENT_WIDTH: u64 = 1 << 20;

/// Header of the CSV export.
pub const CSV_HEADER: &str = "n,sigma,s,S_sigma,S_s,phi";

/// One row of an [`ArithmeticTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Row {
    pub n: u64,
    pub sigma: u64,
    #[serde(rename = "s")]
    pub s_little: u64,
    #[serde(rename = "S_sigma")]
    pub big_s_sigma: u64,
    #[serde(rename = "S_s")]
    pub big_s_s: u64,
    pub phi: u64,
}

/// Exact σ, s, S_σ, S_s and φ for every n in `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArithmeticTable {
    lo: u64,
    hi: u64,
    sigma: Vec<u64>,
    s_little: Vec<u64>,
    big_s_sigma: Vec<u64>,
    big_s_s: Vec<u64>,
    phi: Vec<u64>,
}

impl ArithmeticTable {
    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    fn index(&self, n: u64) -> usize {
        assert!(
            (self.lo..=self.hi).contains(&n),
            "{n} outside table range [{}, {}]",
            self.lo,
            self.hi
        );
        (n - self.lo) as usize
    }

    pub fn sigma(&self, n: u64) -> u64 {
        self.sigma[self.index(n)]
    }

    pub fn s_little(&self, n: u64) -> u64 {
        self.s_little[self.index(n)]
    }

    pub fn big_s_sigma(&self, n: u64) -> u64 {
        self.big_s_sigma[self.index(n)]
    }

    pub fn big_s_s(&self, n: u64) -> u64 {
        self.big_s_s[self.index(n)]
    }

    pub fn phi(&self, n: u64) -> u64 {
        self.phi[self.index(n)]
    }

    pub fn row(&self, n: u64) -> Row {
        let i = self.index(n);
        self.row_at(i)
    }

    fn row_at(&self, i: usize) -> Row {
        Row {
            n: self.lo + i as u64,
            sigma: self.sigma[i],
            s_little: self.s_little[i],
            big_s_sigma: self.big_s_sigma[i],
            big_s_s: self.big_s_s[i],
            phi: self.phi[i],
        }
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = Row> + '_ {
        (0..self.len()).map(move |i| self.row_at(i))
    }

    /// Column slices indexed by `n − lo`.
    pub fn sigma_values(&self) -> &[u64] {
        &self.sigma
    }

    pub fn big_s_sigma_values(&self) -> &[u64] {
        &self.big_s_sigma
    }

    pub fn big_s_s_values(&self) -> &[u64] {
        &self.big_s_s
    }

    pub fn phi_values(&self) -> &[u64] {
        &self.phi
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in self.rows() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n, r.sigma, r.s_little, r.big_s_sigma, r.big_s_s, r.phi
            )?;
        }
        Ok(())
    }

    fn concat(mut parts: Vec<ArithmeticTable>) -> ArithmeticTable {
        if parts.len() == 1 {
            return parts.pop().expect("one part");
        }
        let lo = parts.first().map_or(1, |t| t.lo);
        let hi = parts.last().map_or(0, |t| t.hi);
        let cap = (hi - lo + 1) as usize;
        let mut out = ArithmeticTable {
            lo,
            hi,
            sigma: Vec::with_capacity(cap),
            s_little: Vec::with_capacity(cap),
            big_s_sigma: Vec::with_capacity(cap),
            big_s_s: Vec::with_capacity(cap),
            phi: Vec::with_capacity(cap),
        };
        for part in parts {
            out.sigma.extend_from_slice(&part.sigma);
            out.s_little.extend_from_slice(&part.s_little);
            out.big_s_sigma.extend_from_slice(&part.big_s_sigma);
            out.big_s_s.extend_from_slice(&part.big_s_s);
            out.phi.extend_from_slice(&part.phi);
        }
        out
    }
}

/// Sieve for ranges ending at or below a fixed limit.
#[derive(Debug, Clone)]
pub struct DivisorSieve {
    limit: u64,
    width: u64,
    base_primes: Vec<u64>,
}

impl DivisorSieve {
    pub fn new(limit: u64) -> Self {
        Self {
            limit,
            width: DEFAULT_SEGMENT_WIDTH,
            base_primes: primes_up_to(isqrt(limit)),
        }
    }

    pub fn with_segment_width(mut self, width: u64) -> Self {
        self.width = width.max(1);
        self
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn segment_width(&self) -> u64 {
        self.width
    }

    fn check_range(&self, lo: u64, hi: u64) -> Result<()> {
        if lo == 0 || lo > hi || hi > self.limit {
            return Err(Error::InvalidRange { lo, hi });
        }
        Ok(())
    }

    /// Segment boundaries covering `[lo, hi]`.
    pub fn segments(&self, lo: u64, hi: u64) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut start = lo;
        while start <= hi {
            let end = start.saturating_add(self.width - 1).min(hi);
            out.push((start, end));
            if end == u64::MAX {
                break;
            }
            start = end + 1;
        }
        out
    }

    /// Sieves `[lo, hi]` as a single segment.
    pub fn segment(&self, lo: u64, hi: u64) -> Result<ArithmeticTable> {
        self.check_range(lo, hi)?;
        let len = (hi - lo + 1) as usize;
        let mut rem: Vec<u64> = (lo..=hi).collect();
        let mut sigma = vec![1u64; len];
        let mut big_s_sigma = vec![1u64; len];
        let mut phi = vec![1u64; len];

        for &p in &self.base_primes {
            if p * p > hi {
                break;
            }
            let first = lo.div_ceil(p) * p;
            let mut m = first;
            while m <= hi {
                let i = (m - lo) as usize;
                let mut r = rem[i];
                let mut pk = 1u64;
                let mut sig = 1u64;
                let mut ssig = 1u64;
                while r % p == 0 {
                    r /= p;
                    pk *= p;
                    sig = checked(sig.checked_add(pk), m, "sigma")?;
                    ssig = checked(ssig.checked_add(sig), m, "S_sigma")?;
                }
                rem[i] = r;
                sigma[i] = checked(sigma[i].checked_mul(sig), m, "sigma")?;
                big_s_sigma[i] = checked(big_s_sigma[i].checked_mul(ssig), m, "S_sigma")?;
                phi[i] *= pk - pk / p;
                m += p;
            }
        }

        for (i, &q) in rem.iter().enumerate() {
            if q > 1 {
                let n = lo + i as u64;
                sigma[i] = checked(sigma[i].checked_mul(q + 1), n, "sigma")?;
                let q2 = checked(q.checked_add(2), n, "S_sigma")?;
                big_s_sigma[i] = checked(big_s_sigma[i].checked_mul(q2), n, "S_sigma")?;
                phi[i] *= q - 1;
            }
        }

        let s_little = sigma
            .iter()
            .zip(lo..=hi)
            .map(|(&s, n)| s - n)
            .collect();
        let big_s_s = big_s_sigma
            .iter()
            .zip(&sigma)
            .map(|(&ss, &s)| ss - s)
            .collect();

        Ok(ArithmeticTable {
            lo,
            hi,
            sigma,
            s_little,
            big_s_sigma,
            big_s_s,
            phi,
        })
    }

    /// Applies `f` to every segment of `[lo, hi]`, possibly in parallel;
    /// results come back in segment order.
    pub fn map_segments<T, F>(&self, lo: u64, hi: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&ArithmeticTable) -> T + Sync + Send,
    {
        self.check_range(lo, hi)?;
        self.segments(lo, hi)
            .into_par_iter()
            .map(|(a, b)| self.segment(a, b).map(|t| f(&t)))
            .collect()
    }

    /// One pass over `[1, last checkpoint]`, returning the accumulator state
    /// at every checkpoint. Checkpoints must be strictly increasing and at
    /// least 1. Segments are folded in parallel and reduced in order, so the
    /// result depends only on the segment width, never on the thread count.
    pub fn prefix_scan<A: Accumulator>(&self, checkpoints: &[u64], zero: &A) -> Result<Vec<A>> {
        let Some(&last) = checkpoints.last() else {
            return Ok(Vec::new());
        };
        if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "checkpoints must be positive and strictly increasing".into(),
            ));
        }
        let parts = self.map_segments(1, last, |t| {
            let mut acc = zero.clone();
            let mut snaps = Vec::new();
            let first = checkpoints.partition_point(|&c| c < t.lo());
            let mut next = checkpoints[first..].iter().copied().peekable();
            for n in t.lo()..=t.hi() {
                acc.push(t, n);
                if next.peek() == Some(&n) {
                    snaps.push(acc.clone());
                    next.next();
                }
            }
            (snaps, acc)
        })?;
        let mut running = zero.clone();
        let mut out = Vec::with_capacity(checkpoints.len());
        for (snaps, total) in parts {
            for s in snaps {
                let mut at = running.clone();
                at.merge(&s);
                out.push(at);
            }
            running.merge(&total);
        }
        Ok(out)
    }

    /// Materializes the whole of `[lo, hi]`.
    pub fn table(&self, lo: u64, hi: u64) -> Result<ArithmeticTable> {
        let parts = self.map_segments(lo, hi, Clone::clone)?;
        Ok(ArithmeticTable::concat(parts))
    }
}

/// State folded over consecutive `n` by [`DivisorSieve::prefix_scan`].
pub trait Accumulator: Clone + Send + Sync {
    /// Absorbs row `n` of `table`.
    fn push(&mut self, table: &ArithmeticTable, n: u64);
    /// Appends the contribution of a later, adjacent range.
    fn merge(&mut self, later: &Self);
}

fn checked(v: Option<u64>, n: u64, quantity: &'static str) -> Result<u64> {
    v.ok_or(Error::Overflow { n, quantity })
}

pub(crate) fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).is_none_or(|sq| sq > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

/// Exact σ, s, S_σ, S_s and φ for every n in `[lo, hi]`.
pub fn sieve_range(lo: u64, hi: u64) -> Result<ArithmeticTable> {
    if lo == 0 || lo > hi {
        return Err(Error::InvalidRange { lo, hi });
    }
    DivisorSieve::new(hi).table(lo, hi)
}
