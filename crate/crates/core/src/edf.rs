//! Empirical distribution function of `S_s(n)/n` over `n <= N`.

use crate::error::{Error, Result};
use crate::sieve::{ArithmeticTable, DivisorSieve};
use std::io::{self, Write};

/// Header of the grid export.
pub const GRID_CSV_HEADER: &str = "x,F_N";

/// Sorted sample of `S_s(n)/n`, `1 <= n <= N`, each ratio rounded once to
/// the nearest double.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfSample {
    limit: u64,
    values: Vec<f64>,
}

/// Densest open window of half-width `epsilon` over the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterReport {
    pub epsilon: f64,
    pub max_window_density: f64,
    pub argmax_center: f64,
}

fn ratio(s_s: u64, n: u64) -> f64 {
    // Both operands are exact in f64 below 2^53, so the quotient is the
    // correctly rounded ratio.
    debug_assert!(s_s < 1 << 53 && n < 1 << 53);
    s_s as f64 / n as f64
}

fn segment_ratios(t: &ArithmeticTable) -> Vec<f64> {
    t.big_s_s_values()
        .iter()
        .zip(t.lo()..)
        .map(|(&s, n)| ratio(s, n))
        .collect()
}

impl EdfSample {
    /// Sieves `[1, limit]` and sorts the ratios.
    pub fn build(limit: u64) -> Result<Self> {
        if limit == 0 {
            return Err(Error::InvalidArgument("EDF limit must be >= 1".into()));
        }
        let parts = DivisorSieve::new(limit).map_segments(1, limit, segment_ratios)?;
        Ok(Self::from_unsorted(limit, parts.concat()))
    }

    /// Uses an existing table; it must start at 1.
    pub fn from_table(table: &ArithmeticTable) -> Result<Self> {
        if table.lo() != 1 {
            return Err(Error::InvalidArgument(format!(
                "EDF needs a table starting at 1, got lo = {}",
                table.lo()
            )));
        }
        Ok(Self::from_unsorted(table.hi(), segment_ratios(table)))
    }

    fn from_unsorted(limit: u64, mut values: Vec<f64>) -> Self {
        values.sort_unstable_by(f64::total_cmp);
        Self { limit, values }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `F_N(x) = #{n <= N : S_s(n)/n <= x} / N`.
    pub fn edf_at(&self, x: f64) -> f64 {
        self.count_at_most(x) as f64 / self.limit as f64
    }

    pub fn count_at_most(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v <= x)
    }

    /// Largest fraction of the sample inside any open interval of width
    /// `2·epsilon`. A run `v_i..=v_j` fits in such an interval exactly when
    /// `v_j − v_i < 2·epsilon`, so the maximum is over all real centers, not
    /// only sample points.
    pub fn max_jump(&self, epsilon: f64) -> Result<ClusterReport> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let width = 2.0 * epsilon;
        let v = &self.values;
        let (mut best, mut best_center) = (0usize, f64::NAN);
        let mut end = 0;
        for start in 0..v.len() {
            if end < start {
                end = start;
            }
            while end < v.len() && v[end] - v[start] < width {
                end += 1;
            }
            let count = end - start;
            if count > best {
                best = count;
                best_center = 0.5 * (v[start] + v[end - 1]);
            }
        }
        Ok(ClusterReport {
            epsilon,
            max_window_density: best as f64 / self.limit as f64,
            argmax_center: best_center,
        })
    }

    pub fn write_grid_csv<W: Write>(&self, grid: &Grid, mut out: W) -> io::Result<()> {
        writeln!(out, "{GRID_CSV_HEADER}")?;
        for x in grid.points() {
            writeln!(out, "{x},{}", self.edf_at(x))?;
        }
        Ok(())
    }
}

/// Sup-norm distance between two empirical step functions, evaluated on
/// the merged breakpoint set.
pub fn kolmogorov_distance(a: &EdfSample, b: &EdfSample) -> f64 {
    let (va, vb) = (&a.values, &b.values);
    let (na, nb) = (a.limit as u128, b.limit as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0u128;
    while i < va.len() || j < vb.len() {
        let x = match (va.get(i), vb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < va.len() && va[i] <= x {
            i += 1;
        }
        while j < vb.len() && vb[j] <= x {
            j += 1;
        }
        best = best.max((i as u128 * nb).abs_diff(j as u128 * na));
    }
    best as f64 / (na * nb) as f64
}

/// Evaluation grid `lo:hi:step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as u64 + 1;
        (0..count).map(move |i| self.lo + i as f64 * self.step)
    }
}

impl std::str::FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<_> = s.split(':').collect();
        let bad = || Error::Parse(format!("grid must be lo:hi:step, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let grid = Grid {
            lo: nums[0],
            hi: nums[1],
            step: nums[2],
        };
        if !(grid.step > 0.0) || !(grid.hi >= grid.lo) || !grid.lo.is_finite() || !grid.hi.is_finite() {
            return Err(bad());
        }
        Ok(grid)
    }
}
