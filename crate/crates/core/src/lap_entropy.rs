//! Lap numbers and lap-growth entropy.
//!
//! `lap(f^n)` is one plus the number of interior points `x` with
//! `f^j(x) = c` for some `j < n`. Those points are enumerated exactly from
//! the backward preimage tree of the critical point, so a single walk of
//! depth `n_max - 1` yields the whole table `lap(f^1), ..., lap(f^{n_max})`.

use serde::{Deserialize, Serialize};

use crate::error::{IlimError, Result};
use crate::maps::{
    critical_orbit, critical_preimages, walk_critical_preimages, QuadraticMap, TentMap, Unimodal,
};
use crate::{DEFAULT_NODE_CAP, DEFAULT_TOL};

/// `counts[n - 1] = lap(f^n)` for `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LapTable {
    pub counts: Vec<u64>,
}

impl LapTable {
    pub fn n_max(&self) -> usize {
        self.counts.len()
    }

    /// `lap(f^n)`, `n >= 1`.
    pub fn lap(&self, n: usize) -> u64 {
        self.counts[n - 1]
    }

    /// First pair `(m, n)` with `lap(m + n) > lap(m) * lap(n)`, if any.
    pub fn submultiplicativity_violation(&self) -> Option<(usize, usize)> {
        let n_max = self.n_max();
        for m in 1..n_max {
            for n in 1..=(n_max - m) {
                let bound = (self.lap(m) as u128) * (self.lap(n) as u128);
                if (self.lap(m + n) as u128) > bound {
                    return Some((m, n));
                }
            }
        }
        None
    }
}

fn endpoint_tol(lo: f64, hi: f64) -> f64 {
    4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0)
}

/// Lap numbers of `f, f^2, ..., f^{n_max}`.
pub fn lap_table<M: Unimodal + ?Sized>(
    map: &M,
    n_max: usize,
    tol: f64,
    cap: usize,
) -> Result<LapTable> {
    if n_max == 0 {
        return Err(IlimError::Precondition("n_max must be at least 1".into()));
    }
    let (lo, hi) = map.domain();
    let etol = endpoint_tol(lo, hi);
    let mut counts = Vec::with_capacity(n_max);
    let mut turning = 0u64;
    walk_critical_preimages(map, n_max - 1, tol, cap, |_, level| {
        turning += level
            .iter()
            .filter(|&&x| x > lo + etol && x < hi - etol)
            .count() as u64;
        counts.push(1 + turning);
    })?;
    Ok(LapTable { counts })
}

/// `lap(f^n)` with the default tolerance and node cap.
pub fn lap_count<M: Unimodal + ?Sized>(map: &M, n: usize) -> Result<u64> {
    if n == 0 {
        return Err(IlimError::Precondition("lap_count needs n >= 1".into()));
    }
    Ok(lap_table(map, n, DEFAULT_TOL, DEFAULT_NODE_CAP)?.lap(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMethod {
    /// `(1/n) log lap(n)`.
    Slope,
    /// `log(lap(n) / lap(n - 1))`.
    Ratio,
    /// `log(lap(n) / lap(n/2)) / (n - n/2)`. Cancels the multiplicative
    /// constant and averages out period-2, 3, 4 and 6 oscillations of the
    /// ratio that renormalizable maps show.
    HalfWindow,
}

impl EntropyMethod {
    fn at(self, table: &LapTable, n: usize) -> f64 {
        let lap = |k: usize| table.lap(k) as f64;
        match self {
            EntropyMethod::Slope => lap(n).ln() / n as f64,
            EntropyMethod::Ratio => (lap(n) / lap(n - 1)).ln(),
            EntropyMethod::HalfWindow => {
                let half = n / 2;
                (lap(n) / lap(half)).ln() / (n - half) as f64
            }
        }
    }
}

/// Topological entropy (nats) estimated from lap growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub method: EntropyMethod,
    pub n_used: usize,
    /// Spread (max - min) of the estimates at `n_used`, `n_used - 1`, `n_used - 2`.
    pub residual: f64,
}

pub fn estimate_from_table(table: &LapTable, method: EntropyMethod) -> Result<EntropyEstimate> {
    let n_max = table.n_max();
    if n_max < 4 {
        return Err(IlimError::Precondition(format!(
            "entropy estimates need n_max >= 4, got {n_max}"
        )));
    }
    let recent: Vec<f64> = (n_max - 2..=n_max).map(|n| method.at(table, n)).collect();
    let hi = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = recent.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(EntropyEstimate {
        value: recent[2],
        method,
        n_used: n_max,
        residual: hi - lo,
    })
}

pub fn entropy_lap<M: Unimodal + ?Sized>(
    map: &M,
    n_max: usize,
    method: EntropyMethod,
) -> Result<EntropyEstimate> {
    entropy_lap_with(map, n_max, method, DEFAULT_TOL, DEFAULT_NODE_CAP)
}

pub fn entropy_lap_with<M: Unimodal + ?Sized>(
    map: &M,
    n_max: usize,
    method: EntropyMethod,
    tol: f64,
    cap: usize,
) -> Result<EntropyEstimate> {
    if n_max < 4 {
        return Err(IlimError::Precondition(format!(
            "entropy estimates need n_max >= 4, got {n_max}"
        )));
    }
    estimate_from_table(&lap_table(map, n_max, tol, cap)?, method)
}

/// Depth used for lap growth of quadratic maps.
pub const QUADRATIC_LAP_DEPTH: usize = 24;

/// Slope `s` of the tent map semiconjugate to `q_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub entropy: EntropyEstimate,
    /// Set when the entropy estimate fell below the cutoff and `slope` was
    /// reported as the sentinel `1`.
    pub zero_entropy: bool,
}

/// `s = exp(htop(q_a))` clamped to `[1, 2]`; entropy estimates below `tol`
/// are treated as zero entropy and reported as `s = 1`.
pub fn tent_slope_of_quadratic(a: f64, tol: f64) -> Result<SlopeEstimate> {
    tent_slope_of_quadratic_with(a, tol, QUADRATIC_LAP_DEPTH, DEFAULT_NODE_CAP)
}

pub fn tent_slope_of_quadratic_with(
    a: f64,
    tol: f64,
    n_max: usize,
    cap: usize,
) -> Result<SlopeEstimate> {
    if !(tol > 0.0) {
        return Err(IlimError::Precondition("tol must be positive".into()));
    }
    let q = QuadraticMap::new(a)?;
    let entropy = entropy_lap_with(&q, n_max, EntropyMethod::HalfWindow, DEFAULT_TOL, cap)?;
    let zero_entropy = entropy.value < tol;
    let slope = if zero_entropy {
        1.0
    } else {
        entropy.value.exp().clamp(1.0, 2.0)
    };
    Ok(SlopeEstimate {
        slope,
        entropy,
        zero_entropy,
    })
}

/// Number of maximal monotone pieces of `T_s^k` on `[0, c_1]` whose image
/// has length at least `2 delta`.
///
/// Image endpoints are read off the critical orbit: a turning point `x`
/// with `T^j(x) = c` satisfies `T^k(x) = c_{k-j}` exactly.
pub fn deep_branch_count(map: &TentMap, k: usize, delta: f64) -> Result<u64> {
    deep_branch_count_with(map, k, delta, DEFAULT_TOL, DEFAULT_NODE_CAP)
}

pub fn deep_branch_count_with(
    map: &TentMap,
    k: usize,
    delta: f64,
    tol: f64,
    cap: usize,
) -> Result<u64> {
    if !(delta >= 0.0) {
        return Err(IlimError::Precondition("delta must be non-negative".into()));
    }
    let c1 = map.c1();
    if k == 0 {
        return Ok(u64::from(c1 >= 2.0 * delta));
    }
    let hull = map.on_hull();
    let etol = endpoint_tol(0.0, c1);
    let orbit = critical_orbit(map, k + 1);
    let turning = critical_preimages(&hull, k - 1, tol, cap)?;

    let mut values = Vec::with_capacity(turning.len() + 2);
    values.push(0.0);
    values.extend(
        turning
            .iter()
            .filter(|p| p.x > etol && p.x < c1 - etol)
            .map(|p| orbit[k - p.depth - 1]),
    );
    values.push(orbit[k]);

    let threshold = 2.0 * delta;
    Ok(values
        .windows(2)
        .filter(|w| (w[1] - w[0]).abs() >= threshold)
        .count() as u64)
}
