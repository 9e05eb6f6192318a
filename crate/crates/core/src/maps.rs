//! Tent and quadratic interval maps.
//!
//! Everything here works in IEEE doubles. Comparisons against the critical
//! point use an absolute tolerance (see [`crate::DEFAULT_TOL`]).

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IlimError, Result};
use crate::DEFAULT_TOL;

/// A continuous unimodal map of a closed interval with one turning point.
pub trait Unimodal: Sync {
    /// Evaluates the map without checking the domain.
    fn apply(&self, x: f64) -> f64;

    /// Appends every preimage of `y` inside the closed domain to `out`.
    ///
    /// A preimage at the turning point is pushed once even though it is a
    /// double root.
    fn preimages_into(&self, y: f64, tol: f64, out: &mut Vec<f64>);

    fn critical_point(&self) -> f64;

    fn domain(&self) -> (f64, f64);

    fn iterate(&self, x: f64, n: usize) -> f64 {
        (0..n).fold(x, |y, _| self.apply(y))
    }
}

impl<M: Unimodal + ?Sized> Unimodal for &M {
    fn apply(&self, x: f64) -> f64 {
        (**self).apply(x)
    }
    fn preimages_into(&self, y: f64, tol: f64, out: &mut Vec<f64>) {
        (**self).preimages_into(y, tol, out)
    }
    fn critical_point(&self) -> f64 {
        (**self).critical_point()
    }
    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
}

/// The tent map `T_s(x) = min(sx, s(1-x))` on `[0, 1]`, critical point `1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TentMap {
    slope: f64,
}

/// The critical point of every tent map.
pub const TENT_CRITICAL: f64 = 0.5;

impl TentMap {
    pub fn new(slope: f64) -> Result<Self> {
        if !(slope > 1.0 && slope <= 2.0) {
            return Err(IlimError::Precondition(format!(
                "tent slope must lie in (1, 2], got {slope}"
            )));
        }
        Ok(Self { slope })
    }

    pub(crate) fn unchecked(slope: f64) -> Self {
        Self { slope }
    }

    /// Like [`TentMap::new`] but also rejects the renormalizable range `s <= sqrt 2`.
    pub fn non_renormalizable(slope: f64) -> Result<Self> {
        let map = Self::new(slope)?;
        if slope <= std::f64::consts::SQRT_2 {
            return Err(IlimError::Precondition(format!(
                "slope {slope} is renormalizable; need s in (sqrt 2, 2]"
            )));
        }
        Ok(map)
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// `c_1 = s/2`.
    pub fn c1(&self) -> f64 {
        self.slope / 2.0
    }

    /// `c_2 = s - s^2/2`.
    pub fn c2(&self) -> f64 {
        self.slope - self.slope * self.slope / 2.0
    }

    /// Checked evaluation on `[0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(-DEFAULT_TOL..=1.0 + DEFAULT_TOL).contains(&x) {
            return Err(IlimError::Domain(format!("tent map argument {x} outside [0, 1]")));
        }
        Ok(self.apply(x.clamp(0.0, 1.0)))
    }

    /// Preimages of `y`, ascending. Empty when `y > c_1`.
    pub fn preimages(&self, y: f64) -> Vec<Preimage> {
        let mut out = Vec::with_capacity(2);
        self.preimages_into(y, DEFAULT_TOL, &mut out);
        out.iter()
            .map(|&x| Preimage {
                x,
                multiplicity: if x == TENT_CRITICAL { 2 } else { 1 },
            })
            .collect()
    }

    /// The core `[c_2, c_1]`.
    pub fn core_interval(&self) -> Interval {
        Interval::new(self.c2(), self.c1())
    }

    /// This map viewed on `[0, c_1]`, the interval the inverse limit is built over.
    pub fn on_hull(&self) -> Restricted<TentMap> {
        Restricted::new(*self, 0.0, self.c1())
    }
}

impl Unimodal for TentMap {
    fn apply(&self, x: f64) -> f64 {
        (self.slope * x).min(self.slope * (1.0 - x))
    }

    fn preimages_into(&self, y: f64, tol: f64, out: &mut Vec<f64>) {
        let c1 = self.c1();
        if y > c1 + tol || y < -tol {
            return;
        }
        if (y - c1).abs() <= tol {
            out.push(TENT_CRITICAL);
            return;
        }
        let y = y.max(0.0);
        let left = y / self.slope;
        out.push(left);
        out.push(1.0 - left);
    }

    fn critical_point(&self) -> f64 {
        TENT_CRITICAL
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// One preimage together with its multiplicity as a root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preimage {
    pub x: f64,
    pub multiplicity: u8,
}

/// The quadratic map `q_a(x) = 1 - a x^2` on `[-1, 1]`, critical point `0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticMap {
    parameter: f64,
}

impl QuadraticMap {
    pub fn new(parameter: f64) -> Result<Self> {
        if !(parameter > 0.0 && parameter <= 2.0) {
            return Err(IlimError::Precondition(format!(
                "quadratic parameter must lie in (0, 2], got {parameter}"
            )));
        }
        Ok(Self { parameter })
    }

    pub fn parameter(&self) -> f64 {
        self.parameter
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(-1.0 - DEFAULT_TOL..=1.0 + DEFAULT_TOL).contains(&x) {
            return Err(IlimError::Domain(format!("quadratic map argument {x} outside [-1, 1]")));
        }
        Ok(self.apply(x.clamp(-1.0, 1.0)))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        -2.0 * self.parameter * x
    }

    /// The orientation-reversing fixed point in `(0, 1)`.
    pub fn interior_fixed_point(&self) -> f64 {
        let a = self.parameter;
        (-1.0 + (1.0 + 4.0 * a).sqrt()) / (2.0 * a)
    }

    /// The orientation-preserving fixed point `u = (-1 - sqrt(1 + 4a)) / 2a`.
    pub fn left_fixed_point(&self) -> f64 {
        let a = self.parameter;
        (-1.0 - (1.0 + 4.0 * a).sqrt()) / (2.0 * a)
    }
}

impl Unimodal for QuadraticMap {
    fn apply(&self, x: f64) -> f64 {
        1.0 - self.parameter * x * x
    }

    fn preimages_into(&self, y: f64, tol: f64, out: &mut Vec<f64>) {
        let radicand = (1.0 - y) / self.parameter;
        if radicand < -tol || radicand > 1.0 + tol {
            return;
        }
        if radicand <= tol {
            out.push(0.0);
            return;
        }
        let x = radicand.min(1.0).sqrt();
        out.push(-x);
        out.push(x);
    }

    fn critical_point(&self) -> f64 {
        0.0
    }

    fn domain(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
}

/// A map restricted to a forward-invariant subinterval of its domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Restricted<M> {
    pub map: M,
    pub lo: f64,
    pub hi: f64,
}

impl<M: Unimodal> Restricted<M> {
    pub fn new(map: M, lo: f64, hi: f64) -> Self {
        Self { map, lo, hi }
    }
}

impl<M: Unimodal> Unimodal for Restricted<M> {
    fn apply(&self, x: f64) -> f64 {
        self.map.apply(x)
    }

    fn preimages_into(&self, y: f64, tol: f64, out: &mut Vec<f64>) {
        let start = out.len();
        self.map.preimages_into(y, tol, out);
        let (lo, hi) = (self.lo, self.hi);
        let mut k = start;
        for i in start..out.len() {
            let x = out[i];
            if x >= lo - tol && x <= hi + tol {
                out[k] = x.clamp(lo, hi);
                k += 1;
            }
        }
        out.truncate(k);
    }

    fn critical_point(&self) -> f64 {
        self.map.critical_point()
    }

    fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

/// `[c_1, ..., c_n]`, the forward orbit of the critical point.
pub fn critical_orbit<M: Unimodal + ?Sized>(map: &M, n: usize) -> Vec<f64> {
    let mut x = map.critical_point();
    (0..n)
        .map(|_| {
            x = map.apply(x);
            x
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    L,
    C,
    R,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Symbol::L => "L",
            Symbol::C => "C",
            Symbol::R => "R",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence(pub Vec<Symbol>);

impl SymbolSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for SymbolSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

pub fn classify(x: f64, critical: f64, tol: f64) -> Symbol {
    if (x - critical).abs() <= tol {
        Symbol::C
    } else if x < critical {
        Symbol::L
    } else {
        Symbol::R
    }
}

/// Symbols of `x, f(x), ..., f^{n-1}(x)` relative to the critical point.
pub fn itinerary<M: Unimodal + ?Sized>(map: &M, x: f64, n: usize, tol: f64) -> SymbolSequence {
    let c = map.critical_point();
    let mut y = x;
    let mut symbols = Vec::with_capacity(n);
    for _ in 0..n {
        symbols.push(classify(y, c, tol));
        y = map.apply(y);
    }
    SymbolSequence(symbols)
}

/// Walks the backward preimage tree of the critical point level by level.
///
/// `visit(j, points)` receives the sorted points `x` of the closed domain
/// with `f^j(x) = c` for which `j` is minimal. A node equal to the critical
/// point below the root is dropped together with its subtree: every point
/// beneath it already appeared at a shallower level.
pub fn walk_critical_preimages<M, F>(
    map: &M,
    depth: usize,
    tol: f64,
    cap: usize,
    mut visit: F,
) -> Result<()>
where
    M: Unimodal + ?Sized,
    F: FnMut(usize, &[f64]),
{
    let c = map.critical_point();
    let mut frontier = vec![c];
    let mut visited = 1usize;
    visit(0, &frontier);
    for level in 1..=depth {
        let mut next = expand(map, &frontier, tol);
        next.retain(|&x| (x - c).abs() > tol);
        next.par_sort_unstable_by(f64::total_cmp);
        next.dedup();
        visited += next.len();
        if visited > cap {
            return Err(IlimError::ResourceCap {
                what: "critical preimage tree",
                cap,
            });
        }
        visit(level, &next);
        frontier = next;
    }
    Ok(())
}

fn expand<M: Unimodal + ?Sized>(map: &M, frontier: &[f64], tol: f64) -> Vec<f64> {
    const CHUNK: usize = 1 << 13;
    if frontier.len() <= CHUNK {
        let mut out = Vec::with_capacity(frontier.len() * 2);
        for &y in frontier {
            map.preimages_into(y, tol, &mut out);
        }
        return out;
    }
    frontier
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() * 2);
            for &y in chunk {
                map.preimages_into(y, tol, &mut out);
            }
            out
        })
        .collect::<Vec<_>>()
        .concat()
}

/// A point of the critical preimage tree tagged with its minimal depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedPoint {
    pub x: f64,
    /// Smallest `j` with `f^j(x) = c`.
    pub depth: usize,
}

/// All points `x` with `f^j(x) = c` for some `j <= depth`, sorted by position.
pub fn critical_preimages<M: Unimodal + ?Sized>(
    map: &M,
    depth: usize,
    tol: f64,
    cap: usize,
) -> Result<Vec<TaggedPoint>> {
    let mut points = Vec::new();
    walk_critical_preimages(map, depth, tol, cap, |j, level| {
        points.extend(level.iter().map(|&x| TaggedPoint { x, depth: j }));
    })?;
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.depth.cmp(&b.depth)));
    // The same position reached at two depths keeps the smaller one.
    points.dedup_by(|later, earlier| (later.x - earlier.x).abs() <= tol);
    Ok(points)
}
