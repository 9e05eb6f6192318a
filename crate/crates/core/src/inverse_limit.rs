//! Finite-depth points of the inverse limit `K_s = lim(T_s, [0, c_1])`.
//!
//! A [`BackwardPoint`] of depth `D` stores `(x_{-D}, ..., x_{-1}, x_0)`. The
//! shift appends `T_s(x_0)`, its inverse drops `x_0`, and both are exact.
//!
//! Folding patterns are computed on the arc `[0̄, s_n]` of the arc-component
//! of `0̄`. That arc is parametrized by its coordinate `t = x_{-(p+n)} ∈ [0, c]`
//! (injective on the arc); a point of the arc has `p`-level `l <= n` exactly
//! when `T^{n-l}(t) = c`, so its `p`-points are the critical preimages of
//! depth `<= n` lying in `[0, c]`.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{IlimError, Result};
use crate::maps::{critical_preimages, TentMap, Unimodal, TENT_CRITICAL};
use crate::{DEFAULT_NODE_CAP, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardPoint {
    slope: f64,
    /// `coords[0] = x_{-D}`, `coords[D] = x_0`.
    coords: Vec<f64>,
}

impl BackwardPoint {
    /// Builds a point from `(x_{-D}, ..., x_0)`. The backward-orbit relation
    /// is not checked here; see [`BackwardPoint::validate`].
    pub fn new(slope: f64, coords: Vec<f64>) -> Result<Self> {
        TentMap::new(slope)?;
        if coords.is_empty() {
            return Err(IlimError::Precondition("a point needs at least x_0".into()));
        }
        Ok(Self { slope, coords })
    }

    /// The fixed endpoint `0̄` truncated at `depth`.
    pub fn zero(slope: f64, depth: usize) -> Result<Self> {
        Self::new(slope, vec![0.0; depth + 1])
    }

    /// The point of the arc `[0̄, s_n]` (for `p`-levels) whose coordinate
    /// `x_{-(p+n)}` equals `t ∈ [0, c]`, stored to `depth >= p + n`.
    pub fn on_arc(slope: f64, p: usize, n: usize, t: f64, depth: usize) -> Result<Self> {
        let map = TentMap::new(slope)?;
        let anchor = p + n;
        if depth < anchor {
            return Err(IlimError::Depth {
                requested: anchor,
                available: depth,
            });
        }
        if !(-DEFAULT_TOL..=TENT_CRITICAL + DEFAULT_TOL).contains(&t) {
            return Err(IlimError::Domain(format!("arc parameter {t} outside [0, 1/2]")));
        }
        let mut coords = Vec::with_capacity(depth + 1);
        // x_{-depth}, ..., x_{-(anchor+1)} follow the left branch back to 0̄.
        for k in (1..=depth - anchor).rev() {
            coords.push(t / slope.powi(k as i32));
        }
        let mut x = t;
        coords.push(x);
        for _ in 0..anchor {
            x = map.apply(x);
            coords.push(x);
        }
        Ok(Self { slope, coords })
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn depth(&self) -> usize {
        self.coords.len() - 1
    }

    /// `(x_{-D}, ..., x_0)`.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// `π_k(x) = x_{-k}`.
    pub fn projection(&self, k: usize) -> Result<f64> {
        let d = self.depth();
        if k > d {
            return Err(IlimError::Depth {
                requested: k,
                available: d,
            });
        }
        Ok(self.coords[d - k])
    }

    /// Every `T_s(x_{-i-1}) = x_{-i}` holds within `tol` and every coordinate
    /// lies in `[0, c_1]`.
    pub fn validate(&self, tol: f64) -> bool {
        let map = match TentMap::new(self.slope) {
            Ok(m) => m,
            Err(_) => return false,
        };
        let c1 = map.c1();
        self.coords.iter().all(|&x| x >= -tol && x <= c1 + tol)
            && self
                .coords
                .windows(2)
                .all(|w| (map.apply(w[0]) - w[1]).abs() <= tol)
    }

    /// `σ(x) = (..., x_0, T_s(x_0))`; the depth grows by one.
    pub fn shift(&self) -> Self {
        let map = TentMap::unchecked(self.slope);
        let mut coords = Vec::with_capacity(self.coords.len() + 1);
        coords.extend_from_slice(&self.coords);
        coords.push(map.apply(self.coords[self.depth()]));
        Self {
            slope: self.slope,
            coords,
        }
    }

    /// `σ^{-1}`: drops `x_0`.
    pub fn unshift(&self) -> Result<Self> {
        if self.depth() == 0 {
            return Err(IlimError::Depth {
                requested: 1,
                available: 0,
            });
        }
        Ok(Self {
            slope: self.slope,
            coords: self.coords[..self.depth()].to_vec(),
        })
    }

    /// Keeps `x_{-depth}, ..., x_0`.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        let d = self.depth();
        if depth > d {
            return Err(IlimError::Depth {
                requested: depth,
                available: d,
            });
        }
        Ok(Self {
            slope: self.slope,
            coords: self.coords[d - depth..].to_vec(),
        })
    }

    fn is_zero(&self, tol: f64) -> bool {
        self.coords.iter().all(|x| x.abs() <= tol)
    }

    /// The `p`-level: smallest `l` with `|x_{-p-l} - c| <= tol`, `∞` for `0̄`,
    /// `None` when no stored coordinate at or below `p` is critical.
    pub fn p_level(&self, p: usize, tol: f64) -> Option<Level> {
        if self.is_zero(tol) {
            return Some(Level::Infinite);
        }
        let d = self.depth();
        (p..=d)
            .find(|&k| (self.coords[d - k] - TENT_CRITICAL).abs() <= tol)
            .map(|k| Level::Finite(k - p))
    }
}

/// `d(x, y) = Σ_{k=0}^{D} 2^{-k} |x_{-k} - y_{-k}|`.
///
/// Truncating at depth `D` under-estimates the distance in `K_s` by at most
/// `c_1 2^{-D}`.
pub fn metric(x: &BackwardPoint, y: &BackwardPoint) -> Result<f64> {
    if x.slope != y.slope {
        return Err(IlimError::Mismatch(format!(
            "slopes {} and {} differ",
            x.slope, y.slope
        )));
    }
    if x.depth() != y.depth() {
        return Err(IlimError::Mismatch(format!(
            "depths {} and {} differ; truncate to the shallower one",
            x.depth(),
            y.depth()
        )));
    }
    Ok(weighted_distance(&x.coords, &y.coords))
}

/// Metric on raw coordinate slices of equal length, `x_0` last.
pub(crate) fn weighted_distance(x: &[f64], y: &[f64]) -> f64 {
    let mut weight = 1.0;
    let mut sum = 0.0;
    for (a, b) in x.iter().rev().zip(y.iter().rev()) {
        sum += weight * (a - b).abs();
        weight *= 0.5;
    }
    sum
}

/// A `p`-level: a non-negative integer or `∞` (the endpoint `0̄`).
///
/// Serializes as an integer, with `∞` written as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Finite(l) => write!(f, "{l}"),
            Level::Infinite => f.write_str("∞"),
        }
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Level::Finite(l) => serializer.serialize_u64(*l as u64),
            Level::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct LevelVisitor;

        impl Visitor<'_> for LevelVisitor {
            type Value = Level;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or \"inf\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Level, E> {
                Ok(Level::Finite(v as usize))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Level, E> {
                usize::try_from(v)
                    .map(Level::Finite)
                    .map_err(|_| E::custom("negative level"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Level, E> {
                match v {
                    "inf" | "∞" => Ok(Level::Infinite),
                    _ => v
                        .parse()
                        .map(Level::Finite)
                        .map_err(|_| E::custom(format!("bad level {v:?}"))),
                }
            }
        }

        deserializer.deserialize_any(LevelVisitor)
    }
}

/// A `p`-point on the arc `[0̄, s_n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PPointRecord {
    /// Arc coordinate `t = x_{-(p+n)} ∈ [0, c]`.
    pub position: f64,
    /// `n - preimage_index`.
    pub level: Level,
    /// Smallest `j` with `T^j(t) = c`.
    pub preimage_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldingPattern(pub Vec<Level>);

impl FoldingPattern {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prefix(&self, count: usize) -> Self {
        Self(self.0[..count.min(self.0.len())].to_vec())
    }

    /// No two consecutive entries coincide.
    pub fn alternates(&self) -> bool {
        self.0.windows(2).all(|w| w[0] != w[1])
    }

    /// Parses a whitespace-separated pattern such as `"∞ 0 1 0 2"`.
    pub fn parse(text: &str) -> Option<Self> {
        text.split_whitespace()
            .map(|tok| match tok {
                "∞" | "inf" => Some(Level::Infinite),
                _ => tok.parse().ok().map(Level::Finite),
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }
}

impl fmt::Display for FoldingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// The `p`-points of `[0̄, s_n]` other than `0̄`, ordered along the arc.
pub fn arc_p_points(s: f64, n: usize, tol: f64, cap: usize) -> Result<Vec<PPointRecord>> {
    let map = TentMap::new(s)?;
    if n == 0 {
        return Err(IlimError::Precondition("arc index n must be at least 1".into()));
    }
    Ok(critical_preimages(&map, n, tol, cap)?
        .into_iter()
        .filter(|p| p.x <= TENT_CRITICAL + tol)
        .map(|p| PPointRecord {
            position: p.x,
            level: Level::Finite(n - p.depth),
            preimage_index: p.depth,
        })
        .collect())
}

/// Folding pattern of the arc from `0̄` to the `n`-th salient point.
pub fn arc_to_salient(s: f64, n: usize) -> Result<FoldingPattern> {
    let points = arc_p_points(s, n, DEFAULT_TOL, DEFAULT_NODE_CAP)?;
    let mut levels = Vec::with_capacity(points.len() + 1);
    levels.push(Level::Infinite);
    levels.extend(points.iter().map(|p| p.level));
    Ok(FoldingPattern(levels))
}

/// Deepest arc index tried while waiting for a prefix to stabilize.
const MAX_PREFIX_ARC: usize = 48;

/// The first `count` entries of the folding pattern of the arc-component of `0̄`.
///
/// Arcs `[0̄, s_n]` are computed for growing `n` until two successive ones
/// agree on the first `count` entries.
pub fn folding_pattern_prefix(s: f64, count: usize) -> Result<FoldingPattern> {
    if count == 0 {
        return Err(IlimError::Precondition("count must be at least 1".into()));
    }
    let mut previous: Option<FoldingPattern> = None;
    for n in 1..=MAX_PREFIX_ARC {
        let pattern = arc_to_salient(s, n)?;
        if pattern.len() >= count {
            let prefix = pattern.prefix(count);
            if previous.as_ref() == Some(&prefix) {
                return Ok(prefix);
            }
            previous = Some(prefix);
        }
    }
    Err(IlimError::Precondition(format!(
        "folding pattern prefix of length {count} did not stabilize by arc index {MAX_PREFIX_ARC}"
    )))
}

/// Arc positions of the salient points `s_1, ..., s_n` of `[0̄, s_n]`: the
/// successive points whose level exceeds every earlier level.
pub fn salient_positions(s: f64, n: usize) -> Result<Vec<f64>> {
    let points = arc_p_points(s, n, DEFAULT_TOL, DEFAULT_NODE_CAP)?;
    let mut best = 0usize;
    let mut positions = Vec::with_capacity(n);
    for p in &points {
        if let Level::Finite(l) = p.level {
            if l > best {
                best = l;
                positions.push(p.position);
            }
        }
    }
    Ok(positions)
}
