//! Chain covers of `[0, c_1]` and the induced chains of `K_s`.
//!
//! A chain at index `p` is a sorted breakpoint list `0 = b_0 < ... < b_n = c_1`.
//! Its links are `I^j = [b_j, b_{j+1})` (the last one closed) and the links of
//! the chain of `K_s` are `π_p^{-1}(I^j)`. Three properties hold by construction:
//!
//! 1. every point of `∪_{i<=p} T^{-i}(c) ∩ [0, c_1]` is a breakpoint;
//! 2. closed links meet iff their indices are adjacent;
//! 3. `T` maps each link at index `p + 1` into a single link at index `p`.
//!
//! Property 3 across independently built chains needs a common ladder: the
//! chain at index `p` is obtained by pulling back the breakpoints of the chain
//! at `p - 1` and then subdividing uniformly until the mesh target is met.
//! Mesh targets along the ladder are `eps_k = E 2^{-k}` with `E = eps 2^p`, so
//! `build_chain(s, p + 1, eps / 2)` extends the ladder of `build_chain(s, p, eps)`.

use serde::{Deserialize, Serialize};

use crate::error::{IlimError, Result};
use crate::inverse_limit::{BackwardPoint, Level};
use crate::maps::{critical_orbit, critical_preimages, Interval, TentMap, Unimodal, TENT_CRITICAL};
use crate::{DEFAULT_NODE_CAP, DEFAULT_TOL};

/// Snapping distance for [`IntervalChain::link_of_coordinate`].
pub const LINK_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalChain {
    pub slope: f64,
    pub p: usize,
    pub breakpoints: Vec<f64>,
    /// Longest link.
    pub mesh: f64,
}

impl IntervalChain {
    pub fn link_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn link(&self, j: usize) -> Interval {
        Interval::new(self.breakpoints[j], self.breakpoints[j + 1])
    }

    pub fn links(&self) -> impl Iterator<Item = Interval> + '_ {
        self.breakpoints.windows(2).map(|w| Interval::new(w[0], w[1]))
    }

    /// Index of the half-open link containing `t`; points at or beyond `c_1`
    /// belong to the last link and points at or below `0` to the first.
    /// Coordinates within [`LINK_SNAP`] of a breakpoint count as lying on it,
    /// so rounding in iterated coordinates does not flip the link.
    pub fn link_of_coordinate(&self, t: f64) -> usize {
        let last = self.link_count() - 1;
        let right_of = self.breakpoints.partition_point(|&b| b <= t + LINK_SNAP);
        right_of.saturating_sub(1).min(last)
    }

    /// Closed links `[b_i, b_{i+1}]` intersect iff `|i - j| <= 1`.
    pub fn is_chain(&self) -> bool {
        let links: Vec<Interval> = self.links().collect();
        if links.iter().any(|l| !(l.hi > l.lo)) {
            return false;
        }
        let mut order: Vec<usize> = (0..links.len()).collect();
        order.sort_by(|&a, &b| links[a].lo.total_cmp(&links[b].lo));
        for (pos, &i) in order.iter().enumerate() {
            let mut meets_next = i + 1 == links.len();
            for &j in &order[pos + 1..] {
                if links[j].lo > links[i].hi {
                    break;
                }
                if i.abs_diff(j) > 1 {
                    return false;
                }
                meets_next |= j == i + 1;
            }
            if !meets_next && links[i].hi < links[i + 1].lo {
                return false;
            }
        }
        true
    }

    /// Every point of `∪_{i<=p} T^{-i}(c) ∩ [0, c_1]` is a breakpoint (within `tol`).
    pub fn has_mandatory_breakpoints(&self, tol: f64) -> Result<bool> {
        let map = TentMap::new(self.slope)?;
        let mandatory = critical_preimages(&map.on_hull(), self.p, tol, DEFAULT_NODE_CAP)?;
        Ok(mandatory.iter().all(|m| self.has_breakpoint(m.x, tol)))
    }

    fn has_breakpoint(&self, x: f64, tol: f64) -> bool {
        let i = self.breakpoints.partition_point(|&b| b < x - tol);
        i < self.breakpoints.len() && (self.breakpoints[i] - x).abs() <= tol
    }

    /// Upper bound on the diameter in `K_s` of the links `π_p^{-1}(I^j)`:
    /// `mesh · Σ_{k<=p} s^{p-k} 2^{-k} + c_1 2^{-p}` (coordinates above `p`
    /// move at most `s^{p-k}` times the link width, those below it at most `c_1`).
    pub fn inverse_limit_mesh_bound(&self) -> f64 {
        let s = self.slope;
        let head: f64 = (0..=self.p)
            .map(|k| s.powi((self.p - k) as i32) * 0.5f64.powi(k as i32))
            .sum();
        self.mesh * head + (s / 2.0) * 0.5f64.powi(self.p as i32)
    }
}

fn subdivide(points: &[f64], target: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(points[0]);
    for w in points.windows(2) {
        let gap = w[1] - w[0];
        let pieces = (gap / target).floor() as usize + 1;
        for k in 1..pieces {
            out.push(w[0] + gap * k as f64 / pieces as f64);
        }
        out.push(w[1]);
    }
}

fn normalize(points: &mut Vec<f64>, tol: f64) {
    points.sort_by(f64::total_cmp);
    points.dedup_by(|later, earlier| (*later - *earlier).abs() <= tol);
}

/// The chain at index `p` with `mesh < eps s^{-p} / 2`.
pub fn build_chain(s: f64, p: usize, eps: f64) -> Result<IntervalChain> {
    build_chain_with(s, p, eps, DEFAULT_TOL, DEFAULT_NODE_CAP)
}

pub fn build_chain_with(
    s: f64,
    p: usize,
    eps: f64,
    tol: f64,
    cap: usize,
) -> Result<IntervalChain> {
    let map = TentMap::new(s)?;
    if !(eps > 0.0) {
        return Err(IlimError::Precondition("eps must be positive".into()));
    }
    let c1 = map.c1();
    let base = eps * 2f64.powi(p as i32);
    let target = |k: usize| base * 0.5f64.powi(k as i32) * s.powi(-(k as i32)) / 2.0;

    let mut points = vec![0.0, TENT_CRITICAL.min(c1), c1];
    normalize(&mut points, tol);
    let mut scratch = Vec::new();
    subdivide(&points, target(0), &mut scratch);
    std::mem::swap(&mut points, &mut scratch);

    let mut pre = Vec::with_capacity(2);
    for k in 1..=p {
        let mut next = vec![0.0, TENT_CRITICAL, c1];
        for &y in &points {
            pre.clear();
            map.preimages_into(y, tol, &mut pre);
            next.extend(pre.iter().copied().filter(|&x| x <= c1 + tol).map(|x| x.min(c1)));
        }
        normalize(&mut next, tol);
        subdivide(&next, target(k), &mut points);
        if points.len() > cap {
            return Err(IlimError::ResourceCap {
                what: "chain breakpoints",
                cap,
            });
        }
    }
    let mesh = points
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    Ok(IntervalChain {
        slope: s,
        p,
        breakpoints: points,
        mesh,
    })
}

/// Index of the link of the chain of `K_s` containing `x`, read from `π_p(x)`.
pub fn link_of(chain: &IntervalChain, x: &BackwardPoint) -> Result<usize> {
    if x.slope() != chain.slope {
        return Err(IlimError::Mismatch(format!(
            "point slope {} differs from chain slope {}",
            x.slope(),
            chain.slope
        )));
    }
    Ok(chain.link_of_coordinate(x.projection(chain.p)?))
}

/// `T_s` maps every link of `fine` into one closed link of `coarse`.
pub fn refines(fine: &IntervalChain, coarse: &IntervalChain) -> Result<bool> {
    refines_within(fine, coarse, DEFAULT_TOL)
}

pub fn refines_within(fine: &IntervalChain, coarse: &IntervalChain, tol: f64) -> Result<bool> {
    if fine.slope != coarse.slope {
        return Err(IlimError::Mismatch("chains of different slopes".into()));
    }
    if fine.p != coarse.p + 1 {
        return Err(IlimError::Precondition(format!(
            "refinement compares index p + 1 with p, got {} and {}",
            fine.p, coarse.p
        )));
    }
    let map = TentMap::new(fine.slope)?;
    Ok(fine.links().all(|link| {
        let (a, b) = (map.apply(link.lo), map.apply(link.hi));
        let image = if link.lo < TENT_CRITICAL && link.hi > TENT_CRITICAL {
            Interval::new(a.min(b), map.c1())
        } else {
            Interval::new(a.min(b), a.max(b))
        };
        // The closed coarse link holding the image's midpoint is the only candidate.
        let j = coarse.link_of_coordinate(0.5 * (image.lo + image.hi));
        let target = coarse.link(j);
        image.lo >= target.lo - tol && image.hi <= target.hi + tol
    }))
}

/// Outcome of checking that `σ^R` carries `q`-points of level `l` to
/// `p`-points of level `l + M` sitting in the link of the salient point `s_{l+M}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub slope: f64,
    pub q: usize,
    pub p: usize,
    pub r: usize,
    pub n: usize,
    /// `M = R + q - p`.
    pub m: usize,
    pub checked: usize,
    pub level_passed: usize,
    pub link_passed: usize,
    pub failures: Vec<AlignmentFailure>,
}

impl AlignmentReport {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.level_passed == self.checked && self.link_passed == self.checked
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentFailure {
    pub position: f64,
    pub q_level: usize,
    pub p_level: Option<Level>,
    pub link: usize,
    pub salient_link: usize,
}

/// Deepest coordinate the alignment check will build.
pub const MAX_ALIGNMENT_DEPTH: usize = 256;

/// Mesh parameter of the index-`p` chain used for link comparisons.
pub const ALIGNMENT_CHAIN_EPS: f64 = 0.5;

/// Checks, for `h = σ^R`, that every `q`-point `x'` of level `l <= n` on
/// `[0̄, s_n]` is sent to a `p`-point of level `l + M` whose `π_p` lies in
/// the same link of the index-`p` chain as the salient point `s_{l+M}`.
pub fn verify_plevel_alignment(
    s: f64,
    q: usize,
    p: usize,
    r: usize,
    n: usize,
) -> Result<AlignmentReport> {
    let map = TentMap::new(s)?;
    if q < p {
        return Err(IlimError::Precondition(format!("need q >= p, got q={q}, p={p}")));
    }
    if n == 0 {
        return Err(IlimError::Precondition("n must be at least 1".into()));
    }
    let m = r + q - p;
    let depth = q + n + 4;
    if depth + r > MAX_ALIGNMENT_DEPTH {
        return Err(IlimError::Depth {
            requested: depth + r,
            available: MAX_ALIGNMENT_DEPTH,
        });
    }
    let tol = 1e-9;
    let chain = build_chain(s, p, ALIGNMENT_CHAIN_EPS)?;
    let orbit = critical_orbit(&map, n + m + 1);
    let salient_projection = |level: usize| {
        if level == 0 {
            TENT_CRITICAL
        } else {
            orbit[level - 1]
        }
    };

    let mut report = AlignmentReport {
        slope: s,
        q,
        p,
        r,
        n,
        m,
        checked: 0,
        level_passed: 0,
        link_passed: 0,
        failures: Vec::new(),
    };
    for rec in crate::inverse_limit::arc_p_points(s, n, DEFAULT_TOL, DEFAULT_NODE_CAP)? {
        let Level::Finite(l) = rec.level else { continue };
        let mut image = BackwardPoint::on_arc(s, q, n, rec.position, depth)?;
        for _ in 0..r {
            image = image.shift();
        }
        let level = image.p_level(p, tol);
        let link = link_of(&chain, &image)?;
        let salient_link = chain.link_of_coordinate(salient_projection(l + m));
        report.checked += 1;
        let level_ok = level == Some(Level::Finite(l + m));
        let link_ok = link == salient_link;
        report.level_passed += usize::from(level_ok);
        report.link_passed += usize::from(link_ok);
        if !(level_ok && link_ok) {
            report.failures.push(AlignmentFailure {
                position: rec.position,
                q_level: l,
                p_level: level,
                link,
                salient_link,
            });
        }
    }
    Ok(report)
}
