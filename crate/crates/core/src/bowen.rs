//! Bowen `(n, eps)`-separated sets for powers of the shift on finite-depth
//! truncations of `K_s`, and the itinerary-coding upper bound.
//!
//! Orbit distances never materialize shifted points. For `σ` the truncated
//! metric satisfies `d(σx, σy) = |T x_0 - T y_0| + d(x, y) / 2`, so one forward
//! orbit of `x_0` per point is enough. `σ^{-1}` drops `x_0`, which is exact on
//! the stored coordinates as long as the depth covers the whole segment.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::build_chain;
use crate::error::{IlimError, Result};
use crate::inverse_limit::{weighted_distance, BackwardPoint};
use crate::maps::{TentMap, Unimodal};
use crate::DEFAULT_TOL;

/// Deepest cloud [`sample_points`] will build.
pub const MAX_CLOUD_DEPTH: usize = 30;

/// Seeds `x_0` on the core used by [`sample_points`].
pub const DEFAULT_SEEDS: usize = 8;

/// Upper limit on the number of points in one cloud.
pub const DEFAULT_CLOUD_CAP: usize = 4_000_000;

/// Points closer than `DEDUP_FRACTION · 2^{-D}` are treated as one.
pub const DEDUP_FRACTION: f64 = 1e-9;

/// `ε` values scanned by [`entropy_bowen`] when none are given.
pub const DEFAULT_EPS: [f64; 4] = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];

/// RMS residual (in `log count`) a window must stay below to count as linear.
pub const LINEAR_RESIDUAL: f64 = 0.02;

/// Shortest window accepted as a linear regime.
pub const MIN_WINDOW: usize = 4;

/// Finite stand-in for `K_s`: backward orbits of depth `D` in `[0, c_1]`,
/// sorted lexicographically by `(x_0, x_{-1}, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub slope: f64,
    pub depth: usize,
    pub points: Vec<BackwardPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// A cloud with the points at `indices` (kept in cloud order).
    pub fn subcloud(&self, indices: &[usize]) -> Self {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        Self {
            slope: self.slope,
            depth: self.depth,
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }
}

/// How a cloud is seeded and thinned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudConfig {
    /// Number of seeds `x_0 = c_2 + (k + 1/2)(c_1 - c_2) / seeds`.
    pub seeds: usize,
    /// Backward branches kept per seed at every level.
    pub per_branch_cap: usize,
    pub cloud_cap: usize,
}

impl CloudConfig {
    pub fn new(seeds: usize, per_branch_cap: usize) -> Self {
        Self {
            seeds,
            per_branch_cap,
            cloud_cap: DEFAULT_CLOUD_CAP,
        }
    }
}

/// Backward branch enumeration from [`DEFAULT_SEEDS`] seeds on `[c_2, c_1]`.
pub fn sample_points(s: f64, depth: usize, per_branch_cap: usize) -> Result<PointCloud> {
    sample_points_with(s, depth, CloudConfig::new(DEFAULT_SEEDS, per_branch_cap))
}

pub fn sample_points_with(s: f64, depth: usize, config: CloudConfig) -> Result<PointCloud> {
    let map = TentMap::new(s)?;
    if depth > MAX_CLOUD_DEPTH {
        return Err(IlimError::Precondition(format!(
            "cloud depth {depth} exceeds {MAX_CLOUD_DEPTH}"
        )));
    }
    if config.seeds == 0 || config.per_branch_cap == 0 {
        return Err(IlimError::Precondition(
            "seeds and per_branch_cap must be positive".into(),
        ));
    }
    let hull = map.on_hull();
    let (c1, c2) = (map.c1(), map.c2());
    let width = (c1 - c2) / config.seeds as f64;

    let per_seed: Vec<Vec<Vec<f64>>> = (0..config.seeds)
        .into_par_iter()
        .map(|k| {
            // Orbits are built x_0 first and reversed at the end.
            let mut frontier = vec![vec![c2 + (k as f64 + 0.5) * width]];
            let mut pre = Vec::with_capacity(2);
            for _ in 0..depth {
                let mut next = Vec::with_capacity(frontier.len() * 2);
                for orbit in &frontier {
                    pre.clear();
                    hull.preimages_into(*orbit.last().unwrap(), DEFAULT_TOL, &mut pre);
                    for &x in &pre {
                        let mut grown = orbit.clone();
                        grown.push(x);
                        next.push(grown);
                    }
                }
                frontier = thin(next, config.per_branch_cap);
            }
            frontier
        })
        .collect();

    let total: usize = per_seed.iter().map(Vec::len).sum();
    if total > config.cloud_cap {
        return Err(IlimError::ResourceCap {
            what: "cloud points",
            cap: config.cloud_cap,
        });
    }
    let mut orbits: Vec<Vec<f64>> = per_seed.into_iter().flatten().collect();
    orbits.par_sort_by(|a, b| lexicographic(a, b));

    // Distinct sibling branches can sit within 2^{-D} of each other (the
    // deepest coordinate has weight 2^{-D}), so only numerical duplicates,
    // closer than DEDUP_FRACTION 2^{-D}, are merged. They agree on x_0 to
    // within that distance; compare against the preceding run of such points.
    let resolution = DEDUP_FRACTION * 0.5f64.powi(depth as i32);
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(orbits.len());
    for orbit in orbits {
        let duplicate = kept
            .iter()
            .rev()
            .take_while(|k| orbit[0] - k[0] < resolution)
            .any(|k| forward_distance(k, &orbit) < resolution);
        if !duplicate {
            kept.push(orbit);
        }
    }
    let points = kept
        .into_iter()
        .map(|mut o| {
            o.reverse();
            BackwardPoint::new(s, o)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloud {
        slope: s,
        depth,
        points,
    })
}

fn thin<T>(items: Vec<T>, cap: usize) -> Vec<T> {
    if items.len() <= cap {
        return items;
    }
    let len = items.len();
    let mut picks = (0..cap).map(|i| i * len / cap).peekable();
    items
        .into_iter()
        .enumerate()
        .filter_map(|(i, item)| {
            if picks.peek() == Some(&i) {
                picks.next();
                Some(item)
            } else {
                None
            }
        })
        .collect()
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Metric on orbits stored `x_0` first.
fn forward_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut weight = 1.0;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        sum += weight * (x - y).abs();
        weight *= 0.5;
    }
    sum
}

/// Per-point data for one `(R, n)` query.
struct Segments<'a> {
    cloud: &'a PointCloud,
    r: i64,
    n: usize,
    /// Forward: `T^j x_0` for `j = 0..=R(n-1)`, row-major. Unused backwards.
    forward: Vec<f64>,
    stride: usize,
}

impl<'a> Segments<'a> {
    fn new(cloud: &'a PointCloud, r: i64, n: usize) -> Result<Self> {
        let steps = r.unsigned_abs() as usize * (n - 1);
        if r < 0 && steps > cloud.depth {
            return Err(IlimError::Depth {
                requested: steps,
                available: cloud.depth,
            });
        }
        let (forward, stride) = if r > 0 {
            let map = TentMap::new(cloud.slope)?;
            let stride = steps + 1;
            let mut forward = Vec::with_capacity(cloud.len() * stride);
            for p in &cloud.points {
                let mut x = p.coords()[cloud.depth];
                forward.push(x);
                for _ in 0..steps {
                    x = map.apply(x);
                    forward.push(x);
                }
            }
            (forward, stride)
        } else {
            (Vec::new(), 0)
        };
        Ok(Self {
            cloud,
            r,
            n,
            forward,
            stride,
        })
    }

    /// Coordinates used for bucketing: `x_0` and the last-time coordinate
    /// of weight one. Both differ by at most `eps` for unseparated pairs.
    fn key_coords(&self, i: usize) -> (f64, f64) {
        let coords = self.cloud.points[i].coords();
        let d = self.cloud.depth;
        let steps = self.r.unsigned_abs() as usize * (self.n - 1);
        let last = match self.r.signum() {
            1 => self.forward[i * self.stride + steps],
            -1 => coords[d - steps],
            _ => coords[d],
        };
        (coords[d], last)
    }

    /// Some `k < n` has `d(h^k x, h^k y) > eps`, `h = σ^R`.
    fn separated(&self, i: usize, j: usize, eps: f64) -> bool {
        let (a, b) = (self.cloud.points[i].coords(), self.cloud.points[j].coords());
        let mut dist = weighted_distance(a, b);
        if dist > eps {
            return true;
        }
        let step = self.r.unsigned_abs() as usize;
        if step == 0 {
            return false;
        }
        let d = self.cloud.depth;
        if self.r > 0 {
            let (fa, fb) = (
                &self.forward[i * self.stride..(i + 1) * self.stride],
                &self.forward[j * self.stride..(j + 1) * self.stride],
            );
            for t in 1..self.stride {
                dist = (fa[t] - fb[t]).abs() + 0.5 * dist;
                if t % step == 0 && dist > eps {
                    return true;
                }
            }
            false
        } else {
            (1..self.n).any(|k| {
                let keep = d - k * step + 1;
                weighted_distance(&a[..keep], &b[..keep]) > eps
            })
        }
    }
}

/// Greedy maximal `(n, eps)`-separated subset for `h = σ^R` (negative `R`
/// runs `σ^{-|R|}`), scanning the cloud in its lexicographic order.
/// The count is a lower bound for the maximal separated cardinality.
pub fn separated_count(cloud: &PointCloud, r: i64, n: usize, eps: f64) -> Result<usize> {
    Ok(separated_set(cloud, r, n, eps)?.len())
}

/// Indices of the greedy separated set.
pub fn separated_set(cloud: &PointCloud, r: i64, n: usize, eps: f64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(IlimError::Precondition("n must be at least 1".into()));
    }
    if !(eps > 0.0) {
        return Err(IlimError::Precondition("eps must be positive".into()));
    }
    let seg = Segments::new(cloud, r, n)?;
    let cell = |v: f64| (v / eps).floor() as i64;
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut kept = Vec::new();
    for i in 0..cloud.len() {
        let (u, v) = seg.key_coords(i);
        let (cu, cv) = (cell(u), cell(v));
        let clash = (cu - 1..=cu + 1).any(|a| {
            (cv - 1..=cv + 1).any(|b| {
                buckets
                    .get(&(a, b))
                    .is_some_and(|ks| ks.iter().any(|&j| !seg.separated(i, j, eps)))
            })
        });
        if !clash {
            buckets.entry((cu, cv)).or_default().push(i);
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Separated counts over `n = 1..=n_max` at one `eps`, with the fitted slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCurve {
    pub eps: f64,
    /// `(n, count)` for `n = 1..=n_max`.
    pub counts: Vec<(usize, usize)>,
    /// Slope of `log count` against `n` over `window`.
    pub estimate: f64,
    /// Inclusive range of `n` used in the fit.
    pub window: (usize, usize),
    /// RMS residual of the fit.
    pub residual: f64,
    /// A window of at least [`MIN_WINDOW`] points met [`LINEAR_RESIDUAL`].
    pub linear: bool,
}

impl SeparationCurve {
    /// Rows `eps, n, count, log_count`.
    pub fn csv_rows(&self) -> Vec<(f64, usize, usize, f64)> {
        self.counts
            .iter()
            .map(|&(n, c)| (self.eps, n, c, (c as f64).ln()))
            .collect()
    }
}

pub fn separation_curve(cloud: &PointCloud, r: i64, eps: f64, n_max: usize) -> Result<SeparationCurve> {
    if n_max < MIN_WINDOW {
        return Err(IlimError::Precondition(format!(
            "n_max must be at least {MIN_WINDOW}, got {n_max}"
        )));
    }
    let counts = (1..=n_max)
        .into_par_iter()
        .map(|n| separated_count(cloud, r, n, eps).map(|c| (n, c)))
        .collect::<Result<Vec<_>>>()?;
    let (estimate, window, residual, linear) = fit_linear_regime(&counts, cloud.len());
    Ok(SeparationCurve {
        eps,
        counts,
        estimate,
        window,
        residual,
        linear,
    })
}

/// Least-squares slope of `log count - log count_first` against `n` over the
/// longest window whose RMS residual is below [`LINEAR_RESIDUAL`]; ties go to
/// the smaller residual. Counts above half the cloud are saturated and left
/// out. Without a linear window the whole unsaturated range is fitted.
fn fit_linear_regime(counts: &[(usize, usize)], cloud_size: usize) -> (f64, (usize, usize), f64, bool) {
    let unsaturated = counts
        .iter()
        .position(|&(_, c)| 2 * c > cloud_size)
        .unwrap_or(counts.len())
        .max(2.min(counts.len()));
    let counts = &counts[..unsaturated];
    let base = (counts[0].1 as f64).ln();
    let pts: Vec<(f64, f64)> = counts
        .iter()
        .map(|&(n, c)| (n as f64, (c as f64).ln() - base))
        .collect();
    let mut best: Option<(usize, f64, f64, (usize, usize))> = None;
    for a in 0..pts.len() {
        for b in a + MIN_WINDOW - 1..pts.len() {
            let (slope, rms) = least_squares(&pts[a..=b]);
            if rms >= LINEAR_RESIDUAL {
                continue;
            }
            let len = b - a + 1;
            let better = match best {
                None => true,
                Some((l, _, r, _)) => len > l || (len == l && rms < r),
            };
            if better {
                best = Some((len, slope, rms, (counts[a].0, counts[b].0)));
            }
        }
    }
    match best {
        Some((_, slope, rms, window)) => (slope, window, rms, true),
        None => {
            let (slope, rms) = least_squares(&pts);
            (slope, (counts[0].0, counts[counts.len() - 1].0), rms, false)
        }
    }
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    (slope, (sse / k).sqrt())
}

/// Bowen entropy estimate: the largest fitted slope over the `eps` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowenEstimate {
    pub value: f64,
    /// `eps` whose curve gave `value`.
    pub eps: f64,
    pub cloud_size: usize,
    pub curves: Vec<SeparationCurve>,
    pub warnings: Vec<String>,
}

/// Cloud used by [`entropy_bowen`] for `R >= 0`. Forward separation comes
/// from `T`-orbits of `x_0`, so seeds are dense and branches few. Seeds closer
/// than `2^{-D}` collapse under deduplication.
pub const BOWEN_CLOUD: CloudConfig = CloudConfig {
    seeds: 1 << 12,
    per_branch_cap: 4,
    cloud_cap: DEFAULT_CLOUD_CAP,
};

/// Cloud used by [`entropy_bowen`] for `R < 0`: separation under `σ^{-1}`
/// comes from backward branching, so seeds are few and branches many.
pub const BOWEN_CLOUD_INVERSE: CloudConfig = CloudConfig {
    seeds: 16,
    per_branch_cap: 2048,
    cloud_cap: DEFAULT_CLOUD_CAP,
};

pub fn entropy_bowen(
    s: f64,
    r: i64,
    depth: usize,
    eps_list: &[f64],
    n_max: usize,
) -> Result<BowenEstimate> {
    let config = if r < 0 { BOWEN_CLOUD_INVERSE } else { BOWEN_CLOUD };
    let cloud = sample_points_with(s, depth, config)?;
    entropy_bowen_on(&cloud, r, eps_list, n_max)
}

pub fn entropy_bowen_on(
    cloud: &PointCloud,
    r: i64,
    eps_list: &[f64],
    n_max: usize,
) -> Result<BowenEstimate> {
    let eps_list = if eps_list.is_empty() {
        &DEFAULT_EPS[..]
    } else {
        eps_list
    };
    let mut warnings = Vec::new();
    let needed = n_max * r.unsigned_abs() as usize + 8;
    if r > 0 && cloud.depth < needed {
        warnings.push(format!(
            "depth {} below n_max·R + 8 = {needed}; truncation may blur separation",
            cloud.depth
        ));
    }
    let curves = eps_list
        .par_iter()
        .map(|&eps| separation_curve(cloud, r, eps, n_max))
        .collect::<Result<Vec<_>>>()?;
    for c in curves.iter().filter(|c| !c.linear) {
        warnings.push(format!(
            "no linear regime of length >= {MIN_WINDOW} at eps = {}",
            c.eps
        ));
    }
    let best = curves
        .iter()
        .max_by(|a, b| a.estimate.total_cmp(&b.estimate))
        .expect("eps list is non-empty");
    Ok(BowenEstimate {
        value: best.estimate,
        eps: best.eps,
        cloud_size: cloud.len(),
        curves: curves.clone(),
        warnings,
    })
}

/// Number of distinct block itineraries of `σ^{Rm}`-orbits of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItineraryBound {
    pub count: usize,
    /// Chain index of the fine chain.
    pub q: usize,
    /// Number of blocks of the partition (`N'`).
    pub blocks: usize,
    /// Blocks visited at time 0.
    pub occupied: usize,
}

/// Codes each cloud point by the blocks visited by `π_q(σ^{Rmk} x)`, `k < n`.
///
/// Blocks are unions of consecutive half-open links of a fine chain at index
/// `q`, grown while their diameter bound in `K_s` stays at most `2 eps0`, so
/// points that are `(n, 2 eps0)`-separated for `σ^{Rm}` get distinct codes.
pub fn itinerary_upper_bound(
    cloud: &PointCloud,
    r: usize,
    m: usize,
    eps0: f64,
    n: usize,
) -> Result<ItineraryBound> {
    if n == 0 || m == 0 {
        return Err(IlimError::Precondition("n and m must be at least 1".into()));
    }
    if !(eps0 > 0.0) {
        return Err(IlimError::Precondition("eps0 must be positive".into()));
    }
    let s = cloud.slope;
    let map = TentMap::new(s)?;
    let c1 = map.c1();
    let q = (0..=cloud.depth)
        .find(|&q| c1 * 0.5f64.powi(q as i32) <= eps0 / 2.0)
        .ok_or_else(|| {
            IlimError::Precondition(format!(
                "eps0 = {eps0} needs a chain deeper than the cloud depth {}",
                cloud.depth
            ))
        })?;
    let head: f64 = (0..=q)
        .map(|k| s.powi((q - k) as i32) * 0.5f64.powi(k as i32))
        .sum();
    let tail = c1 * 0.5f64.powi(q as i32);
    let limit = 2.0 * eps0 * (1.0 - 1e-9);
    // Links of width < eps0 / (2 head), so each block holds at least one.
    let chain = build_chain(s, q, eps0 * s.powi(q as i32) / head)?;
    let mut block_of_link = Vec::with_capacity(chain.link_count());
    let (mut block, mut start) = (0usize, chain.breakpoints[0]);
    for j in 0..chain.link_count() {
        let end = chain.breakpoints[j + 1];
        if (end - start) * head + tail > limit {
            if j == 0 || (end - chain.breakpoints[j]) * head + tail > limit {
                return Err(IlimError::Precondition(format!(
                    "link {j} alone exceeds the block diameter 2·eps0"
                )));
            }
            block += 1;
            start = chain.breakpoints[j];
        }
        block_of_link.push(block as u32);
    }

    let step = r * m;
    let d = cloud.depth;
    let codes: Vec<Vec<u32>> = cloud
        .points
        .par_iter()
        .map(|p| {
            let coords = p.coords();
            let mut extended = coords.to_vec();
            let mut x = coords[d];
            for _ in 0..step * (n - 1) {
                x = map.apply(x);
                extended.push(x);
            }
            (0..n)
                .map(|k| block_of_link[chain.link_of_coordinate(extended[d + step * k - q])])
                .collect()
        })
        .collect();
    let occupied = codes.iter().map(|c| c[0]).collect::<HashSet<_>>().len();
    let count = codes.into_iter().collect::<HashSet<_>>().len();
    Ok(ItineraryBound {
        count,
        q,
        blocks: block + 1,
        occupied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse_limit::metric;

    fn small_cloud() -> PointCloud {
        sample_points_with(2.0, 8, CloudConfig::new(64, 8)).unwrap()
    }

    /// Counts backward branches inside `[0, c_1]` by plain recursion.
    fn recount(s: f64, y: f64, depth: usize) -> usize {
        if depth == 0 {
            return 1;
        }
        [y / s, 1.0 - y / s]
            .into_iter()
            .filter(|&x| x <= s / 2.0 + 1e-12)
            .map(|x| recount(s, x, depth - 1))
            .sum()
    }

    #[test]
    fn full_tent_cloud_is_a_binary_tree() {
        let cloud = sample_points(2.0, 3, 1 << 10).unwrap();
        assert_eq!(cloud.len(), DEFAULT_SEEDS * 8);
        assert!(cloud.points.iter().all(|p| p.validate(1e-12)));
    }

    #[test]
    fn cloud_size_matches_recount() {
        let s = 1.8;
        let cloud = sample_points(s, 10, 1 << 12).unwrap();
        let (c1, c2) = (s / 2.0, s - s * s / 2.0);
        let expected: usize = (0..DEFAULT_SEEDS)
            .map(|k| recount(s, c2 + (k as f64 + 0.5) * (c1 - c2) / DEFAULT_SEEDS as f64, 10))
            .sum();
        assert_eq!(cloud.len(), expected);
        assert_eq!(cloud, sample_points(s, 10, 1 << 12).unwrap());
        assert!(cloud.points.iter().all(|p| p.validate(1e-12)));
    }

    #[test]
    fn cloud_thinning_and_dedup() {
        let cloud = sample_points(1.7, 9, 5).unwrap();
        assert!(cloud.len() <= DEFAULT_SEEDS * 5);
        let dense = sample_points_with(2.0, 6, CloudConfig::new(256, 4)).unwrap();
        let tol = DEDUP_FRACTION * 0.5f64.powi(6);
        for (i, a) in dense.points.iter().enumerate() {
            for b in &dense.points[i + 1..] {
                assert!(metric(a, b).unwrap() >= tol);
            }
        }
        assert_eq!(dense.len(), 256 * 4);
        assert!(sample_points(2.0, 31, 4).is_err());
        let capped = CloudConfig {
            cloud_cap: 10,
            ..CloudConfig::new(8, 8)
        };
        assert!(matches!(
            sample_points_with(2.0, 4, capped),
            Err(IlimError::ResourceCap { .. })
        ));
    }

    #[test]
    fn separated_count_examples() {
        let cloud = small_cloud();
        assert_eq!(separated_count(&cloud, 1, 1, 10.0).unwrap(), 1);
        let base = separated_count(&cloud, 0, 1, 0.05).unwrap();
        for n in 2..6 {
            assert_eq!(separated_count(&cloud, 0, n, 0.05).unwrap(), base);
        }
        assert!(separated_count(&cloud, 1, 0, 0.05).is_err());
        assert!(separated_count(&cloud, 1, 2, 0.0).is_err());
        assert!(matches!(
            separated_count(&cloud, -1, 10, 0.05),
            Err(IlimError::Depth { .. })
        ));
    }

    #[test]
    fn separated_count_is_monotone() {
        let cloud = small_cloud();
        for r in [1, 2, -1] {
            let epss = [0.2, 0.1, 0.05, 0.025];
            for n in 1..=5 {
                let counts: Vec<usize> = epss
                    .iter()
                    .map(|&e| separated_count(&cloud, r, n, e).unwrap())
                    .collect();
                assert!(counts.windows(2).all(|w| w[0] <= w[1]), "r={r} n={n} {counts:?}");
            }
            for &e in &epss {
                let counts: Vec<usize> = (1..=5)
                    .map(|n| separated_count(&cloud, r, n, e).unwrap())
                    .collect();
                assert!(counts.windows(2).all(|w| w[0] <= w[1]), "r={r} eps={e} {counts:?}");
            }
        }
    }

    /// Greedy output is separated when checked with explicit shifts.
    #[test]
    fn greedy_set_is_separated() {
        let cloud = small_cloud();
        let (r, n, eps) = (1, 4, 0.05);
        let kept = separated_set(&cloud, r, n, eps).unwrap();
        let orbits: Vec<Vec<BackwardPoint>> = kept
            .iter()
            .map(|&i| {
                let mut x = cloud.points[i].clone();
                let mut out = vec![x.clone()];
                for _ in 1..n {
                    x = x.shift();
                    out.push(x.clone());
                }
                out
            })
            .collect();
        for a in 0..orbits.len() {
            for b in a + 1..orbits.len() {
                assert!((0..n).any(|k| metric(&orbits[a][k], &orbits[b][k]).unwrap() > eps));
            }
        }
    }

    type Bits = [u64; 4];

    fn bit(set: &Bits, v: usize) -> bool {
        set[v / 64] >> (v % 64) & 1 == 1
    }

    fn members(set: &Bits) -> Vec<usize> {
        (0..256).filter(|&v| bit(set, v)).collect()
    }

    /// Largest clique of the "separated" graph (a maximum separated set),
    /// by branch and bound with greedy-colouring bounds, given a known clique
    /// size `lower` to prune against.
    fn maximum_clique(adj: &[Bits], lower: usize) -> usize {
        fn expand(adj: &[Bits], size: usize, mut cand: Bits, best: &mut usize) {
            // Colour classes give an upper bound on the clique within `cand`.
            let mut order = Vec::new();
            let mut uncoloured = cand;
            let mut colour = 0;
            while uncoloured.iter().any(|&w| w != 0) {
                colour += 1;
                let mut avail = uncoloured;
                while let Some(v) = members(&avail).first().copied() {
                    order.push((v, colour));
                    uncoloured[v / 64] &= !(1 << (v % 64));
                    avail[v / 64] &= !(1 << (v % 64));
                    for k in 0..4 {
                        avail[k] &= !adj[v][k];
                    }
                }
            }
            for &(v, c) in order.iter().rev() {
                if size + c <= *best {
                    return;
                }
                let mut next = cand;
                for k in 0..4 {
                    next[k] &= adj[v][k];
                }
                if next.iter().all(|&w| w == 0) {
                    *best = (*best).max(size + 1);
                } else {
                    expand(adj, size + 1, next, best);
                }
                cand[v / 64] &= !(1 << (v % 64));
            }
        }
        let mut all = [0u64; 4];
        for v in 0..adj.len() {
            all[v / 64] |= 1 << (v % 64);
        }
        let mut best = lower;
        expand(adj, 0, all, &mut best);
        best
    }

    #[test]
    fn greedy_against_exact_maximum() {
        use rand::seq::index::sample;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        let full = sample_points_with(2.0, 8, CloudConfig::new(64, 16)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cloud = full.subcloud(&sample(&mut rng, full.len(), 200).into_vec());
        assert_eq!(cloud.len(), 200);
        for (r, n, eps) in [(1i64, 2usize, 0.4), (1, 3, 0.5), (2, 2, 0.6), (0, 1, 0.3), (-1, 3, 0.5)] {
            let step = |x: &BackwardPoint| -> BackwardPoint {
                let mut y = x.clone();
                for _ in 0..r.unsigned_abs() {
                    y = if r > 0 { y.shift() } else { y.unshift().unwrap() };
                }
                y
            };
            let orbits: Vec<Vec<BackwardPoint>> = cloud
                .points
                .iter()
                .map(|p| {
                    let mut out = vec![p.clone()];
                    for k in 1..n {
                        out.push(step(&out[k - 1]));
                    }
                    out
                })
                .collect();
            let adj: Vec<Bits> = (0..200)
                .map(|a| {
                    let mut row = [0u64; 4];
                    for b in (0..200).filter(|&b| b != a) {
                        if (0..n).any(|k| metric(&orbits[a][k], &orbits[b][k]).unwrap() > eps) {
                            row[b / 64] |= 1 << (b % 64);
                        }
                    }
                    row
                })
                .collect();
            let kept = separated_set(&cloud, r, n, eps).unwrap();
            for (i, &a) in kept.iter().enumerate() {
                assert!(kept[i + 1..].iter().all(|&b| bit(&adj[a], b)));
            }
            let greedy = kept.len();
            let exact = maximum_clique(&adj, greedy);
            assert!(
                greedy <= exact && 2 * greedy >= exact,
                "r={r} n={n} eps={eps}: {greedy} vs {exact}"
            );
            assert!(exact < 200, "r={r} n={n} eps={eps}: no conflicts");
        }
    }

    #[test]
    fn fit_prefers_long_linear_windows() {
        let counts: Vec<(usize, usize)> = (1..=8).map(|n| (n, 10 << n)).collect();
        let (slope, window, _, linear) = fit_linear_regime(&counts, usize::MAX);
        assert!(linear && window == (1, 8));
        assert!((slope - std::f64::consts::LN_2).abs() < 1e-12);

        // Saturated tail is ignored.
        let mut counts: Vec<(usize, usize)> = (1..=6).map(|n| (n, 10 << n)).collect();
        counts.extend((7..=10).map(|n| (n, 1000)));
        let (slope, window, _, _) = fit_linear_regime(&counts, 1000);
        assert_eq!(window, (1, 5));
        assert!((slope - std::f64::consts::LN_2).abs() < 1e-12);

        let flat: Vec<(usize, usize)> = (1..=6).map(|n| (n, 37)).collect();
        assert_eq!(fit_linear_regime(&flat, 100).0, 0.0);
    }

    #[test]
    fn identity_has_zero_entropy() {
        let est = entropy_bowen(2.0, 0, 8, &[], 6).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.curves.len(), DEFAULT_EPS.len());
    }

    #[test]
    fn forward_and_inverse_directions_agree() {
        let forward = entropy_bowen(2.0, 1, 16, &DEFAULT_EPS, 6).unwrap();
        let inverse = entropy_bowen(2.0, -1, 16, &DEFAULT_EPS, 6).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((forward.value - ln2).abs() < 0.1, "{}", forward.value);
        assert!(
            (forward.value - inverse.value).abs() < 0.1 * forward.value,
            "{} vs {}",
            forward.value,
            inverse.value
        );
    }

    #[test]
    fn separation_rows_for_csv() {
        let curve = separation_curve(&small_cloud(), 1, 0.1, 4).unwrap();
        let rows = curve.csv_rows();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].1, 1);
        assert!((rows[2].3 - (rows[2].2 as f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn itinerary_bound_examples() {
        let cloud = sample_points_with(2.0, 12, BOWEN_CLOUD).unwrap();
        let one = itinerary_upper_bound(&cloud, 1, 1, 1.0 / 32.0, 1).unwrap();
        assert_eq!(one.count, one.occupied);
        assert!(one.count <= one.blocks);

        // Growth of code counts over n <= 6, before the cloud saturates.
        let counts: Vec<f64> = (1..=6)
            .map(|n| itinerary_upper_bound(&cloud, 1, 1, 1.0 / 32.0, n).unwrap().count as f64)
            .collect();
        let rate = (counts[5] / counts[0]).ln() / 5.0;
        let ln2 = std::f64::consts::LN_2;
        assert!(rate >= ln2 - 0.1 && rate <= 2.0 * ln2 + 0.1, "{rate}");

        assert!(itinerary_upper_bound(&cloud, 1, 1, 0.0, 3).is_err());
        let shallow = sample_points(2.0, 3, 8).unwrap();
        assert!(itinerary_upper_bound(&shallow, 1, 1, 1e-3, 2).is_err());
    }

    #[test]
    fn coding_dominates_separation() {
        for s in [1.6, 2.0] {
            let cloud = sample_points_with(s, 12, CloudConfig::new(1024, 4)).unwrap();
            for (r, m) in [(1, 1), (1, 2), (2, 1)] {
                for eps0 in [1.0 / 16.0, 1.0 / 32.0] {
                    for n in 1..=4 {
                        let codes = itinerary_upper_bound(&cloud, r, m, eps0, n).unwrap().count;
                        let sep = separated_count(&cloud, (r * m) as i64, n, 2.0 * eps0).unwrap();
                        assert!(codes >= sep, "s={s} r={r} m={m} eps0={eps0} n={n}");
                    }
                }
            }
        }
    }
}
