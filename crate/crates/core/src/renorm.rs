//! Renormalization towers of `q_a(x) = 1 - a x^2` and the entropies a
//! self-homeomorphism of the inverse limit can have.
//!
//! A tower records periods `1 = p_0 | p_1 | ...` of nested cycles of
//! restrictive intervals and the entropies `log s_i` of the return maps
//! `q_a^{p_i}` on them. Admissible entropies are `0` and
//! `N (p_j / p_i) log s_i` with `N >= (p_i / p_k)(log s_k / log s_i)` for
//! every `j <= k <= i`.

use serde::{Deserialize, Serialize};

use crate::error::{IlimError, Result};
use crate::lap_entropy::{entropy_lap_with, EntropyMethod, QUADRATIC_LAP_DEPTH};
use crate::maps::{classify, Interval, QuadraticMap, Symbol, Unimodal};
use crate::{DEFAULT_NODE_CAP, DEFAULT_TOL};

/// Largest period [`detect_renormalization`] accepts.
pub const MAX_PERIOD: usize = 64;

/// Lap-growth estimates below this are reported as zero entropy: maps with
/// polynomial lap growth give `log n / n`-sized estimates at practical depths.
pub const ZERO_ENTROPY_CUTOFF: f64 = 0.08;

/// Slack for the tower inequality `log s_i >= (p_i / p_{i+1}) log s_{i+1}`
/// on detected (estimated) entropies.
pub const DETECTED_ENTROPY_SLACK: f64 = 0.03;

/// Tolerance of exact checks on towers given by value.
pub const TOWER_TOL: f64 = 1e-9;

/// Values closer than this are one spectrum entry.
pub const SPECTRUM_DEDUP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormTower {
    pub periods: Vec<usize>,
    /// `log s_i` in nats.
    pub entropies: Vec<f64>,
}

impl RenormTower {
    pub fn new(periods: Vec<usize>, entropies: Vec<f64>) -> Result<Self> {
        let tower = Self { periods, entropies };
        tower.validate(TOWER_TOL)?;
        Ok(tower)
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// Checks `p_0 = 1`, `p_i | p_{i+1}`, `log s_i >= 0` and
    /// `log s_i >= (p_i / p_{i+1}) log s_{i+1}`, the last two up to `slack`.
    /// The bound `log s_i <= log 2` holds for towers of quadratic maps (and
    /// is enforced by [`detect_renormalization`]) but is not required here.
    pub fn validate(&self, slack: f64) -> Result<()> {
        let bad = |msg: String| Err(IlimError::InvalidTower(msg));
        if self.periods.is_empty() {
            return bad("a tower has at least one level".into());
        }
        if self.periods.len() != self.entropies.len() {
            return bad(format!(
                "{} periods but {} entropies",
                self.periods.len(),
                self.entropies.len()
            ));
        }
        if self.periods[0] != 1 {
            return bad(format!("p_0 must be 1, got {}", self.periods[0]));
        }
        for (i, w) in self.periods.windows(2).enumerate() {
            if w[1] <= w[0] || w[1] % w[0] != 0 {
                return bad(format!("p_{} = {} does not properly divide p_{} = {}", i, w[0], i + 1, w[1]));
            }
        }
        for (i, &h) in self.entropies.iter().enumerate() {
            if !(h >= -slack && h.is_finite()) {
                return bad(format!("log s_{i} = {h} is not a non-negative entropy"));
            }
        }
        for i in 0..self.len() - 1 {
            let ratio = self.periods[i] as f64 / self.periods[i + 1] as f64;
            if self.entropies[i] < ratio * self.entropies[i + 1] - slack {
                return bad(format!(
                    "log s_{i} = {} below (p_{i}/p_{}) log s_{} = {}",
                    self.entropies[i],
                    i + 1,
                    i + 1,
                    ratio * self.entropies[i + 1]
                ));
            }
        }
        Ok(())
    }

    /// Smallest admissible `N` for the pair `(j, i)`; `None` when `log s_i = 0`.
    pub fn n_min(&self, j: usize, i: usize) -> Option<u64> {
        let hi = self.entropies[i];
        if hi <= 0.0 {
            return None;
        }
        let bound = (j..=i)
            .map(|k| self.periods[i] as f64 / self.periods[k] as f64 * self.entropies[k] / hi)
            .fold(1.0, f64::max);
        Some(((bound - TOWER_TOL).ceil() as u64).max(1))
    }

    /// `(p_j / p_i) log s_i`.
    pub fn unit(&self, j: usize, i: usize) -> f64 {
        self.periods[j] as f64 / self.periods[i] as f64 * self.entropies[i]
    }
}

/// Sorted admissible entropies up to `h_max`, always including `0`.
pub fn entropy_spectrum(tower: &RenormTower, h_max: f64) -> Result<Vec<f64>> {
    tower.validate(TOWER_TOL)?;
    if !(h_max > 0.0) {
        return Err(IlimError::Precondition("h_max must be positive".into()));
    }
    let mut values = vec![0.0];
    for i in 0..tower.len() {
        for j in 0..=i {
            let Some(n0) = tower.n_min(j, i) else { continue };
            let unit = tower.unit(j, i);
            let mut n = n0;
            while n as f64 * unit <= h_max + SPECTRUM_DEDUP {
                values.push(n as f64 * unit);
                n += 1;
            }
        }
    }
    values.sort_by(f64::total_cmp);
    values.dedup_by(|later, earlier| (*later - *earlier).abs() <= SPECTRUM_DEDUP);
    Ok(values)
}

/// `(j, i, N)` with `value = N (p_j / p_i) log s_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub j: usize,
    pub i: usize,
    pub n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    /// `None` for the zero-entropy clause or for non-members.
    pub witness: Option<Witness>,
}

/// Whether `value` is admissible for the tower, searching pairs `(j, i)` in
/// lexicographic order.
pub fn spectrum_membership(tower: &RenormTower, value: f64, tol: f64) -> Result<Membership> {
    tower.validate(TOWER_TOL)?;
    if !(value >= -tol) {
        return Err(IlimError::Precondition(format!("value {value} is negative")));
    }
    if value.abs() <= tol {
        return Ok(Membership {
            member: true,
            witness: None,
        });
    }
    for j in 0..tower.len() {
        for i in j..tower.len() {
            let Some(n0) = tower.n_min(j, i) else { continue };
            let unit = tower.unit(j, i);
            let n = (value / unit).round();
            if n >= n0 as f64 && (n * unit - value).abs() <= tol {
                return Ok(Membership {
                    member: true,
                    witness: Some(Witness { j, i, n: n as u64 }),
                });
            }
        }
    }
    Ok(Membership {
        member: false,
        witness: None,
    })
}

/// A homeomorphism assembled from shift powers on the tower's subcontinua.
///
/// Components `G_{k,m}` are fixed for `k <= level`; on the level-`j`
/// continua `h` acts as `σ^R` in the renormalized coordinates, which moves
/// the level-`i` continua (`i > j`) by rotation `m ↦ m + R p_j mod p_i`.
/// `layers[t][m]` is the shift power `N` used on `G_{j+1+t, m}` (`0` is the
/// identity block map). `orbits` lists the cycles of the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModel {
    pub level: usize,
    pub rotation: u64,
    pub layers: Vec<Vec<u64>>,
    pub orbits: Vec<Vec<usize>>,
}

impl BlockModel {
    /// Builds the model and its first-layer orbit partition.
    pub fn new(tower: &RenormTower, level: usize, rotation: u64, layers: Vec<Vec<u64>>) -> Result<Self> {
        let orbits = if layers.is_empty() {
            Vec::new()
        } else {
            rotation_orbits(
                *tower.periods.get(level + 1).ok_or_else(|| too_deep(tower, level, 1))?,
                step(tower, level, rotation, level + 1),
            )
        };
        let model = Self {
            level,
            rotation,
            layers,
            orbits,
        };
        model.validate(tower)?;
        Ok(model)
    }

    pub fn validate(&self, tower: &RenormTower) -> Result<()> {
        if self.level >= tower.len() || self.level + self.layers.len() >= tower.len() {
            return Err(too_deep(tower, self.level, self.layers.len()));
        }
        for (t, layer) in self.layers.iter().enumerate() {
            let p = tower.periods[self.level + 1 + t];
            if layer.len() != p {
                return Err(IlimError::InconsistentOrbits(format!(
                    "layer {t} has {} powers for {p} subcontinua",
                    layer.len()
                )));
            }
        }
        if self.layers.is_empty() {
            return if self.orbits.is_empty() {
                Ok(())
            } else {
                Err(IlimError::InconsistentOrbits("orbits given without layers".into()))
            };
        }
        let p = tower.periods[self.level + 1];
        let expected = normalize_partition(rotation_orbits(p, step(tower, self.level, self.rotation, self.level + 1)));
        let given = normalize_partition(self.orbits.clone());
        if given != expected {
            return Err(IlimError::InconsistentOrbits(format!(
                "rotation by {} mod {p} gives {expected:?}, model lists {given:?}",
                step(tower, self.level, self.rotation, self.level + 1)
            )));
        }
        Ok(())
    }
}

fn too_deep(tower: &RenormTower, level: usize, layers: usize) -> IlimError {
    IlimError::InconsistentOrbits(format!(
        "model at level {level} with {layers} layers needs more than the tower's {} levels",
        tower.len()
    ))
}

/// Rotation step `R p_j mod p_i` induced on level `i`.
fn step(tower: &RenormTower, j: usize, r: u64, i: usize) -> usize {
    let p = tower.periods[i] as u64;
    ((r % p) * (tower.periods[j] as u64 % p) % p) as usize
}

fn rotation_orbits(p: usize, step: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; p];
    let mut orbits = Vec::new();
    for start in 0..p {
        if seen[start] {
            continue;
        }
        let mut orbit = Vec::new();
        let mut m = start;
        while !seen[m] {
            seen[m] = true;
            orbit.push(m);
            m = (m + step) % p;
        }
        orbits.push(orbit);
    }
    orbits
}

fn normalize_partition(mut orbits: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for o in &mut orbits {
        o.sort_unstable();
    }
    orbits.sort();
    orbits
}

/// `max(R log s_j, max over layers and cycles O of Σ_{l∈O} N_l log s_i / |O|)`.
pub fn block_model_entropy(tower: &RenormTower, model: &BlockModel) -> Result<f64> {
    tower.validate(TOWER_TOL)?;
    model.validate(tower)?;
    let j = model.level;
    let mut h = model.rotation as f64 * tower.entropies[j];
    for (t, layer) in model.layers.iter().enumerate() {
        let i = j + 1 + t;
        for orbit in rotation_orbits(tower.periods[i], step(tower, j, model.rotation, i)) {
            let total: u64 = orbit.iter().map(|&m| layer[m]).sum();
            h = h.max(total as f64 * tower.entropies[i] / orbit.len() as f64);
        }
    }
    Ok(h)
}

/// `q_a^p` on a restrictive interval `J`, with preimages taken through the
/// cycle of intervals `q_a^k(J)` so that at most two survive.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMap {
    pub map: QuadraticMap,
    pub period: usize,
    /// `q_a^k(J)` for `k = 0..period`.
    pub cycle: Vec<Interval>,
}

impl ReturnMap {
    pub fn new(map: QuadraticMap, period: usize, half_width: f64) -> Self {
        let cycle = interval_cycle(&map, half_width, period);
        Self {
            map,
            period,
            cycle: cycle[..period].to_vec(),
        }
    }

    pub fn interval(&self) -> Interval {
        self.cycle[0]
    }
}

impl Unimodal for ReturnMap {
    fn apply(&self, x: f64) -> f64 {
        self.map.iterate(x, self.period)
    }

    fn preimages_into(&self, y: f64, tol: f64, out: &mut Vec<f64>) {
        let mut current = vec![y];
        let mut scratch = Vec::with_capacity(4);
        for k in (0..self.period).rev() {
            let target = self.cycle[k];
            let mut next = Vec::with_capacity(2);
            for &v in &current {
                scratch.clear();
                self.map.preimages_into(v, tol, &mut scratch);
                next.extend(
                    scratch
                        .iter()
                        .filter(|&&x| target.contains(x, tol))
                        .map(|&x| x.clamp(target.lo, target.hi)),
                );
            }
            current = next;
        }
        out.extend(current);
    }

    fn critical_point(&self) -> f64 {
        0.0
    }

    fn domain(&self) -> (f64, f64) {
        (self.cycle[0].lo, self.cycle[0].hi)
    }
}

/// `q^k([-w, w])` for `k = 0..=period`.
fn interval_cycle(map: &QuadraticMap, w: f64, period: usize) -> Vec<Interval> {
    let mut cycle = vec![Interval::new(-w, w)];
    for _ in 0..period {
        let j = *cycle.last().unwrap();
        let (a, b) = (map.apply(j.lo), map.apply(j.hi));
        let image = if j.lo < 0.0 && j.hi > 0.0 {
            Interval::new(a.min(b), 1.0)
        } else {
            Interval::new(a.min(b), a.max(b))
        };
        cycle.push(image);
    }
    cycle
}

/// Outcome of testing one candidate period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub period: usize,
    /// A restrictive interval was found numerically.
    pub numeric: bool,
    /// The critical itinerary repeats with this period.
    pub symbolic: bool,
    /// Half-width `|z|` of the restrictive interval, when found.
    pub half_width: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub tower: RenormTower,
    pub candidates: Vec<CandidateReport>,
    /// Periods where the numeric and symbolic criteria disagreed.
    pub ambiguous: Vec<usize>,
}

/// Restrictive-interval search run only when the itinerary test passes or
/// the period is at most this (keeps turning-point enumeration small).
pub const NUMERIC_ALWAYS_UP_TO: usize = 8;

pub fn detect_renormalization(a: f64, max_period: usize, tol: f64) -> Result<RenormTower> {
    Ok(detect_renormalization_report(a, max_period, tol)?.tower)
}

pub fn detect_renormalization_report(a: f64, max_period: usize, tol: f64) -> Result<DetectionReport> {
    let map = QuadraticMap::new(a)?;
    if !(a > 0.0 && a <= 2.0) {
        return Err(IlimError::Domain(format!("parameter {a} outside (0, 2]")));
    }
    if max_period > MAX_PERIOD {
        return Err(IlimError::Precondition(format!(
            "max_period {max_period} exceeds {MAX_PERIOD}"
        )));
    }
    let mut periods = vec![1usize];
    let mut widths = vec![1.0f64];
    let mut candidates = Vec::new();
    let mut ambiguous = Vec::new();
    'levels: loop {
        let last = *periods.last().unwrap();
        let mut p = 2 * last;
        while p <= max_period {
            // The itinerary repeats with period p but with no shorter period
            // that is itself a candidate (a multiple of the last period).
            let symbolic = itinerary_repeats(&map, p, tol)
                && !(1..p / last)
                    .map(|k| k * last)
                    .any(|d| d > 1 && p % d == 0 && itinerary_repeats(&map, d, tol));
            let (numeric, half_width, note) = if symbolic || p <= NUMERIC_ALWAYS_UP_TO {
                match restrictive_interval(&map, p, widths[widths.len() - 1], tol) {
                    Ok(Some(w)) => (true, Some(w), String::new()),
                    Ok(None) => (false, None, "no restrictive interval".into()),
                    Err(e) => (false, None, format!("search failed: {e}")),
                }
            } else {
                (false, None, "itinerary does not repeat; numeric search not run".into())
            };
            if numeric != symbolic {
                ambiguous.push(p);
            }
            candidates.push(CandidateReport {
                period: p,
                numeric,
                symbolic,
                half_width,
                note,
            });
            if let Some(w) = half_width {
                periods.push(p);
                widths.push(w);
                continue 'levels;
            }
            p += last;
        }
        break;
    }

    let entropies = periods
        .iter()
        .zip(&widths)
        .map(|(&p, &w)| level_entropy(&map, p, w, tol))
        .collect::<Result<Vec<_>>>()?;
    let tower = RenormTower { periods, entropies };
    tower.validate(DETECTED_ENTROPY_SLACK)?;
    Ok(DetectionReport {
        tower,
        candidates,
        ambiguous,
    })
}

fn level_entropy(map: &QuadraticMap, p: usize, w: f64, tol: f64) -> Result<f64> {
    let estimate = if p == 1 {
        entropy_lap_with(map, QUADRATIC_LAP_DEPTH, EntropyMethod::HalfWindow, tol, DEFAULT_NODE_CAP)?
    } else {
        let ret = ReturnMap::new(*map, p, w);
        entropy_lap_with(&ret, QUADRATIC_LAP_DEPTH, EntropyMethod::HalfWindow, tol, DEFAULT_NODE_CAP)?
    };
    Ok(if estimate.value < ZERO_ENTROPY_CUTOFF {
        0.0
    } else {
        estimate.value.min(std::f64::consts::LN_2)
    })
}

/// Symbols of `c_{kp+i}` agree with those of `c_i` for `0 < i < p`, `k = 1, 2`.
fn itinerary_repeats(map: &QuadraticMap, p: usize, tol: f64) -> bool {
    let orbit = crate::maps::critical_orbit(map, 3 * p);
    let sym = |n: usize| classify(orbit[n - 1], 0.0, tol);
    (1..p).all(|i| {
        let s = sym(i);
        s != Symbol::C && (1..=2).all(|k| sym(k * p + i) == s)
    })
}

/// Half-width `|z|` of a restrictive interval `[-|z|, |z|]` of period `p`
/// inside the previous one, bounded by a repelling orientation-preserving
/// fixed point `z` of `q^p`; the smallest such `|z|` is returned.
fn restrictive_interval(map: &QuadraticMap, p: usize, outer: f64, tol: f64) -> Result<Option<f64>> {
    let mut zs = fixed_points(map, p, outer)?;
    zs.retain(|&z| {
        let d = (0..p).fold((1.0, z), |(d, x), _| (d * map.derivative(x), map.apply(x))).0;
        d > 1.0 + tol && z.abs() > tol
    });
    let mut widths: Vec<f64> = zs.iter().map(|z| z.abs()).collect();
    widths.sort_by(f64::total_cmp);
    widths.dedup_by(|a, b| (*a - *b).abs() <= tol.max(1e-12));
    Ok(widths.into_iter().find(|&w| is_restrictive(map, p, w, tol)))
}

fn is_restrictive(map: &QuadraticMap, p: usize, w: f64, tol: f64) -> bool {
    let cycle = interval_cycle(map, w, p);
    let back = cycle[p];
    if back.lo < -w - tol || back.hi > w + tol {
        return false;
    }
    (0..p).all(|i| {
        (i + 1..p).all(|k| {
            let overlap = cycle[i].hi.min(cycle[k].hi) - cycle[i].lo.max(cycle[k].lo);
            overlap <= tol
        })
    })
}

/// Subintervals scanned per monotone piece of `q^p`.
const SCAN_CELLS: usize = 64;

/// Fixed points of `q^p` in `[-outer, outer]`: sign changes of `q^p(x) - x`
/// on a grid refining the monotone pieces, refined by bisection.
fn fixed_points(map: &QuadraticMap, p: usize, outer: f64) -> Result<Vec<f64>> {
    // Intermediate iterates of a turning point leave [-outer, outer], so the
    // tree is walked on the whole domain and filtered afterwards.
    let mut knots: Vec<f64> = crate::maps::critical_preimages(map, p - 1, DEFAULT_TOL, DEFAULT_NODE_CAP)?
        .into_iter()
        .map(|t| t.x)
        .filter(|x| x.abs() < outer)
        .collect();
    knots.push(-outer);
    knots.push(outer);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let g = |x: f64| map.iterate(x, p) - x;
    // A monotone piece can still cross the diagonal several times (an
    // attracting cycle between two repelling ones), so pieces are split.
    let cells: Vec<f64> = knots
        .windows(2)
        .flat_map(|w| (0..SCAN_CELLS).map(move |k| w[0] + (w[1] - w[0]) * k as f64 / SCAN_CELLS as f64))
        .chain(std::iter::once(outer))
        .collect();
    let mut roots = Vec::new();
    for w in cells.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (glo, ghi) = (g(lo), g(hi));
        if glo == 0.0 {
            roots.push(lo);
            continue;
        }
        if glo.signum() == ghi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid).signum() == glo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if g(outer) == 0.0 {
        roots.push(outer);
    }
    Ok(roots)
}
