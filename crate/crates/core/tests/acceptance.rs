//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process fails if any criterion fails, except those listed in
//! [`KNOWN_UNATTAINABLE`], which are still evaluated as stated and must
//! still fail (a surprise pass is reported too).

use std::f64::consts::LN_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ilim::bowen::{
    entropy_bowen, itinerary_upper_bound, sample_points_with, separated_count, separated_set,
    CloudConfig, PointCloud, BOWEN_CLOUD, DEFAULT_EPS,
};
use ilim::chains::{build_chain, refines, verify_plevel_alignment};
use ilim::inverse_limit::{
    arc_p_points, folding_pattern_prefix, metric, salient_positions, BackwardPoint, FoldingPattern,
    Level,
};
use ilim::lap_entropy::{entropy_lap, lap_count, lap_table, EntropyMethod};
use ilim::maps::{QuadraticMap, TentMap, Unimodal};
use ilim::renorm::{
    block_model_entropy, detect_renormalization, entropy_spectrum, spectrum_membership,
    BlockModel, RenormTower,
};
use ilim::DEFAULT_NODE_CAP;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot hold as stated, with the reason.
const KNOWN_UNATTAINABLE: &[(u32, &str)] = &[(
    8,
    "q_a with a = 1.3 has an attracting 4-cycle (1.25 < a < 1.368), so its tower is (1, 2, 4)",
)];

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(
        elapsed <= Duration::from_secs(limit_s),
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn lap_convergence() -> Check {
    let mut notes = Vec::new();
    for s in [1.5, 1.8, 2.0] {
        let start = Instant::now();
        let est = entropy_lap(&TentMap::new(s).unwrap(), 24, EntropyMethod::Ratio).map_err(|e| e.to_string())?;
        within(start.elapsed(), 60)?;
        let err = (est.value - s.ln()).abs();
        ensure(err < 0.02, format!("s={s}: |{} - log s| = {err}", est.value))?;
        notes.push(format!("s={s}: {:.5}", est.value));
    }
    let est = entropy_lap(&TentMap::new(2.0).unwrap(), 24, EntropyMethod::Ratio).unwrap();
    ensure(est.value == 2f64.ln(), format!("s=2 ratio {} is not exactly log 2", est.value))?;
    Ok(notes.join(", "))
}

fn full_tent_exactness() -> Check {
    let table = lap_table(&TentMap::new(2.0).unwrap(), 20, 1e-12, DEFAULT_NODE_CAP).map_err(|e| e.to_string())?;
    for n in 1..=20 {
        ensure(table.lap(n) == 1u64 << n, format!("lap(T_2^{n}) = {}", table.lap(n)))?;
    }
    ensure(lap_count(&TentMap::new(2.0).unwrap(), 20).unwrap() == 1 << 20, "lap_count(20)")?;
    Ok("lap = 2^n for n = 1..20".into())
}

fn folding_patterns() -> Check {
    let expected = FoldingPattern::parse("∞ 0 1 0 2 0 1").unwrap();
    for s in [1.6, 1.8, 2.0] {
        let fp = folding_pattern_prefix(s, 7).map_err(|e| e.to_string())?;
        ensure(fp == expected, format!("s={s}: {fp}"))?;
        let n = 10;
        let points = arc_p_points(s, n, 1e-12, DEFAULT_NODE_CAP).map_err(|e| e.to_string())?;
        let positions = salient_positions(s, n).map_err(|e| e.to_string())?;
        ensure(positions.len() == n, format!("s={s}: {} salient points", positions.len()))?;
        for (k, &t) in positions.iter().enumerate() {
            let i = k + 1;
            let rec = points.iter().find(|p| p.position == t).ok_or("salient point is not a p-point")?;
            ensure(rec.level == Level::Finite(i), format!("s={s}: L(s_{i}) = {}", rec.level))?;
            // Same level read off an explicit point of K_s.
            let p = 2;
            let x = BackwardPoint::on_arc(s, p, n, t, p + n + 4).unwrap();
            ensure(
                x.p_level(p, 1e-9) == Some(Level::Finite(i)),
                format!("s={s}: p-level of s_{i} is {:?}", x.p_level(p, 1e-9)),
            )?;
        }
    }
    Ok("∞ 0 1 0 2 0 1 for s = 1.6, 1.8, 2; L_p(s_i) = i for i <= 10".into())
}

fn bowen_shift_powers() -> Check {
    let start = Instant::now();
    let run = |r: i64| entropy_bowen(2.0, r, 12, &DEFAULT_EPS, 10).map_err(|e| e.to_string());
    let one = run(1)?.value;
    let two = run(2)?.value;
    let zero = run(0)?.value;
    within(start.elapsed(), 180)?;
    ensure((0.55..=0.80).contains(&one), format!("R=1 estimate {one} outside [0.55, 0.80]"))?;
    ensure(
        (two - 2.0 * one).abs() <= 0.15 * 2.0 * one,
        format!("R=2 estimate {two} not within 15% of 2 x {one}"),
    )?;
    ensure(zero == 0.0, format!("R=0 estimate {zero}"))?;
    Ok(format!("R=1 {one:.4}, R=2 {two:.4}, R=0 {zero}"))
}

fn plevel_alignment() -> Check {
    let mut notes = Vec::new();
    for (s, q, p, r) in [(2.0, 6, 3, 1), (1.8, 8, 4, 2)] {
        let rep = verify_plevel_alignment(s, q, p, r, 8).map_err(|e| e.to_string())?;
        ensure(rep.checked > 0, "nothing checked")?;
        ensure(rep.all_passed(), format!("s={s} q={q} p={p} R={r}: {} failures", rep.failures.len()))?;
        ensure(
            rep.level_passed == rep.checked && rep.link_passed == rep.checked,
            format!("{}/{} levels, {}/{} links", rep.level_passed, rep.checked, rep.link_passed, rep.checked),
        )?;
        ensure(rep.m == r + q - p, format!("M = {}, expected {}", rep.m, r + q - p))?;
        notes.push(format!("({s},{q},{p},{r}): {}/{} M={}", rep.checked, rep.checked, rep.m));
    }
    Ok(notes.join(", "))
}

fn chain_axioms() -> Check {
    for s in [1.6, 1.8, 2.0] {
        let eps = 0.5;
        let chains: Vec<_> = (0..=4)
            .map(|p| build_chain(s, p, eps * 0.5f64.powi(p as i32)))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for c in &chains {
            ensure(c.is_chain(), format!("s={s} p={}: not a chain", c.p))?;
            ensure(
                c.has_mandatory_breakpoints(1e-12).unwrap(),
                format!("s={s} p={}: missing T^-i(c) breakpoints", c.p),
            )?;
        }
        for w in chains.windows(2) {
            ensure(
                refines(&w[1], &w[0]).map_err(|e| e.to_string())?,
                format!("s={s}: chain {} does not refine chain {}", w[1].p, w[0].p),
            )?;
        }
    }
    Ok("p = 0..4, s = 1.6, 1.8, 2".into())
}

fn random_tower(rng: &mut ChaCha8Rng) -> RenormTower {
    let levels = rng.gen_range(1..=4);
    let mut periods = vec![1usize];
    for _ in 1..levels {
        periods.push(periods.last().unwrap() * rng.gen_range(2..=4));
    }
    // Draw from the top down so every level dominates the ones above it.
    let mut entropies = vec![0.0; levels];
    let mut floor = 0.0;
    for i in (0..levels).rev() {
        entropies[i] = if floor == 0.0 && rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(floor..=LN_2) };
        if i > 0 {
            floor = periods[i - 1] as f64 / periods[i] as f64 * entropies[i];
        }
    }
    RenormTower::new(periods, entropies).unwrap()
}

fn spectrum_theorem() -> Check {
    let close = |got: &[f64], want: &[f64]| got.len() == want.len() && got.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-9);

    let biting = RenormTower::new(vec![1, 2], vec![0.5, 0.8]).map_err(|e| e.to_string())?;
    let spec = entropy_spectrum(&biting, 1.3).map_err(|e| e.to_string())?;
    ensure(close(&spec, &[0.0, 0.5, 0.8, 1.0, 1.2]), format!("(0.5, 0.8): {spec:?}"))?;
    ensure(!spec.iter().any(|v| (v - 0.4).abs() <= 1e-9), "0.4 admitted")?;
    ensure(!spectrum_membership(&biting, 0.4, 1e-9).unwrap().member, "0.4 is a member")?;

    let half = RenormTower::new(vec![1, 2], vec![0.5 * LN_2, LN_2]).unwrap();
    let h_max = 10.0;
    let spec = entropy_spectrum(&half, h_max).unwrap();
    let want: Vec<f64> = (0..).map(|k| k as f64 * 0.5 * LN_2).take_while(|&v| v <= h_max).collect();
    ensure(close(&spec, &want), format!("(½log2, log2): {spec:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..1000 {
        let tower = random_tower(&mut rng);
        let level = rng.gen_range(0..tower.len());
        let depth = rng.gen_range(0..tower.len() - level);
        let layers: Vec<Vec<u64>> = (0..depth)
            .map(|t| (0..tower.periods[level + 1 + t]).map(|_| rng.gen_range(0..=5)).collect())
            .collect();
        let model = BlockModel::new(&tower, level, rng.gen_range(0..=6), layers).map_err(|e| e.to_string())?;
        let h = block_model_entropy(&tower, &model).map_err(|e| e.to_string())?;
        let spec = entropy_spectrum(&tower, h + 1.0).unwrap();
        ensure(spec.iter().any(|v| (v - h).abs() <= 1e-9), format!("{tower:?} {model:?}: {h} not in spectrum"))?;
    }
    Ok("examples exact; 1000 random block models inside the spectrum".into())
}

/// Root of `a^3 - 2a^2 + 2a - 2`, where `q_a^2(0) = -β` for the interior fixed point `β`.
fn full_period_two_parameter() -> f64 {
    let f = |a: f64| a * a * a - 2.0 * a * a + 2.0 * a - 2.0;
    let (mut lo, mut hi) = (1.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn renormalization_detection() -> Check {
    let start = Instant::now();
    let mut failures = Vec::new();
    let detect = |a: f64| detect_renormalization(a, 16, 1e-10).map_err(|e| e.to_string());

    let t = detect(2.0)?;
    if t.periods != [1] {
        failures.push(format!("a=2: periods {:?}", t.periods));
    }
    let t = detect(1.3)?;
    if t.periods != [1, 2] || t.entropies.iter().any(|&h| h != 0.0) {
        failures.push(format!("a=1.3: periods {:?}, entropies {:?}", t.periods, t.entropies));
    }
    let a = full_period_two_parameter();
    let t = detect(a)?;
    if t.periods != [1, 2]
        || (t.entropies[0] - 0.5 * LN_2).abs() > 0.03
        || (t.entropies[1] - LN_2).abs() > 0.03
    {
        failures.push(format!("a={a}: periods {:?}, entropies {:?}", t.periods, t.entropies));
    }
    within(start.elapsed(), 120)?;
    if failures.is_empty() {
        Ok(format!("a=2, a=1.3, a={a:.10}"))
    } else {
        Err(failures.join("; "))
    }
}

fn random_point(rng: &mut ChaCha8Rng, s: f64, depth: usize) -> BackwardPoint {
    let map = TentMap::new(s).unwrap();
    let c1 = map.c1();
    let mut x = rng.gen_range(0.0..c1);
    let mut rev = vec![x];
    let mut pre = Vec::new();
    for _ in 0..depth {
        pre.clear();
        map.preimages_into(x, 1e-12, &mut pre);
        pre.retain(|&y| y <= c1);
        x = pre[rng.gen_range(0..pre.len())];
        rev.push(x);
    }
    rev.reverse();
    BackwardPoint::new(s, rev).unwrap()
}

type Bits = [u64; 4];

fn has(set: &Bits, v: usize) -> bool {
    set[v / 64] >> (v % 64) & 1 == 1
}

/// Maximum clique size by branch and bound with greedy colouring bounds.
fn maximum_clique(adj: &[Bits], lower: usize) -> usize {
    fn expand(adj: &[Bits], size: usize, mut cand: Bits, best: &mut usize) {
        let mut order = Vec::new();
        let mut uncoloured = cand;
        let mut colour = 0;
        while uncoloured.iter().any(|&w| w != 0) {
            colour += 1;
            let mut avail = uncoloured;
            while let Some(v) = (0..256).find(|&v| has(&avail, v)) {
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

fn greedy_vs_exact(cloud: &PointCloud, r: i64, n: usize, eps: f64) -> Result<(usize, usize), String> {
    let orbits: Vec<Vec<BackwardPoint>> = cloud
        .points
        .iter()
        .map(|p| {
            let mut out = vec![p.clone()];
            for k in 1..n {
                let mut y = out[k - 1].clone();
                for _ in 0..r.unsigned_abs() {
                    y = if r > 0 { y.shift() } else { y.unshift().unwrap() };
                }
                out.push(y);
            }
            out
        })
        .collect();
    let m = cloud.len();
    let adj: Vec<Bits> = (0..m)
        .map(|a| {
            let mut row = [0u64; 4];
            for b in (0..m).filter(|&b| b != a) {
                let far = (0..n).any(|k| {
                    let (x, y) = (&orbits[a][k], &orbits[b][k]);
                    let d = x.depth().min(y.depth());
                    metric(&x.truncated(d).unwrap(), &y.truncated(d).unwrap()).unwrap() > eps
                });
                if far {
                    row[b / 64] |= 1 << (b % 64);
                }
            }
            row
        })
        .collect();
    let kept = separated_set(cloud, r, n, eps).map_err(|e| e.to_string())?;
    for (i, &a) in kept.iter().enumerate() {
        ensure(kept[i + 1..].iter().all(|&b| has(&adj[a], b)), "greedy set is not separated")?;
    }
    Ok((kept.len(), maximum_clique(&adj, kept.len())))
}

fn property_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let s = rng.gen_range(1.05..=2.0);
        let (x, y, z) = (random_point(&mut rng, s, 24), random_point(&mut rng, s, 24), random_point(&mut rng, s, 24));
        let d = |a: &BackwardPoint, b: &BackwardPoint| metric(a, b).unwrap();
        ensure(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12, "triangle inequality")?;
        ensure(d(&x.shift(), &y.shift()) <= (s + 0.5) * d(&x, &y) + 1e-12, format!("shift Lipschitz at s={s}"))?;
    }

    let mut pairs = 0;
    for s in [1.3, 1.5, 1.6, 1.8, 1.9, 2.0] {
        let table = lap_table(&TentMap::new(s).unwrap(), 20, 1e-12, DEFAULT_NODE_CAP).unwrap();
        ensure(table.submultiplicativity_violation().is_none(), format!("lap(m+n) > lap(m)lap(n) at s={s}"))?;
        pairs += 20 * 19 / 2;
    }
    for a in [1.3, 1.5437, 1.76, 1.9, 2.0] {
        let table = lap_table(&QuadraticMap::new(a).unwrap(), 16, 1e-12, DEFAULT_NODE_CAP).unwrap();
        ensure(table.submultiplicativity_violation().is_none(), format!("lap(m+n) > lap(m)lap(n) at a={a}"))?;
        pairs += 16 * 15 / 2;
    }

    let full = sample_points_with(2.0, 8, CloudConfig::new(64, 16)).map_err(|e| e.to_string())?;
    let mut band = Vec::new();
    for (seed, (r, n, eps)) in [(1i64, 2usize, 0.4), (1, 3, 0.5), (2, 2, 0.6), (-1, 3, 0.5)].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed as u64);
        let cloud = full.subcloud(&sample(&mut rng, full.len(), 200).into_vec());
        let (greedy, exact) = greedy_vs_exact(&cloud, r, n, eps)?;
        ensure(
            greedy <= exact && 2 * greedy >= exact,
            format!("R={r} n={n} eps={eps}: greedy {greedy}, exact {exact}"),
        )?;
        band.push(format!("{greedy}/{exact}"));
    }

    let cloud = sample_points_with(2.0, 12, BOWEN_CLOUD).map_err(|e| e.to_string())?;
    for (r, m) in [(1usize, 1usize), (1, 2), (2, 1)] {
        for eps0 in [1.0 / 16.0, 1.0 / 32.0] {
            for n in 1..=4 {
                let codes = itinerary_upper_bound(&cloud, r, m, eps0, n).map_err(|e| e.to_string())?.count;
                let sep = separated_count(&cloud, (r * m) as i64, n, 2.0 * eps0).unwrap();
                ensure(codes >= sep, format!("R={r} m={m} eps0={eps0} n={n}: {codes} codes < {sep}"))?;
            }
        }
    }
    Ok(format!(
        "1000 metric pairs, {pairs} lap pairs, greedy/exact {}, coding >= separation",
        band.join(" ")
    ))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 9] = [
        (1, "lap-entropy convergence", lap_convergence),
        (2, "full-tent exactness", full_tent_exactness),
        (3, "folding-pattern prefix and salient levels", folding_patterns),
        (4, "Bowen entropy of shift powers", bowen_shift_powers),
        (5, "p-level alignment", plevel_alignment),
        (6, "chain axioms", chain_axioms),
        (7, "entropy spectrum", spectrum_theorem),
        (8, "renormalization detection", renormalization_detection),
        (9, "property suites", property_suites),
    ];
    let mut unexpected = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_UNATTAINABLE.iter().find(|(k, _)| *k == id);
        match (&result, known) {
            (Ok(note), None) => println!("PASS criterion {id} ({name}) [{secs:.1}s]: {note}"),
            (Err(why), None) => {
                unexpected += 1;
                println!("FAIL criterion {id} ({name}) [{secs:.1}s]: {why}");
            }
            (Err(why), Some((_, reason))) => {
                println!("FAIL criterion {id} ({name}) [{secs:.1}s]: {why} -- known: {reason}")
            }
            (Ok(note), Some(_)) => {
                unexpected += 1;
                println!("PASS criterion {id} ({name}) [{secs:.1}s]: {note} -- listed as unattainable, update the list");
            }
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria did not behave as expected");
        std::process::exit(1);
    }
}
