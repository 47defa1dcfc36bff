//! Acceptance suite: one test per criterion, each printing a pass line
//! with its measurements. Everything is exact; no tolerances appear
//! anywhere.

mod common;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Instant;

use adic_core::gammagraph::{GraphPoint, VertexId};
use adic_core::ordgroup::Rat;
use adic_core::p1tree::{
    self, dedupe_points, eval_abs, is_triangulation, meet_closure, point_eq, CenterConfig,
    CenterId, FactoredFn, MapData, MapEntry, P1Point,
};
use adic_core::plfun::{interval_length, Pinch, PlFn};
use adic_core::ranger::{CutTail, QuadIrr, RangerClass, RangerKind};
use adic_core::{Group, GroupElem, Ranger, ScaleIndex, Sign};
use common::*;
use num_bigint::BigInt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Criterion 1: exhaustive order laws on the finite ranger grid.
#[test]
fn criterion_01_ranger_order_laws() {
    let start = Instant::now();
    let mut total_pairs = 0usize;
    for h in 1..=3usize {
        let grid = ranger_grid(h);
        // canonical encodings: no two distinct entries compare equal
        let mut sorted = grid.clone();
        sorted.sort();
        for w in sorted.windows(2) {
            assert_ne!(w[0].cmp(&w[1]), Ordering::Equal, "{} vs {}", w[0], w[1]);
        }
        // the pairwise matrix agrees with the sorted positions, which
        // forces transitivity and trichotomy
        let pos: BTreeMap<&Ranger, usize> =
            sorted.iter().enumerate().map(|(i, r)| (r, i)).collect();
        for a in &grid {
            for b in &grid {
                total_pairs += 1;
                let expected = pos[a].cmp(&pos[b]);
                assert_eq!(a.cmp(b), expected);
                assert_eq!(b.cmp(a), expected.reverse());
            }
        }
    }
    // independent random-triple transitivity spot check
    let mut rng = StdRng::seed_from_u64(11);
    let grid3 = ranger_grid(3);
    for _ in 0..20_000 {
        let a = &grid3[rng.gen_range(0..grid3.len())];
        let b = &grid3[rng.gen_range(0..grid3.len())];
        let c = &grid3[rng.gen_range(0..grid3.len())];
        if a.cmp(b) != Ordering::Greater && b.cmp(c) != Ordering::Greater {
            assert_ne!(a.cmp(c), Ordering::Greater);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "budget exceeded: {elapsed:?}");
    println!("criterion 01 PASS: order laws on {total_pairs} pairs in {elapsed:?}");
}

/// Criterion 2: the scale ideal of every cut agrees with the translation
/// oracle on 50 sampled group elements.
#[test]
fn criterion_02_translation_criterion() {
    let mut rng = StdRng::seed_from_u64(22);
    let mut checked = 0usize;
    for h in 1..=3usize {
        let group = Group::new(h).unwrap();
        let cuts: Vec<Ranger> = ranger_grid(h)
            .into_iter()
            .filter(|r| matches!(r.classify(), RangerClass::Cut(_)))
            .collect();
        // 50 positive samples spread over every scale
        let mut gammas = Vec::new();
        while gammas.len() < 50 {
            let lead = rng.gen_range(0..h);
            let mut coords = vec![rat(0, 1); h];
            coords[lead] = rat(rng.gen_range(1..7), rng.gen_range(1..4));
            for c in coords.iter_mut().skip(lead + 1) {
                *c = rat(rng.gen_range(-3..4), 1);
            }
            let g = GroupElem::new(coords);
            if g.is_positive() {
                gammas.push(g);
            }
        }
        for cut in &cuts {
            let RangerClass::Cut(profile) = cut.classify() else {
                unreachable!()
            };
            for gamma in &gammas {
                let moved = cut.translate(gamma) != *cut;
                let ScaleIndex(s) = group.scale_index(gamma).unwrap();
                assert_eq!(
                    moved,
                    s <= profile.scale_threshold,
                    "cut {cut} gamma {gamma} threshold {}",
                    profile.scale_threshold
                );
                checked += 1;
            }
        }
    }
    println!("criterion 02 PASS: translation criterion on {checked} cut/translation pairs");
}

/// Reverses an embedding anchored at zero: strips the leading quotient
/// coordinates.
fn strip_embedded(e: &Ranger, j: usize) -> Ranger {
    let m = e.rank() - j;
    match e.kind() {
        RangerKind::Principal(c) => Ranger::principal(c[j..].to_vec()),
        RangerKind::Infinitesimal(c, s) => Ranger::infinitesimal(c[j..].to_vec(), *s),
        RangerKind::Cut { prefix, tail } => {
            Ranger::cut(m, prefix[j..].to_vec(), tail.clone()).expect("stripped cut")
        }
        RangerKind::Unbounded(s) => Ranger::unbounded(m, *s),
    }
}

/// Criterion 3: embedding and coarsening compose to the identity, and
/// fibers over non-principal rangers are singletons.
#[test]
fn criterion_03_embedding_and_coarsening() {
    for (h, j) in [(2usize, 1usize), (3, 1), (3, 2)] {
        let bases = [
            GroupElem::zero(h),
            GroupElem::new((0..h).map(|i| rat(i as i64, 2)).collect()),
            GroupElem::new((0..h).map(|i| rat(1 - i as i64, 1)).collect()),
        ];
        for r in ranger_grid(h - j) {
            for base in &bases {
                let embedded = r.embed(base).unwrap();
                // composing with the coarsening lands on the base projection
                assert_eq!(
                    embedded.project(j).unwrap(),
                    Ranger::principal(base.coords()[..j].to_vec()),
                    "embed {r} at {base}"
                );
                if r.is_bounded() {
                    // the embedding is reversed by translating the anchor away
                    let centered = embedded.translate(&base.neg());
                    assert_eq!(strip_embedded(&centered, j), r, "round trip for {r}");
                }
            }
        }
        // the embedding preserves the order of bounded rangers
        let base = GroupElem::new((0..h).map(|i| rat(i as i64, 2)).collect());
        let bounded: Vec<Ranger> = ranger_grid(h - j)
            .into_iter()
            .filter(Ranger::is_bounded)
            .collect();
        for r1 in &bounded {
            for r2 in &bounded {
                assert_eq!(
                    r1.cmp(r2),
                    r1.embed(&base).unwrap().cmp(&r2.embed(&base).unwrap()),
                    "embedding preserves order of {r1} and {r2}"
                );
            }
        }
        // the coarsening is order-preserving, and fibers over
        // non-principal targets are singletons on the grid
        let grid_h = ranger_grid(h);
        for r in &grid_h {
            for s in &grid_h {
                if r <= s {
                    assert!(
                        r.project(j).unwrap() <= s.project(j).unwrap(),
                        "projection preserves order of {r} and {s}"
                    );
                }
            }
        }
        let mut fibers: BTreeMap<String, Vec<Ranger>> = BTreeMap::new();
        for r in grid_h {
            let image = r.project(j).unwrap();
            if !image.is_principal() {
                fibers.entry(format!("{image}")).or_default().push(r);
            }
        }
        for (image, fiber) in &fibers {
            assert_eq!(fiber.len(), 1, "fiber over {image} must be a singleton");
        }
    }
    // two distinct rangers project equally exactly when a common interval
    // translated from the convex subgroup contains both
    {
        let grid = ranger_grid(2);
        let big = rat(1_000_000, 1);
        for r in &grid {
            for s in &grid {
                if r == s {
                    continue;
                }
                let same = r.project(1).unwrap() == s.project(1).unwrap();
                let witness = grid_coords().iter().any(|c| {
                    let lo = Ranger::from_elem(&GroupElem::new(vec![c.clone(), -big.clone()]));
                    let hi = Ranger::from_elem(&GroupElem::new(vec![c.clone(), big.clone()]));
                    lo <= *r && *r <= hi && lo <= *s && *s <= hi
                });
                assert_eq!(same, witness, "witness interval for {r} and {s}");
            }
        }
    }
    println!("criterion 03 PASS: embedding and coarsening laws on exhaustive grids");
}

/// Criterion 4: the minimal image length of strictly monotone pl maps is
/// the interval length, attained by translations.
#[test]
fn criterion_04_minimal_image_length() {
    let mut rng = StdRng::seed_from_u64(44);
    let a = GroupElem::zero(2);
    let b = elem(&[(4, 1), (0, 1)]);
    let domain_len = interval_length(&a, &b).unwrap();
    let mut lengths = Vec::new();
    for i in 0..60 {
        let f = if i % 5 == 0 {
            // slope-one translation
            PlFn::translation((a.clone(), b.clone()), &random_elem(&mut rng, 2)).unwrap()
        } else {
            let bps = vec![elem(&[(1, 1), (0, 1)]), elem(&[(2, 1), (0, 1)])];
            let slopes: Vec<i64> = (0..3).map(|_| rng.gen_range(1..5)).collect();
            PlFn::new(
                (a.clone(), b.clone()),
                bps,
                slopes,
                random_elem(&mut rng, 2),
                Pinch::default(),
            )
            .unwrap()
        };
        assert!(f.is_strictly_monotone());
        let len = f.image_length().unwrap();
        assert!(len >= domain_len, "monotone maps never contract");
        lengths.push((len, f.slopes().to_vec()));
    }
    let min = lengths.iter().map(|(l, _)| l.clone()).min().unwrap();
    assert_eq!(min, domain_len, "minimum is the interval length exactly");
    assert!(lengths
        .iter()
        .any(|(l, slopes)| *l == domain_len && slopes.iter().all(|&s| s == 1)));
    println!("criterion 04 PASS: minimal image length over {} monotone maps", lengths.len());
}

/// Criterion 5: the explicit metric on divisorial points is a tree metric.
#[test]
fn criterion_05_projective_line_metric() {
    let start = Instant::now();
    // hand-computed case: radii (-1,0) and (-2,0) at distance (0,0)
    let cfg = CenterConfig::new(
        2,
        vec!["a".into(), "b".into()],
        &[(0, 1, elem(&[(0, 1), (0, 1)]))],
    )
    .unwrap();
    let x = P1Point::divisorial(CenterId(0), elem(&[(-1, 1), (0, 1)]));
    let y = P1Point::divisorial(CenterId(1), elem(&[(-2, 1), (0, 1)]));
    assert_eq!(p1tree::distance(&cfg, &x, &y).unwrap(), elem(&[(3, 1), (0, 1)]));
    let mut rng = StdRng::seed_from_u64(55);
    let zero = GroupElem::zero(2);
    for round in 0..20 {
        let cfg = random_ultrametric_config(&mut rng, 8, 2);
        assert!(cfg.validate().is_valid(), "generator produces ultrametrics");
        let pts: Vec<P1Point> = (0..8)
            .map(|_| random_divisorial_point(&mut rng, &cfg))
            .collect();
        let d = |i: usize, j: usize| p1tree::distance(&cfg, &pts[i], &pts[j]).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let dij = d(i, j);
                assert!(dij >= zero, "nonnegative");
                assert_eq!(dij == zero, point_eq(&cfg, &pts[i], &pts[j]));
                assert_eq!(dij, d(j, i), "symmetric");
                for k in 0..8 {
                    assert!(d(i, k) <= dij.add(&d(j, k)), "triangle inequality");
                }
            }
        }
        // four-point condition on every 4-subset
        for a in 0..8 {
            for b in a + 1..8 {
                for c in b + 1..8 {
                    for e in c + 1..8 {
                        let s1 = d(a, b).add(&d(c, e));
                        let s2 = d(a, c).add(&d(b, e));
                        let s3 = d(a, e).add(&d(b, c));
                        let mut sums = [s1, s2, s3];
                        sums.sort();
                        assert_eq!(
                            sums[1], sums[2],
                            "four-point condition, round {round}"
                        );
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "budget exceeded: {elapsed:?}");
    println!("criterion 05 PASS: tree metric on 20 configurations in {elapsed:?}");
}

/// Criterion 6: slopes equal the finite-difference quotient of the Gauss
/// evaluation at a thousand sampled non-corner points.
#[test]
fn criterion_06_slope_equals_degree() {
    let mut rng = StdRng::seed_from_u64(66);
    let mut checked = 0usize;
    while checked < 1000 {
        let n_centers = rng.gen_range(2..6);
        let cfg = random_ultrametric_config(&mut rng, n_centers, 2);
        let f = random_factored(&mut rng, &cfg, false);
        let a = CenterId(rng.gen_range(0..cfg.len()));
        // corner levels on the path over a
        let mut corners: Vec<GroupElem> = f
            .factors
            .iter()
            .filter_map(|(c, _)| match cfg.logdist(a, *c) {
                p1tree::LogDist::Finite(e) => Some(e.clone()),
                p1tree::LogDist::NegInf => None,
            })
            .collect();
        corners.sort();
        corners.dedup();
        // non-corner probes: midpoints of gaps plus points outside
        let mut probes = Vec::new();
        let offset = elem(&[(1, 1), (0, 1)]);
        match (corners.first(), corners.last()) {
            (Some(first), Some(last)) => {
                probes.push(first.sub(&offset));
                probes.push(last.add(&offset));
                for w in corners.windows(2) {
                    probes.push(w[0].add(&w[1]).scale(&rat(1, 2)));
                }
            }
            _ => probes.push(random_elem(&mut rng, 2)),
        }
        for rho in probes {
            let rho_r = Ranger::from_elem(&rho);
            if p1tree::slope_jump(&cfg, &f, a, &rho_r) != 0 {
                continue;
            }
            // a gap radius keeping the straddle corner-free
            let mut eps = elem(&[(1, 2), (0, 1)]);
            for c in &corners {
                let gap = rho.abs_diff(c);
                let quarter = gap.scale(&rat(1, 4));
                if quarter < eps && quarter.is_positive() {
                    eps = quarter;
                }
            }
            let slope = p1tree::slope_and_degree(&cfg, &f, a, &rho_r);
            let up = eval_abs(&cfg, &f, &P1Point::divisorial(a, rho.add(&eps)))
                .unwrap()
                .finite()
                .unwrap();
            let down = eval_abs(&cfg, &f, &P1Point::divisorial(a, rho.sub(&eps)))
                .unwrap()
                .finite()
                .unwrap();
            let diff = up.base().sub(down.base());
            assert_eq!(
                diff,
                eps.scale_int(2 * slope),
                "finite difference equals slope"
            );
            checked += 1;
        }
    }
    println!("criterion 06 PASS: slope equals finite difference at {checked} probes");
}

/// Criterion 7: outward branch slopes sum to zero at divisorial points.
#[test]
fn criterion_07_branch_slopes_sum_zero() {
    let mut rng = StdRng::seed_from_u64(77);
    let mut checked = 0usize;
    while checked < 100 {
        let n_centers = rng.gen_range(2..7);
        let cfg = random_ultrametric_config(&mut rng, n_centers, 2);
        let f = random_factored(&mut rng, &cfg, true);
        if f.total_degree() != 0 {
            continue;
        }
        let q = random_divisorial_point(&mut rng, &cfg);
        let bs = p1tree::branch_slopes(&cfg, &f, &q).unwrap();
        assert_eq!(bs.total(), 0, "branch slopes at {q:?}");
        checked += 1;
    }
    println!("criterion 07 PASS: zero-sum branch slopes on {checked} balanced functions");
}

/// Criterion 8: retraction laws on random graphs.
#[test]
fn criterion_08_retraction_laws() {
    let mut rng = StdRng::seed_from_u64(88);
    let zero = Ranger::zero(2);
    for round in 0..100 {
        let rg = random_skeleton_tree(&mut rng, 2);
        let g = &rg.graph;
        assert!(g.validate().is_valid(), "round {round}");
        for &v in &rg.skeleton_vertices {
            assert_eq!(
                g.dist_to_skeleton(&GraphPoint::AtVertex(v)).unwrap(),
                zero
            );
        }
        // sample points: all vertices plus interior points of finite edges
        let mut points: Vec<GraphPoint> = (0..g.vertices().len())
            .map(|i| GraphPoint::AtVertex(VertexId(i)))
            .collect();
        for (i, e) in g.edges().iter().enumerate() {
            if let adic_core::gammagraph::EdgeLength::Finite(len) = &e.length {
                points.push(GraphPoint::OnEdge {
                    edge: adic_core::gammagraph::EdgeId(i),
                    offset: Ranger::from_elem(&len.scale(&rat(1, 2))),
                });
                points.push(GraphPoint::OnEdge {
                    edge: adic_core::gammagraph::EdgeId(i),
                    offset: Ranger::successor(&len.scale(&rat(1, 4)), Sign::Pos),
                });
            }
        }
        let params: Vec<Ranger> = (0..4).map(|_| random_parameter(&mut rng, 2)).collect();
        for x in &points {
            let dist = g.dist_to_skeleton(x).unwrap();
            if dist == zero {
                for t in &params {
                    assert_eq!(g.retract(t, x).unwrap(), *x, "identity on the skeleton");
                }
                continue;
            }
            for t in &params {
                let once = g.retract(t, x).unwrap();
                // idempotence
                assert_eq!(g.retract(t, &once).unwrap(), once);
                // the distance after retraction is the clamped parameter
                let d_once = g.dist_to_skeleton(&once).unwrap();
                assert_eq!(d_once, t.clone().min(dist.clone()));
                assert!(d_once <= dist, "monotone along the hanging path");
                // semigroup law
                for t2 in &params {
                    let lhs = g.retract(t2, &once).unwrap();
                    let rhs = g.retract(&t.clone().min(t2.clone()), x).unwrap();
                    assert_eq!(lhs, rhs, "semigroup at {x:?}");
                }
            }
        }
    }
    println!("criterion 08 PASS: retraction laws on 100 random graphs");
}

/// Criterion 9: the quotient metric is the orbit minimum.
#[test]
fn criterion_09_quotient_metric() {
    let mut rng = StdRng::seed_from_u64(99);
    for round in 0..40 {
        let (g, gens, root) = symmetric_tree(&mut rng, 2);
        assert!(g.is_tree());
        let q = g.quotient(&gens, Some(root)).unwrap();
        assert!(q.group_order <= 6, "round {round}");
        let group = close_permutations(
            q.source.vertices().len(),
            q.source.edges().len(),
            &gens,
        );
        assert_eq!(group.len(), q.group_order);
        let n = q.source.vertices().len();
        for u in 0..n {
            for v in 0..n {
                let quotient_d = q
                    .quotient
                    .tree_distance(q.vertex_image[u], q.vertex_image[v])
                    .unwrap();
                let orbit_min = group
                    .iter()
                    .map(|sigma| {
                        q.source
                            .tree_distance(VertexId(u), VertexId(sigma.vertex_map[v]))
                            .unwrap()
                    })
                    .min()
                    .unwrap();
                assert_eq!(quotient_d, orbit_min, "orbit minimum at ({u},{v})");
            }
        }
    }
    println!("criterion 09 PASS: quotient metric equals orbit minimum on 40 trees");
}

/// Exhaustive minimal triangulation search over a candidate pool.
fn exhaustive_minimal(
    cfg: &CenterConfig,
    marked: &[P1Point],
    pool: &[P1Point],
) -> Vec<Vec<P1Point>> {
    let n = pool.len();
    assert!(n <= 14, "pool small enough for exhaustion");
    let mut best: Vec<Vec<P1Point>> = Vec::new();
    let mut best_size = usize::MAX;
    for mask in 0u32..(1 << n) {
        let subset: Vec<P1Point> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| pool[i].clone())
            .collect();
        if !marked
            .iter()
            .all(|m| subset.iter().any(|p| point_eq(cfg, p, m)))
        {
            continue;
        }
        if !is_triangulation(cfg, &subset) {
            continue;
        }
        let canon = dedupe_points(cfg, subset);
        match canon.len().cmp(&best_size) {
            Ordering::Less => {
                best_size = canon.len();
                best = vec![canon];
            }
            Ordering::Equal => {
                if !best.contains(&canon) {
                    best.push(canon);
                }
            }
            Ordering::Greater => {}
        }
    }
    best
}

/// Criterion 10: computed triangulations are the exhaustive-search minima,
/// for plain marked sets and for the simultaneous quadratic setup.
#[test]
fn criterion_10_triangulation_minimality() {
    let mut rng = StdRng::seed_from_u64(1010);
    for round in 0..12 {
        let n_centers = rng.gen_range(2..6);
        let cfg = random_ultrametric_config(&mut rng, n_centers, 2);
        let mut marked = vec![random_divisorial_point(&mut rng, &cfg)];
        for c in 0..cfg.len().min(2) {
            marked.push(P1Point::Classical(CenterId(c)));
        }
        if rng.gen_bool(0.5) {
            marked.push(random_divisorial_point(&mut rng, &cfg));
        }
        let computed = p1tree::triangulate(&cfg, &marked).unwrap().vertices;
        // pool: the closure plus some decoys
        let mut pool = computed.clone();
        pool.push(random_divisorial_point(&mut rng, &cfg));
        pool.push(random_divisorial_point(&mut rng, &cfg));
        let pool = dedupe_points(&cfg, meet_closure(&cfg, &pool));
        let minima = exhaustive_minimal(&cfg, &marked, &pool);
        assert_eq!(minima.len(), 1, "unique minimum, round {round}");
        assert_eq!(minima[0], computed, "computed equals the minimum");
    }
    // simultaneous triangulation for the squaring map
    for round in 0..6 {
        let level = elem(&[(-(1 + (round as i64 % 3)), 1), (0, 1)]);
        let source = CenterConfig::new(
            2,
            vec!["0".into(), "c".into(), "mc".into()],
            &[
                (0, 1, level.clone()),
                (0, 2, level.clone()),
                (1, 2, level.clone()),
            ],
        )
        .unwrap();
        let target = CenterConfig::new(
            2,
            vec!["O".into(), "csq".into()],
            &[(0, 1, level.scale_int(2))],
        )
        .unwrap();
        let map = MapData {
            entries: vec![
                MapEntry {
                    base: CenterId(0),
                    factored: FactoredFn::new(GroupElem::zero(2), vec![(CenterId(0), 2)]),
                },
                MapEntry {
                    base: CenterId(1),
                    factored: FactoredFn::new(
                        GroupElem::zero(2),
                        vec![(CenterId(1), 1), (CenterId(2), 1)],
                    ),
                },
            ],
        };
        let w0 = vec![P1Point::Classical(CenterId(1))];
        let v0 = vec![P1Point::divisorial(
            CenterId(0),
            level.scale_int(2).add(&elem(&[(1, 1), (0, 1)])),
        )];
        let (w, v) =
            p1tree::simultaneous_triangulation(&source, &target, &map, &v0, &w0).unwrap();
        assert!(is_triangulation(&target, &v));
        assert!(is_triangulation(&source, &w));
        // exhaustive search over an enriched pool
        let mut base_marks = v0.clone();
        for p in &w0 {
            base_marks.push(p1tree::pushforward_point(&source, &target, &map, p).unwrap());
        }
        let mut pool = meet_closure(&target, &base_marks);
        for _ in 0..3 {
            let mut source_pts = Vec::new();
            for p in &pool {
                source_pts.extend(p1tree::fiber(&source, &target, &map, p).unwrap());
            }
            let source_closed = meet_closure(&source, &source_pts);
            for sp in &source_closed {
                pool.push(p1tree::pushforward_point(&source, &target, &map, sp).unwrap());
            }
            pool = dedupe_points(&target, meet_closure(&target, &pool));
        }
        let n = pool.len();
        assert!(n <= 12, "pool of size {n}");
        let mut best: Option<Vec<P1Point>> = None;
        for mask in 0u32..(1 << n) {
            let subset: Vec<P1Point> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| pool[i].clone())
                .collect();
            if !base_marks
                .iter()
                .all(|m| subset.iter().any(|p| point_eq(&target, p, m)))
            {
                continue;
            }
            if !is_triangulation(&target, &subset) {
                continue;
            }
            let mut preimage = Vec::new();
            let mut ok = true;
            for p in &subset {
                match p1tree::fiber(&source, &target, &map, p) {
                    Ok(f) => preimage.extend(f),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok || !is_triangulation(&source, &preimage) {
                continue;
            }
            let canon = dedupe_points(&target, subset);
            match &best {
                None => best = Some(canon),
                Some(b) if canon.len() < b.len() => best = Some(canon),
                _ => {}
            }
        }
        let best = best.expect("search finds a simultaneous triangulation");
        assert_eq!(best.len(), v.len(), "minimal size, round {round}");
        assert_eq!(best, v, "computed pair is the minimum");
        let mut expected_w = Vec::new();
        for p in &v {
            expected_w.extend(p1tree::fiber(&source, &target, &map, p).unwrap());
        }
        assert_eq!(dedupe_points(&source, expected_w), w);
    }
    println!("criterion 10 PASS: triangulation minimality, plain and simultaneous");
}

/// Criterion 11: the finite topological oracle on ranger completions.
#[test]
fn criterion_11_quasi_tree_oracle() {
    use adic_core::quasitop::{check_quasi_tree, hausdorff_quotient, ranger_complete};
    let start = Instant::now();
    for k in 1..=6usize {
        let names: Vec<String> = (0..k).map(|i| format!("s{i}")).collect();
        let sp = ranger_complete(&names);
        assert_eq!(sp.len(), 2 * k + 1);
        let report = check_quasi_tree(&sp, 16).unwrap();
        assert!(report.passes(), "completion of size {k}: {report:?}");
        // closure of every open point is itself with its two neighbours
        for x in 0..sp.len() {
            if sp.is_closed_point(x) {
                continue;
            }
            let cl = sp.closure_of(x);
            assert_eq!(cl.len(), 3, "closure of {}", sp.name(x));
            assert!(cl.contains(&(x - 1)) && cl.contains(&(x + 1)));
        }
        // quotient fibers are connected
        let (q, fibers) = hausdorff_quotient(&sp).unwrap();
        assert_eq!(q.len(), if k == 1 { 1 } else { 2 * k - 1 });
        for fiber in &fibers {
            let set = fiber.iter().copied().collect();
            assert!(sp.is_connected_subset(&set), "fiber {fiber:?}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "budget exceeded: {elapsed:?}");
    println!("criterion 11 PASS: completions up to 6 points in {elapsed:?}");
}

/// The tails available to the grid are exactly decidable; a sanity pin of
/// the quadratic arithmetic the grid relies on.
#[test]
fn quadratic_tails_are_exact() {
    let r2 = QuadIrr::sqrt(2).unwrap();
    let r3 = QuadIrr::sqrt(3).unwrap();
    assert_eq!(r2.cmp_quad(&r3), Ordering::Less);
    assert_eq!(
        r2.cmp_rat(&Rat::new(BigInt::from(141421356), BigInt::from(100000000))),
        Ordering::Greater
    );
    assert_eq!(
        r2.cmp_rat(&Rat::new(BigInt::from(141421357), BigInt::from(100000000))),
        Ordering::Less
    );
    let c2 = Ranger::cut(1, vec![], CutTail::Quad(r2)).unwrap();
    let c3 = Ranger::cut(1, vec![], CutTail::Quad(r3)).unwrap();
    assert!(c2 < c3);
}
