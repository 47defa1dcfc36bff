//! Shared generators for the integration and acceptance suites. All
//! randomness is seeded, so every run is deterministic.
// not every test target uses every generator
#![allow(dead_code)]

use adic_core::gammagraph::{
    Edge, EdgeLength, GammaGraph, GraphPermutation, Skeleton, Vertex, VertexId, VertexKind,
};
use adic_core::ordgroup::Rat;
use adic_core::p1tree::{CenterConfig, FactoredFn, P1Point};
use adic_core::ranger::{CutTail, QuadIrr};
use adic_core::{GroupElem, Ranger, Sign};
use num_bigint::BigInt;
use rand::rngs::StdRng;
use rand::Rng;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn elem(coords: &[(i64, i64)]) -> GroupElem {
    GroupElem::new(coords.iter().map(|&(n, d)| rat(n, d)).collect())
}

/// Grid coordinates used by the exhaustive order tests.
pub fn grid_coords() -> Vec<Rat> {
    vec![rat(-1, 1), rat(0, 1), rat(1, 2), rat(1, 1)]
}

/// Every ranger of rank `h` with prefix coordinates from the grid and
/// tails among the two infinities, sqrt(2) and sqrt(3).
pub fn ranger_grid(h: usize) -> Vec<Ranger> {
    let coords = grid_coords();
    let mut tuples: Vec<Vec<Rat>> = vec![vec![]];
    let mut by_len: Vec<Vec<Vec<Rat>>> = vec![tuples.clone()];
    for _ in 0..h {
        let mut next = Vec::new();
        for t in &tuples {
            for c in &coords {
                let mut v = t.clone();
                v.push(c.clone());
                next.push(v);
            }
        }
        tuples = next;
        by_len.push(tuples.clone());
    }
    let mut out = Vec::new();
    out.push(Ranger::unbounded(h, Sign::Neg));
    out.push(Ranger::unbounded(h, Sign::Pos));
    for full in &by_len[h] {
        out.push(Ranger::principal(full.clone()));
        out.push(Ranger::infinitesimal(full.clone(), Sign::Neg));
        out.push(Ranger::infinitesimal(full.clone(), Sign::Pos));
    }
    for n in 1..=h {
        for prefix in &by_len[n - 1] {
            for d in [2u64, 3] {
                out.push(
                    Ranger::cut(h, prefix.clone(), CutTail::Quad(QuadIrr::sqrt(d).unwrap()))
                        .unwrap(),
                );
            }
            if n >= 2 {
                out.push(Ranger::cut(h, prefix.clone(), CutTail::NegInf).unwrap());
                out.push(Ranger::cut(h, prefix.clone(), CutTail::PosInf).unwrap());
            }
        }
    }
    out
}

pub fn random_rat(rng: &mut StdRng) -> Rat {
    rat(rng.gen_range(-12..13), rng.gen_range(1..5))
}

pub fn random_elem(rng: &mut StdRng, rank: usize) -> GroupElem {
    GroupElem::new((0..rank).map(|_| random_rat(rng)).collect())
}

pub fn random_positive_elem(rng: &mut StdRng, rank: usize) -> GroupElem {
    loop {
        let e = random_elem(rng, rank);
        if e.is_positive() {
            return e;
        }
    }
}

/// A random ultrametric configuration built by recursive splitting: the
/// construction is the oracle, every produced matrix is ultrametric.
pub fn random_ultrametric_config(rng: &mut StdRng, n: usize, rank: usize) -> CenterConfig {
    let labels: Vec<String> = (0..n).map(|i| format!("c{i:02}")).collect();
    let mut pairs: Vec<(usize, usize, GroupElem)> = Vec::new();
    let top = random_elem(rng, rank);
    let ids: Vec<usize> = (0..n).collect();
    split(rng, &ids, &top, rank, &mut pairs);
    CenterConfig::new(rank, labels, &pairs).expect("generated configuration")
}

fn split(
    rng: &mut StdRng,
    ids: &[usize],
    level: &GroupElem,
    rank: usize,
    pairs: &mut Vec<(usize, usize, GroupElem)>,
) {
    if ids.len() <= 1 {
        return;
    }
    // split into two nonempty halves; all cross distances sit at `level`
    let cut = rng.gen_range(1..ids.len());
    let (left, right) = ids.split_at(cut);
    for &a in left {
        for &b in right {
            pairs.push((a, b, level.clone()));
        }
    }
    for part in [left, right] {
        let drop = random_positive_elem(rng, rank);
        let lower = level.sub(&drop);
        split(rng, part, &lower, rank, pairs);
    }
}

pub fn random_factored(rng: &mut StdRng, config: &CenterConfig, balanced: bool) -> FactoredFn {
    let n = config.len();
    let count = rng.gen_range(1..=n.min(4));
    let mut factors: Vec<(adic_core::p1tree::CenterId, i64)> = (0..count)
        .map(|_| {
            (
                adic_core::p1tree::CenterId(rng.gen_range(0..n)),
                rng.gen_range(1..4) * if rng.gen_bool(0.5) { 1 } else { -1 },
            )
        })
        .collect();
    if balanced {
        let total: i64 = factors.iter().map(|(_, m)| m).sum();
        if total != 0 {
            factors.push((
                adic_core::p1tree::CenterId(rng.gen_range(0..n)),
                -total,
            ));
        }
    }
    FactoredFn::new(random_elem(rng, config.rank()), factors)
}

pub fn random_divisorial_point(rng: &mut StdRng, config: &CenterConfig) -> P1Point {
    let c = adic_core::p1tree::CenterId(rng.gen_range(0..config.len()));
    P1Point::divisorial(c, random_elem(rng, config.rank()))
}

/// A random tree with a connected skeleton subtree and optional classical
/// leaves hanging on infinite edges.
pub struct RandomGraph {
    pub graph: GammaGraph,
    pub skeleton_vertices: Vec<VertexId>,
}

pub fn random_skeleton_tree(rng: &mut StdRng, rank: usize) -> RandomGraph {
    let n = rng.gen_range(3..9usize);
    let mut vertices: Vec<Vertex> = (0..n)
        .map(|i| Vertex {
            name: format!("v{i}"),
            kind: VertexKind::Divisorial,
        })
        .collect();
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        edges.push(Edge {
            a: VertexId(parent),
            b: VertexId(i),
            length: EdgeLength::Finite(random_positive_elem(rng, rank)),
        });
    }
    // skeleton: a connected subtree grown from the root
    let mut in_skel = vec![false; n];
    in_skel[0] = true;
    let skel_size = rng.gen_range(1..=n);
    let mut count = 1;
    while count < skel_size {
        // add a vertex whose tree parent is already in
        let candidates: Vec<usize> = (1..n)
            .filter(|&i| {
                !in_skel[i]
                    && edges
                        .iter()
                        .any(|e| e.b == VertexId(i) && in_skel[e.a.0])
            })
            .collect();
        let Some(&pick) = candidates.get(rng.gen_range(0..candidates.len().max(1)).min(candidates.len().saturating_sub(1))) else {
            break;
        };
        in_skel[pick] = true;
        count += 1;
    }
    let skel_vertices: Vec<VertexId> = (0..n).filter(|&i| in_skel[i]).map(VertexId).collect();
    let skel_edges = edges
        .iter()
        .enumerate()
        .filter(|(_, e)| in_skel[e.a.0] && in_skel[e.b.0])
        .map(|(i, _)| adic_core::gammagraph::EdgeId(i))
        .collect();
    // sometimes hang a classical leaf on an infinite edge
    if rng.gen_bool(0.4) {
        let at = rng.gen_range(0..n);
        let leaf = vertices.len();
        vertices.push(Vertex {
            name: format!("cl{leaf}"),
            kind: VertexKind::ClassicalLeaf,
        });
        edges.push(Edge {
            a: VertexId(at),
            b: VertexId(leaf),
            length: EdgeLength::Infinite,
        });
    }
    let graph = GammaGraph::new(rank, vertices, edges).with_skeleton(Skeleton {
        vertices: skel_vertices.iter().copied().collect(),
        edges: skel_edges,
        stubs: Vec::new(),
    });
    RandomGraph {
        graph,
        skeleton_vertices: skel_vertices,
    }
}

/// A random nonnegative deformation parameter of mixed ranger class.
pub fn random_parameter(rng: &mut StdRng, rank: usize) -> Ranger {
    match rng.gen_range(0..5) {
        0 => Ranger::from_elem(&random_positive_elem(rng, rank)),
        1 => Ranger::zero(rank),
        2 => Ranger::successor(&random_positive_elem(rng, rank), Sign::Pos),
        3 => {
            let mut prefix = vec![rat(rng.gen_range(0..4), 1)];
            prefix[0] = &prefix[0] + rat(1, 1);
            Ranger::cut(rank, prefix, CutTail::PosInf).unwrap()
        }
        _ => Ranger::unbounded(rank, Sign::Pos),
    }
}

/// A tree made symmetric by construction: a root with an asymmetric side
/// branch and `k` identical copies of a random arm, cycled by the
/// returned generator.
pub fn symmetric_tree(
    rng: &mut StdRng,
    rank: usize,
) -> (GammaGraph, Vec<GraphPermutation>, VertexId) {
    let k = rng.gen_range(2..=3usize);
    let arm_len = rng.gen_range(1..=2usize);
    let arm_lengths: Vec<GroupElem> =
        (0..arm_len).map(|_| random_positive_elem(rng, rank)).collect();
    let mut vertices = vec![Vertex {
        name: "root".into(),
        kind: VertexKind::Divisorial,
    }];
    let mut edges: Vec<Edge> = Vec::new();
    // asymmetric side branch
    vertices.push(Vertex {
        name: "side".into(),
        kind: VertexKind::Divisorial,
    });
    edges.push(Edge {
        a: VertexId(0),
        b: VertexId(1),
        length: EdgeLength::Finite(random_positive_elem(rng, rank)),
    });
    // k copies of the arm
    let mut copies: Vec<Vec<usize>> = Vec::new();
    for c in 0..k {
        let mut chain = Vec::new();
        let mut prev = 0usize;
        for (d, len) in arm_lengths.iter().enumerate() {
            let id = vertices.len();
            vertices.push(Vertex {
                name: format!("arm{c}_{d}"),
                kind: VertexKind::Divisorial,
            });
            edges.push(Edge {
                a: VertexId(prev),
                b: VertexId(id),
                length: EdgeLength::Finite(len.clone()),
            });
            chain.push(id);
            prev = id;
        }
        copies.push(chain);
    }
    let n = vertices.len();
    let m = edges.len();
    // rotation of the copies
    let mut vertex_map: Vec<usize> = (0..n).collect();
    for c in 0..k {
        let next = (c + 1) % k;
        for (d, &v) in copies[c].iter().enumerate() {
            vertex_map[v] = copies[next][d];
        }
    }
    let mut edge_map: Vec<usize> = (0..m).collect();
    for (i, e) in edges.iter().enumerate() {
        let (ia, ib) = (vertex_map[e.a.0], vertex_map[e.b.0]);
        edge_map[i] = edges
            .iter()
            .position(|f| (f.a.0 == ia && f.b.0 == ib) || (f.a.0 == ib && f.b.0 == ia))
            .expect("rotation preserves edges");
    }
    let graph = GammaGraph::new(rank, vertices, edges);
    (
        graph,
        vec![GraphPermutation {
            vertex_map,
            edge_map,
        }],
        VertexId(0),
    )
}

/// Closure of a permutation set under composition, identity included.
pub fn close_permutations(
    n_vertices: usize,
    n_edges: usize,
    generators: &[GraphPermutation],
) -> Vec<GraphPermutation> {
    let identity = GraphPermutation {
        vertex_map: (0..n_vertices).collect(),
        edge_map: (0..n_edges).collect(),
    };
    let mut group = vec![identity];
    let mut frontier = group.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for f in &frontier {
            for g in generators {
                let composed = GraphPermutation {
                    vertex_map: f.vertex_map.iter().map(|&v| g.vertex_map[v]).collect(),
                    edge_map: f.edge_map.iter().map(|&e| g.edge_map[e]).collect(),
                };
                if !group.contains(&composed) && !next.contains(&composed) {
                    next.push(composed);
                }
            }
        }
        group.extend(next.iter().cloned());
        frontier = next;
        assert!(group.len() <= 64, "test groups stay small");
    }
    group
}
