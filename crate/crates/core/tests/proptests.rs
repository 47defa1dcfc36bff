//! Property-based tests for the exact order structures: group order laws,
//! ranger order laws, translation equivariance, and pl function algebra.

mod common;

use std::cmp::Ordering;

use adic_core::plfun::{ExtValue, Pinch, PlFn};
use adic_core::ranger::{CutTail, QuadIrr};
use adic_core::spa::{A1Point, LinElem};
use adic_core::{Group, GroupElem, Ranger, Rat, Sign};
use common::{elem, ranger_grid, rat};
use num_bigint::BigInt;
use proptest::prelude::*;

fn arb_rat() -> impl Strategy<Value = Rat> {
    (-40i64..40, 1i64..12).prop_map(|(n, d)| Rat::new(BigInt::from(n), BigInt::from(d)))
}

fn arb_elem(rank: usize) -> impl Strategy<Value = GroupElem> {
    prop::collection::vec(arb_rat(), rank).prop_map(GroupElem::new)
}

fn arb_ranger(rank: usize) -> impl Strategy<Value = Ranger> {
    prop_oneof![
        prop::collection::vec(arb_rat(), rank).prop_map(Ranger::principal),
        (prop::collection::vec(arb_rat(), rank), prop::bool::ANY).prop_map(|(c, pos)| {
            Ranger::infinitesimal(c, if pos { Sign::Pos } else { Sign::Neg })
        }),
        (
            prop::collection::vec(arb_rat(), 0..rank),
            prop_oneof![
                Just(CutTail::NegInf),
                Just(CutTail::PosInf),
                (arb_rat(), 1i64..5, prop::sample::select(vec![2u64, 3, 5, 7])).prop_map(
                    |(a, b, d)| CutTail::Quad(
                        QuadIrr::new(a, Rat::new(BigInt::from(b), BigInt::from(1)), d).unwrap()
                    )
                ),
            ]
        )
            .prop_map(move |(prefix, tail)| Ranger::cut(rank, prefix, tail).unwrap()),
        prop::bool::ANY.prop_map(move |pos| Ranger::unbounded(
            rank,
            if pos { Sign::Pos } else { Sign::Neg }
        )),
    ]
}

proptest! {
    #[test]
    fn group_order_is_total(a in arb_elem(3), b in arb_elem(3), c in arb_elem(3)) {
        let g = Group::new(3).unwrap();
        let ab = g.cmp_elems(&a, &b).unwrap();
        prop_assert_eq!(g.cmp_elems(&b, &a).unwrap(), ab.reverse());
        if ab != Ordering::Greater && g.cmp_elems(&b, &c).unwrap() != Ordering::Greater {
            prop_assert_ne!(g.cmp_elems(&a, &c).unwrap(), Ordering::Greater);
        }
    }

    #[test]
    fn group_order_translation_invariant(a in arb_elem(2), b in arb_elem(2), c in arb_elem(2)) {
        let g = Group::new(2).unwrap();
        prop_assert_eq!(
            g.cmp_elems(&a, &b).unwrap(),
            g.cmp_elems(&a.add(&c), &b.add(&c)).unwrap()
        );
    }

    #[test]
    fn scale_index_is_homogeneous(a in arb_elem(3), n in 1i64..9) {
        let g = Group::new(3).unwrap();
        if !a.is_zero() {
            prop_assert_eq!(
                g.scale_index(&a).unwrap(),
                g.scale_index(&a.scale_int(n)).unwrap()
            );
        }
    }

    #[test]
    fn ranger_order_antisymmetric(x in arb_ranger(2), y in arb_ranger(2)) {
        prop_assert_eq!(x.cmp(&y), y.cmp(&x).reverse());
    }

    #[test]
    fn ranger_order_transitive(x in arb_ranger(2), y in arb_ranger(2), z in arb_ranger(2)) {
        if x <= y && y <= z {
            prop_assert!(x <= z);
        }
    }

    #[test]
    fn ranger_translation_equivariant(x in arb_ranger(2), y in arb_ranger(2), g in arb_elem(2)) {
        prop_assert_eq!(x.cmp(&y), x.translate(&g).cmp(&y.translate(&g)));
    }

    #[test]
    fn ranger_translation_preserves_class(x in arb_ranger(2), g in arb_elem(2)) {
        let moved = x.translate(&g);
        prop_assert_eq!(
            std::mem::discriminant(&x.classify()),
            std::mem::discriminant(&moved.classify())
        );
        // translation back is the identity
        prop_assert_eq!(moved.translate(&g.neg()), x);
    }

    #[test]
    fn ranger_negation_reverses(x in arb_ranger(2), y in arb_ranger(2)) {
        prop_assert_eq!(x.neg().cmp(&y.neg()), x.cmp(&y).reverse());
        prop_assert_eq!(x.neg().neg(), x);
    }

    #[test]
    fn ranger_json_round_trip(x in arb_ranger(2)) {
        let back = Ranger::from_json(&x.to_json(), 2).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn mu_is_a_metric_on_principals(a in arb_elem(2), b in arb_elem(2), c in arb_elem(2)) {
        use adic_core::ranger::mu;
        let (ra, rb, rc) = (
            Ranger::from_elem(&a),
            Ranger::from_elem(&b),
            Ranger::from_elem(&c),
        );
        let zero = GroupElem::zero(2);
        let dab = mu(&ra, &rb).unwrap();
        prop_assert!(dab >= zero);
        prop_assert_eq!(dab == zero, a == b);
        prop_assert_eq!(&dab, &mu(&rb, &ra).unwrap());
        let dac = mu(&ra, &rc).unwrap();
        let dcb = mu(&rc, &rb).unwrap();
        prop_assert!(dac <= dab.add(&mu(&rb, &rc).unwrap()));
        prop_assert!(dab <= dac.add(&dcb));
    }

    /// Sum of two pl functions evaluates pointwise, at principal and
    /// non-principal points alike.
    #[test]
    fn plfn_addition_is_pointwise(
        s1 in prop::collection::vec(-3i64..4, 3),
        s2 in prop::collection::vec(-3i64..4, 3),
        anchor1 in arb_elem(2),
        anchor2 in arb_elem(2),
        probe_num in 0i64..16,
    ) {
        let dom = (GroupElem::zero(2), elem(&[(4, 1), (0, 1)]));
        let bps = vec![elem(&[(1, 1), (0, 1)]), elem(&[(3, 1), (0, 1)])];
        let f = PlFn::new(dom.clone(), bps.clone(), s1, anchor1, Pinch::default()).unwrap();
        let g = PlFn::new(dom, bps, s2, anchor2, Pinch::default()).unwrap();
        let sum = f.add(&g).unwrap();
        let probes = vec![
            Ranger::from_elem(&GroupElem::new(vec![rat(probe_num, 4), rat(0, 1)])),
            Ranger::successor(&GroupElem::new(vec![rat(probe_num, 4), rat(0, 1)]), Sign::Neg),
        ];
        for r in probes {
            if r < Ranger::zero(2) {
                continue;
            }
            let lhs = sum.eval(&r).unwrap();
            let rhs = f.eval(&r).unwrap().add(&g.eval(&r).unwrap());
            prop_assert_eq!(lhs, rhs);
        }
    }

    /// Composition of strictly monotone maps multiplies dilations away
    /// from corners.
    #[test]
    fn composition_multiplies_dilation(
        inner_slopes in prop::collection::vec(1i64..4, 2),
        outer_slope in 1i64..4,
    ) {
        let dom = (GroupElem::zero(2), elem(&[(2, 1), (0, 1)]));
        let inner = PlFn::new(
            dom.clone(),
            vec![elem(&[(1, 1), (0, 1)])],
            inner_slopes.clone(),
            GroupElem::zero(2),
            Pinch::default(),
        )
        .unwrap();
        let top = inner.value_at(&dom.1).unwrap();
        let outer = PlFn::new(
            (elem(&[(-9, 1), (0, 1)]), top.add(&elem(&[(1, 1), (0, 1)]))),
            vec![],
            vec![outer_slope],
            GroupElem::zero(2),
            Pinch::default(),
        )
        .unwrap();
        let comp = inner.compose(&outer).unwrap();
        prop_assert_eq!(
            comp.slopes().to_vec(),
            inner_slopes.iter().map(|s| s * outer_slope).collect::<Vec<_>>()
        );
    }
}

/// No grid ranger sits strictly between a principal element and its
/// infinitesimal neighbours: the successor is immediate.
#[test]
fn successor_is_an_immediate_neighbour() {
    let grid = ranger_grid(2);
    for x in &grid {
        let Some(e) = x.as_elem() else { continue };
        let up = Ranger::successor(&e, Sign::Pos);
        let down = Ranger::successor(&e, Sign::Neg);
        for other in &grid {
            assert!(
                !(*x < *other && *other < up),
                "{other} sits between {x} and its successor"
            );
            assert!(
                !(down < *other && *other < *x),
                "{other} sits between the predecessor and {x}"
            );
        }
    }
}

/// Rangers over the integer lattice and over the rationals compare
/// identically under the canonical identification.
#[test]
fn lattice_and_divisible_hull_orders_agree() {
    let ints: Vec<GroupElem> = (-2..3)
        .flat_map(|a| (-2..3).map(move |b| GroupElem::from_ints(&[a, b])))
        .collect();
    for a in &ints {
        for b in &ints {
            let scaled_a = a.scale(&rat(1, 3));
            let scaled_b = b.scale(&rat(1, 3));
            assert_eq!(
                Ranger::from_elem(a).cmp(&Ranger::from_elem(b)),
                Ranger::from_elem(&scaled_a).cmp(&Ranger::from_elem(&scaled_b))
            );
        }
    }
}

/// The value group at a non-principal ranger is an honest extension: the
/// radius coefficient never collapses, while principal rangers fold.
#[test]
fn extended_value_group_is_infinite_cyclic_off_the_group() {
    let cut = Ranger::cut(2, vec![rat(1, 2)], CutTail::PosInf).unwrap();
    for m in [-3i64, -1, 1, 2, 5] {
        let v = ExtValue::new(GroupElem::zero(2), m, cut.clone());
        assert_eq!(v.rcoeff(), m, "no collapse at a cut");
        for m2 in [-3i64, -1, 1, 2, 5] {
            let w = ExtValue::new(GroupElem::zero(2), m2, cut.clone());
            assert_eq!(v == w, m == m2);
        }
    }
    let principal = Ranger::from_elem(&elem(&[(1, 2), (0, 1)]));
    let folded = ExtValue::new(GroupElem::zero(2), 2, principal);
    assert_eq!(folded.rcoeff(), 0);
    assert_eq!(*folded.base(), elem(&[(1, 1), (0, 1)]));
}

/// The closed fiber of the affine line is in order-preserving bijection
/// with the ranger compactification: the rational-domain membership
/// pattern recovers the ranger order exactly on the grid.
#[test]
fn closed_fiber_membership_recovers_the_order() {
    let group = Group::new(2).unwrap();
    let grid = ranger_grid(2);
    // thresholds: gamma grid refined enough to separate grid rangers
    let mut gammas = Vec::new();
    for a in [-2i64, -1, 0, 1, 2] {
        for b in [-2i64, 0, 2] {
            gammas.push(GroupElem::new(vec![rat(a, 2), rat(b, 1)]));
        }
    }
    let member = |r: &Ranger, gamma: &GroupElem| {
        A1Point::closed(&group, r.clone())
            .unwrap()
            .member(&LinElem::new(gamma.neg(), 1))
    };
    for x in &grid {
        for y in &grid {
            if x <= y {
                // membership in { v(t - gamma) >= 0 } is upward closed
                for gamma in &gammas {
                    if member(x, gamma) {
                        assert!(member(y, gamma), "upward closure at {gamma}");
                    }
                }
            }
        }
    }
}
