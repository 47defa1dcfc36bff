//! Finite-rank divisible ordered groups `Q^h` with the lexicographic order,
//! an optional distinguished lattice, scales, and the spectrum of the
//! positive cone.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CoreError;

/// Exact rational scalar used throughout the crate.
pub type Rat = BigRational;

/// Parses a rational from `"p"` or `"p/q"` form.
pub fn rat_from_str(s: &str) -> Result<Rat, CoreError> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| CoreError::Parse(format!("invalid rational numerator {s:?}")))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| CoreError::Parse(format!("invalid rational denominator {s:?}")))?;
    if d.is_zero() {
        return Err(CoreError::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rat::new(n, d))
}

/// Renders a rational in lowest terms, omitting `/1`.
pub fn rat_to_string(q: &Rat) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub(crate) fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// An element of `Q^h`, compared lexicographically.
///
/// The natural `Ord` on coordinate vectors of equal length is exactly the
/// lexicographic group order; elements of different ranks order by rank
/// first so that `Ord` stays lawful on mixed collections.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GroupElem {
    coords: Vec<Rat>,
}

impl GroupElem {
    pub fn new(coords: Vec<Rat>) -> Self {
        GroupElem { coords }
    }

    pub fn from_ints(coords: &[i64]) -> Self {
        GroupElem::new(coords.iter().map(|&c| rat(c, 1)).collect())
    }

    pub fn zero(rank: usize) -> Self {
        GroupElem::new(vec![Rat::zero(); rank])
    }

    pub fn rank(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &Rat {
        &self.coords[i]
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(Rat::is_zero)
    }

    pub fn is_positive(&self) -> bool {
        *self > GroupElem::zero(self.rank())
    }

    pub fn neg(&self) -> GroupElem {
        GroupElem::new(self.coords.iter().map(|c| -c).collect())
    }

    pub fn add(&self, other: &GroupElem) -> GroupElem {
        assert_eq!(self.rank(), other.rank(), "rank mismatch in GroupElem::add");
        GroupElem::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &GroupElem) -> GroupElem {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &Rat) -> GroupElem {
        GroupElem::new(self.coords.iter().map(|c| c * s).collect())
    }

    pub fn scale_int(&self, n: i64) -> GroupElem {
        self.scale(&rat(n, 1))
    }

    /// Truncation to the first `j` coordinates.
    pub fn truncate(&self, j: usize) -> GroupElem {
        assert!(j <= self.rank());
        GroupElem::new(self.coords[..j].to_vec())
    }

    /// `max(a-b, b-a)`, the lexicographic absolute difference.
    pub fn abs_diff(&self, other: &GroupElem) -> GroupElem {
        let d = self.sub(other);
        if d.is_positive() {
            d
        } else {
            d.neg()
        }
    }
}

impl PartialOrd for GroupElem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroupElem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank()
            .cmp(&other.rank())
            .then_with(|| self.coords.cmp(&other.coords))
    }
}

impl fmt::Debug for GroupElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self)
    }
}

impl fmt::Display for GroupElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(rat_to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl Serialize for GroupElem {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let strings: Vec<String> = self.coords.iter().map(rat_to_string).collect();
        strings.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GroupElem {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let strings = Vec::<String>::deserialize(deserializer)?;
        let coords = strings
            .iter()
            .map(|s| rat_from_str(s).map_err(|e| D::Error::custom(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GroupElem::new(coords))
    }
}

/// Scale index of a positive element: 1-based position of the first nonzero
/// coordinate, 1 being the largest scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScaleIndex(pub usize);

/// The ambient group `Q^h` together with an optional lattice (defaults
/// to `Z^h`). The lattice only enters through `n_r`-style integrality
/// questions; the order structure is always that of `Q^h`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    rank: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    lattice: Option<Vec<GroupElem>>,
}

impl Group {
    pub fn new(rank: usize) -> Result<Self, CoreError> {
        if rank == 0 {
            return Err(CoreError::Structural("group rank must be at least 1".into()));
        }
        Ok(Group { rank, lattice: None })
    }

    pub fn with_lattice(rank: usize, basis: Vec<GroupElem>) -> Result<Self, CoreError> {
        let mut g = Group::new(rank)?;
        if basis.len() != rank {
            return Err(CoreError::Structural(format!(
                "lattice basis has {} vectors, expected {}",
                basis.len(),
                rank
            )));
        }
        for v in &basis {
            if v.rank() != rank {
                return Err(CoreError::Structural("lattice vector rank mismatch".into()));
            }
        }
        if !is_invertible(&basis) {
            return Err(CoreError::Structural(
                "lattice basis vectors are linearly dependent".into(),
            ));
        }
        g.lattice = Some(basis);
        Ok(g)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn lattice(&self) -> Option<&[GroupElem]> {
        self.lattice.as_deref()
    }

    pub fn zero(&self) -> GroupElem {
        GroupElem::zero(self.rank)
    }

    pub fn check_elem(&self, g: &GroupElem) -> Result<(), CoreError> {
        if g.rank() != self.rank {
            Err(CoreError::Structural(format!(
                "element has rank {}, group has rank {}",
                g.rank(),
                self.rank
            )))
        } else {
            Ok(())
        }
    }

    /// Lexicographic comparison; total order, translation invariant.
    pub fn cmp_elems(&self, a: &GroupElem, b: &GroupElem) -> Result<Ordering, CoreError> {
        self.check_elem(a)?;
        self.check_elem(b)?;
        Ok(a.cmp(b))
    }

    /// Index of the first nonzero coordinate of a nonzero element.
    ///
    /// Two positive elements bound each other by integer multiples exactly
    /// when their scale indices agree.
    pub fn scale_index(&self, g: &GroupElem) -> Result<ScaleIndex, CoreError> {
        self.check_elem(g)?;
        g.coords()
            .iter()
            .position(|c| !c.is_zero())
            .map(|i| ScaleIndex(i + 1))
            .ok_or_else(|| CoreError::Domain("scale index of the zero element".into()))
    }

    /// The full specialization chain of `Spec` of the positive cone:
    /// `h + 1` points, generic first, closed point last.
    pub fn spec_points(&self) -> Vec<SpecPoint> {
        (0..=self.rank)
            .map(|j| SpecPoint { rank: self.rank, j })
            .collect()
    }

    /// Minimal `n >= 1` with `n * r` in the lattice.
    pub fn lattice_index(&self, r: &GroupElem) -> Result<BigInt, CoreError> {
        self.check_elem(r)?;
        let in_basis = match &self.lattice {
            None => r.coords().to_vec(),
            Some(basis) => solve_in_basis(basis, r)?,
        };
        let mut n = BigInt::one();
        for c in &in_basis {
            n = n.lcm(c.denom());
        }
        Ok(n)
    }
}

/// A point of `Spec` of the positive cone, encoded by the threshold `j`:
/// the prime ideal is the set of nonzero positive elements with scale index
/// at most `j`, and `j = 0` is the generic point (empty ideal).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpecPoint {
    rank: usize,
    j: usize,
}

impl SpecPoint {
    pub fn new(rank: usize, j: usize) -> Result<Self, CoreError> {
        if j > rank {
            return Err(CoreError::Structural(format!(
                "spec point threshold {j} exceeds rank {rank}"
            )));
        }
        Ok(SpecPoint { rank, j })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn threshold(&self) -> usize {
        self.j
    }

    pub fn is_generic(&self) -> bool {
        self.j == 0
    }

    pub fn is_closed(&self) -> bool {
        self.j == self.rank
    }

    /// Scale attached to the immediate specialization pair `(j-1, j)`.
    pub fn scale(&self) -> Option<ScaleIndex> {
        if self.j == 0 {
            None
        } else {
            Some(ScaleIndex(self.j))
        }
    }

    /// Membership in the prime ideal `p_j`.
    pub fn ideal_contains(&self, group: &Group, g: &GroupElem) -> Result<bool, CoreError> {
        group.check_elem(g)?;
        if g.is_zero() || !g.is_positive() {
            return Ok(false);
        }
        let ScaleIndex(s) = group.scale_index(g)?;
        Ok(s <= self.j)
    }

    /// Membership in the convex subgroup `H_j` (first `j` coordinates zero).
    pub fn convex_subgroup_contains(&self, g: &GroupElem) -> bool {
        g.coords()[..self.j.min(g.rank())]
            .iter()
            .all(Rat::is_zero)
    }

    /// `a` specializes to `b` exactly when the ideal grows.
    pub fn specializes_to(&self, other: &SpecPoint) -> bool {
        self.rank == other.rank && self.j <= other.j
    }
}

fn is_invertible(basis: &[GroupElem]) -> bool {
    let n = basis.len();
    let mut m: Vec<Vec<Rat>> = basis.iter().map(|v| v.coords().to_vec()).collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero());
        let Some(p) = pivot else { return false };
        m.swap(col, p);
        let inv = m[col][col].clone();
        let pivot_row = m[col].clone();
        for row in m.iter_mut().skip(col + 1) {
            if row[col].is_zero() {
                continue;
            }
            let factor = &row[col] / &inv;
            for (c, entry) in row.iter_mut().enumerate().skip(col) {
                let delta = &factor * &pivot_row[c];
                *entry = &*entry - delta;
            }
        }
    }
    true
}

/// Expresses `r` in the given basis by Gaussian elimination.
fn solve_in_basis(basis: &[GroupElem], r: &GroupElem) -> Result<Vec<Rat>, CoreError> {
    let n = basis.len();
    // Columns are the basis vectors, last column is r.
    let mut m: Vec<Vec<Rat>> = (0..n)
        .map(|row| {
            let mut v: Vec<Rat> = basis.iter().map(|b| b.coord(row).clone()).collect();
            v.push(r.coord(row).clone());
            v
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&row| !m[row][col].is_zero());
        let Some(p) = pivot else {
            return Err(CoreError::Structural(
                "lattice basis vectors are linearly dependent".into(),
            ));
        };
        m.swap(col, p);
        let inv = m[col][col].clone();
        for entry in m[col].iter_mut().skip(col) {
            *entry = &*entry / &inv;
        }
        let pivot_row = m[col].clone();
        for (row, r) in m.iter_mut().enumerate() {
            if row != col && !r[col].is_zero() {
                let factor = r[col].clone();
                for (c, entry) in r.iter_mut().enumerate().skip(col) {
                    let delta = &factor * &pivot_row[c];
                    *entry = &*entry - delta;
                }
            }
        }
    }
    Ok((0..n).map(|row| m[row][n].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    fn elem(coords: &[(i64, i64)]) -> GroupElem {
        GroupElem::new(coords.iter().map(|&(n, d)| rat(n, d)).collect())
    }

    #[test]
    fn lex_comparison() {
        let g = Group::new(2).unwrap();
        let a = elem(&[(1, 1), (0, 1)]);
        let b = elem(&[(0, 1), (5, 1)]);
        assert_eq!(g.cmp_elems(&a, &b).unwrap(), Ordering::Greater);
        let z = GroupElem::zero(2);
        assert_eq!(g.cmp_elems(&z, &z).unwrap(), Ordering::Equal);
        let c = elem(&[(1, 2), (-7, 1)]);
        let d = elem(&[(1, 2), (-6, 1)]);
        assert_eq!(g.cmp_elems(&c, &d).unwrap(), Ordering::Less);
    }

    #[test]
    fn cmp_rank_mismatch_is_structural() {
        let g = Group::new(2).unwrap();
        let a = GroupElem::from_ints(&[1]);
        let b = GroupElem::from_ints(&[1, 0]);
        assert!(g.cmp_elems(&a, &b).is_err());
    }

    #[test]
    fn scale_index_basics() {
        let g = Group::new(2).unwrap();
        assert_eq!(g.scale_index(&elem(&[(0, 1), (3, 1)])).unwrap(), ScaleIndex(2));
        assert_eq!(g.scale_index(&elem(&[(2, 1), (-7, 1)])).unwrap(), ScaleIndex(1));
        assert!(g.scale_index(&GroupElem::zero(2)).is_err());
    }

    /// Brute-force oracle for the same-scale relation: mutual bounding by
    /// integer multiples, with the search bound 1 + ceil(|a|/|b|) taken
    /// coordinatewise.
    fn bounded_by_multiple(a: &GroupElem, b: &GroupElem) -> bool {
        let bound = a
            .coords()
            .iter()
            .map(|c| c.abs())
            .fold(Rat::zero(), |acc, c| if c > acc { c } else { acc });
        let lead = b
            .coords()
            .iter()
            .find(|c| !c.is_zero())
            .expect("nonzero")
            .abs();
        let n_max = ((bound / lead).ceil().to_integer() + BigInt::from(2))
            .try_into()
            .unwrap_or(64u64);
        (1..=n_max).any(|n| *a < b.scale(&rat(n as i64, 1)))
    }

    #[test]
    fn scale_order_oracle() {
        // (0,1) is of strictly smaller scale than (1,0).
        let small = elem(&[(0, 1), (1, 1)]);
        let large = elem(&[(1, 1), (0, 1)]);
        assert!(bounded_by_multiple(&small, &large));
        assert!(!bounded_by_multiple(&large, &small));
        let g = Group::new(2).unwrap();
        assert!(g.scale_index(&small).unwrap() > g.scale_index(&large).unwrap());
    }

    #[test]
    fn scale_index_homogeneous() {
        let g = Group::new(3).unwrap();
        let x = elem(&[(0, 1), (3, 2), (-1, 1)]);
        for n in 1..6 {
            assert_eq!(
                g.scale_index(&x).unwrap(),
                g.scale_index(&x.scale_int(n)).unwrap()
            );
        }
    }

    #[test]
    fn spec_chain() {
        let g = Group::new(2).unwrap();
        let pts = g.spec_points();
        assert_eq!(pts.len(), 3);
        assert!(pts[0].is_generic());
        assert!(pts[2].is_closed());
        for w in pts.windows(2) {
            assert!(w[0].specializes_to(&w[1]));
            assert!(!w[1].specializes_to(&w[0]));
        }
        let g1 = Group::new(1).unwrap();
        assert_eq!(g1.spec_points().len(), 2);
    }

    #[test]
    fn spec_immediate_specialization_has_scale() {
        let g = Group::new(3).unwrap();
        let pts = g.spec_points();
        // The pair (j=1, j=2) is immediate: nothing strictly between.
        assert!(!pts
            .iter()
            .any(|p| pts[1].specializes_to(p) && p.specializes_to(&pts[2]) && *p != pts[1] && *p != pts[2]));
        assert_eq!(pts[2].scale(), Some(ScaleIndex(2)));
        // Ideal and convex subgroup descriptors are consistent.
        let x = elem(&[(0, 1), (1, 1), (0, 1)]);
        assert!(pts[2].ideal_contains(&g, &x).unwrap());
        assert!(!pts[1].ideal_contains(&g, &x).unwrap());
        assert!(pts[1].convex_subgroup_contains(&x));
        assert!(!pts[2].convex_subgroup_contains(&x));
    }

    #[test]
    fn translation_invariance() {
        let g = Group::new(2).unwrap();
        let samples = [
            elem(&[(0, 1), (0, 1)]),
            elem(&[(1, 2), (3, 1)]),
            elem(&[(-1, 1), (7, 3)]),
            elem(&[(2, 1), (-5, 1)]),
        ];
        for a in &samples {
            for b in &samples {
                for c in &samples {
                    assert_eq!(
                        g.cmp_elems(a, b).unwrap(),
                        g.cmp_elems(&a.add(c), &b.add(c)).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn lattice_index_default() {
        let g = Group::new(2).unwrap();
        assert_eq!(g.lattice_index(&elem(&[(1, 2), (0, 1)])).unwrap(), BigInt::from(2));
        assert_eq!(g.lattice_index(&elem(&[(1, 1), (1, 1)])).unwrap(), BigInt::from(1));
        assert_eq!(g.lattice_index(&elem(&[(1, 3), (1, 2)])).unwrap(), BigInt::from(6));
    }

    #[test]
    fn lattice_index_custom_basis() {
        // Lattice generated by (1/2, 0) and (0, 1): index of (1/4, 1/2) is 4.
        let basis = vec![elem(&[(1, 2), (0, 1)]), elem(&[(0, 1), (1, 1)])];
        let g = Group::with_lattice(2, basis).unwrap();
        assert_eq!(g.lattice_index(&elem(&[(1, 4), (1, 2)])).unwrap(), BigInt::from(2));
    }

    #[test]
    fn dependent_lattice_rejected() {
        let basis = vec![elem(&[(1, 1), (2, 1)]), elem(&[(2, 1), (4, 1)])];
        assert!(Group::with_lattice(2, basis).is_err());
    }

    #[test]
    fn elem_json_round_trip() {
        let x = elem(&[(1, 2), (-7, 1)]);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"["1/2","-7"]"#);
        let back: GroupElem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<GroupElem>(r#"["3/0"]"#).is_err());
    }

    #[test]
    fn group_json_round_trip() {
        let plain = Group::new(2).unwrap();
        assert_eq!(
            serde_json::to_string(&plain).unwrap(),
            r#"{"rank":2}"#
        );
        let basis = vec![elem(&[(1, 2), (0, 1)]), elem(&[(0, 1), (1, 1)])];
        let g = Group::with_lattice(2, basis).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"rank":2,"lattice":[["1/2","0"],["0","1"]]}"#);
        let back: Group = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }
}
