//! The ranger compactification of `Q^h` with the lexicographic order.
//!
//! A ranger adjoins one element to the ordered group; the classes are
//! unbounded endpoints, principal (divisorial) elements, cuts, and
//! infinitesimal neighbours of principal elements. Rangers of rank `h` are
//! modelled as sequences `(r_1..r_n)` with `n <= h + 1`, rational entries
//! before position `n`, and a final entry that is irrational, `+inf` or
//! `-inf`. Symmetric-cut tails are restricted to quadratic irrationals so
//! that every comparison is exactly decidable.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::ordgroup::{rat_from_str, rat_to_string, GroupElem, Rat};
use crate::CoreError;

/// Sign marker for infinitesimal and unbounded rangers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Neg,
    Pos,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Neg => Sign::Pos,
            Sign::Pos => Sign::Neg,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Sign::Neg => "-",
            Sign::Pos => "+",
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_str().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "+" => Ok(Sign::Pos),
            "-" => Ok(Sign::Neg),
            other => Err(serde::de::Error::custom(format!("invalid sign {other:?}"))),
        }
    }
}

/// `a + b*sqrt(d)` with `b != 0` and `d` squarefree, hence irrational.
/// Sign against any rational, and against any other quadratic irrational,
/// is decided exactly by squaring.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadIrr {
    a: Rat,
    b: Rat,
    d: u64,
}

impl QuadIrr {
    /// Builds `a + b*sqrt(d)`, extracting square factors from `d`.
    pub fn new(a: Rat, b: Rat, d: u64) -> Result<Self, CoreError> {
        if b.is_zero() {
            return Err(CoreError::Structural(
                "quadratic irrational requires b != 0".into(),
            ));
        }
        let (square, free) = split_square(d);
        if free <= 1 {
            return Err(CoreError::Structural(format!(
                "sqrt({d}) is rational; use a principal entry instead"
            )));
        }
        let b = b * Rat::from(BigInt::from(square));
        Ok(QuadIrr { a, b, d: free })
    }

    pub fn sqrt(d: u64) -> Result<Self, CoreError> {
        QuadIrr::new(Rat::zero(), Rat::from(BigInt::from(1)), d)
    }

    pub fn parts(&self) -> (&Rat, &Rat, u64) {
        (&self.a, &self.b, self.d)
    }

    pub fn add_rat(&self, q: &Rat) -> QuadIrr {
        QuadIrr {
            a: &self.a + q,
            b: self.b.clone(),
            d: self.d,
        }
    }

    pub fn neg(&self) -> QuadIrr {
        QuadIrr {
            a: -&self.a,
            b: -&self.b,
            d: self.d,
        }
    }

    pub fn scale(&self, q: &Rat) -> QuadIrr {
        assert!(!q.is_zero(), "scaling a quadratic irrational by zero");
        QuadIrr {
            a: &self.a * q,
            b: &self.b * q,
            d: self.d,
        }
    }

    /// Exact sign of `a + b*sqrt(d)`.
    pub fn sign(&self) -> Ordering {
        sign_plus_root(&self.a, &self.b, self.d)
    }

    /// Exact comparison with a rational.
    pub fn cmp_rat(&self, q: &Rat) -> Ordering {
        sign_plus_root(&(&self.a - q), &self.b, self.d)
    }

    /// Exact comparison with another quadratic irrational.
    pub fn cmp_quad(&self, other: &QuadIrr) -> Ordering {
        if self.d == other.d {
            let db = &self.b - &other.b;
            if db.is_zero() {
                return self.a.cmp(&other.a);
            }
            return sign_plus_root(&(&self.a - &other.a), &db, self.d);
        }
        // Compare L = (a - a') + b*sqrt(d) with R = b'*sqrt(d').
        let p = &self.a - &other.a;
        let sl = sign_plus_root(&p, &self.b, self.d);
        let sr = other.b.cmp(&Rat::zero());
        match (sl, sr) {
            (Ordering::Equal, _) => sr.reverse(),
            (_, Ordering::Equal) => sl,
            (Ordering::Greater, Ordering::Less) => Ordering::Greater,
            (Ordering::Less, Ordering::Greater) => Ordering::Less,
            (Ordering::Greater, Ordering::Greater) => {
                // Both positive: compare squares. L^2 = (p^2 + b^2 d) + 2pb sqrt(d).
                let l2_rat = &p * &p + &self.b * &self.b * Rat::from(BigInt::from(self.d));
                let l2_irr = Rat::from(BigInt::from(2)) * &p * &self.b;
                let r2 = &other.b * &other.b * Rat::from(BigInt::from(other.d));
                sign_plus_root(&(l2_rat - r2), &l2_irr, self.d)
            }
            (Ordering::Less, Ordering::Less) => {
                let l2_rat = &p * &p + &self.b * &self.b * Rat::from(BigInt::from(self.d));
                let l2_irr = Rat::from(BigInt::from(2)) * &p * &self.b;
                let r2 = &other.b * &other.b * Rat::from(BigInt::from(other.d));
                sign_plus_root(&(l2_rat - r2), &l2_irr, self.d).reverse()
            }
        }
    }
}

impl fmt::Display for QuadIrr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}+{}*sqrt({})",
            rat_to_string(&self.a),
            rat_to_string(&self.b),
            self.d
        )
    }
}

/// Sign of `p + q*sqrt(d)` with `d` squarefree (may have `q = 0`).
fn sign_plus_root(p: &Rat, q: &Rat, d: u64) -> Ordering {
    if q.is_zero() {
        return p.cmp(&Rat::zero());
    }
    let sp = p.cmp(&Rat::zero());
    let sq = q.cmp(&Rat::zero());
    if sp == sq || sp == Ordering::Equal {
        return sq;
    }
    // p and q have strictly opposite signs: compare p^2 with q^2 d.
    let lhs = p * p;
    let rhs = q * q * Rat::from(BigInt::from(d));
    match sp {
        Ordering::Greater => lhs.cmp(&rhs),
        Ordering::Less => rhs.cmp(&lhs),
        Ordering::Equal => unreachable!(),
    }
}

fn split_square(d: u64) -> (u64, u64) {
    let mut square = 1u64;
    let mut free = d;
    let mut p = 2u64;
    while p * p <= free {
        while free.is_multiple_of(p * p) {
            free /= p * p;
            square *= p;
        }
        p += 1;
    }
    (square, free)
}

/// Tail entry of a cut ranger.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CutTail {
    NegInf,
    PosInf,
    Quad(QuadIrr),
}

impl CutTail {
    fn neg(&self) -> CutTail {
        match self {
            CutTail::NegInf => CutTail::PosInf,
            CutTail::PosInf => CutTail::NegInf,
            CutTail::Quad(q) => CutTail::Quad(q.neg()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RangerKind {
    Unbounded(Sign),
    Principal(Vec<Rat>),
    Infinitesimal(Vec<Rat>, Sign),
    Cut { prefix: Vec<Rat>, tail: CutTail },
}

/// A point of the ranger compactification of `Q^rank`.
///
/// The encoding is canonical: a cut with empty prefix and infinite tail is
/// normalised to the unbounded ranger, and over rank 0 the infinitesimal
/// neighbours of the origin coincide with the unbounded endpoints. Distinct
/// encodings never compare equal.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Ranger {
    rank: usize,
    kind: RangerKind,
}

/// Class label produced by [`Ranger::classify`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "class")]
pub enum RangerClass {
    Unbounded,
    Principal,
    Infinitesimal,
    Cut(CutProfile),
}

/// Scale ideal and symmetry of a cut.
///
/// The threshold `j` encodes the prime ideal of all positive elements of
/// scale index at most `j`; translating the cut by a positive element moves
/// it exactly when the element lies in that ideal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CutProfile {
    pub scale_threshold: usize,
    pub symmetry: CutSymmetry,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CutSymmetry {
    Symmetric,
    /// Asymmetric cuts point toward their short side: down for a `+inf`
    /// tail, up for a `-inf` tail.
    Asymmetric { points_down: bool },
}

/// One position of the sequence model, used for comparisons.
enum Entry<'a> {
    Rat(&'a Rat),
    Quad(&'a QuadIrr),
    NegInf,
    PosInf,
    /// Neutral (h+1)-th entry of a principal ranger, between the two
    /// infinite tails.
    Pad,
}

impl Ranger {
    pub fn unbounded(rank: usize, sign: Sign) -> Ranger {
        Ranger {
            rank,
            kind: RangerKind::Unbounded(sign),
        }
    }

    pub fn principal(coords: Vec<Rat>) -> Ranger {
        Ranger {
            rank: coords.len(),
            kind: RangerKind::Principal(coords),
        }
    }

    pub fn from_elem(g: &GroupElem) -> Ranger {
        Ranger::principal(g.coords().to_vec())
    }

    pub fn zero(rank: usize) -> Ranger {
        Ranger::principal(vec![Rat::zero(); rank])
    }

    /// Successor (`sign = Pos`) or predecessor (`sign = Neg`) of a
    /// principal element. Over rank 0 this is the unbounded endpoint.
    pub fn infinitesimal(coords: Vec<Rat>, sign: Sign) -> Ranger {
        if coords.is_empty() {
            return Ranger::unbounded(0, sign);
        }
        Ranger {
            rank: coords.len(),
            kind: RangerKind::Infinitesimal(coords, sign),
        }
    }

    pub fn successor(g: &GroupElem, sign: Sign) -> Ranger {
        Ranger::infinitesimal(g.coords().to_vec(), sign)
    }

    /// Builds a cut with the given prefix and tail. An empty prefix with an
    /// infinite tail is normalised to the unbounded ranger.
    pub fn cut(rank: usize, prefix: Vec<Rat>, tail: CutTail) -> Result<Ranger, CoreError> {
        if prefix.len() + 1 > rank {
            return Err(CoreError::Structural(format!(
                "cut at position {} exceeds rank {}",
                prefix.len() + 1,
                rank
            )));
        }
        if prefix.is_empty() {
            match tail {
                CutTail::NegInf => return Ok(Ranger::unbounded(rank, Sign::Neg)),
                CutTail::PosInf => return Ok(Ranger::unbounded(rank, Sign::Pos)),
                CutTail::Quad(_) => {}
            }
        }
        Ok(Ranger {
            rank,
            kind: RangerKind::Cut { prefix, tail },
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn kind(&self) -> &RangerKind {
        &self.kind
    }

    pub fn is_principal(&self) -> bool {
        matches!(self.kind, RangerKind::Principal(_))
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.kind, RangerKind::Unbounded(_))
    }

    pub fn as_elem(&self) -> Option<GroupElem> {
        match &self.kind {
            RangerKind::Principal(c) => Some(GroupElem::new(c.clone())),
            _ => None,
        }
    }

    fn entry_at(&self, pos: usize) -> Option<Entry<'_>> {
        match &self.kind {
            RangerKind::Unbounded(s) => {
                if pos == 1 {
                    Some(match s {
                        Sign::Neg => Entry::NegInf,
                        Sign::Pos => Entry::PosInf,
                    })
                } else {
                    None
                }
            }
            RangerKind::Principal(c) => {
                if pos <= c.len() {
                    Some(Entry::Rat(&c[pos - 1]))
                } else if pos == self.rank + 1 {
                    Some(Entry::Pad)
                } else {
                    None
                }
            }
            RangerKind::Infinitesimal(c, s) => {
                if pos <= c.len() {
                    Some(Entry::Rat(&c[pos - 1]))
                } else if pos == self.rank + 1 {
                    Some(match s {
                        Sign::Neg => Entry::NegInf,
                        Sign::Pos => Entry::PosInf,
                    })
                } else {
                    None
                }
            }
            RangerKind::Cut { prefix, tail } => {
                if pos <= prefix.len() {
                    Some(Entry::Rat(&prefix[pos - 1]))
                } else if pos == prefix.len() + 1 {
                    Some(match tail {
                        CutTail::NegInf => Entry::NegInf,
                        CutTail::PosInf => Entry::PosInf,
                        CutTail::Quad(q) => Entry::Quad(q),
                    })
                } else {
                    None
                }
            }
        }
    }

    /// Class of the ranger, with the scale ideal and symmetry for cuts.
    ///
    /// The threshold is `n` for symmetric tails and `n - 1` for infinite
    /// tails, where `n` is the defining position; the translation criterion
    /// (`translate(r, g) != r` iff the scale index of `g` is at most the
    /// threshold) cross-validates this in the tests.
    pub fn classify(&self) -> RangerClass {
        match &self.kind {
            RangerKind::Unbounded(_) => RangerClass::Unbounded,
            RangerKind::Principal(_) => RangerClass::Principal,
            RangerKind::Infinitesimal(_, _) => RangerClass::Infinitesimal,
            RangerKind::Cut { prefix, tail } => {
                let n = prefix.len() + 1;
                let profile = match tail {
                    CutTail::Quad(_) => CutProfile {
                        scale_threshold: n,
                        symmetry: CutSymmetry::Symmetric,
                    },
                    CutTail::PosInf => CutProfile {
                        scale_threshold: n - 1,
                        symmetry: CutSymmetry::Asymmetric { points_down: true },
                    },
                    CutTail::NegInf => CutProfile {
                        scale_threshold: n - 1,
                        symmetry: CutSymmetry::Asymmetric { points_down: false },
                    },
                };
                RangerClass::Cut(profile)
            }
        }
    }

    /// Translation by a group element; the class is preserved.
    pub fn translate(&self, g: &GroupElem) -> Ranger {
        assert_eq!(self.rank, g.rank(), "rank mismatch in Ranger::translate");
        let kind = match &self.kind {
            RangerKind::Unbounded(s) => RangerKind::Unbounded(*s),
            RangerKind::Principal(c) => RangerKind::Principal(add_coords(c, g, 0)),
            RangerKind::Infinitesimal(c, s) => RangerKind::Infinitesimal(add_coords(c, g, 0), *s),
            RangerKind::Cut { prefix, tail } => {
                let new_prefix = add_coords(prefix, g, 0);
                let new_tail = match tail {
                    CutTail::Quad(q) => CutTail::Quad(q.add_rat(g.coord(prefix.len()))),
                    t => t.clone(),
                };
                RangerKind::Cut {
                    prefix: new_prefix,
                    tail: new_tail,
                }
            }
        };
        Ranger {
            rank: self.rank,
            kind,
        }
    }

    pub fn neg(&self) -> Ranger {
        let kind = match &self.kind {
            RangerKind::Unbounded(s) => RangerKind::Unbounded(s.flip()),
            RangerKind::Principal(c) => RangerKind::Principal(neg_coords(c)),
            RangerKind::Infinitesimal(c, s) => RangerKind::Infinitesimal(neg_coords(c), s.flip()),
            RangerKind::Cut { prefix, tail } => RangerKind::Cut {
                prefix: neg_coords(prefix),
                tail: tail.neg(),
            },
        };
        Ranger {
            rank: self.rank,
            kind,
        }
    }

    /// Multiplication by a nonzero rational, acting coordinatewise on the
    /// sequence model.
    pub fn scale_rat(&self, q: &Rat) -> Ranger {
        assert!(!q.is_zero(), "scaling a ranger by zero");
        if q.is_negative() {
            return self.neg().scale_rat(&-q);
        }
        let kind = match &self.kind {
            RangerKind::Unbounded(s) => RangerKind::Unbounded(*s),
            RangerKind::Principal(c) => RangerKind::Principal(scale_coords(c, q)),
            RangerKind::Infinitesimal(c, s) => RangerKind::Infinitesimal(scale_coords(c, q), *s),
            RangerKind::Cut { prefix, tail } => RangerKind::Cut {
                prefix: scale_coords(prefix, q),
                tail: match tail {
                    CutTail::Quad(t) => CutTail::Quad(t.scale(q)),
                    t => t.clone(),
                },
            },
        };
        Ranger {
            rank: self.rank,
            kind,
        }
    }

    pub fn scale_int(&self, n: i64) -> Ranger {
        self.scale_rat(&Rat::from(BigInt::from(n)))
    }

    /// Coarsening to the quotient by the convex subgroup of elements
    /// supported beyond coordinate `j` (keeps the first `j` coordinates).
    ///
    /// Rangers defined within the first `j` positions map to themselves;
    /// an infinite-tailed cut at position `j + 1` maps to the infinitesimal
    /// neighbour of its prefix (the fibers over non-principal targets are
    /// singletons); everything else collapses to the truncated principal
    /// ranger.
    pub fn project(&self, j: usize) -> Result<Ranger, CoreError> {
        if j > self.rank {
            return Err(CoreError::Domain(format!(
                "cannot project rank {} ranger to rank {j}",
                self.rank
            )));
        }
        if j == self.rank {
            return Ok(self.clone());
        }
        match &self.kind {
            RangerKind::Unbounded(s) => Ok(Ranger::unbounded(j, *s)),
            RangerKind::Cut { prefix, tail } => {
                let n = prefix.len() + 1;
                if n <= j {
                    Ok(Ranger {
                        rank: j,
                        kind: self.kind.clone(),
                    })
                } else if n == j + 1 {
                    match tail {
                        CutTail::PosInf => Ok(Ranger::infinitesimal(prefix.clone(), Sign::Pos)),
                        CutTail::NegInf => Ok(Ranger::infinitesimal(prefix.clone(), Sign::Neg)),
                        CutTail::Quad(_) => Ok(Ranger::principal(prefix[..j].to_vec())),
                    }
                } else {
                    Ok(Ranger::principal(prefix[..j].to_vec()))
                }
            }
            RangerKind::Principal(c) | RangerKind::Infinitesimal(c, _) => {
                Ok(Ranger::principal(c[..j].to_vec()))
            }
        }
    }

    /// Embedding of a ranger of the convex subgroup `Q^(h-j)` into the
    /// fiber over the first `j` coordinates of `base`, anchored additively
    /// at `base`. The unbounded endpoints land on the infinitesimal
    /// neighbours of the base point.
    pub fn embed(&self, base: &GroupElem) -> Result<Ranger, CoreError> {
        let h = base.rank();
        if self.rank > h {
            return Err(CoreError::Domain(format!(
                "cannot embed rank {} ranger into rank {h}",
                self.rank
            )));
        }
        let j = h - self.rank;
        let kind = match &self.kind {
            RangerKind::Unbounded(s) => return Ok(Ranger::successor(base, *s)),
            RangerKind::Principal(c) => RangerKind::Principal(splice(base, c, j)),
            RangerKind::Infinitesimal(c, s) => RangerKind::Infinitesimal(splice(base, c, j), *s),
            RangerKind::Cut { prefix, tail } => {
                let new_prefix = splice_prefix(base, prefix, j);
                let new_tail = match tail {
                    CutTail::Quad(q) => CutTail::Quad(q.add_rat(base.coord(j + prefix.len()))),
                    t => t.clone(),
                };
                RangerKind::Cut {
                    prefix: new_prefix,
                    tail: new_tail,
                }
            }
        };
        Ok(Ranger { rank: h, kind })
    }

    pub fn min(self, other: Ranger) -> Ranger {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Ranger) -> Ranger {
        if self >= other {
            self
        } else {
            other
        }
    }
}

/// `max(x - y, y - x)` on principal rangers.
pub fn mu(x: &Ranger, y: &Ranger) -> Result<GroupElem, CoreError> {
    let (a, b) = match (x.as_elem(), y.as_elem()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(CoreError::Domain(
                "the distance function is defined on pairs of principal rangers".into(),
            ))
        }
    };
    if a.rank() != b.rank() {
        return Err(CoreError::Structural("rank mismatch in mu".into()));
    }
    Ok(a.abs_diff(&b))
}

fn add_coords(coords: &[Rat], g: &GroupElem, offset: usize) -> Vec<Rat> {
    coords
        .iter()
        .enumerate()
        .map(|(i, c)| c + g.coord(offset + i))
        .collect()
}

fn neg_coords(coords: &[Rat]) -> Vec<Rat> {
    coords.iter().map(|c| -c).collect()
}

fn scale_coords(coords: &[Rat], q: &Rat) -> Vec<Rat> {
    coords.iter().map(|c| c * q).collect()
}

/// First `j` coordinates of `base`, then `base[j..] + coords` in full.
fn splice(base: &GroupElem, coords: &[Rat], j: usize) -> Vec<Rat> {
    let mut out = base.coords()[..j].to_vec();
    out.extend(coords.iter().enumerate().map(|(i, c)| c + base.coord(j + i)));
    out
}

/// Same as `splice` but for a prefix shorter than the fiber rank.
fn splice_prefix(base: &GroupElem, prefix: &[Rat], j: usize) -> Vec<Rat> {
    let mut out = base.coords()[..j].to_vec();
    out.extend(prefix.iter().enumerate().map(|(i, c)| c + base.coord(j + i)));
    out
}

impl PartialOrd for Ranger {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranger {
    /// Lexicographic comparison of the sequence models. Rangers of
    /// different ranks order by rank first; mixing ranks is a caller error
    /// but keeps `Ord` total.
    fn cmp(&self, other: &Self) -> Ordering {
        if self.rank != other.rank {
            return self.rank.cmp(&other.rank);
        }
        for pos in 1..=self.rank + 1 {
            let (a, b) = match (self.entry_at(pos), other.entry_at(pos)) {
                (Some(a), Some(b)) => (a, b),
                (None, None) => return Ordering::Equal,
                // A sequence that ended strictly earlier did so at an
                // irrational or infinite entry, so the comparison was
                // already decided; treat as equal defensively.
                _ => return Ordering::Equal,
            };
            let c = cmp_entries(&a, &b);
            if c != Ordering::Equal {
                return c;
            }
            // Equal non-rational entries end both sequences.
            if !matches!(a, Entry::Rat(_)) {
                return Ordering::Equal;
            }
        }
        Ordering::Equal
    }
}

fn cmp_entries(a: &Entry<'_>, b: &Entry<'_>) -> Ordering {
    use Entry::*;
    match (a, b) {
        (NegInf, NegInf) | (PosInf, PosInf) | (Pad, Pad) => Ordering::Equal,
        (NegInf, _) => Ordering::Less,
        (_, NegInf) => Ordering::Greater,
        (PosInf, _) => Ordering::Greater,
        (_, PosInf) => Ordering::Less,
        (Rat(x), Rat(y)) => x.cmp(y),
        (Quad(x), Quad(y)) => x.cmp_quad(y),
        (Quad(x), Rat(y)) => x.cmp_rat(y),
        (Rat(x), Quad(y)) => y.cmp_rat(x).reverse(),
        // Pads only meet infinite tails at position h+1.
        (Pad, Rat(_)) | (Rat(_), Pad) | (Pad, Quad(_)) | (Quad(_), Pad) => {
            unreachable!("pad compared against a rank-level entry")
        }
    }
}

impl fmt::Debug for Ranger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Ranger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RangerKind::Unbounded(Sign::Neg) => write!(f, "-inf"),
            RangerKind::Unbounded(Sign::Pos) => write!(f, "+inf"),
            RangerKind::Principal(c) => {
                let parts: Vec<String> = c.iter().map(rat_to_string).collect();
                write!(f, "({})", parts.join(","))
            }
            RangerKind::Infinitesimal(c, s) => {
                let parts: Vec<String> = c.iter().map(rat_to_string).collect();
                write!(f, "({}){}", parts.join(","), s.as_str())
            }
            RangerKind::Cut { prefix, tail } => {
                let mut parts: Vec<String> = prefix.iter().map(rat_to_string).collect();
                parts.push(match tail {
                    CutTail::NegInf => "-inf".into(),
                    CutTail::PosInf => "+inf".into(),
                    CutTail::Quad(q) => q.to_string(),
                });
                write!(f, "cut({})", parts.join(","))
            }
        }
    }
}

// JSON encoding per the external interface:
//   {"type":"principal","coords":[...]}
//   {"type":"cut","prefix":[...],"tail":"+inf"|"-inf"|{"a":..,"b":..,"d":..}}
//   {"type":"infinitesimal","coords":[...],"sign":"+"}
//   {"type":"unbounded","sign":"-"}
// The rank of cut and unbounded rangers is not part of the wire format; it
// is fixed by the ambient group on deserialization.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum RangerRepr {
    Unbounded {
        sign: Sign,
    },
    Principal {
        coords: Vec<String>,
    },
    Infinitesimal {
        coords: Vec<String>,
        sign: Sign,
    },
    Cut {
        prefix: Vec<String>,
        tail: TailRepr,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TailRepr {
    Infinite(String),
    Quad { a: String, b: String, d: u64 },
}

impl Ranger {
    pub fn to_json(&self) -> serde_json::Value {
        let repr = match &self.kind {
            RangerKind::Unbounded(s) => RangerRepr::Unbounded { sign: *s },
            RangerKind::Principal(c) => RangerRepr::Principal {
                coords: c.iter().map(rat_to_string).collect(),
            },
            RangerKind::Infinitesimal(c, s) => RangerRepr::Infinitesimal {
                coords: c.iter().map(rat_to_string).collect(),
                sign: *s,
            },
            RangerKind::Cut { prefix, tail } => RangerRepr::Cut {
                prefix: prefix.iter().map(rat_to_string).collect(),
                tail: match tail {
                    CutTail::NegInf => TailRepr::Infinite("-inf".into()),
                    CutTail::PosInf => TailRepr::Infinite("+inf".into()),
                    CutTail::Quad(q) => TailRepr::Quad {
                        a: rat_to_string(&q.a),
                        b: rat_to_string(&q.b),
                        d: q.d,
                    },
                },
            },
        };
        serde_json::to_value(repr).expect("ranger serialization cannot fail")
    }

    /// Decodes the wire format against an ambient rank.
    pub fn from_json(value: &serde_json::Value, rank: usize) -> Result<Ranger, CoreError> {
        let repr: RangerRepr = serde_json::from_value(value.clone())
            .map_err(|e| CoreError::Parse(format!("invalid ranger: {e}")))?;
        let parse_coords = |coords: &[String]| -> Result<Vec<Rat>, CoreError> {
            coords.iter().map(|s| rat_from_str(s)).collect()
        };
        let r = match repr {
            RangerRepr::Unbounded { sign } => Ranger::unbounded(rank, sign),
            RangerRepr::Principal { coords } => {
                let coords = parse_coords(&coords)?;
                if coords.len() != rank {
                    return Err(CoreError::Structural(format!(
                        "principal ranger has {} coordinates, ambient rank is {rank}",
                        coords.len()
                    )));
                }
                Ranger::principal(coords)
            }
            RangerRepr::Infinitesimal { coords, sign } => {
                let coords = parse_coords(&coords)?;
                if coords.len() != rank {
                    return Err(CoreError::Structural(format!(
                        "infinitesimal ranger has {} coordinates, ambient rank is {rank}",
                        coords.len()
                    )));
                }
                Ranger::infinitesimal(coords, sign)
            }
            RangerRepr::Cut { prefix, tail } => {
                let prefix = parse_coords(&prefix)?;
                let tail = match tail {
                    TailRepr::Infinite(s) => match s.as_str() {
                        "+inf" => CutTail::PosInf,
                        "-inf" => CutTail::NegInf,
                        other => {
                            return Err(CoreError::Parse(format!("invalid cut tail {other:?}")))
                        }
                    },
                    TailRepr::Quad { a, b, d } => {
                        CutTail::Quad(QuadIrr::new(rat_from_str(&a)?, rat_from_str(&b)?, d)?)
                    }
                };
                Ranger::cut(rank, prefix, tail)?
            }
        };
        Ok(r)
    }
}
