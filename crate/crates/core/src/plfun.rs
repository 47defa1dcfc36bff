//! Piecewise-linear functions with integer slopes on divisorial intervals
//! of the ranger compactification, and the extended values `gamma + m*r`
//! they take at non-principal points. Sections presented on overlapping
//! covers are canonicalised to a single global breakpoint form, which
//! builds continuity at breakpoints into the representation.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::ordgroup::{Group, GroupElem, Rat};
use crate::ranger::Ranger;
use crate::CoreError;

/// An element `base + rcoeff * r` of the value group `Gamma + Z*r` at the
/// ranger `r`. For principal `r` the multiple is folded into the base, so
/// `rcoeff` is nonzero only at non-principal points.
#[derive(Clone, PartialEq, Eq)]
pub struct ExtValue {
    base: GroupElem,
    rcoeff: i64,
    at: Ranger,
}

impl ExtValue {
    pub fn new(base: GroupElem, rcoeff: i64, at: Ranger) -> ExtValue {
        assert_eq!(base.rank(), at.rank(), "rank mismatch in ExtValue");
        let mut v = ExtValue { base, rcoeff, at };
        v.fold();
        v
    }

    pub fn constant(base: GroupElem) -> ExtValue {
        let at = Ranger::zero(base.rank());
        ExtValue {
            base,
            rcoeff: 0,
            at,
        }
    }

    fn fold(&mut self) {
        if self.rcoeff != 0 {
            if let Some(elem) = self.at.as_elem() {
                self.base = self.base.add(&elem.scale_int(self.rcoeff));
                self.rcoeff = 0;
            }
        }
        // constants carry a canonical placeholder ranger
        if self.rcoeff == 0 {
            self.at = Ranger::zero(self.base.rank());
        }
    }

    pub fn base(&self) -> &GroupElem {
        &self.base
    }

    pub fn rcoeff(&self) -> i64 {
        self.rcoeff
    }

    pub fn at(&self) -> &Ranger {
        &self.at
    }

    /// Exact sign of `base + rcoeff * r` in the ordered group `Gamma + Z*r`.
    pub fn sign(&self) -> Ordering {
        if self.rcoeff == 0 {
            return self
                .base
                .cmp(&GroupElem::zero(self.base.rank()));
        }
        // base + m*r >= 0  iff  r >= -base/m (m > 0), r <= -base/m (m < 0).
        let threshold = Ranger::from_elem(
            &self.base.scale(&Rat::new(BigInt::from(-1), BigInt::from(self.rcoeff))),
        );
        let c = self.at.cmp(&threshold);
        if self.rcoeff > 0 {
            c
        } else {
            c.reverse()
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.sign() != Ordering::Less
    }

    /// Addition inside a single value group (same underlying ranger unless
    /// one side is a folded constant).
    pub fn add(&self, other: &ExtValue) -> ExtValue {
        let at = if self.rcoeff == 0 {
            other.at.clone()
        } else if other.rcoeff == 0 {
            self.at.clone()
        } else {
            assert_eq!(
                self.at, other.at,
                "extended values live at different rangers"
            );
            self.at.clone()
        };
        ExtValue::new(self.base.add(&other.base), self.rcoeff + other.rcoeff, at)
    }

    pub fn neg(&self) -> ExtValue {
        ExtValue {
            base: self.base.neg(),
            rcoeff: -self.rcoeff,
            at: self.at.clone(),
        }
    }

    pub fn cmp_value(&self, other: &ExtValue) -> Ordering {
        self.add(&other.neg()).sign()
    }

    /// Realizes the value as a ranger of the ambient group (used to
    /// transport radii along maps).
    pub fn to_ranger(&self) -> Ranger {
        if self.rcoeff == 0 {
            Ranger::from_elem(&self.base)
        } else {
            self.at.scale_int(self.rcoeff).translate(&self.base)
        }
    }
}

impl fmt::Debug for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rcoeff == 0 {
            write!(f, "{}", self.base)
        } else {
            write!(f, "({}) + {}*[{}]", self.base, self.rcoeff, self.at)
        }
    }
}

/// Endpoint pinching: the adjacent piece is forced to be constant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Pinch {
    pub left: bool,
    pub right: bool,
}

/// A pl function on a divisorial interval `[a, b]`: finitely many strictly
/// increasing principal breakpoints, one integer slope per piece, and the
/// value at the left endpoint. Continuity at breakpoints is built into the
/// representation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlFn {
    domain: (GroupElem, GroupElem),
    breakpoints: Vec<GroupElem>,
    slopes: Vec<i64>,
    anchor: GroupElem,
    pinch: Pinch,
}

// Wire format:
//   {"domain":[elem,elem], "breakpoints":[...], "slopes":[...],
//    "anchor":elem, "pinch":["left"?,"right"?]}
#[derive(Serialize, Deserialize)]
struct PlFnRepr {
    domain: (GroupElem, GroupElem),
    #[serde(default)]
    breakpoints: Vec<GroupElem>,
    slopes: Vec<i64>,
    anchor: GroupElem,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pinch: Vec<String>,
}

impl Serialize for PlFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut pinch = Vec::new();
        if self.pinch.left {
            pinch.push("left".to_string());
        }
        if self.pinch.right {
            pinch.push("right".to_string());
        }
        PlFnRepr {
            domain: self.domain.clone(),
            breakpoints: self.breakpoints.clone(),
            slopes: self.slopes.clone(),
            anchor: self.anchor.clone(),
            pinch,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PlFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = PlFnRepr::deserialize(d)?;
        let mut pinch = Pinch::default();
        for side in &repr.pinch {
            match side.as_str() {
                "left" => pinch.left = true,
                "right" => pinch.right = true,
                other => {
                    return Err(serde::de::Error::custom(format!(
                        "unknown pinch side {other:?}"
                    )))
                }
            }
        }
        PlFn::new(repr.domain, repr.breakpoints, repr.slopes, repr.anchor, pinch)
            .map_err(|e| serde::de::Error::custom(e.to_string()))
    }
}

/// A corner of a pl function: breakpoint with a nonzero slope jump.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corner {
    pub at: GroupElem,
    pub jump: i64,
}

impl PlFn {
    pub fn new(
        domain: (GroupElem, GroupElem),
        breakpoints: Vec<GroupElem>,
        slopes: Vec<i64>,
        anchor: GroupElem,
        pinch: Pinch,
    ) -> Result<PlFn, CoreError> {
        let rank = domain.0.rank();
        if domain.1.rank() != rank || anchor.rank() != rank {
            return Err(CoreError::Structural("rank mismatch in pl function".into()));
        }
        if domain.0 > domain.1 {
            return Err(CoreError::Structural(
                "interval endpoints out of order".into(),
            ));
        }
        if slopes.len() != breakpoints.len() + 1 {
            return Err(CoreError::Structural(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len()
            )));
        }
        let mut prev = &domain.0;
        for bp in &breakpoints {
            if bp.rank() != rank {
                return Err(CoreError::Structural("breakpoint rank mismatch".into()));
            }
            if bp <= prev {
                return Err(CoreError::Structural(
                    "breakpoints must be strictly increasing inside the interval".into(),
                ));
            }
            prev = bp;
        }
        if let Some(last) = breakpoints.last() {
            if *last >= domain.1 {
                return Err(CoreError::Structural(
                    "breakpoints must lie strictly inside the interval".into(),
                ));
            }
        }
        if pinch.left && slopes.first().copied().unwrap_or(0) != 0 {
            return Err(CoreError::Structural(
                "left-pinched interval forces slope 0 on the first piece".into(),
            ));
        }
        if pinch.right && slopes.last().copied().unwrap_or(0) != 0 {
            return Err(CoreError::Structural(
                "right-pinched interval forces slope 0 on the last piece".into(),
            ));
        }
        Ok(PlFn {
            domain,
            breakpoints,
            slopes,
            anchor,
            pinch,
        })
    }

    pub fn constant(domain: (GroupElem, GroupElem), value: GroupElem) -> Result<PlFn, CoreError> {
        PlFn::new(domain, vec![], vec![0], value, Pinch::default())
    }

    /// The translation `t + gamma` on `[a, b]`.
    pub fn translation(domain: (GroupElem, GroupElem), gamma: &GroupElem) -> Result<PlFn, CoreError> {
        let anchor = domain.0.add(gamma);
        PlFn::new(domain, vec![], vec![1], anchor, Pinch::default())
    }

    pub fn domain(&self) -> (&GroupElem, &GroupElem) {
        (&self.domain.0, &self.domain.1)
    }

    pub fn breakpoints(&self) -> &[GroupElem] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[i64] {
        &self.slopes
    }

    pub fn rank(&self) -> usize {
        self.domain.0.rank()
    }

    /// Piece nodes: `a`, breakpoints, `b`.
    fn nodes(&self) -> Vec<&GroupElem> {
        let mut v = Vec::with_capacity(self.breakpoints.len() + 2);
        v.push(&self.domain.0);
        v.extend(self.breakpoints.iter());
        v.push(&self.domain.1);
        v
    }

    /// Value at a principal point of the interval.
    pub fn value_at(&self, x: &GroupElem) -> Result<GroupElem, CoreError> {
        if *x < self.domain.0 || *x > self.domain.1 {
            return Err(CoreError::Domain(format!(
                "{x} lies outside the interval [{}, {}]",
                self.domain.0, self.domain.1
            )));
        }
        let mut value = self.anchor.clone();
        let mut pos = self.domain.0.clone();
        for (i, slope) in self.slopes.iter().enumerate() {
            let piece_end = self
                .breakpoints
                .get(i)
                .cloned()
                .unwrap_or_else(|| self.domain.1.clone());
            if *x <= piece_end {
                return Ok(value.add(&x.sub(&pos).scale_int(*slope)));
            }
            value = value.add(&piece_end.sub(&pos).scale_int(*slope));
            pos = piece_end;
        }
        Ok(value)
    }

    /// Evaluation at any ranger of the closed interval. At non-principal
    /// points the result is `gamma_piece + n_piece * r`; at principal
    /// points it folds into the group.
    pub fn eval(&self, r: &Ranger) -> Result<ExtValue, CoreError> {
        let lo = Ranger::from_elem(&self.domain.0);
        let hi = Ranger::from_elem(&self.domain.1);
        if *r < lo || *r > hi {
            return Err(CoreError::Domain(format!(
                "{r} lies outside the interval [{}, {}]",
                self.domain.0, self.domain.1
            )));
        }
        if let Some(x) = r.as_elem() {
            return Ok(ExtValue::new(self.value_at(&x)?, 0, r.clone()));
        }
        // Non-principal points lie strictly inside a piece.
        let mut piece = 0usize;
        for bp in &self.breakpoints {
            if *r > Ranger::from_elem(bp) {
                piece += 1;
            }
        }
        let start = if piece == 0 {
            self.domain.0.clone()
        } else {
            self.breakpoints[piece - 1].clone()
        };
        let slope = self.slopes[piece];
        let start_value = self.value_at(&start)?;
        // value = start_value + slope * (r - start)
        let base = start_value.sub(&start.scale_int(slope));
        Ok(ExtValue::new(base, slope, r.clone()))
    }

    /// Nonnegativity of every piece, decided at the piece endpoints.
    pub fn is_nonnegative(&self) -> bool {
        let zero = GroupElem::zero(self.rank());
        self.nodes()
            .iter()
            .all(|x| self.value_at(x).expect("node inside interval") >= zero)
    }

    /// Breakpoints where the slope actually changes.
    pub fn corners(&self) -> Vec<Corner> {
        self.breakpoints
            .iter()
            .enumerate()
            .filter_map(|(i, bp)| {
                let jump = self.slopes[i + 1] - self.slopes[i];
                (jump != 0).then(|| Corner {
                    at: bp.clone(),
                    jump,
                })
            })
            .collect()
    }

    /// Whether every corner jump is a multiple of the lattice index of its
    /// breakpoint. Slope changes at a point `r` with `n_r > 1` glue only
    /// when the jump is divisible by `n_r`.
    pub fn is_lattice_integral(&self, group: &Group) -> Result<bool, CoreError> {
        for corner in self.corners() {
            let n_r = group.lattice_index(&corner.at)?;
            let jump = BigInt::from(corner.jump);
            if !(jump % &n_r).is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_strictly_monotone(&self) -> bool {
        self.slopes.iter().all(|&s| s > 0) || self.slopes.iter().all(|&s| s < 0)
    }

    /// Length of the image interval of a monotone pl function.
    pub fn image_length(&self) -> Result<GroupElem, CoreError> {
        if !self.is_strictly_monotone() {
            return Err(CoreError::Domain(
                "image length requires a strictly monotone function".into(),
            ));
        }
        let va = self.value_at(&self.domain.0)?;
        let vb = self.value_at(&self.domain.1)?;
        Ok(va.abs_diff(&vb))
    }

    /// Pointwise sum on a shared interval.
    pub fn add(&self, other: &PlFn) -> Result<PlFn, CoreError> {
        if self.domain != other.domain {
            return Err(CoreError::Domain(
                "pl functions must share the interval to be added".into(),
            ));
        }
        let mut bps: Vec<GroupElem> = self
            .breakpoints
            .iter()
            .chain(&other.breakpoints)
            .cloned()
            .collect();
        bps.sort();
        bps.dedup();
        let slopes = piece_slopes(&bps, self)
            .into_iter()
            .zip(piece_slopes(&bps, other))
            .map(|(a, b)| a + b)
            .collect();
        PlFn::new(
            self.domain.clone(),
            bps,
            slopes,
            self.anchor.add(&other.anchor),
            Pinch::default(),
        )
    }

    /// Composition `g(self(t))` for strictly monotone `self` whose image
    /// lies in the domain of `g`. Slopes multiply.
    pub fn compose(&self, g: &PlFn) -> Result<PlFn, CoreError> {
        if !self.is_strictly_monotone() {
            return Err(CoreError::Domain(
                "composition requires a strictly monotone inner function".into(),
            ));
        }
        let va = self.value_at(&self.domain.0)?;
        let vb = self.value_at(&self.domain.1)?;
        let (img_lo, img_hi) = if va <= vb {
            (va.clone(), vb.clone())
        } else {
            (vb.clone(), va.clone())
        };
        if img_lo < *g.domain().0 || img_hi > *g.domain().1 {
            return Err(CoreError::Domain(
                "image does not lie in the domain of the outer function".into(),
            ));
        }
        // Breakpoints: own breakpoints plus preimages of the outer ones.
        let mut bps: Vec<GroupElem> = self.breakpoints.clone();
        for bp in &g.breakpoints {
            if *bp > img_lo && *bp < img_hi {
                bps.push(self.invert_at(bp)?);
            }
        }
        bps.sort();
        bps.dedup();
        let mut slopes = Vec::with_capacity(bps.len() + 1);
        let mut nodes = vec![self.domain.0.clone()];
        nodes.extend(bps.iter().cloned());
        nodes.push(self.domain.1.clone());
        for w in nodes.windows(2) {
            let mid_lo = &w[0];
            let inner = self.slope_just_after(mid_lo);
            let outer = g.slope_just_after_toward(&self.value_at(mid_lo)?, inner > 0);
            slopes.push(inner * outer);
        }
        let anchor = g.value_at(&self.value_at(&self.domain.0)?)?;
        PlFn::new(self.domain.clone(), bps, slopes, anchor, Pinch::default())
    }

    /// Preimage of a value under a strictly monotone pl function.
    fn invert_at(&self, value: &GroupElem) -> Result<GroupElem, CoreError> {
        let nodes = self.nodes();
        for w in nodes.windows(2) {
            let v0 = self.value_at(w[0])?;
            let v1 = self.value_at(w[1])?;
            let (lo, hi, asc) = if v0 <= v1 {
                (&v0, &v1, true)
            } else {
                (&v1, &v0, false)
            };
            if value >= lo && value <= hi {
                let slope = self.slope_just_after(w[0]);
                // x = start + (value - f(start)) / slope
                let diff = value.sub(&v0);
                let x = w[0].add(&diff.scale(&Rat::new(BigInt::from(1), BigInt::from(slope))));
                let _ = asc;
                return Ok(x);
            }
        }
        Err(CoreError::Domain("value outside the image".into()))
    }

    fn slope_just_after(&self, x: &GroupElem) -> i64 {
        let mut piece = 0usize;
        for bp in &self.breakpoints {
            if x >= bp {
                piece += 1;
            }
        }
        self.slopes[piece.min(self.slopes.len() - 1)]
    }

    fn slope_just_after_toward(&self, x: &GroupElem, ascending: bool) -> i64 {
        if ascending {
            self.slope_just_after(x)
        } else {
            // walking downward through x uses the piece on the left
            let mut piece = 0usize;
            for bp in &self.breakpoints {
                if x > bp {
                    piece += 1;
                }
            }
            self.slopes[piece.min(self.slopes.len() - 1)]
        }
    }
}

fn piece_slopes(bps: &[GroupElem], f: &PlFn) -> Vec<i64> {
    let mut nodes = vec![f.domain.0.clone()];
    nodes.extend(bps.iter().cloned());
    nodes.push(f.domain.1.clone());
    nodes
        .windows(2)
        .map(|w| f.slope_just_after(&w[0]))
        .collect()
}

/// `b - a`, the length of a divisorial interval. Minimal over images of
/// strictly monotone pl maps, attained by translations.
pub fn interval_length(a: &GroupElem, b: &GroupElem) -> Result<GroupElem, CoreError> {
    if a.rank() != b.rank() {
        return Err(CoreError::Structural("rank mismatch in interval".into()));
    }
    if a > b {
        return Err(CoreError::Domain("interval endpoints out of order".into()));
    }
    Ok(b.sub(a))
}
