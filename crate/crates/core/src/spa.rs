//! Spectra of ordered groups: the point `Spa(Gamma, Gamma+)` and the affine
//! line `Spa(Gamma + Z*t, Gamma+)`, with rational-domain membership,
//! generization along the specialization chain, and a bounded saturation
//! checker.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::ordgroup::{Group, GroupElem};
use crate::plfun::ExtValue;
use crate::ranger::{Ranger, Sign};
use crate::CoreError;

/// A linear element `gamma + m*t` of `Gamma + Z*t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinElem {
    pub gamma: GroupElem,
    pub m: i64,
}

impl LinElem {
    pub fn new(gamma: GroupElem, m: i64) -> LinElem {
        LinElem { gamma, m }
    }

    pub fn var(rank: usize) -> LinElem {
        LinElem::new(GroupElem::zero(rank), 1)
    }

    pub fn neg(&self) -> LinElem {
        LinElem::new(self.gamma.neg(), -self.m)
    }

    pub fn add(&self, other: &LinElem) -> LinElem {
        LinElem::new(self.gamma.add(&other.gamma), self.m + other.m)
    }

    pub fn scale_int(&self, n: i64) -> LinElem {
        LinElem::new(self.gamma.scale_int(n), self.m * n)
    }
}

impl fmt::Display for LinElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) + {}t", self.gamma, self.m)
    }
}

/// A point of the affine line over `Spa(Gamma, Gamma+)`: a base point of
/// the specialization chain (threshold `j`) together with a ranger of the
/// quotient group on the first `j` coordinates. The closed fiber (`j = h`)
/// is the full ranger compactification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct A1Point {
    base_j: usize,
    fiber: Ranger,
}

impl A1Point {
    pub fn new(group: &Group, base_j: usize, fiber: Ranger) -> Result<A1Point, CoreError> {
        if base_j > group.rank() {
            return Err(CoreError::Structural(format!(
                "base threshold {base_j} exceeds rank {}",
                group.rank()
            )));
        }
        if fiber.rank() != base_j {
            return Err(CoreError::Structural(format!(
                "fiber ranger has rank {}, expected the quotient rank {base_j}",
                fiber.rank()
            )));
        }
        Ok(A1Point { base_j, fiber })
    }

    /// Point of the closed fiber.
    pub fn closed(group: &Group, fiber: Ranger) -> Result<A1Point, CoreError> {
        A1Point::new(group, group.rank(), fiber)
    }

    pub fn base_j(&self) -> usize {
        self.base_j
    }

    pub fn fiber(&self) -> &Ranger {
        &self.fiber
    }

    /// Value of `gamma + m*t` at this point, inside the quotient value
    /// group extended by the fiber ranger.
    pub fn eval(&self, f: &LinElem) -> ExtValue {
        let gamma_bar = f.gamma.truncate(self.base_j);
        ExtValue::new(gamma_bar, f.m, self.fiber.clone())
    }

    /// Membership in the rational domain `{v : v(f) >= 0}`.
    pub fn member(&self, f: &LinElem) -> bool {
        self.eval(f).sign() != Ordering::Less
    }

    /// Generization: inverting the convex subgroup coarsens the fiber
    /// ranger onto the first `j_target` coordinates.
    pub fn generize(&self, group: &Group, j_target: usize) -> Result<A1Point, CoreError> {
        if j_target > self.base_j {
            return Err(CoreError::Domain(format!(
                "cannot generize from threshold {} to larger threshold {j_target}",
                self.base_j
            )));
        }
        let fiber = self.fiber.project(j_target)?;
        A1Point::new(group, j_target, fiber)
    }
}

/// Result of the bounded saturation search. A positive answer certifies
/// `n*g` as a nonnegative combination; the negative answer is only
/// "nothing within the bound" and carries a refuting valuation when the
/// sample search finds one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum SaturationAnswer {
    Yes {
        n: u64,
        coefficients: Vec<u64>,
    },
    NoWithinBound {
        #[serde(skip)]
        witness: Option<A1Point>,
        witness_found: bool,
    },
}

/// Searches `n <= bound` and coefficient vectors with entries `<= bound`
/// for a presentation `n*g = sum c_i * m_i + (nonnegative element)`.
///
/// The saturation membership itself is only semidecidable; the bound is
/// explicit and a "no" is never definitive. When no combination exists
/// within the bound, a sampled valuation nonnegative on the generators but
/// negative on `g` is attached as a concrete refutation if one is found.
pub fn saturation_contains(
    group: &Group,
    generators: &[LinElem],
    g: &LinElem,
    bound: u64,
) -> Result<SaturationAnswer, CoreError> {
    if bound == 0 {
        return Err(CoreError::Domain("saturation bound must be positive".into()));
    }
    for n in 1..=bound {
        let target = g.scale_int(n as i64);
        let mut coeffs = vec![0u64; generators.len()];
        if search_combination(generators, &target, &mut coeffs, 0, bound) {
            return Ok(SaturationAnswer::Yes {
                n,
                coefficients: coeffs,
            });
        }
    }
    let witness = find_refuting_valuation(group, generators, g);
    Ok(SaturationAnswer::NoWithinBound {
        witness_found: witness.is_some(),
        witness,
    })
}

/// Depth-first search over coefficient vectors: is `target - sum c_i m_i`
/// a nonnegative constant?
fn search_combination(
    generators: &[LinElem],
    target: &LinElem,
    coeffs: &mut Vec<u64>,
    idx: usize,
    bound: u64,
) -> bool {
    if idx == generators.len() {
        let zero = GroupElem::zero(target.gamma.rank());
        return target.m == 0 && target.gamma >= zero;
    }
    for c in 0..=bound {
        let rest = target.add(&generators[idx].scale_int(-(c as i64)));
        coeffs[idx] = c;
        if search_combination(generators, &rest, coeffs, idx + 1, bound) {
            return true;
        }
    }
    coeffs[idx] = 0;
    false
}

/// Deterministic sample of closed-fiber valuations used to refute
/// saturation membership: small principal grid points plus the
/// infinitesimal neighbours of zero.
fn find_refuting_valuation(group: &Group, generators: &[LinElem], g: &LinElem) -> Option<A1Point> {
    let h = group.rank();
    let mut candidates: Vec<Ranger> = Vec::new();
    let steps: [i64; 5] = [-2, -1, 0, 1, 2];
    let mut coords = vec![0i64; h];
    loop {
        candidates.push(Ranger::from_elem(&GroupElem::from_ints(&coords)));
        // next grid point
        let mut i = 0;
        loop {
            if i == h {
                break;
            }
            let pos = steps.iter().position(|&s| s == coords[i]).unwrap();
            if pos + 1 < steps.len() {
                coords[i] = steps[pos + 1];
                break;
            }
            coords[i] = steps[0];
            i += 1;
        }
        if i == h {
            break;
        }
    }
    candidates.push(Ranger::successor(&GroupElem::zero(h), Sign::Pos));
    candidates.push(Ranger::successor(&GroupElem::zero(h), Sign::Neg));
    for fiber in candidates {
        let p = A1Point::closed(group, fiber).expect("closed fiber point");
        if generators.iter().all(|m| p.member(m)) && !p.member(g) {
            return Some(p);
        }
    }
    None
}
