//! Exact one-dimensional piecewise-linear geometry over finite-rank ordered
//! groups, and a tree-of-discs model of the projective line over an
//! algebraically closed affinoid field.
//!
//! The ambient group is always `Q^h` with the lexicographic order. All
//! arithmetic is exact (arbitrary-precision rationals, quadratic
//! irrationals with decidable sign), every value is immutable, and every
//! operation is pure and deterministic.

pub mod gammagraph;
pub mod ordgroup;
pub mod p1tree;
pub mod plfun;
pub mod quasitop;
pub mod ranger;
pub mod spa;

pub use ordgroup::{Group, GroupElem, Rat, ScaleIndex, SpecPoint};
pub use plfun::{ExtValue, PlFn};
pub use ranger::{CutProfile, CutSymmetry, CutTail, QuadIrr, Ranger, RangerClass, Sign};

use thiserror::Error;

/// Error type shared by the whole crate.
///
/// `Structural` covers malformed data (rank mismatches, broken invariants),
/// `Domain` covers well-formed inputs outside an operation's domain.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
}
