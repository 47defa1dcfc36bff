//! The projective line over an algebraically closed affinoid field with
//! value group `Q^h`, modelled on a finite ultrametric configuration of
//! centers. Points are keyed by a center and a ranger log-radius; the
//! field itself is never materialised, every formula consumes only
//! pairwise log-distances and radii.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::gammagraph::{Edge, EdgeId, EdgeLength, GammaGraph, Skeleton, Vertex, VertexId, VertexKind};
use crate::ordgroup::{GroupElem, Rat};
use crate::plfun::{ExtValue, Pinch, PlFn};
use crate::ranger::{Ranger, RangerClass, Sign};
use crate::CoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CenterId(pub usize);

/// Log-distance between two centers; the diagonal is minus infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LogDist {
    NegInf,
    Finite(GroupElem),
}

impl LogDist {
    fn as_ranger(&self, rank: usize) -> Ranger {
        match self {
            LogDist::NegInf => Ranger::unbounded(rank, Sign::Neg),
            LogDist::Finite(e) => Ranger::from_elem(e),
        }
    }
}

/// A finite set of labelled centers with an ultrametric matrix of
/// log-distances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CenterConfig {
    rank: usize,
    labels: Vec<String>,
    dist: Vec<Vec<LogDist>>,
}

/// Report of [`CenterConfig::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigReport {
    pub issues: Vec<String>,
}

impl ConfigReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl CenterConfig {
    /// Builds a configuration from labels and the pairwise log-distances
    /// (one entry per unordered pair; symmetry is implied).
    pub fn new(
        rank: usize,
        labels: Vec<String>,
        pairs: &[(usize, usize, GroupElem)],
    ) -> Result<CenterConfig, CoreError> {
        let n = labels.len();
        if n == 0 {
            return Err(CoreError::Domain("empty center configuration".into()));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(CoreError::Structural(format!(
                    "duplicate center label {l:?}"
                )));
            }
        }
        let mut dist = vec![vec![LogDist::NegInf; n]; n];
        let mut filled = vec![vec![false; n]; n];
        for (i, j, d) in pairs {
            if *i >= n || *j >= n || i == j {
                return Err(CoreError::Structural(format!(
                    "log-distance pair ({i},{j}) out of range"
                )));
            }
            if d.rank() != rank {
                return Err(CoreError::Structural("log-distance rank mismatch".into()));
            }
            if filled[*i][*j] {
                return Err(CoreError::Structural(format!(
                    "log-distance for pair ({i},{j}) given twice"
                )));
            }
            filled[*i][*j] = true;
            filled[*j][*i] = true;
            dist[*i][*j] = LogDist::Finite(d.clone());
            dist[*j][*i] = LogDist::Finite(d.clone());
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && !filled[i][j] {
                    return Err(CoreError::Structural(format!(
                        "missing log-distance between centers {} and {}",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(CenterConfig { rank, labels, dist })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, c: CenterId) -> &str {
        &self.labels[c.0]
    }

    pub fn center_by_label(&self, label: &str) -> Option<CenterId> {
        self.labels.iter().position(|l| l == label).map(CenterId)
    }

    pub fn centers(&self) -> impl Iterator<Item = CenterId> {
        (0..self.labels.len()).map(CenterId)
    }

    pub fn logdist(&self, a: CenterId, b: CenterId) -> &LogDist {
        &self.dist[a.0][b.0]
    }

    fn logdist_ranger(&self, a: CenterId, b: CenterId) -> Ranger {
        self.dist[a.0][b.0].as_ranger(self.rank)
    }

    /// Ultrametric consistency: in every triple, the two largest
    /// log-distances agree.
    pub fn validate(&self) -> ConfigReport {
        let mut issues = Vec::new();
        let n = self.labels.len();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let dij = self.logdist_ranger(CenterId(i), CenterId(j));
                    let dik = self.logdist_ranger(CenterId(i), CenterId(k));
                    let djk = self.logdist_ranger(CenterId(j), CenterId(k));
                    let mut v = [&dij, &dik, &djk];
                    v.sort();
                    if v[1] != v[2] {
                        issues.push(format!(
                            "triple ({}, {}, {}) violates the ultrametric condition",
                            self.labels[i], self.labels[j], self.labels[k]
                        ));
                    }
                }
            }
        }
        ConfigReport { issues }
    }
}

/// A point of the projective line: the point at infinity, a classical
/// point at a center, or a monomial point with a ranger log-radius.
/// A log-radius of minus infinity is normalised to the classical point.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum P1Point {
    Infinity,
    Classical(CenterId),
    Monomial { center: CenterId, logradius: Ranger },
}

impl P1Point {
    pub fn monomial(center: CenterId, logradius: Ranger) -> P1Point {
        P1Point::Monomial { center, logradius }
    }

    pub fn divisorial(center: CenterId, logradius: GroupElem) -> P1Point {
        P1Point::Monomial {
            center,
            logradius: Ranger::from_elem(&logradius),
        }
    }

    /// Log-radius as a ranger: minus infinity at classical points, plus
    /// infinity at the point at infinity.
    pub fn radius(&self, rank: usize) -> Ranger {
        match self {
            P1Point::Infinity => Ranger::unbounded(rank, Sign::Pos),
            P1Point::Classical(_) => Ranger::unbounded(rank, Sign::Neg),
            P1Point::Monomial { logradius, .. } => logradius.clone(),
        }
    }

    pub fn is_divisorial(&self) -> bool {
        matches!(self, P1Point::Monomial { logradius, .. } if logradius.is_principal())
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, P1Point::Classical(_) | P1Point::Infinity)
    }

    fn center(&self) -> Option<CenterId> {
        match self {
            P1Point::Infinity => None,
            P1Point::Classical(c) => Some(*c),
            P1Point::Monomial { center, .. } => Some(*center),
        }
    }
}

/// Canonical representative of a point: the stored center is the
/// lexicographically least label within the defining disc.
pub fn normalize(config: &CenterConfig, p: &P1Point) -> P1Point {
    match p {
        P1Point::Infinity => P1Point::Infinity,
        P1Point::Classical(c) => P1Point::Classical(*c),
        P1Point::Monomial { center, logradius } => {
            if *logradius == Ranger::unbounded(config.rank(), Sign::Neg) {
                return P1Point::Classical(*center);
            }
            let mut best = *center;
            for c in config.centers() {
                if config.logdist_ranger(*center, c) <= *logradius
                    && config.label(c) < config.label(best)
                {
                    best = c;
                }
            }
            P1Point::Monomial {
                center: best,
                logradius: logradius.clone(),
            }
        }
    }
}

/// Equality of points: equal radii and centers within that radius.
pub fn point_eq(config: &CenterConfig, x: &P1Point, y: &P1Point) -> bool {
    normalize(config, x) == normalize(config, y)
}

/// Whether `x` dominates `y` (`y` lies in the disc of `x`).
pub fn dominates(config: &CenterConfig, x: &P1Point, y: &P1Point) -> bool {
    match (x, y) {
        (P1Point::Infinity, _) => true,
        (_, P1Point::Infinity) => false,
        _ => {
            let (a, b) = (x.center().unwrap(), y.center().unwrap());
            let rx = x.radius(config.rank());
            y.radius(config.rank()) <= rx && config.logdist_ranger(a, b) <= rx
        }
    }
}

/// The minimal point dominating both arguments.
pub fn meet(config: &CenterConfig, x: &P1Point, y: &P1Point) -> P1Point {
    match (x, y) {
        (P1Point::Infinity, _) | (_, P1Point::Infinity) => P1Point::Infinity,
        _ => {
            let (a, b) = (x.center().unwrap(), y.center().unwrap());
            let r = x
                .radius(config.rank())
                .max(y.radius(config.rank()))
                .max(config.logdist_ranger(a, b));
            normalize(
                config,
                &P1Point::Monomial {
                    center: a,
                    logradius: r,
                },
            )
        }
    }
}

/// Distance between divisorial points: twice the meet level minus the two
/// radii.
pub fn distance(config: &CenterConfig, x: &P1Point, y: &P1Point) -> Result<GroupElem, CoreError> {
    let (rx, ry) = match (x, y) {
        (P1Point::Monomial { logradius: rx, .. }, P1Point::Monomial { logradius: ry, .. })
            if rx.is_principal() && ry.is_principal() =>
        {
            (rx.as_elem().unwrap(), ry.as_elem().unwrap())
        }
        _ => {
            return Err(CoreError::Domain(
                "the metric is defined on divisorial points".into(),
            ))
        }
    };
    let m = meet(config, x, y);
    let level = m
        .radius(config.rank())
        .as_elem()
        .expect("meet of divisorial points is divisorial");
    Ok(level.scale_int(2).sub(&rx).sub(&ry))
}

/// A function given by its factorisation: a constant log-absolute-value
/// times a product of linear factors with integer multiplicities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactoredFn {
    pub unit_log: GroupElem,
    pub factors: Vec<(CenterId, i64)>,
}

impl FactoredFn {
    pub fn new(unit_log: GroupElem, factors: Vec<(CenterId, i64)>) -> FactoredFn {
        FactoredFn { unit_log, factors }
    }

    pub fn unit(unit_log: GroupElem) -> FactoredFn {
        FactoredFn {
            unit_log,
            factors: Vec::new(),
        }
    }

    pub fn check(&self, config: &CenterConfig) -> Result<(), CoreError> {
        if self.unit_log.rank() != config.rank() {
            return Err(CoreError::Structural("unit value rank mismatch".into()));
        }
        for (c, m) in &self.factors {
            if c.0 >= config.len() {
                return Err(CoreError::Structural("factor center out of range".into()));
            }
            if *m == 0 {
                return Err(CoreError::Structural(
                    "factor multiplicities must be nonzero".into(),
                ));
            }
        }
        Ok(())
    }

    /// Multiplicities aggregated per center; cancelled centers drop out.
    fn aggregated(&self) -> BTreeMap<CenterId, i64> {
        let mut m = BTreeMap::new();
        for (c, k) in &self.factors {
            *m.entry(*c).or_insert(0i64) += k;
        }
        m.retain(|_, v| *v != 0);
        m
    }

    pub fn total_degree(&self) -> i64 {
        self.factors.iter().map(|(_, m)| m).sum()
    }

    /// Product of functions: concatenated factors, added unit values.
    pub fn mul(&self, other: &FactoredFn) -> FactoredFn {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        FactoredFn {
            unit_log: self.unit_log.add(&other.unit_log),
            factors,
        }
    }
}

/// Value of `log|f|` at a point: finite in the extended value group, or an
/// infinite value at zeros and poles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AbsValue {
    Finite(ExtValue),
    NegInf,
    PosInf,
}

impl AbsValue {
    pub fn finite(self) -> Result<ExtValue, CoreError> {
        match self {
            AbsValue::Finite(v) => Ok(v),
            AbsValue::NegInf => Err(CoreError::Domain(
                "evaluation at a zero of the function".into(),
            )),
            AbsValue::PosInf => Err(CoreError::Domain(
                "evaluation at a pole of the function".into(),
            )),
        }
    }

    /// Realises the value as a ranger radius.
    pub fn to_radius(&self, rank: usize) -> Ranger {
        match self {
            AbsValue::Finite(v) => v.to_ranger(),
            AbsValue::NegInf => Ranger::unbounded(rank, Sign::Neg),
            AbsValue::PosInf => Ranger::unbounded(rank, Sign::Pos),
        }
    }
}

/// Generalized Gauss evaluation: `log|f|` at a point, by the max formula
/// `unit + sum m_i * max(radius, logdist(center, c_i))`.
pub fn eval_abs(config: &CenterConfig, f: &FactoredFn, x: &P1Point) -> Result<AbsValue, CoreError> {
    f.check(config)?;
    let rank = config.rank();
    let agg = f.aggregated();
    if let P1Point::Infinity = x {
        let total: i64 = agg.values().sum();
        return Ok(match total.cmp(&0) {
            Ordering::Equal => AbsValue::Finite(ExtValue::constant(f.unit_log.clone())),
            Ordering::Greater => AbsValue::PosInf,
            Ordering::Less => AbsValue::NegInf,
        });
    }
    let a = x.center().unwrap();
    let rho = x.radius(rank);
    let neg_inf = Ranger::unbounded(rank, Sign::Neg);
    let mut base = f.unit_log.clone();
    let mut rcoeff = 0i64;
    let mut inf_mult = 0i64;
    for (c, m) in &agg {
        let d = config.logdist(a, *c);
        let d_ranger = d.as_ranger(rank);
        if d_ranger > rho {
            match d {
                LogDist::Finite(e) => base = base.add(&e.scale_int(*m)),
                LogDist::NegInf => unreachable!("minus infinity is never largest"),
            }
        } else if rho == neg_inf {
            // classical point: contribution m * (-inf)
            inf_mult += m;
        } else {
            rcoeff += m;
        }
    }
    if inf_mult != 0 {
        return Ok(if inf_mult > 0 {
            AbsValue::NegInf
        } else {
            AbsValue::PosInf
        });
    }
    if rcoeff == 0 {
        return Ok(AbsValue::Finite(ExtValue::constant(base)));
    }
    Ok(AbsValue::Finite(ExtValue::new(base, rcoeff, rho)))
}

/// Slope of `log|f|` along the monomial path over `a`, strictly below the
/// radius `rho`: the sum of multiplicities at log-distance `< rho`. At a
/// non-corner point this equals the local degree of the map.
pub fn slope_below(config: &CenterConfig, f: &FactoredFn, a: CenterId, rho: &Ranger) -> i64 {
    f.aggregated()
        .iter()
        .filter(|(c, _)| config.logdist_ranger(a, **c) < *rho)
        .map(|(_, m)| m)
        .sum()
}

/// Mass sitting exactly at radius `rho` on the path over `a`: the corner
/// jump of `log|f|` there.
pub fn slope_jump(config: &CenterConfig, f: &FactoredFn, a: CenterId, rho: &Ranger) -> i64 {
    f.aggregated()
        .iter()
        .filter(|(c, _)| config.logdist_ranger(a, **c) == *rho)
        .map(|(_, m)| m)
        .sum()
}

pub fn slope_above(config: &CenterConfig, f: &FactoredFn, a: CenterId, rho: &Ranger) -> i64 {
    slope_below(config, f, a, rho) + slope_jump(config, f, a, rho)
}

/// Slope and local degree at a point of the path over `a`, following the
/// strict-below root count; at non-corner points the two one-sided slopes
/// agree and equal the local degree.
pub fn slope_and_degree(config: &CenterConfig, f: &FactoredFn, a: CenterId, rho: &Ranger) -> i64 {
    slope_below(config, f, a, rho)
}

/// Outward slopes of `log|f|` over the branches at a divisorial point:
/// the upward branch toward infinity, and one downward branch for each
/// residual class of factor centers inside the disc. Branches free of
/// factor centers carry slope zero and are omitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchSlopes {
    pub upward: i64,
    pub downward: Vec<(CenterId, i64)>,
}

impl BranchSlopes {
    pub fn total(&self) -> i64 {
        self.upward + self.downward.iter().map(|(_, s)| s).sum::<i64>()
    }
}

pub fn branch_slopes(
    config: &CenterConfig,
    f: &FactoredFn,
    q: &P1Point,
) -> Result<BranchSlopes, CoreError> {
    let (a, rho) = match q {
        P1Point::Monomial { center, logradius } if logradius.is_principal() => {
            (*center, logradius.clone())
        }
        _ => {
            return Err(CoreError::Domain(
                "branch slopes are computed at divisorial points".into(),
            ))
        }
    };
    let level = rho.as_elem().expect("divisorial point");
    let upward = slope_below(config, f, a, &Ranger::successor(&level, Sign::Pos));
    // Partition the inside mass into residual classes.
    let inside: Vec<(CenterId, i64)> = f
        .aggregated()
        .into_iter()
        .filter(|(c, _)| config.logdist_ranger(a, *c) <= rho)
        .collect();
    let mut classes: Vec<(CenterId, i64)> = Vec::new();
    'outer: for (c, m) in inside {
        for (rep_c, mass) in classes.iter_mut() {
            if config.logdist_ranger(*rep_c, c) < rho {
                *mass += m;
                if config.label(c) < config.label(*rep_c) {
                    *rep_c = c;
                }
                continue 'outer;
            }
        }
        classes.push((c, m));
    }
    classes.sort_by(|(c1, _), (c2, _)| config.label(*c1).cmp(config.label(*c2)));
    let downward = classes
        .into_iter()
        .filter(|(_, mass)| *mass != 0)
        .map(|(c, mass)| (c, -mass))
        .collect();
    Ok(BranchSlopes { upward, downward })
}

/// Restriction of `log|f|` to the divisorial segment `[lo, hi]` of the
/// path over `a`, as a pl function: the bridge to the interval sheaf.
pub fn path_restriction(
    config: &CenterConfig,
    f: &FactoredFn,
    a: CenterId,
    lo: &GroupElem,
    hi: &GroupElem,
) -> Result<PlFn, CoreError> {
    if lo > hi {
        return Err(CoreError::Domain("segment endpoints out of order".into()));
    }
    let lo_r = Ranger::from_elem(lo);
    let hi_r = Ranger::from_elem(hi);
    let mut bps: Vec<GroupElem> = f
        .aggregated()
        .keys()
        .filter_map(|c| match config.logdist(a, *c) {
            LogDist::Finite(e) => Some(e.clone()),
            LogDist::NegInf => None,
        })
        .filter(|e| Ranger::from_elem(e) > lo_r && Ranger::from_elem(e) < hi_r)
        .collect();
    bps.sort();
    bps.dedup();
    let mut slopes = Vec::with_capacity(bps.len() + 1);
    let mut probe = lo.clone();
    for bp in bps.iter().chain(std::iter::once(hi)) {
        let s = slope_below(config, f, a, &Ranger::successor(&probe, Sign::Pos));
        slopes.push(s);
        probe = bp.clone();
    }
    let anchor = eval_abs(config, f, &P1Point::divisorial(a, lo.clone()))?
        .finite()?
        .base()
        .clone();
    PlFn::new(
        (lo.clone(), hi.clone()),
        bps,
        slopes,
        anchor,
        Pinch::default(),
    )
}

// ---------------------------------------------------------------------
// Point classification
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ValueGroup {
    /// The ground value group.
    #[serde(rename = "Gamma")]
    Gamma,
    /// The ground group extended by the radius.
    #[serde(rename = "Gamma+Z*r")]
    GammaExtended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ResidueField {
    #[serde(rename = "tilde-k")]
    Base,
    #[serde(rename = "tilde-k(u)")]
    RationalExtension,
}

/// Valuation-theoretic invariants of a point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PointInvariants {
    pub type_label: u8,
    pub e: u8,
    pub f: u8,
    pub value_group: ValueGroup,
    pub residue: ResidueField,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut_symmetry: Option<crate::ranger::CutSymmetry>,
    /// Unbounded points only exist when the ground topology is discrete.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub discrete_only: bool,
}

/// Classification of a point by the ranger class of its radius.
pub fn classify_point(config: &CenterConfig, x: &P1Point) -> PointInvariants {
    let x = normalize(config, x);
    match &x {
        P1Point::Infinity | P1Point::Classical(_) => PointInvariants {
            type_label: 1,
            e: 0,
            f: 0,
            value_group: ValueGroup::Gamma,
            residue: ResidueField::Base,
            cut_symmetry: None,
            discrete_only: false,
        },
        P1Point::Monomial { logradius, .. } => match logradius.classify() {
            RangerClass::Principal => PointInvariants {
                type_label: 2,
                e: 0,
                f: 1,
                value_group: ValueGroup::Gamma,
                residue: ResidueField::RationalExtension,
                cut_symmetry: None,
                discrete_only: false,
            },
            RangerClass::Cut(profile) => PointInvariants {
                type_label: 3,
                e: 1,
                f: 0,
                value_group: ValueGroup::GammaExtended,
                residue: ResidueField::Base,
                cut_symmetry: Some(profile.symmetry),
                discrete_only: false,
            },
            RangerClass::Infinitesimal => PointInvariants {
                type_label: 5,
                e: 1,
                f: 0,
                value_group: ValueGroup::GammaExtended,
                residue: ResidueField::Base,
                cut_symmetry: None,
                discrete_only: false,
            },
            RangerClass::Unbounded => PointInvariants {
                type_label: 6,
                e: 1,
                f: 0,
                value_group: ValueGroup::GammaExtended,
                residue: ResidueField::Base,
                cut_symmetry: None,
                discrete_only: true,
            },
        },
    }
}

// ---------------------------------------------------------------------
// Nested disc chains (unibranch descriptors)
// ---------------------------------------------------------------------

/// A finite descriptor of a strictly nested chain of discs. When the chain
/// has no common classical center among the configured ones, evaluation of
/// any factored function stabilises along the chain once the discs exclude
/// all factor centers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscChain {
    pub entries: Vec<(CenterId, GroupElem)>,
}

impl DiscChain {
    pub fn validate(&self, config: &CenterConfig) -> Result<(), CoreError> {
        if self.entries.is_empty() {
            return Err(CoreError::Domain("empty disc chain".into()));
        }
        for w in self.entries.windows(2) {
            let (a, r) = &w[0];
            let (a2, r2) = &w[1];
            if r2 >= r {
                return Err(CoreError::Domain(
                    "chain radii must be strictly decreasing".into(),
                ));
            }
            if config.logdist_ranger(*a, *a2) > Ranger::from_elem(r) {
                return Err(CoreError::Domain("chain discs are not nested".into()));
            }
        }
        Ok(())
    }

    /// Whether some configured center lies in every disc of the chain.
    pub fn has_common_center(&self, config: &CenterConfig) -> bool {
        config.centers().any(|c| {
            self.entries
                .iter()
                .all(|(a, r)| config.logdist_ranger(*a, c) <= Ranger::from_elem(r))
        })
    }

    /// First index from which the discs exclude every factor center of `f`.
    pub fn exclusion_index(&self, config: &CenterConfig, f: &FactoredFn) -> Option<usize> {
        self.entries.iter().position(|(a, r)| {
            f.aggregated()
                .keys()
                .all(|c| config.logdist_ranger(*a, *c) > Ranger::from_elem(r))
        })
    }

    /// Checks that evaluations stabilise beyond the exclusion index and
    /// returns the stable value.
    pub fn stabilized_value(
        &self,
        config: &CenterConfig,
        f: &FactoredFn,
    ) -> Result<ExtValue, CoreError> {
        self.validate(config)?;
        let idx = self.exclusion_index(config, f).ok_or_else(|| {
            CoreError::Domain("the chain never excludes all factor centers".into())
        })?;
        let mut value: Option<ExtValue> = None;
        for (a, r) in &self.entries[idx..] {
            let v = eval_abs(config, f, &P1Point::divisorial(*a, r.clone()))?.finite()?;
            match &value {
                None => value = Some(v),
                Some(prev) => {
                    if *prev != v {
                        return Err(CoreError::Structural(
                            "evaluation failed to stabilise along the chain".into(),
                        ));
                    }
                }
            }
        }
        Ok(value.expect("nonempty tail"))
    }
}

// ---------------------------------------------------------------------
// Triangulations
// ---------------------------------------------------------------------

/// Complement component labels of a triangulation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ComponentLabel {
    /// Open annulus between two divisorial vertices.
    Annulus { between: (String, String) },
    /// Punctured disc at a classical vertex, addressed as a semi-infinite
    /// annulus.
    SemiInfiniteAnnulus { between: (String, String) },
    /// The open disc around infinity, present when infinity is unmarked.
    OuterDisc,
    /// The family of residual open discs hanging at a divisorial vertex.
    ResidualDiscs { at: String },
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    pub vertices: Vec<P1Point>,
    pub skeleton: GammaGraph,
    pub components: Vec<ComponentLabel>,
}

/// Canonical display name of a point.
pub fn point_name(config: &CenterConfig, p: &P1Point) -> String {
    match p {
        P1Point::Infinity => "inf".to_string(),
        P1Point::Classical(c) => config.label(*c).to_string(),
        P1Point::Monomial { center, logradius } => {
            format!("{}@{}", config.label(*center), logradius)
        }
    }
}

fn sort_key(config: &CenterConfig, p: &P1Point) -> (u8, String, Ranger) {
    match p {
        P1Point::Infinity => (
            2,
            String::new(),
            Ranger::unbounded(config.rank(), Sign::Pos),
        ),
        P1Point::Classical(c) => (
            0,
            config.label(*c).to_string(),
            Ranger::unbounded(config.rank(), Sign::Neg),
        ),
        P1Point::Monomial { center, logradius } => (
            1,
            config.label(*center).to_string(),
            logradius.clone(),
        ),
    }
}

pub fn dedupe_points(config: &CenterConfig, pts: Vec<P1Point>) -> Vec<P1Point> {
    let mut out: Vec<P1Point> = Vec::new();
    for p in pts {
        let p = normalize(config, &p);
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out.sort_by_key(|x| sort_key(config, x));
    out
}

/// Meet-closure of a point set.
pub fn meet_closure(config: &CenterConfig, pts: &[P1Point]) -> Vec<P1Point> {
    let mut v = dedupe_points(config, pts.to_vec());
    loop {
        let mut new_points = Vec::new();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                let m = meet(config, &v[i], &v[j]);
                if !v.contains(&m) && !new_points.contains(&m) {
                    new_points.push(m);
                }
            }
        }
        if new_points.is_empty() {
            return v;
        }
        v.extend(new_points);
        v = dedupe_points(config, v);
    }
}

/// Whether a point set is a triangulation: nonempty, classical and
/// divisorial points only, at least one divisorial point, and meet-closed
/// (so every complement component is a disc or an annulus).
pub fn is_triangulation(config: &CenterConfig, pts: &[P1Point]) -> bool {
    if pts.is_empty() {
        return false;
    }
    let v = dedupe_points(config, pts.to_vec());
    if !v.iter().all(|p| p.is_classical() || p.is_divisorial()) {
        return false;
    }
    if !v.iter().any(|p| p.is_divisorial()) {
        return false;
    }
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if !v.contains(&meet(config, &v[i], &v[j])) {
                return false;
            }
        }
    }
    true
}

/// The minimal triangulation containing the marked points: meet-closure
/// plus, when no divisorial point arises, a default divisorial point at
/// level zero over the least-labelled center.
pub fn triangulate(config: &CenterConfig, marked: &[P1Point]) -> Result<Triangulation, CoreError> {
    if config.is_empty() {
        return Err(CoreError::Domain("empty center configuration".into()));
    }
    for p in marked {
        if !(p.is_classical() || p.is_divisorial()) {
            return Err(CoreError::Domain(format!(
                "triangulation vertices must be classical or divisorial, got {}",
                point_name(config, p)
            )));
        }
        if let Some(c) = p.center() {
            if c.0 >= config.len() {
                return Err(CoreError::Structural(
                    "marked point center out of range".into(),
                ));
            }
        }
    }
    let mut v = meet_closure(config, marked);
    if !v.iter().any(|p| p.is_divisorial()) {
        let least = config
            .centers()
            .min_by(|a, b| config.label(*a).cmp(config.label(*b)))
            .expect("nonempty configuration");
        v.push(P1Point::divisorial(least, GroupElem::zero(config.rank())));
        v = meet_closure(config, &v);
    }
    let (skeleton, components) = build_skeleton(config, &v);
    Ok(Triangulation {
        vertices: v,
        skeleton,
        components,
    })
}

/// Parent of a point inside a meet-closed set: the dominating point of
/// minimal radius.
fn parent_in(config: &CenterConfig, v: &[P1Point], i: usize) -> Option<usize> {
    let rank = config.rank();
    let mut parent: Option<usize> = None;
    for (j, q) in v.iter().enumerate() {
        if i == j || !dominates(config, q, &v[i]) || point_eq(config, q, &v[i]) {
            continue;
        }
        parent = Some(match parent {
            None => j,
            Some(k) => {
                if v[j].radius(rank) < v[k].radius(rank) {
                    j
                } else {
                    k
                }
            }
        });
    }
    parent
}

/// Builds the skeleton graph of a meet-closed vertex set.
fn build_skeleton(config: &CenterConfig, v: &[P1Point]) -> (GammaGraph, Vec<ComponentLabel>) {
    let rank = config.rank();
    let vertices: Vec<Vertex> = v
        .iter()
        .map(|p| Vertex {
            name: point_name(config, p),
            kind: match p {
                P1Point::Infinity | P1Point::Classical(_) => VertexKind::ClassicalLeaf,
                P1Point::Monomial { .. } => VertexKind::Divisorial,
            },
        })
        .collect();
    let mut edges = Vec::new();
    let mut components = Vec::new();
    for (i, p) in v.iter().enumerate() {
        let Some(j) = parent_in(config, v, i) else {
            continue;
        };
        let (a, b, length) = match (&v[i], &v[j]) {
            (P1Point::Classical(_), _) => (VertexId(j), VertexId(i), EdgeLength::Infinite),
            (_, P1Point::Infinity) => (VertexId(i), VertexId(j), EdgeLength::Infinite),
            (P1Point::Monomial { logradius: ri, .. }, P1Point::Monomial { logradius: rj, .. }) => {
                let lo = ri.as_elem().expect("divisorial child");
                let hi = rj.as_elem().expect("divisorial parent");
                (VertexId(i), VertexId(j), EdgeLength::Finite(hi.sub(&lo)))
            }
            _ => unreachable!("parents are monomial or infinity"),
        };
        edges.push(Edge { a, b, length });
        let pair = (vertices[i].name.clone(), vertices[j].name.clone());
        components.push(
            if p.is_classical() || matches!(v[j], P1Point::Infinity) {
                ComponentLabel::SemiInfiniteAnnulus { between: pair }
            } else {
                ComponentLabel::Annulus { between: pair }
            },
        );
    }
    if !v.iter().any(|p| matches!(p, P1Point::Infinity)) {
        components.push(ComponentLabel::OuterDisc);
    }
    for (i, p) in v.iter().enumerate() {
        if p.is_divisorial() {
            components.push(ComponentLabel::ResidualDiscs {
                at: vertices[i].name.clone(),
            });
        }
    }
    let n_vertices = vertices.len();
    let n_edges = edges.len();
    let graph = GammaGraph::new(rank, vertices, edges).with_skeleton(Skeleton {
        vertices: (0..n_vertices).map(VertexId).collect(),
        edges: (0..n_edges).map(EdgeId).collect(),
        stubs: Vec::new(),
    });
    (graph, components)
}

// ---------------------------------------------------------------------
// Polynomial map transport
// ---------------------------------------------------------------------

/// Caller-supplied factorisation oracle: for each needed target value `b`
/// (a target center), the factorisation of `f - b` over the source
/// configuration. Multiplicities must be positive.
#[derive(Clone, Debug)]
pub struct MapEntry {
    pub base: CenterId,
    pub factored: FactoredFn,
}

#[derive(Clone, Debug, Default)]
pub struct MapData {
    pub entries: Vec<MapEntry>,
}

impl MapData {
    pub fn check(&self, source: &CenterConfig, target: &CenterConfig) -> Result<(), CoreError> {
        for e in &self.entries {
            if e.base.0 >= target.len() {
                return Err(CoreError::Structural("map base center out of range".into()));
            }
            e.factored.check(source)?;
            if e.factored.factors.iter().any(|(_, m)| *m <= 0) {
                return Err(CoreError::Structural(
                    "map factorisations must have positive multiplicities".into(),
                ));
            }
        }
        Ok(())
    }

    fn entry_for_root(&self, a: CenterId) -> Option<&MapEntry> {
        self.entries
            .iter()
            .find(|e| e.factored.aggregated().contains_key(&a))
    }

    fn entry_for_base(&self, b: CenterId) -> Option<&MapEntry> {
        self.entries.iter().find(|e| e.base == b)
    }
}

/// Image of a point under the map: the point over `a` at radius `rho`
/// goes to the point over `f(a)` at the evaluated radius, strictly
/// increasing along each path.
pub fn pushforward_point(
    source: &CenterConfig,
    target: &CenterConfig,
    map: &MapData,
    x: &P1Point,
) -> Result<P1Point, CoreError> {
    map.check(source, target)?;
    if let P1Point::Infinity = x {
        return Ok(P1Point::Infinity);
    }
    let a = x.center().unwrap();
    let entry = map.entry_for_root(a).ok_or_else(|| {
        CoreError::Domain(format!(
            "no factorisation supplied for the value at center {}",
            source.label(a)
        ))
    })?;
    let sigma = eval_abs(source, &entry.factored, x)?.to_radius(source.rank());
    Ok(normalize(
        target,
        &P1Point::Monomial {
            center: entry.base,
            logradius: sigma,
        },
    ))
}

/// A piece of a target skeleton lying on the monomial path over one
/// center: a segment from `lo` (the classical center when `None`) to `hi`
/// (infinity when `None`); a single point when `lo == hi`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSegment {
    pub center: CenterId,
    pub lo: Option<GroupElem>,
    pub hi: Option<GroupElem>,
}

/// Preimage of a target skeleton: a graph whose edges carry the dilation
/// (local degree) of the map. The graph can have several connected
/// components when the fibers split.
#[derive(Clone, Debug)]
pub struct Pullback {
    pub graph: GammaGraph,
    /// Dilation per graph edge index.
    pub dilations: BTreeMap<usize, i64>,
    pub points: Vec<P1Point>,
}

/// The value of `|f - b|` along the path over one root, as a function of
/// the radius: strictly increasing pl with breakpoints at the distances to
/// the other factor centers.
struct RootProfile {
    breaks: Vec<GroupElem>,
    masses: Vec<i64>,
    unit: GroupElem,
    root_mass: i64,
}

impl RootProfile {
    fn new(config: &CenterConfig, f: &FactoredFn, root: CenterId) -> RootProfile {
        let agg = f.aggregated();
        let mut root_mass = 0;
        let mut at: BTreeMap<GroupElem, i64> = BTreeMap::new();
        for (c, m) in &agg {
            match config.logdist(root, *c) {
                LogDist::NegInf => root_mass += m,
                LogDist::Finite(d) => *at.entry(d.clone()).or_insert(0) += m,
            }
        }
        let (breaks, masses): (Vec<_>, Vec<_>) = at.into_iter().unzip();
        RootProfile {
            breaks,
            masses,
            unit: f.unit_log.clone(),
            root_mass,
        }
    }

    /// Value at a principal radius.
    fn value(&self, rho: &GroupElem) -> GroupElem {
        let mut out = self.unit.add(&rho.scale_int(self.root_mass));
        for (d, m) in self.breaks.iter().zip(&self.masses) {
            let contrib = if d <= rho { rho } else { d };
            out = out.add(&contrib.scale_int(*m));
        }
        out
    }

    /// Slope on the piece of radii just above `rho`.
    fn slope_above(&self, rho: &GroupElem) -> i64 {
        self.root_mass
            + self
                .breaks
                .iter()
                .zip(&self.masses)
                .filter(|(d, _)| *d <= rho)
                .map(|(_, m)| m)
                .sum::<i64>()
    }

    /// Inverse of the strictly increasing value function.
    fn invert(&self, sigma: &GroupElem) -> GroupElem {
        let mut piece_start: Option<GroupElem> = None;
        for d in &self.breaks {
            if self.value(d) >= *sigma {
                break;
            }
            piece_start = Some(d.clone());
        }
        let (start, slope) = match piece_start {
            Some(d) => {
                let s = self.slope_above(&d);
                (d, s)
            }
            None => {
                let anchor = self
                    .breaks
                    .first()
                    .cloned()
                    .unwrap_or_else(|| GroupElem::zero(self.unit.rank()));
                (anchor, self.root_mass)
            }
        };
        debug_assert!(slope > 0, "value function of a root must increase");
        let v_start = self.value(&start);
        let diff = sigma.sub(&v_start);
        start.add(&diff.scale(&Rat::new(1.into(), slope.into())))
    }
}

/// Computes the preimage of target skeleton pieces under the map: for each
/// piece over a target center, the pl-inverted segments over the roots of
/// the corresponding factorisation, glued where the root paths merge.
pub fn pullback_skeleton(
    source: &CenterConfig,
    target: &CenterConfig,
    map: &MapData,
    pieces: &[TargetSegment],
) -> Result<Pullback, CoreError> {
    map.check(source, target)?;
    let rank = source.rank();
    #[derive(Clone)]
    struct PathNode {
        radius: Option<GroupElem>,
        to_infinity: bool,
    }
    struct RootPath {
        root: CenterId,
        nodes: Vec<PathNode>,
        segs: Vec<(GroupElem, i64)>,
    }
    let mut paths: Vec<RootPath> = Vec::new();
    for piece in pieces {
        let entry = map.entry_for_base(piece.center).ok_or_else(|| {
            CoreError::Domain(format!(
                "no factorisation supplied for the value at target center {}",
                target.label(piece.center)
            ))
        })?;
        let roots: Vec<CenterId> = entry.factored.aggregated().keys().copied().collect();
        for root in roots {
            let profile = RootProfile::new(source, &entry.factored, root);
            let rho_lo = piece.lo.as_ref().map(|lo| profile.invert(lo));
            let rho_hi = piece.hi.as_ref().map(|hi| profile.invert(hi));
            if let (Some(l), Some(h)) = (&rho_lo, &rho_hi) {
                if l > h {
                    return Err(CoreError::Domain(
                        "segment endpoints out of order".into(),
                    ));
                }
            }
            // interior subdivision: profile corners and merge levels with
            // the other source centers
            let mut levels: BTreeSet<GroupElem> = BTreeSet::new();
            for d in &profile.breaks {
                levels.insert(d.clone());
            }
            for c in source.centers() {
                if let LogDist::Finite(d) = source.logdist(root, c) {
                    levels.insert(d.clone());
                }
            }
            let in_range = |x: &GroupElem| {
                rho_lo.as_ref().is_none_or(|l| x > l) && rho_hi.as_ref().is_none_or(|h| x < h)
            };
            let mut nodes: Vec<PathNode> = vec![PathNode {
                radius: rho_lo.clone(),
                to_infinity: false,
            }];
            for lvl in levels.iter().filter(|x| in_range(x)) {
                nodes.push(PathNode {
                    radius: Some(lvl.clone()),
                    to_infinity: false,
                });
            }
            match &rho_hi {
                Some(h) => {
                    if rho_lo.as_ref() != Some(h) {
                        nodes.push(PathNode {
                            radius: Some(h.clone()),
                            to_infinity: false,
                        });
                    }
                }
                None => nodes.push(PathNode {
                    radius: None,
                    to_infinity: true,
                }),
            }
            let mut segs = Vec::new();
            for w in nodes.windows(2) {
                if let (Some(r1), Some(_)) = (&w[0].radius, &w[1].radius) {
                    segs.push((r1.clone(), profile.slope_above(r1)));
                }
            }
            paths.push(RootPath { root, nodes, segs });
        }
    }
    // Assemble the graph with global dedupe by point equality.
    let mut points: Vec<P1Point> = Vec::new();
    let mut vertices: Vec<Vertex> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut dilations: BTreeMap<usize, i64> = BTreeMap::new();
    let mut edge_seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    for path in &paths {
        let mut ids: Vec<usize> = Vec::new();
        for node in &path.nodes {
            let p = match (&node.radius, node.to_infinity) {
                (Some(r), _) => P1Point::divisorial(path.root, r.clone()),
                (None, false) => P1Point::Classical(path.root),
                (None, true) => P1Point::Infinity,
            };
            let p = normalize(source, &p);
            let idx = match points.iter().position(|q| *q == p) {
                Some(i) => i,
                None => {
                    points.push(p.clone());
                    vertices.push(Vertex {
                        name: point_name(source, &p),
                        kind: match &p {
                            P1Point::Infinity | P1Point::Classical(_) => VertexKind::ClassicalLeaf,
                            P1Point::Monomial { .. } => VertexKind::Divisorial,
                        },
                    });
                    points.len() - 1
                }
            };
            ids.push(idx);
        }
        for (w, node_pair) in ids.windows(2).zip(path.nodes.windows(2)) {
            let (i, j) = (w[0], w[1]);
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if !edge_seen.insert(key) {
                continue;
            }
            let length = match (&node_pair[0].radius, &node_pair[1].radius) {
                (Some(r1), Some(r2)) => EdgeLength::Finite(r2.sub(r1)),
                _ => EdgeLength::Infinite,
            };
            // infinite edges run from the divisorial end
            let (a, b) = match (&node_pair[0].radius, &node_pair[1].radius) {
                (None, Some(_)) => (j, i),
                _ => (i, j),
            };
            let idx = edges.len();
            edges.push(Edge {
                a: VertexId(a),
                b: VertexId(b),
                length,
            });
            if let Some(r1) = &node_pair[0].radius {
                if node_pair[1].radius.is_some() {
                    if let Some((_, s)) = path.segs.iter().find(|(lo, _)| lo == r1) {
                        dilations.insert(idx, *s);
                    }
                }
            }
        }
    }
    let n_vertices = vertices.len();
    let n_edges = edges.len();
    let graph = GammaGraph::new(rank, vertices, edges).with_skeleton(Skeleton {
        vertices: (0..n_vertices).map(VertexId).collect(),
        edges: (0..n_edges).map(EdgeId).collect(),
        stubs: Vec::new(),
    });
    Ok(Pullback {
        graph,
        dilations,
        points,
    })
}

/// Fiber of the map over a single target point.
pub fn fiber(
    source: &CenterConfig,
    target: &CenterConfig,
    map: &MapData,
    y: &P1Point,
) -> Result<Vec<P1Point>, CoreError> {
    map.check(source, target)?;
    match y {
        P1Point::Infinity => Ok(vec![P1Point::Infinity]),
        P1Point::Classical(b) => {
            let entry = map.entry_for_base(*b).ok_or_else(|| {
                CoreError::Domain(format!(
                    "no factorisation supplied for the value at target center {}",
                    target.label(*b)
                ))
            })?;
            Ok(dedupe_points(
                source,
                entry
                    .factored
                    .aggregated()
                    .keys()
                    .map(|c| P1Point::Classical(*c))
                    .collect(),
            ))
        }
        P1Point::Monomial { center, logradius } => {
            let s = logradius.as_elem().ok_or_else(|| {
                CoreError::Domain("fibers are computed over divisorial points".into())
            })?;
            let entry = map.entry_for_base(*center).ok_or_else(|| {
                CoreError::Domain(format!(
                    "no factorisation supplied for the value at target center {}",
                    target.label(*center)
                ))
            })?;
            let mut out = Vec::new();
            for root in entry.factored.aggregated().keys() {
                let profile = RootProfile::new(source, &entry.factored, *root);
                out.push(P1Point::divisorial(*root, profile.invert(&s)));
            }
            Ok(dedupe_points(source, out))
        }
    }
}

/// Simultaneous triangulation: the minimal pair `(W, V)` with `V` a
/// triangulation of the target containing the marked target points and
/// the images of the marked source points, and `W = f^{-1}(V)` a
/// triangulation of the source. Computed by the fixed-point loop that
/// alternately adds images of non-edge preimage points and recomputes
/// preimages.
pub fn simultaneous_triangulation(
    source: &CenterConfig,
    target: &CenterConfig,
    map: &MapData,
    marked_target: &[P1Point],
    marked_source: &[P1Point],
) -> Result<(Vec<P1Point>, Vec<P1Point>), CoreError> {
    map.check(source, target)?;
    let mut v0 = marked_target.to_vec();
    for w in marked_source {
        v0.push(pushforward_point(source, target, map, w)?);
    }
    let mut v = triangulate(target, &v0)?.vertices;
    for _round in 0..64 {
        let pieces = skeleton_pieces(target, &v);
        let pullback = pullback_skeleton(source, target, map, &pieces)?;
        let mut additions: Vec<P1Point> = Vec::new();
        for (i, p) in pullback.points.iter().enumerate() {
            let degree = pullback
                .graph
                .edges()
                .iter()
                .filter(|e| e.a.0 == i || e.b.0 == i)
                .count();
            if degree != 2 {
                let image = pushforward_point(source, target, map, p)?;
                if !v.iter().any(|q| point_eq(target, q, &image))
                    && !additions.iter().any(|q| point_eq(target, q, &image))
                {
                    additions.push(image);
                }
            }
        }
        if additions.is_empty() {
            let mut w: Vec<P1Point> = Vec::new();
            for p in &v {
                w.extend(fiber(source, target, map, p)?);
            }
            let w = dedupe_points(source, w);
            return Ok((w, v));
        }
        v.extend(additions);
        v = triangulate(target, &v)?.vertices;
    }
    Err(CoreError::Structural(
        "simultaneous triangulation did not stabilise".into(),
    ))
}

/// Skeleton pieces (per-edge segments and isolated points) of a
/// triangulation vertex set.
pub fn skeleton_pieces(config: &CenterConfig, v: &[P1Point]) -> Vec<TargetSegment> {
    let mut pieces = Vec::new();
    let mut in_edge = vec![false; v.len()];
    for (i, p) in v.iter().enumerate() {
        let Some(j) = parent_in(config, v, i) else {
            continue;
        };
        in_edge[i] = true;
        in_edge[j] = true;
        let center = p
            .center()
            .or_else(|| v[j].center())
            .expect("an edge touches at most one infinity");
        pieces.push(TargetSegment {
            center,
            lo: match p {
                P1Point::Classical(_) => None,
                P1Point::Monomial { logradius, .. } => logradius.as_elem(),
                P1Point::Infinity => unreachable!("infinity is never a child"),
            },
            hi: match &v[j] {
                P1Point::Infinity => None,
                P1Point::Monomial { logradius, .. } => logradius.as_elem(),
                P1Point::Classical(_) => unreachable!("classical points are never parents"),
            },
        });
    }
    for (i, p) in v.iter().enumerate() {
        if !in_edge[i] {
            if let P1Point::Monomial { center, logradius } = p {
                let r = logradius.as_elem().expect("triangulation point");
                pieces.push(TargetSegment {
                    center: *center,
                    lo: Some(r.clone()),
                    hi: Some(r),
                });
            }
        }
    }
    pieces
}
