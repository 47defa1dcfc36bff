//! Finite topological models: T0 spaces as specialization preorders,
//! exhaustive checking of the quasi-tree axioms, completions of finite
//! ordered sets to quasi-lines, and Hausdorff quotients of interval
//! models. Opens are the up-sets of generization, fixed once for the
//! whole module. Quasi-compactness carries no content at finite scale
//! (every finite space is quasi-compact), so it is not checked.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::CoreError;

/// A finite space given by its specialization relation: `closure[x]` is
/// the closure of the point `x`, always reflexive and transitively closed.
/// Antisymmetry (T0) is not required at construction; the quasi-tree
/// checker reports its failure as an axiom-0 violation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteSpace {
    names: Vec<String>,
    closure: Vec<BTreeSet<usize>>,
}

impl FiniteSpace {
    /// Builds a space from specialization pairs `(x, y)` meaning `y` lies
    /// in the closure of `x`. The relation is closed reflexively and
    /// transitively.
    pub fn from_specializations(
        names: Vec<String>,
        pairs: &[(usize, usize)],
    ) -> Result<FiniteSpace, CoreError> {
        let n = names.len();
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.clone()) {
                return Err(CoreError::Structural(format!(
                    "duplicate point name {name:?}"
                )));
            }
        }
        let mut closure: Vec<BTreeSet<usize>> = (0..n).map(|x| BTreeSet::from([x])).collect();
        for (x, y) in pairs {
            if *x >= n || *y >= n {
                return Err(CoreError::Structural(
                    "specialization pair out of range".into(),
                ));
            }
            closure[*x].insert(*y);
        }
        // transitive closure
        loop {
            let mut grew = false;
            for x in 0..n {
                let reachable: Vec<usize> = closure[x].iter().copied().collect();
                for y in reachable {
                    for z in closure[y].clone() {
                        if closure[x].insert(z) {
                            grew = true;
                        }
                    }
                }
            }
            if !grew {
                break;
            }
        }
        Ok(FiniteSpace { names, closure })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, x: usize) -> &str {
        &self.names[x]
    }

    pub fn point_by_name(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn closure_of(&self, x: usize) -> &BTreeSet<usize> {
        &self.closure[x]
    }

    pub fn is_closed_point(&self, x: usize) -> bool {
        self.closure[x].len() == 1
    }

    /// Points of the subset related by specialization in either direction.
    fn related(&self, x: usize, y: usize) -> bool {
        self.closure[x].contains(&y) || self.closure[y].contains(&x)
    }

    /// Connectivity of a subspace: induced comparability components.
    pub fn is_connected_subset(&self, subset: &BTreeSet<usize>) -> bool {
        let Some(&start) = subset.iter().next() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for &y in subset {
                if !seen.contains(&y) && self.related(x, y) {
                    seen.insert(y);
                    queue.push_back(y);
                }
            }
        }
        seen.len() == subset.len()
    }

    /// Connected components of the complement of one point.
    fn components_without(&self, removed: usize) -> Vec<BTreeSet<usize>> {
        let mut remaining: BTreeSet<usize> =
            (0..self.len()).filter(|&x| x != removed).collect();
        let mut comps = Vec::new();
        while let Some(&start) = remaining.iter().next() {
            let mut comp = BTreeSet::from([start]);
            let mut queue = VecDeque::from([start]);
            remaining.remove(&start);
            while let Some(x) = queue.pop_front() {
                let adjacent: Vec<usize> = remaining
                    .iter()
                    .copied()
                    .filter(|&y| self.related(x, y))
                    .collect();
                for y in adjacent {
                    remaining.remove(&y);
                    comp.insert(y);
                    queue.push_back(y);
                }
            }
            comps.push(comp);
        }
        comps
    }

    /// Whether `c` separates `a` and `b` in the whole space.
    pub fn separates(&self, c: usize, a: usize, b: usize) -> bool {
        if c == a || c == b {
            return false;
        }
        self.components_without(c)
            .iter()
            .all(|comp| !(comp.contains(&a) && comp.contains(&b)))
    }

    /// Number of branches at a point: connected components after removal.
    pub fn branch_count(&self, x: usize) -> usize {
        self.components_without(x).len()
    }

    pub fn leaf_count(&self) -> usize {
        (0..self.len())
            .filter(|&x| self.branch_count(x) == 1)
            .count()
    }

    /// The quasi-segment between two points, when axiom 1 holds for the
    /// pair: the two points together with everything separating them.
    pub fn segment(&self, a: usize, b: usize) -> Option<BTreeSet<usize>> {
        if a == b {
            return Some(BTreeSet::from([a]));
        }
        let mut seg: BTreeSet<usize> = (0..self.len())
            .filter(|&c| self.separates(c, a, b))
            .collect();
        seg.insert(a);
        seg.insert(b);
        if self.is_connected_subset(&seg) {
            Some(seg)
        } else {
            None
        }
    }
}

/// Outcome of the exhaustive quasi-tree check, with witnesses per axiom.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuasiTreeReport {
    pub point_count: usize,
    /// A pair of mutually specializing points, when T0 fails.
    pub axiom0_failure: Option<(String, String)>,
    /// Pairs with no connected separating segment.
    pub axiom1_failures: Vec<(String, String)>,
    /// Triples violating the gluing axiom.
    pub axiom2_failures: Vec<(String, String, String)>,
}

impl QuasiTreeReport {
    pub fn passes(&self) -> bool {
        self.axiom0_failure.is_none()
            && self.axiom1_failures.is_empty()
            && self.axiom2_failures.is_empty()
    }
}

pub const DEFAULT_QUASI_TREE_BOUND: usize = 10;

/// Exhaustively verifies the quasi-tree axioms on a finite space:
/// T0, existence of connected segments with separating interiors, and the
/// gluing axiom for segments meeting in one point.
pub fn check_quasi_tree(sp: &FiniteSpace, bound: usize) -> Result<QuasiTreeReport, CoreError> {
    let n = sp.len();
    if n > bound {
        return Err(CoreError::Domain(format!(
            "space has {n} points, exceeding the bound {bound}"
        )));
    }
    let mut report = QuasiTreeReport {
        point_count: n,
        axiom0_failure: None,
        axiom1_failures: Vec::new(),
        axiom2_failures: Vec::new(),
    };
    'outer: for x in 0..n {
        for y in x + 1..n {
            if sp.closure[x].contains(&y) && sp.closure[y].contains(&x) {
                report.axiom0_failure = Some((sp.name(x).into(), sp.name(y).into()));
                break 'outer;
            }
        }
    }
    let mut segments: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for a in 0..n {
        for b in a + 1..n {
            match sp.segment(a, b) {
                Some(seg) => {
                    segments.insert((a, b), seg);
                }
                None => report
                    .axiom1_failures
                    .push((sp.name(a).into(), sp.name(b).into())),
            }
        }
    }
    let seg = |x: usize, y: usize| -> Option<&BTreeSet<usize>> {
        if x == y {
            None
        } else {
            segments.get(&(x.min(y), x.max(y)))
        }
    };
    for x in 0..n {
        for y in 0..n {
            for z in y + 1..n {
                if x == y || x == z {
                    continue;
                }
                let (Some(sxy), Some(sxz), Some(syz)) = (seg(x, y), seg(x, z), seg(y, z)) else {
                    continue;
                };
                let meet: BTreeSet<usize> = sxy.intersection(sxz).copied().collect();
                if meet != BTreeSet::from([x]) {
                    continue;
                }
                let glued: BTreeSet<usize> = sxy.union(sxz).copied().collect();
                if *syz != glued {
                    report.axiom2_failures.push((
                        sp.name(x).into(),
                        sp.name(y).into(),
                        sp.name(z).into(),
                    ));
                }
            }
        }
    }
    Ok(report)
}

/// A finite totally ordered set with a designated subset of closed points,
/// encoding a candidate quasi-interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedChain {
    pub names: Vec<String>,
    pub closed: BTreeSet<usize>,
}

impl MarkedChain {
    pub fn new(names: Vec<String>, closed: BTreeSet<usize>) -> Result<MarkedChain, CoreError> {
        if let Some(&max) = closed.iter().next_back() {
            if max >= names.len() {
                return Err(CoreError::Structural(
                    "closed point index out of range".into(),
                ));
            }
        }
        Ok(MarkedChain { names, closed })
    }

    /// Whether the pair defines a quasi-interval: no cuts (automatic on a
    /// finite chain), every adjacent pair of closed points separated, and
    /// every non-extremal open point flanked by closed immediate
    /// neighbours.
    pub fn is_quasi_interval(&self) -> bool {
        let n = self.names.len();
        if n == 0 {
            return false;
        }
        // adjacent closed points are never separated by an element
        for i in 0..n.saturating_sub(1) {
            if self.closed.contains(&i) && self.closed.contains(&(i + 1)) {
                return false;
            }
        }
        for i in 0..n {
            if self.closed.contains(&i) {
                continue;
            }
            if i > 0 && !self.closed.contains(&(i - 1)) {
                return false;
            }
            if i + 1 < n && !self.closed.contains(&(i + 1)) {
                return false;
            }
        }
        true
    }

    /// The finite space with the interval topology: the minimal open set
    /// around a point is the open interval between the nearest closed
    /// points strictly around it.
    pub fn to_space(&self) -> FiniteSpace {
        let n = self.names.len();
        let mut pairs = Vec::new();
        let min_open = |y: usize| -> (usize, usize) {
            let lo = (0..y)
                .rev()
                .find(|i| self.closed.contains(i))
                .map(|i| i + 1)
                .unwrap_or(0);
            let hi = (y + 1..n)
                .find(|i| self.closed.contains(i))
                .map(|i| i - 1)
                .unwrap_or(n.saturating_sub(1));
            (lo, hi)
        };
        for y in 0..n {
            let (lo, hi) = min_open(y);
            // x in cl{y} iff the minimal open around x contains y
            for x in lo..=hi {
                if x != y {
                    pairs.push((y, x));
                }
            }
        }
        // invert: pairs currently say "x is in the minimal open of ... "
        // recompute directly: x in cl{y} iff min_open(x) contains y
        let mut spec_pairs = Vec::new();
        for x in 0..n {
            let (lo, hi) = min_open(x);
            for y in lo..=hi {
                if y != x {
                    spec_pairs.push((y, x));
                }
            }
        }
        FiniteSpace::from_specializations(self.names.clone(), &spec_pairs)
            .expect("chain space construction")
    }
}

/// Ranger completion of a finite ordered set: closed endpoints at both
/// infinities and one closed infinitesimal point saturating each adjacent
/// pair. The induced topology on the original points is discrete and the
/// closure of each original point is itself with its two neighbours.
pub fn ranger_complete(names: &[String]) -> FiniteSpace {
    let k = names.len();
    let mut all_names = Vec::with_capacity(2 * k + 1);
    all_names.push("-inf".to_string());
    for (i, name) in names.iter().enumerate() {
        all_names.push(name.clone());
        if i + 1 < k {
            all_names.push(format!("{}+{}-", name, names[i + 1]));
        }
    }
    all_names.push("+inf".to_string());
    // indices: 0 = -inf, originals at 1, 3, 5, ..., infinitesimals even
    let mut pairs = Vec::new();
    for i in 0..k {
        let original = 1 + 2 * i;
        pairs.push((original, original - 1));
        pairs.push((original, original + 1));
    }
    FiniteSpace::from_specializations(all_names, &pairs).expect("completion construction")
}

/// Minimal completion: the original points stay closed and one open
/// midpoint is inserted between each adjacent pair.
pub fn minimal_complete(names: &[String]) -> FiniteSpace {
    let k = names.len();
    let mut all_names = Vec::new();
    for (i, name) in names.iter().enumerate() {
        all_names.push(name.clone());
        if i + 1 < k {
            all_names.push(format!("({},{})", name, names[i + 1]));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..k.saturating_sub(1) {
        let mid = 1 + 2 * i;
        pairs.push((mid, mid - 1));
        pairs.push((mid, mid + 1));
    }
    FiniteSpace::from_specializations(all_names, &pairs).expect("completion construction")
}

/// Hausdorff quotient of a completed interval model in the finite-model
/// sense: every open point is collapsed with the closed points that lie in
/// its closure alone; closed points shared between two closures stay
/// separate, so the quotient fibers are connected.
pub fn hausdorff_quotient(
    sp: &FiniteSpace,
) -> Result<(FiniteSpace, Vec<Vec<usize>>), CoreError> {
    let report = check_quasi_tree(sp, sp.len().max(DEFAULT_QUASI_TREE_BOUND))?;
    let is_interval =
        report.passes() && (0..sp.len()).all(|x| sp.branch_count(x) <= 2);
    if !is_interval {
        return Err(CoreError::Domain(
            "the Hausdorff quotient expects a completed interval model".into(),
        ));
    }
    let n = sp.len();
    let opens: Vec<usize> = (0..n).filter(|&x| !sp.is_closed_point(x)).collect();
    // owner count per closed point
    let mut owners: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &x in &opens {
        for &c in sp.closure_of(x) {
            if c != x {
                owners.entry(c).or_default().push(x);
            }
        }
    }
    let mut fiber_of: Vec<Option<usize>> = vec![None; n];
    let mut fibers: Vec<Vec<usize>> = Vec::new();
    for x in 0..n {
        if fiber_of[x].is_some() {
            continue;
        }
        if !sp.is_closed_point(x) {
            let mut fiber = vec![x];
            for &c in sp.closure_of(x) {
                if c != x && owners.get(&c).map(Vec::len) == Some(1) {
                    fiber.push(c);
                }
            }
            fiber.sort_unstable();
            let idx = fibers.len();
            for &m in &fiber {
                fiber_of[m] = Some(idx);
            }
            fibers.push(fiber);
        } else if owners.get(&x).map(Vec::len) != Some(1) {
            let idx = fibers.len();
            fiber_of[x] = Some(idx);
            fibers.push(vec![x]);
        }
        // closed points owned by exactly one open are collected when that
        // open point is visited
    }
    // second pass for closed points owned later in the order
    for (x, slot) in fiber_of.iter_mut().enumerate() {
        if slot.is_none() {
            let idx = fibers.len();
            *slot = Some(idx);
            fibers.push(vec![x]);
        }
    }
    let names: Vec<String> = fibers
        .iter()
        .map(|f| {
            f.iter()
                .map(|&m| sp.name(m).to_string())
                .collect::<Vec<_>>()
                .join("+")
        })
        .collect();
    // quotient specialization: fiber B specializes under A when some
    // member of B lies in the closure of a member of A
    let mut pairs = Vec::new();
    for (ai, fa) in fibers.iter().enumerate() {
        for (bi, fb) in fibers.iter().enumerate() {
            if ai == bi {
                continue;
            }
            let related = fa
                .iter()
                .any(|&a| fb.iter().any(|&b| sp.closure_of(a).contains(&b)));
            if related {
                pairs.push((ai, bi));
            }
        }
    }
    let quotient = FiniteSpace::from_specializations(names, &pairs)?;
    Ok((quotient, fibers))
}
