//! Finite metric graphs over an ordered group: divisorial vertices, edges
//! with group-valued lengths (infinite toward classical and unbounded
//! leaves), skeleton markings, distance to the skeleton, the metric
//! deformational retraction, and quotients of trees by finite isometric
//! group actions fixing a root.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ordgroup::GroupElem;
use crate::ranger::{Ranger, Sign};
use crate::CoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexKind {
    Divisorial,
    ClassicalLeaf,
    UnboundedLeaf,
}

impl VertexKind {
    pub fn is_leaf_kind(self) -> bool {
        !matches!(self, VertexKind::Divisorial)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub name: String,
    pub kind: VertexKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeLength {
    Finite(GroupElem),
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: VertexId,
    pub b: VertexId,
    pub length: EdgeLength,
}

impl Edge {
    fn other(&self, v: VertexId) -> VertexId {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }

    fn touches(&self, v: VertexId) -> bool {
        self.a == v || self.b == v
    }
}

/// Skeleton marking: whole vertices and edges, plus stubs covering an
/// initial portion of an edge up to a divisorial interior point. Offsets
/// are always measured from the edge's `a` endpoint.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Skeleton {
    pub vertices: BTreeSet<VertexId>,
    pub edges: BTreeSet<EdgeId>,
    pub stubs: Vec<Stub>,
}

impl Skeleton {
    pub fn of_vertices(ids: impl IntoIterator<Item = usize>) -> Skeleton {
        Skeleton {
            vertices: ids.into_iter().map(VertexId).collect(),
            edges: BTreeSet::new(),
            stubs: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.edges.is_empty() && self.stubs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stub {
    pub edge: EdgeId,
    pub upto: Ranger,
}

/// A point of the graph: a vertex, or an interior point of an edge at a
/// ranger offset from the edge's `a` endpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphPoint {
    AtVertex(VertexId),
    OnEdge { edge: EdgeId, offset: Ranger },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GammaGraph {
    rank: usize,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    skeleton: Option<Skeleton>,
}

/// Structural issues found by [`GammaGraph::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl GammaGraph {
    pub fn new(rank: usize, vertices: Vec<Vertex>, edges: Vec<Edge>) -> GammaGraph {
        GammaGraph {
            rank,
            vertices,
            edges,
            skeleton: None,
        }
    }

    pub fn with_skeleton(mut self, skeleton: Skeleton) -> GammaGraph {
        self.skeleton = Some(skeleton);
        self
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn skeleton(&self) -> Option<&Skeleton> {
        self.skeleton.as_ref()
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id.0]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.vertices
            .iter()
            .position(|v| v.name == name)
            .map(VertexId)
    }

    fn incident(&self, v: VertexId) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.touches(v))
            .map(|(i, e)| (EdgeId(i), e))
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incident(v).count()
    }

    pub fn is_tree(&self) -> bool {
        !self.vertices.is_empty()
            && self.edges.len() + 1 == self.vertices.len()
            && self.is_connected()
    }

    fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([VertexId(0)]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for (_, e) in self.incident(v) {
                let w = e.other(v);
                if !seen[w.0] {
                    seen[w.0] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Structural validation of the graph and its skeleton marking.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.a.0 >= self.vertices.len() || e.b.0 >= self.vertices.len() {
                issues.push(format!("edge {i} references a missing vertex"));
                continue;
            }
            if e.a == e.b {
                issues.push(format!("edge {i} is a loop"));
            }
            match &e.length {
                EdgeLength::Finite(len) => {
                    if len.rank() != self.rank {
                        issues.push(format!("edge {i} length has wrong rank"));
                    } else if !len.is_positive() {
                        issues.push(format!("edge {i} length is not strictly positive"));
                    }
                    for v in [e.a, e.b] {
                        if self.vertex(v).kind.is_leaf_kind() {
                            issues.push(format!(
                                "edge {i} has finite length but touches the non-divisorial vertex {}",
                                self.vertex(v).name
                            ));
                        }
                    }
                }
                EdgeLength::Infinite => {
                    if self.vertex(e.a).kind != VertexKind::Divisorial {
                        issues.push(format!(
                            "infinite edge {i} must start at a divisorial vertex"
                        ));
                    }
                    if !self.vertex(e.b).kind.is_leaf_kind() {
                        issues.push(format!(
                            "infinite edge {i} must end at a classical or unbounded leaf"
                        ));
                    }
                }
            }
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if v.kind.is_leaf_kind() && self.degree(VertexId(i)) != 1 {
                issues.push(format!(
                    "vertex {} is a {:?} and must have degree 1",
                    v.name, v.kind
                ));
            }
        }
        if !self.is_connected() {
            issues.push("graph is not connected".into());
        }
        if let Some(skel) = &self.skeleton {
            if !skel.is_empty() {
                self.validate_skeleton(skel, &mut issues);
            }
        }
        ValidationReport { issues }
    }

    fn validate_skeleton(&self, skel: &Skeleton, issues: &mut Vec<String>) {
        for &v in &skel.vertices {
            if v.0 >= self.vertices.len() {
                issues.push(format!("skeleton references missing vertex {}", v.0));
                return;
            }
        }
        for &e in &skel.edges {
            if e.0 >= self.edges.len() {
                issues.push(format!("skeleton references missing edge {}", e.0));
                return;
            }
            let edge = self.edge(e);
            if !skel.vertices.contains(&edge.a) || !skel.vertices.contains(&edge.b) {
                issues.push(format!(
                    "skeleton edge {} dangles: both endpoints must be marked",
                    e.0
                ));
            }
        }
        for stub in &skel.stubs {
            if stub.edge.0 >= self.edges.len() {
                issues.push(format!(
                    "skeleton stub references missing edge {}",
                    stub.edge.0
                ));
                continue;
            }
            if skel.edges.contains(&stub.edge) {
                issues.push(format!(
                    "edge {} is marked both fully and as a stub",
                    stub.edge.0
                ));
            }
            let edge = self.edge(stub.edge);
            if !skel.vertices.contains(&edge.a) {
                issues.push(format!(
                    "stub on edge {} must attach to a marked vertex at its near end",
                    stub.edge.0
                ));
            }
            if skel.vertices.contains(&edge.b) {
                issues.push(format!(
                    "stub on edge {} would leave a gap before marked vertex {}",
                    stub.edge.0,
                    self.vertex(edge.b).name
                ));
            }
            if !stub.upto.is_principal() {
                issues.push(format!(
                    "skeleton ends at a {}-class point inside edge {}: forbidden leaf kind",
                    class_name(&stub.upto),
                    stub.edge.0
                ));
            }
            if !self.offset_in_range(edge, &stub.upto) {
                issues.push(format!("stub offset outside edge {}", stub.edge.0));
            }
        }
        // Isolated skeleton points must be divisorial.
        for &v in &skel.vertices {
            let sk_deg = skel
                .edges
                .iter()
                .filter(|&&e| self.edge(e).touches(v))
                .count()
                + skel
                    .stubs
                    .iter()
                    .filter(|s| s.edge.0 < self.edges.len() && self.edge(s.edge).a == v)
                    .count();
            if sk_deg == 0 && self.vertex(v).kind != VertexKind::Divisorial {
                issues.push(format!(
                    "isolated skeleton point {} must be divisorial",
                    self.vertex(v).name
                ));
            }
        }
        // Complement components must be trees hanging at a single
        // divisorial attachment point.
        for comp in self.complement_components(skel) {
            if comp.attachments.is_empty() {
                issues.push("complement component does not reach the skeleton".into());
            } else if comp.attachments.len() > 1 {
                issues.push(
                    "complement component touches the skeleton in more than one point".into(),
                );
            } else if let Attachment::Vertex(v) = comp.attachments[0] {
                if self.vertex(v).kind != VertexKind::Divisorial {
                    issues.push(format!(
                        "complement component attaches at the non-divisorial vertex {}",
                        self.vertex(v).name
                    ));
                }
            }
            // each component plus its unique attachment must form a tree
            if comp.edge_count != comp.vertices.len() {
                issues.push("complement component contains a cycle".into());
            }
        }
    }

    fn offset_in_range(&self, edge: &Edge, offset: &Ranger) -> bool {
        let zero = Ranger::zero(self.rank);
        if *offset <= zero {
            return false;
        }
        match &edge.length {
            EdgeLength::Finite(len) => *offset < Ranger::from_elem(len),
            EdgeLength::Infinite => offset.is_bounded(),
        }
    }

    pub fn check_point(&self, p: &GraphPoint) -> Result<(), CoreError> {
        match p {
            GraphPoint::AtVertex(v) => {
                if v.0 >= self.vertices.len() {
                    return Err(CoreError::Structural("point on a missing vertex".into()));
                }
            }
            GraphPoint::OnEdge { edge, offset } => {
                if edge.0 >= self.edges.len() {
                    return Err(CoreError::Structural("point on a missing edge".into()));
                }
                if offset.rank() != self.rank {
                    return Err(CoreError::Structural("offset rank mismatch".into()));
                }
                if !self.offset_in_range(self.edge(*edge), offset) {
                    return Err(CoreError::Domain("offset outside the open edge".into()));
                }
            }
        }
        Ok(())
    }
}

fn class_name(r: &Ranger) -> &'static str {
    use crate::ranger::RangerClass::*;
    match r.classify() {
        Unbounded => "unbounded",
        Principal => "principal",
        Infinitesimal => "infinitesimal",
        Cut(_) => "cut",
    }
}

/// Attachment of a complement component to the skeleton.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Attachment {
    Vertex(VertexId),
    /// Stub point inside the given edge (index into the stub list).
    StubPoint(usize),
}

struct ComplementComponent {
    vertices: BTreeSet<VertexId>,
    /// Edges inside the component plus its attachment edges.
    edge_count: usize,
    attachments: Vec<Attachment>,
}

impl GammaGraph {
    /// Connected components of the complement of the skeleton, together
    /// with their attachment points.
    fn complement_components(&self, skel: &Skeleton) -> Vec<ComplementComponent> {
        let n = self.vertices.len();
        let mut dsu: Vec<usize> = (0..n).collect();
        let outside = |v: VertexId| !skel.vertices.contains(&v);
        let stub_of = |e: EdgeId| skel.stubs.iter().position(|s| s.edge == e);
        for (i, e) in self.edges.iter().enumerate() {
            let id = EdgeId(i);
            if skel.edges.contains(&id) || stub_of(id).is_some() {
                continue;
            }
            if outside(e.a) && outside(e.b) {
                let (ra, rb) = (rep(&mut dsu, e.a.0), rep(&mut dsu, e.b.0));
                if ra != rb {
                    dsu[ra] = rb;
                }
            }
        }
        let mut comps: BTreeMap<usize, ComplementComponent> = BTreeMap::new();
        for v in 0..n {
            if outside(VertexId(v)) {
                let root = rep(&mut dsu, v);
                comps
                    .entry(root)
                    .or_insert_with(|| ComplementComponent {
                        vertices: BTreeSet::new(),
                        edge_count: 0,
                        attachments: Vec::new(),
                    })
                    .vertices
                    .insert(VertexId(v));
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            let id = EdgeId(i);
            if skel.edges.contains(&id) {
                continue;
            }
            if let Some(stub_idx) = stub_of(id) {
                if outside(e.b) {
                    let root = rep(&mut dsu, e.b.0);
                    if let Some(c) = comps.get_mut(&root) {
                        c.edge_count += 1;
                        c.attachments.push(Attachment::StubPoint(stub_idx));
                    }
                }
                continue;
            }
            match (outside(e.a), outside(e.b)) {
                (true, true) => {
                    let root = rep(&mut dsu, e.a.0);
                    if let Some(c) = comps.get_mut(&root) {
                        c.edge_count += 1;
                    }
                }
                (true, false) => {
                    let root = rep(&mut dsu, e.a.0);
                    if let Some(c) = comps.get_mut(&root) {
                        c.edge_count += 1;
                        c.attachments.push(Attachment::Vertex(e.b));
                    }
                }
                (false, true) => {
                    let root = rep(&mut dsu, e.b.0);
                    if let Some(c) = comps.get_mut(&root) {
                        c.edge_count += 1;
                        c.attachments.push(Attachment::Vertex(e.a));
                    }
                }
                (false, false) => {
                    // unmarked edge between two marked vertices: its open
                    // interior touches the skeleton twice
                    comps.insert(
                        n + i,
                        ComplementComponent {
                            vertices: BTreeSet::new(),
                            edge_count: 1,
                            attachments: vec![
                                Attachment::Vertex(e.a),
                                Attachment::Vertex(e.b),
                            ],
                        },
                    );
                }
            }
        }
        comps.into_values().collect()
    }

    fn skeleton_or_err(&self) -> Result<&Skeleton, CoreError> {
        match &self.skeleton {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(CoreError::Domain("the skeleton is empty".into())),
        }
    }

    /// Whether the point lies on the marked skeleton.
    pub fn on_skeleton(&self, p: &GraphPoint) -> Result<bool, CoreError> {
        let skel = self.skeleton_or_err()?;
        self.check_point(p)?;
        Ok(match p {
            GraphPoint::AtVertex(v) => skel.vertices.contains(v),
            GraphPoint::OnEdge { edge, offset } => {
                if skel.edges.contains(edge) {
                    true
                } else if let Some(stub) = skel.stubs.iter().find(|s| s.edge == *edge) {
                    *offset <= stub.upto
                } else {
                    false
                }
            }
        })
    }

    /// Distance from a point to the skeleton: zero exactly on the
    /// skeleton, infinite at classical and unbounded leaves, otherwise the
    /// length of the unique segment reaching it.
    pub fn dist_to_skeleton(&self, p: &GraphPoint) -> Result<Ranger, CoreError> {
        if self.on_skeleton(p)? {
            return Ok(Ranger::zero(self.rank));
        }
        let walk = self.walk_from_skeleton(p)?;
        match &walk.target {
            WalkTarget::InfiniteLeaf => Ok(Ranger::unbounded(self.rank, Sign::Pos)),
            WalkTarget::EdgeOffset(offset) => {
                let last = walk.steps.last().expect("off-skeleton walk has steps");
                let local = if last.forward {
                    offset.translate(&last.enter_offset.neg())
                } else {
                    offset.neg().translate(&last.enter_offset)
                };
                Ok(local.translate(&last.start_depth))
            }
            WalkTarget::Vertex => {
                let last = walk.steps.last().expect("off-skeleton walk has steps");
                let len = last.length.clone().expect("vertex step has finite length");
                Ok(Ranger::from_elem(&last.start_depth.add(&len)))
            }
        }
    }

    /// The deformational retraction onto the skeleton: the point of
    /// `[x0, x]` at parameter `t` from the skeleton, or `x` itself when
    /// `t` is at least the distance. The unbounded parameter acts as the
    /// identity; finite parameters move into infinite leaf edges.
    pub fn retract(&self, t: &Ranger, p: &GraphPoint) -> Result<GraphPoint, CoreError> {
        if *t < Ranger::zero(self.rank) {
            return Err(CoreError::Domain("retraction parameter is negative".into()));
        }
        let dist = self.dist_to_skeleton(p)?;
        if *t >= dist {
            return Ok(p.clone());
        }
        let walk = self.walk_from_skeleton(p)?;
        if *t == Ranger::zero(self.rank) {
            return Ok(walk.attachment);
        }
        let last_index = walk.steps.len() - 1;
        for (i, step) in walk.steps.iter().enumerate() {
            let start = Ranger::from_elem(&step.start_depth);
            let is_final_partial =
                i == last_index && !matches!(walk.target, WalkTarget::Vertex);
            let end = if is_final_partial {
                None
            } else {
                step.length
                    .as_ref()
                    .map(|len| Ranger::from_elem(&step.start_depth.add(len)))
            };
            let within = match &end {
                Some(e) => *t <= *e,
                None => true,
            };
            if *t > start && within {
                if let Some(e) = &end {
                    if *t == *e {
                        let v = if step.forward {
                            self.edge(step.edge).b
                        } else {
                            self.edge(step.edge).a
                        };
                        return Ok(GraphPoint::AtVertex(v));
                    }
                }
                let local = t.translate(&step.start_depth.neg());
                let offset = if step.forward {
                    local.translate(&step.enter_offset)
                } else {
                    local.neg().translate(&step.enter_offset)
                };
                return Ok(GraphPoint::OnEdge {
                    edge: step.edge,
                    offset,
                });
            }
        }
        Err(CoreError::Structural("retraction walk out of bounds".into()))
    }

    /// Oriented walk from the skeleton attachment to an off-skeleton point.
    fn walk_from_skeleton(&self, p: &GraphPoint) -> Result<Walk, CoreError> {
        let skel = self.skeleton_or_err()?;
        // A leaf at the end of an infinite edge: walk to the divisorial
        // end, then onto the edge without end.
        if let GraphPoint::AtVertex(v) = p {
            if self.vertex(*v).kind.is_leaf_kind() {
                let (id, e) = self
                    .incident(*v)
                    .next()
                    .ok_or_else(|| CoreError::Structural("leaf without an edge".into()))?;
                if e.b != *v {
                    return Err(CoreError::Structural(
                        "infinite edge oriented away from its leaf".into(),
                    ));
                }
                let mut walk = if skel.vertices.contains(&e.a) {
                    Walk {
                        attachment: GraphPoint::AtVertex(e.a),
                        steps: Vec::new(),
                        target: WalkTarget::InfiniteLeaf,
                    }
                } else {
                    let mut w = self.walk_to_vertex(skel, e.a)?;
                    w.target = WalkTarget::InfiniteLeaf;
                    w
                };
                let depth = walk
                    .steps
                    .last()
                    .map(|s| {
                        s.start_depth
                            .add(s.length.as_ref().expect("interior steps are finite"))
                    })
                    .unwrap_or_else(|| GroupElem::zero(self.rank));
                walk.steps.push(Step {
                    edge: id,
                    enter_offset: GroupElem::zero(self.rank),
                    forward: true,
                    start_depth: depth,
                    length: None,
                });
                return Ok(walk);
            }
        }
        match p {
            GraphPoint::AtVertex(v) => self.walk_to_vertex(skel, *v),
            GraphPoint::OnEdge { edge, offset } => {
                let e = self.edge(*edge);
                // Direct attachments of the target edge to the skeleton.
                if let Some(stub) = skel.stubs.iter().find(|s| s.edge == *edge) {
                    let upto = stub
                        .upto
                        .as_elem()
                        .ok_or_else(|| CoreError::Structural("non-principal stub".into()))?;
                    return Ok(Walk {
                        attachment: GraphPoint::OnEdge {
                            edge: *edge,
                            offset: stub.upto.clone(),
                        },
                        steps: vec![Step {
                            edge: *edge,
                            enter_offset: upto,
                            forward: true,
                            start_depth: GroupElem::zero(self.rank),
                            length: None,
                        }],
                        target: WalkTarget::EdgeOffset(offset.clone()),
                    });
                }
                if skel.vertices.contains(&e.a) {
                    return Ok(Walk {
                        attachment: GraphPoint::AtVertex(e.a),
                        steps: vec![Step {
                            edge: *edge,
                            enter_offset: GroupElem::zero(self.rank),
                            forward: true,
                            start_depth: GroupElem::zero(self.rank),
                            length: None,
                        }],
                        target: WalkTarget::EdgeOffset(offset.clone()),
                    });
                }
                if skel.vertices.contains(&e.b) {
                    let len = match &e.length {
                        EdgeLength::Finite(l) => l.clone(),
                        EdgeLength::Infinite => {
                            return Err(CoreError::Structural(
                                "skeleton attaches through the infinite end of an edge".into(),
                            ))
                        }
                    };
                    return Ok(Walk {
                        attachment: GraphPoint::AtVertex(e.b),
                        steps: vec![Step {
                            edge: *edge,
                            enter_offset: len,
                            forward: false,
                            start_depth: GroupElem::zero(self.rank),
                            length: None,
                        }],
                        target: WalkTarget::EdgeOffset(offset.clone()),
                    });
                }
                // Interior edge of a hanging tree: walk to the endpoint
                // nearer the skeleton, then onto the edge.
                let wa = self.walk_to_vertex(skel, e.a);
                let wb = self.walk_to_vertex(skel, e.b);
                let (mut walk, forward) = match (wa, wb) {
                    (Ok(a), Ok(b)) => {
                        if a.depth_at_end() <= b.depth_at_end() {
                            (a, true)
                        } else {
                            (b, false)
                        }
                    }
                    (Ok(a), Err(_)) => (a, true),
                    (Err(_), Ok(b)) => (b, false),
                    (Err(e), Err(_)) => return Err(e),
                };
                let depth = walk.depth_at_end();
                let (enter, length) = if forward {
                    (GroupElem::zero(self.rank), None)
                } else {
                    match &e.length {
                        EdgeLength::Finite(l) => (l.clone(), None),
                        EdgeLength::Infinite => {
                            return Err(CoreError::Structural(
                                "walk enters an infinite edge from its leaf end".into(),
                            ))
                        }
                    }
                };
                walk.steps.push(Step {
                    edge: *edge,
                    enter_offset: enter,
                    forward,
                    start_depth: depth,
                    length,
                });
                walk.target = WalkTarget::EdgeOffset(offset.clone());
                Ok(walk)
            }
        }
    }

    /// BFS walk from the skeleton to a non-skeleton divisorial vertex.
    fn walk_to_vertex(&self, skel: &Skeleton, target: VertexId) -> Result<Walk, CoreError> {
        let mut parent: BTreeMap<VertexId, (GraphPoint, Step)> = BTreeMap::new();
        let mut depth: BTreeMap<VertexId, GroupElem> = BTreeMap::new();
        let mut queue: VecDeque<VertexId> = VecDeque::new();
        let try_seed =
            |v: VertexId,
             d: GroupElem,
             attach: GraphPoint,
             step: Step,
             parent: &mut BTreeMap<VertexId, (GraphPoint, Step)>,
             depth: &mut BTreeMap<VertexId, GroupElem>,
             queue: &mut VecDeque<VertexId>| {
                if let std::collections::btree_map::Entry::Vacant(slot) = parent.entry(v) {
                    slot.insert((attach, step));
                    depth.insert(v, d);
                    queue.push_back(v);
                }
            };
        for (i, e) in self.edges.iter().enumerate() {
            let id = EdgeId(i);
            if skel.edges.contains(&id) {
                continue;
            }
            if let Some(stub) = skel.stubs.iter().find(|s| s.edge == id) {
                if skel.vertices.contains(&e.b) {
                    continue;
                }
                let Some(upto) = stub.upto.as_elem() else { continue };
                let len = match &e.length {
                    EdgeLength::Finite(l) => l.clone(),
                    EdgeLength::Infinite => continue,
                };
                let d = len.sub(&upto);
                try_seed(
                    e.b,
                    d.clone(),
                    GraphPoint::OnEdge {
                        edge: id,
                        offset: stub.upto.clone(),
                    },
                    Step {
                        edge: id,
                        enter_offset: upto,
                        forward: true,
                        start_depth: GroupElem::zero(self.rank),
                        length: Some(d),
                    },
                    &mut parent,
                    &mut depth,
                    &mut queue,
                );
                continue;
            }
            let (inside, outside_v, forward) =
                match (skel.vertices.contains(&e.a), skel.vertices.contains(&e.b)) {
                    (true, false) => (e.a, e.b, true),
                    (false, true) => (e.b, e.a, false),
                    _ => continue,
                };
            let len = match &e.length {
                EdgeLength::Finite(l) => l.clone(),
                EdgeLength::Infinite => continue,
            };
            try_seed(
                outside_v,
                len.clone(),
                GraphPoint::AtVertex(inside),
                Step {
                    edge: id,
                    enter_offset: if forward {
                        GroupElem::zero(self.rank)
                    } else {
                        len.clone()
                    },
                    forward,
                    start_depth: GroupElem::zero(self.rank),
                    length: Some(len),
                },
                &mut parent,
                &mut depth,
                &mut queue,
            );
        }
        while let Some(v) = queue.pop_front() {
            if v == target {
                break;
            }
            let d_v = depth.get(&v).expect("queued with depth").clone();
            let attach = parent.get(&v).map(|(a, _)| a.clone()).expect("seeded");
            for (id, e) in self.incident(v) {
                let w = e.other(v);
                if skel.vertices.contains(&w) || parent.contains_key(&w) {
                    continue;
                }
                let len = match &e.length {
                    EdgeLength::Finite(l) => l.clone(),
                    EdgeLength::Infinite => continue,
                };
                let forward = e.a == v;
                parent.insert(
                    w,
                    (
                        attach.clone(),
                        Step {
                            edge: id,
                            enter_offset: if forward {
                                GroupElem::zero(self.rank)
                            } else {
                                len.clone()
                            },
                            forward,
                            start_depth: d_v.clone(),
                            length: Some(len.clone()),
                        },
                    ),
                );
                depth.insert(w, d_v.add(&len));
                queue.push_back(w);
            }
        }
        if !parent.contains_key(&target) {
            return Err(CoreError::Domain(
                "point is not connected to the skeleton".into(),
            ));
        }
        let mut steps = Vec::new();
        let mut cursor = target;
        let attachment = loop {
            let (attach, step) = parent.get(&cursor).cloned().expect("walk reconstruction");
            let back = if step.forward {
                self.edge(step.edge).a
            } else {
                self.edge(step.edge).b
            };
            steps.push(step);
            if parent.contains_key(&back) {
                cursor = back;
            } else {
                break attach;
            }
        };
        steps.reverse();
        Ok(Walk {
            attachment,
            steps,
            target: WalkTarget::Vertex,
        })
    }

    /// Distance between two vertices along finite edges.
    pub fn tree_distance(&self, u: VertexId, v: VertexId) -> Result<GroupElem, CoreError> {
        if u == v {
            return Ok(GroupElem::zero(self.rank));
        }
        let mut dist: BTreeMap<VertexId, GroupElem> = BTreeMap::new();
        dist.insert(u, GroupElem::zero(self.rank));
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            let dx = dist[&x].clone();
            for (_, e) in self.incident(x) {
                let y = e.other(x);
                if dist.contains_key(&y) {
                    continue;
                }
                let len = match &e.length {
                    EdgeLength::Finite(l) => l.clone(),
                    EdgeLength::Infinite => continue,
                };
                dist.insert(y, dx.add(&len));
                if y == v {
                    return Ok(dist[&v].clone());
                }
                queue.push_back(y);
            }
        }
        Err(CoreError::Domain(
            "vertices are not connected by finite edges".into(),
        ))
    }

    /// Vertices along the path between two vertices.
    pub fn path_vertices(&self, u: VertexId, v: VertexId) -> Result<Vec<VertexId>, CoreError> {
        let mut parent: BTreeMap<VertexId, VertexId> = BTreeMap::new();
        parent.insert(u, u);
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            if x == v {
                break;
            }
            for (_, e) in self.incident(x) {
                let y = e.other(x);
                if let std::collections::btree_map::Entry::Vacant(slot) = parent.entry(y) {
                    slot.insert(x);
                    queue.push_back(y);
                }
            }
        }
        if !parent.contains_key(&v) {
            return Err(CoreError::Domain("vertices are not connected".into()));
        }
        let mut path = vec![v];
        let mut cur = v;
        while cur != u {
            cur = parent[&cur];
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }

    /// Deterministic DOT rendering with edge lengths and skeleton marks.
    pub fn to_dot(&self, extra_edge_labels: &BTreeMap<usize, String>) -> String {
        let escape = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
        let mut out = String::from("graph gamma {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let shape = match v.kind {
                VertexKind::Divisorial => "circle",
                VertexKind::ClassicalLeaf => "point",
                VertexKind::UnboundedLeaf => "diamond",
            };
            let in_skel = self
                .skeleton
                .as_ref()
                .is_some_and(|s| s.vertices.contains(&VertexId(i)));
            let style = if in_skel { ", penwidth=2" } else { "" };
            let _ = writeln!(
                out,
                "  v{i} [label=\"{}\", shape={shape}{style}];",
                escape(&v.name)
            );
        }
        for (i, e) in self.edges.iter().enumerate() {
            let len = match &e.length {
                EdgeLength::Finite(l) => format!("({l})"),
                EdgeLength::Infinite => "inf".to_string(),
            };
            let label = match extra_edge_labels.get(&i) {
                Some(extra) => format!("{len} {extra}"),
                None => len,
            };
            let in_skel = self
                .skeleton
                .as_ref()
                .is_some_and(|s| s.edges.contains(&EdgeId(i)));
            let style = if in_skel {
                ", penwidth=2"
            } else if matches!(e.length, EdgeLength::Infinite) {
                ", style=dashed"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  v{} -- v{} [label=\"{label}\"{style}];",
                e.a.0, e.b.0
            );
        }
        out.push_str("}\n");
        out
    }
}

/// One oriented step of a walk away from the skeleton.
#[derive(Clone, Debug)]
struct Step {
    edge: EdgeId,
    /// Offset (in the edge's own coordinate) at which the walk enters.
    enter_offset: GroupElem,
    /// Whether the walk traverses from `a` to `b`.
    forward: bool,
    /// Cumulative distance from the skeleton at the start of this step.
    start_depth: GroupElem,
    /// Full traversal length when the walk crosses the whole edge.
    length: Option<GroupElem>,
}

#[derive(Clone, Debug)]
enum WalkTarget {
    Vertex,
    EdgeOffset(Ranger),
    InfiniteLeaf,
}

struct Walk {
    attachment: GraphPoint,
    steps: Vec<Step>,
    target: WalkTarget,
}

impl Walk {
    fn depth_at_end(&self) -> GroupElem {
        match self.steps.last() {
            Some(s) => s
                .start_depth
                .add(s.length.as_ref().expect("interior steps are finite")),
            None => match &self.attachment {
                GraphPoint::AtVertex(_) | GraphPoint::OnEdge { .. } => {
                    // empty walk starts on the skeleton itself
                    GroupElem::zero(rank_of_point(&self.attachment))
                }
            },
        }
    }
}

fn rank_of_point(p: &GraphPoint) -> usize {
    match p {
        GraphPoint::AtVertex(_) => 0,
        GraphPoint::OnEdge { offset, .. } => offset.rank(),
    }
}

// ---------------------------------------------------------------------
// Quotients by finite isometric actions
// ---------------------------------------------------------------------

/// A permutation of vertices and edges, supplied explicitly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphPermutation {
    pub vertex_map: Vec<usize>,
    pub edge_map: Vec<usize>,
}

/// Result of a quotient: the refined source (reversed edges subdivided at
/// their midpoints), the quotient tree, the vertex projection, and the
/// order of the generated group.
#[derive(Clone, Debug)]
pub struct QuotientResult {
    pub source: GammaGraph,
    pub quotient: GammaGraph,
    pub vertex_image: Vec<VertexId>,
    pub group_order: usize,
    pub root: VertexId,
}

const MAX_GROUP_ORDER: usize = 720;

impl GammaGraph {
    /// Quotient of a tree by the finite group generated by the supplied
    /// isometric permutations. Edges reversed by a group element are
    /// subdivided at their midpoint first. The action must fix the given
    /// root, or, when `root` is `None`, must fix at least one vertex of
    /// the refined tree.
    pub fn quotient(
        &self,
        generators: &[GraphPermutation],
        root: Option<VertexId>,
    ) -> Result<QuotientResult, CoreError> {
        if !self.is_tree() {
            return Err(CoreError::Domain("quotients require a tree".into()));
        }
        for g in generators {
            self.validate_permutation(g)?;
        }
        if let Some(r) = root {
            for g in generators {
                if g.vertex_map[r.0] != r.0 {
                    return Err(CoreError::Domain("the action must fix the root".into()));
                }
            }
        }
        let group = close_group(self, generators)?;
        // Edges mapped to themselves with swapped endpoints get halved, so
        // the quotient stays a tree; close the set under the action.
        let mut to_subdivide: BTreeSet<usize> = BTreeSet::new();
        for g in &group {
            for (i, e) in self.edges.iter().enumerate() {
                let img = g.edge_map[i];
                let ie = &self.edges[img];
                if img == i && g.vertex_map[e.a.0] == ie.b.0 && g.vertex_map[e.b.0] == ie.a.0 {
                    to_subdivide.insert(i);
                }
            }
        }
        loop {
            let before = to_subdivide.len();
            for g in &group {
                for i in to_subdivide.clone() {
                    to_subdivide.insert(g.edge_map[i]);
                }
            }
            if to_subdivide.len() == before {
                break;
            }
        }
        let (refined, refined_group) = self.subdivide_for_quotient(&to_subdivide, &group)?;
        // The action must fix some vertex of the refined tree.
        let n = refined.vertices.len();
        let fixed_root = match root {
            Some(r) => r,
            None => VertexId(
                (0..n)
                    .find(|&v| refined_group.iter().all(|g| g.vertex_map[v] == v))
                    .ok_or_else(|| CoreError::Domain("the action fixes no root".into()))?,
            ),
        };
        // Vertex orbits.
        let mut orbit_rep: Vec<usize> = (0..n).collect();
        for g in &refined_group {
            for v in 0..n {
                let w = g.vertex_map[v];
                let (rv, rw) = (rep(&mut orbit_rep, v), rep(&mut orbit_rep, w));
                if rv != rw {
                    let (lo, hi) = (rv.min(rw), rv.max(rw));
                    orbit_rep[hi] = lo;
                }
            }
        }
        let mut reps: Vec<usize> = (0..n).filter(|&v| rep(&mut orbit_rep, v) == v).collect();
        reps.sort_unstable();
        let quotient_index: BTreeMap<usize, usize> =
            reps.iter().enumerate().map(|(qi, &v)| (v, qi)).collect();
        let q_vertices: Vec<Vertex> = reps
            .iter()
            .map(|&v| refined.vertices[v].clone())
            .collect();
        // Edge orbits.
        let m = refined.edges.len();
        let mut edge_rep: Vec<usize> = (0..m).collect();
        for g in &refined_group {
            for e in 0..m {
                let f = g.edge_map[e];
                let (re, rf) = (rep(&mut edge_rep, e), rep(&mut edge_rep, f));
                if re != rf {
                    let (lo, hi) = (re.min(rf), re.max(rf));
                    edge_rep[hi] = lo;
                }
            }
        }
        let mut q_edges: Vec<Edge> = Vec::new();
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
        for e in 0..m {
            if rep(&mut edge_rep, e) != e {
                continue;
            }
            let edge = &refined.edges[e];
            let qa = quotient_index[&rep(&mut orbit_rep, edge.a.0)];
            let qb = quotient_index[&rep(&mut orbit_rep, edge.b.0)];
            if qa == qb {
                return Err(CoreError::Structural(
                    "edge collapsed to a loop in the quotient".into(),
                ));
            }
            if !seen.insert((qa.min(qb), qa.max(qb))) {
                continue;
            }
            q_edges.push(Edge {
                a: VertexId(qa),
                b: VertexId(qb),
                length: edge.length.clone(),
            });
        }
        let vertex_image: Vec<VertexId> = (0..n)
            .map(|v| VertexId(quotient_index[&rep(&mut orbit_rep, v)]))
            .collect();
        Ok(QuotientResult {
            source: refined,
            quotient: GammaGraph::new(self.rank, q_vertices, q_edges),
            root: fixed_root,
            vertex_image,
            group_order: refined_group.len(),
        })
    }

    fn validate_permutation(&self, g: &GraphPermutation) -> Result<(), CoreError> {
        let n = self.vertices.len();
        let m = self.edges.len();
        if g.vertex_map.len() != n || g.edge_map.len() != m {
            return Err(CoreError::Structural("permutation size mismatch".into()));
        }
        let mut seen_v = vec![false; n];
        for &v in &g.vertex_map {
            if v >= n || seen_v[v] {
                return Err(CoreError::Structural("vertex map is not a bijection".into()));
            }
            seen_v[v] = true;
        }
        let mut seen_e = vec![false; m];
        for &e in &g.edge_map {
            if e >= m || seen_e[e] {
                return Err(CoreError::Structural("edge map is not a bijection".into()));
            }
            seen_e[e] = true;
        }
        for (i, e) in self.edges.iter().enumerate() {
            let img = &self.edges[g.edge_map[i]];
            let (ia, ib) = (g.vertex_map[e.a.0], g.vertex_map[e.b.0]);
            let incidence_ok =
                (ia == img.a.0 && ib == img.b.0) || (ia == img.b.0 && ib == img.a.0);
            if !incidence_ok {
                return Err(CoreError::Domain(format!(
                    "permutation does not respect incidence on edge {i}"
                )));
            }
            if e.length != img.length {
                return Err(CoreError::Domain(format!(
                    "permutation is not isometric on edge {i}"
                )));
            }
            if self.vertices[e.a.0].kind != self.vertices[ia].kind
                || self.vertices[e.b.0].kind != self.vertices[ib].kind
            {
                return Err(CoreError::Domain(
                    "permutation does not preserve vertex kinds".into(),
                ));
            }
        }
        Ok(())
    }

    /// Subdivides the given edges at their midpoints and extends the group
    /// to the refined graph.
    fn subdivide_for_quotient(
        &self,
        edges: &BTreeSet<usize>,
        group: &[GraphPermutation],
    ) -> Result<(GammaGraph, Vec<GraphPermutation>), CoreError> {
        if edges.is_empty() {
            return Ok((self.clone(), group.to_vec()));
        }
        let mut vertices = self.vertices.clone();
        let mut new_edges: Vec<Edge> = Vec::new();
        // original edge -> whole edge id, or (a-half, b-half, midpoint)
        let mut images: Vec<Result<usize, (usize, usize, usize)>> = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if edges.contains(&i) {
                let len = match &e.length {
                    EdgeLength::Finite(l) => l,
                    EdgeLength::Infinite => {
                        return Err(CoreError::Structural(
                            "cannot halve an infinite edge".into(),
                        ))
                    }
                };
                let half = len.scale(&crate::ordgroup::rat(1, 2));
                let mid = vertices.len();
                vertices.push(Vertex {
                    name: format!(
                        "{}~{}",
                        self.vertices[e.a.0].name, self.vertices[e.b.0].name
                    ),
                    kind: VertexKind::Divisorial,
                });
                let a_half = new_edges.len();
                new_edges.push(Edge {
                    a: e.a,
                    b: VertexId(mid),
                    length: EdgeLength::Finite(half.clone()),
                });
                let b_half = new_edges.len();
                new_edges.push(Edge {
                    a: VertexId(mid),
                    b: e.b,
                    length: EdgeLength::Finite(half),
                });
                images.push(Err((a_half, b_half, mid)));
            } else {
                let id = new_edges.len();
                new_edges.push(e.clone());
                images.push(Ok(id));
            }
        }
        let refined = GammaGraph::new(self.rank, vertices, new_edges);
        let mut refined_group = Vec::with_capacity(group.len());
        for g in group {
            let mut vmap: Vec<usize> = (0..refined.vertices.len()).collect();
            let mut emap: Vec<usize> = (0..refined.edges.len()).collect();
            vmap[..self.vertices.len()].copy_from_slice(&g.vertex_map);
            for (i, e) in self.edges.iter().enumerate() {
                let img = g.edge_map[i];
                match (&images[i], &images[img]) {
                    (Ok(src), Ok(dst)) => emap[*src] = *dst,
                    (Err((sa, sb, smid)), Err((da, db, dmid))) => {
                        vmap[*smid] = *dmid;
                        let preserves = g.vertex_map[e.a.0] == self.edges[img].a.0;
                        if preserves {
                            emap[*sa] = *da;
                            emap[*sb] = *db;
                        } else {
                            emap[*sa] = *db;
                            emap[*sb] = *da;
                        }
                    }
                    _ => {
                        return Err(CoreError::Structural(
                            "subdivision set is not action-closed".into(),
                        ))
                    }
                }
            }
            refined_group.push(GraphPermutation {
                vertex_map: vmap,
                edge_map: emap,
            });
        }
        Ok((refined, refined_group))
    }
}

fn rep(dsu: &mut Vec<usize>, x: usize) -> usize {
    if dsu[x] != x {
        let r = rep(dsu, dsu[x]);
        dsu[x] = r;
    }
    dsu[x]
}

/// Closes a set of permutations into the full generated group.
fn close_group(
    graph: &GammaGraph,
    generators: &[GraphPermutation],
) -> Result<Vec<GraphPermutation>, CoreError> {
    let n = graph.vertices.len();
    let m = graph.edges.len();
    let identity = GraphPermutation {
        vertex_map: (0..n).collect(),
        edge_map: (0..m).collect(),
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
        if group.len() > MAX_GROUP_ORDER {
            return Err(CoreError::Domain(format!(
                "group order exceeds the supported bound {MAX_GROUP_ORDER}"
            )));
        }
        frontier = next;
    }
    Ok(group)
}
