//! Declarative scenario files: a group, optional center configuration,
//! named rangers, points, functions, maps, graphs and finite spaces, and
//! a list of commands. Validation walks the raw JSON with pointer
//! tracking so schema errors report the offending path.

use std::collections::BTreeMap;

use adic_core::gammagraph::{
    Edge, EdgeId, EdgeLength, GammaGraph, GraphPermutation, Skeleton, Stub, Vertex, VertexId,
    VertexKind,
};
use adic_core::ordgroup::rat_from_str;
use adic_core::p1tree::{CenterConfig, FactoredFn, MapData, MapEntry, P1Point};
use adic_core::plfun::{Pinch, PlFn};
use adic_core::quasitop::FiniteSpace;
use adic_core::spa::{A1Point, LinElem};
use adic_core::{Group, GroupElem, Ranger};
use serde_json::Value;

/// A schema violation with the JSON pointer of the offending value.
#[derive(Debug, Clone)]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at {}", self.message, self.pointer)
    }
}

fn err<T>(pointer: &str, message: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError {
        pointer: pointer.to_string(),
        message: message.into(),
    })
}

pub struct Scenario {
    pub group: Group,
    pub config: Option<CenterConfig>,
    pub rangers: BTreeMap<String, Ranger>,
    pub elems: BTreeMap<String, GroupElem>,
    pub points: BTreeMap<String, P1Point>,
    pub functions: BTreeMap<String, FactoredFn>,
    pub maps: BTreeMap<String, ScenarioMap>,
    pub plfns: BTreeMap<String, PlFn>,
    pub graphs: BTreeMap<String, GammaGraph>,
    pub actions: BTreeMap<String, ScenarioAction>,
    pub spaces: BTreeMap<String, FiniteSpace>,
    pub a1points: BTreeMap<String, A1Point>,
    pub linelems: BTreeMap<String, LinElem>,
    pub commands: Vec<Command>,
}

pub struct ScenarioMap {
    pub target: CenterConfig,
    pub data: MapData,
}

pub struct ScenarioAction {
    pub graph: String,
    pub permutation: GraphPermutation,
}

/// A point reference inside a graph command: resolved against the graph
/// when the command runs.
#[derive(Debug, Clone)]
pub enum RawGraphPoint {
    Vertex(String),
    Edge { index: usize, offset: Ranger },
}

/// A target-skeleton piece with the center still as a label; resolved
/// against the map's target configuration.
#[derive(Debug, Clone)]
pub struct RawSegment {
    pub center: String,
    pub lo: Option<GroupElem>,
    pub hi: Option<GroupElem>,
}

#[derive(Debug, Clone)]
pub enum Command {
    Cmp { left: String, right: String },
    Classify { ranger: String },
    Translate { ranger: String, by: String },
    Project { ranger: String, to: usize },
    Spec,
    SpaMember { point: String, f: String },
    PlEval { plfn: String, at: String },
    GraphValidate { graph: String },
    Retract { graph: String, t: String, point: RawGraphPoint },
    Quotient { action: String, root: Option<String> },
    P1Distance { x: String, y: String },
    AbsVal { f: String, point: String },
    Slopes { f: String, center: String, at: String },
    Triangulate { points: Vec<String> },
    Pullback { map: String, segments: Vec<RawSegment> },
    QuasiCheck { space: String, bound: usize },
}

pub fn parse_scenario(root: &Value) -> Result<Scenario, SchemaError> {
    let obj = as_object(root, "")?;
    let group = parse_group(field(obj, "", "group")?)?;
    let rank = group.rank();
    let config = match obj.get("centers") {
        Some(_) => Some(parse_config(obj, "", rank)?),
        None => None,
    };
    let mut rangers = BTreeMap::new();
    if let Some(v) = obj.get("rangers") {
        for (name, rv) in as_object(v, "/rangers")? {
            let ptr = format!("/rangers/{name}");
            let r = Ranger::from_json(rv, rank).map_err(|e| SchemaError {
                pointer: ptr,
                message: e.to_string(),
            })?;
            rangers.insert(name.clone(), r);
        }
    }
    let mut elems = BTreeMap::new();
    if let Some(v) = obj.get("elems") {
        for (name, ev) in as_object(v, "/elems")? {
            let ptr = format!("/elems/{name}");
            elems.insert(name.clone(), parse_elem(ev, &ptr, rank)?);
        }
    }
    let mut points = BTreeMap::new();
    if let Some(v) = obj.get("points") {
        let cfg = config.as_ref().ok_or_else(|| SchemaError {
            pointer: "/points".into(),
            message: "points require a center configuration".into(),
        })?;
        for (name, pv) in as_object(v, "/points")? {
            let ptr = format!("/points/{name}");
            points.insert(name.clone(), parse_point(pv, &ptr, cfg, rank)?);
        }
    }
    let mut functions = BTreeMap::new();
    if let Some(v) = obj.get("functions") {
        let cfg = config.as_ref().ok_or_else(|| SchemaError {
            pointer: "/functions".into(),
            message: "functions require a center configuration".into(),
        })?;
        for (name, fv) in as_object(v, "/functions")? {
            let ptr = format!("/functions/{name}");
            functions.insert(name.clone(), parse_factored(fv, &ptr, cfg, rank)?);
        }
    }
    let mut maps = BTreeMap::new();
    if let Some(v) = obj.get("maps") {
        let cfg = config.as_ref().ok_or_else(|| SchemaError {
            pointer: "/maps".into(),
            message: "maps require a center configuration".into(),
        })?;
        for (name, mv) in as_object(v, "/maps")? {
            let ptr = format!("/maps/{name}");
            maps.insert(name.clone(), parse_map(mv, &ptr, cfg, rank)?);
        }
    }
    let mut plfns = BTreeMap::new();
    if let Some(v) = obj.get("plfns") {
        for (name, fv) in as_object(v, "/plfns")? {
            let ptr = format!("/plfns/{name}");
            plfns.insert(name.clone(), parse_plfn(fv, &ptr, rank)?);
        }
    }
    let mut graphs = BTreeMap::new();
    if let Some(v) = obj.get("graphs") {
        for (name, gv) in as_object(v, "/graphs")? {
            let ptr = format!("/graphs/{name}");
            graphs.insert(name.clone(), parse_graph(gv, &ptr, rank)?);
        }
    }
    let mut actions = BTreeMap::new();
    if let Some(v) = obj.get("actions") {
        for (name, av) in as_object(v, "/actions")? {
            let ptr = format!("/actions/{name}");
            actions.insert(name.clone(), parse_action(av, &ptr, &graphs)?);
        }
    }
    let mut spaces = BTreeMap::new();
    if let Some(v) = obj.get("spaces") {
        for (name, sv) in as_object(v, "/spaces")? {
            let ptr = format!("/spaces/{name}");
            spaces.insert(name.clone(), parse_space(sv, &ptr)?);
        }
    }
    let mut a1points = BTreeMap::new();
    if let Some(v) = obj.get("a1points") {
        for (name, pv) in as_object(v, "/a1points")? {
            let ptr = format!("/a1points/{name}");
            a1points.insert(name.clone(), parse_a1point(pv, &ptr, &group)?);
        }
    }
    let mut linelems = BTreeMap::new();
    if let Some(v) = obj.get("linelems") {
        for (name, lv) in as_object(v, "/linelems")? {
            let ptr = format!("/linelems/{name}");
            linelems.insert(name.clone(), parse_linelem(lv, &ptr, rank)?);
        }
    }
    let commands_v = field(obj, "", "commands")?;
    let commands_arr = as_array(commands_v, "/commands")?;
    let mut commands = Vec::new();
    for (i, cv) in commands_arr.iter().enumerate() {
        let ptr = format!("/commands/{i}");
        commands.push(parse_command(cv, &ptr, rank)?);
    }
    let scenario = Scenario {
        group,
        config,
        rangers,
        elems,
        points,
        functions,
        maps,
        plfns,
        graphs,
        actions,
        spaces,
        a1points,
        linelems,
        commands,
    };
    check_references(&scenario)?;
    Ok(scenario)
}

/// All command references must resolve before execution starts.
fn check_references(s: &Scenario) -> Result<(), SchemaError> {
    for (i, cmd) in s.commands.iter().enumerate() {
        let ptr = format!("/commands/{i}");
        let need = |ok: bool, what: &str, name: &str| -> Result<(), SchemaError> {
            if ok {
                Ok(())
            } else {
                err(&ptr, format!("unknown {what} {name:?}"))
            }
        };
        match cmd {
            Command::Cmp { left, right } => {
                need(s.rangers.contains_key(left), "ranger", left)?;
                need(s.rangers.contains_key(right), "ranger", right)?;
            }
            Command::Classify { ranger } => {
                need(s.rangers.contains_key(ranger), "ranger", ranger)?
            }
            Command::Translate { ranger, by } => {
                need(s.rangers.contains_key(ranger), "ranger", ranger)?;
                need(s.elems.contains_key(by), "elem", by)?;
            }
            Command::Project { ranger, to } => {
                need(s.rangers.contains_key(ranger), "ranger", ranger)?;
                if *to >= s.group.rank() || *to == 0 {
                    return err(
                        &ptr,
                        "projection index must lie strictly between 0 and the rank",
                    );
                }
            }
            Command::Spec => {}
            Command::SpaMember { point, f } => {
                need(s.a1points.contains_key(point), "a1point", point)?;
                need(s.linelems.contains_key(f), "linelem", f)?;
            }
            Command::PlEval { plfn, at } => {
                need(s.plfns.contains_key(plfn), "plfn", plfn)?;
                need(s.rangers.contains_key(at), "ranger", at)?;
            }
            Command::GraphValidate { graph } => {
                need(s.graphs.contains_key(graph), "graph", graph)?
            }
            Command::Retract { graph, t, point } => {
                need(s.graphs.contains_key(graph), "graph", graph)?;
                need(s.rangers.contains_key(t), "ranger", t)?;
                if let (RawGraphPoint::Vertex(name), Some(g)) = (point, s.graphs.get(graph)) {
                    need(g.vertex_by_name(name).is_some(), "vertex", name)?;
                }
            }
            Command::Quotient { action, root } => {
                need(s.actions.contains_key(action), "action", action)?;
                if let (Some(root_name), Some(a)) = (root, s.actions.get(action)) {
                    if let Some(g) = s.graphs.get(&a.graph) {
                        need(g.vertex_by_name(root_name).is_some(), "vertex", root_name)?;
                    }
                }
            }
            Command::P1Distance { x, y } => {
                need(s.points.contains_key(x), "point", x)?;
                need(s.points.contains_key(y), "point", y)?;
            }
            Command::AbsVal { f, point } => {
                need(s.functions.contains_key(f), "function", f)?;
                need(s.points.contains_key(point), "point", point)?;
            }
            Command::Slopes { f, center, at } => {
                need(s.functions.contains_key(f), "function", f)?;
                need(s.rangers.contains_key(at), "ranger", at)?;
                match &s.config {
                    Some(cfg) => need(cfg.center_by_label(center).is_some(), "center", center)?,
                    None => return err(&ptr, "slopes require a center configuration"),
                }
            }
            Command::Triangulate { points } => {
                for p in points {
                    need(s.points.contains_key(p), "point", p)?;
                }
            }
            Command::Pullback { map, segments } => {
                need(s.maps.contains_key(map), "map", map)?;
                if let Some(m) = s.maps.get(map) {
                    for seg in segments {
                        need(
                            m.target.center_by_label(&seg.center).is_some(),
                            "target center",
                            &seg.center,
                        )?;
                    }
                }
            }
            Command::QuasiCheck { space, .. } => {
                need(s.spaces.contains_key(space), "space", space)?
            }
        }
    }
    Ok(())
}

// --------------------------------------------------------------------
// leaf parsers
// --------------------------------------------------------------------

fn as_object<'a>(
    v: &'a Value,
    ptr: &str,
) -> Result<&'a serde_json::Map<String, Value>, SchemaError> {
    v.as_object().ok_or_else(|| SchemaError {
        pointer: ptr.to_string(),
        message: "expected an object".into(),
    })
}

fn as_array<'a>(v: &'a Value, ptr: &str) -> Result<&'a Vec<Value>, SchemaError> {
    v.as_array().ok_or_else(|| SchemaError {
        pointer: ptr.to_string(),
        message: "expected an array".into(),
    })
}

fn field<'a>(
    obj: &'a serde_json::Map<String, Value>,
    ptr: &str,
    key: &str,
) -> Result<&'a Value, SchemaError> {
    obj.get(key).ok_or_else(|| SchemaError {
        pointer: format!("{ptr}/{key}"),
        message: "missing field".into(),
    })
}

fn as_str<'a>(v: &'a Value, ptr: &str) -> Result<&'a str, SchemaError> {
    v.as_str().ok_or_else(|| SchemaError {
        pointer: ptr.to_string(),
        message: "expected a string".into(),
    })
}

fn as_usize(v: &Value, ptr: &str) -> Result<usize, SchemaError> {
    v.as_u64().map(|n| n as usize).ok_or_else(|| SchemaError {
        pointer: ptr.to_string(),
        message: "expected a nonnegative integer".into(),
    })
}

fn as_i64(v: &Value, ptr: &str) -> Result<i64, SchemaError> {
    v.as_i64().ok_or_else(|| SchemaError {
        pointer: ptr.to_string(),
        message: "expected an integer".into(),
    })
}

fn parse_group(v: &Value) -> Result<Group, SchemaError> {
    let obj = as_object(v, "/group")?;
    let rank = as_usize(field(obj, "/group", "rank")?, "/group/rank")?;
    if rank == 0 {
        return err("/group/rank", "rank must be at least 1");
    }
    match obj.get("lattice") {
        None => Group::new(rank).map_err(|e| SchemaError {
            pointer: "/group".into(),
            message: e.to_string(),
        }),
        Some(lv) => {
            let rows = as_array(lv, "/group/lattice")?;
            let mut basis = Vec::new();
            for (i, row) in rows.iter().enumerate() {
                let ptr = format!("/group/lattice/{i}");
                basis.push(parse_elem(row, &ptr, rank)?);
            }
            Group::with_lattice(rank, basis).map_err(|e| SchemaError {
                pointer: "/group/lattice".into(),
                message: e.to_string(),
            })
        }
    }
}

fn parse_elem(v: &Value, ptr: &str, rank: usize) -> Result<GroupElem, SchemaError> {
    let arr = as_array(v, ptr)?;
    if arr.len() != rank {
        return err(
            ptr,
            format!("expected {rank} coordinates, got {}", arr.len()),
        );
    }
    let mut coords = Vec::with_capacity(rank);
    for (i, c) in arr.iter().enumerate() {
        let cptr = format!("{ptr}/{i}");
        let s = as_str(c, &cptr)?;
        let q = rat_from_str(s).map_err(|e| SchemaError {
            pointer: cptr,
            message: e.to_string(),
        })?;
        coords.push(q);
    }
    Ok(GroupElem::new(coords))
}

fn parse_config(
    obj: &serde_json::Map<String, Value>,
    base: &str,
    rank: usize,
) -> Result<CenterConfig, SchemaError> {
    let centers_ptr = format!("{base}/centers");
    let centers_v = field(obj, base, "centers")?;
    let labels: Vec<String> = as_array(centers_v, &centers_ptr)?
        .iter()
        .enumerate()
        .map(|(i, v)| as_str(v, &format!("{centers_ptr}/{i}")).map(str::to_string))
        .collect::<Result<_, _>>()?;
    let mut pairs = Vec::new();
    if let Some(ld) = obj.get("logdist") {
        let ld_ptr = format!("{base}/logdist");
        for (i, entry) in as_array(ld, &ld_ptr)?.iter().enumerate() {
            let ptr = format!("{ld_ptr}/{i}");
            let triple = as_array(entry, &ptr)?;
            if triple.len() != 3 {
                return err(&ptr, "expected [center, center, elem]");
            }
            let a = as_str(&triple[0], &format!("{ptr}/0"))?;
            let b = as_str(&triple[1], &format!("{ptr}/1"))?;
            let d = parse_elem(&triple[2], &format!("{ptr}/2"), rank)?;
            let ai = labels
                .iter()
                .position(|l| l == a)
                .ok_or_else(|| SchemaError {
                    pointer: format!("{ptr}/0"),
                    message: format!("unknown center {a:?}"),
                })?;
            let bi = labels
                .iter()
                .position(|l| l == b)
                .ok_or_else(|| SchemaError {
                    pointer: format!("{ptr}/1"),
                    message: format!("unknown center {b:?}"),
                })?;
            pairs.push((ai, bi, d));
        }
    }
    let config = CenterConfig::new(rank, labels, &pairs).map_err(|e| SchemaError {
        pointer: format!("{base}/logdist"),
        message: e.to_string(),
    })?;
    let report = config.validate();
    if !report.is_valid() {
        return err(&format!("{base}/logdist"), report.issues.join("; "));
    }
    Ok(config)
}

fn parse_point(
    v: &Value,
    ptr: &str,
    config: &CenterConfig,
    rank: usize,
) -> Result<P1Point, SchemaError> {
    let obj = as_object(v, ptr)?;
    if obj.contains_key("infinity") {
        return Ok(P1Point::Infinity);
    }
    if let Some(c) = obj.get("classical") {
        let label = as_str(c, &format!("{ptr}/classical"))?;
        let id = config.center_by_label(label).ok_or_else(|| SchemaError {
            pointer: format!("{ptr}/classical"),
            message: format!("unknown center {label:?}"),
        })?;
        return Ok(P1Point::Classical(id));
    }
    let label = as_str(field(obj, ptr, "center")?, &format!("{ptr}/center"))?;
    let id = config.center_by_label(label).ok_or_else(|| SchemaError {
        pointer: format!("{ptr}/center"),
        message: format!("unknown center {label:?}"),
    })?;
    let rv = field(obj, ptr, "logradius")?;
    let radius = Ranger::from_json(rv, rank).map_err(|e| SchemaError {
        pointer: format!("{ptr}/logradius"),
        message: e.to_string(),
    })?;
    Ok(P1Point::monomial(id, radius))
}

fn parse_factored(
    v: &Value,
    ptr: &str,
    config: &CenterConfig,
    rank: usize,
) -> Result<FactoredFn, SchemaError> {
    let obj = as_object(v, ptr)?;
    let unit = parse_elem(field(obj, ptr, "unit")?, &format!("{ptr}/unit"), rank)?;
    let mut factors = Vec::new();
    if let Some(fv) = obj.get("factors") {
        for (i, pair) in as_array(fv, &format!("{ptr}/factors"))?.iter().enumerate() {
            let pptr = format!("{ptr}/factors/{i}");
            let arr = as_array(pair, &pptr)?;
            if arr.len() != 2 {
                return err(&pptr, "expected [center, multiplicity]");
            }
            let label = as_str(&arr[0], &format!("{pptr}/0"))?;
            let id = config.center_by_label(label).ok_or_else(|| SchemaError {
                pointer: format!("{pptr}/0"),
                message: format!("unknown center {label:?}"),
            })?;
            let m = as_i64(&arr[1], &format!("{pptr}/1"))?;
            if m == 0 {
                return err(&format!("{pptr}/1"), "multiplicity must be nonzero");
            }
            factors.push((id, m));
        }
    }
    Ok(FactoredFn::new(unit, factors))
}

fn parse_map(
    v: &Value,
    ptr: &str,
    source: &CenterConfig,
    rank: usize,
) -> Result<ScenarioMap, SchemaError> {
    let obj = as_object(v, ptr)?;
    let target_ptr = format!("{ptr}/target");
    let tv = as_object(field(obj, ptr, "target")?, &target_ptr)?;
    let target = parse_config(tv, &target_ptr, rank)?;
    let mut entries = Vec::new();
    for (i, ev) in as_array(field(obj, ptr, "entries")?, &format!("{ptr}/entries"))?
        .iter()
        .enumerate()
    {
        let eptr = format!("{ptr}/entries/{i}");
        let eobj = as_object(ev, &eptr)?;
        let label = as_str(field(eobj, &eptr, "base")?, &format!("{eptr}/base"))?;
        let base = target.center_by_label(label).ok_or_else(|| SchemaError {
            pointer: format!("{eptr}/base"),
            message: format!("unknown target center {label:?}"),
        })?;
        let factored = parse_factored(
            field(eobj, &eptr, "factored")?,
            &format!("{eptr}/factored"),
            source,
            rank,
        )?;
        entries.push(MapEntry { base, factored });
    }
    Ok(ScenarioMap {
        target,
        data: MapData { entries },
    })
}

fn parse_plfn(v: &Value, ptr: &str, rank: usize) -> Result<PlFn, SchemaError> {
    let obj = as_object(v, ptr)?;
    let domain_v = as_array(field(obj, ptr, "domain")?, &format!("{ptr}/domain"))?;
    if domain_v.len() != 2 {
        return err(&format!("{ptr}/domain"), "expected two endpoints");
    }
    let a = parse_elem(&domain_v[0], &format!("{ptr}/domain/0"), rank)?;
    let b = parse_elem(&domain_v[1], &format!("{ptr}/domain/1"), rank)?;
    let mut breakpoints = Vec::new();
    if let Some(bv) = obj.get("breakpoints") {
        for (i, e) in as_array(bv, &format!("{ptr}/breakpoints"))?
            .iter()
            .enumerate()
        {
            breakpoints.push(parse_elem(e, &format!("{ptr}/breakpoints/{i}"), rank)?);
        }
    }
    let mut slopes = Vec::new();
    for (i, s) in as_array(field(obj, ptr, "slopes")?, &format!("{ptr}/slopes"))?
        .iter()
        .enumerate()
    {
        slopes.push(as_i64(s, &format!("{ptr}/slopes/{i}"))?);
    }
    let anchor = parse_elem(field(obj, ptr, "anchor")?, &format!("{ptr}/anchor"), rank)?;
    let mut pinch = Pinch::default();
    if let Some(pv) = obj.get("pinch") {
        for (i, side) in as_array(pv, &format!("{ptr}/pinch"))?.iter().enumerate() {
            match as_str(side, &format!("{ptr}/pinch/{i}"))? {
                "left" => pinch.left = true,
                "right" => pinch.right = true,
                other => {
                    return err(
                        &format!("{ptr}/pinch/{i}"),
                        format!("unknown side {other:?}"),
                    )
                }
            }
        }
    }
    PlFn::new((a, b), breakpoints, slopes, anchor, pinch).map_err(|e| SchemaError {
        pointer: ptr.to_string(),
        message: e.to_string(),
    })
}

fn parse_graph(v: &Value, ptr: &str, rank: usize) -> Result<GammaGraph, SchemaError> {
    let obj = as_object(v, ptr)?;
    let mut vertices = Vec::new();
    let mut names = BTreeMap::new();
    for (i, vv) in as_array(field(obj, ptr, "vertices")?, &format!("{ptr}/vertices"))?
        .iter()
        .enumerate()
    {
        let vptr = format!("{ptr}/vertices/{i}");
        let vobj = as_object(vv, &vptr)?;
        let name = as_str(field(vobj, &vptr, "name")?, &format!("{vptr}/name"))?.to_string();
        let kind = match as_str(field(vobj, &vptr, "kind")?, &format!("{vptr}/kind"))? {
            "divisorial" => VertexKind::Divisorial,
            "classical-leaf" => VertexKind::ClassicalLeaf,
            "unbounded-leaf" => VertexKind::UnboundedLeaf,
            other => return err(&format!("{vptr}/kind"), format!("unknown kind {other:?}")),
        };
        if names.insert(name.clone(), i).is_some() {
            return err(&format!("{vptr}/name"), format!("duplicate vertex {name:?}"));
        }
        vertices.push(Vertex { name, kind });
    }
    let mut edges = Vec::new();
    for (i, ev) in as_array(field(obj, ptr, "edges")?, &format!("{ptr}/edges"))?
        .iter()
        .enumerate()
    {
        let eptr = format!("{ptr}/edges/{i}");
        let eobj = as_object(ev, &eptr)?;
        let a = as_str(field(eobj, &eptr, "a")?, &format!("{eptr}/a"))?;
        let b = as_str(field(eobj, &eptr, "b")?, &format!("{eptr}/b"))?;
        let ai = *names.get(a).ok_or_else(|| SchemaError {
            pointer: format!("{eptr}/a"),
            message: format!("unknown vertex {a:?}"),
        })?;
        let bi = *names.get(b).ok_or_else(|| SchemaError {
            pointer: format!("{eptr}/b"),
            message: format!("unknown vertex {b:?}"),
        })?;
        let lv = field(eobj, &eptr, "length")?;
        let length = if lv.as_str() == Some("inf") {
            EdgeLength::Infinite
        } else {
            EdgeLength::Finite(parse_elem(lv, &format!("{eptr}/length"), rank)?)
        };
        edges.push(Edge {
            a: VertexId(ai),
            b: VertexId(bi),
            length,
        });
    }
    let graph = GammaGraph::new(rank, vertices, edges);
    let graph = match obj.get("skeleton") {
        None => graph,
        Some(sv) => {
            let sptr = format!("{ptr}/skeleton");
            let sobj = as_object(sv, &sptr)?;
            let mut skel = Skeleton::default();
            if let Some(vv) = sobj.get("vertices") {
                for (i, nv) in as_array(vv, &format!("{sptr}/vertices"))?.iter().enumerate() {
                    let nptr = format!("{sptr}/vertices/{i}");
                    let name = as_str(nv, &nptr)?;
                    let id = *names.get(name).ok_or_else(|| SchemaError {
                        pointer: nptr,
                        message: format!("unknown vertex {name:?}"),
                    })?;
                    skel.vertices.insert(VertexId(id));
                }
            }
            if let Some(ev) = sobj.get("edges") {
                for (i, iv) in as_array(ev, &format!("{sptr}/edges"))?.iter().enumerate() {
                    let idx = as_usize(iv, &format!("{sptr}/edges/{i}"))?;
                    if idx >= graph.edges().len() {
                        return err(&format!("{sptr}/edges/{i}"), "edge index out of range");
                    }
                    skel.edges.insert(EdgeId(idx));
                }
            }
            if let Some(stv) = sobj.get("stubs") {
                for (i, stub_v) in as_array(stv, &format!("{sptr}/stubs"))?.iter().enumerate() {
                    let stptr = format!("{sptr}/stubs/{i}");
                    let stobj = as_object(stub_v, &stptr)?;
                    let idx = as_usize(field(stobj, &stptr, "edge")?, &format!("{stptr}/edge"))?;
                    if idx >= graph.edges().len() {
                        return err(&format!("{stptr}/edge"), "edge index out of range");
                    }
                    let upto = Ranger::from_json(field(stobj, &stptr, "upto")?, rank).map_err(
                        |e| SchemaError {
                            pointer: format!("{stptr}/upto"),
                            message: e.to_string(),
                        },
                    )?;
                    skel.stubs.push(Stub {
                        edge: EdgeId(idx),
                        upto,
                    });
                }
            }
            graph.with_skeleton(skel)
        }
    };
    Ok(graph)
}

fn parse_action(
    v: &Value,
    ptr: &str,
    graphs: &BTreeMap<String, GammaGraph>,
) -> Result<ScenarioAction, SchemaError> {
    let obj = as_object(v, ptr)?;
    let graph_name = as_str(field(obj, ptr, "graph")?, &format!("{ptr}/graph"))?.to_string();
    let graph = graphs.get(&graph_name).ok_or_else(|| SchemaError {
        pointer: format!("{ptr}/graph"),
        message: format!("unknown graph {graph_name:?}"),
    })?;
    let n = graph.vertices().len();
    let mut vertex_map: Vec<usize> = (0..n).collect();
    let vm = as_object(field(obj, ptr, "vertices")?, &format!("{ptr}/vertices"))?;
    for (from, to_v) in vm {
        let to = as_str(to_v, &format!("{ptr}/vertices/{from}"))?;
        let fi = graph.vertex_by_name(from).ok_or_else(|| SchemaError {
            pointer: format!("{ptr}/vertices/{from}"),
            message: format!("unknown vertex {from:?}"),
        })?;
        let ti = graph.vertex_by_name(to).ok_or_else(|| SchemaError {
            pointer: format!("{ptr}/vertices/{from}"),
            message: format!("unknown vertex {to:?}"),
        })?;
        vertex_map[fi.0] = ti.0;
    }
    // edge images are inferred from the vertex map; trees have no
    // parallel edges so the image edge is unique
    let mut edge_map = Vec::with_capacity(graph.edges().len());
    for (i, e) in graph.edges().iter().enumerate() {
        let (ia, ib) = (vertex_map[e.a.0], vertex_map[e.b.0]);
        let img = graph
            .edges()
            .iter()
            .position(|f| (f.a.0 == ia && f.b.0 == ib) || (f.a.0 == ib && f.b.0 == ia));
        match img {
            Some(j) => edge_map.push(j),
            None => {
                return err(
                    &format!("{ptr}/vertices"),
                    format!("the vertex map sends edge {i} to a non-edge"),
                )
            }
        }
    }
    Ok(ScenarioAction {
        graph: graph_name,
        permutation: GraphPermutation {
            vertex_map,
            edge_map,
        },
    })
}

fn parse_space(v: &Value, ptr: &str) -> Result<FiniteSpace, SchemaError> {
    let obj = as_object(v, ptr)?;
    let names: Vec<String> = as_array(field(obj, ptr, "points")?, &format!("{ptr}/points"))?
        .iter()
        .enumerate()
        .map(|(i, v)| as_str(v, &format!("{ptr}/points/{i}")).map(str::to_string))
        .collect::<Result<_, _>>()?;
    let mut pairs = Vec::new();
    if let Some(sv) = obj.get("specializations") {
        for (i, pv) in as_array(sv, &format!("{ptr}/specializations"))?
            .iter()
            .enumerate()
        {
            let pptr = format!("{ptr}/specializations/{i}");
            let pair = as_array(pv, &pptr)?;
            if pair.len() != 2 {
                return err(&pptr, "expected [point, pointInItsClosure]");
            }
            let a = as_str(&pair[0], &format!("{pptr}/0"))?;
            let b = as_str(&pair[1], &format!("{pptr}/1"))?;
            let ai = names
                .iter()
                .position(|n| n == a)
                .ok_or_else(|| SchemaError {
                    pointer: format!("{pptr}/0"),
                    message: format!("unknown point {a:?}"),
                })?;
            let bi = names
                .iter()
                .position(|n| n == b)
                .ok_or_else(|| SchemaError {
                    pointer: format!("{pptr}/1"),
                    message: format!("unknown point {b:?}"),
                })?;
            pairs.push((ai, bi));
        }
    }
    FiniteSpace::from_specializations(names, &pairs).map_err(|e| SchemaError {
        pointer: ptr.to_string(),
        message: e.to_string(),
    })
}

fn parse_a1point(v: &Value, ptr: &str, group: &Group) -> Result<A1Point, SchemaError> {
    let obj = as_object(v, ptr)?;
    let base_j = as_usize(field(obj, ptr, "base_j")?, &format!("{ptr}/base_j"))?;
    let fiber = Ranger::from_json(field(obj, ptr, "fiber")?, base_j).map_err(|e| SchemaError {
        pointer: format!("{ptr}/fiber"),
        message: e.to_string(),
    })?;
    A1Point::new(group, base_j, fiber).map_err(|e| SchemaError {
        pointer: ptr.to_string(),
        message: e.to_string(),
    })
}

fn parse_linelem(v: &Value, ptr: &str, rank: usize) -> Result<LinElem, SchemaError> {
    let obj = as_object(v, ptr)?;
    let gamma = parse_elem(field(obj, ptr, "gamma")?, &format!("{ptr}/gamma"), rank)?;
    let m = as_i64(field(obj, ptr, "m")?, &format!("{ptr}/m"))?;
    Ok(LinElem::new(gamma, m))
}

fn parse_command(v: &Value, ptr: &str, rank: usize) -> Result<Command, SchemaError> {
    let obj = as_object(v, ptr)?;
    let op = as_str(field(obj, ptr, "op")?, &format!("{ptr}/op"))?;
    let get_name = |key: &str| -> Result<String, SchemaError> {
        Ok(as_str(field(obj, ptr, key)?, &format!("{ptr}/{key}"))?.to_string())
    };
    let cmd = match op {
        "cmp" => Command::Cmp {
            left: get_name("left")?,
            right: get_name("right")?,
        },
        "classify" => Command::Classify {
            ranger: get_name("ranger")?,
        },
        "translate" => Command::Translate {
            ranger: get_name("ranger")?,
            by: get_name("by")?,
        },
        "project" => Command::Project {
            ranger: get_name("ranger")?,
            to: as_usize(field(obj, ptr, "to")?, &format!("{ptr}/to"))?,
        },
        "spec" => Command::Spec,
        "spa-member" => Command::SpaMember {
            point: get_name("point")?,
            f: get_name("f")?,
        },
        "pl-eval" => Command::PlEval {
            plfn: get_name("plfn")?,
            at: get_name("at")?,
        },
        "graph-validate" => Command::GraphValidate {
            graph: get_name("graph")?,
        },
        "retract" => {
            let pptr = format!("{ptr}/point");
            let pobj = as_object(field(obj, ptr, "point")?, &pptr)?;
            let point = if let Some(name) = pobj.get("vertex") {
                RawGraphPoint::Vertex(as_str(name, &format!("{pptr}/vertex"))?.to_string())
            } else {
                let index = as_usize(field(pobj, &pptr, "edge")?, &format!("{pptr}/edge"))?;
                let offset = Ranger::from_json(field(pobj, &pptr, "offset")?, rank).map_err(
                    |e| SchemaError {
                        pointer: format!("{pptr}/offset"),
                        message: e.to_string(),
                    },
                )?;
                RawGraphPoint::Edge { index, offset }
            };
            Command::Retract {
                graph: get_name("graph")?,
                t: get_name("t")?,
                point,
            }
        }
        "quotient" => Command::Quotient {
            action: get_name("action")?,
            root: obj
                .get("root")
                .map(|r| as_str(r, &format!("{ptr}/root")).map(str::to_string))
                .transpose()?,
        },
        "p1-distance" => Command::P1Distance {
            x: get_name("x")?,
            y: get_name("y")?,
        },
        "absval" => Command::AbsVal {
            f: get_name("f")?,
            point: get_name("point")?,
        },
        "slopes" => Command::Slopes {
            f: get_name("f")?,
            center: get_name("center")?,
            at: get_name("at")?,
        },
        "triangulate" => {
            let pts = as_array(field(obj, ptr, "points")?, &format!("{ptr}/points"))?;
            Command::Triangulate {
                points: pts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| as_str(p, &format!("{ptr}/points/{i}")).map(str::to_string))
                    .collect::<Result<_, _>>()?,
            }
        }
        "pullback" => {
            let segs_v = as_array(field(obj, ptr, "segments")?, &format!("{ptr}/segments"))?;
            let mut segments = Vec::new();
            for (i, sv) in segs_v.iter().enumerate() {
                let sptr = format!("{ptr}/segments/{i}");
                let sobj = as_object(sv, &sptr)?;
                let center =
                    as_str(field(sobj, &sptr, "center")?, &format!("{sptr}/center"))?.to_string();
                let lo = match sobj.get("lo") {
                    None | Some(Value::Null) => None,
                    Some(v) => Some(parse_elem(v, &format!("{sptr}/lo"), rank)?),
                };
                let hi = match sobj.get("hi") {
                    None | Some(Value::Null) => None,
                    Some(v) => Some(parse_elem(v, &format!("{sptr}/hi"), rank)?),
                };
                segments.push(RawSegment { center, lo, hi });
            }
            Command::Pullback {
                map: get_name("map")?,
                segments,
            }
        }
        "quasi-check" => Command::QuasiCheck {
            space: get_name("space")?,
            bound: match obj.get("bound") {
                Some(b) => as_usize(b, &format!("{ptr}/bound"))?,
                None => adic_core::quasitop::DEFAULT_QUASI_TREE_BOUND,
            },
        },
        other => {
            return err(
                &format!("{ptr}/op"),
                format!("unknown operation {other:?}"),
            )
        }
    };
    Ok(cmd)
}
