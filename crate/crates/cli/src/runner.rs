//! Executes scenario commands against the library and renders
//! deterministic reports.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use adic_core::gammagraph::{EdgeId, EdgeLength, GammaGraph, GraphPoint};
use adic_core::p1tree::{
    self, AbsValue, P1Point, TargetSegment,
};
use adic_core::ranger::RangerClass;
use adic_core::CoreError;
use serde_json::{json, Value};

use crate::scenario::{Command, RawGraphPoint, Scenario};

/// Schema version stamped into every report for golden-file stability.
pub const REPORT_VERSION: &str = "1";

/// A runtime failure carrying the index and operation of the command.
#[derive(Debug)]
pub struct RunError {
    pub op_index: usize,
    pub op: String,
    pub error: CoreError,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "command {} ({}) failed: {}",
            self.op_index, self.op, self.error
        )
    }
}

pub struct RunOutput {
    pub report: Value,
    /// DOT rendering of the last graph-producing command, if any.
    pub dot: Option<String>,
}

pub fn run(scenario: &Scenario, seed: u64) -> Result<RunOutput, RunError> {
    let mut results = Vec::new();
    let mut dot: Option<String> = None;
    for (i, cmd) in scenario.commands.iter().enumerate() {
        let (value, graph_dot) = execute(scenario, cmd).map_err(|error| RunError {
            op_index: i,
            op: op_name(cmd).to_string(),
            error,
        })?;
        if graph_dot.is_some() {
            dot = graph_dot;
        }
        results.push(value);
    }
    Ok(RunOutput {
        report: json!({
            "version": REPORT_VERSION,
            "seed": seed,
            "results": results,
        }),
        dot,
    })
}

fn op_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Cmp { .. } => "cmp",
        Command::Classify { .. } => "classify",
        Command::Translate { .. } => "translate",
        Command::Project { .. } => "project",
        Command::Spec => "spec",
        Command::SpaMember { .. } => "spa-member",
        Command::PlEval { .. } => "pl-eval",
        Command::GraphValidate { .. } => "graph-validate",
        Command::Retract { .. } => "retract",
        Command::Quotient { .. } => "quotient",
        Command::P1Distance { .. } => "p1-distance",
        Command::AbsVal { .. } => "absval",
        Command::Slopes { .. } => "slopes",
        Command::Triangulate { .. } => "triangulate",
        Command::Pullback { .. } => "pullback",
        Command::QuasiCheck { .. } => "quasi-check",
    }
}

fn ordering_str(o: Ordering) -> &'static str {
    match o {
        Ordering::Less => "LT",
        Ordering::Equal => "EQ",
        Ordering::Greater => "GT",
    }
}

fn point_json(graph: &GammaGraph, p: &GraphPoint) -> Value {
    match p {
        GraphPoint::AtVertex(v) => json!({"vertex": graph.vertex(*v).name}),
        GraphPoint::OnEdge { edge, offset } => {
            json!({"edge": edge.0, "offset": offset.to_json()})
        }
    }
}

fn abs_value_json(v: &AbsValue) -> Value {
    match v {
        AbsValue::NegInf => json!("-inf"),
        AbsValue::PosInf => json!("+inf"),
        AbsValue::Finite(ext) => json!({
            "base": ext.base(),
            "rcoeff": ext.rcoeff(),
        }),
    }
}

fn graph_json(graph: &GammaGraph, dilations: Option<&BTreeMap<usize, i64>>) -> Value {
    let vertices: Vec<Value> = graph
        .vertices()
        .iter()
        .map(|v| {
            json!({
                "name": v.name,
                "kind": v.kind,
            })
        })
        .collect();
    let edges: Vec<Value> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let length = match &e.length {
                EdgeLength::Finite(l) => json!(l),
                EdgeLength::Infinite => json!("inf"),
            };
            let mut obj = serde_json::Map::new();
            obj.insert("a".into(), json!(graph.vertex(e.a).name));
            obj.insert("b".into(), json!(graph.vertex(e.b).name));
            obj.insert("length".into(), length);
            if let Some(d) = dilations.and_then(|m| m.get(&i)) {
                obj.insert("dilation".into(), json!(d));
            }
            Value::Object(obj)
        })
        .collect();
    json!({"vertices": vertices, "edges": edges})
}

fn execute(s: &Scenario, cmd: &Command) -> Result<(Value, Option<String>), CoreError> {
    let config = || {
        s.config
            .as_ref()
            .ok_or_else(|| CoreError::Domain("this command needs a center configuration".into()))
    };
    let value = match cmd {
        Command::Cmp { left, right } => {
            let result = s.rangers[left].cmp(&s.rangers[right]);
            json!({"op": "cmp", "left": left, "right": right, "result": ordering_str(result)})
        }
        Command::Classify { ranger } => {
            let class = s.rangers[ranger].classify();
            let mut obj = serde_json::Map::new();
            obj.insert("op".into(), json!("classify"));
            obj.insert("ranger".into(), json!(ranger));
            match class {
                RangerClass::Unbounded => {
                    obj.insert("class".into(), json!("unbounded"));
                }
                RangerClass::Principal => {
                    obj.insert("class".into(), json!("principal"));
                }
                RangerClass::Infinitesimal => {
                    obj.insert("class".into(), json!("infinitesimal"));
                }
                RangerClass::Cut(profile) => {
                    obj.insert("class".into(), json!("cut"));
                    obj.insert(
                        "profile".into(),
                        serde_json::to_value(&profile).expect("profile serializes"),
                    );
                }
            }
            Value::Object(obj)
        }
        Command::Translate { ranger, by } => {
            let moved = s.rangers[ranger].translate(&s.elems[by]);
            json!({"op": "translate", "ranger": ranger, "by": by, "result": moved.to_json()})
        }
        Command::Project { ranger, to } => {
            let projected = s.rangers[ranger].project(*to)?;
            json!({"op": "project", "ranger": ranger, "to": to, "result": projected.to_json()})
        }
        Command::Spec => {
            let points: Vec<Value> = s
                .group
                .spec_points()
                .iter()
                .map(|p| {
                    json!({
                        "j": p.threshold(),
                        "generic": p.is_generic(),
                        "closed": p.is_closed(),
                        "scale": p.scale().map(|s| s.0),
                    })
                })
                .collect();
            json!({"op": "spec", "rank": s.group.rank(), "points": points})
        }
        Command::SpaMember { point, f } => {
            let member = s.a1points[point].member(&s.linelems[f]);
            json!({"op": "spa-member", "point": point, "f": f, "member": member})
        }
        Command::PlEval { plfn, at } => {
            let v = s.plfns[plfn].eval(&s.rangers[at])?;
            json!({
                "op": "pl-eval", "plfn": plfn, "at": at,
                "value": {"base": v.base(), "rcoeff": v.rcoeff()},
            })
        }
        Command::GraphValidate { graph } => {
            let report = s.graphs[graph].validate();
            json!({
                "op": "graph-validate", "graph": graph,
                "valid": report.is_valid(), "issues": report.issues,
            })
        }
        Command::Retract { graph, t, point } => {
            let g = &s.graphs[graph];
            let p = match point {
                RawGraphPoint::Vertex(name) => GraphPoint::AtVertex(
                    g.vertex_by_name(name)
                        .ok_or_else(|| CoreError::Structural(format!("unknown vertex {name:?}")))?,
                ),
                RawGraphPoint::Edge { index, offset } => GraphPoint::OnEdge {
                    edge: EdgeId(*index),
                    offset: offset.clone(),
                },
            };
            let moved = g.retract(&s.rangers[t], &p)?;
            let dist = g.dist_to_skeleton(&p)?;
            json!({
                "op": "retract", "graph": graph, "t": t,
                "distance": dist.to_json(),
                "result": point_json(g, &moved),
            })
        }
        Command::Quotient { action, root } => {
            let a = &s.actions[action];
            let g = &s.graphs[&a.graph];
            let root_id = match root {
                Some(name) => Some(
                    g.vertex_by_name(name)
                        .ok_or_else(|| CoreError::Structural(format!("unknown vertex {name:?}")))?,
                ),
                None => None,
            };
            let q = g.quotient(std::slice::from_ref(&a.permutation), root_id)?;
            let report = json!({
                "op": "quotient", "action": action,
                "group_order": q.group_order,
                "root": q.source.vertex(q.root).name,
                "quotient": graph_json(&q.quotient, None),
            });
            let dot = q.quotient.to_dot(&BTreeMap::new());
            return Ok((report, Some(dot)));
        }
        Command::P1Distance { x, y } => {
            let cfg = config()?;
            let d = p1tree::distance(cfg, &s.points[x], &s.points[y])?;
            json!({"op": "p1-distance", "x": x, "y": y, "distance": d})
        }
        Command::AbsVal { f, point } => {
            let cfg = config()?;
            let v = p1tree::eval_abs(cfg, &s.functions[f], &s.points[point])?;
            json!({"op": "absval", "f": f, "point": point, "value": abs_value_json(&v)})
        }
        Command::Slopes { f, center, at } => {
            let cfg = config()?;
            let c = cfg
                .center_by_label(center)
                .ok_or_else(|| CoreError::Structural(format!("unknown center {center:?}")))?;
            let func = &s.functions[f];
            let rho = &s.rangers[at];
            let below = p1tree::slope_below(cfg, func, c, rho);
            let jump = p1tree::slope_jump(cfg, func, c, rho);
            let mut obj = serde_json::Map::new();
            obj.insert("op".into(), json!("slopes"));
            obj.insert("f".into(), json!(f));
            obj.insert("center".into(), json!(center));
            obj.insert("at".into(), json!(at));
            obj.insert("slope".into(), json!(below));
            obj.insert("jump".into(), json!(jump));
            obj.insert("above".into(), json!(below + jump));
            if rho.is_principal() {
                let bs = p1tree::branch_slopes(cfg, func, &P1Point::monomial(c, rho.clone()))?;
                obj.insert(
                    "branches".into(),
                    json!({
                        "upward": bs.upward,
                        "downward": bs.downward.iter()
                            .map(|(c, s)| json!([cfg.label(*c), s]))
                            .collect::<Vec<_>>(),
                    }),
                );
            }
            Value::Object(obj)
        }
        Command::Triangulate { points } => {
            let cfg = config()?;
            let marked: Vec<P1Point> = points.iter().map(|n| s.points[n].clone()).collect();
            let t = p1tree::triangulate(cfg, &marked)?;
            let names: Vec<String> = t
                .vertices
                .iter()
                .map(|p| p1tree::point_name(cfg, p))
                .collect();
            let report = json!({
                "op": "triangulate",
                "marked": points,
                "vertices": names,
                "skeleton": graph_json(&t.skeleton, None),
                "components": t.components,
            });
            let dot = t.skeleton.to_dot(&BTreeMap::new());
            return Ok((report, Some(dot)));
        }
        Command::Pullback { map, segments } => {
            let cfg = config()?;
            let m = &s.maps[map];
            let resolved: Vec<TargetSegment> = segments
                .iter()
                .map(|seg| {
                    m.target
                        .center_by_label(&seg.center)
                        .map(|center| TargetSegment {
                            center,
                            lo: seg.lo.clone(),
                            hi: seg.hi.clone(),
                        })
                        .ok_or_else(|| {
                            CoreError::Structural(format!(
                                "unknown target center {:?}",
                                seg.center
                            ))
                        })
                })
                .collect::<Result<_, _>>()?;
            let pb = p1tree::pullback_skeleton(cfg, &m.target, &m.data, &resolved)?;
            let labels: BTreeMap<usize, String> = pb
                .dilations
                .iter()
                .map(|(i, d)| (*i, format!("n={d}")))
                .collect();
            let report = json!({
                "op": "pullback", "map": map,
                "points": pb.points.iter().map(|p| p1tree::point_name(cfg, p)).collect::<Vec<_>>(),
                "graph": graph_json(&pb.graph, Some(&pb.dilations)),
            });
            let dot = pb.graph.to_dot(&labels);
            return Ok((report, Some(dot)));
        }
        Command::QuasiCheck { space, bound } => {
            let report = adic_core::quasitop::check_quasi_tree(&s.spaces[space], *bound)?;
            json!({
                "op": "quasi-check", "space": space,
                "passes": report.passes(),
                "report": report,
            })
        }
    };
    Ok((value, None))
}

/// Plain-text rendering of a report, one line per result.
pub fn render_text(report: &Value) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "version {}\n",
        report["version"].as_str().unwrap_or("?")
    ));
    if let Some(results) = report["results"].as_array() {
        for r in results {
            out.push_str(&render_result_line(r));
            out.push('\n');
        }
    }
    out
}

fn render_result_line(r: &Value) -> String {
    let op = r["op"].as_str().unwrap_or("?");
    match op {
        "cmp" => format!(
            "cmp {} {} -> {}",
            r["left"].as_str().unwrap_or("?"),
            r["right"].as_str().unwrap_or("?"),
            r["result"].as_str().unwrap_or("?")
        ),
        "classify" => {
            let mut line = format!(
                "classify {} -> {}",
                r["ranger"].as_str().unwrap_or("?"),
                r["class"].as_str().unwrap_or("?")
            );
            if let Some(p) = r.get("profile") {
                line.push_str(&format!(" {p}"));
            }
            line
        }
        "translate" => format!(
            "translate {} by {} -> {}",
            r["ranger"].as_str().unwrap_or("?"),
            r["by"].as_str().unwrap_or("?"),
            r["result"]
        ),
        "project" => format!(
            "project {} to {} -> {}",
            r["ranger"].as_str().unwrap_or("?"),
            r["to"],
            r["result"]
        ),
        "spec" => format!(
            "spec rank {} -> {} points",
            r["rank"],
            r["points"].as_array().map(Vec::len).unwrap_or(0)
        ),
        "spa-member" => format!(
            "spa-member {} at {} -> {}",
            r["f"].as_str().unwrap_or("?"),
            r["point"].as_str().unwrap_or("?"),
            r["member"]
        ),
        "pl-eval" => format!(
            "pl-eval {} at {} -> {}",
            r["plfn"].as_str().unwrap_or("?"),
            r["at"].as_str().unwrap_or("?"),
            r["value"]
        ),
        "graph-validate" => format!(
            "graph-validate {} -> {}",
            r["graph"].as_str().unwrap_or("?"),
            if r["valid"].as_bool().unwrap_or(false) {
                "valid".to_string()
            } else {
                format!("invalid {}", r["issues"])
            }
        ),
        "retract" => format!(
            "retract {} t={} -> {}",
            r["graph"].as_str().unwrap_or("?"),
            r["t"].as_str().unwrap_or("?"),
            r["result"]
        ),
        "quotient" => format!(
            "quotient {} -> |G|={} vertices={}",
            r["action"].as_str().unwrap_or("?"),
            r["group_order"],
            r["quotient"]["vertices"].as_array().map(Vec::len).unwrap_or(0)
        ),
        "p1-distance" => format!(
            "p1-distance {} {} -> {}",
            r["x"].as_str().unwrap_or("?"),
            r["y"].as_str().unwrap_or("?"),
            r["distance"]
        ),
        "absval" => format!(
            "absval {} at {} -> {}",
            r["f"].as_str().unwrap_or("?"),
            r["point"].as_str().unwrap_or("?"),
            r["value"]
        ),
        "slopes" => format!(
            "slopes {} over {} at {} -> slope={} jump={}",
            r["f"].as_str().unwrap_or("?"),
            r["center"].as_str().unwrap_or("?"),
            r["at"].as_str().unwrap_or("?"),
            r["slope"],
            r["jump"]
        ),
        "triangulate" => format!(
            "triangulate -> vertices={} edges={}",
            r["vertices"].as_array().map(Vec::len).unwrap_or(0),
            r["skeleton"]["edges"].as_array().map(Vec::len).unwrap_or(0)
        ),
        "pullback" => format!(
            "pullback {} -> points={} edges={}",
            r["map"].as_str().unwrap_or("?"),
            r["points"].as_array().map(Vec::len).unwrap_or(0),
            r["graph"]["edges"].as_array().map(Vec::len).unwrap_or(0)
        ),
        "quasi-check" => format!(
            "quasi-check {} -> {}",
            r["space"].as_str().unwrap_or("?"),
            if r["passes"].as_bool().unwrap_or(false) {
                "passes"
            } else {
                "fails"
            }
        ),
        other => format!("{other} -> {r}"),
    }
}
