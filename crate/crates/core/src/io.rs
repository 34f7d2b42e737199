//! JSON formats for instances, measures, couplings, snapshots and reports.
//!
//! Every emitted document is a `serde_json::Value` whose objects keep their
//! keys sorted, and every exact quantity is a fraction string.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::dynamics::{DynamicalPlan, GeodesicReport, Snapshot};
use crate::error::{domain, Error, Result};
use crate::flows::{condition3_sum, BoundaryMeasure, FlowField};
use crate::rational::{parse, render, render_decimal, Frac, Rational};
use crate::realizability::{FamilySpec, FamilyVerdict, RealizabilityReport, Realization};
use crate::transport::{Coupling, MonotonicityReport};
use crate::tree::{MetricTree, TreeDescription, TreePoint, D0};

pub type MassMap = BTreeMap<String, Frac>;

/// A tree, optionally carrying its two measures.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct InstanceFile {
    #[serde(flatten)]
    pub tree: TreeDescription,
    #[serde(default)]
    pub minus: Option<MassMap>,
    #[serde(default)]
    pub plus: Option<MassMap>,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct MeasuresFile {
    pub minus: MassMap,
    pub plus: MassMap,
}

fn from_text<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    from_text("instance", text)
}

pub fn parse_measures(text: &str) -> Result<MeasuresFile> {
    from_text("measures", text)
}

pub fn parse_family(text: &str) -> Result<FamilySpec> {
    from_text("family", text)
}

pub fn parse_value(text: &str) -> Result<Value> {
    from_text("document", text)
}

pub fn measure_from_map(tree: &MetricTree, map: &MassMap) -> Result<BoundaryMeasure> {
    BoundaryMeasure::new(tree, map.iter().map(|(k, v)| (k.as_str(), v.0.clone())))
}

pub fn measure_to_json(tree: &MetricTree, m: &BoundaryMeasure) -> Value {
    let map: Map<String, Value> = m.atoms().map(|(e, x)| (tree.end_name(e).0.clone(), frac(x))).collect();
    Value::Object(map)
}

fn frac(x: &Rational) -> Value {
    Value::String(render(x))
}

fn end(tree: &MetricTree, e: usize) -> Value {
    Value::String(tree.end_name(e).0.clone())
}

fn vertex(tree: &MetricTree, v: usize) -> Value {
    Value::String(tree.vertex_name(v).0.clone())
}

fn edge_id(tree: &MetricTree, edge: usize) -> Value {
    let e = &tree.edges()[edge];
    json!([vertex(tree, e.parent), vertex(tree, e.child)])
}

pub fn coupling_to_json(tree: &MetricTree, pi: &Coupling) -> Value {
    Value::Array(pi.atoms().map(|(a, b, m)| json!({"from": end(tree, a), "to": end(tree, b), "mass": frac(m)})).collect())
}

fn str_field<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    v.get(key).and_then(Value::as_str).ok_or_else(|| Error::Parse(format!("missing string field \"{key}\"")))
}

fn frac_field(v: &Value, key: &str) -> Result<Rational> {
    parse(str_field(v, key)?)
}

fn end_field(tree: &MetricTree, v: &Value, key: &str) -> Result<usize> {
    let name = str_field(v, key)?;
    tree.end_index(name).ok_or_else(|| domain(format!("unknown end {name}")))
}

fn vertex_field(tree: &MetricTree, v: &Value, key: &str) -> Result<usize> {
    let name = str_field(v, key)?;
    tree.vertex_index(name).ok_or_else(|| domain(format!("unknown vertex {name}")))
}

/// Accepts `{"atoms":[…]}` or a bare atom list.
pub fn coupling_from_json(tree: &MetricTree, v: &Value) -> Result<Coupling> {
    let list = match v {
        Value::Array(a) => a,
        _ => v
            .get("atoms")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("coupling: expected an atom list".into()))?,
    };
    let atoms = list
        .iter()
        .map(|a| Ok((end_field(tree, a, "from")?, end_field(tree, a, "to")?, frac_field(a, "mass")?)))
        .collect::<Result<Vec<_>>>()?;
    Coupling::from_atoms(atoms)
}

pub fn point_to_json(tree: &MetricTree, p: &TreePoint) -> Value {
    match p {
        TreePoint::Vertex(v) => json!({"vertex": vertex(tree, *v)}),
        TreePoint::OnEdge { edge, offset } => json!({
            "edge": edge_id(tree, *edge),
            "from": vertex(tree, tree.edges()[*edge].parent),
            "offset": frac(offset),
        }),
        TreePoint::OnEnd { end: e, offset } => json!({
            "end": end(tree, *e),
            "from": vertex(tree, tree.ends()[*e].attach),
            "offset": frac(offset),
        }),
    }
}

pub fn point_from_json(tree: &MetricTree, v: &Value) -> Result<TreePoint> {
    if v.get("vertex").is_some() {
        return Ok(TreePoint::Vertex(vertex_field(tree, v, "vertex")?));
    }
    let offset = frac_field(v, "offset")?;
    let from = vertex_field(tree, v, "from")?;
    if v.get("end").is_some() {
        let e = end_field(tree, v, "end")?;
        if tree.ends()[e].attach != from {
            return Err(domain("end point measured from a vertex other than its attach vertex"));
        }
        return tree.point_on_end(e, offset);
    }
    let pair = v
        .get("edge")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Parse("point: expected \"vertex\", \"edge\" or \"end\"".into()))?;
    let names: Vec<&str> = pair.iter().filter_map(Value::as_str).collect();
    let edge = tree
        .edges()
        .iter()
        .position(|e| {
            let (p, c) = (tree.vertex_name(e.parent).0.as_str(), tree.vertex_name(e.child).0.as_str());
            names == [p, c] || names == [c, p]
        })
        .ok_or_else(|| domain(format!("unknown edge {names:?}")))?;
    tree.point_on_edge(edge, from, offset)
}

pub fn snapshot_to_json(tree: &MetricTree, s: &Snapshot) -> Value {
    let atoms: Vec<Value> =
        s.atoms.iter().map(|(p, m)| json!({"point": point_to_json(tree, p), "mass": frac(m)})).collect();
    json!({"time": frac(&s.time), "atoms": atoms})
}

pub fn snapshot_from_json(tree: &MetricTree, v: &Value) -> Result<Snapshot> {
    let list = v.get("atoms").and_then(Value::as_array).ok_or_else(|| Error::Parse("snapshot: missing atoms".into()))?;
    let mut atoms = BTreeMap::new();
    for a in list {
        let p = point_from_json(tree, a.get("point").unwrap_or(&Value::Null))?;
        *atoms.entry(p).or_insert_with(Rational::default) += frac_field(a, "mass")?;
    }
    Ok(Snapshot { time: frac_field(v, "time")?, atoms })
}

pub fn flows_to_json(tree: &MetricTree, ff: &FlowField) -> Value {
    let edges: Vec<Value> = (0..tree.edges().len())
        .map(|e| json!({"edge": edge_id(tree, e), "phi": frac(&ff.edge_flows()[e]), "class": ff.class(e).as_str()}))
        .collect();
    let ends: Vec<Value> = (0..tree.ends().len())
        .map(|e| {
            let phi = &ff.end_flows()[e];
            json!({"end": end(tree, e), "phi": frac(phi), "class": crate::flows::EdgeClass::of(phi).as_str()})
        })
        .collect();
    let vertices: Vec<Value> = (0..tree.vertex_count())
        .map(|v| json!({"vertex": vertex(tree, v), "phi": frac(ff.vertex_flow(v)), "phi0": frac(ff.specific_flow(v))}))
        .collect();
    json!({"edges": edges, "ends": ends, "vertices": vertices, "condition3": frac(&condition3_sum(tree, ff))})
}

pub fn d0_to_json(tree: &MetricTree) -> Value {
    let n = tree.ends().len();
    let matrix: Vec<Value> = (0..n)
        .map(|a| {
            Value::Array(
                (0..n)
                    .map(|b| match tree.d0(a, b) {
                        D0::Finite(x) => frac(&x),
                        D0::Infinite => Value::String("inf".into()),
                    })
                    .collect(),
            )
        })
        .collect();
    json!({"ends": (0..n).map(|e| end(tree, e)).collect::<Vec<_>>(), "d0": matrix})
}

pub fn solve_to_json(tree: &MetricTree, pi: &Coupling, value: &Rational) -> Value {
    json!({"value": frac(value), "coupling": coupling_to_json(tree, pi)})
}

pub fn monotonicity_to_json(tree: &MetricTree, r: &MonotonicityReport, cost: &Rational, antagonists: usize) -> Value {
    let witness = match &r.witness {
        Some(c) => Value::Array(c.iter().map(|&(a, b)| json!({"from": end(tree, a), "to": end(tree, b)})).collect()),
        None => Value::Null,
    };
    json!({
        "monotone": r.monotone,
        "complete": r.complete,
        "witness": witness,
        "cost": frac(cost),
        "antagonist_pairs": antagonists,
    })
}

pub fn plan_to_json(tree: &MetricTree, mu: &DynamicalPlan) -> Value {
    Value::Array(
        mu.atoms()
            .iter()
            .map(|a| {
                json!({
                    "from": end(tree, a.source),
                    "to": end(tree, a.target),
                    "mass": frac(&a.mass),
                    "path": a.path.vertices.iter().map(|&v| vertex(tree, v)).collect::<Vec<_>>(),
                    "apex": vertex(tree, a.path.apex_vertex()),
                    "time_offset": frac(&a.time_offset),
                })
            })
            .collect(),
    )
}

pub fn geodesic_to_json(r: &GeodesicReport) -> Value {
    let speed: Vec<Value> = r
        .speed
        .iter()
        .map(|s| json!({"from": frac(&s.from), "to": frac(&s.to), "expected": frac(&s.expected), "value": frac(&s.value), "ok": s.ok()}))
        .collect();
    json!({"antagonism_free": r.antagonism_free, "tau_isometric": r.tau_isometric, "speed": speed, "passed": r.passed()})
}

pub fn realize_to_json(tree: &MetricTree, report: &RealizabilityReport, realization: Option<&Realization>) -> Value {
    let opt = |x: &Option<Rational>| x.as_ref().map_or(Value::Null, frac);
    let mut out = json!({
        "verdict": report.verdict.as_str(),
        "antipodal": report.antipodal,
        "lp_value": opt(&report.lp_value),
        "condition3": opt(&report.condition3),
        "second_moment": opt(&report.second_moment),
        "geodesic": report.geodesic.as_ref().map_or(Value::Null, geodesic_to_json),
    });
    if let Some(r) = realization {
        out["coupling"] = coupling_to_json(tree, &r.coupling);
        out["plan"] = plan_to_json(tree, &r.plan);
        out["snapshots"] = Value::Array(r.snapshots.iter().map(|s| snapshot_to_json(tree, s)).collect());
    }
    out
}

pub fn family_to_json(v: &FamilyVerdict) -> Value {
    let levels: Vec<Value> = v
        .levels
        .iter()
        .zip(v.increments())
        .map(|(l, inc)| {
            json!({"level": l.level, "condition3": frac(&l.condition3), "increment": frac(&inc), "lp_value": frac(&l.lp_value)})
        })
        .collect();
    json!({
        "trend": v.trend.as_str(),
        "tolerance": frac(&v.tolerance),
        "max_level": v.max_level,
        "converged_level": v.converged_level,
        "levels": levels,
    })
}

const NUMERIC_KEYS: [&str; 14] = [
    "condition3",
    "cost",
    "expected",
    "increment",
    "lp_value",
    "mass",
    "offset",
    "phi",
    "phi0",
    "second_moment",
    "time",
    "time_offset",
    "tolerance",
    "value",
];

/// Adds a `<key>_decimal` rendering next to every exact quantity.
pub fn with_decimals(v: &Value, digits: usize) -> Value {
    match v {
        Value::Array(a) => Value::Array(a.iter().map(|x| with_decimals(x, digits)).collect()),
        Value::Object(m) => {
            let mut out = Map::new();
            for (k, x) in m {
                if let (true, Some(Ok(q))) = (NUMERIC_KEYS.contains(&k.as_str()), x.as_str().map(parse)) {
                    out.insert(format!("{k}_decimal"), Value::String(render_decimal(&q, digits)));
                }
                out.insert(k.clone(), with_decimals(x, digits));
            }
            Value::Object(out)
        }
        _ => v.clone(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values always serialize");
    s.push('\n');
    s
}
