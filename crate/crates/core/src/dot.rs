//! Graphviz export of a tree with its flow and, optionally, a dynamical plan.
//!
//! Finite edges are drawn in the direction of positive flow; neutral edges
//! are dashed and grey. Ends appear as point nodes named `end:<id>`.

use std::collections::BTreeMap;
use std::fmt::Write;

use num_traits::{Signed, Zero};

use crate::dynamics::DynamicalPlan;
use crate::flows::FlowField;
use crate::rational::render;
use crate::tree::{MetricTree, OrientedEdge};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn edge_style(phi: &crate::rational::Rational) -> &'static str {
    if phi.is_zero() {
        "color=gray, style=dashed, dir=none"
    } else {
        "color=black"
    }
}

pub fn to_dot(tree: &MetricTree, ff: &FlowField, plan: Option<&DynamicalPlan>) -> String {
    let mut uses: BTreeMap<OrientedEdge, Vec<String>> = BTreeMap::new();
    for a in plan.map(DynamicalPlan::atoms).unwrap_or_default() {
        let label = format!("{}>{}", tree.end_name(a.source), tree.end_name(a.target));
        for oe in a.path.oriented_edges() {
            uses.entry(oe).or_default().push(label.clone());
        }
    }
    let annotate = |oe: OrientedEdge| match uses.get(&oe) {
        Some(l) => format!(", geodesics={}", quote(&l.join(" "))),
        None => String::new(),
    };

    let mut out = String::from("digraph tree {\n  node [shape=circle];\n");
    for v in 0..tree.vertex_count() {
        let shape = if v == tree.base() { " [shape=doublecircle]" } else { "" };
        writeln!(out, "  {}{shape};", quote(&tree.vertex_name(v).0)).unwrap();
    }
    for (i, e) in tree.edges().iter().enumerate() {
        let phi = &ff.edge_flows()[i];
        let (mut tail, mut head) = (e.parent, e.child);
        let mut oe = OrientedEdge::Finite { edge: i, forward: true };
        if phi.is_negative() {
            (tail, head, oe) = (head, tail, oe.reversed());
        }
        let style = edge_style(phi);
        writeln!(
            out,
            "  {} -> {} [label={}, len={}, {style}{}];",
            quote(&tree.vertex_name(tail).0),
            quote(&tree.vertex_name(head).0),
            quote(&format!("phi={} len={}", render(&phi.abs()), render(&e.len))),
            quote(&render(&e.len)),
            annotate(oe),
        )
        .unwrap();
    }
    for (i, e) in tree.ends().iter().enumerate() {
        let node = quote(&format!("end:{}", e.id));
        let attach = quote(&tree.vertex_name(e.attach).0);
        writeln!(out, "  {node} [shape=point, xlabel={}];", quote(&e.id.0)).unwrap();
        let phi = &ff.end_flows()[i];
        let (edge, oe) = if phi.is_negative() {
            (format!("{node} -> {attach}"), OrientedEdge::EndIn(i))
        } else {
            (format!("{attach} -> {node}"), OrientedEdge::EndOut(i))
        };
        let style = edge_style(phi);
        writeln!(out, "  {edge} [label={}, {style}{}];", quote(&format!("phi={}", render(&phi.abs()))), annotate(oe)).unwrap();
    }
    out.push_str("}\n");
    out
}
