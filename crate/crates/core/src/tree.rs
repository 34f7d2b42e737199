//! Metric trees whose ideal boundary points are reified as infinite leaf-edges.
//!
//! A [`TreeDescription`] is the raw, unchecked form read from JSON. It becomes a
//! [`MetricTree`] once it is connected, acyclic, has positive lengths, at least
//! two ends, and no degree-2 vertex other than (possibly) the base point.
//! Every vertex, finite edge and end of a [`MetricTree`] is addressed by an
//! index into sorted tables, so all traversals are deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::rational::{Frac, Rational};

/// Identifier of a vertex or an end. JSON may give it as a string or an integer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Name(pub String);

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Text(s) => Name(s),
            Raw::Int(n) => Name(n.to_string()),
        })
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDescription {
    pub u: Name,
    pub v: Name,
    pub len: Frac,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndDescription {
    pub id: Name,
    pub attach: Name,
}

/// Unchecked tree, exactly as serialized.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeDescription {
    pub vertices: Vec<Name>,
    pub base: Name,
    pub edges: Vec<EdgeDescription>,
    pub ends: Vec<EndDescription>,
}

impl TreeDescription {
    pub fn new(base: &str) -> Self {
        TreeDescription {
            vertices: vec![base.into()],
            base: base.into(),
            edges: Vec::new(),
            ends: Vec::new(),
        }
    }

    pub fn vertex(mut self, v: &str) -> Self {
        self.vertices.push(v.into());
        self
    }

    pub fn edge(mut self, u: &str, v: &str, len: Rational) -> Self {
        self.edges.push(EdgeDescription { u: u.into(), v: v.into(), len: Frac(len) });
        self
    }

    pub fn end(mut self, id: &str, attach: &str) -> Self {
        self.ends.push(EndDescription { id: id.into(), attach: attach.into() });
        self
    }

    /// Same tree with every finite length multiplied by `factor`.
    pub fn scaled(&self, factor: &Rational) -> Self {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.len = Frac(&e.len.0 * factor);
        }
        out
    }
}

/// One reason a description fails to be a canonical metric tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateVertex(Name),
    DuplicateEnd(Name),
    UnknownBase(Name),
    UnknownVertex(Name),
    NonPositiveLength { u: Name, v: Name },
    NotAcyclic,
    Disconnected,
    NonCanonicalVertex { vertex: Name, degree: usize },
    TooFewEnds(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateVertex(v) => write!(f, "duplicate vertex {v}"),
            Violation::DuplicateEnd(e) => write!(f, "duplicate end {e}"),
            Violation::UnknownBase(v) => write!(f, "base {v} is not a vertex"),
            Violation::UnknownVertex(v) => write!(f, "unknown vertex {v}"),
            Violation::NonPositiveLength { u, v } => {
                write!(f, "edge {u}-{v} has non-positive length")
            }
            Violation::NotAcyclic => write!(f, "not acyclic"),
            Violation::Disconnected => write!(f, "not connected"),
            Violation::NonCanonicalVertex { vertex, degree } => {
                write!(f, "non-canonical vertex {vertex} (degree {degree})")
            }
            Violation::TooFewEnds(n) => write!(f, "needs at least 2 ends, found {n}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Set when the base point has degree 2, the one tolerated exception.
    pub base_degree_two: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        let p = self.0[x];
        if p == x {
            return x;
        }
        let r = self.find(p);
        self.0[x] = r;
        r
    }
}

/// Checks the description against every metric-tree invariant.
pub fn validate_tree(t: &TreeDescription) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut index = BTreeMap::new();
    for v in &t.vertices {
        if index.contains_key(v) {
            report.violations.push(Violation::DuplicateVertex(v.clone()));
        } else {
            index.insert(v.clone(), index.len());
        }
    }
    if !index.contains_key(&t.base) {
        report.violations.push(Violation::UnknownBase(t.base.clone()));
    }
    let mut degree = vec![0usize; index.len()];
    let mut dsu = Dsu((0..index.len()).collect());
    let mut cyclic = false;
    let mut unknown = BTreeSet::new();
    for e in &t.edges {
        if !e.len.0.is_positive() {
            report.violations.push(Violation::NonPositiveLength { u: e.u.clone(), v: e.v.clone() });
        }
        match (index.get(&e.u), index.get(&e.v)) {
            (Some(&a), Some(&b)) => {
                degree[a] += 1;
                degree[b] += 1;
                let (ra, rb) = (dsu.find(a), dsu.find(b));
                if ra == rb {
                    cyclic = true;
                } else {
                    dsu.0[ra] = rb;
                }
            }
            (a, b) => {
                if a.is_none() {
                    unknown.insert(e.u.clone());
                }
                if b.is_none() {
                    unknown.insert(e.v.clone());
                }
            }
        }
    }
    let mut end_ids = BTreeSet::new();
    for end in &t.ends {
        if !end_ids.insert(end.id.clone()) {
            report.violations.push(Violation::DuplicateEnd(end.id.clone()));
        }
        match index.get(&end.attach) {
            Some(&a) => degree[a] += 1,
            None => {
                unknown.insert(end.attach.clone());
            }
        }
    }
    report.violations.extend(unknown.into_iter().map(Violation::UnknownVertex));
    if cyclic {
        report.violations.push(Violation::NotAcyclic);
    }
    let roots: BTreeSet<usize> = (0..index.len()).map(|v| dsu.find(v)).collect();
    if roots.len() > 1 {
        report.violations.push(Violation::Disconnected);
    }
    for (name, &i) in &index {
        if degree[i] == 2 && *name == t.base {
            report.base_degree_two = true;
        } else if degree[i] == 0 || degree[i] == 2 {
            report.violations.push(Violation::NonCanonicalVertex { vertex: name.clone(), degree: degree[i] });
        }
    }
    if t.ends.len() < 2 {
        report.violations.push(Violation::TooFewEnds(t.ends.len()));
    }
    report
}

/// Result of [`canonicalize`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Canonical {
    pub tree: TreeDescription,
    /// The base had degree 2 and was kept as a vertex anyway.
    pub base_degree_two: bool,
}

/// Suppresses every degree-2 vertex except the base, summing the lengths of
/// the two edges it joined (or handing its end to the neighbour).
pub fn canonicalize(t: &TreeDescription) -> Result<Canonical> {
    let report = validate_tree(t);
    let fatal: Vec<String> = report
        .violations
        .iter()
        .filter(|v| !matches!(v, Violation::NonCanonicalVertex { degree: 2, .. }))
        .map(|v| v.to_string())
        .collect();
    if !fatal.is_empty() {
        return Err(Error::Structural(fatal.join("; ")));
    }

    let mut edges: Vec<Option<(Name, Name, Rational)>> =
        t.edges.iter().map(|e| Some((e.u.clone(), e.v.clone(), e.len.0.clone()))).collect();
    let mut ends: Vec<(Name, Name)> = t.ends.iter().map(|e| (e.id.clone(), e.attach.clone())).collect();
    let mut vertices: BTreeSet<Name> = t.vertices.iter().cloned().collect();

    loop {
        let mut incident: BTreeMap<&Name, (Vec<usize>, Vec<usize>)> =
            vertices.iter().map(|v| (v, (Vec::new(), Vec::new()))).collect();
        for (i, e) in edges.iter().enumerate() {
            if let Some((u, v, _)) = e {
                incident.get_mut(u).unwrap().0.push(i);
                incident.get_mut(v).unwrap().0.push(i);
            }
        }
        for (i, (_, a)) in ends.iter().enumerate() {
            incident.get_mut(a).unwrap().1.push(i);
        }
        let victim = incident
            .iter()
            .find(|(v, (fe, en))| **v != &t.base && fe.len() + en.len() == 2)
            .map(|(v, (fe, en))| ((*v).clone(), fe.clone(), en.clone()));
        let Some((x, fe, en)) = victim else { break };
        let other = |i: usize| {
            let (u, v, _) = edges[i].as_ref().unwrap();
            if *u == x { v.clone() } else { u.clone() }
        };
        match (fe.as_slice(), en.as_slice()) {
            ([a, b], []) => {
                let (ua, ub) = (other(*a), other(*b));
                let len = &edges[*a].as_ref().unwrap().2 + &edges[*b].as_ref().unwrap().2;
                edges[*a] = Some((ua, ub, len));
                edges[*b] = None;
            }
            ([a], [e]) => {
                ends[*e].1 = other(*a);
                edges[*a] = None;
            }
            // Two ends and nothing else: the only vertex, hence the base.
            _ => unreachable!("degree-2 vertex without a finite edge must be the base"),
        }
        vertices.remove(&x);
    }

    let mut edge_list: Vec<EdgeDescription> = edges
        .into_iter()
        .flatten()
        .map(|(u, v, len)| if u <= v { (u, v, len) } else { (v, u, len) })
        .map(|(u, v, len)| EdgeDescription { u, v, len: Frac(len) })
        .collect();
    edge_list.sort_by(|a, b| (&a.u, &a.v).cmp(&(&b.u, &b.v)));
    ends.sort();
    Ok(Canonical {
        tree: TreeDescription {
            vertices: vertices.into_iter().collect(),
            base: t.base.clone(),
            edges: edge_list,
            ends: ends.into_iter().map(|(id, attach)| EndDescription { id, attach }).collect(),
        },
        base_degree_two: report.base_degree_two,
    })
}

/// A finite edge, stored oriented away from the base: `parent` is nearer to x₀.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteEdge {
    pub parent: usize,
    pub child: usize,
    pub len: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct End {
    pub id: Name,
    pub attach: usize,
}

/// An edge together with a direction of travel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OrientedEdge {
    /// `forward` means parent → child, i.e. away from the base.
    Finite { edge: usize, forward: bool },
    /// From the attach vertex out to the end.
    EndOut(usize),
    /// From the end in to its attach vertex.
    EndIn(usize),
}

impl OrientedEdge {
    pub fn reversed(self) -> Self {
        match self {
            OrientedEdge::Finite { edge, forward } => OrientedEdge::Finite { edge, forward: !forward },
            OrientedEdge::EndOut(e) => OrientedEdge::EndIn(e),
            OrientedEdge::EndIn(e) => OrientedEdge::EndOut(e),
        }
    }
}

/// D₀ value: finite distance, or the sentinel for a repeated end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum D0 {
    Finite(Rational),
    Infinite,
}

impl D0 {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            D0::Finite(r) => Some(r),
            D0::Infinite => None,
        }
    }
}

/// A point of the tree, in a unique normal form.
///
/// Points on a finite edge are measured from the parent endpoint with
/// `0 < offset < len`; points on an end edge from the attach vertex with
/// `offset > 0`. Vertices are never encoded as edge points.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TreePoint {
    Vertex(usize),
    OnEdge { edge: usize, offset: Rational },
    OnEnd { end: usize, offset: Rational },
}

/// Bi-infinite geodesic between two distinct ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeodesicPath {
    pub source: usize,
    pub target: usize,
    /// Vertices from the source's attach vertex to the target's.
    pub vertices: Vec<usize>,
    /// Finite edges between consecutive entries of `vertices`.
    pub steps: Vec<OrientedEdge>,
    /// Index into `vertices` of the point nearest the base.
    pub apex: usize,
}

impl GeodesicPath {
    /// All traversed oriented edges, including the two infinite ones.
    pub fn oriented_edges(&self) -> Vec<OrientedEdge> {
        let mut out = Vec::with_capacity(self.steps.len() + 2);
        out.push(OrientedEdge::EndIn(self.source));
        out.extend_from_slice(&self.steps);
        out.push(OrientedEdge::EndOut(self.target));
        out
    }

    pub fn apex_vertex(&self) -> usize {
        self.vertices[self.apex]
    }
}

/// A validated, canonical metric tree with base point.
#[derive(Clone, Debug)]
pub struct MetricTree {
    vertices: Vec<Name>,
    edges: Vec<FiniteEdge>,
    ends: Vec<End>,
    base: usize,
    base_degree_two: bool,
    // Rooted at the base.
    parent_edge: Vec<Option<usize>>,
    hops: Vec<usize>,
    depth: Vec<Rational>,
    children: Vec<Vec<usize>>,
    ends_at: Vec<Vec<usize>>,
    /// For each vertex, whether each end lies below it.
    below: Vec<Vec<bool>>,
}

impl MetricTree {
    /// Builds from an already canonical description (degree-2 base allowed).
    pub fn new(t: &TreeDescription) -> Result<Self> {
        let report = validate_tree(t);
        if !report.is_valid() {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Structural(msgs.join("; ")));
        }
        let vertices: Vec<Name> = t.vertices.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let index: BTreeMap<&Name, usize> = vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let base = index[&t.base];
        let n = vertices.len();

        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (i, e) in t.edges.iter().enumerate() {
            let (a, b) = (index[&e.u], index[&e.v]);
            adj[a].push((b, i));
            adj[b].push((a, i));
        }
        let mut parent = vec![usize::MAX; n];
        let mut hops = vec![0; n];
        let mut depth = vec![Rational::zero(); n];
        let mut order = vec![base];
        let mut seen = vec![false; n];
        seen[base] = true;
        let mut k = 0;
        while k < order.len() {
            let x = order[k];
            k += 1;
            let mut nbrs = adj[x].clone();
            nbrs.sort();
            for (y, i) in nbrs {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = x;
                    hops[y] = hops[x] + 1;
                    depth[y] = &depth[x] + &t.edges[i].len.0;
                    order.push(y);
                }
            }
        }

        let mut raw_edges: Vec<FiniteEdge> = t
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (index[&e.u], index[&e.v]);
                let (p, c) = if parent[b] == a { (a, b) } else { (b, a) };
                FiniteEdge { parent: p, child: c, len: e.len.0.clone() }
            })
            .collect();
        raw_edges.sort_by(|x, y| (&vertices[x.parent], &vertices[x.child]).cmp(&(&vertices[y.parent], &vertices[y.child])));
        let mut parent_edge = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for (i, e) in raw_edges.iter().enumerate() {
            parent_edge[e.child] = Some(i);
            children[e.parent].push(e.child);
        }

        let mut ends: Vec<End> =
            t.ends.iter().map(|e| End { id: e.id.clone(), attach: index[&e.attach] }).collect();
        ends.sort_by(|a, b| a.id.cmp(&b.id));
        let mut ends_at = vec![Vec::new(); n];
        for (i, e) in ends.iter().enumerate() {
            ends_at[e.attach].push(i);
        }

        let mut below = vec![Vec::new(); n];
        for &x in order.iter().rev() {
            let mut acc = vec![false; ends.len()];
            for &e in &ends_at[x] {
                acc[e] = true;
            }
            for &c in &children[x] {
                for (a, b) in acc.iter_mut().zip(&below[c]) {
                    *a |= *b;
                }
            }
            below[x] = acc;
        }

        Ok(MetricTree {
            vertices,
            edges: raw_edges,
            ends,
            base,
            base_degree_two: report.base_degree_two,
            parent_edge,
            hops,
            depth,
            children,
            ends_at,
            below,
        })
    }

    /// Canonicalizes then builds.
    pub fn from_description(t: &TreeDescription) -> Result<Self> {
        MetricTree::new(&canonicalize(t)?.tree)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_name(&self, v: usize) -> &Name {
        &self.vertices[v]
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.binary_search_by(|v| v.0.as_str().cmp(name)).ok()
    }

    pub fn edges(&self) -> &[FiniteEdge] {
        &self.edges
    }

    pub fn ends(&self) -> &[End] {
        &self.ends
    }

    pub fn end_index(&self, id: &str) -> Option<usize> {
        self.ends.binary_search_by(|e| e.id.0.as_str().cmp(id)).ok()
    }

    pub fn end_name(&self, e: usize) -> &Name {
        &self.ends[e].id
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn base_degree_two(&self) -> bool {
        self.base_degree_two
    }

    /// Distance from the base to vertex `v`.
    pub fn depth(&self, v: usize) -> &Rational {
        &self.depth[v]
    }

    /// The finite edge joining `v` to its parent, if `v` is not the base.
    pub fn parent_edge(&self, v: usize) -> Option<usize> {
        self.parent_edge[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn ends_at(&self, v: usize) -> &[usize] {
        &self.ends_at[v]
    }

    /// Every oriented edge leaving `v`, finite ones first.
    pub fn out_edges(&self, v: usize) -> Vec<OrientedEdge> {
        let mut out = Vec::new();
        if let Some(e) = self.parent_edge[v] {
            out.push(OrientedEdge::Finite { edge: e, forward: false });
        }
        for &c in &self.children[v] {
            out.push(OrientedEdge::Finite { edge: self.parent_edge[c].unwrap(), forward: true });
        }
        out.extend(self.ends_at[v].iter().map(|&e| OrientedEdge::EndOut(e)));
        out
    }

    /// Tail and head vertex of an oriented edge; `None` stands for the end itself.
    pub fn endpoints(&self, oe: OrientedEdge) -> (Option<usize>, Option<usize>) {
        match oe {
            OrientedEdge::Finite { edge, forward } => {
                let e = &self.edges[edge];
                if forward {
                    (Some(e.parent), Some(e.child))
                } else {
                    (Some(e.child), Some(e.parent))
                }
            }
            OrientedEdge::EndOut(e) => (Some(self.ends[e].attach), None),
            OrientedEdge::EndIn(e) => (None, Some(self.ends[e].attach)),
        }
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.hops[a] > self.hops[b] {
            a = self.edges[self.parent_edge[a].unwrap()].parent;
        }
        while self.hops[b] > self.hops[a] {
            b = self.edges[self.parent_edge[b].unwrap()].parent;
        }
        while a != b {
            a = self.edges[self.parent_edge[a].unwrap()].parent;
            b = self.edges[self.parent_edge[b].unwrap()].parent;
        }
        a
    }

    /// Exact distance between two vertices.
    pub fn vertex_dist(&self, a: usize, b: usize) -> Rational {
        let m = self.lca(a, b);
        &self.depth[a] + &self.depth[b] - &self.depth[m] * Rational::from_integer(2.into())
    }

    /// The unique path between two distinct ends.
    pub fn path_between_ends(&self, a: usize, b: usize) -> Result<GeodesicPath> {
        if a == b {
            return Err(Error::Domain(format!("no geodesic joins end {} to itself", self.ends[a].id)));
        }
        let (mut x, mut y) = (self.ends[a].attach, self.ends[b].attach);
        let m = self.lca(x, y);
        let mut up = vec![x];
        let mut up_steps = Vec::new();
        while x != m {
            let e = self.parent_edge[x].unwrap();
            up_steps.push(OrientedEdge::Finite { edge: e, forward: false });
            x = self.edges[e].parent;
            up.push(x);
        }
        let mut down = Vec::new();
        let mut down_steps = Vec::new();
        while y != m {
            let e = self.parent_edge[y].unwrap();
            down.push(y);
            down_steps.push(OrientedEdge::Finite { edge: e, forward: true });
            y = self.edges[e].parent;
        }
        let apex = up.len() - 1;
        down.reverse();
        down_steps.reverse();
        up.extend(down);
        up_steps.extend(down_steps);
        Ok(GeodesicPath { source: a, target: b, vertices: up, steps: up_steps, apex })
    }

    /// Distance from the base to the geodesic joining `a` and `b`.
    pub fn d0(&self, a: usize, b: usize) -> D0 {
        if a == b {
            return D0::Infinite;
        }
        D0::Finite(self.depth[self.lca(self.ends[a].attach, self.ends[b].attach)].clone())
    }

    /// Ends lying ahead of an oriented edge, as a membership mask.
    pub fn future_mask(&self, oe: OrientedEdge) -> Vec<bool> {
        match oe {
            OrientedEdge::Finite { edge, forward } => {
                let sub = &self.below[self.edges[edge].child];
                if forward {
                    sub.clone()
                } else {
                    sub.iter().map(|b| !b).collect()
                }
            }
            OrientedEdge::EndOut(e) => (0..self.ends.len()).map(|i| i == e).collect(),
            OrientedEdge::EndIn(e) => (0..self.ends.len()).map(|i| i != e).collect(),
        }
    }

    pub fn future_ends(&self, oe: OrientedEdge) -> Vec<usize> {
        self.future_mask(oe).iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn past_ends(&self, oe: OrientedEdge) -> Vec<usize> {
        self.future_ends(oe.reversed())
    }

    /// Normal form of the point at distance `r` from `from` along the finite edge.
    pub fn point_on_edge(&self, edge: usize, from: usize, r: Rational) -> Result<TreePoint> {
        let e = &self.edges[edge];
        let offset = if from == e.parent {
            r
        } else if from == e.child {
            &e.len - r
        } else {
            return Err(Error::Domain(format!("vertex {} is not on edge {edge}", self.vertices[from])));
        };
        if offset.is_negative() || offset > e.len {
            return Err(Error::Domain("offset outside the edge".into()));
        }
        Ok(if offset.is_zero() {
            TreePoint::Vertex(e.parent)
        } else if offset == e.len {
            TreePoint::Vertex(e.child)
        } else {
            TreePoint::OnEdge { edge, offset }
        })
    }

    /// Normal form of the point at distance `r ≥ 0` out along an end edge.
    pub fn point_on_end(&self, end: usize, r: Rational) -> Result<TreePoint> {
        if r.is_negative() {
            return Err(Error::Domain("negative offset on an end edge".into()));
        }
        Ok(if r.is_zero() { TreePoint::Vertex(self.ends[end].attach) } else { TreePoint::OnEnd { end, offset: r } })
    }

    fn anchors(&self, p: &TreePoint) -> Vec<(usize, Rational)> {
        match p {
            TreePoint::Vertex(v) => vec![(*v, Rational::zero())],
            TreePoint::OnEdge { edge, offset } => {
                let e = &self.edges[*edge];
                vec![(e.parent, offset.clone()), (e.child, &e.len - offset)]
            }
            TreePoint::OnEnd { end, offset } => vec![(self.ends[*end].attach, offset.clone())],
        }
    }

    /// Exact tree distance between two finite points.
    pub fn dist(&self, p: &TreePoint, q: &TreePoint) -> Rational {
        match (p, q) {
            (TreePoint::OnEdge { edge: a, offset: x }, TreePoint::OnEdge { edge: b, offset: y })
            | (TreePoint::OnEnd { end: a, offset: x }, TreePoint::OnEnd { end: b, offset: y })
                if a == b && std::mem::discriminant(p) == std::mem::discriminant(q) =>
            {
                return (x - y).abs();
            }
            _ => {}
        }
        let mut best: Option<Rational> = None;
        for (u, du) in self.anchors(p) {
            for (w, dw) in self.anchors(q) {
                let d = &du + &dw + self.vertex_dist(u, w);
                if best.as_ref().map_or(true, |b| d < *b) {
                    best = Some(d);
                }
            }
        }
        best.unwrap()
    }

    /// Distance from the base point.
    pub fn dist_to_base(&self, p: &TreePoint) -> Rational {
        match p {
            TreePoint::Vertex(v) => self.depth[*v].clone(),
            TreePoint::OnEdge { edge, offset } => &self.depth[self.edges[*edge].parent] + offset,
            TreePoint::OnEnd { end, offset } => &self.depth[self.ends[*end].attach] + offset,
        }
    }

    /// Human-readable rendering of a point.
    pub fn describe_point(&self, p: &TreePoint) -> String {
        match p {
            TreePoint::Vertex(v) => self.vertices[*v].to_string(),
            TreePoint::OnEdge { edge, offset } => {
                let e = &self.edges[*edge];
                format!("{}+{} toward {}", self.vertices[e.parent], offset, self.vertices[e.child])
            }
            TreePoint::OnEnd { end, offset } => {
                let e = &self.ends[*end];
                format!("{}+{} toward end {}", self.vertices[e.attach], offset, e.id)
            }
        }
    }

    /// Back to a (canonical) description.
    pub fn description(&self) -> TreeDescription {
        TreeDescription {
            vertices: self.vertices.clone(),
            base: self.vertices[self.base].clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDescription {
                    u: self.vertices[e.parent].clone(),
                    v: self.vertices[e.child].clone(),
                    len: Frac(e.len.clone()),
                })
                .collect(),
            ends: self
                .ends
                .iter()
                .map(|e| EndDescription { id: e.id.clone(), attach: self.vertices[e.attach].clone() })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{caterpillar_t1, tripod};
    use crate::rational::{frac, int};

    #[test]
    fn tripod_is_valid() {
        let report = validate_tree(&tripod());
        assert!(report.is_valid(), "{:?}", report.violations);
        assert!(!report.base_degree_two);
    }

    #[test]
    fn degree_two_vertex_is_reported() {
        let t = TreeDescription::new("v0")
            .vertex("a")
            .vertex("v1")
            .edge("v0", "a", int(1))
            .edge("a", "v1", int(1))
            .end("A", "v0")
            .end("B", "v0")
            .end("C", "v1")
            .end("D", "v1");
        let report = validate_tree(&t);
        assert_eq!(report.violations, vec![Violation::NonCanonicalVertex { vertex: "a".into(), degree: 2 }]);
        assert!(report.violations[0].to_string().starts_with("non-canonical vertex"));
    }

    #[test]
    fn cycle_is_reported() {
        let t = TreeDescription::new("a")
            .vertex("b")
            .vertex("c")
            .edge("a", "b", int(1))
            .edge("b", "c", int(1))
            .edge("c", "a", int(1))
            .end("A", "a")
            .end("B", "b")
            .end("C", "c");
        let report = validate_tree(&t);
        assert!(report.violations.contains(&Violation::NotAcyclic));
        assert_eq!(Violation::NotAcyclic.to_string(), "not acyclic");
        assert!(matches!(canonicalize(&t), Err(Error::Structural(_))));
    }

    #[test]
    fn other_violations() {
        let t = TreeDescription::new("a").vertex("b").edge("a", "b", int(0)).end("A", "a");
        let v = validate_tree(&t).violations;
        assert!(v.contains(&Violation::NonPositiveLength { u: "a".into(), v: "b".into() }));
        assert!(v.contains(&Violation::TooFewEnds(1)));
        let t = TreeDescription::new("a").vertex("b").end("A", "a").end("B", "a").end("C", "b").end("D", "b").end("E", "b");
        assert!(validate_tree(&t).violations.contains(&Violation::Disconnected));
        let t = TreeDescription::new("a").end("A", "a").end("A", "a").end("B", "zz");
        let v = validate_tree(&t).violations;
        assert!(v.contains(&Violation::DuplicateEnd("A".into())));
        assert!(v.contains(&Violation::UnknownVertex("zz".into())));
    }

    #[test]
    fn canonicalize_merges_path() {
        let t = TreeDescription::new("v0")
            .vertex("a")
            .vertex("v1")
            .edge("v0", "a", int(1))
            .edge("a", "v1", int(1))
            .end("A", "v0")
            .end("B", "v0")
            .end("C", "v1")
            .end("D", "v1");
        let c = canonicalize(&t).unwrap();
        assert!(!c.base_degree_two);
        assert_eq!(c.tree.vertices, vec![Name::from("v0"), Name::from("v1")]);
        assert_eq!(c.tree.edges, vec![EdgeDescription { u: "v0".into(), v: "v1".into(), len: Frac(int(2)) }]);
        assert_eq!(canonicalize(&c.tree).unwrap(), c);
    }

    #[test]
    fn canonicalize_identity_and_base_flag() {
        let t1 = canonicalize(&caterpillar_t1()).unwrap();
        assert_eq!(t1.tree, caterpillar_t1());
        let t = TreeDescription::new("x0").vertex("a").vertex("b").edge("x0", "a", int(1)).edge("x0", "b", int(2))
            .end("A1", "a").end("A2", "a").end("B1", "b").end("B2", "b");
        let c = canonicalize(&t).unwrap();
        assert!(c.base_degree_two);
        assert_eq!(c.tree.vertices.len(), 3);
        let tree = MetricTree::new(&c.tree).unwrap();
        assert!(tree.base_degree_two());
    }

    #[test]
    fn canonicalize_hands_end_to_neighbour() {
        let t = TreeDescription::new("v0").vertex("w").edge("v0", "w", frac(3, 2)).end("A", "v0").end("B", "v0").end("C", "w");
        let c = canonicalize(&t).unwrap();
        assert_eq!(c.tree.vertices, vec![Name::from("v0")]);
        assert!(c.tree.ends.iter().all(|e| e.attach == Name::from("v0")));
    }

    #[test]
    fn paths_on_t1() {
        let t = MetricTree::new(&caterpillar_t1()).unwrap();
        let [a, b, c, d] = ["A", "B", "C", "D"].map(|n| t.end_index(n).unwrap());
        let p = t.path_between_ends(a, d).unwrap();
        assert_eq!(
            p.oriented_edges(),
            vec![OrientedEdge::EndIn(a), OrientedEdge::Finite { edge: 0, forward: true }, OrientedEdge::EndOut(d)]
        );
        let p = t.path_between_ends(c, d).unwrap();
        assert_eq!(p.vertices, vec![t.vertex_index("v1").unwrap()]);
        assert!(p.steps.is_empty());
        let p = t.path_between_ends(c, b).unwrap();
        assert_eq!(p.steps, vec![OrientedEdge::Finite { edge: 0, forward: false }]);
        assert_eq!(p.apex_vertex(), t.base());
        assert!(t.path_between_ends(a, a).is_err());
    }

    #[test]
    fn tripod_path_goes_through_center() {
        let t = MetricTree::new(&tripod()).unwrap();
        let p = t.path_between_ends(0, 1).unwrap();
        assert_eq!(p.vertices, vec![t.base()]);
    }

    #[test]
    fn d0_on_t1() {
        let t = MetricTree::new(&caterpillar_t1()).unwrap();
        let id = |n: &str| t.end_index(n).unwrap();
        assert_eq!(t.d0(id("C"), id("D")), D0::Finite(int(2)));
        for (x, y) in [("A", "B"), ("A", "D"), ("C", "B")] {
            assert_eq!(t.d0(id(x), id(y)), D0::Finite(int(0)));
        }
        assert_eq!(t.d0(id("A"), id("A")), D0::Infinite);
    }

    #[test]
    fn dist_on_t1() {
        let t = MetricTree::new(&caterpillar_t1()).unwrap();
        let v0 = TreePoint::Vertex(t.vertex_index("v0").unwrap());
        let v1 = TreePoint::Vertex(t.vertex_index("v1").unwrap());
        let on_d = t.point_on_end(t.end_index("D").unwrap(), int(1)).unwrap();
        assert_eq!(t.dist(&v0, &on_d), int(3));
        assert_eq!(t.dist(&v0, &v1), int(2));
        assert_eq!(t.dist(&on_d, &on_d), int(0));
        let mid = t.point_on_edge(0, t.vertex_index("v1").unwrap(), frac(1, 2)).unwrap();
        assert_eq!(mid, TreePoint::OnEdge { edge: 0, offset: frac(3, 2) });
        assert_eq!(t.dist(&mid, &on_d), frac(3, 2));
        assert_eq!(t.point_on_edge(0, t.base(), int(0)).unwrap(), v0);
        assert_eq!(t.point_on_edge(0, t.base(), int(2)).unwrap(), v1);
        assert!(t.point_on_edge(0, t.base(), int(3)).is_err());
    }

    #[test]
    fn future_ends_on_t1() {
        let t = MetricTree::new(&caterpillar_t1()).unwrap();
        let names = |v: Vec<usize>| v.into_iter().map(|e| t.end_name(e).0.clone()).collect::<Vec<_>>();
        let fwd = OrientedEdge::Finite { edge: 0, forward: true };
        assert_eq!(names(t.future_ends(fwd)), ["C", "D"]);
        assert_eq!(names(t.future_ends(fwd.reversed())), ["A", "B"]);
        assert_eq!(names(t.past_ends(fwd)), ["A", "B"]);
        let a = t.end_index("A").unwrap();
        assert_eq!(names(t.future_ends(OrientedEdge::EndOut(a))), ["A"]);
    }

    #[test]
    fn description_round_trip() {
        let t = MetricTree::new(&caterpillar_t1()).unwrap();
        assert_eq!(t.description(), caterpillar_t1());
        let json = serde_json::to_string(&caterpillar_t1()).unwrap();
        assert_eq!(serde_json::from_str::<TreeDescription>(&json).unwrap(), caterpillar_t1());
    }

    #[test]
    fn numeric_ids_are_accepted() {
        let json = r#"{"vertices":[0],"base":0,"edges":[],"ends":[{"id":"A","attach":0},{"id":"B","attach":0},{"id":"C","attach":0}]}"#;
        let d: TreeDescription = serde_json::from_str(json).unwrap();
        assert_eq!(d.base, Name::from("0"));
        assert!(MetricTree::new(&d).is_ok());
    }
}
