//! Dynamical transport plans: finitely many weighted complete geodesics.
//!
//! Each atom follows the geodesic between its two ends at unit speed. With
//! `time_offset = 0` it sits at the point nearest the base at time 0; in
//! general it sits there at time `-time_offset`.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use crate::error::{domain, Result};
use crate::flows::{compute_flow_field, BoundaryMeasure, FlowField};
use crate::lp;
use crate::rational::Rational;
use crate::transport::Coupling;
use crate::tree::{GeodesicPath, MetricTree, OrientedEdge, TreePoint};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanAtom {
    pub source: usize,
    pub target: usize,
    pub mass: Rational,
    pub path: GeodesicPath,
    pub time_offset: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicalPlan {
    atoms: Vec<PlanAtom>,
}

impl DynamicalPlan {
    pub fn atoms(&self) -> &[PlanAtom] {
        &self.atoms
    }

    /// The end-point coupling `(e₋∞, e₊∞)#μ`.
    pub fn coupling(&self) -> Coupling {
        Coupling::from_atoms(self.atoms.iter().map(|a| (a.source, a.target, a.mass.clone())))
            .expect("plan masses are positive")
    }

    pub fn with_offsets(&self, offset: impl Fn(&PlanAtom) -> Rational) -> DynamicalPlan {
        let atoms = self
            .atoms
            .iter()
            .map(|a| PlanAtom { time_offset: offset(a), ..a.clone() })
            .collect();
        DynamicalPlan { atoms }
    }

    /// Re-times every atom so that it crosses level `t` of `tau` at time `t`.
    pub fn aligned_to(&self, tau: &TimeFunction) -> DynamicalPlan {
        self.with_offsets(|a| -tau.vertex_time(a.path.apex_vertex()).clone())
    }

    /// The same geodesics run backwards in time.
    pub fn reversed(&self, tree: &MetricTree) -> Result<DynamicalPlan> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(PlanAtom {
                    source: a.target,
                    target: a.source,
                    mass: a.mass.clone(),
                    path: tree.path_between_ends(a.target, a.source)?,
                    time_offset: -a.time_offset.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(DynamicalPlan { atoms })
    }

    fn marginals(&self) -> Result<(BoundaryMeasure, BoundaryMeasure)> {
        let minus = BoundaryMeasure::from_indices(self.atoms.iter().map(|a| (a.source, a.mass.clone())))?;
        let plus = BoundaryMeasure::from_indices(self.atoms.iter().map(|a| (a.target, a.mass.clone())))?;
        Ok((minus, plus))
    }
}

/// `F#Π` with the canonical parametrization: one atom per coupling atom, zero offsets.
pub fn lift(pi: &Coupling, tree: &MetricTree) -> Result<DynamicalPlan> {
    let atoms = pi
        .atoms()
        .map(|(a, b, m)| {
            Ok(PlanAtom {
                source: a,
                target: b,
                mass: m.clone(),
                path: tree.path_between_ends(a, b)?,
                time_offset: Rational::zero(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(DynamicalPlan { atoms })
}

/// Two atoms crossing a finite edge in opposite directions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Antagonism {
    pub first: usize,
    pub second: usize,
    /// The shared edge, oriented as `first` traverses it.
    pub edge: OrientedEdge,
}

pub fn antagonist_pairs(mu: &DynamicalPlan) -> Vec<Antagonism> {
    let dirs: Vec<BTreeMap<usize, bool>> = mu
        .atoms
        .iter()
        .map(|a| {
            a.path
                .steps
                .iter()
                .filter_map(|s| match *s {
                    OrientedEdge::Finite { edge, forward } => Some((edge, forward)),
                    _ => None,
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            let hit = dirs[i].iter().find(|(e, f)| dirs[j].get(e).is_some_and(|g| g != *f));
            if let Some((&edge, &forward)) = hit {
                out.push(Antagonism { first: i, second: j, edge: OrientedEdge::Finite { edge, forward } });
            }
        }
    }
    out
}

/// μ(xy), μ(x) and μ⁰(x) of a plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanMasses {
    pub forward: Vec<Rational>,
    pub backward: Vec<Rational>,
    pub end_out: Vec<Rational>,
    pub end_in: Vec<Rational>,
    pub vertex: Vec<Rational>,
    pub specific: Vec<Rational>,
}

impl PlanMasses {
    pub fn edge(&self, oe: OrientedEdge) -> &Rational {
        match oe {
            OrientedEdge::Finite { edge, forward: true } => &self.forward[edge],
            OrientedEdge::Finite { edge, forward: false } => &self.backward[edge],
            OrientedEdge::EndOut(e) => &self.end_out[e],
            OrientedEdge::EndIn(e) => &self.end_in[e],
        }
    }
}

pub fn plan_edge_and_vertex_masses(mu: &DynamicalPlan, tree: &MetricTree) -> PlanMasses {
    let zeros = |n: usize| vec![Rational::zero(); n];
    let (ne, nd, nv) = (tree.edges().len(), tree.ends().len(), tree.vertex_count());
    let mut pm = PlanMasses {
        forward: zeros(ne),
        backward: zeros(ne),
        end_out: zeros(nd),
        end_in: zeros(nd),
        vertex: zeros(nv),
        specific: zeros(nv),
    };
    for a in &mu.atoms {
        for oe in a.path.oriented_edges() {
            let slot = match oe {
                OrientedEdge::Finite { edge, forward: true } => &mut pm.forward[edge],
                OrientedEdge::Finite { edge, forward: false } => &mut pm.backward[edge],
                OrientedEdge::EndOut(e) => &mut pm.end_out[e],
                OrientedEdge::EndIn(e) => &mut pm.end_in[e],
            };
            *slot += &a.mass;
        }
        for &v in &a.path.vertices {
            pm.vertex[v] += &a.mass;
        }
        pm.specific[a.path.apex_vertex()] += &a.mass;
    }
    pm
}

/// Comparison of a plan's masses with the flow of its ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowLemmaReport {
    /// Sites where μ(xy) < max(φ(xy), 0).
    pub edge_violations: Vec<OrientedEdge>,
    /// Sites where μ(x) < φ(x).
    pub vertex_violations: Vec<usize>,
    pub strict_edges: Vec<OrientedEdge>,
    pub strict_vertices: Vec<usize>,
    /// Vertices with μ⁰(x) ≠ φ⁰(x).
    pub specific_mismatches: Vec<usize>,
    pub antagonism_free: bool,
}

impl FlowLemmaReport {
    pub fn edge_equality(&self) -> bool {
        self.edge_violations.is_empty() && self.strict_edges.is_empty()
    }

    pub fn vertex_equality(&self) -> bool {
        self.vertex_violations.is_empty() && self.strict_vertices.is_empty()
    }

    /// Both inequalities hold, each equality case matches antagonism-freeness,
    /// and μ⁰ = φ⁰ whenever the plan is antagonism-free.
    pub fn consistent(&self) -> bool {
        self.edge_violations.is_empty()
            && self.vertex_violations.is_empty()
            && self.edge_equality() == self.antagonism_free
            && self.vertex_equality() == self.antagonism_free
            && (!self.antagonism_free || self.specific_mismatches.is_empty())
    }
}

pub fn check_flow_lemma(mu: &DynamicalPlan, ff: &FlowField, tree: &MetricTree) -> Result<FlowLemmaReport> {
    if !mu.coupling().has_marginals(ff.minus(), ff.plus()) {
        return Err(domain("plan ends do not match the measures of the flow field"));
    }
    let pm = plan_edge_and_vertex_masses(mu, tree);
    let mut oriented = Vec::new();
    for edge in 0..tree.edges().len() {
        oriented.push(OrientedEdge::Finite { edge, forward: true });
        oriented.push(OrientedEdge::Finite { edge, forward: false });
    }
    for e in 0..tree.ends().len() {
        oriented.push(OrientedEdge::EndOut(e));
        oriented.push(OrientedEdge::EndIn(e));
    }
    let mut report = FlowLemmaReport {
        edge_violations: Vec::new(),
        vertex_violations: Vec::new(),
        strict_edges: Vec::new(),
        strict_vertices: Vec::new(),
        specific_mismatches: Vec::new(),
        antagonism_free: antagonist_pairs(mu).is_empty(),
    };
    for oe in oriented {
        let phi = ff.phi(oe);
        let bound = if phi.is_positive() { phi } else { Rational::zero() };
        let m = pm.edge(oe);
        if *m < bound {
            report.edge_violations.push(oe);
        } else if *m > bound {
            report.strict_edges.push(oe);
        }
    }
    for v in 0..tree.vertex_count() {
        let (m, phi) = (&pm.vertex[v], ff.vertex_flow(v));
        if m < phi {
            report.vertex_violations.push(v);
        } else if m > phi {
            report.strict_vertices.push(v);
        }
        if &pm.specific[v] != ff.specific_flow(v) {
            report.specific_mismatches.push(v);
        }
    }
    Ok(report)
}

/// Continuous τ with τ(x₀) = 0, slope 1 along positive orientations and 0 on neutral edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimeFunction {
    vertex_time: Vec<Rational>,
    edge_slope: Vec<i8>,
    end_slope: Vec<i8>,
}

impl TimeFunction {
    pub fn vertex_time(&self, v: usize) -> &Rational {
        &self.vertex_time[v]
    }

    /// Slope along the stored (parent → child) orientation: −1, 0 or 1.
    pub fn edge_slope(&self, edge: usize) -> i8 {
        self.edge_slope[edge]
    }

    /// Slope going out along an end edge.
    pub fn end_slope(&self, end: usize) -> i8 {
        self.end_slope[end]
    }

    pub fn at(&self, tree: &MetricTree, p: &TreePoint) -> Rational {
        let step = |base: &Rational, slope: i8, off: &Rational| base + Rational::from_integer(slope.into()) * off;
        match p {
            TreePoint::Vertex(v) => self.vertex_time[*v].clone(),
            TreePoint::OnEdge { edge, offset } => {
                step(&self.vertex_time[tree.edges()[*edge].parent], self.edge_slope[*edge], offset)
            }
            TreePoint::OnEnd { end, offset } => {
                step(&self.vertex_time[tree.ends()[*end].attach], self.end_slope[*end], offset)
            }
        }
    }
}

fn sign(x: &Rational) -> i8 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

/// Builds τ by propagating outward from the base.
pub fn build_time_function(tree: &MetricTree, ff: &FlowField) -> TimeFunction {
    let edge_slope: Vec<i8> = ff.edge_flows().iter().map(sign).collect();
    let end_slope: Vec<i8> = ff.end_flows().iter().map(sign).collect();
    let mut vertex_time = vec![Rational::zero(); tree.vertex_count()];
    let mut stack = vec![tree.base()];
    while let Some(x) = stack.pop() {
        for &c in tree.children(x) {
            let e = tree.parent_edge(c).unwrap();
            let len = &tree.edges()[e].len;
            vertex_time[c] = &vertex_time[x] + Rational::from_integer(edge_slope[e].into()) * len;
            stack.push(c);
        }
    }
    TimeFunction { vertex_time, edge_slope, end_slope }
}

/// Position of an atom at parameter `s`, measured from its apex.
fn position(tree: &MetricTree, path: &GeodesicPath, s: &Rational) -> TreePoint {
    let mut rem = s.abs();
    let mut idx = path.apex;
    if !s.is_negative() {
        while idx + 1 < path.vertices.len() {
            let OrientedEdge::Finite { edge, .. } = path.steps[idx] else { unreachable!() };
            let len = &tree.edges()[edge].len;
            if rem < *len {
                return tree.point_on_edge(edge, path.vertices[idx], rem).unwrap();
            }
            rem -= len;
            idx += 1;
        }
        tree.point_on_end(path.target, rem).unwrap()
    } else {
        while idx > 0 {
            let OrientedEdge::Finite { edge, .. } = path.steps[idx - 1] else { unreachable!() };
            let len = &tree.edges()[edge].len;
            if rem < *len {
                return tree.point_on_edge(edge, path.vertices[idx], rem).unwrap();
            }
            rem -= len;
            idx -= 1;
        }
        tree.point_on_end(path.source, rem).unwrap()
    }
}

/// A finitely supported probability measure on the tree at a given time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub time: Rational,
    pub atoms: BTreeMap<TreePoint, Rational>,
}

impl Snapshot {
    pub fn total_mass(&self) -> Rational {
        self.atoms.values().sum()
    }
}

pub fn atom_position(tree: &MetricTree, atom: &PlanAtom, time: &Rational) -> TreePoint {
    position(tree, &atom.path, &(time + &atom.time_offset))
}

/// `μ_t = (e_t)#μ`; atoms landing on the same point merge.
pub fn snapshot(mu: &DynamicalPlan, time: &Rational, tree: &MetricTree) -> Snapshot {
    let mut atoms: BTreeMap<TreePoint, Rational> = BTreeMap::new();
    for a in &mu.atoms {
        *atoms.entry(atom_position(tree, a, time)).or_insert_with(Rational::zero) += &a.mass;
    }
    Snapshot { time: time.clone(), atoms }
}

/// ∫ d(x, x₀)² dμ_t.
pub fn second_moment(s: &Snapshot, tree: &MetricTree) -> Rational {
    s.atoms
        .iter()
        .map(|(p, m)| {
            let d = tree.dist_to_base(p);
            &d * &d * m
        })
        .sum()
}

/// The level measure Σ φ(a) δ_a over the points of τ's level `t` in the
/// forest left after deleting neutral edges. A vertex carries its vertex
/// flow, an interior point the flow of its edge.
pub fn level_measure(tree: &MetricTree, ff: &FlowField, tau: &TimeFunction, t: &Rational) -> Snapshot {
    let mut atoms = BTreeMap::new();
    for v in 0..tree.vertex_count() {
        if tau.vertex_time(v) == t && ff.vertex_flow(v).is_positive() {
            atoms.insert(TreePoint::Vertex(v), ff.vertex_flow(v).clone());
        }
    }
    for (i, e) in tree.edges().iter().enumerate() {
        let (t0, t1) = (tau.vertex_time(e.parent), tau.vertex_time(e.child));
        let inside = (t0 < t && t < t1) || (t1 < t && t < t0);
        if inside {
            atoms.insert(TreePoint::OnEdge { edge: i, offset: (t - t0).abs() }, ff.edge_flows()[i].abs());
        }
    }
    for (i, e) in tree.ends().iter().enumerate() {
        let t0 = tau.vertex_time(e.attach);
        let off = Rational::from_integer(tau.end_slope(i).into()) * (t - t0);
        if tau.end_slope(i) != 0 && off.is_positive() {
            atoms.insert(TreePoint::OnEnd { end: i, offset: off }, ff.end_flows()[i].abs());
        }
    }
    Snapshot { time: t.clone(), atoms }
}

/// Exact W₂² between two snapshots: LP under squared tree distance.
pub fn snapshot_distance_sq(a: &Snapshot, b: &Snapshot, tree: &MetricTree) -> Result<Rational> {
    let supply: Vec<Rational> = a.atoms.values().cloned().collect();
    let demand: Vec<Rational> = b.atoms.values().cloned().collect();
    let cost: Vec<Vec<Rational>> = a
        .atoms
        .keys()
        .map(|p| {
            b.atoms
                .keys()
                .map(|q| {
                    let d = tree.dist(p, q);
                    &d * &d
                })
                .collect()
        })
        .collect();
    Ok(lp::solve(&supply, &demand, &cost)?.value)
}

/// Whether the plan's induced coupling between μ_r and μ_s is cyclically
/// monotone for the squared distance.
pub fn snapshot_coupling_monotone(mu: &DynamicalPlan, r: &Rational, s: &Rational, tree: &MetricTree) -> bool {
    let from: Vec<TreePoint> = mu.atoms.iter().map(|a| atom_position(tree, a, r)).collect();
    let to: Vec<TreePoint> = mu.atoms.iter().map(|a| atom_position(tree, a, s)).collect();
    let rows: Vec<&TreePoint> = from.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let cols: Vec<&TreePoint> = to.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let cost: Vec<Vec<Rational>> = rows
        .iter()
        .map(|p| {
            cols.iter()
                .map(|q| {
                    let d = tree.dist(p, q);
                    &d * &d
                })
                .collect()
        })
        .collect();
    let cells: BTreeSet<(usize, usize)> = from
        .iter()
        .zip(&to)
        .map(|(p, q)| (rows.binary_search(&p).unwrap(), cols.binary_search(&q).unwrap()))
        .collect();
    let cells: Vec<(usize, usize)> = cells.into_iter().collect();
    lp::negative_cycle(&cells, &cost).is_none()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpeedCheck {
    pub from: Rational,
    pub to: Rational,
    pub expected: Rational,
    pub value: Rational,
}

impl SpeedCheck {
    pub fn ok(&self) -> bool {
        self.value == self.expected
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeodesicReport {
    pub antagonism_free: bool,
    /// Every atom runs along positive orientations only, so τ is isometric on it.
    pub tau_isometric: bool,
    pub speed: Vec<SpeedCheck>,
}

impl GeodesicReport {
    pub fn passed(&self) -> bool {
        self.antagonism_free && self.tau_isometric && self.speed.iter().all(SpeedCheck::ok)
    }
}

/// Checks that the plan is a unit-speed geodesic of W₂ at the sampled times.
pub fn verify_geodesic(mu: &DynamicalPlan, tree: &MetricTree, times: &[Rational]) -> Result<GeodesicReport> {
    let times: Vec<Rational> = times.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if times.len() < 2 {
        return Err(domain("geodesic verification needs at least two distinct sample times"));
    }
    let (minus, plus) = mu.marginals()?;
    let ff = compute_flow_field(tree, &minus, &plus)?;
    let tau_isometric =
        mu.atoms.iter().all(|a| a.path.oriented_edges().into_iter().all(|oe| ff.phi(oe).is_positive()));
    let snaps: Vec<Snapshot> = times.iter().map(|t| snapshot(mu, t, tree)).collect();
    let mut speed = Vec::new();
    for i in 0..snaps.len() {
        for j in i + 1..snaps.len() {
            let gap = &times[j] - &times[i];
            speed.push(SpeedCheck {
                from: times[i].clone(),
                to: times[j].clone(),
                expected: &gap * &gap,
                value: snapshot_distance_sq(&snaps[i], &snaps[j], tree)?,
            });
        }
    }
    Ok(GeodesicReport { antagonism_free: antagonist_pairs(mu).is_empty(), tau_isometric, speed })
}

/// Sample times wide enough that every crossing of two atoms falls between
/// the extremes: ±(2 + total finite length), plus −1, 0, 1.
pub fn default_sample_times(tree: &MetricTree) -> Vec<Rational> {
    let two = Rational::from_integer(2.into());
    let span: Rational = two + tree.edges().iter().map(|e| &e.len).sum::<Rational>();
    let one = Rational::one();
    vec![-span.clone(), -one.clone(), Rational::zero(), one, span]
}
