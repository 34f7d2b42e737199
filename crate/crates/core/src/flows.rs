//! Boundary measures and the flow they induce through edges and vertices.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::error::{domain, Error, Result};
use crate::rational::Rational;
use crate::tree::{MetricTree, OrientedEdge};

/// Finitely supported probability measure on the ends of a tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryMeasure {
    atoms: BTreeMap<usize, Rational>,
}

impl BoundaryMeasure {
    /// Builds from end indices. Zero atoms are dropped; the total must be exactly 1.
    pub fn from_indices(atoms: impl IntoIterator<Item = (usize, Rational)>) -> Result<Self> {
        let mut map: BTreeMap<usize, Rational> = BTreeMap::new();
        for (e, m) in atoms {
            if m.is_negative() {
                return Err(domain(format!("negative mass {m} on end #{e}")));
            }
            *map.entry(e).or_insert_with(Rational::zero) += m;
        }
        map.retain(|_, m| !m.is_zero());
        let total: Rational = map.values().sum();
        if !total.is_one() {
            return Err(domain(format!("masses sum to {total}, not 1")));
        }
        Ok(BoundaryMeasure { atoms: map })
    }

    /// Builds from end ids of `tree`.
    pub fn new<'a>(tree: &MetricTree, atoms: impl IntoIterator<Item = (&'a str, Rational)>) -> Result<Self> {
        let mut indexed = Vec::new();
        for (id, m) in atoms {
            let e = tree.end_index(id).ok_or_else(|| domain(format!("unknown end {id}")))?;
            indexed.push((e, m));
        }
        Self::from_indices(indexed)
    }

    pub fn dirac(end: usize) -> Self {
        BoundaryMeasure { atoms: BTreeMap::from([(end, Rational::one())]) }
    }

    pub fn mass(&self, end: usize) -> Rational {
        self.atoms.get(&end).cloned().unwrap_or_else(Rational::zero)
    }

    /// Atoms in increasing end order.
    pub fn atoms(&self) -> impl Iterator<Item = (usize, &Rational)> {
        self.atoms.iter().map(|(&e, m)| (e, m))
    }

    pub fn support(&self) -> Vec<usize> {
        self.atoms.keys().copied().collect()
    }

    pub fn measure_of(&self, mask: &[bool]) -> Rational {
        self.atoms.iter().filter(|(e, _)| mask[**e]).map(|(_, m)| m).sum()
    }

    pub(crate) fn check_ends(&self, tree: &MetricTree) -> Result<()> {
        match self.atoms.keys().next_back() {
            Some(&e) if e >= tree.ends().len() => Err(domain(format!("end #{e} does not exist"))),
            _ => Ok(()),
        }
    }
}

/// On a tree every pair of distinct ends is antipodal, so antipodality of
/// finitely supported measures is disjointness of supports.
pub fn check_antipodal(minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> bool {
    minus.atoms.keys().all(|e| !plus.atoms.contains_key(e))
}

pub(crate) fn require_antipodal(tree: &MetricTree, minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> Result<()> {
    minus.check_ends(tree)?;
    plus.check_ends(tree)?;
    if let Some(e) = minus.atoms.keys().find(|e| plus.atoms.contains_key(e)) {
        return Err(Error::Domain(format!("measures are not antipodal: both charge end {}", tree.end_name(*e))));
    }
    Ok(())
}

/// Sign of the flow through an edge in its stored orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeClass {
    Positive,
    Neutral,
    Negative,
}

impl EdgeClass {
    pub fn of(x: &Rational) -> Self {
        if x.is_positive() {
            EdgeClass::Positive
        } else if x.is_zero() {
            EdgeClass::Neutral
        } else {
            EdgeClass::Negative
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeClass::Positive => "positive",
            EdgeClass::Neutral => "neutral",
            EdgeClass::Negative => "negative",
        }
    }
}

/// Flow field induced by a pair of antipodal measures.
///
/// Only one orientation per edge is stored: finite edges parent → child,
/// end edges outward. The opposite orientation carries the negated flow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowField {
    minus: BoundaryMeasure,
    plus: BoundaryMeasure,
    edge_flow: Vec<Rational>,
    end_flow: Vec<Rational>,
    vertex_flow: Vec<Rational>,
    specific_flow: Vec<Rational>,
}

impl FlowField {
    /// φ of an oriented edge.
    pub fn phi(&self, oe: OrientedEdge) -> Rational {
        match oe {
            OrientedEdge::Finite { edge, forward: true } => self.edge_flow[edge].clone(),
            OrientedEdge::Finite { edge, forward: false } => -&self.edge_flow[edge],
            OrientedEdge::EndOut(e) => self.end_flow[e].clone(),
            OrientedEdge::EndIn(e) => -&self.end_flow[e],
        }
    }

    /// φ(x), the flow through a vertex.
    pub fn vertex_flow(&self, v: usize) -> &Rational {
        &self.vertex_flow[v]
    }

    /// φ⁰(x), the specific flow through a vertex.
    pub fn specific_flow(&self, v: usize) -> &Rational {
        &self.specific_flow[v]
    }

    pub fn edge_flows(&self) -> &[Rational] {
        &self.edge_flow
    }

    pub fn end_flows(&self) -> &[Rational] {
        &self.end_flow
    }

    /// Classification of a finite edge in its parent → child orientation.
    pub fn class(&self, edge: usize) -> EdgeClass {
        EdgeClass::of(&self.edge_flow[edge])
    }

    pub fn minus(&self) -> &BoundaryMeasure {
        &self.minus
    }

    pub fn plus(&self) -> &BoundaryMeasure {
        &self.plus
    }
}

/// Computes φ on every oriented edge and φ, φ⁰ on every vertex.
pub fn compute_flow_field(tree: &MetricTree, minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> Result<FlowField> {
    require_antipodal(tree, minus, plus)?;
    let nu = |oe: OrientedEdge| {
        let mask = tree.future_mask(oe);
        plus.measure_of(&mask) - minus.measure_of(&mask)
    };
    let edge_flow: Vec<Rational> =
        (0..tree.edges().len()).map(|edge| nu(OrientedEdge::Finite { edge, forward: true })).collect();
    let end_flow: Vec<Rational> = (0..tree.ends().len()).map(|e| plus.mass(e) - minus.mass(e)).collect();

    let phi = |oe: OrientedEdge| match oe {
        OrientedEdge::Finite { edge, forward } => {
            if forward {
                edge_flow[edge].clone()
            } else {
                -&edge_flow[edge]
            }
        }
        OrientedEdge::EndOut(e) => end_flow[e].clone(),
        OrientedEdge::EndIn(e) => -&end_flow[e],
    };

    let n = tree.vertex_count();
    let mut vertex_flow = Vec::with_capacity(n);
    let mut specific_flow = Vec::with_capacity(n);
    for v in 0..n {
        let through: Rational = tree.out_edges(v).into_iter().map(phi).filter(|f| f.is_positive()).sum();
        let specific = match tree.parent_edge(v) {
            // The edge toward x₀ leaves v backwards along its stored orientation.
            Some(e) => {
                let toward_base = -&edge_flow[e];
                if toward_base.is_zero() {
                    through.clone()
                } else {
                    &through - toward_base.abs()
                }
            }
            None => through.clone(),
        };
        vertex_flow.push(through);
        specific_flow.push(specific);
    }

    Ok(FlowField {
        minus: minus.clone(),
        plus: plus.clone(),
        edge_flow,
        end_flow,
        vertex_flow,
        specific_flow,
    })
}

/// Σ φ⁰(x) d(x, x₀)² over all vertices.
pub fn condition3_sum(tree: &MetricTree, ff: &FlowField) -> Rational {
    (0..tree.vertex_count())
        .map(|v| {
            let d = tree.depth(v);
            ff.specific_flow(v) * d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{caterpillar_t1, t1_measures, tripod};
    use crate::rational::{frac, int};

    #[test]
    fn antipodality() {
        let t = MetricTree::new(&caterpillar_t1()).unwrap();
        let (m, p) = t1_measures(&t);
        assert!(check_antipodal(&m, &p));
        let a = BoundaryMeasure::dirac(t.end_index("A").unwrap());
        assert!(!check_antipodal(&a, &a));
        let t = MetricTree::new(&tripod()).unwrap();
        let m = BoundaryMeasure::new(&t, [("A", int(1))]).unwrap();
        let p = BoundaryMeasure::new(&t, [("B", frac(1, 2)), ("C", frac(1, 2))]).unwrap();
        assert!(check_antipodal(&m, &p));
    }

    #[test]
    fn measure_validation() {
        assert!(BoundaryMeasure::from_indices([(0, frac(1, 2))]).is_err());
        assert!(BoundaryMeasure::from_indices([(0, int(2)), (1, int(-1))]).is_err());
        let m = BoundaryMeasure::from_indices([(0, int(1)), (1, int(0))]).unwrap();
        assert_eq!(m.support(), vec![0]);
    }

    #[test]
    fn t1_flow_field() {
        let t = MetricTree::new(&caterpillar_t1()).unwrap();
        let (m, p) = t1_measures(&t);
        let ff = compute_flow_field(&t, &m, &p).unwrap();
        let (v0, v1) = (t.vertex_index("v0").unwrap(), t.vertex_index("v1").unwrap());
        assert_eq!(ff.edge_flows(), &[int(0)]);
        assert_eq!(ff.class(0), EdgeClass::Neutral);
        assert_eq!(ff.vertex_flow(v0), &frac(1, 2));
        assert_eq!(ff.specific_flow(v0), &frac(1, 2));
        assert_eq!(ff.vertex_flow(v1), &frac(1, 2));
        assert_eq!(ff.specific_flow(v1), &frac(1, 2));
        assert_eq!(condition3_sum(&t, &ff), int(2));
    }

    #[test]
    fn tripod_flow_field() {
        let t = MetricTree::new(&tripod()).unwrap();
        let m = BoundaryMeasure::new(&t, [("A", int(1))]).unwrap();
        let p = BoundaryMeasure::new(&t, [("B", frac(1, 2)), ("C", frac(1, 2))]).unwrap();
        let ff = compute_flow_field(&t, &m, &p).unwrap();
        assert_eq!(ff.end_flows(), &[int(-1), frac(1, 2), frac(1, 2)]);
        assert_eq!(ff.vertex_flow(t.base()), &int(1));
        assert_eq!(condition3_sum(&t, &ff), int(0));

        let swapped = compute_flow_field(&t, &p, &m).unwrap();
        for e in 0..3 {
            assert_eq!(swapped.phi(OrientedEdge::EndOut(e)), -ff.phi(OrientedEdge::EndOut(e)));
        }
        assert_eq!(swapped.vertex_flow(t.base()), ff.vertex_flow(t.base()));
    }

    #[test]
    fn non_antipodal_is_rejected() {
        let t = MetricTree::new(&tripod()).unwrap();
        let a = BoundaryMeasure::dirac(0);
        assert!(matches!(compute_flow_field(&t, &a, &a), Err(Error::Domain(_))));
    }
}
