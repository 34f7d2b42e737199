//! The boundary transport problem with cost −D₀².

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::error::{domain, Result};
use crate::flows::{require_antipodal, BoundaryMeasure};
use crate::lp;
use crate::rational::Rational;
use crate::tree::{MetricTree, OrientedEdge};

/// Transport plan between two boundary measures, keyed by (source end, target end).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Coupling {
    atoms: BTreeMap<(usize, usize), Rational>,
}

impl Coupling {
    /// Zero atoms are dropped, repeated pairs accumulate.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (usize, usize, Rational)>) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
        for (a, b, m) in atoms {
            if m.is_negative() {
                return Err(domain("negative mass in coupling"));
            }
            *map.entry((a, b)).or_insert_with(Rational::zero) += m;
        }
        map.retain(|_, m| !m.is_zero());
        Ok(Coupling { atoms: map })
    }

    pub fn atoms(&self) -> impl Iterator<Item = (usize, usize, &Rational)> {
        self.atoms.iter().map(|(&(a, b), m)| (a, b, m))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self, source: usize, target: usize) -> Rational {
        self.atoms.get(&(source, target)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn source_marginal(&self) -> BTreeMap<usize, Rational> {
        let mut out = BTreeMap::new();
        for (&(a, _), m) in &self.atoms {
            *out.entry(a).or_insert_with(Rational::zero) += m;
        }
        out
    }

    pub fn target_marginal(&self) -> BTreeMap<usize, Rational> {
        let mut out = BTreeMap::new();
        for (&(_, b), m) in &self.atoms {
            *out.entry(b).or_insert_with(Rational::zero) += m;
        }
        out
    }

    /// Whether the marginals are exactly `minus` and `plus`.
    pub fn has_marginals(&self, minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> bool {
        let as_map = |m: &BoundaryMeasure| m.atoms().map(|(e, x)| (e, x.clone())).collect::<BTreeMap<_, _>>();
        self.source_marginal() == as_map(minus) && self.target_marginal() == as_map(plus)
    }

    /// Total cost ∫ c dΠ.
    pub fn cost(&self, cm: &CostMatrix) -> Rational {
        self.atoms.iter().map(|(&(a, b), m)| cm.get(a, b) * m).sum()
    }
}

/// −D₀² restricted to supp ν₋ × supp ν₊.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostMatrix {
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
    pub values: Vec<Vec<Rational>>,
}

impl CostMatrix {
    pub fn get(&self, source: usize, target: usize) -> &Rational {
        let i = self.sources.binary_search(&source).expect("source outside the support");
        let j = self.targets.binary_search(&target).expect("target outside the support");
        &self.values[i][j]
    }

    fn row(&self, source: usize) -> Option<usize> {
        self.sources.binary_search(&source).ok()
    }

    fn col(&self, target: usize) -> Option<usize> {
        self.targets.binary_search(&target).ok()
    }
}

pub fn cost_matrix(tree: &MetricTree, minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> Result<CostMatrix> {
    require_antipodal(tree, minus, plus)?;
    let sources = minus.support();
    let targets = plus.support();
    let values = sources
        .iter()
        .map(|&a| {
            targets
                .iter()
                .map(|&b| {
                    let d = tree.d0(a, b).finite().cloned().expect("antipodal supports are disjoint");
                    -(&d * &d)
                })
                .collect()
        })
        .collect();
    Ok(CostMatrix { sources, targets, values })
}

fn marginals(cm: &CostMatrix, minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> Result<(Vec<Rational>, Vec<Rational>)> {
    if minus.support() != cm.sources || plus.support() != cm.targets {
        return Err(domain("cost matrix was built for different measures"));
    }
    let supply = cm.sources.iter().map(|&a| minus.mass(a)).collect();
    let demand = cm.targets.iter().map(|&b| plus.mass(b)).collect();
    Ok((supply, demand))
}

/// Exact minimizer of ∫ −D₀² dΠ over Γ(ν₋, ν₊), returned as a polytope vertex.
///
/// Sources and targets are processed in end-id order, which fixes the pivot
/// sequence and hence which optimal vertex is returned.
pub fn solve_optimal_coupling(cm: &CostMatrix, minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> Result<(Coupling, Rational)> {
    let (supply, demand) = marginals(cm, minus, plus)?;
    let sol = lp::solve(&supply, &demand, &cm.values)?;
    let coupling = Coupling::from_atoms(sol.plan.into_iter().map(|(i, j, m)| (cm.sources[i], cm.targets[j], m)))?;
    Ok((coupling, sol.value))
}

/// Independent oracle: best north-west corner vertex over all support orderings.
pub fn brute_force_value(cm: &CostMatrix, minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> Result<Rational> {
    let (supply, demand) = marginals(cm, minus, plus)?;
    lp::northwest_min_value(&supply, &demand, &cm.values)
}

/// Outcome of a cyclical-monotonicity check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonotonicityReport {
    pub monotone: bool,
    /// A violating cycle `(a₁,b₁), …, (a_k,b_k)`: reassigning each `a_i` to
    /// `b_{i+1}` strictly lowers the cost.
    pub witness: Option<Vec<(usize, usize)>>,
    /// Whether cycles of every length were examined.
    pub complete: bool,
}

/// Cyclical monotonicity of `pi` for the cost in `cm`, over cycles of all lengths.
pub fn is_cyclically_monotone(pi: &Coupling, cm: &CostMatrix) -> Result<MonotonicityReport> {
    let mut cells = Vec::with_capacity(pi.len());
    let mut pairs = Vec::with_capacity(pi.len());
    for (a, b, _) in pi.atoms() {
        let (Some(i), Some(j)) = (cm.row(a), cm.col(b)) else {
            return Err(domain("coupling charges a pair outside the cost matrix"));
        };
        cells.push((i, j));
        pairs.push((a, b));
    }
    let witness = lp::negative_cycle(&cells, &cm.values).map(|cyc| cyc.into_iter().map(|k| pairs[k]).collect());
    Ok(MonotonicityReport { monotone: witness.is_none(), witness, complete: true })
}

/// Removes antagonist pairs edge by edge.
///
/// Finite edges are visited by increasing distance of their midpoint from the
/// base, ties by edge index. On each edge, every atom crossing it toward the
/// base is paired with one crossing it away from the base and the two swap
/// targets; the moved mass is the smaller of the two. New geodesics only use
/// oriented edges already used by the old ones, so edges handled earlier stay
/// clean, and the cost never goes up.
pub fn uncross(pi: &Coupling, tree: &MetricTree) -> Result<Coupling> {
    let mut atoms = pi.atoms.clone();
    let two = Rational::from_integer(2.into());
    let mut order: Vec<usize> = (0..tree.edges().len()).collect();
    order.sort_by_cached_key(|&e| {
        let edge = &tree.edges()[e];
        (tree.depth(edge.parent) + &edge.len / &two, e)
    });

    for edge in order {
        let fwd = OrientedEdge::Finite { edge, forward: true };
        loop {
            let mut away = None;
            let mut toward = None;
            for &(a, b) in atoms.keys() {
                let path = tree.path_between_ends(a, b)?;
                if away.is_none() && path.steps.contains(&fwd) {
                    away = Some((a, b));
                }
                if toward.is_none() && path.steps.contains(&fwd.reversed()) {
                    toward = Some((a, b));
                }
                if away.is_some() && toward.is_some() {
                    break;
                }
            }
            let (Some((outer_src, inner_tgt)), Some((inner_src, outer_tgt))) = (away, toward) else {
                break;
            };
            let m1 = atoms[&(outer_src, inner_tgt)].clone();
            let m2 = atoms[&(inner_src, outer_tgt)].clone();
            let moved = if m1 < m2 { m1 } else { m2 };
            for key in [(outer_src, inner_tgt), (inner_src, outer_tgt)] {
                let left = &atoms[&key] - &moved;
                if left.is_zero() {
                    atoms.remove(&key);
                } else {
                    atoms.insert(key, left);
                }
            }
            for key in [(inner_src, inner_tgt), (outer_src, outer_tgt)] {
                *atoms.entry(key).or_insert_with(Rational::zero) += &moved;
            }
        }
    }
    Ok(Coupling { atoms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{caterpillar_t1, t1_bad_coupling, t1_measures, tripod};
    use crate::rational::{frac, int};

    fn t1() -> (MetricTree, BoundaryMeasure, BoundaryMeasure) {
        let t = MetricTree::new(&caterpillar_t1()).unwrap();
        let (m, p) = t1_measures(&t);
        (t, m, p)
    }

    fn id(t: &MetricTree, n: &str) -> usize {
        t.end_index(n).unwrap()
    }

    #[test]
    fn t1_cost_matrix() {
        let (t, m, p) = t1();
        let cm = cost_matrix(&t, &m, &p).unwrap();
        assert_eq!(*cm.get(id(&t, "A"), id(&t, "B")), int(0));
        assert_eq!(*cm.get(id(&t, "A"), id(&t, "D")), int(0));
        assert_eq!(*cm.get(id(&t, "C"), id(&t, "B")), int(0));
        assert_eq!(*cm.get(id(&t, "C"), id(&t, "D")), int(-4));
    }

    #[test]
    fn scaling_lengths_scales_costs() {
        let (t, m, p) = t1();
        let t2 = MetricTree::new(&caterpillar_t1().scaled(&int(2))).unwrap();
        let (c1, c2) = (cost_matrix(&t, &m, &p).unwrap(), cost_matrix(&t2, &m, &p).unwrap());
        for (r1, r2) in c1.values.iter().zip(&c2.values) {
            for (x, y) in r1.iter().zip(r2) {
                assert_eq!(x * int(4), *y);
            }
        }
    }

    #[test]
    fn tripod_costs_vanish() {
        let t = MetricTree::new(&tripod()).unwrap();
        let m = BoundaryMeasure::dirac(0);
        let p = BoundaryMeasure::from_indices([(1, frac(1, 2)), (2, frac(1, 2))]).unwrap();
        let cm = cost_matrix(&t, &m, &p).unwrap();
        assert!(cm.values.iter().flatten().all(|x| x.is_zero()));
        let (pi, v) = solve_optimal_coupling(&cm, &m, &p).unwrap();
        assert_eq!(v, int(0));
        assert!(pi.has_marginals(&m, &p));
    }

    #[test]
    fn t1_solver_and_oracle() {
        let (t, m, p) = t1();
        let cm = cost_matrix(&t, &m, &p).unwrap();
        let (pi, v) = solve_optimal_coupling(&cm, &m, &p).unwrap();
        assert_eq!(v, int(-2));
        let expected = Coupling::from_atoms([(id(&t, "A"), id(&t, "B"), frac(1, 2)), (id(&t, "C"), id(&t, "D"), frac(1, 2))]).unwrap();
        assert_eq!(pi, expected);
        assert_eq!(brute_force_value(&cm, &m, &p).unwrap(), int(-2));
    }

    #[test]
    fn point_masses() {
        let (t, _, _) = t1();
        let (c, d) = (id(&t, "C"), id(&t, "D"));
        let (m, p) = (BoundaryMeasure::dirac(c), BoundaryMeasure::dirac(d));
        let cm = cost_matrix(&t, &m, &p).unwrap();
        let (pi, v) = solve_optimal_coupling(&cm, &m, &p).unwrap();
        assert_eq!(pi.len(), 1);
        assert_eq!(v, int(-4));
    }

    #[test]
    fn monotonicity_on_t1() {
        let (t, m, p) = t1();
        let cm = cost_matrix(&t, &m, &p).unwrap();
        let (pi, _) = solve_optimal_coupling(&cm, &m, &p).unwrap();
        assert!(is_cyclically_monotone(&pi, &cm).unwrap().monotone);

        let bad = t1_bad_coupling(&t);
        let report = is_cyclically_monotone(&bad, &cm).unwrap();
        assert!(!report.monotone);
        let w = report.witness.unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.contains(&(id(&t, "A"), id(&t, "D"))) && w.contains(&(id(&t, "C"), id(&t, "B"))));

        let single = Coupling::from_atoms([(id(&t, "C"), id(&t, "D"), int(1))]).unwrap();
        let cm1 = cost_matrix(&t, &BoundaryMeasure::dirac(id(&t, "C")), &BoundaryMeasure::dirac(id(&t, "D"))).unwrap();
        assert!(is_cyclically_monotone(&single, &cm1).unwrap().monotone);
    }

    #[test]
    fn uncross_t1() {
        let (t, m, p) = t1();
        let cm = cost_matrix(&t, &m, &p).unwrap();
        let bad = t1_bad_coupling(&t);
        let fixed = uncross(&bad, &t).unwrap();
        let (opt, _) = solve_optimal_coupling(&cm, &m, &p).unwrap();
        assert_eq!(fixed, opt);
        assert_eq!(uncross(&opt, &t).unwrap(), opt);
        assert!(fixed.cost(&cm) <= bad.cost(&cm));
    }

    #[test]
    fn mismatched_measures_are_rejected() {
        let (t, m, p) = t1();
        let cm = cost_matrix(&t, &m, &p).unwrap();
        let other = BoundaryMeasure::dirac(id(&t, "B"));
        assert!(solve_optimal_coupling(&cm, &m, &other).is_err());
    }
}
