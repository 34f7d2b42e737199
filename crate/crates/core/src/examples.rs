//! Small named trees and random instance generators used by tests and the guide.

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::flows::BoundaryMeasure;
use crate::lp;
use crate::rational::{frac, int, Rational};
use crate::transport::{CostMatrix, Coupling};
use crate::tree::{MetricTree, TreeDescription};

/// Base `v0` joined to `v1` by an edge of length 2; ends A, B at `v0` and C, D at `v1`.
pub fn caterpillar_t1() -> TreeDescription {
    TreeDescription::new("v0")
        .vertex("v1")
        .edge("v0", "v1", int(2))
        .end("A", "v0")
        .end("B", "v0")
        .end("C", "v1")
        .end("D", "v1")
}

/// One vertex with three ends A, B, C.
pub fn tripod() -> TreeDescription {
    TreeDescription::new("o").end("A", "o").end("B", "o").end("C", "o")
}

/// ν₋ = ½δ_A + ½δ_C and ν₊ = ½δ_B + ½δ_D on T1.
pub fn t1_measures(tree: &MetricTree) -> (BoundaryMeasure, BoundaryMeasure) {
    let h = frac(1, 2);
    let minus = BoundaryMeasure::new(tree, [("A", h.clone()), ("C", h.clone())]).unwrap();
    let plus = BoundaryMeasure::new(tree, [("B", h.clone()), ("D", h)]).unwrap();
    (minus, plus)
}

/// The crossed coupling ½δ_(A,D) + ½δ_(C,B) on T1.
pub fn t1_bad_coupling(tree: &MetricTree) -> Coupling {
    let e = |n: &str| tree.end_index(n).unwrap();
    Coupling::from_atoms([(e("A"), e("D"), frac(1, 2)), (e("C"), e("B"), frac(1, 2))]).unwrap()
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub description: TreeDescription,
    pub tree: MetricTree,
    pub minus: BoundaryMeasure,
    pub plus: BoundaryMeasure,
}

/// A random canonical tree with 1 to 5 vertices, lengths p/q with p ≤ 6 and
/// q ≤ 3, and antipodal measures with at most `max_side` atoms per side.
pub fn random_instance(rng: &mut impl Rng, max_side: usize) -> Instance {
    let n = rng.gen_range(1..=5);
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut desc = TreeDescription::new(&names[0]);
    let mut degree = vec![0usize; n];
    for i in 1..n {
        let p = rng.gen_range(0..i);
        desc = desc.vertex(&names[i]).edge(&names[p], &names[i], frac(rng.gen_range(1..=6), rng.gen_range(1..=3)));
        degree[p] += 1;
        degree[i] += 1;
    }
    let mut attach = Vec::new();
    for (v, d) in degree.iter().enumerate() {
        attach.extend(std::iter::repeat(v).take(3usize.saturating_sub(*d)));
    }
    for _ in 0..rng.gen_range(0..=2) {
        attach.push(rng.gen_range(0..n));
    }
    for (k, v) in attach.iter().enumerate() {
        desc = desc.end(&format!("E{k:02}"), &names[*v]);
    }
    let tree = MetricTree::new(&desc).expect("generator emits canonical trees");

    let mut ends: Vec<usize> = (0..tree.ends().len()).collect();
    ends.shuffle(rng);
    let m = rng.gen_range(1..=max_side.min(ends.len() - 1));
    let p = rng.gen_range(1..=max_side.min(ends.len() - m));
    let minus = random_measure(rng, &ends[..m]);
    let plus = random_measure(rng, &ends[m..m + p]);
    Instance { description: desc, tree, minus, plus }
}

fn random_measure(rng: &mut impl Rng, support: &[usize]) -> BoundaryMeasure {
    let weights: Vec<i64> = support.iter().map(|_| rng.gen_range(1..=5)).collect();
    let total: i64 = weights.iter().sum();
    BoundaryMeasure::from_indices(support.iter().zip(&weights).map(|(&e, &w)| (e, frac(w, total)))).unwrap()
}

/// A random feasible coupling: a convex combination of one to three
/// north-west corner vertices taken in random row and column orders.
pub fn random_coupling(rng: &mut impl Rng, minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> Coupling {
    let (sources, targets) = (minus.support(), plus.support());
    let supply: Vec<Rational> = sources.iter().map(|&a| minus.mass(a)).collect();
    let demand: Vec<Rational> = targets.iter().map(|&b| plus.mass(b)).collect();
    let k = rng.gen_range(1..=3);
    let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    let mut atoms = Vec::new();
    for w in weights {
        let mut rows: Vec<usize> = (0..sources.len()).collect();
        let mut cols: Vec<usize> = (0..targets.len()).collect();
        rows.shuffle(rng);
        cols.shuffle(rng);
        for (i, j, x) in lp::northwest_corner(&supply, &demand, &rows, &cols) {
            if !x.is_zero() {
                atoms.push((sources[i], targets[j], x * frac(w, total)));
            }
        }
    }
    Coupling::from_atoms(atoms).unwrap()
}

/// The vertex coupling maximizing ∫ −D₀² dΠ, i.e. the worst one.
pub fn worst_coupling(cm: &CostMatrix, minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> Coupling {
    let supply: Vec<Rational> = cm.sources.iter().map(|&a| minus.mass(a)).collect();
    let demand: Vec<Rational> = cm.targets.iter().map(|&b| plus.mass(b)).collect();
    let flipped: Vec<Vec<Rational>> = cm.values.iter().map(|r| r.iter().map(|c| -c).collect()).collect();
    let sol = lp::solve(&supply, &demand, &flipped).unwrap();
    Coupling::from_atoms(sol.plan.into_iter().map(|(i, j, x)| (cm.sources[i], cm.targets[j], x))).unwrap()
}
