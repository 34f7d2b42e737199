use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use wtree::dynamics::{
    antagonist_pairs, build_time_function, default_sample_times, level_measure, lift, second_moment, snapshot,
    snapshot_coupling_monotone,
};
use wtree::examples::{random_coupling, random_instance, Instance};
use wtree::flows::compute_flow_field;
use wtree::rational::{frac, int, Rational};
use wtree::realizability::{decide, family_analyze, realize, FamilySpec, Schedule, Verdict};
use wtree::transport::{cost_matrix, is_cyclically_monotone, solve_optimal_coupling, uncross};
use wtree::tree::{canonicalize, MetricTree, OrientedEdge, TreeDescription, TreePoint, D0};

fn instance(seed: u64, side: usize) -> (StdRng, Instance) {
    let mut rng = StdRng::seed_from_u64(seed);
    let inst = random_instance(&mut rng, side);
    (rng, inst)
}

fn sample_points(t: &MetricTree, rng: &mut StdRng, n: usize) -> Vec<TreePoint> {
    (0..n)
        .map(|_| match rng.gen_range(0..3) {
            0 => TreePoint::Vertex(rng.gen_range(0..t.vertex_count())),
            1 if !t.edges().is_empty() => {
                let e = rng.gen_range(0..t.edges().len());
                let x = &t.edges()[e].len * frac(rng.gen_range(1..8), 8);
                TreePoint::OnEdge { edge: e, offset: x }
            }
            _ => TreePoint::OnEnd { end: rng.gen_range(0..t.ends().len()), offset: frac(rng.gen_range(1..20), 3) },
        })
        .collect()
}

/// Minimum over every basis of the transport polytope, found by trying all
/// (m+n−1)-subsets of cells that form a spanning tree.
fn vertex_enumeration_min(supply: &[Rational], demand: &[Rational], cost: &[Vec<Rational>]) -> Rational {
    let (m, n) = (supply.len(), demand.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best: Option<Rational> = None;
    let mut pick = Vec::with_capacity(k);
    fn rec(
        start: usize,
        k: usize,
        cells: &[(usize, usize)],
        pick: &mut Vec<(usize, usize)>,
        f: &mut dyn FnMut(&[(usize, usize)]),
    ) {
        if pick.len() == k {
            f(pick);
            return;
        }
        for c in start..cells.len() {
            pick.push(cells[c]);
            rec(c + 1, k, cells, pick, f);
            pick.pop();
        }
    }
    let mut visit = |basis: &[(usize, usize)]| {
        // Peel leaves: a row or column touching a single unresolved cell fixes it.
        let mut rest_s = supply.to_vec();
        let mut rest_d = demand.to_vec();
        let mut open: Vec<(usize, usize)> = basis.to_vec();
        let mut value = Rational::zero();
        while !open.is_empty() {
            let leaf = open.iter().position(|&(i, j)| {
                open.iter().filter(|c| c.0 == i).count() == 1 || open.iter().filter(|c| c.1 == j).count() == 1
            });
            let Some(p) = leaf else { return };
            let (i, j) = open.remove(p);
            let row_leaf = !open.iter().any(|c| c.0 == i);
            let x = if row_leaf { rest_s[i].clone() } else { rest_d[j].clone() };
            if x.is_negative() {
                return;
            }
            rest_s[i] -= &x;
            rest_d[j] -= &x;
            value += &x * &cost[i][j];
        }
        if rest_s.iter().chain(&rest_d).any(|r| !r.is_zero()) {
            return;
        }
        if best.as_ref().map_or(true, |b| value < *b) {
            best = Some(value);
        }
    };
    rec(0, k, &cells, &mut pick, &mut visit);
    best.expect("the polytope has a vertex")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gromov_inequality(seed in any::<u64>()) {
        let (_, i) = instance(seed, 6);
        let t = &i.tree;
        let n = t.ends().len().min(8);
        let d = |a, b| t.d0(a, b).finite().cloned().unwrap();
        for a in 0..n {
            prop_assert_eq!(t.d0(a, a), D0::Infinite);
            for b in 0..n {
                for c in 0..n {
                    if a != b && b != c && a != c {
                        let m = d(a, b).min(d(b, c));
                        prop_assert!(d(a, c) >= m);
                    }
                }
            }
        }
    }

    #[test]
    fn futures_partition_the_ends(seed in any::<u64>()) {
        let (_, i) = instance(seed, 6);
        let t = &i.tree;
        for edge in 0..t.edges().len() {
            let oe = OrientedEdge::Finite { edge, forward: true };
            let mut all = t.future_ends(oe);
            all.extend(t.future_ends(oe.reversed()));
            all.sort();
            prop_assert_eq!(all, (0..t.ends().len()).collect::<Vec<_>>());
        }
        for e in 0..t.ends().len() {
            prop_assert_eq!(t.future_ends(OrientedEdge::EndOut(e)), vec![e]);
        }
    }

    #[test]
    fn dist_is_a_metric(seed in any::<u64>()) {
        let (mut rng, i) = instance(seed, 6);
        let t = &i.tree;
        let pts = sample_points(t, &mut rng, 20);
        for p in &pts {
            prop_assert_eq!(t.dist(p, p), int(0));
            for q in &pts {
                prop_assert_eq!(t.dist(p, q), t.dist(q, p));
                for r in &pts {
                    prop_assert!(t.dist(p, r) <= t.dist(p, q) + t.dist(q, r));
                }
            }
        }
    }

    #[test]
    fn canonicalize_removes_subdivisions(seed in any::<u64>()) {
        let (mut rng, i) = instance(seed, 6);
        let mut desc: TreeDescription = i.description.clone();
        // Subdivide some finite edges.
        for k in 0..desc.edges.len() {
            if rng.gen_bool(0.5) {
                let e = desc.edges[k].clone();
                let name = format!("w{k}");
                let cut = &e.len.0 * frac(1, 3);
                desc.edges[k].v = name.as_str().into();
                desc.edges[k].len = (&e.len.0 - &cut).into();
                desc = desc.vertex(&name).edge(&name, &e.v.0, cut);
            }
        }
        let canon = canonicalize(&desc).unwrap();
        prop_assert_eq!(&canonicalize(&canon.tree).unwrap().tree, &canon.tree);
        let a = MetricTree::new(&canon.tree).unwrap();
        let b = &i.tree;
        prop_assert_eq!(a.description(), b.description());
        for u in 0..b.vertex_count() {
            for v in 0..b.vertex_count() {
                let (x, y) = (a.vertex_index(&b.vertex_name(u).0).unwrap(), a.vertex_index(&b.vertex_name(v).0).unwrap());
                prop_assert_eq!(a.vertex_dist(x, y), b.vertex_dist(u, v));
            }
        }
    }

    #[test]
    fn flow_field_laws(seed in any::<u64>()) {
        let (_, i) = instance(seed, 6);
        let t = &i.tree;
        let ff = compute_flow_field(t, &i.minus, &i.plus).unwrap();
        let swapped = compute_flow_field(t, &i.plus, &i.minus).unwrap();
        for v in 0..t.vertex_count() {
            let out: Rational = t.out_edges(v).into_iter().map(|oe| ff.phi(oe)).sum();
            prop_assert!(out.is_zero(), "Kirchhoff fails at {}", v);
            prop_assert!(!ff.specific_flow(v).is_negative());
            prop_assert!(ff.specific_flow(v) <= ff.vertex_flow(v));
            prop_assert!(*ff.vertex_flow(v) <= Rational::one());
            prop_assert_eq!(swapped.vertex_flow(v), ff.vertex_flow(v));
        }
        for edge in 0..t.edges().len() {
            let oe = OrientedEdge::Finite { edge, forward: true };
            prop_assert_eq!(ff.phi(oe.reversed()), -ff.phi(oe));
            prop_assert_eq!(swapped.phi(oe), -ff.phi(oe));
        }
        for e in 0..t.ends().len() {
            prop_assert_eq!(ff.phi(OrientedEdge::EndOut(e)), i.plus.mass(e) - i.minus.mass(e));
        }
    }

    #[test]
    fn solver_matches_vertex_enumeration(seed in any::<u64>()) {
        let (_, i) = instance(seed, 4);
        let cm = cost_matrix(&i.tree, &i.minus, &i.plus).unwrap();
        let (pi, value) = solve_optimal_coupling(&cm, &i.minus, &i.plus).unwrap();
        let supply: Vec<Rational> = cm.sources.iter().map(|&a| i.minus.mass(a)).collect();
        let demand: Vec<Rational> = cm.targets.iter().map(|&b| i.plus.mass(b)).collect();
        prop_assert_eq!(&value, &vertex_enumeration_min(&supply, &demand, &cm.values));
        prop_assert!(pi.len() < supply.len() + demand.len());
        prop_assert!(pi.has_marginals(&i.minus, &i.plus));
        prop_assert_eq!(pi.cost(&cm), value);
    }

    #[test]
    fn scaling_lengths_scales_costs(seed in any::<u64>()) {
        let (_, i) = instance(seed, 6);
        let big = MetricTree::new(&i.description.scaled(&int(2))).unwrap();
        let (a, b) = (cost_matrix(&i.tree, &i.minus, &i.plus).unwrap(), cost_matrix(&big, &i.minus, &i.plus).unwrap());
        for (r, s) in a.values.iter().zip(&b.values) {
            for (x, y) in r.iter().zip(s) {
                prop_assert_eq!(x * int(4), y.clone());
            }
        }
    }

    #[test]
    fn uncross_yields_monotone_plans(seed in any::<u64>()) {
        let (mut rng, i) = instance(seed, 6);
        let cm = cost_matrix(&i.tree, &i.minus, &i.plus).unwrap();
        let pi = random_coupling(&mut rng, &i.minus, &i.plus);
        let u = uncross(&pi, &i.tree).unwrap();
        prop_assert!(is_cyclically_monotone(&u, &cm).unwrap().monotone);
        prop_assert!(u.cost(&cm) <= pi.cost(&cm));
        prop_assert!(u.has_marginals(&i.minus, &i.plus));
    }

    #[test]
    fn snapshots_conserve_mass(seed in any::<u64>(), num in -40i64..40, den in 1i64..6) {
        let (mut rng, i) = instance(seed, 6);
        let pi = random_coupling(&mut rng, &i.minus, &i.plus);
        let mu = lift(&pi, &i.tree).unwrap();
        prop_assert_eq!(snapshot(&mu, &frac(num, den), &i.tree).total_mass(), int(1));
    }

    #[test]
    fn realized_plans_meet_the_moment_identities(seed in any::<u64>()) {
        let (_, i) = instance(seed, 6);
        let r = decide(&i.tree, &i.minus, &i.plus).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Realizable);
        let moment = r.second_moment.clone().unwrap();
        prop_assert_eq!(&moment, &-r.lp_value.clone().unwrap());
        prop_assert!(r.condition3.clone().unwrap() <= moment);
        let (pi, mu) = r.realized.unwrap();
        let direct: Rational = pi
            .atoms()
            .map(|(a, b, m)| {
                let d = i.tree.d0(a, b).finite().cloned().unwrap();
                &d * &d * m
            })
            .sum();
        prop_assert_eq!(second_moment(&snapshot(&mu, &int(0), &i.tree), &i.tree), direct);
    }

    #[test]
    fn aligned_snapshots_are_level_measures(seed in any::<u64>()) {
        let (_, i) = instance(seed, 6);
        let ff = compute_flow_field(&i.tree, &i.minus, &i.plus).unwrap();
        let tau = build_time_function(&i.tree, &ff);
        let r = realize(&i.tree, &i.minus, &i.plus, &[]).unwrap();
        let aligned = r.plan.aligned_to(&tau);
        let mut times: Vec<Rational> = (0..i.tree.vertex_count()).map(|v| tau.vertex_time(v).clone()).collect();
        times.extend((-12..=12).map(|k| frac(k, 4)));
        for t in &times {
            prop_assert_eq!(&snapshot(&aligned, t, &i.tree).atoms, &level_measure(&i.tree, &ff, &tau, t).atoms, "time {}", t);
        }
    }

    #[test]
    fn antagonism_shows_in_snapshot_couplings(seed in any::<u64>()) {
        let (mut rng, i) = instance(seed, 6);
        let pi = random_coupling(&mut rng, &i.minus, &i.plus);
        let mu = lift(&pi, &i.tree).unwrap();
        let times = default_sample_times(&i.tree);
        let mut all_monotone = true;
        for (k, r) in times.iter().enumerate() {
            for s in &times[k + 1..] {
                all_monotone &= snapshot_coupling_monotone(&mu, r, s, &i.tree);
            }
        }
        prop_assert_eq!(antagonist_pairs(&mu).is_empty(), all_monotone);
    }

    #[test]
    fn swapping_measures_reverses_time(seed in any::<u64>()) {
        let (_, i) = instance(seed, 6);
        let fwd = realize(&i.tree, &i.minus, &i.plus, &[]).unwrap();
        let back = realize(&i.tree, &i.plus, &i.minus, &[]).unwrap();
        prop_assert_eq!(&fwd.value, &back.value);
        let rev = fwd.plan.reversed(&i.tree).unwrap();
        prop_assert!(antagonist_pairs(&rev).is_empty());
        for k in -6..=6 {
            let t = frac(k, 2);
            prop_assert_eq!(snapshot(&rev, &t, &i.tree).atoms, snapshot(&fwd.plan, &-t.clone(), &i.tree).atoms);
        }
    }

    #[test]
    fn family_sums_are_monotone(p in 1i64..4, q in 2i64..6, l in 1i64..4) {
        prop_assume!(p < q);
        let spec = FamilySpec::spine(
            Schedule::Geometric { ratio: frac(p, q).into() },
            Schedule::Constant { value: int(l).into() },
        );
        let v = family_analyze(&spec, 8, &frac(1, 1000)).unwrap();
        let s = v.partial_sums();
        prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(v.clone(), family_analyze(&spec, 8, &frac(1, 1000)).unwrap());
    }
}

#[test]
fn enumeration_oracle_on_a_known_instance() {
    let s: Vec<Rational> = [7, 9, 18].iter().map(|&x| int(x)).collect();
    let d: Vec<Rational> = [5, 8, 7, 14].iter().map(|&x| int(x)).collect();
    let c: Vec<Vec<Rational>> =
        [[19, 30, 50, 10], [70, 30, 40, 60], [40, 8, 70, 20]].iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect();
    assert_eq!(vertex_enumeration_min(&s, &d, &c), int(743));
}
