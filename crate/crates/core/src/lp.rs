//! Exact transportation-problem kernel over rationals.
//!
//! Rows are sources with `supply`, columns are sinks with `demand`; both must
//! sum to the same total. Everything here is index based and knows nothing
//! about trees, so it serves both the boundary problem and the snapshot
//! problems under squared distance.

use std::collections::{HashMap, VecDeque};

use num_traits::{Signed, Zero};

use crate::error::{domain, Error, Result};
use crate::rational::Rational;

/// Positive entries of a transport plan as `(row, column, mass)`.
pub type Plan = Vec<(usize, usize, Rational)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    /// Positive basic cells, in row-major order. At most `m + n - 1` of them.
    pub plan: Plan,
    pub value: Rational,
}

fn check(supply: &[Rational], demand: &[Rational], cost: &[Vec<Rational>]) -> Result<()> {
    if supply.is_empty() || demand.is_empty() {
        return Err(domain("transport problem needs at least one source and one sink"));
    }
    if cost.len() != supply.len() || cost.iter().any(|r| r.len() != demand.len()) {
        return Err(domain("cost matrix shape does not match the marginals"));
    }
    if supply.iter().chain(demand).any(|x| x.is_negative()) {
        return Err(domain("negative marginal mass"));
    }
    let (a, b): (Rational, Rational) = (supply.iter().sum(), demand.iter().sum());
    if a != b {
        return Err(domain(format!("infeasible marginals: supply {a} but demand {b}")));
    }
    Ok(())
}

/// North-west corner basis for the given row and column orders.
///
/// Returns exactly `m + n - 1` basic cells, degenerate ones with mass zero.
pub fn northwest_corner(supply: &[Rational], demand: &[Rational], rows: &[usize], cols: &[usize]) -> Plan {
    let mut s = supply[rows[0]].clone();
    let mut d = demand[cols[0]].clone();
    let (mut ri, mut ci) = (0, 0);
    let mut basis = Vec::with_capacity(rows.len() + cols.len() - 1);
    loop {
        let x = if s < d { s.clone() } else { d.clone() };
        s -= &x;
        d -= &x;
        basis.push((rows[ri], cols[ci], x));
        if ri + 1 == rows.len() && ci + 1 == cols.len() {
            return basis;
        }
        if s.is_zero() && ri + 1 < rows.len() {
            ri += 1;
            s = supply[rows[ri]].clone();
        } else {
            ci += 1;
            d = demand[cols[ci]].clone();
        }
    }
}

/// Transportation simplex with Bland's rule.
///
/// Starts from the north-west corner in index order; enters the first
/// (row-major) cell with negative reduced cost and, among tied leaving cells,
/// drops the first. The returned plan is a vertex of the transport polytope.
pub fn solve(supply: &[Rational], demand: &[Rational], cost: &[Vec<Rational>]) -> Result<Solution> {
    check(supply, demand, cost)?;
    let (m, n) = (supply.len(), demand.len());
    let rows: Vec<usize> = (0..m).collect();
    let cols: Vec<usize> = (0..n).collect();
    let mut x = vec![vec![Rational::zero(); n]; m];
    let mut basic = vec![vec![false; n]; m];
    for (i, j, v) in northwest_corner(supply, demand, &rows, &cols) {
        x[i][j] = v;
        basic[i][j] = true;
    }

    loop {
        // Basis tree over row nodes 0..m and column nodes m..m+n.
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
        for i in 0..m {
            for j in 0..n {
                if basic[i][j] {
                    adj[i].push(m + j);
                    adj[m + j].push(i);
                }
            }
        }
        let mut pot: Vec<Option<Rational>> = vec![None; m + n];
        pot[0] = Some(Rational::zero());
        let mut queue = VecDeque::from([0]);
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if pot[b].is_none() {
                    let (i, j) = if a < m { (a, b - m) } else { (b, a - m) };
                    let pa = pot[a].as_ref().unwrap();
                    pot[b] = Some(&cost[i][j] - pa);
                    queue.push_back(b);
                }
            }
        }
        let pot: Vec<Rational> = pot.into_iter().map(|p| p.expect("basis spans all rows and columns")).collect();

        let entering = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .find(|&(i, j)| !basic[i][j] && (&cost[i][j] - &pot[i] - &pot[m + j]).is_negative());
        let Some((ei, ej)) = entering else { break };

        // Tree path from column ej back to row ei.
        let mut parent = vec![usize::MAX; m + n];
        parent[ei] = ei;
        let mut queue = VecDeque::from([ei]);
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if parent[b] == usize::MAX {
                    parent[b] = a;
                    queue.push_back(b);
                }
            }
        }
        let mut cycle = vec![(ei, ej)];
        let mut node = m + ej;
        while node != ei {
            let p = parent[node];
            cycle.push(if node < m { (node, p - m) } else { (p, node - m) });
            node = p;
        }
        let (leave_i, leave_j) = cycle
            .iter()
            .skip(1)
            .step_by(2)
            .min_by(|a, b| x[a.0][a.1].cmp(&x[b.0][b.1]).then((a.0 * n + a.1).cmp(&(b.0 * n + b.1))))
            .copied()
            .unwrap();
        let theta = x[leave_i][leave_j].clone();
        for (k, &(i, j)) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                x[i][j] += &theta;
            } else {
                x[i][j] -= &theta;
            }
        }
        basic[leave_i][leave_j] = false;
        basic[ei][ej] = true;
    }

    let mut plan = Vec::new();
    let mut value = Rational::zero();
    for i in 0..m {
        for j in 0..n {
            if x[i][j].is_positive() {
                value += &cost[i][j] * &x[i][j];
                plan.push((i, j, x[i][j].clone()));
            }
        }
    }
    Ok(Solution { plan, value })
}

/// Cost of a plan.
pub fn plan_value(plan: &[(usize, usize, Rational)], cost: &[Vec<Rational>]) -> Rational {
    plan.iter().map(|(i, j, x)| &cost[*i][*j] * x).sum()
}

/// Largest side accepted by [`northwest_min_value`].
pub const ORACLE_MAX_SIDE: usize = 7;

/// Minimum cost over the north-west corner vertices of every row and column
/// ordering.
///
/// Orderings are not listed one by one: a north-west corner run only chooses
/// when a line is exhausted, and the state at that point is fixed by the sets
/// of rows and columns already opened plus the current cell, so the search is
/// memoized on that.
pub fn northwest_min_value(supply: &[Rational], demand: &[Rational], cost: &[Vec<Rational>]) -> Result<Rational> {
    check(supply, demand, cost)?;
    let (m, n) = (supply.len(), demand.len());
    if m > ORACLE_MAX_SIDE || n > ORACLE_MAX_SIDE {
        return Err(Error::Oversize(format!("{m}x{n} exceeds {ORACLE_MAX_SIDE}x{ORACLE_MAX_SIDE}")));
    }
    let subset_sum = |w: &[Rational], mask: u32| -> Rational {
        (0..w.len()).filter(|k| mask >> k & 1 == 1).map(|k| &w[k]).sum()
    };
    let row_sums: Vec<Rational> = (0..1u32 << m).map(|s| subset_sum(supply, s)).collect();
    let col_sums: Vec<Rational> = (0..1u32 << n).map(|s| subset_sum(demand, s)).collect();

    struct Search<'a> {
        supply: &'a [Rational],
        demand: &'a [Rational],
        cost: &'a [Vec<Rational>],
        row_sums: Vec<Rational>,
        col_sums: Vec<Rational>,
        full_rows: u32,
        full_cols: u32,
        memo: HashMap<(u32, u32, usize, usize), Rational>,
    }

    impl Search<'_> {
        fn go(&mut self, rows: u32, cols: u32, i: usize, j: usize) -> Rational {
            if let Some(v) = self.memo.get(&(rows, cols, i, j)) {
                return v.clone();
            }
            let before_rows = &self.row_sums[(rows & !(1 << i)) as usize];
            let before_cols = &self.col_sums[(cols & !(1 << j)) as usize];
            let shipped = if before_rows > before_cols { before_rows.clone() } else { before_cols.clone() };
            let s = &self.row_sums[rows as usize] - &shipped;
            let d = &self.col_sums[cols as usize] - &shipped;
            let x = if s < d { s.clone() } else { d.clone() };
            let here = &self.cost[i][j] * &x;
            let (s, d) = (s - &x, d - &x);
            let rest = if s.is_zero() && rows != self.full_rows {
                (0..self.supply.len())
                    .filter(|k| rows >> k & 1 == 0)
                    .map(|k| self.go(rows | 1 << k, cols, k, j))
                    .min()
            } else if d.is_zero() && cols != self.full_cols {
                (0..self.demand.len())
                    .filter(|k| cols >> k & 1 == 0)
                    .map(|k| self.go(rows, cols | 1 << k, i, k))
                    .min()
            } else {
                None
            };
            let v = match rest {
                Some(r) => here + r,
                None => here,
            };
            self.memo.insert((rows, cols, i, j), v.clone());
            v
        }
    }

    let mut search = Search {
        supply,
        demand,
        cost,
        row_sums,
        col_sums,
        full_rows: (1 << m) - 1,
        full_cols: (1 << n) - 1,
        memo: HashMap::new(),
    };
    let mut best: Option<Rational> = None;
    for i in 0..m {
        for j in 0..n {
            let v = search.go(1 << i, 1 << j, i, j);
            if best.as_ref().map_or(true, |b| v < *b) {
                best = Some(v);
            }
        }
    }
    Ok(best.unwrap())
}

/// Searches for a cyclic reassignment that strictly lowers the cost of a plan.
///
/// `cells` are the support cells `(row, column)`. A cycle `[k₁, …, k_r]`
/// means row of `k₁` moves to column of `k₂`, …, row of `k_r` to column of
/// `k₁`. Returns a simple cycle of negative total change, or `None` if the
/// support is cyclically monotone. This is Bellman–Ford on the exchange
/// graph, so every cycle length is covered.
pub fn negative_cycle(cells: &[(usize, usize)], cost: &[Vec<Rational>]) -> Option<Vec<usize>> {
    let k = cells.len();
    if k < 2 {
        return None;
    }
    let w = |a: usize, b: usize| &cost[cells[a].0][cells[b].1] - &cost[cells[a].0][cells[a].1];
    let weights: Vec<Vec<Rational>> = (0..k).map(|a| (0..k).map(|b| w(a, b)).collect()).collect();
    let mut dist = vec![Rational::zero(); k];
    let mut pred = vec![usize::MAX; k];
    let mut last = None;
    for _ in 0..k {
        last = None;
        for a in 0..k {
            for b in 0..k {
                if a == b {
                    continue;
                }
                let cand = &dist[a] + &weights[a][b];
                if cand < dist[b] {
                    dist[b] = cand;
                    pred[b] = a;
                    last = Some(b);
                }
            }
        }
        last?;
    }
    let mut y = last?;
    for _ in 0..k {
        y = pred[y];
    }
    let mut cycle = vec![y];
    let mut cur = pred[y];
    while cur != y {
        cycle.push(cur);
        cur = pred[cur];
    }
    cycle.reverse();
    let total: Rational = (0..cycle.len()).map(|t| &weights[cycle[t]][cycle[(t + 1) % cycle.len()]]).sum();
    debug_assert!(total.is_negative());
    total.is_negative().then_some(cycle)
}
