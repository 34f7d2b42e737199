//! Deciding whether two boundary measures bound a complete W₂ geodesic, and
//! building that geodesic; plus a truncation analyzer for infinite spine families.

use num_traits::{pow, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    default_sample_times, lift, second_moment, snapshot, verify_geodesic, DynamicalPlan, GeodesicReport, Snapshot,
};
use crate::error::{domain, Error, Result};
use crate::flows::{check_antipodal, compute_flow_field, condition3_sum, BoundaryMeasure};
use crate::rational::{Frac, Rational};
use crate::transport::{cost_matrix, solve_optimal_coupling, Coupling};
use crate::tree::{MetricTree, TreeDescription};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Realizable,
    NotAntipodal,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Realizable => "realizable",
            Verdict::NotAntipodal => "not-antipodal",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealizabilityReport {
    pub antipodal: bool,
    /// min ∫ −D₀² dΠ; absent when the measures share an end.
    pub lp_value: Option<Rational>,
    pub condition3: Option<Rational>,
    /// ∫ d(x, x₀)² dμ₀ of the realized plan.
    pub second_moment: Option<Rational>,
    pub realized: Option<(Coupling, DynamicalPlan)>,
    pub geodesic: Option<GeodesicReport>,
    pub verdict: Verdict,
}

pub fn decide(tree: &MetricTree, minus: &BoundaryMeasure, plus: &BoundaryMeasure) -> Result<RealizabilityReport> {
    if !check_antipodal(minus, plus) {
        return Ok(RealizabilityReport {
            antipodal: false,
            lp_value: None,
            condition3: None,
            second_moment: None,
            realized: None,
            geodesic: None,
            verdict: Verdict::NotAntipodal,
        });
    }
    let ff = compute_flow_field(tree, minus, plus)?;
    let cm = cost_matrix(tree, minus, plus)?;
    let (pi, value) = solve_optimal_coupling(&cm, minus, plus)?;
    let mu = lift(&pi, tree)?;
    let report = verify_geodesic(&mu, tree, &default_sample_times(tree))?;
    if !report.passed() {
        return Err(domain("the lifted optimal coupling failed geodesic verification"));
    }
    Ok(RealizabilityReport {
        antipodal: true,
        lp_value: Some(value),
        condition3: Some(condition3_sum(tree, &ff)),
        second_moment: Some(second_moment(&snapshot(&mu, &Rational::zero(), tree), tree)),
        realized: Some((pi, mu)),
        geodesic: Some(report),
        verdict: Verdict::Realizable,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Realization {
    pub coupling: Coupling,
    pub value: Rational,
    pub plan: DynamicalPlan,
    pub snapshots: Vec<Snapshot>,
}

/// The optimal coupling, its canonical lift and the snapshots at `times`.
pub fn realize(tree: &MetricTree, minus: &BoundaryMeasure, plus: &BoundaryMeasure, times: &[Rational]) -> Result<Realization> {
    if !check_antipodal(minus, plus) {
        return Err(domain("measures are not antipodal, so no geodesic joins them"));
    }
    let cm = cost_matrix(tree, minus, plus)?;
    let (coupling, value) = solve_optimal_coupling(&cm, minus, plus)?;
    let plan = lift(&coupling, tree)?;
    let snapshots = times.iter().map(|t| snapshot(&plan, t, tree)).collect();
    Ok(Realization { coupling, value, plan, snapshots })
}

/// Per-level sequence of rationals, indexed from level 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schedule {
    /// `ratio^k` at level k.
    Geometric { ratio: Frac },
    Constant { value: Frac },
    /// Explicit values; levels past the end have no value.
    Custom { values: Vec<Frac> },
}

impl Schedule {
    pub fn at(&self, k: usize) -> Option<Rational> {
        match self {
            Schedule::Geometric { ratio } => Some(pow(ratio.0.clone(), k)),
            Schedule::Constant { value } => Some(value.0.clone()),
            Schedule::Custom { values } => values.get(k - 1).map(|f| f.0.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Spine,
}

/// Spine family: vertices u₀ = x₀, u₁, …; edge u_{k−1}u_k of length L_k; end
/// S_k at u_{k−1} with ν₋-mass p_k and end T_k at u_k with ν₊-mass p_k.
/// Custom mass schedules are zero past their last entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub masses: Schedule,
    pub lengths: Schedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_level: Option<usize>,
}

impl FamilySpec {
    pub fn spine(masses: Schedule, lengths: Schedule) -> Self {
        FamilySpec { kind: FamilyKind::Spine, masses, lengths, max_level: None }
    }
}

#[derive(Clone, Debug)]
pub struct Truncation {
    pub description: TreeDescription,
    pub tree: MetricTree,
    pub minus: BoundaryMeasure,
    pub plus: BoundaryMeasure,
}

/// Levels 1..=K of the family, masses renormalized by Σ_{k≤K} p_k.
pub fn truncate(spec: &FamilySpec, level: usize) -> Result<Truncation> {
    let bad = |msg: String| Error::Structural(format!("level {level}: {msg}"));
    if level == 0 {
        return Err(bad("truncation needs at least one level".into()));
    }
    let mut masses = Vec::with_capacity(level);
    let mut desc = TreeDescription::new("u0");
    for k in 1..=level {
        let p = spec.masses.at(k).unwrap_or_else(Rational::zero);
        if p.is_negative() {
            return Err(bad(format!("negative mass at level {k}")));
        }
        let len = spec.lengths.at(k).ok_or_else(|| bad(format!("no length given for level {k}")))?;
        if !len.is_positive() {
            return Err(bad(format!("non-positive length at level {k}")));
        }
        let (prev, here) = (format!("u{}", k - 1), format!("u{k}"));
        desc = desc.vertex(&here).edge(&prev, &here, len).end(&format!("S{k:02}"), &prev).end(&format!("T{k:02}"), &here);
        masses.push(p);
    }
    let total: Rational = masses.iter().sum();
    if total.is_zero() {
        return Err(bad("no mass up to this level".into()));
    }
    let tree = MetricTree::from_description(&desc).map_err(|e| bad(e.to_string()))?;
    let side = |prefix: char| {
        let atoms: Vec<(String, Rational)> =
            masses.iter().enumerate().map(|(i, p)| (format!("{prefix}{:02}", i + 1), p / &total)).collect();
        BoundaryMeasure::new(&tree, atoms.iter().map(|(n, m)| (n.as_str(), m.clone())))
    };
    let (minus, plus) = (side('S')?, side('T')?);
    Ok(Truncation { description: desc, tree, minus, plus })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    ConvergedWithinTolerance,
    DivergingTrend,
    Inconclusive,
}

impl Trend {
    pub fn as_str(self) -> &'static str {
        match self {
            Trend::ConvergedWithinTolerance => "converged-within-tolerance",
            Trend::DivergingTrend => "diverging-trend",
            Trend::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelReport {
    pub level: usize,
    pub condition3: Rational,
    pub lp_value: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyVerdict {
    pub levels: Vec<LevelReport>,
    pub trend: Trend,
    pub tolerance: Rational,
    pub max_level: usize,
    /// First level at which the convergence test already passes.
    pub converged_level: Option<usize>,
}

impl FamilyVerdict {
    pub fn partial_sums(&self) -> Vec<Rational> {
        self.levels.iter().map(|l| l.condition3.clone()).collect()
    }

    /// `S(K) − S(K−1)` for K = 1..=max_level, with S(0) = 0.
    pub fn increments(&self) -> Vec<Rational> {
        increments(&self.partial_sums())
    }
}

fn increments(sums: &[Rational]) -> Vec<Rational> {
    let mut prev = Rational::zero();
    sums.iter()
        .map(|s| {
            let d = s - &prev;
            prev = s.clone();
            d
        })
        .collect()
}

fn settles(inc: &[Rational], tol: &Rational) -> bool {
    match inc {
        [.., a, b] => a < tol && b < tol && b <= a,
        _ => false,
    }
}

/// Condition-3 partial sums and LP values of truncations 1..=max_level.
///
/// Converged when the last two increments are below `tolerance` and not
/// increasing; diverging when every increment is at least the previous one
/// and the final sum exceeds ten times the level-3 sum.
pub fn family_analyze(spec: &FamilySpec, max_level: usize, tolerance: &Rational) -> Result<FamilyVerdict> {
    if max_level < 3 {
        return Err(domain("family analysis needs max_level ≥ 3"));
    }
    if !tolerance.is_positive() {
        return Err(domain("tolerance must be positive"));
    }
    let levels = (1..=max_level)
        .into_par_iter()
        .map(|level| {
            let t = truncate(spec, level)?;
            let ff = compute_flow_field(&t.tree, &t.minus, &t.plus)?;
            let cm = cost_matrix(&t.tree, &t.minus, &t.plus)?;
            let (_, lp_value) = solve_optimal_coupling(&cm, &t.minus, &t.plus)?;
            Ok(LevelReport { level, condition3: condition3_sum(&t.tree, &ff), lp_value })
        })
        .collect::<Result<Vec<_>>>()?;
    let sums: Vec<Rational> = levels.iter().map(|l| l.condition3.clone()).collect();
    let inc = increments(&sums);
    let converged_level = (2..=max_level).find(|&k| settles(&inc[..k], tolerance));
    let ten = Rational::from_integer(10.into());
    let trend = if settles(&inc, tolerance) {
        Trend::ConvergedWithinTolerance
    } else if inc.windows(2).all(|w| w[0] <= w[1]) && sums[max_level - 1] > &ten * &sums[2] {
        Trend::DivergingTrend
    } else {
        Trend::Inconclusive
    };
    Ok(FamilyVerdict { levels, trend, tolerance: tolerance.clone(), max_level, converged_level })
}
