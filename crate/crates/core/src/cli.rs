//! The `wtree` command line: argument types and command execution.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::dot::to_dot;
use crate::dynamics::{antagonist_pairs, lift};
use crate::error::{domain, Error, Result};
use crate::flows::{check_antipodal, compute_flow_field, BoundaryMeasure};
use crate::io;
use crate::rational::{frac, parse, Rational};
use crate::realizability::{decide, family_analyze, realize, Verdict};
use crate::transport::{cost_matrix, is_cyclically_monotone, solve_optimal_coupling};
use crate::tree::{validate_tree, MetricTree, Violation};

#[derive(Debug, Parser)]
#[command(name = "wtree", version, about = "Wasserstein geodesics between boundary measures on metric trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Instance file (tree, optionally with "minus"/"plus" measures).
    #[arg(long)]
    pub input: PathBuf,
    /// Where to write the JSON report; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also render exact quantities as decimals with this many digits.
    #[arg(long)]
    pub decimal: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WithMeasures {
    #[command(flatten)]
    pub common: Common,
    /// Measures file `{"minus":{…},"plus":{…}}`, overriding the instance's own.
    #[arg(long)]
    pub measures: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the tree invariants and the measures.
    Validate(WithMeasures),
    /// Flow through every edge and vertex.
    Flows(WithMeasures),
    /// Gromov products of all pairs of ends.
    D0(Common),
    /// Optimal coupling for the cost −D₀².
    Solve(WithMeasures),
    /// Cyclical monotonicity of a given coupling.
    CheckMonotone {
        #[command(flatten)]
        args: WithMeasures,
        #[arg(long)]
        coupling: PathBuf,
    },
    /// Build and verify the geodesic joining the two measures.
    Realize {
        #[command(flatten)]
        args: WithMeasures,
        /// Comma-separated snapshot times, e.g. `-1,0,1/2`.
        #[arg(long, allow_hyphen_values = true)]
        times: Option<String>,
        /// Write a Graphviz diagram of flows and geodesics here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Truncation analysis of an infinite family (`--input` is a family spec).
    Family {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_level: Option<usize>,
        #[arg(long)]
        tolerance: Option<String>,
    },
}

/// A finished command: its report and process exit code.
#[derive(Debug)]
pub struct Outcome {
    pub document: Value,
    pub code: i32,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Structural(_) => 2,
        Error::Parse(_) => 3,
        Error::Domain(_) | Error::Oversize(_) => 4,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

struct Loaded {
    tree: MetricTree,
    minus: BoundaryMeasure,
    plus: BoundaryMeasure,
}

fn load_tree(path: &Path) -> Result<(MetricTree, io::InstanceFile)> {
    let inst = io::parse_instance(&read(path)?)?;
    let report = validate_tree(&inst.tree);
    let fatal: Vec<String> = report
        .violations
        .iter()
        .filter(|v| !matches!(v, Violation::NonCanonicalVertex { .. }))
        .map(ToString::to_string)
        .collect();
    if !fatal.is_empty() {
        return Err(Error::Structural(fatal.join("; ")));
    }
    Ok((MetricTree::from_description(&inst.tree)?, inst))
}

fn load(args: &WithMeasures) -> Result<Loaded> {
    let (tree, inst) = load_tree(&args.common.input)?;
    let (minus, plus) = match &args.measures {
        Some(p) => {
            let m = io::parse_measures(&read(p)?)?;
            (m.minus, m.plus)
        }
        None => match (inst.minus, inst.plus) {
            (Some(m), Some(p)) => (m, p),
            _ => return Err(domain("no measures: give --measures or \"minus\"/\"plus\" in the instance")),
        },
    };
    Ok(Loaded { minus: io::measure_from_map(&tree, &minus)?, plus: io::measure_from_map(&tree, &plus)?, tree })
}

fn parse_times(s: &str) -> Result<Vec<Rational>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| parse(t.trim())).collect()
}

fn validate(args: &WithMeasures) -> Result<Outcome> {
    let inst = io::parse_instance(&read(&args.common.input)?)?;
    let report = validate_tree(&inst.tree);
    let mut errors = Vec::new();
    let mut antipodal = Value::Null;
    let external = match &args.measures {
        Some(p) => Some(io::parse_measures(&read(p)?)?),
        None => None,
    };
    let maps = match external {
        Some(m) => Some((m.minus, m.plus)),
        None => inst.minus.clone().zip(inst.plus.clone()),
    };
    if let (true, Some((m, p))) = (report.is_valid(), &maps) {
        let tree = MetricTree::new(&inst.tree)?;
        match (io::measure_from_map(&tree, m), io::measure_from_map(&tree, p)) {
            (Ok(m), Ok(p)) => antipodal = Value::Bool(check_antipodal(&m, &p)),
            (a, b) => errors.extend([a.err(), b.err()].into_iter().flatten().map(|e| e.to_string())),
        }
    }
    let valid = report.is_valid() && errors.is_empty();
    let document = json!({
        "valid": valid,
        "violations": report.violations.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "base_degree_two": report.base_degree_two,
        "measure_errors": errors,
        "antipodal": antipodal,
    });
    Ok(Outcome { document, code: if valid { 0 } else { 2 } })
}

fn run(command: &Command) -> Result<Outcome> {
    let ok = |document| Ok(Outcome { document, code: 0 });
    match command {
        Command::Validate(args) => validate(args),
        Command::Flows(args) => {
            let l = load(args)?;
            ok(io::flows_to_json(&l.tree, &compute_flow_field(&l.tree, &l.minus, &l.plus)?))
        }
        Command::D0(common) => ok(io::d0_to_json(&load_tree(&common.input)?.0)),
        Command::Solve(args) => {
            let l = load(args)?;
            let cm = cost_matrix(&l.tree, &l.minus, &l.plus)?;
            let (pi, value) = solve_optimal_coupling(&cm, &l.minus, &l.plus)?;
            ok(io::solve_to_json(&l.tree, &pi, &value))
        }
        Command::CheckMonotone { args, coupling } => {
            let l = load(args)?;
            let pi = io::coupling_from_json(&l.tree, &io::parse_value(&read(coupling)?)?)?;
            if !pi.has_marginals(&l.minus, &l.plus) {
                return Err(domain("coupling marginals differ from the measures"));
            }
            let cm = cost_matrix(&l.tree, &l.minus, &l.plus)?;
            let report = is_cyclically_monotone(&pi, &cm)?;
            let crossings = antagonist_pairs(&lift(&pi, &l.tree)?).len();
            ok(io::monotonicity_to_json(&l.tree, &report, &pi.cost(&cm), crossings))
        }
        Command::Realize { args, times, dot } => {
            let l = load(args)?;
            let report = decide(&l.tree, &l.minus, &l.plus)?;
            if report.verdict == Verdict::NotAntipodal {
                return Err(domain("measures are not antipodal, so no geodesic joins them"));
            }
            let times = times.as_deref().map(parse_times).transpose()?.unwrap_or_default();
            let r = realize(&l.tree, &l.minus, &l.plus, &times)?;
            if let Some(path) = dot {
                let ff = compute_flow_field(&l.tree, &l.minus, &l.plus)?;
                fs::write(path, to_dot(&l.tree, &ff, Some(&r.plan)))
                    .map_err(|e| domain(format!("cannot write {}: {e}", path.display())))?;
            }
            ok(io::realize_to_json(&l.tree, &report, Some(&r)))
        }
        Command::Family { common, max_level, tolerance } => {
            let spec = io::parse_family(&read(&common.input)?)?;
            let k = max_level.or(spec.max_level).ok_or_else(|| domain("no max level: give --max-level"))?;
            let tol = match tolerance {
                Some(t) => parse(t)?,
                None => frac(1, 1000),
            };
            ok(io::family_to_json(&family_analyze(&spec, k, &tol)?))
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Validate(a) | Command::Flows(a) | Command::Solve(a) => &a.common,
        Command::CheckMonotone { args, .. } | Command::Realize { args, .. } => &args.common,
        Command::D0(c) | Command::Family { common: c, .. } => c,
    }
}

/// Runs the command and writes its report. Returns the exit code.
pub fn execute(cli: &Cli) -> i32 {
    let c = common(&cli.command);
    let outcome = run(&cli.command).and_then(|mut o| {
        if let Some(d) = c.decimal {
            o.document = io::with_decimals(&o.document, d);
        }
        let text = io::render_json(&o.document);
        match &c.output {
            Some(p) => fs::write(p, text).map_err(|e| domain(format!("cannot write {}: {e}", p.display())))?,
            None => print!("{text}"),
        }
        Ok(o)
    });
    match outcome {
        Ok(o) => o.code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_list() {
        assert_eq!(parse_times("-1, 0,1/2").unwrap(), vec![frac(-1, 1), frac(0, 1), frac(1, 2)]);
        assert!(parse_times("").unwrap().is_empty());
        assert!(parse_times("0.5").is_err());
    }

    #[test]
    fn argument_shapes() {
        let cli = Cli::try_parse_from(["wtree", "realize", "--input", "a.json", "--times", "-1,1", "--decimal", "4"]).unwrap();
        assert!(matches!(cli.command, Command::Realize { .. }));
        assert_eq!(common(&cli.command).decimal, Some(4));
        assert!(Cli::try_parse_from(["wtree", "family", "--input", "f.json", "--max-level", "20", "--tolerance", "1/1000"]).is_ok());
        assert!(Cli::try_parse_from(["wtree", "solve"]).is_err());
    }
}
