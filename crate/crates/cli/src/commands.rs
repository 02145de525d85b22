//! Command dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use nijenhuis::exactpoly::{phase_names, u_names};
use nijenhuis::flows::{AxisSpec, SolutionGrid};
use nijenhuis::pde::{direct_solve, grid_residual, ConvergenceTable, Order};
use nijenhuis::problem::CompanionSystem;

use crate::config::{Initial, Problem, ProblemConfig};
use crate::gridcsv::{grid_csv_string, read_grid_csv};
use crate::plot::render_svg;
use crate::verify::{poly_rows, verify};
use crate::{CliError, EXIT_FAILED, EXIT_INPUT, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Verify,
    BuildMetric,
    Hierarchy,
    Evolve,
    SolveDirect,
    Residual,
    Compare,
    Plot,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Flags {
    /// Destination of the artifact; standard output when absent.
    pub out: Option<PathBuf>,
    /// Grid CSV to plot instead of evolving the configuration.
    pub input: Option<PathBuf>,
    /// t-slice indices for `plot`; `None` selects slice 0.
    pub slices: Option<Vec<usize>>,
    /// Resolution ladder for `residual` and `compare`.
    pub ladder: Option<Vec<f64>>,
}

/// Bytes produced by a command, and whether a verification failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub body: String,
    pub failed: bool,
}

impl Artifact {
    fn ok(body: String) -> Self {
        Artifact {
            body,
            failed: false,
        }
    }
}

fn compute(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn float(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn order(o: Order) -> Value {
    match o {
        Order::Exact => Value::from("exact"),
        Order::Observed(v) => float(v),
        Order::None => Value::Null,
    }
}

/// Rows `{delta, <key>, order}` plus the worst order and ratio.
fn table_json(table: &ConvergenceTable, key: &str) -> Value {
    json!({
        "rows": table.rows.iter().map(|r| {
            let mut row = serde_json::Map::new();
            row.insert("delta".into(), float(r.delta));
            row.insert(key.into(), float(r.residual));
            row.insert("order".into(), order(r.order));
            Value::Object(row)
        }).collect::<Vec<_>>(),
        "worst_order": order(table.worst_order()),
        "worst_ratio": table.worst_ratio().map_or(Value::Null, float),
    })
}

pub fn evolve(problem: &Problem) -> Result<SolutionGrid, CliError> {
    let z0 = problem.point()?;
    problem
        .system
        .orbit_grid(z0, problem.axes()?, &problem.settings)
        .map_err(compute)
}

/// Initial line of the direct solve: the curve sampled on the x-axis, or the
/// `t = 0` line of the orbit grid through the initial point.
fn initial_line(problem: &Problem, x_axis: &AxisSpec) -> Result<Vec<Vec<f64>>, CliError> {
    match &problem.initial {
        Some(Initial::Curve(curve)) => x_axis
            .values()
            .iter()
            .map(|&x| {
                curve
                    .iter()
                    .map(|c| c.evaluate(&[x]).map_err(compute))
                    .collect()
            })
            .collect(),
        _ => {
            let z0 = problem.point()?;
            let mut axes = vec![*x_axis];
            axes.extend((1..problem.n()).map(|_| AxisSpec::point(0.0)));
            let line = problem
                .system
                .orbit_grid(z0, &axes, &problem.settings)
                .map_err(compute)?;
            Ok(line.u)
        }
    }
}

pub fn solve_direct(problem: &Problem) -> Result<SolutionGrid, CliError> {
    if problem.n() < 2 {
        return Err(CliError::Input("solve-direct needs n ≥ 2".into()));
    }
    let x_axis = problem.axes()?[0];
    let initial = initial_line(problem, &x_axis)?;
    let mut grid = direct_solve(
        &problem.system.killing[1],
        &initial,
        &x_axis,
        problem.t_end()?,
        &problem.direct_settings(),
    )
    .map_err(compute)?;
    grid.meta.fixture = problem.system.label.clone();
    Ok(grid)
}

fn axis_names(problem: &Problem) -> Vec<String> {
    nijenhuis::flows::axis_names(problem.n())
}

type Range = (f64, f64);

/// Extent of the x-axis and of each t-axis.
fn ranges(problem: &Problem) -> Result<(Range, Vec<Range>), CliError> {
    let axes = problem.axes()?;
    Ok((
        (axes[0].min, axes[0].max),
        axes[1..].iter().map(|a| (a.min, a.max)).collect(),
    ))
}

fn residual(problem: &Problem, ladder: Option<&[f64]>) -> Result<Value, CliError> {
    let z0 = problem.point()?;
    let sys = &problem.system;
    let names = axis_names(problem);
    match ladder {
        None => {
            let grid = evolve(problem)?;
            let r = grid_residual(&grid, &sys.killing).map_err(compute)?;
            Ok(json!({
                "label": sys.label,
                "shape": grid.shape(),
                "residuals": names[1..].iter().zip(&r).map(|(a, v)| json!({"axis": a, "residual": float(*v)})).collect::<Vec<_>>(),
            }))
        }
        Some(ladder) => {
            let (x, t) = ranges(problem)?;
            let table = nijenhuis::pde::convergence_study(ladder, |d| {
                sys.orbit_residual(z0, x, &t, d, &problem.settings)
                    .map(|r| r.into_iter().fold(0.0, f64::max))
            })
            .map_err(compute)?;
            Ok(json!({ "label": sys.label, "convergence": table_json(&table, "residual") }))
        }
    }
}

fn compare(problem: &Problem, ladder: Option<&[f64]>) -> Result<Value, CliError> {
    let z0 = problem.point()?;
    let sys = &problem.system;
    let (x, _) = ranges(problem)?;
    let dx0 = problem.axes()?[0].step();
    let ladder = match ladder {
        Some(l) => l.to_vec(),
        None if dx0 > 0.0 => vec![dx0, dx0 / 2.0, dx0 / 4.0],
        None => {
            return Err(CliError::Input(
                "compare needs an x-axis with at least two nodes".into(),
            ))
        }
    };
    let t_end = problem.t_end()?;
    let direct = problem.direct_settings();
    let table = nijenhuis::pde::convergence_study(&ladder, |dx| {
        sys.direct_vs_orbit(z0, x, t_end, dx, &problem.settings, &direct)
    })
    .map_err(compute)?;
    Ok(
        json!({ "label": sys.label, "t_end": float(t_end), "deviation": table_json(&table, "deviation") }),
    )
}

fn build_metric(sys: &CompanionSystem) -> Value {
    let un = u_names(sys.n());
    let pn = phase_names(sys.n());
    json!({
        "label": sys.label,
        "h": sys.h.iter().map(|h| h.poly().format_with(&pn)).collect::<Vec<_>>(),
        "gram": poly_rows(sys.gram.as_field(), &un),
        "determinant": sys.gram.determinant().format_with(&un),
    })
}

fn hierarchy(sys: &CompanionSystem) -> Value {
    let un = u_names(sys.n());
    let pn = phase_names(sys.n());
    json!({
        "label": sys.label,
        "killing": sys.killing.iter().map(|a| poly_rows(a, &un)).collect::<Vec<_>>(),
        "integrals": sys.integrals.iter().map(|f| f.poly().format_with(&pn)).collect::<Vec<_>>(),
    })
}

/// Runs `command` on a validated problem and returns its artifact.
pub fn execute(command: Command, problem: &Problem, flags: &Flags) -> Result<Artifact, CliError> {
    let sys = &problem.system;
    let ladder = flags.ladder.as_deref();
    Ok(match command {
        Command::Verify => {
            let report = verify(problem)?;
            Artifact {
                body: report.to_json(),
                failed: !report.passed(),
            }
        }
        Command::BuildMetric => Artifact::ok(pretty(&build_metric(sys))),
        Command::Hierarchy => Artifact::ok(pretty(&hierarchy(sys))),
        Command::Evolve => Artifact::ok(grid_csv_string(&evolve(problem)?)?),
        Command::SolveDirect => Artifact::ok(grid_csv_string(&solve_direct(problem)?)?),
        Command::Residual => Artifact::ok(pretty(&residual(problem, ladder)?)),
        Command::Compare => Artifact::ok(pretty(&compare(problem, ladder)?)),
        Command::Plot => {
            let grid = match &flags.input {
                Some(path) => read_grid_csv(std::fs::File::open(path)?)?,
                None => evolve(problem)?,
            };
            let slices = flags.slices.clone().unwrap_or_else(|| vec![0]);
            Artifact::ok(render_svg(&grid, &slices)?)
        }
    })
}

/// Loads the configuration, runs the command, writes the artifact to
/// `flags.out` (or standard output) and returns the process exit code.
/// Diagnostics go to standard error.
pub fn run_command(command: Command, config_path: &Path, flags: &Flags) -> i32 {
    let result = ProblemConfig::load(config_path)
        .and_then(|c| c.validate())
        .and_then(|p| execute(command, &p, flags))
        .and_then(|a| {
            match &flags.out {
                Some(path) => std::fs::write(path, a.body.as_bytes())?,
                None => std::io::stdout().write_all(a.body.as_bytes())?,
            }
            Ok(a)
        });
    match result {
        Ok(a) if a.failed => {
            eprintln!("verification failed");
            EXIT_FAILED
        }
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
