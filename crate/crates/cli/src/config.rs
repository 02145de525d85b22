//! Problem configuration: the JSON document every command reads, and its
//! validated form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use nijenhuis::exactpoly::{parse_expression, Polynomial};
use nijenhuis::flows::{AxisSpec, CotangentPoint, IntegratorSettings};
use nijenhuis::pde::DirectSettings;
use nijenhuis::problem::CompanionSystem;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub n: usize,
    pub sigma: Vec<String>,
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub direct: DirectConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Point { u: Vec<f64>, p: Vec<f64> },
    Curve { curve: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x: AxisConfig,
    #[serde(default)]
    pub t: Vec<AxisConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Largest admissible flow time; defaults to the largest grid extent.
    #[serde(default)]
    pub horizon: Option<f64>,
}

fn default_step() -> f64 {
    nijenhuis::flows::DEFAULT_RK4_STEP
}
fn default_abs_tol() -> f64 {
    nijenhuis::flows::DEFAULT_ABS_TOL
}
fn default_rel_tol() -> f64 {
    nijenhuis::flows::DEFAULT_REL_TOL
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            step: default_step(),
            abs_tol: default_abs_tol(),
            rel_tol: default_rel_tol(),
            horizon: None,
        }
    }
}

/// Sample sweep of the pointwise compatibility check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_points() -> usize {
    50
}
fn default_radius() -> f64 {
    2.0
}
fn default_tolerance() -> f64 {
    1e-8
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            points: default_points(),
            radius: default_radius(),
            tolerance: default_tolerance(),
        }
    }
}

/// Direct solver settings; `t_end` defaults to the end of the `t1` axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectConfig {
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_cfl() -> f64 {
    DirectSettings::default().cfl
}

impl Default for DirectConfig {
    fn default() -> Self {
        DirectConfig {
            t_end: None,
            cfl: default_cfl(),
        }
    }
}

/// Initial data after parsing.
#[derive(Debug, Clone)]
pub enum Initial {
    Point(CotangentPoint),
    /// `u^i(x)` as polynomials in the single variable `x`.
    Curve(Vec<Polynomial>),
}

/// A configuration whose expressions parsed and whose shapes agree with `n`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub system: CompanionSystem,
    pub initial: Option<Initial>,
    pub axes: Option<Vec<AxisSpec>>,
    pub settings: IntegratorSettings,
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(input(format!("{name} must be positive, got {v}")))
    }
}

fn axis(name: &str, a: &AxisConfig) -> Result<AxisSpec, CliError> {
    AxisSpec::new(a.min, a.max, a.count).map_err(|e| input(format!("grid.{name}: {e}")))
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<Problem, CliError> {
        let n = self.n;
        if n == 0 {
            return Err(input("n must be at least 1"));
        }
        if self.sigma.len() != n {
            return Err(input(format!(
                "sigma has {} entries, expected {n}",
                self.sigma.len()
            )));
        }
        let label = self.label.clone().unwrap_or_else(|| "config".into());
        let system =
            CompanionSystem::parse(label, &self.sigma).map_err(|e| input(e.to_string()))?;

        let initial = match &self.initial {
            None => None,
            Some(InitialConfig::Point { u, p }) => {
                if u.len() != n || p.len() != n {
                    return Err(input(format!("initial.u and initial.p need {n} entries")));
                }
                let z = CotangentPoint::new(u.clone(), p.clone())
                    .map_err(|e| input(format!("initial: {e}")))?;
                Some(Initial::Point(z))
            }
            Some(InitialConfig::Curve { curve }) => {
                if curve.len() != n {
                    return Err(input(format!("initial.curve needs {n} entries")));
                }
                let curve = curve
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        parse_expression(c, &["x"])
                            .map_err(|e| input(format!("initial.curve[{i}]: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Some(Initial::Curve(curve))
            }
        };

        let axes = match &self.grid {
            None => None,
            Some(g) => {
                if g.t.len() + 1 != n {
                    return Err(input(format!(
                        "grid.t has {} axes, expected {}",
                        g.t.len(),
                        n - 1
                    )));
                }
                let mut axes = vec![axis("x", &g.x)?];
                for (k, t) in g.t.iter().enumerate() {
                    axes.push(axis(&format!("t[{k}]"), t)?);
                }
                Some(axes)
            }
        };

        let ic = &self.integrator;
        let extent = axes
            .iter()
            .flatten()
            .flat_map(|a| [a.min.abs(), a.max.abs()])
            .chain(self.direct.t_end.map(f64::abs))
            .fold(nijenhuis::flows::DEFAULT_HORIZON, f64::max);
        let horizon = ic.horizon.unwrap_or(extent);
        positive("integrator.horizon", horizon)?;
        let settings = match ic.method {
            Method::Rk4 => {
                positive("integrator.step", ic.step)?;
                IntegratorSettings::rk4(ic.step)
            }
            Method::Adaptive => {
                positive("integrator.abs_tol", ic.abs_tol)?;
                positive("integrator.rel_tol", ic.rel_tol)?;
                IntegratorSettings::adaptive(ic.abs_tol, ic.rel_tol)
            }
        }
        .with_horizon(horizon);

        if self.sweep.points == 0 {
            return Err(input("sweep.points must be positive"));
        }
        positive("sweep.radius", self.sweep.radius)?;
        positive("sweep.tolerance", self.sweep.tolerance)?;
        positive("direct.cfl", self.direct.cfl)?;
        if let Some(t) = self.direct.t_end {
            positive("direct.t_end", t)?;
        }

        Ok(Problem {
            config: self.clone(),
            system,
            initial,
            axes,
            settings,
        })
    }
}

impl Problem {
    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn axes(&self) -> Result<&[AxisSpec], CliError> {
        self.axes
            .as_deref()
            .ok_or_else(|| input("this command needs a grid"))
    }

    pub fn point(&self) -> Result<&CotangentPoint, CliError> {
        match &self.initial {
            Some(Initial::Point(z)) => Ok(z),
            Some(Initial::Curve(_)) => {
                Err(input("this command needs initial data {u, p}, not a curve"))
            }
            None => Err(input("this command needs initial data")),
        }
    }

    pub fn direct_settings(&self) -> DirectSettings {
        DirectSettings {
            cfl: self.config.direct.cfl,
        }
    }

    /// End time of the direct solve.
    pub fn t_end(&self) -> Result<f64, CliError> {
        if let Some(t) = self.config.direct.t_end {
            return Ok(t);
        }
        match self.axes()?.get(1) {
            Some(t1) if t1.max > 0.0 => Ok(t1.max),
            _ => Err(input(
                "direct.t_end is missing and grid.t[0].max is not positive",
            )),
        }
    }
}
