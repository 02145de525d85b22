//! Hamiltonian flows of the first integrals on the cotangent chart, orbit
//! grids built by composing them, and the identification of geodesics with
//! cotangent points.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::exactpoly::{CompiledPolynomial, Polynomial};
use crate::metric::{GramMatrix, MetricError, PhaseFunction, SINGULAR_GRAM_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("flow time {t} exceeds the horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },
    #[error("step size underflow at time {time} (step {step:e})")]
    StepUnderflow {
        time: f64,
        step: f64,
        last: CotangentPoint,
    },
    #[error("non-finite state at time {time}")]
    NonFinite { time: f64, last: CotangentPoint },
    #[error("adaptive integration exceeded {max_steps} steps")]
    TooManySteps {
        max_steps: usize,
        last: CotangentPoint,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error("invalid axis: {0}")]
    Axis(String),
    #[error("point has non-finite entries")]
    NonFinitePoint,
    #[error("Gram matrix is singular at the point (|det| = {det:e})")]
    Singular { det: f64 },
    #[error("lattice line {line:?}: {source}")]
    Line {
        line: Vec<usize>,
        #[source]
        source: Box<FlowError>,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// A point `(u, p)` of the cotangent chart.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentPoint {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

impl CotangentPoint {
    pub fn new(u: Vec<f64>, p: Vec<f64>) -> Result<Self, FlowError> {
        if u.len() != p.len() {
            return Err(FlowError::DimensionMismatch {
                expected: u.len(),
                found: p.len(),
            });
        }
        if u.iter().chain(&p).any(|x| !x.is_finite()) {
            return Err(FlowError::NonFinitePoint);
        }
        Ok(CotangentPoint { u, p })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    /// `(u1..un, p1..pn)`.
    pub fn state(&self) -> Vec<f64> {
        let mut z = self.u.clone();
        z.extend_from_slice(&self.p);
        z
    }

    pub fn from_state(z: &[f64]) -> Self {
        let n = z.len() / 2;
        CotangentPoint {
            u: z[..n].to_vec(),
            p: z[n..].to_vec(),
        }
    }

    /// `‖self − other‖_∞` over both `u` and `p`.
    pub fn distance(&self, other: &CotangentPoint) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.p.iter().zip(&other.p))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Hamiltonian vector field `(∂F/∂p, −∂F/∂u)` of a phase function, kept both
/// exactly and lowered for evaluation.
#[derive(Debug, Clone)]
pub struct HamiltonianField {
    n: usize,
    function: PhaseFunction,
    exact: Vec<Polynomial>,
    compiled: Vec<CompiledPolynomial>,
    compiled_function: CompiledPolynomial,
}

/// The exact Hamiltonian vector field of `f`.
pub fn hamiltonian_rhs(f: &PhaseFunction) -> HamiltonianField {
    let n = f.n();
    let mut exact: Vec<Polynomial> = (0..n).map(|k| f.d_dp(k)).collect();
    exact.extend((0..n).map(|k| -f.d_du(k)));
    let compiled = exact.iter().map(CompiledPolynomial::new).collect();
    HamiltonianField {
        n,
        compiled_function: CompiledPolynomial::new(f.poly()),
        function: f.clone(),
        exact,
        compiled,
    }
}

impl HamiltonianField {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn function(&self) -> &PhaseFunction {
        &self.function
    }

    /// `2n` components: `u̇` then `ṗ`.
    pub fn components(&self) -> &[Polynomial] {
        &self.exact
    }

    /// `Σ ∂(ż_k)/∂z_k`, which is the zero polynomial for every Hamiltonian field.
    pub fn divergence(&self) -> Polynomial {
        let mut acc = Polynomial::zero(2 * self.n);
        for (k, c) in self.exact.iter().enumerate() {
            acc = &acc + &c.d(k);
        }
        acc
    }

    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.compiled) {
            *o = c.eval(z);
        }
    }

    pub fn eval(&self, point: &CotangentPoint) -> Vec<f64> {
        let z = point.state();
        let mut out = vec![0.0; 2 * self.n];
        self.eval_into(&z, &mut out);
        out
    }

    /// `F(point)`.
    pub fn value(&self, point: &CotangentPoint) -> f64 {
        self.compiled_function.eval(&point.state())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// Classical fourth-order Runge–Kutta with `ceil(|t|/step)` equal steps.
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with a deterministic step controller.
    Adaptive {
        abs_tol: f64,
        rel_tol: f64,
        initial_step: f64,
        min_step: f64,
        max_steps: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub method: Integrator,
    /// Largest admissible `|t|` for a single flow.
    pub horizon: f64,
}

pub const DEFAULT_RK4_STEP: f64 = 1e-3;
pub const DEFAULT_ABS_TOL: f64 = 1e-12;
pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_HORIZON: f64 = 1.0;

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings::rk4(DEFAULT_RK4_STEP)
    }
}

impl IntegratorSettings {
    pub fn rk4(step: f64) -> Self {
        IntegratorSettings {
            method: Integrator::Rk4 { step },
            horizon: DEFAULT_HORIZON,
        }
    }

    pub fn adaptive(abs_tol: f64, rel_tol: f64) -> Self {
        IntegratorSettings {
            method: Integrator::Adaptive {
                abs_tol,
                rel_tol,
                initial_step: 1e-2,
                min_step: 1e-12,
                max_steps: 1_000_000,
            },
            horizon: DEFAULT_HORIZON,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    fn validate(&self) -> Result<(), FlowError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(FlowError::Settings(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("horizon", self.horizon)?;
        match self.method {
            Integrator::Rk4 { step } => positive("step", step),
            Integrator::Adaptive {
                abs_tol,
                rel_tol,
                initial_step,
                min_step,
                max_steps,
            } => {
                positive("abs_tol", abs_tol)?;
                positive("rel_tol", rel_tol)?;
                positive("initial_step", initial_step)?;
                positive("min_step", min_step)?;
                if max_steps == 0 {
                    return Err(FlowError::Settings("max_steps must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for IntegratorSettings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            Integrator::Rk4 { step } => write!(f, "rk4(step={step:e})"),
            Integrator::Adaptive {
                abs_tol, rel_tol, ..
            } => write!(f, "dopri5(abs_tol={abs_tol:e}, rel_tol={rel_tol:e})"),
        }
    }
}

/// `Φ^t_F(z0)`.
pub fn integrate_flow(
    field: &HamiltonianField,
    z0: &CotangentPoint,
    t: f64,
    settings: &IntegratorSettings,
) -> Result<CotangentPoint, FlowError> {
    settings.validate()?;
    if z0.n() != field.n {
        return Err(FlowError::DimensionMismatch {
            expected: field.n,
            found: z0.n(),
        });
    }
    if !t.is_finite() || t.abs() > settings.horizon {
        return Err(FlowError::HorizonExceeded {
            t,
            horizon: settings.horizon,
        });
    }
    if t == 0.0 {
        return Ok(z0.clone());
    }
    match settings.method {
        Integrator::Rk4 { step } => rk4(field, z0, t, step),
        Integrator::Adaptive {
            abs_tol,
            rel_tol,
            initial_step,
            min_step,
            max_steps,
        } => dopri5(
            field,
            z0,
            t,
            Dopri {
                abs_tol,
                rel_tol,
                initial_step,
                min_step,
                max_steps,
            },
        ),
    }
}

fn axpy(out: &mut [f64], y: &[f64], terms: &[(f64, &[f64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = y[i];
        for (c, k) in terms {
            s += c * k[i];
        }
        *o = s;
    }
}

fn rk4(
    field: &HamiltonianField,
    z0: &CotangentPoint,
    t: f64,
    step: f64,
) -> Result<CotangentPoint, FlowError> {
    let steps = (t.abs() / step - 1e-9).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let dim = 2 * field.n;
    let mut y = z0.state();
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    let mut tmp = vec![0.0; dim];
    for s in 0..steps {
        field.eval_into(&y, &mut k1);
        axpy(&mut tmp, &y, &[(0.5 * h, &k1)]);
        field.eval_into(&tmp, &mut k2);
        axpy(&mut tmp, &y, &[(0.5 * h, &k2)]);
        field.eval_into(&tmp, &mut k3);
        axpy(&mut tmp, &y, &[(h, &k3)]);
        field.eval_into(&tmp, &mut k4);
        let next: Vec<f64> = (0..dim)
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::NonFinite {
                time: h * s as f64,
                last: CotangentPoint::from_state(&y),
            });
        }
        y = next;
    }
    Ok(CotangentPoint::from_state(&y))
}

struct Dopri {
    abs_tol: f64,
    rel_tol: f64,
    initial_step: f64,
    min_step: f64,
    max_steps: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn dopri5(
    field: &HamiltonianField,
    z0: &CotangentPoint,
    t: f64,
    cfg: Dopri,
) -> Result<CotangentPoint, FlowError> {
    let dim = 2 * field.n;
    let dir = t.signum();
    let total = t.abs();
    let mut y = z0.state();
    let mut elapsed = 0.0f64;
    let mut h = cfg.initial_step.min(total);
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let end_slack = 4.0 * f64::EPSILON * total.max(1.0);
    for _ in 0..cfg.max_steps {
        let remaining = total - elapsed;
        if remaining <= end_slack {
            return Ok(CotangentPoint::from_state(&y));
        }
        let last_step = h >= remaining;
        let hs = if last_step { remaining } else { h };
        let hd = dir * hs;

        field.eval_into(&y, &mut k[0]);
        axpy(&mut tmp, &y, &[(hd * A21, &k[0])]);
        field.eval_into(&tmp, &mut k[1]);
        axpy(&mut tmp, &y, &[(hd * A31, &k[0]), (hd * A32, &k[1])]);
        field.eval_into(&tmp, &mut k[2]);
        axpy(
            &mut tmp,
            &y,
            &[(hd * A41, &k[0]), (hd * A42, &k[1]), (hd * A43, &k[2])],
        );
        field.eval_into(&tmp, &mut k[3]);
        axpy(
            &mut tmp,
            &y,
            &[
                (hd * A51, &k[0]),
                (hd * A52, &k[1]),
                (hd * A53, &k[2]),
                (hd * A54, &k[3]),
            ],
        );
        field.eval_into(&tmp, &mut k[4]);
        axpy(
            &mut tmp,
            &y,
            &[
                (hd * A61, &k[0]),
                (hd * A62, &k[1]),
                (hd * A63, &k[2]),
                (hd * A64, &k[3]),
                (hd * A65, &k[4]),
            ],
        );
        field.eval_into(&tmp, &mut k[5]);
        axpy(
            &mut y5,
            &y,
            &[
                (hd * B1, &k[0]),
                (hd * B3, &k[2]),
                (hd * B4, &k[3]),
                (hd * B5, &k[4]),
                (hd * B6, &k[5]),
            ],
        );
        field.eval_into(&y5, &mut k[6]);

        let mut err_sq = 0.0;
        let mut finite = true;
        for i in 0..dim {
            let e = hd
                * (E1 * k[0][i]
                    + E3 * k[2][i]
                    + E4 * k[3][i]
                    + E5 * k[4][i]
                    + E6 * k[5][i]
                    + E7 * k[6][i]);
            let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y5[i].abs());
            err_sq += (e / scale).powi(2);
            finite &= y5[i].is_finite() && e.is_finite();
        }
        if !finite {
            return Err(FlowError::NonFinite {
                time: dir * elapsed,
                last: CotangentPoint::from_state(&y),
            });
        }
        let err = (err_sq / dim as f64).sqrt();
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err <= 1.0 {
            elapsed = if last_step { total } else { elapsed + hs };
            y.copy_from_slice(&y5);
            h = hs * factor;
            if last_step {
                return Ok(CotangentPoint::from_state(&y));
            }
        } else {
            h = hs * factor;
        }
        if h < cfg.min_step && total - elapsed > cfg.min_step {
            return Err(FlowError::StepUnderflow {
                time: dir * elapsed,
                step: h,
                last: CotangentPoint::from_state(&y),
            });
        }
    }
    Err(FlowError::TooManySteps {
        max_steps: cfg.max_steps,
        last: CotangentPoint::from_state(&y),
    })
}

/// Uniform axis `min + i·(max − min)/(count − 1)`, `i < count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self, FlowError> {
        if count == 0 {
            return Err(FlowError::Axis("count must be positive".into()));
        }
        if !min.is_finite() || !max.is_finite() || max < min {
            return Err(FlowError::Axis(format!("bad range [{min}, {max}]")));
        }
        if count == 1 && max != min {
            return Err(FlowError::Axis("a single node needs min == max".into()));
        }
        Ok(AxisSpec { min, max, count })
    }

    pub fn point(min: f64) -> Self {
        AxisSpec {
            min,
            max: min,
            count: 1,
        }
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.max
        } else {
            self.min + i as f64 * self.step()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }
}

/// Provenance recorded with a grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridMeta {
    pub fixture: String,
    pub settings: String,
}

/// Values of `u` (and optionally `p`) on a lattice, flattened with the first
/// axis slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionGrid {
    pub axes: Vec<AxisSpec>,
    pub axis_names: Vec<String>,
    pub n: usize,
    pub u: Vec<Vec<f64>>,
    pub p: Option<Vec<Vec<f64>>>,
    pub meta: GridMeta,
    pub flow_generated: bool,
}

impl SolutionGrid {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        flat_index(&self.shape(), multi)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        multi_index(&self.shape(), flat)
    }

    /// Axis coordinates of a flattened node.
    pub fn coordinates(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.value(i))
            .collect()
    }

    pub fn u_at(&self, multi: &[usize]) -> &[f64] {
        &self.u[self.flat_index(multi)]
    }

    /// Checks the lattice invariants: node count and vector lengths.
    pub fn is_consistent(&self) -> bool {
        let nodes: usize = self.shape().iter().product();
        self.axes.len() == self.axis_names.len()
            && self.u.len() == nodes
            && self.u.iter().all(|v| v.len() == self.n)
            && self
                .p
                .as_ref()
                .is_none_or(|p| p.len() == nodes && p.iter().all(|v| v.len() == self.n))
    }
}

pub fn flat_index(shape: &[usize], multi: &[usize]) -> usize {
    multi.iter().zip(shape).fold(0, |acc, (&i, &c)| acc * c + i)
}

pub fn multi_index(shape: &[usize], mut flat: usize) -> Vec<usize> {
    let mut out = vec![0; shape.len()];
    for (o, &c) in out.iter_mut().zip(shape).rev() {
        *o = flat % c;
        flat /= c;
    }
    out
}

/// Default axis names `x, t1, …, t{n−1}`.
pub fn axis_names(n: usize) -> Vec<String> {
    std::iter::once("x".to_string())
        .chain((1..n).map(|k| format!("t{k}")))
        .collect()
}

/// Values of a flow along one axis from `start`, reusing each node as the
/// starting point of the next step.
fn sweep(
    field: &HamiltonianField,
    start: &CotangentPoint,
    axis: &AxisSpec,
    settings: &IntegratorSettings,
) -> Result<Vec<CotangentPoint>, FlowError> {
    let mut out = Vec::with_capacity(axis.count);
    let mut z = integrate_flow(field, start, axis.min, settings)?;
    let mut prev = axis.min;
    for i in 0..axis.count {
        let v = axis.value(i);
        if i > 0 {
            z = integrate_flow(field, &z, v - prev, settings)?;
        }
        prev = v;
        out.push(z.clone());
    }
    Ok(out)
}

/// Lattice of `Φ^x_{F_0} ∘ Φ^{t_1}_{F_1} ∘ … ∘ Φ^{t_{n−1}}_{F_{n−1}}(z0)`.
///
/// The t-flows are applied first, innermost index first; each x-line is then
/// swept independently (in parallel) from its t-prefix.
pub fn orbit_grid(
    family: &[HamiltonianField],
    z0: &CotangentPoint,
    axes: &[AxisSpec],
    settings: &IntegratorSettings,
) -> Result<SolutionGrid, FlowError> {
    settings.validate()?;
    let n = z0.n();
    if family.len() != axes.len() || family.is_empty() {
        return Err(FlowError::DimensionMismatch {
            expected: family.len(),
            found: axes.len(),
        });
    }
    if let Some(f) = family.iter().find(|f| f.n != n) {
        return Err(FlowError::DimensionMismatch {
            expected: n,
            found: f.n,
        });
    }
    for a in axes {
        for v in [a.min, a.max] {
            if v.abs() > settings.horizon {
                return Err(FlowError::HorizonExceeded {
                    t: v,
                    horizon: settings.horizon,
                });
            }
        }
    }

    // t-prefixes, keyed by the multi-index over axes[1..] in row-major order.
    let t_axes = &axes[1..];
    let mut prefixes: Vec<(Vec<usize>, CotangentPoint)> = vec![(Vec::new(), z0.clone())];
    for (k, axis) in t_axes.iter().enumerate().rev() {
        let field = &family[k + 1];
        let mut next = Vec::with_capacity(prefixes.len() * axis.count);
        for (idx, z) in &prefixes {
            let line = sweep(field, z, axis, settings).map_err(|e| annotate(idx, k + 1, e))?;
            for (i, p) in line.into_iter().enumerate() {
                let mut m = vec![i];
                m.extend_from_slice(idx);
                next.push((m, p));
            }
        }
        prefixes = next;
    }
    prefixes.sort_by(|a, b| a.0.cmp(&b.0));

    let x_axis = &axes[0];
    let lines: Vec<Vec<CotangentPoint>> = prefixes
        .par_iter()
        .map(|(idx, z)| sweep(&family[0], z, x_axis, settings).map_err(|e| annotate(idx, 0, e)))
        .collect::<Result<_, _>>()?;

    let shape: Vec<usize> = axes.iter().map(|a| a.count).collect();
    let nodes: usize = shape.iter().product();
    let mut u = vec![Vec::new(); nodes];
    let mut p = vec![Vec::new(); nodes];
    for ((idx, _), line) in prefixes.iter().zip(lines) {
        for (ix, z) in line.into_iter().enumerate() {
            let mut m = vec![ix];
            m.extend_from_slice(idx);
            let f = flat_index(&shape, &m);
            u[f] = z.u;
            p[f] = z.p;
        }
    }
    Ok(SolutionGrid {
        axes: axes.to_vec(),
        axis_names: axis_names(axes.len()),
        n,
        u,
        p: Some(p),
        meta: GridMeta {
            fixture: String::new(),
            settings: settings.to_string(),
        },
        flow_generated: true,
    })
}

/// Wraps an error with the lattice line it occurred on; `axis` marks the
/// swept axis with `usize::MAX`.
fn annotate(t_index: &[usize], axis: usize, e: FlowError) -> FlowError {
    let mut line = vec![0; axis];
    line.push(usize::MAX);
    line.extend_from_slice(t_index);
    FlowError::Line {
        line,
        source: Box::new(e),
    }
}

/// `max_{i<j} ‖Φ^s_{F_i}Φ^t_{F_j}z0 − Φ^t_{F_j}Φ^s_{F_i}z0‖_∞`.
pub fn verify_commutation(
    family: &[HamiltonianField],
    z0: &CotangentPoint,
    s: f64,
    t: f64,
    settings: &IntegratorSettings,
) -> Result<f64, FlowError> {
    let mut worst = 0.0f64;
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            let a = integrate_flow(
                &family[i],
                &integrate_flow(&family[j], z0, t, settings)?,
                s,
                settings,
            )?;
            let b = integrate_flow(
                &family[j],
                &integrate_flow(&family[i], z0, s, settings)?,
                t,
                settings,
            )?;
            worst = worst.max(a.distance(&b));
        }
    }
    Ok(worst)
}

/// `max_{i,j} |F_j(Φ^t_{F_i}z0) − F_j(z0)|`.
pub fn verify_conservation(
    family: &[HamiltonianField],
    z0: &CotangentPoint,
    t: f64,
    settings: &IntegratorSettings,
) -> Result<f64, FlowError> {
    let initial: Vec<f64> = family.iter().map(|f| f.value(z0)).collect();
    let mut worst = 0.0f64;
    for fi in family {
        let z = integrate_flow(fi, z0, t, settings)?;
        for (fj, v0) in family.iter().zip(&initial) {
            worst = worst.max((fj.value(&z) - v0).abs());
        }
    }
    Ok(worst)
}

/// Cotangent point of a curve through `u0` with velocity `u̇0`:
/// `p = g(u0)·u̇0` with `g = gram^{-1}`.
pub fn geodesic_from(
    u0: &[f64],
    velocity: &[f64],
    gram: &GramMatrix,
) -> Result<CotangentPoint, FlowError> {
    let n = gram.dim();
    for len in [u0.len(), velocity.len()] {
        if len != n {
            return Err(FlowError::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let m: DMatrix<f64> = gram.as_field().eval_at(u0).map_err(MetricError::from)?;
    let det = m.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_GRAM_TOLERANCE {
        return Err(FlowError::Singular { det });
    }
    let p = m
        .lu()
        .solve(&DVector::from_column_slice(velocity))
        .ok_or(FlowError::Singular { det })?;
    CotangentPoint::new(u0.to_vec(), p.iter().copied().collect())
}

/// For every line of a flow-generated grid along the first axis, rebuilds the
/// cotangent point from the line's first node (position and velocity
/// `gram·p`), integrates it afresh to each node and returns the largest
/// deviation in `u` over all nodes.
pub fn geodesic_line_deviation(
    grid: &SolutionGrid,
    geodesic_field: &HamiltonianField,
    gram: &GramMatrix,
    settings: &IntegratorSettings,
) -> Result<f64, FlowError> {
    let p = grid
        .p
        .as_ref()
        .ok_or_else(|| FlowError::Settings("grid carries no momenta".into()))?;
    let shape = grid.shape();
    let x_axis = grid.axes[0];
    let t_shape = &shape[1..];
    let t_lines: usize = t_shape.iter().product();
    let results: Vec<f64> = (0..t_lines)
        .into_par_iter()
        .map(|line| -> Result<f64, FlowError> {
            let t_idx = multi_index(t_shape, line);
            let node = |ix: usize| {
                let mut m = vec![ix];
                m.extend_from_slice(&t_idx);
                flat_index(&shape, &m)
            };
            let first = node(0);
            let start = CotangentPoint::new(grid.u[first].clone(), p[first].clone())?;
            let velocity: Vec<f64> = geodesic_field.eval(&start)[..grid.n].to_vec();
            let z = geodesic_from(&start.u, &velocity, gram)?;
            let mut worst = 0.0f64;
            for ix in 1..x_axis.count {
                let dx = x_axis.value(ix) - x_axis.min;
                let w = integrate_flow(geodesic_field, &z, dx, settings)
                    .map_err(|e| annotate(&t_idx, 0, e))?;
                let stored = &grid.u[node(ix)];
                for (a, b) in w.u.iter().zip(stored) {
                    worst = worst.max((a - b).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<_, _>>()?;
    Ok(results.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactpoly::{parse_expression, u_names};
    use crate::hierarchy::{first_integrals, killing_operators};
    use crate::metric::{build_h_family, gram_matrix};
    use crate::operator::companion_second;

    fn fields(exprs: &[&str]) -> (Vec<HamiltonianField>, GramMatrix) {
        let names = u_names(exprs.len());
        let s: Vec<_> = exprs
            .iter()
            .map(|e| parse_expression(e, &names).unwrap())
            .collect();
        let l = companion_second(&s).unwrap();
        let h = build_h_family(&s).unwrap();
        let gram = gram_matrix(&h[0]).unwrap();
        let f = first_integrals(&gram, &killing_operators(&l)).unwrap();
        (f.iter().map(hamiltonian_rhs).collect(), gram)
    }

    fn pt(u: &[f64], p: &[f64]) -> CotangentPoint {
        CotangentPoint::new(u.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn divergence_vanishes() {
        let (f, _) = fields(&["u1", "u2 - 1/2*u1^2"]);
        assert!(f.iter().all(|h| h.divergence().is_zero()));
    }

    #[test]
    fn e2_rhs_at_origin() {
        let (f, _) = fields(&["u1", "u2 - 1/2*u1^2"]);
        let v = f[0].eval(&pt(&[0.0, 0.0], &[1.0, 1.0]));
        // gram(0) = [[0,1],[1,0]] so u̇ = (1, 1); ṗ = −½ ∂_u(2p1p2 + u1 p2²) = (−½, 0).
        assert_eq!(v, vec![1.0, 1.0, -0.5, 0.0]);
    }

    #[test]
    fn e0_straight_line() {
        let (f, gram) = fields(&["1", "2"]);
        let z0 = pt(&[0.0, 0.0], &[1.0, 0.0]);
        let z = integrate_flow(&f[0], &z0, 1.0, &IntegratorSettings::default()).unwrap();
        let g = gram.as_field().eval_at(&[0.0, 0.0]).unwrap();
        assert!((z.u[0] - g[(0, 0)]).abs() < 1e-14);
        assert!((z.u[1] - g[(1, 0)]).abs() < 1e-14);
        assert_eq!(z.p, z0.p);
    }

    #[test]
    fn zero_time_is_identity() {
        let (f, _) = fields(&["u1", "u2 - 1/2*u1^2"]);
        let z0 = pt(&[0.2, 1.0], &[0.3, -0.1]);
        for s in [
            IntegratorSettings::default(),
            IntegratorSettings::adaptive(1e-12, 1e-12),
        ] {
            assert_eq!(integrate_flow(&f[0], &z0, 0.0, &s).unwrap(), z0);
        }
    }

    #[test]
    fn horizon_and_settings_errors() {
        let (f, _) = fields(&["u1", "u2 - 1/2*u1^2"]);
        let z0 = pt(&[0.2, 1.0], &[0.3, -0.1]);
        let s = IntegratorSettings::default();
        assert!(matches!(
            integrate_flow(&f[0], &z0, 1.5, &s),
            Err(FlowError::HorizonExceeded { .. })
        ));
        assert!(matches!(
            integrate_flow(&f[0], &z0, 0.5, &IntegratorSettings::rk4(-1.0)),
            Err(FlowError::Settings(_))
        ));
    }

    #[test]
    fn step_underflow_reports_last_state() {
        // u̇ = u² blows up at t = 1 from u = 1.
        let names = crate::exactpoly::phase_names(1);
        let h = PhaseFunction::new(1, parse_expression("u1^2*p1", &names).unwrap()).unwrap();
        let field = hamiltonian_rhs(&h);
        let z0 = pt(&[1.0], &[0.0]);
        let mut s = IntegratorSettings::adaptive(1e-10, 1e-10).with_horizon(2.0);
        if let Integrator::Adaptive { min_step, .. } = &mut s.method {
            *min_step = 1e-6;
        }
        match integrate_flow(&field, &z0, 1.5, &s) {
            Err(FlowError::StepUnderflow { time, last, .. }) => {
                assert!(time > 0.9 && time < 1.0);
                assert!(last.u[0] > 10.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn adaptive_matches_rk4() {
        let (f, _) = fields(&["u1", "u2 - 1/2*u1^2"]);
        let z0 = pt(&[0.2, 1.0], &[0.3, -0.1]);
        let a =
            integrate_flow(&f[0], &z0, 0.7, &IntegratorSettings::adaptive(1e-12, 1e-12)).unwrap();
        let b = integrate_flow(&f[0], &z0, 0.7, &IntegratorSettings::rk4(1e-3)).unwrap();
        assert!(a.distance(&b) < 1e-10);
        let back =
            integrate_flow(&f[0], &a, -0.7, &IntegratorSettings::adaptive(1e-12, 1e-12)).unwrap();
        assert!(back.distance(&z0) < 1e-10);
    }

    #[test]
    fn index_round_trip() {
        let shape = [3, 4, 2];
        for flat in 0..24 {
            assert_eq!(flat_index(&shape, &multi_index(&shape, flat)), flat);
        }
        assert_eq!(flat_index(&shape, &[1, 0, 0]), 8);
    }

    #[test]
    fn axis_nodes() {
        let a = AxisSpec::new(0.0, 1.0, 11).unwrap();
        assert_eq!(a.value(10), 1.0);
        assert!((a.step() - 0.1).abs() < 1e-15);
        assert!(AxisSpec::new(1.0, 0.0, 3).is_err());
        assert!(AxisSpec::new(0.0, 1.0, 0).is_err());
        assert_eq!(AxisSpec::point(0.5).values(), vec![0.5]);
    }

    #[test]
    fn e0_orbit_grid_is_affine() {
        let (f, gram) = fields(&["1", "2"]);
        let z0 = pt(&[0.1, -0.2], &[0.5, 0.25]);
        let axes = [
            AxisSpec::new(0.0, 1.0, 5).unwrap(),
            AxisSpec::new(-0.5, 0.5, 3).unwrap(),
        ];
        let grid = orbit_grid(&f, &z0, &axes, &IntegratorSettings::default()).unwrap();
        assert!(grid.is_consistent());
        let g = gram.as_field().eval_at(&[0.0, 0.0]).unwrap();
        let v = &g * DVector::from_column_slice(&z0.p);
        let l =
            companion_second(&[Polynomial::from_int(2, 1), Polynomial::from_int(2, 2)]).unwrap();
        let a1 = killing_operators(&l)[1].eval_at(&[0.0, 0.0]).unwrap();
        let w = &a1 * &v;
        for flat in 0..grid.len() {
            let c = grid.coordinates(flat);
            for i in 0..2 {
                let exact = z0.u[i] + c[0] * v[i] + c[1] * w[i];
                assert!((grid.u[flat][i] - exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn geodesic_round_trip() {
        let (f, gram) = fields(&["1", "2"]);
        let p0 = [0.5, 0.25];
        let g = gram.as_field().eval_at(&[0.0, 0.0]).unwrap();
        let v = &g * DVector::from_column_slice(&p0);
        let z = geodesic_from(&[0.0, 0.0], v.as_slice(), &gram).unwrap();
        assert!((z.p[0] - p0[0]).abs() < 1e-12 && (z.p[1] - p0[1]).abs() < 1e-12);
        let zero = geodesic_from(&[0.3, 0.3], &[0.0, 0.0], &gram).unwrap();
        assert_eq!(zero.p, vec![0.0, 0.0]);
        let _ = f;
    }
}
