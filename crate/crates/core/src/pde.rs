//! Direct method-of-lines integration of `u_t = A(u) u_x` and finite-difference
//! residuals of the hydrodynamic-type system on sampled grids.

use thiserror::Error;

use crate::flows::{flat_index, multi_index, AxisSpec, FlowError, GridMeta, SolutionGrid};
use crate::operator::{CompiledOperator, OperatorError, OperatorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("domain exhausted: {steps} steps need {needed} nodes, grid has {available}")]
    DomainExhausted {
        steps: usize,
        needed: usize,
        available: usize,
    },
    #[error("solution blew up at step {step}")]
    BlowUp { step: usize },
    #[error("degenerate axis {axis}: {reason}")]
    DegenerateAxis { axis: usize, reason: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error("grids do not share any node")]
    NoOverlap,
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Nodes trimmed per side by one evaluation of the five-point stencil.
pub const STENCIL_HALF_WIDTH: usize = 2;
/// Nodes trimmed per side by one RK4 step (four stencil evaluations).
pub const TRIM_PER_STEP: usize = 4 * STENCIL_HALF_WIDTH;

/// Time step `dt = cfl·Δx`, rounded down so that `t_end` is hit exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectSettings {
    pub cfl: f64,
}

impl Default for DirectSettings {
    fn default() -> Self {
        DirectSettings { cfl: 1.0 }
    }
}

/// Live slab of nodes `[lo, hi)` of the original x-grid.
struct Slab {
    lo: usize,
    values: Vec<Vec<f64>>,
}

fn rhs(op: &CompiledOperator, slab: &Slab, dx: f64) -> Slab {
    let n = op.dim();
    let w = STENCIL_HALF_WIDTH;
    let len = slab.values.len();
    let mut out = Vec::with_capacity(len.saturating_sub(2 * w));
    let mut ux = vec![0.0; n];
    for i in w..len - w {
        let v = &slab.values;
        for c in 0..n {
            ux[c] =
                (v[i - 2][c] - 8.0 * v[i - 1][c] + 8.0 * v[i + 1][c] - v[i + 2][c]) / (12.0 * dx);
        }
        let mut r = vec![0.0; n];
        op.apply_at(&v[i], &ux, &mut r);
        out.push(r);
    }
    Slab {
        lo: slab.lo + w,
        values: out,
    }
}

/// `base + c·k` on the nodes of `k` (a sub-slab of `base`).
fn shifted(base: &Slab, k: &Slab, c: f64) -> Slab {
    let off = k.lo - base.lo;
    Slab {
        lo: k.lo,
        values: k
            .values
            .iter()
            .enumerate()
            .map(|(i, kv)| {
                base.values[off + i]
                    .iter()
                    .zip(kv)
                    .map(|(b, d)| b + c * d)
                    .collect()
            })
            .collect(),
    }
}

fn rk4_step(op: &CompiledOperator, slab: &Slab, dx: f64, dt: f64) -> Slab {
    let k1 = rhs(op, slab, dx);
    let k2 = rhs(op, &shifted(slab, &k1, 0.5 * dt), dx);
    let k3 = rhs(op, &shifted(slab, &k2, 0.5 * dt), dx);
    let k4 = rhs(op, &shifted(slab, &k3, dt), dx);
    let lo = k4.lo;
    let values = (0..k4.values.len())
        .map(|i| {
            fn at(s: &Slab, lo: usize, i: usize) -> &[f64] {
                &s.values[lo - s.lo + i]
            }
            let base = at(slab, lo, i);
            (0..base.len())
                .map(|c| {
                    base[c]
                        + dt / 6.0
                            * (at(&k1, lo, i)[c]
                                + 2.0 * at(&k2, lo, i)[c]
                                + 2.0 * at(&k3, lo, i)[c]
                                + k4.values[i][c])
                })
                .collect()
        })
        .collect();
    Slab { lo, values }
}

/// Solves `u_t = A(u) u_x` from `initial` (one `u`-vector per node of
/// `x_axis`) up to `t_end` with fourth-order central differences and RK4.
///
/// No boundary conditions are imposed: each stencil evaluation trims two
/// nodes per side, and the returned grid covers only the nodes still valid at
/// `t_end`, for every time layer.
pub fn direct_solve(
    a: &OperatorField,
    initial: &[Vec<f64>],
    x_axis: &AxisSpec,
    t_end: f64,
    settings: &DirectSettings,
) -> Result<SolutionGrid, PdeError> {
    let n = a.dim();
    if a.nvars() != n {
        return Err(PdeError::DimensionMismatch {
            expected: n,
            found: a.nvars(),
        });
    }
    if initial.len() != x_axis.count {
        return Err(PdeError::DimensionMismatch {
            expected: x_axis.count,
            found: initial.len(),
        });
    }
    if let Some(v) = initial.iter().find(|v| v.len() != n) {
        return Err(PdeError::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    if !(settings.cfl.is_finite() && settings.cfl > 0.0) {
        return Err(PdeError::Settings(format!(
            "cfl must be positive, got {}",
            settings.cfl
        )));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(PdeError::Settings(format!(
            "t_end must be non-negative, got {t_end}"
        )));
    }
    let dx = x_axis.step();
    if x_axis.count < 2 * STENCIL_HALF_WIDTH + 1 || dx <= 0.0 {
        return Err(PdeError::DegenerateAxis {
            axis: 0,
            reason: "need at least 5 distinct x nodes".into(),
        });
    }
    let steps = if t_end == 0.0 {
        0
    } else {
        // Guard against `ceil` of a ratio that is an integer up to rounding.
        (t_end / (settings.cfl * dx) - 1e-9).ceil() as usize
    };
    let needed = 2 * TRIM_PER_STEP * steps + 1;
    if needed > x_axis.count {
        return Err(PdeError::DomainExhausted {
            steps,
            needed,
            available: x_axis.count,
        });
    }
    let dt = if steps == 0 {
        0.0
    } else {
        t_end / steps as f64
    };
    let op = a.compile();
    let keep_lo = TRIM_PER_STEP * steps;
    let keep = x_axis.count - 2 * keep_lo;

    let mut slab = Slab {
        lo: 0,
        values: initial.to_vec(),
    };
    let mut layers: Vec<Vec<Vec<f64>>> = Vec::with_capacity(steps + 1);
    layers.push(slab.values[keep_lo..keep_lo + keep].to_vec());
    for step in 1..=steps {
        slab = rk4_step(&op, &slab, dx, dt);
        if slab.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PdeError::BlowUp { step });
        }
        let off = keep_lo - slab.lo;
        layers.push(slab.values[off..off + keep].to_vec());
    }

    let x_min = x_axis.value(keep_lo);
    let x_max = x_axis.value(keep_lo + keep - 1);
    let out_x = AxisSpec {
        min: x_min,
        max: x_max,
        count: keep,
    };
    let out_t = AxisSpec {
        min: 0.0,
        max: t_end,
        count: steps + 1,
    };
    // Flatten with x slowest.
    let mut u = Vec::with_capacity(keep * (steps + 1));
    for ix in 0..keep {
        for layer in &layers {
            u.push(layer[ix].clone());
        }
    }
    Ok(SolutionGrid {
        axes: vec![out_x, out_t],
        axis_names: vec!["x".into(), "t1".into()],
        n,
        u,
        p: None,
        meta: GridMeta {
            fixture: String::new(),
            settings: format!("direct(fd4, rk4, cfl={})", settings.cfl),
        },
        flow_generated: false,
    })
}

/// `max over interior nodes of ‖u_{t_k} − A_k(u) u_x‖_∞` for every axis
/// `k ≥ 1`, with second-order central differences. `family[k]` pairs with
/// axis `k`; `family[0]` (the x-axis operator) is not used.
pub fn grid_residual(grid: &SolutionGrid, family: &[OperatorField]) -> Result<Vec<f64>, PdeError> {
    let shape = grid.shape();
    if family.len() != shape.len() {
        return Err(PdeError::DimensionMismatch {
            expected: shape.len(),
            found: family.len(),
        });
    }
    for (axis, a) in grid.axes.iter().enumerate() {
        if a.count < 5 || a.step() <= 0.0 {
            return Err(PdeError::DegenerateAxis {
                axis,
                reason: format!("need at least 5 distinct nodes, found {}", a.count),
            });
        }
    }
    let n = grid.n;
    if let Some(a) = family.iter().find(|a| a.dim() != n) {
        return Err(PdeError::DimensionMismatch {
            expected: n,
            found: a.dim(),
        });
    }
    let ops: Vec<CompiledOperator> = family.iter().map(|a| a.compile()).collect();
    let mut worst = vec![0.0f64; shape.len() - 1];
    let dx = grid.axes[0].step();
    let mut ux = vec![0.0; n];
    let mut au = vec![0.0; n];
    for flat in 0..grid.len() {
        let m = multi_index(&shape, flat);
        if m.iter().zip(&shape).any(|(&i, &c)| i == 0 || i + 1 == c) {
            continue;
        }
        let neighbour = |axis: usize, delta: isize| {
            let mut mm = m.clone();
            mm[axis] = (mm[axis] as isize + delta) as usize;
            &grid.u[flat_index(&shape, &mm)]
        };
        let (xp, xm) = (neighbour(0, 1), neighbour(0, -1));
        for c in 0..n {
            ux[c] = (xp[c] - xm[c]) / (2.0 * dx);
        }
        for k in 1..shape.len() {
            let dt = grid.axes[k].step();
            let (tp, tm) = (neighbour(k, 1), neighbour(k, -1));
            ops[k].apply_at(&grid.u[flat], &ux, &mut au);
            for c in 0..n {
                let ut = (tp[c] - tm[c]) / (2.0 * dt);
                worst[k - 1] = worst[k - 1].max((ut - au[c]).abs());
            }
        }
    }
    Ok(worst)
}

/// Residuals below this count as exact in a convergence table.
pub const EXACT_RESIDUAL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    /// Both residuals of the pair are below [`EXACT_RESIDUAL`].
    Exact,
    Observed(f64),
    /// First row of the ladder.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub delta: f64,
    pub residual: f64,
    pub order: Order,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Builds the table from `(Δ, residual)` pairs, estimating the order
    /// between consecutive rows as `log(r_{i−1}/r_i) / log(Δ_{i−1}/Δ_i)`.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let rows = pairs
            .iter()
            .enumerate()
            .map(|(i, &(delta, residual))| {
                let order = if i == 0 {
                    Order::None
                } else {
                    let (d0, r0) = pairs[i - 1];
                    if r0 < EXACT_RESIDUAL && residual < EXACT_RESIDUAL {
                        Order::Exact
                    } else {
                        Order::Observed((r0 / residual).ln() / (d0 / delta).ln())
                    }
                };
                ConvergenceRow {
                    delta,
                    residual,
                    order,
                }
            })
            .collect();
        ConvergenceTable { rows }
    }

    /// Smallest observed order; `Exact` if every estimate is exact, `None`
    /// for fewer than two rows.
    pub fn worst_order(&self) -> Order {
        let mut out = Order::None;
        for r in self.rows.iter().skip(1) {
            out = match (out, r.order) {
                (Order::None, o) => o,
                (Order::Exact, o) => o,
                (Order::Observed(a), Order::Observed(b)) => Order::Observed(a.min(b)),
                (o, _) => o,
            };
        }
        out
    }

    /// Largest ratio `r_i / r_{i−1}` between consecutive rows.
    pub fn worst_ratio(&self) -> Option<f64> {
        self.rows
            .windows(2)
            .map(|w| w[1].residual / w[0].residual)
            .reduce(f64::max)
    }
}

/// Runs `residual_at(Δ)` over the ladder and tabulates the result.
pub fn convergence_study<E>(
    resolutions: &[f64],
    mut residual_at: impl FnMut(f64) -> Result<f64, E>,
) -> Result<ConvergenceTable, E> {
    let pairs = resolutions
        .iter()
        .map(|&d| residual_at(d).map(|r| (d, r)))
        .collect::<Result<Vec<_>, E>>()?;
    Ok(ConvergenceTable::from_pairs(&pairs))
}

/// `max ‖u_a − u_b‖_∞` over the nodes the two grids share (coordinates equal
/// up to `1e−9` of the spacing).
pub fn grid_deviation(a: &SolutionGrid, b: &SolutionGrid) -> Result<f64, PdeError> {
    if a.axes.len() != b.axes.len() || a.n != b.n {
        return Err(PdeError::DimensionMismatch {
            expected: a.axes.len(),
            found: b.axes.len(),
        });
    }
    let mut worst = 0.0f64;
    let mut shared = 0usize;
    'nodes: for flat in 0..a.len() {
        let coords = a.coordinates(flat);
        let mut mb = Vec::with_capacity(coords.len());
        for (c, axis) in coords.iter().zip(&b.axes) {
            let step = axis.step();
            let i = if axis.count == 1 {
                0.0
            } else {
                ((c - axis.min) / step).round()
            };
            if i < 0.0 || i as usize >= axis.count {
                continue 'nodes;
            }
            let tol = 1e-9 * if step > 0.0 { step } else { 1.0 };
            if (axis.value(i as usize) - c).abs() > tol {
                continue 'nodes;
            }
            mb.push(i as usize);
        }
        shared += 1;
        let ub = b.u_at(&mb);
        for (x, y) in a.u[flat].iter().zip(ub) {
            worst = worst.max((x - y).abs());
        }
    }
    if shared == 0 {
        return Err(PdeError::NoOverlap);
    }
    Ok(worst)
}
