//! A companion operator bundled with everything derived from it, and the
//! reference fixtures used throughout the tests.

use thiserror::Error;

use crate::exactpoly::{parse_expression, u_names, PolyError, Polynomial};
use crate::flows::{
    hamiltonian_rhs, orbit_grid, AxisSpec, CotangentPoint, FlowError, HamiltonianField,
    IntegratorSettings, SolutionGrid,
};
use crate::hierarchy::{first_integrals, killing_operators, HierarchyError};
use crate::metric::{build_h_family, gram_matrix, GramMatrix, MetricError, PhaseFunction};
use crate::operator::{companion_second, OperatorError, OperatorField};
use crate::pde::{direct_solve, grid_deviation, grid_residual, DirectSettings, PdeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("sigma[{index}]: {source}")]
    Parse {
        index: usize,
        #[source]
        source: PolyError,
    },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

/// `L = L_comp2(σ)` together with its quadratic family, Gram matrix, Killing
/// operators, first integrals and their Hamiltonian fields.
#[derive(Debug, Clone)]
pub struct CompanionSystem {
    pub label: String,
    pub sigma: Vec<Polynomial>,
    pub l: OperatorField,
    pub h: Vec<PhaseFunction>,
    pub gram: GramMatrix,
    pub killing: Vec<OperatorField>,
    pub integrals: Vec<PhaseFunction>,
    pub fields: Vec<HamiltonianField>,
}

impl CompanionSystem {
    pub fn new(label: impl Into<String>, sigma: Vec<Polynomial>) -> Result<Self, SystemError> {
        let l = companion_second(&sigma)?;
        let h = build_h_family(&sigma)?;
        let gram = gram_matrix(&h[0])?;
        let killing = killing_operators(&l);
        let integrals = first_integrals(&gram, &killing)?;
        let fields = integrals.iter().map(hamiltonian_rhs).collect();
        Ok(CompanionSystem {
            label: label.into(),
            sigma,
            l,
            h,
            gram,
            killing,
            integrals,
            fields,
        })
    }

    /// Parses `σ_1..σ_n` over `u1..un`.
    pub fn parse<S: AsRef<str>>(
        label: impl Into<String>,
        sigma: &[S],
    ) -> Result<Self, SystemError> {
        let names = u_names(sigma.len());
        let sigma = sigma
            .iter()
            .enumerate()
            .map(|(index, s)| {
                parse_expression(s.as_ref(), &names)
                    .map_err(|source| SystemError::Parse { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        CompanionSystem::new(label, sigma)
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    /// Orbit grid of the first integrals, tagged with this system's label.
    pub fn orbit_grid(
        &self,
        z0: &CotangentPoint,
        axes: &[AxisSpec],
        settings: &IntegratorSettings,
    ) -> Result<SolutionGrid, FlowError> {
        let mut grid = orbit_grid(&self.fields, z0, axes, settings)?;
        grid.meta.fixture = self.label.clone();
        Ok(grid)
    }

    /// Lattice with spacing close to `delta` on every axis: `x ∈ x_range`,
    /// `t_k ∈ t_ranges[k−1]`.
    pub fn lattice(x_range: (f64, f64), t_ranges: &[(f64, f64)], delta: f64) -> Vec<AxisSpec> {
        std::iter::once(x_range)
            .chain(t_ranges.iter().copied())
            .map(|(a, b)| {
                let count = ((b - a) / delta).round().max(1.0) as usize + 1;
                AxisSpec {
                    min: a,
                    max: b,
                    count,
                }
            })
            .collect()
    }

    /// Finite-difference residuals of `u_{t_k} = A_k u_x` on the orbit grid of
    /// spacing `delta` through `z0`.
    pub fn orbit_residual(
        &self,
        z0: &CotangentPoint,
        x_range: (f64, f64),
        t_ranges: &[(f64, f64)],
        delta: f64,
        settings: &IntegratorSettings,
    ) -> Result<Vec<f64>, PdeError> {
        let axes = CompanionSystem::lattice(x_range, t_ranges, delta);
        let grid = self.orbit_grid(z0, &axes, settings)?;
        grid_residual(&grid, &self.killing)
    }

    /// Solves `u_{t_1} = A_1 u_x` directly from the `t = 0` line of the orbit
    /// grid through `z0` and returns the largest deviation from the orbit
    /// grid on the shared nodes.
    pub fn direct_vs_orbit(
        &self,
        z0: &CotangentPoint,
        x_range: (f64, f64),
        t_end: f64,
        dx: f64,
        settings: &IntegratorSettings,
        direct: &DirectSettings,
    ) -> Result<f64, PdeError> {
        if self.n() < 2 {
            return Err(PdeError::DimensionMismatch {
                expected: 2,
                found: self.n(),
            });
        }
        let x_axis = CompanionSystem::lattice(x_range, &[], dx)[0];
        let mut axes = vec![x_axis, AxisSpec::point(0.0)];
        axes.extend((2..self.n()).map(|_| AxisSpec::point(0.0)));
        let line = self.orbit_grid(z0, &axes, settings)?;
        let initial: Vec<Vec<f64>> = line.u.clone();
        let solved = direct_solve(&self.killing[1], &initial, &x_axis, t_end, direct)?;
        let t_axis = solved.axes[1];
        axes[1] = t_axis;
        let mut orbit = self.orbit_grid(z0, &axes, settings)?;
        // Trailing single-node axes do not change the flattening.
        orbit.axes.truncate(2);
        orbit.axis_names.truncate(2);
        grid_deviation(&solved, &orbit)
    }
}

/// Constant characteristic coefficients `σ_k = k + 1` in dimension `n`.
pub fn e0(n: usize) -> CompanionSystem {
    let sigma = (1..=n as i64)
        .map(|k| Polynomial::from_int(n, k + 1))
        .collect();
    CompanionSystem::new("E0", sigma).expect("constant fixture")
}

/// `σ = (u1, u2 − ½u1²)`: a Nijenhuis companion operator.
pub fn e2() -> CompanionSystem {
    CompanionSystem::parse("E2", &["u1", "u2 - 1/2*u1^2"]).expect("fixture parses")
}

/// `σ = (u1, u2)`: companion form with nonzero torsion.
pub fn x2() -> CompanionSystem {
    CompanionSystem::parse("X2", &["u1", "u2"]).expect("fixture parses")
}

/// Default initial point of the reference flows: hyperbolic for E2.
pub fn default_initial_point(n: usize) -> CotangentPoint {
    let mut u = vec![0.0; n];
    let mut p = vec![0.0; n];
    if n >= 1 {
        u[0] = 0.2;
        p[0] = 0.3;
    }
    if n >= 2 {
        u[1] = 1.0;
        p[1] = -0.2;
    }
    CotangentPoint::new(u, p).expect("finite")
}
