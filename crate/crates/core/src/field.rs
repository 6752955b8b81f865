//! Nodal fields on a [`SpatialMesh`], wave states, trajectories and the
//! discrete norms used throughout the crate.

use alloc::vec::Vec;

use crate::math::{first_non_finite, sqrt};
use crate::mesh::{SpatialMesh, TimeGrid};
use crate::{Error, Result};

/// One real value per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    mesh: SpatialMesh,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: SpatialMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::Configuration("field length differs from node count"));
        }
        if let Some(index) = first_non_finite(&values) {
            return Err(Error::InvalidField { index });
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: SpatialMesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: SpatialMesh, value: f64) -> Self {
        Self {
            mesh,
            values: alloc::vec![value; mesh.n_nodes()],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(mesh: SpatialMesh, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(mesh, mesh.nodes().into_iter().map(f).collect())
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.mesh, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        self.map(|v| s * v)
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_mesh(other)?;
        Self::new(
            self.mesh,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn check_mesh(&self, other: &ScalarField) -> Result<()> {
        if self.mesh.same_as(&other.mesh) {
            Ok(())
        } else {
            Err(Error::Configuration("fields live on different meshes"))
        }
    }

    pub fn has_zero_boundary(&self) -> bool {
        self.values[0] == 0.0 && self.values[self.values.len() - 1] == 0.0
    }
}

/// Surface displacement (η or N) and velocity (u or V) at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub eta: ScalarField,
    pub vel: ScalarField,
}

impl WaveState {
    pub fn new(eta: ScalarField, vel: ScalarField) -> Result<Self> {
        eta.check_mesh(&vel)?;
        Ok(Self { eta, vel })
    }

    pub fn zeros(mesh: SpatialMesh) -> Self {
        Self {
            eta: ScalarField::zeros(mesh),
            vel: ScalarField::zeros(mesh),
        }
    }

    pub fn mesh(&self) -> &SpatialMesh {
        self.eta.mesh()
    }

    pub fn satisfies_dirichlet(&self) -> bool {
        self.eta.has_zero_boundary() && self.vel.has_zero_boundary()
    }

    /// `sqrt(|eta|_H1^2 + |vel|_H1^2)`, the product-space norm.
    pub fn h1_norm(&self, beta: f64) -> Result<f64> {
        let a = weighted_h1_norm(&self.eta, beta)?;
        let b = weighted_h1_norm(&self.vel, beta)?;
        Ok(sqrt(a * a + b * b))
    }

    /// Product-space weighted H1 inner product.
    pub fn h1_inner(&self, other: &WaveState, beta: f64) -> Result<f64> {
        Ok(h1_inner(&self.eta, &other.eta, beta)? + h1_inner(&self.vel, &other.vel, beta)?)
    }

    pub fn sub(&self, other: &WaveState) -> Result<WaveState> {
        WaveState::new(self.eta.sub(&other.eta)?, self.vel.sub(&other.vel)?)
    }
}

/// All time levels of a solve; `states[k]` sits at `t = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    states: Vec<WaveState>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, states: Vec<WaveState>) -> Result<Self> {
        if states.len() != grid.n_steps() + 1 {
            return Err(Error::Configuration("trajectory needs n_steps + 1 states"));
        }
        Ok(Self { grid, states })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[WaveState] {
        &self.states
    }

    pub fn initial(&self) -> &WaveState {
        &self.states[0]
    }

    pub fn last(&self) -> &WaveState {
        &self.states[self.states.len() - 1]
    }

    pub fn into_states(self) -> Vec<WaveState> {
        self.states
    }

    /// Discrete `L2(0,T; H1) x L2(0,T; H1)` norm: time trapezoid of the
    /// squared product H1 norms, then a square root.
    pub fn h1_time_norm(&self, beta: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (k, s) in self.states.iter().enumerate() {
            let n = s.h1_norm(beta)?;
            acc += self.grid.trapezoid_weight(k) * n * n;
        }
        Ok(sqrt(acc))
    }

    /// Pointwise difference of two trajectories on the same grids.
    pub fn difference(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.grid != other.grid {
            return Err(Error::Configuration("trajectories use different time grids"));
        }
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(self.grid, states)
    }
}

/// `sqrt(sum_j w_j f_j^2 dx)` with trapezoid weights.
pub fn discrete_l2_norm(f: &ScalarField) -> Result<f64> {
    if let Some(index) = first_non_finite(f.values()) {
        return Err(Error::InvalidField { index });
    }
    Ok(sqrt(l2_inner(f, f)?))
}

/// Trapezoid-rule L2 inner product.
pub fn l2_inner(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.check_mesh(b)?;
    let mesh = a.mesh();
    let dx = mesh.dx();
    Ok(a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .map(|(j, (x, y))| mesh.trapezoid_weight(j) * x * y * dx)
        .sum())
}

/// Weighted inner product `<f,g> + (beta/6) <f', g'>` with exact P1 integrals.
pub fn h1_inner(f: &ScalarField, g: &ScalarField, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::param("beta", "must be positive"));
    }
    f.check_mesh(g)?;
    let h = f.mesh().dx();
    let (a, b) = (f.values(), g.values());
    let mut mass = 0.0;
    let mut stiff = 0.0;
    for e in 0..a.len() - 1 {
        let (a0, a1, b0, b1) = (a[e], a[e + 1], b[e], b[e + 1]);
        mass += h / 6.0 * (2.0 * a0 * b0 + a0 * b1 + a1 * b0 + 2.0 * a1 * b1);
        stiff += (a1 - a0) * (b1 - b0) / h;
    }
    Ok(mass + beta / 6.0 * stiff)
}

/// `( int f^2 + (beta/6) int f'^2 )^(1/2)` for the P1 interpolant of `f`.
pub fn weighted_h1_norm(f: &ScalarField, beta: f64) -> Result<f64> {
    if let Some(index) = first_non_finite(f.values()) {
        return Err(Error::InvalidField { index });
    }
    let sq = h1_inner(f, f, beta)?;
    Ok(sqrt(sq.max(0.0)))
}
