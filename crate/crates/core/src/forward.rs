//! Theta-scheme time stepping of the nonlinear Boussinesq system
//!
//! ```text
//! M eta_t + [(1 + a eta/M) u]_xi - (beta/6) (M eta_t)_xixi = 0
//! u_t + eta_xi + (a/2) [(u/M)^2]_xi - (beta/6) u_xixit     = 0
//! ```
//!
//! with homogeneous Dirichlet data, `a = alpha_tilde`. In weak form with P1
//! elements and `H = mass + (beta/6) stiff`:
//!
//! ```text
//! H d/dt (M eta) = D [u + a eta u / M]
//! H d/dt u       = D [eta + (a/2) (u/M)^2]
//! ```
//!
//! where `D_ij = int phi_j phi_i'` and the bracketed fluxes are nodal values
//! interpolated in P1. With `a = 0` and `N = M eta`, `V = u`, `c = 1/M` this is
//! the linear system `H N_t = D V`, `H V_t = D (c N)`.
//!
//! Unknowns are the interior nodal pairs `(eta_i, u_i)`, so every implicit
//! solve is block tridiagonal with 2x2 blocks.

use alloc::vec::Vec;

use crate::fem::{derivative_matrix, mass_matrix, stiffness_matrix, TriDiagMatrix};
use crate::field::{ScalarField, Trajectory, WaveState};
use crate::linalg::{Block, BlockTriDiag, BlockTriFactor, Pair, ZERO_BLOCK};
use crate::math::{abs, max_abs};
use crate::mesh::{SpatialMesh, TimeGrid};
use crate::params::ModelParams;
use crate::{Error, Result};

/// Smallest admissible value of the coefficient `M`.
pub const COEFF_FLOOR: f64 = 1e-6;

/// Initial values larger than this at a boundary node violate the Dirichlet data.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub max_iters: usize,
}

impl NewtonConfig {
    pub fn new(abs_tol: f64, max_iters: usize) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::param("abs_tol", "must be positive"));
        }
        if max_iters == 0 {
            return Err(Error::param("max_iters", "need at least one iteration"));
        }
        Ok(Self { abs_tol, max_iters })
    }
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_iters: 25,
        }
    }
}

/// Everything needed to march from the initial state to `t_final`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardProblem {
    params: ModelParams,
    mesh: SpatialMesh,
    grid: TimeGrid,
    coeff: ScalarField,
    init: WaveState,
}

impl ForwardProblem {
    /// Boundary values of `init` below 1e-12 in magnitude are set to zero;
    /// larger ones are rejected.
    pub fn new(
        params: ModelParams,
        grid: TimeGrid,
        coeff: ScalarField,
        init: WaveState,
    ) -> Result<Self> {
        let mesh = *coeff.mesh();
        coeff.check_mesh(&init.eta)?;
        check_coeff(&coeff)?;
        let init = WaveState::new(
            clean_boundary(&init.eta)?,
            clean_boundary(&init.vel)?,
        )?;
        Ok(Self {
            params,
            mesh,
            grid,
            coeff,
            init,
        })
    }

    /// Linear problem posed in the variables `(N, V)` with speed coefficient
    /// `c`; internally `M = 1/c` and `eta = c N`.
    pub fn from_conserved(
        beta: f64,
        grid: TimeGrid,
        c: &ScalarField,
        init_conserved: &WaveState,
    ) -> Result<Self> {
        if c.values().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::param("c", "speed coefficient must be positive"));
        }
        let m = c.map(|v| 1.0 / v)?;
        let init = change_of_variables(&init_conserved.eta, &init_conserved.vel, &m)?;
        Self::new(ModelParams::linear(beta)?, grid, m, init)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn coeff(&self) -> &ScalarField {
        &self.coeff
    }

    pub fn init(&self) -> &WaveState {
        &self.init
    }

    /// Same problem with another coefficient.
    pub fn with_coeff(&self, coeff: ScalarField) -> Result<Self> {
        Self::new(self.params, self.grid, coeff, self.init.clone())
    }

    /// Same problem with other initial data.
    pub fn with_init(&self, init: WaveState) -> Result<Self> {
        Self::new(self.params, self.grid, self.coeff.clone(), init)
    }

    pub fn with_grid(&self, grid: TimeGrid) -> Result<Self> {
        Self::new(self.params, grid, self.coeff.clone(), self.init.clone())
    }
}

fn check_coeff(coeff: &ScalarField) -> Result<()> {
    if coeff.values().iter().any(|&v| !(v >= COEFF_FLOOR)) {
        return Err(Error::param("coeff", "coefficient below the positivity floor"));
    }
    Ok(())
}

fn clean_boundary(f: &ScalarField) -> Result<ScalarField> {
    let mut v = f.values().to_vec();
    let last = v.len() - 1;
    for j in [0, last] {
        if abs(v[j]) > BOUNDARY_SLACK {
            return Err(Error::param("init", "initial data violate the Dirichlet conditions"));
        }
        v[j] = 0.0;
    }
    ScalarField::new(*f.mesh(), v)
}

/// Discrete operators and per-step algebra shared by the forward and adjoint sweeps.
pub(crate) struct Stepper<'a> {
    pub(crate) m: &'a [f64],
    pub(crate) h: TriDiagMatrix,
    pub(crate) d: TriDiagMatrix,
    pub(crate) dt: f64,
    pub(crate) theta: f64,
    pub(crate) a: f64,
    n: usize,
}

/// Nodal state `(eta, u)` on all nodes, boundary entries zero.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NodalState {
    pub(crate) eta: Vec<f64>,
    pub(crate) u: Vec<f64>,
}

impl NodalState {
    pub(crate) fn from_wave(s: &WaveState) -> Self {
        Self {
            eta: s.eta.values().to_vec(),
            u: s.vel.values().to_vec(),
        }
    }

    pub(crate) fn to_wave(&self, mesh: SpatialMesh) -> Result<WaveState> {
        WaveState::new(
            ScalarField::new(mesh, self.eta.clone())?,
            ScalarField::new(mesh, self.u.clone())?,
        )
    }
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(problem: &'a ForwardProblem) -> Self {
        let mesh = problem.mesh();
        let beta = problem.params().beta();
        let h = mass_matrix(mesh).axpy(beta / 6.0, &stiffness_matrix(mesh));
        Self {
            m: problem.coeff().values(),
            h,
            d: derivative_matrix(mesh),
            dt: problem.grid().dt(),
            theta: problem.grid().theta(),
            a: problem.params().alpha_tilde(),
            n: mesh.n_nodes(),
        }
    }

    fn interior(&self) -> usize {
        self.n - 2
    }

    /// Nodal `(M eta, u, u + a eta u/M, eta + (a/2)(u/M)^2)`.
    fn nodal(&self, x: &NodalState) -> Vec<[f64; 4]> {
        let a = self.a;
        (0..self.n)
            .map(|j| {
                let r = x.u[j] / self.m[j];
                [
                    x.eta[j] * self.m[j],
                    x.u[j],
                    x.u[j] + a * x.eta[j] * x.u[j] / self.m[j],
                    x.eta[j] + 0.5 * a * r * r,
                ]
            })
            .collect()
    }

    /// Row `i` of `(H Me, H u, D f1, D f2)`.
    fn row(&self, q: &[[f64; 4]], i: usize) -> [f64; 4] {
        let (h, d) = (&self.h, &self.d);
        let mut out = [0.0; 4];
        for c in 0..4 {
            let b = if c < 2 { h } else { d };
            let mut acc = b.diag[i] * q[i][c];
            if i > 0 {
                acc += b.sub[i] * q[i - 1][c];
            }
            if i + 1 < self.n {
                acc += b.sup[i] * q[i + 1][c];
            }
            out[c] = acc;
        }
        out
    }

    /// Known part of the step equation: `U(x_n) + dt (1-theta) F(x_n)`.
    pub(crate) fn explicit_part(&self, x: &NodalState) -> (Vec<f64>, Vec<f64>) {
        let q = self.nodal(x);
        let w = self.dt * (1.0 - self.theta);
        let explicit = self.theta < 1.0;
        let mut s1 = Vec::with_capacity(self.n);
        let mut s2 = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let r = self.row(&q, i);
            if explicit {
                s1.push(r[0] + w * r[2]);
                s2.push(r[1] + w * r[3]);
            } else {
                s1.push(r[0]);
                s2.push(r[1]);
            }
        }
        (s1, s2)
    }

    /// Interior residual `U(x) - dt theta F(x) - old`.
    fn residual(&self, x: &NodalState, old: &(Vec<f64>, Vec<f64>)) -> Vec<Pair> {
        let q = self.nodal(x);
        let w = self.dt * self.theta;
        (1..self.n - 1)
            .map(|i| {
                let r = self.row(&q, i);
                [r[0] - w * r[2] - old.0[i], r[1] - w * r[3] - old.1[i]]
            })
            .collect()
    }

    /// Interior Jacobian of `U(x) - s F(x)` with respect to `(eta, u)`.
    pub(crate) fn jacobian(&self, x: &NodalState, s: f64) -> BlockTriDiag {
        let ni = self.interior();
        let a = self.a;
        // per node: (M, a u/M, 1 + a eta/M, a u/M^2)
        let q: Vec<[f64; 4]> = (0..self.n)
            .map(|j| {
                let inv = 1.0 / self.m[j];
                let au = a * x.u[j] * inv;
                [self.m[j], au, 1.0 + a * x.eta[j] * inv, au * inv]
            })
            .collect();
        let block = |hij: f64, bij: f64, j: usize| -> Block {
            let [mj, au, ae, au2] = q[j];
            [[hij * mj - s * bij * au, -s * bij * ae], [-s * bij, hij - s * bij * au2]]
        };
        let (h, d) = (&self.h, &self.d);
        let mut lower = Vec::with_capacity(ni);
        let mut diag = Vec::with_capacity(ni);
        let mut upper = Vec::with_capacity(ni);
        for k in 0..ni {
            let i = k + 1;
            lower.push(if k > 0 { block(h.sub[i], d.sub[i], i - 1) } else { ZERO_BLOCK });
            diag.push(block(h.diag[i], d.diag[i], i));
            upper.push(if k + 1 < ni { block(h.sup[i], d.sup[i], i + 1) } else { ZERO_BLOCK });
        }
        BlockTriDiag { lower, diag, upper }
    }

    fn apply_update(x: &mut NodalState, delta: &[Pair]) {
        for (k, d) in delta.iter().enumerate() {
            x.eta[k + 1] += d[0];
            x.u[k + 1] += d[1];
        }
    }

    /// Newton solve for the next state starting from `guess`.
    fn newton_step(
        &self,
        x_n: &NodalState,
        guess: NodalState,
        newton: &NewtonConfig,
        step: usize,
    ) -> Result<NodalState> {
        let old = self.explicit_part(x_n);
        let mut x = guess;
        let mut res_norm = f64::INFINITY;
        for it in 0..newton.max_iters {
            let r = self.residual(&x, &old);
            res_norm = pair_max_abs(&r);
            if !res_norm.is_finite() {
                break;
            }
            if res_norm <= newton.abs_tol {
                return Ok(x);
            }
            let jac = self.jacobian(&x, self.dt * self.theta);
            let neg: Vec<Pair> = r.iter().map(|p| [-p[0], -p[1]]).collect();
            let delta = jac.solve(&neg).map_err(|_| Error::StepFailure {
                step,
                residual: res_norm,
                iterations: it,
            })?;
            Self::apply_update(&mut x, &delta);
        }
        let r = self.residual(&x, &old);
        let final_norm = pair_max_abs(&r);
        if final_norm.is_finite() && final_norm <= newton.abs_tol {
            return Ok(x);
        }
        Err(Error::StepFailure {
            step,
            residual: if final_norm.is_finite() { final_norm } else { res_norm },
            iterations: newton.max_iters,
        })
    }

    /// One Newton update with a prefactored constant Jacobian; exact when `a = 0`.
    fn linear_step(&self, x_n: &NodalState, factor: &BlockTriFactor) -> NodalState {
        let old = self.explicit_part(x_n);
        let r = self.residual(x_n, &old);
        let neg: Vec<Pair> = r.iter().map(|p| [-p[0], -p[1]]).collect();
        let delta = factor.solve(&neg);
        let mut x = x_n.clone();
        Self::apply_update(&mut x, &delta);
        x
    }
}

/// `2 x1 - x0`
fn extrapolate(x0: &NodalState, x1: &NodalState) -> NodalState {
    let lin = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| 2.0 * q - p).collect();
    NodalState { eta: lin(&x0.eta, &x1.eta), u: lin(&x0.u, &x1.u) }
}

fn pair_max_abs(r: &[Pair]) -> f64 {
    let mut m = 0.0f64;
    for p in r {
        for v in p {
            if !v.is_finite() {
                return f64::NAN;
            }
            m = m.max(abs(*v));
        }
    }
    m
}

/// Advances `state_n` by one time step.
pub fn step_theta(
    problem: &ForwardProblem,
    state_n: &WaveState,
    newton: &NewtonConfig,
) -> Result<WaveState> {
    if state_n.mesh() != problem.mesh() {
        return Err(Error::Configuration("state and problem live on different meshes"));
    }
    let stepper = Stepper::new(problem);
    let x = NodalState::from_wave(state_n);
    stepper.newton_step(&x, x.clone(), newton, 0)?.to_wave(*problem.mesh())
}

/// Full trajectory `states[0..=n_steps]`.
///
/// For `alpha_tilde = 0` the step matrix is factored once and reused; this
/// performs exactly the first Newton update of the general path.
pub fn solve_forward(problem: &ForwardProblem, newton: &NewtonConfig) -> Result<Trajectory> {
    let states = march(problem, newton)?;
    let mesh = *problem.mesh();
    let waves = states
        .iter()
        .map(|s| s.to_wave(mesh))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(*problem.grid(), waves)
}

pub(crate) fn march(problem: &ForwardProblem, newton: &NewtonConfig) -> Result<Vec<NodalState>> {
    let stepper = Stepper::new(problem);
    let n_steps = problem.grid().n_steps();
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(NodalState::from_wave(problem.init()));
    if problem.params().is_linear() {
        let jac = stepper.jacobian(&states[0], stepper.dt * stepper.theta);
        let factor = jac.factor().map_err(|_| Error::StepFailure {
            step: 1,
            residual: f64::NAN,
            iterations: 0,
        })?;
        for k in 0..n_steps {
            let next = stepper.linear_step(&states[k], &factor);
            if !(max_abs(&next.eta).is_finite() && max_abs(&next.u).is_finite()) {
                return Err(Error::Instability { step: k + 1 });
            }
            states.push(next);
        }
    } else {
        for k in 0..n_steps {
            let guess = match k {
                0 => states[0].clone(),
                _ => extrapolate(&states[k - 1], &states[k]),
            };
            let next = stepper.newton_step(&states[k], guess, newton, k + 1)?;
            states.push(next);
        }
    }
    Ok(states)
}

/// Maps `(N, V)` to `(eta, u) = (N/M, V)`.
pub fn change_of_variables(n: &ScalarField, v: &ScalarField, m: &ScalarField) -> Result<WaveState> {
    check_coeff(m)?;
    WaveState::new(n.zip_with(m, |a, b| a / b)?, v.clone())
}

/// Inverse of [`change_of_variables`]: `(N, V) = (M eta, u)`.
pub fn to_conserved(state: &WaveState, m: &ScalarField) -> Result<WaveState> {
    check_coeff(m)?;
    WaveState::new(state.eta.zip_with(m, |a, b| a * b)?, state.vel.clone())
}

/// Applies [`to_conserved`] to every time level.
pub fn trajectory_to_conserved(traj: &Trajectory, m: &ScalarField) -> Result<Trajectory> {
    let states = traj
        .states()
        .iter()
        .map(|s| to_conserved(s, m))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(*traj.grid(), states)
}
