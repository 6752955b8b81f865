//! Adjoint states and gradients with respect to the coefficient.
//!
//! Two routes are provided:
//!
//! * the continuous adjoint of the linear system in `(N, V)` form,
//!   `eta_t + c gamma_xi - (beta/6) eta_xixit = 0`,
//!   `gamma_t + eta_xi - (beta/6) gamma_xixit = 0`, marched backward from
//!   `(eta_T, gamma_T)`, with gradient `int_0^T N gamma_xi dt + alpha c`;
//! * the discrete adjoint of the theta-scheme, which is the exact gradient
//!   of the discrete objective for any `alpha_tilde` and is what the
//!   optimizer uses.

use alloc::vec::Vec;

use crate::fem::{mass_matrix, stiffness_matrix, TriDiagMatrix};
use crate::field::{ScalarField, Trajectory, WaveState};
use crate::forward::{march, NewtonConfig, ForwardProblem, NodalState, Stepper};
use crate::linalg::{BlockTriDiag, Pair};
use crate::math::abs;
use crate::mesh::{SpatialMesh, TimeGrid};
use crate::objective::{eval_objective, misfit_gradient, regularizer_gradient, Measurement, ObjectiveSpec};
use crate::optim::project_admissible;
use crate::params::AdmissibleSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub eta_adj: ScalarField,
    pub gamma_adj: ScalarField,
}

impl AdjointState {
    pub fn new(eta_adj: ScalarField, gamma_adj: ScalarField) -> Result<Self> {
        eta_adj.check_mesh(&gamma_adj)?;
        Ok(Self { eta_adj, gamma_adj })
    }

    pub fn zeros(mesh: SpatialMesh) -> Self {
        Self {
            eta_adj: ScalarField::zeros(mesh),
            gamma_adj: ScalarField::zeros(mesh),
        }
    }

    fn as_wave(&self) -> WaveState {
        WaveState {
            eta: self.eta_adj.clone(),
            vel: self.gamma_adj.clone(),
        }
    }
}

/// Adjoint states indexed by forward time: `states[k]` sits at `t = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    grid: TimeGrid,
    states: Vec<AdjointState>,
}

impl AdjointTrajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[AdjointState] {
        &self.states
    }

    /// The same data as a [`Trajectory`] with `(eta, vel) = (eta_adj, gamma_adj)`.
    pub fn as_trajectory(&self) -> Result<Trajectory> {
        Trajectory::new(self.grid, self.states.iter().map(AdjointState::as_wave).collect())
    }
}

/// Gradient with respect to the nodal coefficient values.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub values: ScalarField,
}

/// Solves the continuous adjoint system backward from `final_data`.
///
/// The discretization is the theta-scheme in `tau = T - t` applied to
/// `H W_tau = A^T W`, where `H N_t = A (N, V)` is the forward FEM system; at
/// `theta = 1/2` the H1 pairing of forward and adjoint states is exactly
/// preserved from step to step.
pub fn solve_adjoint(
    c: &ScalarField,
    final_data: &AdjointState,
    beta: f64,
    grid: &TimeGrid,
) -> Result<AdjointTrajectory> {
    c.check_mesh(&final_data.eta_adj)?;
    if !(beta > 0.0) {
        return Err(Error::param("beta", "must be positive"));
    }
    let mesh = *c.mesh();
    let n = mesh.n_nodes();
    let ni = n - 2;
    let h = mass_matrix(&mesh).axpy(beta / 6.0, &stiffness_matrix(&mesh));
    let dtr = crate::fem::derivative_matrix(&mesh).transpose();
    let cv = c.values();
    let dt = grid.dt();
    let theta = grid.theta();

    // H W -/+ s A^T W on interior rows
    let block_matrix = |s: f64| {
        let mut m = BlockTriDiag::zeros(ni);
        for k in 0..ni {
            let i = k + 1;
            for j in i - 1..=i + 1 {
                if j == 0 || j == n - 1 {
                    continue;
                }
                let (hij, dij) = (h.get(i, j), dtr.get(i, j));
                let b = [[hij, -s * cv[i] * dij], [-s * dij, hij]];
                if j + 1 == i {
                    m.lower[k] = b;
                } else if j == i {
                    m.diag[k] = b;
                } else {
                    m.upper[k] = b;
                }
            }
        }
        m
    };
    let lhs = block_matrix(dt * theta).factor()?;
    let rhs_op = block_matrix(-dt * (1.0 - theta));

    let mut w: Vec<Pair> = (1..n - 1)
        .map(|i| [final_data.eta_adj.values()[i], final_data.gamma_adj.values()[i]])
        .collect();
    let to_state = |w: &[Pair]| -> Result<AdjointState> {
        let (a, b) = unpack(w, n);
        AdjointState::new(ScalarField::new(mesh, a)?, ScalarField::new(mesh, b)?)
    };
    let mut states = Vec::with_capacity(grid.n_steps() + 1);
    states.push(to_state(&w)?);
    for _ in 0..grid.n_steps() {
        let r = rhs_op.mul_vec(&w);
        w = lhs.solve(&r);
        states.push(to_state(&w)?);
    }
    states.reverse();
    Ok(AdjointTrajectory { grid: *grid, states })
}

fn unpack(w: &[Pair], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = alloc::vec![0.0; n];
    let mut b = alloc::vec![0.0; n];
    for (k, p) in w.iter().enumerate() {
        a[k + 1] = p[0];
        b[k + 1] = p[1];
    }
    (a, b)
}

/// Nodal P1 derivative: mean of the adjacent element slopes, one-sided at the ends.
fn nodal_slope(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|j| {
            if j == 0 {
                (v[1] - v[0]) / dx
            } else if j == n - 1 {
                (v[n - 1] - v[n - 2]) / dx
            } else {
                (v[j + 1] - v[j - 1]) / (2.0 * dx)
            }
        })
        .collect()
}

/// `int_0^T N gamma_xi dt + alpha c` by the time trapezoid rule.
pub fn gradient_continuous(
    c: &ScalarField,
    forward_traj: &Trajectory,
    adjoint_traj: &AdjointTrajectory,
    alpha: f64,
) -> Result<GradientField> {
    if forward_traj.grid() != adjoint_traj.grid() {
        return Err(Error::Configuration("forward and adjoint trajectories use different time grids"));
    }
    c.check_mesh(&forward_traj.initial().eta)?;
    c.check_mesh(&adjoint_traj.states()[0].eta_adj)?;
    let grid = forward_traj.grid();
    let dx = c.mesh().dx();
    let mut g: Vec<f64> = c.values().iter().map(|&v| alpha * v).collect();
    for (k, (f, a)) in forward_traj.states().iter().zip(adjoint_traj.states()).enumerate() {
        let w = grid.trapezoid_weight(k);
        let slope = nodal_slope(a.gamma_adj.values(), dx);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj += w * f.eta.values()[j] * slope[j];
        }
    }
    Ok(GradientField {
        values: ScalarField::new(*c.mesh(), g)?,
    })
}

/// Derivatives of a function of the final state through the discrete forward map.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivities {
    /// With respect to the nodal coefficient `M`.
    pub coeff: Vec<f64>,
    /// With respect to the initial `eta` (zero at boundary nodes).
    pub init_eta: Vec<f64>,
    /// With respect to the initial `u` (zero at boundary nodes).
    pub init_vel: Vec<f64>,
}

/// One backward sweep of transposed step Jacobians.
///
/// `final_eta`, `final_vel` hold the derivative of the scalar of interest
/// with respect to the final nodal state; boundary entries are ignored.
pub fn discrete_adjoint_sweep(
    problem: &ForwardProblem,
    traj: &Trajectory,
    final_eta: &[f64],
    final_vel: &[f64],
) -> Result<Sensitivities> {
    if traj.grid() != problem.grid() || !traj.initial().mesh().same_as(problem.mesh()) {
        return Err(Error::Configuration("trajectory does not belong to the problem"));
    }
    let states: Vec<NodalState> = traj.states().iter().map(NodalState::from_wave).collect();
    sweep(problem, &states, final_eta, final_vel)
}

struct Pullback {
    dtr: TriDiagMatrix,
}

impl Pullback {
    // grad_j += sign * [mu^T d S(x; s) / d M]_j with S = U - s F
    fn add(&self, st: &Stepper, x: &NodalState, s: f64, mu: &[Pair], sign: f64, grad: &mut [f64]) {
        let n = grad.len();
        let (mu1, mu2) = unpack(mu, n);
        let h1 = st.h.mul_vec(&mu1);
        let a = st.a;
        if a == 0.0 {
            for j in 0..n {
                grad[j] += sign * x.eta[j] * h1[j];
            }
            return;
        }
        let d1 = self.dtr.mul_vec(&mu1);
        let d2 = self.dtr.mul_vec(&mu2);
        for j in 0..n {
            let m = st.m[j];
            let (e, u) = (x.eta[j], x.u[j]);
            grad[j] += sign
                * (e * h1[j] + s * a * (d1[j] * e * u / (m * m) + d2[j] * u * u / (m * m * m)));
        }
    }
}

fn sweep(
    problem: &ForwardProblem,
    states: &[NodalState],
    final_eta: &[f64],
    final_vel: &[f64],
) -> Result<Sensitivities> {
    let st = Stepper::new(problem);
    let n = problem.mesh().n_nodes();
    let n_steps = states.len() - 1;
    let s_new = st.dt * st.theta;
    let s_old = -st.dt * (1.0 - st.theta);
    let pull = Pullback {
        dtr: st.d.transpose(),
    };
    let mut g: Vec<Pair> = (1..n - 1).map(|i| [final_eta[i], final_vel[i]]).collect();
    let mut grad = alloc::vec![0.0; n];

    let linear = if problem.params().is_linear() {
        let fac = st.jacobian(&states[0], s_new).transpose().factor()?;
        Some((fac, st.jacobian(&states[0], s_old).transpose()))
    } else {
        None
    };
    for k in (1..=n_steps).rev() {
        let mu = match &linear {
            Some((fac, _)) => fac.solve(&g),
            None => st
                .jacobian(&states[k], s_new)
                .transpose()
                .solve(&g)
                .map_err(|_| Error::StepFailure {
                    step: k,
                    residual: f64::NAN,
                    iterations: 0,
                })?,
        };
        pull.add(&st, &states[k], s_new, &mu, -1.0, &mut grad);
        pull.add(&st, &states[k - 1], s_old, &mu, 1.0, &mut grad);
        g = match &linear {
            Some((_, old)) => old.mul_vec(&mu),
            None => st.jacobian(&states[k - 1], s_old).transpose().mul_vec(&mu),
        };
    }
    let (init_eta, init_vel) = unpack(&g, n);
    Ok(Sensitivities {
        coeff: grad,
        init_eta,
        init_vel,
    })
}

/// Objective value and its exact discrete gradient with respect to `M`.
pub fn objective_and_gradient(
    spec: &ObjectiveSpec,
    problem: &ForwardProblem,
    newton: &NewtonConfig,
) -> Result<(f64, GradientField)> {
    let states = march(problem, newton)?;
    let mesh = *problem.mesh();
    let last = states[states.len() - 1].to_wave(mesh)?;
    let value = eval_objective(spec, &last, problem.coeff())?;
    let (ge, gu) = misfit_gradient(spec, &last)?;
    let sens = sweep(problem, &states, &ge, &gu)?;
    let reg = regularizer_gradient(spec, problem.coeff());
    let g: Vec<f64> = sens.coeff.iter().zip(&reg).map(|(a, b)| a + b).collect();
    if let Some(index) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation { index });
    }
    Ok((
        value,
        GradientField {
            values: ScalarField::new(mesh, g)?,
        },
    ))
}

pub fn gradient_discrete(
    spec: &ObjectiveSpec,
    problem: &ForwardProblem,
    newton: &NewtonConfig,
) -> Result<GradientField> {
    Ok(objective_and_gradient(spec, problem, newton)?.1)
}

/// Discrete gradient with respect to the speed coefficient `c` of
/// `1/2 |N(T)-m1|_H1^2 + 1/2 |V(T)-m2|_H1^2 + (alpha/2)|c|^2` for the linear
/// system in `(N, V)` form with fixed `(N0, V0)`.
///
/// Returns the objective value and the nodal gradient, comparable to
/// [`gradient_continuous`] after division by the trapezoid weights `w_j dx`.
pub fn conserved_h1_objective_and_gradient(
    beta: f64,
    c: &ScalarField,
    init_conserved: &WaveState,
    grid: &TimeGrid,
    measurement: &Measurement,
    alpha: f64,
) -> Result<(f64, GradientField)> {
    let problem = ForwardProblem::from_conserved(beta, *grid, c, init_conserved)?;
    let mesh = *c.mesh();
    let states = march(&problem, &NewtonConfig::default())?;
    let m = problem.coeff().values();
    let last = &states[states.len() - 1];
    let n_final: Vec<f64> = last.eta.iter().zip(m).map(|(e, mj)| e * mj).collect();
    let gram = mass_matrix(&mesh).axpy(beta / 6.0, &stiffness_matrix(&mesh));
    let r1: Vec<f64> = n_final.iter().zip(measurement.m1.values()).map(|(a, b)| a - b).collect();
    let r2: Vec<f64> = last.u.iter().zip(measurement.m2.values()).map(|(a, b)| a - b).collect();
    let (h1, h2) = (gram.mul_vec(&r1), gram.mul_vec(&r2));
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut value = 0.5 * (dot(&r1, &h1) + dot(&r2, &h2));
    let dx = mesh.dx();
    for (j, cj) in c.values().iter().enumerate() {
        value += 0.5 * alpha * mesh.trapezoid_weight(j) * dx * cj * cj;
    }

    // d/d eta_T through N = M eta, then the sweep, then M = 1/c and eta0 = c N0
    let ge: Vec<f64> = h1.iter().zip(m).map(|(h, mj)| h * mj).collect();
    let sens = sweep(&problem, &states, &ge, &h2)?;
    let cv = c.values();
    let g: Vec<f64> = (0..mesh.n_nodes())
        .map(|j| {
            let dm = sens.coeff[j] + last.eta[j] * h1[j];
            -dm / (cv[j] * cv[j])
                + sens.init_eta[j] * init_conserved.eta.values()[j]
                + alpha * mesh.trapezoid_weight(j) * dx * cv[j]
        })
        .collect();
    Ok((
        value,
        GradientField {
            values: ScalarField::new(mesh, g)?,
        },
    ))
}

/// `|c - P(c - grad)|_inf`, zero exactly at first-order stationary points.
pub fn optimality_residual(c: &ScalarField, grad: &GradientField, set: &AdmissibleSet) -> Result<f64> {
    let trial = c.zip_with(&grad.values, |a, b| a - b)?;
    let p = project_admissible(&trial, set)?;
    Ok(c
        .values()
        .iter()
        .zip(p.values())
        .fold(0.0, |m, (a, b)| m.max(abs(a - b))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;

    fn mesh() -> SpatialMesh {
        SpatialMesh::new(0.0, 10.0, 40).unwrap()
    }

    #[test]
    fn zero_final_data_gives_zero_adjoint() {
        let m = mesh();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let c = ScalarField::from_fn(m, |x| 1.0 + 0.1 * x).unwrap();
        let adj = solve_adjoint(&c, &AdjointState::zeros(m), 0.1, &grid).unwrap();
        assert_eq!(adj.states().len(), 11);
        assert!(adj
            .states()
            .iter()
            .all(|s| s.eta_adj.values().iter().chain(s.gamma_adj.values()).all(|&v| v == 0.0)));
    }

    #[test]
    fn zero_initial_data_gives_regularizer_gradient() {
        let m = mesh();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let c = ScalarField::from_fn(m, |x| 1.0 + 0.1 * x).unwrap();
        let fwd = Trajectory::new(grid, alloc::vec![WaveState::zeros(m); 11]).unwrap();
        let fin = AdjointState::new(
            ScalarField::from_fn(m, |x| libm::sin(x * core::f64::consts::PI / 10.0)).unwrap(),
            ScalarField::zeros(m),
        )
        .unwrap();
        let adj = solve_adjoint(&c, &fin, 0.1, &grid).unwrap();
        let g = gradient_continuous(&c, &fwd, &adj, 0.3).unwrap();
        for (a, b) in g.values.values().iter().zip(c.values()) {
            assert_eq!(*a, 0.3 * b);
        }
    }

    #[test]
    fn optimality_residual_cases() {
        let m = SpatialMesh::new(0.0, 1.0, 4).unwrap();
        let c = ScalarField::constant(m, 1.0);
        let zero = GradientField { values: ScalarField::zeros(m) };
        let free = AdmissibleSet::unconstrained();
        assert_eq!(optimality_residual(&c, &zero, &free).unwrap(), 0.0);
        let g = GradientField {
            values: ScalarField::new(m, alloc::vec![0.0, 0.0, -0.25, 0.0, 0.0]).unwrap(),
        };
        assert_eq!(optimality_residual(&c, &g, &free).unwrap(), 0.25);
        let boxed = AdmissibleSet::uniform_box(5, 1.0, 2.0).unwrap();
        let push = GradientField { values: ScalarField::constant(m, 0.5) };
        assert_eq!(optimality_residual(&c, &push, &boxed).unwrap(), 0.0);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let m = mesh();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let coeff = ScalarField::from_fn(m, |x| 1.0 + 0.2 * libm::exp(-(x - 5.0) * (x - 5.0))).unwrap();
        let bump = ScalarField::from_fn(m, |x| libm::exp(-2.0 * (x - 4.0) * (x - 4.0))).unwrap();
        let init = WaveState::new(bump.clone(), bump.clone()).unwrap();
        for at in [0.0, 0.05] {
            let p = ForwardProblem::new(ModelParams::new(0.1, at).unwrap(), grid, coeff.clone(), init.clone()).unwrap();
            let traj = crate::forward::solve_forward(&p, &NewtonConfig::default()).unwrap();
            let meas = Measurement::from_state(traj.last()).unwrap();
            let spec = ObjectiveSpec::new(crate::objective::ObjectiveVariant::L2Dev1, 0.0, meas).unwrap();
            let (j, g) = objective_and_gradient(&spec, &p, &NewtonConfig::default()).unwrap();
            assert_eq!(j, 0.0);
            assert!(g.values.values().iter().all(|v| v.abs() <= 1e-10));
        }
    }
}
