use std::f64::consts::PI;

use boussinesq_core::adjoint::objective_and_gradient;
use boussinesq_core::field::discrete_l2_norm;
use boussinesq_core::forward::{solve_forward, trajectory_to_conserved, ForwardProblem, NewtonConfig};
use boussinesq_core::green::solve_linear_integral;
use boussinesq_core::objective::{eval_objective, Measurement, ObjectiveSpec, ObjectiveVariant};
use boussinesq_core::presets::{coefficient_fn, initial_fn};
use boussinesq_core::{ModelParams, ScalarField, SpatialMesh, TimeGrid, WaveState};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOutcome {
    pub worst_rel_error: f64,
    pub worst_node: usize,
    pub n_nodes: usize,
}

fn bump(c: f64, w: f64) -> impl Fn(f64) -> f64 {
    move |x| (-(x - c) * (x - c) / w).exp()
}

fn zero_ends(f: ScalarField) -> Result<ScalarField> {
    let mesh = *f.mesh();
    let mut v = f.into_values();
    let n = v.len();
    v[0] = 0.0;
    v[n - 1] = 0.0;
    Ok(ScalarField::new(mesh, v)?)
}

/// 40 cells, 20 steps on [0, 10]; data and coefficient keep every gradient entry well away from zero.
pub fn small_problem(alpha_tilde: f64, variant: ObjectiveVariant, alpha: f64) -> Result<(ForwardProblem, ObjectiveSpec)> {
    let mesh = SpatialMesh::new(0.0, 10.0, 40)?;
    let grid = TimeGrid::new(2.0, 20)?;
    let coeff = ScalarField::from_fn(mesh, |x| 1.0 + 0.3 * bump(5.0, 2.0)(x) - 0.1 * (0.7 * x).cos())?;
    let init = WaveState::new(
        ScalarField::from_fn(mesh, |x| (PI * x / 10.0).sin() * (0.5 + bump(5.0, 1.0)(x)))?,
        ScalarField::from_fn(mesh, |x| 0.4 * (2.0 * PI * x / 10.0).sin())?,
    )?;
    let p = ForwardProblem::new(ModelParams::new(0.1, alpha_tilde)?, grid, coeff, init)?;
    let meas = Measurement::new(
        zero_ends(ScalarField::from_fn(mesh, |x| 0.8 * bump(5.5, 1.0)(x))?)?,
        zero_ends(ScalarField::from_fn(mesh, |x| 0.5 * bump(6.0, 0.7)(x))?)?,
    )?;
    Ok((p, ObjectiveSpec::with_eps(variant, alpha, meas, 1e-2)?))
}

/// Central differences with step `1e-5 (1 + |M_j|)` against the discrete adjoint gradient.
///
/// The relative error at node j is `|fd - g| / (max(|fd|, |g|) + 1e-8 |g|_inf)`.
pub fn fd_gradient_check(problem: &ForwardProblem, spec: &ObjectiveSpec, newton: &NewtonConfig) -> Result<GradCheckOutcome> {
    let (_, g) = objective_and_gradient(spec, problem, newton)?;
    let g = g.values.into_values();
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let m0 = problem.coeff().values().to_vec();
    let mesh = *problem.mesh();
    let eval = |c: Vec<f64>| -> Result<f64> {
        let c = ScalarField::new(mesh, c)?;
        let q = problem.with_coeff(c.clone())?;
        let traj = solve_forward(&q, newton)?;
        Ok(eval_objective(spec, traj.last(), &c)?)
    };
    let mut out = GradCheckOutcome { worst_rel_error: 0.0, worst_node: 0, n_nodes: m0.len() };
    for j in 0..m0.len() {
        let eps = 1e-5 * (1.0 + m0[j].abs());
        let mut plus = m0.clone();
        plus[j] += eps;
        let mut minus = m0.clone();
        minus[j] -= eps;
        let fd = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let rel = (fd - g[j]).abs() / (fd.abs().max(g[j].abs()) + 1e-8 * gmax);
        if rel > out.worst_rel_error {
            out.worst_rel_error = rel;
            out.worst_node = j;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub n_cells: Vec<usize>,
    /// L2 distance between the two final states at each level.
    pub differences: Vec<f64>,
    /// Observed orders between consecutive levels.
    pub orders: Vec<f64>,
}

/// Final-state distance between the FEM scheme and the Green-integral solver in conserved variables.
pub fn oracle_difference(beta: f64, c: &ScalarField, init: &WaveState, grid: &TimeGrid) -> Result<f64> {
    let p = ForwardProblem::from_conserved(beta, *grid, c, init)?;
    let fem = trajectory_to_conserved(&solve_forward(&p, &NewtonConfig::default())?, p.coeff())?;
    let green = solve_linear_integral(&ModelParams::linear(beta)?, c, init, grid)?;
    let d = fem.last().sub(green.last())?;
    Ok((discrete_l2_norm(&d.eta)?.powi(2) + discrete_l2_norm(&d.vel)?.powi(2)).sqrt())
}

/// Runs the oracle comparison for the config's linear model under `levels` (dx, dt) halvings.
///
/// `c = 1/M` for the config's coefficient and `(N0, V0) = (M eta0, u0)`.
pub fn oracle_compare(cfg: &ExperimentConfig, levels: usize) -> Result<OracleComparison> {
    if cfg.model.alpha_tilde != 0.0 {
        return Err(HarnessError::Config("the integral oracle covers the linear model only".into()));
    }
    let m_fn = coefficient_fn(&cfg.coefficient_preset)?;
    let i_fn = initial_fn(&cfg.initial_preset)?;
    let base_mesh = cfg.spatial_mesh()?;
    let base_grid = cfg.time_grid()?;
    let mut out = OracleComparison { n_cells: Vec::new(), differences: Vec::new(), orders: Vec::new() };
    for level in 0..levels {
        let k = 1 << level;
        let mesh = base_mesh.refined(k);
        let grid = base_grid.refined(k);
        let c = ScalarField::from_fn(mesh, |x| 1.0 / m_fn(x))?;
        let init = WaveState::new(
            ScalarField::from_fn(mesh, |x| m_fn(x) * i_fn(x))?,
            ScalarField::from_fn(mesh, i_fn)?,
        )?;
        out.n_cells.push(mesh.n_cells());
        out.differences.push(oracle_difference(cfg.model.beta, &c, &init, &grid)?);
    }
    out.orders = out.differences.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(out)
}
