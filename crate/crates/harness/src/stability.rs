use boussinesq_core::adjoint::conserved_h1_objective_and_gradient;
use boussinesq_core::field::weighted_h1_norm;
use boussinesq_core::forward::{solve_forward, trajectory_to_conserved, ForwardProblem, NewtonConfig};
use boussinesq_core::objective::{misfit_error, Measurement};
use boussinesq_core::optim::{minimize, OptimConfig};
use boussinesq_core::{AdmissibleSet, ScalarField, SpatialMesh, TimeGrid, WaveState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;

/// Short-horizon linear recovery of `c` from perturbed final data.
#[derive(Debug, Clone)]
pub struct StabilityProbe {
    pub beta: f64,
    pub mesh: SpatialMesh,
    pub grid: TimeGrid,
    pub alpha: f64,
    pub deltas: Vec<f64>,
    pub seed: u64,
    pub optim: OptimConfig,
}

impl Default for StabilityProbe {
    fn default() -> Self {
        Self {
            beta: 0.6,
            mesh: SpatialMesh::new(0.0, 10.0, 100).unwrap(),
            grid: TimeGrid::new(1.0, 50).unwrap(),
            alpha: 1e-3,
            deltas: vec![1e-4, 1e-3, 1e-2],
            seed: 2024,
            optim: OptimConfig { ftol: 1e-300, gtol: 1e-13, max_iters: 400, ..OptimConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOutcome {
    pub deltas: Vec<f64>,
    /// `|c~ - c|` in L2 for each delta.
    pub coeff_gaps: Vec<f64>,
    /// Least-squares slope of `ln gap` against `ln delta`.
    pub exponent: f64,
    /// Largest `gap / delta`.
    pub constant: f64,
}

fn bump(c: f64, w: f64) -> impl Fn(f64) -> f64 {
    move |x| (-(x - c) * (x - c) / w).exp()
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

impl StabilityProbe {
    fn random_unit_pair(&self) -> Result<WaveState> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.mesh.n_nodes();
        let mut draw = || -> Result<ScalarField> {
            let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            v[0] = 0.0;
            v[n - 1] = 0.0;
            Ok(ScalarField::new(self.mesh, v)?)
        };
        let (a, b) = (draw()?, draw()?);
        let norm = (weighted_h1_norm(&a, self.beta)?.powi(2) + weighted_h1_norm(&b, self.beta)?.powi(2)).sqrt();
        Ok(WaveState::new(a.scaled(1.0 / norm)?, b.scaled(1.0 / norm)?)?)
    }

    fn recover(&self, init: &WaveState, meas: &Measurement, start: &ScalarField) -> Result<ScalarField> {
        let set = AdmissibleSet::uniform_box(self.mesh.n_nodes(), 0.1, 10.0)?;
        let res = minimize(
            |c| conserved_h1_objective_and_gradient(self.beta, c, init, &self.grid, meas, self.alpha),
            start,
            &set,
            &self.optim,
        )?;
        Ok(res.x)
    }

    pub fn run(&self) -> Result<StabilityOutcome> {
        let mesh = self.mesh;
        let c_true = ScalarField::from_fn(mesh, |x| 1.0 / (1.0 + 0.3 * bump(5.0, 1.5)(x)))?;
        let init = WaveState::new(ScalarField::from_fn(mesh, bump(4.0, 0.5))?, ScalarField::zeros(mesh))?;
        let p = ForwardProblem::from_conserved(self.beta, self.grid, &c_true, &init)?;
        let traj = trajectory_to_conserved(&solve_forward(&p, &NewtonConfig::default())?, p.coeff())?;
        let meas = Measurement::from_state(traj.last())?;
        let c = self.recover(&init, &meas, &ScalarField::constant(mesh, 1.0))?;

        let r = self.random_unit_pair()?;
        let mut gaps = Vec::with_capacity(self.deltas.len());
        for &delta in &self.deltas {
            let m = Measurement::new(meas.m1.add(&r.eta.scaled(delta)?)?, meas.m2.add(&r.vel.scaled(delta)?)?)?;
            let ct = self.recover(&init, &m, &c)?;
            gaps.push(misfit_error(&ct, &c)?);
        }
        let exponent = loglog_slope(&self.deltas, &gaps);
        let constant = gaps.iter().zip(&self.deltas).map(|(g, d)| g / d).fold(0.0, f64::max);
        Ok(StabilityOutcome { deltas: self.deltas.clone(), coeff_gaps: gaps, exponent, constant })
    }
}
