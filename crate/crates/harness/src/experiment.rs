use std::fmt;
use std::time::Instant;

use boussinesq_core::adjoint::objective_and_gradient;
use boussinesq_core::forward::{solve_forward, ForwardProblem};
use boussinesq_core::objective::{misfit_error, Measurement, ObjectiveSpec};
use boussinesq_core::optim::{minimize_with_observer, IterateRecord};
use boussinesq_core::presets::{coefficient_preset, initial_fn};
use boussinesq_core::{ScalarField, WaveState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Measurement,
    Noise,
    Optimization,
    Evaluation,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Measurement => "measurement",
            Stage::Noise => "noise",
            Stage::Optimization => "optimization",
            Stage::Evaluation => "evaluation",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub objective: f64,
    pub pg_norm: f64,
    pub step_len: f64,
}

impl From<&IterateRecord> for HistoryRow {
    fn from(r: &IterateRecord) -> Self {
        Self { iter: r.iter, objective: r.objective, pg_norm: r.pg_norm, step_len: r.step_len }
    }
}

/// Outcome of one reconstruction; nodal arrays are empty when a stage failed early.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub config: ExperimentConfig,
    pub failure: Option<StageFailure>,
    pub xi: Vec<f64>,
    pub exact: Vec<f64>,
    pub recovered: Vec<f64>,
    pub initial: Vec<f64>,
    pub l2_error: f64,
    pub iterations_used: usize,
    pub termination: String,
    pub history: Vec<HistoryRow>,
    /// l2 error of the iterate after each accepted step, aligned with `history`.
    pub error_history: Vec<f64>,
    pub final_eta: Vec<f64>,
    pub final_u: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub wall_time_s: f64,
}

impl ReconstructionReport {
    fn failed(config: ExperimentConfig, stage: Stage, err: impl fmt::Display, started: Instant) -> Self {
        Self {
            config,
            failure: Some(StageFailure { stage, message: err.to_string() }),
            xi: Vec::new(),
            exact: Vec::new(),
            recovered: Vec::new(),
            initial: Vec::new(),
            l2_error: f64::NAN,
            iterations_used: 0,
            termination: "failed".into(),
            history: Vec::new(),
            error_history: Vec::new(),
            final_eta: Vec::new(),
            final_u: Vec::new(),
            m1: Vec::new(),
            m2: Vec::new(),
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    /// Error after `iter` accepted steps, or the last one if the run stopped earlier.
    pub fn error_at(&self, iter: usize) -> f64 {
        match self.error_history.get(iter).or(self.error_history.last()) {
            Some(&e) => e,
            None => f64::NAN,
        }
    }

    pub fn final_objective(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.objective)
    }
}

fn forward_problem(cfg: &ExperimentConfig) -> Result<(ForwardProblem, ScalarField)> {
    let mesh = cfg.spatial_mesh()?;
    let exact = coefficient_preset(&cfg.coefficient_preset, &mesh)?;
    let f = initial_fn(&cfg.initial_preset)?;
    let i0 = ScalarField::from_fn(mesh, f)?;
    let init = WaveState::new(i0.clone(), i0)?;
    let p = ForwardProblem::new(cfg.model_params()?, cfg.time_grid()?, exact.clone(), init)?;
    Ok((p, exact))
}

/// Final-time state of the forward solve with the exact coefficient.
pub fn synthesize_measurements(cfg: &ExperimentConfig) -> Result<Measurement> {
    let (p, _) = forward_problem(cfg)?;
    let traj = solve_forward(&p, &cfg.newton_config()?)?;
    Ok(Measurement::from_state(traj.last())?)
}

/// Adds i.i.d. N(0, sigma^2) samples to both components at interior nodes inside `[a, b]`.
pub fn add_noise(m: &Measurement, sigma: f64, interval: [f64; 2], seed: u64) -> Result<Measurement> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(HarnessError::Config("noise sigma must be nonnegative".into()));
    }
    if sigma == 0.0 {
        return Ok(m.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = *m.m1.mesh();
    let n = mesh.n_nodes();
    let [a, b] = interval;
    let mut perturb = |f: &ScalarField| {
        let mut v = f.values().to_vec();
        for (j, x) in v.iter_mut().enumerate().take(n - 1).skip(1) {
            let xi = mesh.node(j);
            if xi >= a && xi <= b {
                *x += normal.sample(&mut rng);
            }
        }
        ScalarField::new(mesh, v)
    };
    let m1 = perturb(&m.m1)?;
    let m2 = perturb(&m.m2)?;
    Ok(Measurement::new(m1, m2)?)
}

/// Synthesizes data, minimizes from `M = 1` and compares with the exact coefficient.
pub fn run_experiment(cfg: &ExperimentConfig) -> ReconstructionReport {
    run_experiment_with(cfg, |_, _| {})
}

/// As [`run_experiment`], calling `progress(record, l2_error)` after each accepted step.
pub fn run_experiment_with(cfg: &ExperimentConfig, mut progress: impl FnMut(&IterateRecord, f64)) -> ReconstructionReport {
    let started = Instant::now();
    let cfg = cfg.clone();
    macro_rules! stage {
        ($stage:expr, $e:expr) => {
            match $e {
                Ok(v) => v,
                Err(err) => return ReconstructionReport::failed(cfg, $stage, err, started),
            }
        };
    }
    stage!(Stage::Config, cfg.validate());
    let (problem, exact) = stage!(Stage::Config, forward_problem(&cfg));
    let newton = stage!(Stage::Config, cfg.newton_config());
    let mesh = *problem.mesh();
    let set = stage!(Stage::Config, cfg.admissible_set(mesh.n_nodes()));

    let clean = stage!(Stage::Measurement, synthesize_measurements(&cfg));
    let meas = match &cfg.noise {
        Some(n) => stage!(Stage::Noise, add_noise(&clean, n.sigma, n.interval, n.seed)),
        None => clean,
    };
    let spec = stage!(
        Stage::Config,
        ObjectiveSpec::with_eps(cfg.objective_variant(), cfg.objective.alpha, meas.clone(), cfg.objective.l1_eps)
    );

    let x0 = ScalarField::constant(mesh, 1.0);
    let mut errors = Vec::new();
    let result = minimize_with_observer(
        |c| objective_and_gradient(&spec, &problem.with_coeff(c.clone())?, &newton),
        &x0,
        &set,
        &cfg.optim.to_core(),
        |rec, x| {
            let e = misfit_error(x, &exact).unwrap_or(f64::NAN);
            errors.push(e);
            progress(rec, e);
        },
    );
    let result = stage!(Stage::Optimization, result);

    let l2_error = stage!(Stage::Evaluation, misfit_error(&result.x, &exact));
    let recovered = stage!(Stage::Evaluation, problem.with_coeff(result.x.clone()));
    let traj = stage!(Stage::Evaluation, solve_forward(&recovered, &newton));
    let last = traj.last();
    ReconstructionReport {
        failure: None,
        xi: mesh.nodes(),
        exact: exact.values().to_vec(),
        recovered: result.x.values().to_vec(),
        initial: x0.values().to_vec(),
        l2_error,
        iterations_used: result.iterations(),
        termination: result.termination.as_str().into(),
        history: result.history.iter().map(HistoryRow::from).collect(),
        error_history: errors,
        final_eta: last.eta.values().to_vec(),
        final_u: last.vel.values().to_vec(),
        m1: meas.m1.values().to_vec(),
        m2: meas.m2.values().to_vec(),
        wall_time_s: started.elapsed().as_secs_f64(),
        config: cfg,
    }
}
