use std::fmt;
use std::path::Path;
use std::str::FromStr;

use boussinesq_core::forward::NewtonConfig;
use boussinesq_core::objective::{ObjectiveVariant, DEFAULT_L1_EPS};
use boussinesq_core::optim::OptimConfig;
use boussinesq_core::presets::{coefficient_fn, initial_fn};
use boussinesq_core::{AdmissibleSet, ModelParams, SpatialMesh, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Iteration-budget runs use this ftol so that the budget, not the stopping rule, ends the run.
pub const BUDGET_FTOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
    Exp4a,
    Exp4b,
    Exp5,
    Custom,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::Exp1,
        ExperimentId::Exp2,
        ExperimentId::Exp3,
        ExperimentId::Exp4a,
        ExperimentId::Exp4b,
        ExperimentId::Exp5,
        ExperimentId::Custom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3 => "exp3",
            ExperimentId::Exp4a => "exp4a",
            ExperimentId::Exp4b => "exp4b",
            ExperimentId::Exp5 => "exp5",
            ExperimentId::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    L2Dev1,
    L1Dev1,
    L2Plain,
    H1,
}

impl VariantName {
    pub fn as_str(&self) -> &'static str {
        match self {
            VariantName::L2Dev1 => "l2_dev1",
            VariantName::L1Dev1 => "l1_dev1",
            VariantName::L2Plain => "l2_plain",
            VariantName::H1 => "h1",
        }
    }
}

impl FromStr for VariantName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        [VariantName::L2Dev1, VariantName::L1Dev1, VariantName::L2Plain, VariantName::H1]
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown objective variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub beta: f64,
    pub alpha_tilde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSettings {
    pub x_left: f64,
    pub x_right: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub t_final: f64,
    pub n_steps: usize,
    #[serde(default = "half")]
    pub theta: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSettings {
    pub variant: VariantName,
    pub alpha: f64,
    #[serde(default = "default_eps")]
    pub l1_eps: f64,
}

fn default_eps() -> f64 {
    DEFAULT_L1_EPS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimSettings {
    pub memory: usize,
    pub ftol: f64,
    pub gtol: f64,
    pub max_iters: usize,
    pub ls_max: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for OptimSettings {
    fn default() -> Self {
        let d = OptimConfig::default();
        Self {
            memory: d.memory,
            ftol: d.ftol,
            gtol: d.gtol,
            max_iters: d.max_iters,
            ls_max: d.ls_max,
            c1: d.c1,
            c2: d.c2,
        }
    }
}

impl OptimSettings {
    pub fn budget(max_iters: usize) -> Self {
        Self { max_iters, ftol: BUDGET_FTOL, ..Self::default() }
    }

    pub fn to_core(&self) -> OptimConfig {
        OptimConfig {
            memory: self.memory,
            ftol: self.ftol,
            gtol: self.gtol,
            max_iters: self.max_iters,
            ls_max: self.ls_max,
            c1: self.c1,
            c2: self.c2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSettings {
    pub lo: f64,
    pub hi: f64,
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self { lo: 0.1, hi: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    pub abs_tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        let d = NewtonConfig::default();
        Self { abs_tol: d.abs_tol, max_iters: d.max_iters }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    pub sigma: f64,
    pub interval: [f64; 2],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_id: ExperimentId,
    pub model: ModelSettings,
    pub mesh: MeshSettings,
    pub grid: GridSettings,
    pub coefficient_preset: String,
    pub initial_preset: String,
    pub objective: ObjectiveSettings,
    #[serde(default)]
    pub optim: OptimSettings,
    #[serde(default)]
    pub bounds: BoundSettings,
    #[serde(default)]
    pub newton: NewtonSettings,
    #[serde(default)]
    pub noise: Option<NoiseSettings>,
}

fn domain(n_cells: usize) -> MeshSettings {
    MeshSettings { x_left: -20.0, x_right: 40.0, n_cells }
}

#[allow(clippy::too_many_arguments)]
fn base(
    id: ExperimentId,
    coeff: &str,
    init: &str,
    mesh: MeshSettings,
    grid: GridSettings,
    variant: VariantName,
    alpha: f64,
    optim: OptimSettings,
) -> ExperimentConfig {
    ExperimentConfig {
        experiment_id: id,
        model: ModelSettings { beta: 0.1, alpha_tilde: 0.0 },
        mesh,
        grid,
        coefficient_preset: coeff.into(),
        initial_preset: init.into(),
        objective: ObjectiveSettings { variant, alpha, l1_eps: DEFAULT_L1_EPS },
        optim,
        bounds: BoundSettings::default(),
        newton: NewtonSettings::default(),
        noise: None,
    }
}

impl ExperimentConfig {
    /// Smooth Gaussian-chain coefficient, linear model.
    pub fn exp1() -> Self {
        base(
            ExperimentId::Exp1,
            "gauss_coeff",
            "bump_at_three",
            domain(500),
            GridSettings { t_final: 15.0, n_steps: 1500, theta: 0.5 },
            VariantName::L2Dev1,
            0.0,
            OptimSettings::budget(150),
        )
    }

    /// Piecewise-constant coefficient; `alpha > 0` runs the 500-iteration regularized case.
    pub fn exp2(alpha: f64) -> Self {
        let optim = if alpha > 0.0 {
            OptimSettings::budget(500)
        } else {
            OptimSettings { max_iters: 100, ..OptimSettings::default() }
        };
        base(
            ExperimentId::Exp2,
            "irregularcoeff1",
            "bump_at_origin",
            domain(500),
            GridSettings { t_final: 20.0, n_steps: 1500, theta: 0.5 },
            VariantName::L2Dev1,
            alpha,
            optim,
        )
    }

    /// Nonlinear sweep; `alpha_tilde >= 0.07` switches to the finer grid.
    pub fn exp3(alpha_tilde: f64, variant: VariantName, alpha: f64) -> Self {
        let (cells, steps) = if alpha_tilde >= 0.07 { (700, 1700) } else { (500, 1500) };
        let mut cfg = base(
            ExperimentId::Exp3,
            "irregularcoeff1",
            "bump_at_origin",
            domain(cells),
            GridSettings { t_final: 20.0, n_steps: steps, theta: 0.5 },
            variant,
            alpha,
            OptimSettings::budget(500),
        );
        cfg.model.alpha_tilde = alpha_tilde;
        cfg
    }

    pub fn exp4a() -> Self {
        base(
            ExperimentId::Exp4a,
            "piecewise_linear",
            "bump_at_three",
            domain(700),
            GridSettings { t_final: 20.0, n_steps: 1700, theta: 0.5 },
            VariantName::L2Dev1,
            0.0,
            OptimSettings::budget(500),
        )
    }

    pub fn exp4b() -> Self {
        base(
            ExperimentId::Exp4b,
            "multi_step",
            "bump_at_three",
            domain(700),
            GridSettings { t_final: 20.0, n_steps: 1700, theta: 0.5 },
            VariantName::L1Dev1,
            0.001,
            OptimSettings::budget(500),
        )
    }

    /// Noisy measurements on the full nonlinear-dispersive model.
    pub fn exp5(variant: VariantName, alpha: f64, seed: u64) -> Self {
        let mut cfg = base(
            ExperimentId::Exp5,
            "gauss_coeff",
            "bump_at_three",
            domain(800),
            GridSettings { t_final: 15.0, n_steps: 1500, theta: 0.5 },
            variant,
            alpha,
            OptimSettings::budget(20),
        );
        cfg.model = ModelSettings { beta: 0.01, alpha_tilde: 0.01 };
        cfg.noise = Some(NoiseSettings { sigma: 0.04, interval: [-15.0, 30.0], seed });
        cfg
    }

    /// Preset for a named experiment with its primary settings.
    pub fn preset(id: ExperimentId) -> Self {
        match id {
            ExperimentId::Exp1 => Self::exp1(),
            ExperimentId::Exp2 => Self::exp2(0.0),
            ExperimentId::Exp3 => Self::exp3(0.05, VariantName::L2Dev1, 0.0),
            ExperimentId::Exp4a => Self::exp4a(),
            ExperimentId::Exp4b => Self::exp4b(),
            ExperimentId::Exp5 => Self::exp5(VariantName::L1Dev1, 0.01, 0),
            ExperimentId::Custom => {
                let mut cfg = Self::exp1();
                cfg.experiment_id = ExperimentId::Custom;
                cfg
            }
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model_params()?;
        let mesh = self.spatial_mesh()?;
        self.time_grid()?;
        coefficient_fn(&self.coefficient_preset)?;
        initial_fn(&self.initial_preset)?;
        self.objective_variant();
        self.optim.to_core().validate()?;
        self.newton_config()?;
        self.admissible_set(mesh.n_nodes())?;
        if !(self.objective.alpha >= 0.0 && self.objective.alpha.is_finite()) {
            return Err(HarnessError::Config("objective alpha must be nonnegative".into()));
        }
        if let Some(noise) = &self.noise {
            if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
                return Err(HarnessError::Config("noise sigma must be nonnegative".into()));
            }
            let [a, b] = noise.interval;
            if !(a <= b && a >= mesh.x_left() && b <= mesh.x_right()) {
                return Err(HarnessError::Config(format!(
                    "noise interval [{a}, {b}] is not inside the domain [{}, {}]",
                    mesh.x_left(),
                    mesh.x_right()
                )));
            }
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.model.beta, self.model.alpha_tilde)?)
    }

    pub fn spatial_mesh(&self) -> Result<SpatialMesh> {
        Ok(SpatialMesh::new(self.mesh.x_left, self.mesh.x_right, self.mesh.n_cells)?)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::with_theta(self.grid.t_final, self.grid.n_steps, self.grid.theta)?)
    }

    pub fn newton_config(&self) -> Result<NewtonConfig> {
        Ok(NewtonConfig::new(self.newton.abs_tol, self.newton.max_iters)?)
    }

    pub fn admissible_set(&self, n_nodes: usize) -> Result<AdmissibleSet> {
        Ok(AdmissibleSet::uniform_box(n_nodes, self.bounds.lo, self.bounds.hi)?)
    }

    pub fn objective_variant(&self) -> ObjectiveVariant {
        match self.objective.variant {
            VariantName::L2Dev1 => ObjectiveVariant::L2Dev1,
            VariantName::L1Dev1 => ObjectiveVariant::L1Dev1,
            VariantName::L2Plain => ObjectiveVariant::L2Plain,
            VariantName::H1 => ObjectiveVariant::H1Tikhonov { beta: self.model.beta },
        }
    }
}
