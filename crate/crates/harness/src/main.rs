use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boussinesq_core::forward::solve_forward;
use boussinesq_core::objective::ObjectiveVariant;
use boussinesq_core::presets::{coefficient_preset, initial_fn};
use boussinesq_core::{ScalarField, WaveState};
use boussinesq_harness::checks::{fd_gradient_check, oracle_compare, small_problem};
use boussinesq_harness::report::fmt_num;
use boussinesq_harness::{
    run_experiment_with, write_report, ExperimentConfig, ExperimentId, HarnessError, Stage, VariantName,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "boussinesq", version, about = "Coefficient identification for a Boussinesq system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory
    #[arg(long, global = true, env = "BOUSSINESQ_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Overrides {
    /// JSON experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Noise seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Optimizer iteration budget
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Regularization weight
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Relative-decrease stopping tolerance
    #[arg(long, global = true)]
    ftol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve with the config's exact coefficient
    Solve,
    /// Reconstruct the coefficient described by --config
    Invert,
    /// Run a preset experiment
    Experiment {
        /// exp1, exp2, exp3, exp4a, exp4b, exp5 or custom
        id: ExperimentId,
        /// Nonlinearity for exp3
        #[arg(long)]
        alpha_tilde: Option<f64>,
        /// l2_dev1, l1_dev1, l2_plain or h1
        #[arg(long)]
        variant: Option<VariantName>,
    },
    /// Finite-difference check of the adjoint gradient on a 40-cell problem
    Gradcheck {
        #[arg(long, default_value_t = 0.0)]
        alpha_tilde: f64,
        #[arg(long, default_value = "l2_dev1")]
        variant: VariantName,
    },
    /// Compare the FEM scheme with the Green-integral solver under refinement
    OracleCompare {
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

struct Failure {
    stage: Stage,
    err: HarnessError,
}

fn at(stage: Stage) -> impl Fn(HarnessError) -> Failure {
    move |err| Failure { stage, err }
}

fn core_at(stage: Stage) -> impl Fn(boussinesq_core::Error) -> Failure {
    move |err| Failure { stage, err: err.into() }
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(n) = self.max_iters {
            cfg.optim.max_iters = n;
        }
        if let Some(a) = self.alpha {
            cfg.objective.alpha = a;
        }
        if let Some(f) = self.ftol {
            cfg.optim.ftol = f;
        }
        if let (Some(seed), Some(noise)) = (self.seed, cfg.noise.as_mut()) {
            noise.seed = seed;
        }
    }

    fn load(&self, fallback: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path).map_err(at(Stage::Config))?,
            None => fallback,
        };
        self.apply(&mut cfg);
        cfg.validate().map_err(at(Stage::Config))?;
        Ok(cfg)
    }
}

fn reconstruct(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    eprintln!("running {} ({} nodes, {} steps)", cfg.experiment_id, cfg.mesh.n_cells + 1, cfg.grid.n_steps);
    let report = run_experiment_with(cfg, |rec, err| {
        if rec.iter % 10 == 0 {
            eprintln!("  iter {:4}  J {:.6e}  |pg| {:.3e}  error {:.5}", rec.iter, rec.objective, rec.pg_norm, err);
        }
    });
    let files = write_report(&report, out).map_err(at(Stage::Evaluation))?;
    if let Some(f) = &report.failure {
        return Err(Failure { stage: f.stage, err: HarnessError::Config(f.message.clone()) });
    }
    println!(
        "{}: l2_error {:.6} after {} iterations ({}), {:.1}s",
        cfg.experiment_id, report.l2_error, report.iterations_used, report.termination, report.wall_time_s
    );
    for f in files {
        println!("  wrote {}", f.display());
    }
    Ok(())
}

fn solve(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let mesh = cfg.spatial_mesh().map_err(at(Stage::Config))?;
    let coeff = coefficient_preset(&cfg.coefficient_preset, &mesh).map_err(core_at(Stage::Config))?;
    let f = initial_fn(&cfg.initial_preset).map_err(core_at(Stage::Config))?;
    let i0 = ScalarField::from_fn(mesh, f).map_err(core_at(Stage::Config))?;
    let init = WaveState::new(i0.clone(), i0).map_err(core_at(Stage::Config))?;
    let p = boussinesq_core::forward::ForwardProblem::new(
        cfg.model_params().map_err(at(Stage::Config))?,
        cfg.time_grid().map_err(at(Stage::Config))?,
        coeff,
        init,
    )
    .map_err(core_at(Stage::Config))?;
    let newton = cfg.newton_config().map_err(at(Stage::Config))?;
    let traj = solve_forward(&p, &newton).map_err(core_at(Stage::Measurement))?;
    let last = traj.last();
    std::fs::create_dir_all(out).map_err(|e| at(Stage::Evaluation)(io_err(out, e)))?;
    let path = out.join("solution.csv");
    let mut text = String::from("xi,eta,u\n");
    for (j, x) in mesh.nodes().iter().enumerate() {
        text += &format!("{},{},{}\n", fmt_num(*x), fmt_num(last.eta.values()[j]), fmt_num(last.vel.values()[j]));
    }
    std::fs::write(&path, text).map_err(|e| at(Stage::Evaluation)(io_err(&path, e)))?;
    println!("final time {}: wrote {}", cfg.grid.t_final, path.display());
    Ok(())
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.into(), source }
}

fn variant(name: VariantName) -> ObjectiveVariant {
    match name {
        VariantName::L2Dev1 => ObjectiveVariant::L2Dev1,
        VariantName::L1Dev1 => ObjectiveVariant::L1Dev1,
        VariantName::L2Plain => ObjectiveVariant::L2Plain,
        VariantName::H1 => ObjectiveVariant::H1Tikhonov { beta: 0.1 },
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ov = &cli.overrides;
    match cli.command {
        Command::Solve => solve(&ov.load(ExperimentConfig::exp1())?, &cli.out),
        Command::Invert => {
            if ov.config.is_none() {
                return Err(Failure { stage: Stage::Config, err: HarnessError::Config("invert needs --config".into()) });
            }
            reconstruct(&ov.load(ExperimentConfig::preset(ExperimentId::Custom))?, &cli.out)
        }
        Command::Experiment { id, alpha_tilde, variant } => {
            let mut base = ExperimentConfig::preset(id);
            if id == ExperimentId::Exp3 {
                let at = alpha_tilde.unwrap_or(base.model.alpha_tilde);
                base = ExperimentConfig::exp3(at, base.objective.variant, base.objective.alpha);
            } else if let Some(at) = alpha_tilde {
                base.model.alpha_tilde = at;
            }
            if let Some(v) = variant {
                base.objective.variant = v;
            }
            let cfg = ov.load(base)?;
            reconstruct(&cfg, &cli.out.join(cfg.experiment_id.as_str()))
        }
        Command::Gradcheck { alpha_tilde, variant: name } => {
            let (p, spec) = small_problem(alpha_tilde, variant(name), ov.alpha.unwrap_or(0.0)).map_err(at(Stage::Config))?;
            let newton = boussinesq_core::forward::NewtonConfig::new(1e-13, 50).map_err(core_at(Stage::Config))?;
            let r = fd_gradient_check(&p, &spec, &newton).map_err(at(Stage::Evaluation))?;
            println!(
                "gradcheck alpha_tilde={alpha_tilde} variant={}: worst relative error {:.3e} at node {} of {}",
                name.as_str(),
                r.worst_rel_error,
                r.worst_node,
                r.n_nodes
            );
            Ok(())
        }
        Command::OracleCompare { levels } => {
            let mut base = ExperimentConfig::exp1();
            base.grid.t_final = 2.0;
            base.grid.n_steps = 50;
            base.mesh.n_cells = 300;
            let cfg = ov.load(base)?;
            let r = oracle_compare(&cfg, levels).map_err(at(Stage::Evaluation))?;
            for (i, (n, d)) in r.n_cells.iter().zip(&r.differences).enumerate() {
                let order = if i > 0 { format!("  order {:.3}", r.orders[i - 1]) } else { String::new() };
                println!("cells {n:6}  |fem - green| {d:.6e}{order}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { stage, err }) => {
            eprintln!("error [{stage}]: {err}");
            ExitCode::from(2)
        }
    }
}
