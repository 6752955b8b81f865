use boussinesq_core::field::{discrete_l2_norm, weighted_h1_norm};
use boussinesq_core::forward::{solve_forward, trajectory_to_conserved, ForwardProblem, NewtonConfig};
use boussinesq_core::green::{apply_phi, solve_linear_integral, GreenKernel, PhiOperator};
use boussinesq_core::presets::{bump_at_three, gauss_coeff};
use boussinesq_core::{ModelParams, ScalarField, SpatialMesh, TimeGrid, WaveState};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kernel_is_symmetric(xi in 0.0f64..60.0, s in 0.0f64..60.0, beta in 0.05f64..0.6) {
        let k = GreenKernel::new(beta, 60.0).unwrap();
        prop_assert!((k.eval_g(xi, s).unwrap() - k.eval_g(s, xi).unwrap()).abs() <= 1e-13);
    }

    #[test]
    fn k_sign_follows_structure(xi in 0.5f64..9.5, s in 0.5f64..9.5) {
        prop_assume!((xi - s).abs() > 1e-6);
        let k = GreenKernel::new(0.1, 10.0).unwrap();
        let v = k.eval_k(xi, s).unwrap();
        prop_assert!(v.is_finite());
        // dG/ds > 0 to the left of the source point, < 0 to the right
        if s < xi { prop_assert!(v > 0.0) } else { prop_assert!(v < 0.0) }
    }
}

#[test]
fn kernel_jump_equals_six_over_beta() {
    for beta in [0.05, 0.1, 0.6] {
        let k = GreenKernel::new(beta, 60.0).unwrap();
        for xi in [1.0, 17.3, 30.0, 59.0] {
            let jump = k.eval_k(xi, xi - 1e-8).unwrap() - k.eval_k(xi, xi + 1e-8).unwrap();
            assert!((jump - 6.0 / beta).abs() <= 1e-4 * 6.0 / beta, "beta {beta}: {jump}");
            let limits = k.k_left_limit(xi).unwrap() - k.k_right_limit(xi).unwrap();
            assert!((limits - 6.0 / beta).abs() <= 1e-12 * 6.0 / beta);
        }
    }
}

// residual of (I - (beta/6) d2) Phi1 phi - phi at interior nodes, centered differences
fn green_identity_error(n_cells: usize, beta: f64) -> f64 {
    let mesh = SpatialMesh::new(0.0, 10.0, n_cells).unwrap();
    let k = GreenKernel::new(beta, 10.0).unwrap();
    let phi = ScalarField::from_fn(mesh, |x| (-(x - 5.0) * (x - 5.0)).exp() * (1.0 + 0.3 * x)).unwrap();
    let w = apply_phi(&k, PhiOperator::Phi1, &phi).unwrap();
    let (v, f) = (w.values(), phi.values());
    let h = mesh.dx();
    (1..n_cells)
        .map(|i| {
            let lap = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            (v[i] - beta / 6.0 * lap - f[i]).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn phi1_inverts_the_helmholtz_operator() {
    for beta in [0.1, 0.6] {
        let errs: Vec<f64> = [100, 200, 400].iter().map(|&n| green_identity_error(n, beta)).collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "beta {beta}: {errs:?}");
        }
    }
}

#[test]
fn phi1_gain_is_bounded_under_refinement() {
    let beta = 0.1;
    let k = GreenKernel::new(beta, 10.0).unwrap();
    let ratio = |n: usize| {
        let mesh = SpatialMesh::new(0.0, 10.0, n).unwrap();
        let phi = ScalarField::from_fn(mesh, |x| (3.0 * x).sin() + (0.7 * x).cos()).unwrap();
        let w = apply_phi(&k, PhiOperator::Phi1, &phi).unwrap();
        weighted_h1_norm(&w, beta).unwrap() / discrete_l2_norm(&phi).unwrap()
    };
    let r: Vec<f64> = [100, 200, 400].iter().map(|&n| ratio(n)).collect();
    assert!(r.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!((r[2] - r[1]).abs() < 0.01 * r[2], "{r:?}");
}

#[test]
fn integral_solver_conserves_energy_with_unit_speed() {
    let beta = 0.6;
    let mesh = SpatialMesh::new(0.0, 10.0, 200).unwrap();
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let init = WaveState::new(
        ScalarField::from_fn(mesh, |x| (-(x - 5.0) * (x - 5.0)).exp()).unwrap(),
        ScalarField::from_fn(mesh, |x| 0.5 * (-(x - 4.0) * (x - 4.0)).exp()).unwrap(),
    )
    .unwrap();
    let params = ModelParams::linear(beta).unwrap();
    let traj = solve_linear_integral(&params, &ScalarField::constant(mesh, 1.0), &init, &grid).unwrap();
    let e = |s: &WaveState| s.h1_norm(beta).unwrap().powi(2);
    let e0 = e(traj.initial());
    let drift = traj.states().iter().map(|s| ((e(s) - e0) / e0).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-6, "{drift:e}");
}

fn fem_vs_green(n_cells: usize, n_steps: usize, c: fn(f64) -> f64) -> f64 {
    let beta = 0.1;
    let mesh = SpatialMesh::new(-20.0, 40.0, n_cells).unwrap();
    let grid = TimeGrid::new(2.0, n_steps).unwrap();
    let c = ScalarField::from_fn(mesh, c).unwrap();
    let b = ScalarField::from_fn(mesh, bump_at_three).unwrap();
    let init = WaveState::new(b.clone(), b).unwrap();
    let p = ForwardProblem::from_conserved(beta, grid, &c, &init).unwrap();
    let fem = trajectory_to_conserved(&solve_forward(&p, &NewtonConfig::default()).unwrap(), p.coeff()).unwrap();
    let green = solve_linear_integral(&ModelParams::linear(beta).unwrap(), &c, &init, &grid).unwrap();
    let d = fem.last().sub(green.last()).unwrap();
    (discrete_l2_norm(&d.eta).unwrap().powi(2) + discrete_l2_norm(&d.vel).unwrap().powi(2)).sqrt()
}

#[test]
fn fem_and_integral_solutions_converge_together() {
    let speed_of_gauss: fn(f64) -> f64 = |x| 1.0 / gauss_coeff(x);
    let unit: fn(f64) -> f64 = |_| 1.0;
    for c in [unit, speed_of_gauss] {
        let errs: Vec<f64> = [(300, 50), (600, 100), (1200, 200)]
            .iter()
            .map(|&(n, s)| fem_vs_green(n, s, c))
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
        }
    }
}
