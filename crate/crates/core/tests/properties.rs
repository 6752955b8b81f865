use boussinesq_core::adjoint::GradientField;
use boussinesq_core::field::{discrete_l2_norm, weighted_h1_norm};
use boussinesq_core::linalg::{solve_tridiag, TriDiagMatrix};
use boussinesq_core::objective::{eval_objective, Measurement, ObjectiveSpec, ObjectiveVariant};
use boussinesq_core::optim::{minimize, minimize_with_observer, project_admissible, OptimConfig};
use boussinesq_core::{AdmissibleSet, ScalarField, SpatialMesh, WaveState};
use proptest::prelude::*;

fn mesh() -> SpatialMesh {
    SpatialMesh::new(-2.0, 3.0, 24).unwrap()
}

fn field(v: &[f64]) -> ScalarField {
    ScalarField::new(mesh(), v.to_vec()).unwrap()
}

fn interior(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.len();
    v[0] = 0.0;
    v[n - 1] = 0.0;
    v
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 25)
}

proptest! {
    #[test]
    fn norms_are_homogeneous(v in values(), s in -10.0f64..10.0, beta in 0.01f64..1.0) {
        let f = field(&v);
        let g = f.scaled(s).unwrap();
        let (l, h) = (discrete_l2_norm(&f).unwrap(), weighted_h1_norm(&f, beta).unwrap());
        prop_assert!((discrete_l2_norm(&g).unwrap() - s.abs() * l).abs() <= 1e-13 * (1.0 + s.abs() * l));
        prop_assert!((weighted_h1_norm(&g, beta).unwrap() - s.abs() * h).abs() <= 1e-13 * (1.0 + s.abs() * h));
    }

    #[test]
    fn triangle_inequality(a in values(), b in values(), beta in 0.01f64..1.0) {
        let (f, g) = (field(&a), field(&b));
        let sum = f.add(&g).unwrap();
        let tol = 1e-12;
        prop_assert!(discrete_l2_norm(&sum).unwrap() <= discrete_l2_norm(&f).unwrap() + discrete_l2_norm(&g).unwrap() + tol);
        prop_assert!(
            weighted_h1_norm(&sum, beta).unwrap()
                <= weighted_h1_norm(&f, beta).unwrap() + weighted_h1_norm(&g, beta).unwrap() + tol
        );
    }

    #[test]
    fn h1_dominates_l2(v in values(), excess in 0.0f64..1.0) {
        // lumped mass = consistent mass + (h^2/6) stiffness, so the bound needs beta >= h^2
        let f = field(&v);
        let h = mesh().dx();
        let beta = h * h + excess;
        prop_assert!(weighted_h1_norm(&f, beta).unwrap() >= discrete_l2_norm(&f).unwrap() - 1e-14);
        let stiff: f64 = v.windows(2).map(|w| (w[1] - w[0]).powi(2) / h).sum();
        let gap = weighted_h1_norm(&f, beta).unwrap().powi(2) - discrete_l2_norm(&f).unwrap().powi(2);
        prop_assert!((gap - excess / 6.0 * stiff).abs() <= 1e-12 * (1.0 + stiff));
    }

    #[test]
    fn tridiagonal_solve_recovers_spd_systems(
        off in prop::collection::vec(-1.0f64..1.0, 39),
        extra in prop::collection::vec(0.01f64..3.0, 40),
        x in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        // diagonally dominant symmetric => SPD
        let n = 40;
        let mut a = TriDiagMatrix::zeros(n);
        for i in 0..n {
            let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { off[i].abs() } else { 0.0 };
            a.diag[i] = left + right + extra[i];
            if i + 1 < n {
                a.sup[i] = off[i];
                a.sub[i + 1] = off[i];
            }
        }
        let b = a.mul_vec(&x);
        let y = solve_tridiag(&a, &b).unwrap();
        for (u, v) in y.iter().zip(&x) {
            prop_assert!((u - v).abs() <= 1e-10);
        }
    }

    #[test]
    fn objectives_are_nonnegative(r in values(), c in prop::collection::vec(0.1f64..3.0, 25), alpha in 0.0f64..1.0) {
        let meas = Measurement::new(field(&interior(r.clone())), field(&interior(r.iter().map(|v| -v).collect()))).unwrap();
        let state = WaveState::zeros(mesh());
        for variant in [ObjectiveVariant::L2Dev1, ObjectiveVariant::L1Dev1, ObjectiveVariant::L2Plain, ObjectiveVariant::H1Tikhonov { beta: 0.1 }] {
            let spec = ObjectiveSpec::new(variant, alpha, meas.clone()).unwrap();
            prop_assert!(eval_objective(&spec, &state, &field(&c)).unwrap() >= 0.0);
        }
    }
}

#[test]
fn objective_vanishes_only_at_perfect_data() {
    let m = mesh();
    let meas = Measurement::new(
        ScalarField::from_fn(m, |x| (x + 2.0) * (3.0 - x)).unwrap(),
        ScalarField::from_fn(m, |x| ((x + 2.0) * (3.0 - x)).powi(2)).unwrap(),
    )
    .unwrap();
    let one = ScalarField::constant(m, 1.0);
    let alpha = 0.3;
    let eps = 1e-8;
    for variant in [ObjectiveVariant::L2Dev1, ObjectiveVariant::L1Dev1] {
        let spec = ObjectiveSpec::with_eps(variant, alpha, meas.clone(), eps).unwrap();
        let j = eval_objective(&spec, &meas.as_state(), &one).unwrap();
        assert!(j <= eps * m.length() * alpha / 2.0 + 1e-15, "{variant:?}: {j}");
        let off = ScalarField::constant(m, 1.1);
        assert!(eval_objective(&spec, &meas.as_state(), &off).unwrap() > 1e-6);
    }
}

#[test]
fn misfit_is_quadratic_in_the_residual() {
    let m = mesh();
    let base = |x: f64| (x + 2.0) * (3.0 - x);
    let meas = Measurement::new(ScalarField::from_fn(m, base).unwrap(), ScalarField::zeros(m)).unwrap();
    let r = WaveState::new(
        ScalarField::from_fn(m, |x| (x + 2.0) * (3.0 - x) * x.sin()).unwrap(),
        ScalarField::from_fn(m, |x| (x + 2.0) * (3.0 - x) * 0.3).unwrap(),
    )
    .unwrap();
    let coeff = ScalarField::constant(m, 1.0);
    for variant in [ObjectiveVariant::L2Dev1, ObjectiveVariant::H1Tikhonov { beta: 0.2 }] {
        let spec = ObjectiveSpec::new(variant, 0.0, meas.clone()).unwrap();
        let at = |lam: f64| {
            let s = WaveState::new(
                meas.m1.add(&r.eta.scaled(lam).unwrap()).unwrap(),
                meas.m2.add(&r.vel.scaled(lam).unwrap()).unwrap(),
            )
            .unwrap();
            eval_objective(&spec, &s, &coeff).unwrap()
        };
        let j1 = at(1.0);
        assert_eq!(at(0.0), 0.0);
        assert!((at(2.0) - 4.0 * j1).abs() <= 1e-12 * j1);
    }
}

#[test]
fn smoothed_l1_converges_as_eps_shrinks() {
    let m = mesh();
    let meas = Measurement::new(ScalarField::zeros(m), ScalarField::zeros(m)).unwrap();
    let c = ScalarField::from_fn(m, |x| 1.0 + 0.5 * (2.0 * x).sin()).unwrap();
    let alpha = 0.7;
    let j = |eps: f64| {
        let spec = ObjectiveSpec::with_eps(ObjectiveVariant::L1Dev1, alpha, meas.clone(), eps).unwrap();
        eval_objective(&spec, &WaveState::zeros(m), &c).unwrap()
    };
    assert!((j(1e-6) - j(1e-10)).abs() < 1e-5 * m.length() * alpha);
}

// J(x) = |x - x*|^2 in the discrete L2 norm
fn quadratic(target: ScalarField) -> impl FnMut(&ScalarField) -> boussinesq_core::Result<(f64, GradientField)> {
    move |x: &ScalarField| {
        let d = x.sub(&target)?;
        let m = *x.mesh();
        let g: Vec<f64> = d.values().iter().enumerate().map(|(j, v)| 2.0 * m.trapezoid_weight(j) * v).collect();
        Ok((discrete_l2_norm(&d)?.powi(2), GradientField { values: ScalarField::new(m, g)? }))
    }
}

fn target() -> ScalarField {
    ScalarField::from_fn(mesh(), |x| 1.0 + 0.5 * (3.0 * x).sin() + 0.1 * x).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn optimizer_solves_quadratics(x0 in prop::collection::vec(-3.0f64..3.0, 25)) {
        let t = target();
        let cfg = OptimConfig { ftol: 1e-300, gtol: 1e-14, ..OptimConfig::default() };
        let res = minimize(quadratic(t.clone()), &field(&x0), &AdmissibleSet::unconstrained(), &cfg).unwrap();
        prop_assert!(res.iterations() <= 50);
        let err = res.x.values().iter().zip(t.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-6, "err {err:e} after {} iterations", res.iterations());
    }
}

#[test]
fn accepted_iterates_are_feasible_and_descending() {
    let set = AdmissibleSet::uniform_box(25, 0.8, 1.2).unwrap();
    let cfg = OptimConfig { ftol: 1e-300, gtol: 1e-12, ..OptimConfig::default() };
    let mut worst_gap = 0.0f64;
    let res = minimize_with_observer(quadratic(target()), &ScalarField::constant(mesh(), 1.0), &set, &cfg, |_, x| {
        let p = project_admissible(x, &set).unwrap();
        let gap = p.values().iter().zip(x.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_gap = worst_gap.max(gap);
    })
    .unwrap();
    assert!(worst_gap <= 1e-14);
    for w in res.history.windows(2) {
        assert!(w[1].objective <= w[0].objective + 1e-14);
    }
    // box-constrained minimizer is the clipped target
    for (x, t) in res.x.values().iter().zip(target().values()) {
        assert!((x - t.clamp(0.8, 1.2)).abs() <= 1e-6);
    }
}

#[test]
fn identical_runs_have_identical_histories() {
    let run = || {
        let set = AdmissibleSet::uniform_box(25, 0.9, 10.0).unwrap();
        minimize(quadratic(target()), &ScalarField::constant(mesh(), 2.0), &set, &OptimConfig::default()).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.history.len(), b.history.len());
    for (r, s) in a.history.iter().zip(&b.history) {
        assert_eq!(r.objective.to_bits(), s.objective.to_bits());
        assert_eq!(r.pg_norm.to_bits(), s.pg_norm.to_bits());
        assert_eq!(r.step_len.to_bits(), s.step_len.to_bits());
    }
    assert!(a.x.values().iter().zip(b.x.values()).all(|(u, v)| u.to_bits() == v.to_bits()));
}

#[test]
fn convergence_on_convex_quadratics_is_superlinear() {
    // anisotropic quadratic sum_j k_j w_j (x_j - t_j)^2, dimension within the memory
    let m = SpatialMesh::new(0.0, 1.0, 6).unwrap();
    let t = ScalarField::from_fn(m, |x| 1.0 + (3.0 * x).sin()).unwrap();
    let scale: Vec<f64> = (0..m.n_nodes()).map(|j| 1.0 + 9.0 * (j as f64 / 6.0).powi(2)).collect();
    let (tc, sc) = (t.clone(), scale.clone());
    let f = move |x: &ScalarField| {
        let mut val = 0.0;
        let mut g = vec![0.0; x.len()];
        for j in 0..x.len() {
            let d = x.values()[j] - tc.values()[j];
            val += sc[j] * m.trapezoid_weight(j) * d * d;
            g[j] = 2.0 * sc[j] * m.trapezoid_weight(j) * d;
        }
        Ok((val, GradientField { values: ScalarField::new(m, g)? }))
    };
    let mut errs = Vec::new();
    let cfg = OptimConfig { ftol: 1e-300, gtol: 1e-13, ..OptimConfig::default() };
    minimize_with_observer(f, &ScalarField::constant(m, 0.0), &AdmissibleSet::unconstrained(), &cfg, |_, x| {
        errs.push(discrete_l2_norm(&x.sub(&t).unwrap()).unwrap());
    })
    .unwrap();
    // error ratios shrink: tail contraction well below the opening contraction
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[1] / w[0]).collect();
    let k = ratios.len();
    assert!(k >= 6, "{errs:?}");
    let gmean = |r: &[f64]| (r.iter().map(|v| v.ln()).sum::<f64>() / r.len() as f64).exp();
    let (head, tail) = (gmean(&ratios[..3]), gmean(&ratios[k - 3..]));
    assert!(tail < 0.5 * head, "{ratios:?}");
}
