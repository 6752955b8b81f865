//! Green's function of `I - (beta/6) d^2/dxi^2` on `[0, L]` with Dirichlet
//! conditions, the integral operators built from it, and a method-of-lines
//! solver of the linear system in integral form
//!
//! ```text
//! N_t = int K(xi,s) V(s) ds,   V_t = int K(xi,s) c(s) N(s) ds,   K = dG/ds.
//! ```
//!
//! With `a = sqrt(beta/6)`:
//!
//! ```text
//! G(xi,s) = [cosh((L-|s-xi|)/a) - cosh((L-xi-s)/a)] / (2a sinh(L/a))
//! K(xi,s) = (3/beta) [sinh((L-xi-s)/a) + sign(xi-s) sinh((L-|xi-s|)/a)] / sinh(L/a)
//! ```
//!
//! Ratios such as `cosh(x)/sinh(L/a)` are evaluated as
//! `(e^(x-l) + e^(-x-l)) / (1 - e^(-2l))`, which never overflows for `|x| <= l`.

use alloc::vec::Vec;

use crate::field::{ScalarField, Trajectory, WaveState};
use crate::math::{abs, exp, max_abs, sqrt};
use crate::mesh::{SpatialMesh, TimeGrid};
use crate::params::ModelParams;
use crate::{Error, Result};

const BLOW_UP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenKernel {
    beta: f64,
    length: f64,
    a: f64,
    // L / a
    ell: f64,
    // 1 - exp(-2 L / a)
    denom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiOperator {
    /// `int G(xi,s) phi(s) ds`
    Phi1,
    /// `int K(xi,s) phi(s) ds`
    Phi2,
}

impl GreenKernel {
    pub fn new(beta: f64, length: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", "must be positive and finite"));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::param("length", "must be positive and finite"));
        }
        let a = sqrt(beta / 6.0);
        let ell = length / a;
        Ok(Self {
            beta,
            length,
            a,
            ell,
            denom: 1.0 - exp(-2.0 * ell),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    // cosh(y/a) / sinh(L/a)
    fn cosh_ratio(&self, y: f64) -> f64 {
        let x = y / self.a;
        (exp(x - self.ell) + exp(-x - self.ell)) / self.denom
    }

    // sinh(y/a) / sinh(L/a)
    fn sinh_ratio(&self, y: f64) -> f64 {
        let x = y / self.a;
        (exp(x - self.ell) - exp(-x - self.ell)) / self.denom
    }

    fn check(&self, v: f64) -> Result<f64> {
        let slack = 1e-12 * self.length;
        if !(v >= -slack && v <= self.length + slack) {
            return Err(Error::Domain {
                value: v,
                length: self.length,
            });
        }
        Ok(v.clamp(0.0, self.length))
    }

    pub fn eval_g(&self, xi: f64, s: f64) -> Result<f64> {
        let (xi, s) = (self.check(xi)?, self.check(s)?);
        let l = self.length;
        Ok((self.cosh_ratio(l - abs(s - xi)) - self.cosh_ratio(l - xi - s)) / (2.0 * self.a))
    }

    pub fn eval_k(&self, xi: f64, s: f64) -> Result<f64> {
        let (xi, s) = (self.check(xi)?, self.check(s)?);
        if xi == s {
            return Err(Error::SingularPoint);
        }
        let sign = if xi > s { 1.0 } else { -1.0 };
        Ok(self.k_branch(xi, s, sign))
    }

    fn k_branch(&self, xi: f64, s: f64, sign: f64) -> f64 {
        let l = self.length;
        3.0 / self.beta * (self.sinh_ratio(l - xi - s) + sign * self.sinh_ratio(l - abs(xi - s)))
    }

    /// `lim K(xi, s)` as `s -> xi` from below.
    pub fn k_left_limit(&self, xi: f64) -> Result<f64> {
        let xi = self.check(xi)?;
        Ok(self.k_branch(xi, xi, 1.0))
    }

    /// `lim K(xi, s)` as `s -> xi` from above.
    pub fn k_right_limit(&self, xi: f64) -> Result<f64> {
        let xi = self.check(xi)?;
        Ok(self.k_branch(xi, xi, -1.0))
    }
}

/// Dense quadrature matrices of the integral operators on one mesh.
#[derive(Debug, Clone)]
pub struct GreenOperators {
    n: usize,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
}

impl GreenOperators {
    /// Trapezoid weights on the mesh nodes; for `Phi2` each cell adjacent to
    /// `s = xi` uses the matching one-sided limit of `K`.
    pub fn new(kernel: &GreenKernel, mesh: &SpatialMesh) -> Result<Self> {
        check_mesh_length(kernel, mesh)?;
        let n = mesh.n_nodes();
        let dx = mesh.dx();
        let x0 = mesh.x_left();
        let pos: Vec<f64> = (0..n)
            .map(|j| (mesh.node(j) - x0).clamp(0.0, kernel.length))
            .collect();
        let mut phi1 = alloc::vec![0.0; n * n];
        let mut phi2 = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let w = mesh.trapezoid_weight(j) * dx;
                phi1[i * n + j] = w * kernel.eval_g(pos[i], pos[j])?;
                phi2[i * n + j] = if i == j {
                    let mut d = 0.0;
                    if i > 0 {
                        d += 0.5 * dx * kernel.k_left_limit(pos[i])?;
                    }
                    if i + 1 < n {
                        d += 0.5 * dx * kernel.k_right_limit(pos[i])?;
                    }
                    d
                } else {
                    w * kernel.eval_k(pos[i], pos[j])?
                };
            }
        }
        Ok(Self { n, phi1, phi2 })
    }

    fn matrix(&self, which: PhiOperator) -> &[f64] {
        match which {
            PhiOperator::Phi1 => &self.phi1,
            PhiOperator::Phi2 => &self.phi2,
        }
    }

    pub fn apply(&self, which: PhiOperator, v: &[f64]) -> Vec<f64> {
        let m = self.matrix(which);
        (0..self.n)
            .map(|i| {
                let row = &m[i * self.n..(i + 1) * self.n];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    // interior rows only, boundary entries left at zero
    fn apply_interior(&self, which: PhiOperator, v: &[f64], out: &mut [f64]) {
        let m = self.matrix(which);
        let n = self.n;
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let row = &m[i * n..(i + 1) * n];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

fn check_mesh_length(kernel: &GreenKernel, mesh: &SpatialMesh) -> Result<()> {
    if abs(mesh.length() - kernel.length) > 1e-12 * kernel.length {
        return Err(Error::Configuration("mesh length differs from kernel length"));
    }
    Ok(())
}

/// `Phi1 phi` or `Phi2 phi` at every node of `phi`'s mesh.
pub fn apply_phi(kernel: &GreenKernel, which: PhiOperator, phi: &ScalarField) -> Result<ScalarField> {
    let ops = GreenOperators::new(kernel, phi.mesh())?;
    ScalarField::new(*phi.mesh(), ops.apply(which, phi.values()))
}

/// Classical RK4 on the nodal values of the integral formulation; boundary
/// nodes stay zero. `init` holds `(N0, V0)`.
pub fn solve_linear_integral(
    params: &ModelParams,
    c: &ScalarField,
    init: &WaveState,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if !params.is_linear() {
        return Err(Error::param("alpha_tilde", "integral formulation covers the linear system only"));
    }
    c.check_mesh(&init.eta)?;
    let mesh = *c.mesh();
    let kernel = GreenKernel::new(params.beta(), mesh.length())?;
    let ops = GreenOperators::new(&kernel, &mesh)?;
    let n = mesh.n_nodes();
    let cv = c.values();
    let dt = grid.dt();

    let rhs = |nv: &[f64], vv: &[f64], dn: &mut [f64], dv: &mut [f64], cn: &mut [f64]| {
        for j in 0..n {
            cn[j] = cv[j] * nv[j];
        }
        ops.apply_interior(PhiOperator::Phi2, vv, dn);
        ops.apply_interior(PhiOperator::Phi2, cn, dv);
    };

    let mut nv = init.eta.values().to_vec();
    let mut vv = init.vel.values().to_vec();
    for v in [&mut nv, &mut vv] {
        v[0] = 0.0;
        v[n - 1] = 0.0;
    }
    let mut states = Vec::with_capacity(grid.n_steps() + 1);
    states.push(WaveState::new(
        ScalarField::new(mesh, nv.clone())?,
        ScalarField::new(mesh, vv.clone())?,
    )?);

    let mut k = [[alloc::vec![0.0; n], alloc::vec![0.0; n]], [alloc::vec![0.0; n], alloc::vec![0.0; n]],
        [alloc::vec![0.0; n], alloc::vec![0.0; n]], [alloc::vec![0.0; n], alloc::vec![0.0; n]]];
    let mut tn = alloc::vec![0.0; n];
    let mut tv = alloc::vec![0.0; n];
    let mut cn = alloc::vec![0.0; n];
    for step in 1..=grid.n_steps() {
        for stage in 0..4 {
            let h = match stage {
                0 => 0.0,
                1 | 2 => 0.5 * dt,
                _ => dt,
            };
            for j in 0..n {
                if stage == 0 {
                    tn[j] = nv[j];
                    tv[j] = vv[j];
                } else {
                    tn[j] = nv[j] + h * k[stage - 1][0][j];
                    tv[j] = vv[j] + h * k[stage - 1][1][j];
                }
            }
            let [dn, dv] = &mut k[stage];
            rhs(&tn, &tv, dn, dv, &mut cn);
        }
        for j in 0..n {
            nv[j] += dt / 6.0 * (k[0][0][j] + 2.0 * k[1][0][j] + 2.0 * k[2][0][j] + k[3][0][j]);
            vv[j] += dt / 6.0 * (k[0][1][j] + 2.0 * k[1][1][j] + 2.0 * k[2][1][j] + k[3][1][j]);
        }
        let size = max_abs(&nv).max(max_abs(&vv));
        if !(size <= BLOW_UP) {
            return Err(Error::Instability { step });
        }
        states.push(WaveState::new(
            ScalarField::new(mesh, nv.clone())?,
            ScalarField::new(mesh, vv.clone())?,
        )?);
    }
    Trajectory::new(*grid, states)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_vanishes_at_left_end_and_is_symmetric() {
        let k = GreenKernel::new(0.1, 60.0).unwrap();
        for s in [0.0, 1.0, 30.0, 59.9, 60.0] {
            assert!(k.eval_g(0.0, s).unwrap().abs() < 1e-15);
            assert!(k.eval_g(60.0, s).unwrap().abs() < 1e-15);
        }
        assert!((k.eval_g(3.0, 7.5).unwrap() - k.eval_g(7.5, 3.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn matches_product_form() {
        // G = sinh(min/a) sinh((L-max)/a) / (a sinh(L/a)) on a short interval
        let (beta, l) = (0.6, 2.0);
        let k = GreenKernel::new(beta, l).unwrap();
        let a = (beta / 6.0f64).sqrt();
        for (x, s) in [(0.3, 1.1), (1.7, 0.2), (1.0, 1.0)] {
            let (lo, hi) = if x < s { (x, s) } else { (s, x) };
            let g = (lo / a).sinh() * ((l - hi) / a).sinh() / (a * (l / a).sinh());
            assert!((k.eval_g(x, s).unwrap() - g).abs() < 1e-13);
        }
    }

    #[test]
    fn k_is_derivative_of_g() {
        let k = GreenKernel::new(0.1, 10.0).unwrap();
        let h = 1e-6;
        for (x, s) in [(2.0, 2.5), (5.0, 3.0), (9.0, 0.5), (0.7, 8.8)] {
            let fd = (k.eval_g(x, s + h).unwrap() - k.eval_g(x, s - h).unwrap()) / (2.0 * h);
            let kv = k.eval_k(x, s).unwrap();
            assert!((fd - kv).abs() <= 1e-6 * kv.abs().max(1e-3), "{x},{s}: {fd} {kv}");
        }
    }

    #[test]
    fn diagonal_and_domain_errors() {
        let k = GreenKernel::new(0.1, 10.0).unwrap();
        assert_eq!(k.eval_k(3.0, 3.0), Err(Error::SingularPoint));
        assert!(matches!(k.eval_g(-1.0, 3.0), Err(Error::Domain { .. })));
        assert!(matches!(k.eval_g(3.0, 10.5), Err(Error::Domain { .. })));
        assert!(GreenKernel::new(0.0, 1.0).is_err());
    }

    #[test]
    fn huge_domain_does_not_overflow() {
        let k = GreenKernel::new(0.01, 60.0).unwrap();
        let g = k.eval_g(30.0, 30.0).unwrap();
        assert!(g.is_finite() && g > 0.0);
        let a = (0.01f64 / 6.0).sqrt();
        assert!((g - 1.0 / (2.0 * a)).abs() < 1e-10);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let mesh = SpatialMesh::new(-1.0, 1.0, 20).unwrap();
        let k = GreenKernel::new(0.1, 2.0).unwrap();
        let z = ScalarField::zeros(mesh);
        for w in [PhiOperator::Phi1, PhiOperator::Phi2] {
            assert!(apply_phi(&k, w, &z).unwrap().values().iter().all(|&v| v == 0.0));
        }
        let params = ModelParams::linear(0.1).unwrap();
        let grid = TimeGrid::new(0.5, 5).unwrap();
        let traj = solve_linear_integral(&params, &ScalarField::constant(mesh, 1.0), &WaveState::zeros(mesh), &grid).unwrap();
        assert!(traj.last().eta.values().iter().all(|&v| v == 0.0));
    }
}
