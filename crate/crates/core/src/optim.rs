//! Projected limited-memory BFGS for simple bounds, with the relative-decrease
//! stopping rule `|J_new - J_old| / max(1, |J_new|, |J_old|) <= ftol`.
//!
//! Each iteration freezes the variables sitting at a bound with an outward
//! gradient, runs the two-loop recursion on the rest and searches along the
//! projected path `P(x + t d)`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::adjoint::GradientField;
use crate::field::{discrete_l2_norm, ScalarField};
use crate::math::{abs, dot, sqrt};
use crate::params::AdmissibleSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub memory: usize,
    pub ftol: f64,
    pub gtol: f64,
    pub max_iters: usize,
    pub ls_max: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            ftol: 1e-8,
            gtol: 1e-10,
            max_iters: 500,
            ls_max: 30,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::param("memory", "need at least one correction pair"));
        }
        if !(self.ftol > 0.0 && self.gtol > 0.0) {
            return Err(Error::param("tolerance", "ftol and gtol must be positive"));
        }
        if self.ls_max == 0 {
            return Err(Error::param("ls_max", "need at least one line-search trial"));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::param("wolfe", "need 0 < c1 < c2 < 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub iter: usize,
    pub objective: f64,
    pub pg_norm: f64,
    /// Euclidean length of the accepted step (0 for the starting point).
    pub step_len: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative decrease fell below `ftol`.
    Ftol,
    /// Projected-gradient norm fell below `gtol`.
    Gtol,
    MaxIterations,
    LineSearchFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Ftol => "ftol",
            Termination::Gtol => "gtol",
            Termination::MaxIterations => "max_iterations",
            Termination::LineSearchFailure => "line_search_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult<X> {
    pub x: X,
    pub objective: f64,
    pub history: Vec<IterateRecord>,
    pub termination: Termination,
}

impl<X> OptimResult<X> {
    /// Accepted outer iterations.
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

pub fn stop_check(j_prev: f64, j_next: f64, ftol: f64) -> bool {
    let scale = 1.0f64.max(abs(j_prev)).max(abs(j_next));
    abs(j_next - j_prev) / scale <= ftol
}

/// Box clip, then radial scaling into the L2 ball.
pub fn project_admissible(c: &ScalarField, set: &AdmissibleSet) -> Result<ScalarField> {
    set.check_len(c.len())?;
    let mut v = c.values().to_vec();
    project_values(&mut v, set, c.mesh(), discrete_l2_norm)?;
    ScalarField::new(*c.mesh(), v)
}

fn project_values(
    v: &mut [f64],
    set: &AdmissibleSet,
    mesh: &crate::mesh::SpatialMesh,
    norm: impl Fn(&ScalarField) -> Result<f64>,
) -> Result<()> {
    for (j, x) in v.iter_mut().enumerate() {
        *x = x.clamp(set.lo(j), set.hi(j));
    }
    if set.gamma().is_finite() {
        let f = ScalarField::new(*mesh, v.to_vec())?;
        let nrm = norm(&f)?;
        if nrm > set.gamma() {
            let s = set.gamma() / nrm;
            v.iter_mut().for_each(|x| *x *= s);
        }
    }
    Ok(())
}

/// Minimizes over the admissible set; `f` returns the value and gradient.
pub fn minimize<F>(f: F, x0: &ScalarField, set: &AdmissibleSet, cfg: &OptimConfig) -> Result<OptimResult<ScalarField>>
where
    F: FnMut(&ScalarField) -> Result<(f64, GradientField)>,
{
    minimize_with_observer(f, x0, set, cfg, |_, _| {})
}

/// As [`minimize`], calling `observer` after the start point and every accepted step.
pub fn minimize_with_observer<F, O>(
    mut f: F,
    x0: &ScalarField,
    set: &AdmissibleSet,
    cfg: &OptimConfig,
    mut observer: O,
) -> Result<OptimResult<ScalarField>>
where
    F: FnMut(&ScalarField) -> Result<(f64, GradientField)>,
    O: FnMut(&IterateRecord, &ScalarField),
{
    set.check_len(x0.len())?;
    let mesh = *x0.mesh();
    let project = |v: &mut [f64]| project_values(v, set, &mesh, discrete_l2_norm);
    let lo: Vec<f64> = (0..x0.len()).map(|j| set.lo(j)).collect();
    let hi: Vec<f64> = (0..x0.len()).map(|j| set.hi(j)).collect();
    let res = run(
        |x: &[f64]| {
            let field = ScalarField::new(mesh, x.to_vec())?;
            let (v, g) = f(&field)?;
            Ok((v, g.values.into_values()))
        },
        x0.values().to_vec(),
        &lo,
        &hi,
        project,
        cfg,
        |rec, x| {
            if let Ok(field) = ScalarField::new(mesh, x.to_vec()) {
                observer(rec, &field)
            }
        },
    )?;
    Ok(OptimResult {
        x: ScalarField::new(mesh, res.x)?,
        objective: res.objective,
        history: res.history,
        termination: res.termination,
    })
}

/// Plain-vector version with optional per-component bounds (no ball).
pub fn minimize_box<F>(
    f: F,
    x0: &[f64],
    lo: Option<&[f64]>,
    hi: Option<&[f64]>,
    cfg: &OptimConfig,
) -> Result<OptimResult<Vec<f64>>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let lo: Vec<f64> = lo.map_or_else(|| alloc::vec![f64::NEG_INFINITY; n], |b| b.to_vec());
    let hi: Vec<f64> = hi.map_or_else(|| alloc::vec![f64::INFINITY; n], |b| b.to_vec());
    if lo.len() != n || hi.len() != n {
        return Err(Error::Configuration("bounds differ in length from the start point"));
    }
    let (l2, h2) = (lo.clone(), hi.clone());
    let project = move |v: &mut [f64]| {
        for (j, x) in v.iter_mut().enumerate() {
            *x = x.clamp(l2[j], h2[j]);
        }
        Ok(())
    };
    run(f, x0.to_vec(), &lo, &hi, project, cfg, |_, _| {})
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
    cap: usize,
}

impl Memory {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        let (ns, ny) = (sqrt(dot(&s, &s)), sqrt(dot(&y, &y)));
        if !(sy > 1e-12 * ns * ny) {
            return;
        }
        if self.pairs.len() == self.cap {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y));
    }

    /// `-H g` restricted to the free variables.
    fn direction(&self, g: &[f64], free: &[bool]) -> Vec<f64> {
        let mask = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(free).map(|(&x, &f)| if f { x } else { 0.0 }).collect()
        };
        let mut q = mask(g);
        let m = self.pairs.len();
        let mut alpha = alloc::vec![0.0; m];
        let mut rho = alloc::vec![0.0; m];
        let masked: Vec<(Vec<f64>, Vec<f64>)> =
            self.pairs.iter().map(|(s, y)| (mask(s), mask(y))).collect();
        for i in (0..m).rev() {
            let (s, y) = &masked[i];
            let sy = dot(s, y);
            if !(sy > 0.0) {
                return q.iter().map(|x| -x).collect();
            }
            rho[i] = 1.0 / sy;
            alpha[i] = rho[i] * dot(s, &q);
            for (qj, yj) in q.iter_mut().zip(y) {
                *qj -= alpha[i] * yj;
            }
        }
        if let Some((s, y)) = masked.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|x| *x *= gamma);
        }
        for i in 0..m {
            let (s, y) = &masked[i];
            let b = rho[i] * dot(y, &q);
            for (qj, sj) in q.iter_mut().zip(s) {
                *qj += (alpha[i] - b) * sj;
            }
        }
        q.iter().map(|x| -x).collect()
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(abs(x)))
}

fn check_finite(v: f64, g: &[f64]) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Evaluation { index: 0 });
    }
    if let Some(index) = g.iter().position(|x| !x.is_finite()) {
        return Err(Error::Evaluation { index });
    }
    Ok(())
}

fn run<F, P, O>(
    mut f: F,
    mut x: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    project: P,
    cfg: &OptimConfig,
    mut observer: O,
) -> Result<OptimResult<Vec<f64>>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    P: Fn(&mut [f64]) -> Result<()>,
    O: FnMut(&IterateRecord, &[f64]),
{
    cfg.validate()?;
    let n = x.len();
    project(&mut x)?;
    let (mut fx, mut g) = f(&x)?;
    check_finite(fx, &g)?;
    if g.len() != n {
        return Err(Error::Configuration("gradient length differs from the variable count"));
    }
    let pg_norm = |x: &[f64], g: &[f64]| -> Result<f64> {
        let mut t: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        project(&mut t)?;
        Ok(x.iter().zip(&t).fold(0.0, |m, (a, b)| m.max(abs(a - b))))
    };

    let mut mem = Memory {
        pairs: VecDeque::with_capacity(cfg.memory),
        cap: cfg.memory,
    };
    let first = IterateRecord {
        iter: 0,
        objective: fx,
        pg_norm: pg_norm(&x, &g)?,
        step_len: 0.0,
    };
    observer(&first, &x);
    let mut history = alloc::vec![first];
    let finish = |x, fx, history, termination| OptimResult {
        x,
        objective: fx,
        history,
        termination,
    };

    loop {
        let k = history.len() - 1;
        if history[k].pg_norm <= cfg.gtol {
            return Ok(finish(x, fx, history, Termination::Gtol));
        }
        if k >= cfg.max_iters {
            return Ok(finish(x, fx, history, Termination::MaxIterations));
        }

        let free: Vec<bool> = (0..n)
            .map(|j| !((x[j] <= lo[j] && g[j] > 0.0) || (x[j] >= hi[j] && g[j] < 0.0)))
            .collect();
        let mut d = mem.direction(&g, &free);
        if !(dot(&d, &g) < 0.0) {
            mem.pairs.clear();
            d = g.iter().zip(&free).map(|(&v, &fr)| if fr { -v } else { 0.0 }).collect();
        }
        let mut t = if mem.pairs.is_empty() {
            let dn = sqrt(dot(&d, &d));
            if dn > 0.0 { 1.0 / dn } else { 0.0 }
        } else {
            1.0
        };
        if t == 0.0 {
            return Ok(finish(x, fx, history, Termination::Gtol));
        }

        // (x, f, g, step)
        let mut best: Option<(Vec<f64>, f64, Vec<f64>)> = None;
        let mut backtracking = false;
        for _ in 0..cfg.ls_max {
            let mut xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            project(&mut xt)?;
            let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            if inf_norm(&s) == 0.0 {
                break;
            }
            let gs = dot(&g, &s);
            match f(&xt) {
                Ok((ft, gt)) => {
                    check_finite(ft, &gt)?;
                    if ft <= fx + cfg.c1 * gs {
                        let curvature = dot(&gt, &s) >= cfg.c2 * gs;
                        let improves = best.as_ref().is_none_or(|b| ft < b.1);
                        if improves {
                            best = Some((xt, ft, gt));
                        }
                        if curvature || backtracking || !improves {
                            break;
                        }
                        t *= 2.0;
                    } else {
                        if best.is_some() {
                            break;
                        }
                        backtracking = true;
                        // safeguarded quadratic interpolation of phi(t)
                        let denom = 2.0 * (ft - fx - gs);
                        let tq = if denom > 0.0 { -gs * t / denom } else { 0.5 * t };
                        t = tq.clamp(0.1 * t, 0.5 * t);
                    }
                }
                Err(Error::Evaluation { index }) => return Err(Error::Evaluation { index }),
                Err(_) => {
                    if best.is_some() {
                        break;
                    }
                    backtracking = true;
                    t *= 0.5;
                }
            }
        }
        let Some((xn, fnew, gn)) = best else {
            return Ok(finish(x, fx, history, Termination::LineSearchFailure));
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let step_len = sqrt(dot(&s, &s));
        mem.push(s, y);
        let f_old = fx;
        x = xn;
        fx = fnew;
        g = gn;
        let rec = IterateRecord {
            iter: k + 1,
            objective: fx,
            pg_norm: pg_norm(&x, &g)?,
            step_len,
        };
        observer(&rec, &x);
        history.push(rec);
        if stop_check(f_old, fx, cfg.ftol) {
            return Ok(finish(x, fx, history, Termination::Ftol));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpatialMesh;

    #[test]
    fn stop_check_cases() {
        assert!(stop_check(5.0, 5.0, 1e-12));
        assert!(stop_check(2.0, 2.0 + 1e-9, 1e-8));
        assert!(!stop_check(0.1, 0.2, 1e-8));
        assert_eq!(OptimConfig::default().ftol, 1e-8);
    }

    #[test]
    fn projection_cases() {
        let m = SpatialMesh::new(0.0, 1.0, 4).unwrap();
        let c = ScalarField::constant(m, 0.5);
        assert_eq!(project_admissible(&c, &AdmissibleSet::new(1.0, None, None).unwrap()).unwrap(), c);
        let two = ScalarField::constant(m, 2.0);
        let p = project_admissible(&two, &AdmissibleSet::new(1.0, None, None).unwrap()).unwrap();
        assert!(p.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let mixed = ScalarField::new(m, alloc::vec![1.0, 0.2, 0.7, 0.2, 3.0]).unwrap();
        let set = AdmissibleSet::new(f64::INFINITY, Some(alloc::vec![0.5; 5]), None).unwrap();
        let p = project_admissible(&mixed, &set).unwrap();
        assert_eq!(p.values(), &[1.0, 0.5, 0.7, 0.5, 3.0]);
    }

    #[test]
    fn rosenbrock_two_variables() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a);
            let g = alloc::vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a)
            ];
            Ok((v, g))
        };
        let cfg = OptimConfig { ftol: 1e-20, ..OptimConfig::default() };
        let r = minimize_box(f, &[-1.2, 1.0], None, None, &cfg).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?} {:?}", r.x, r.termination);
    }

    #[test]
    fn bound_constrained_parabola() {
        let f = |x: &[f64]| Ok((x[0] * x[0], alloc::vec![2.0 * x[0]]));
        let r = minimize_box(f, &[3.0], Some(&[1.0]), None, &OptimConfig::default()).unwrap();
        assert_eq!(r.x[0], 1.0);
        assert_eq!(r.termination, Termination::Gtol);
        assert_eq!(r.history.last().unwrap().pg_norm, 0.0);
    }
}
