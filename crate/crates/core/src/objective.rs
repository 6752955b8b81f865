//! Tikhonov-regularized misfit functionals of the final-time state.
//!
//! All integrals use the trapezoid rule on the nodes; the H1 misfit uses the
//! exact P1 Gram matrix.

use alloc::vec::Vec;

use crate::fem::{mass_matrix, stiffness_matrix};
use crate::field::{discrete_l2_norm, weighted_h1_norm, ScalarField, WaveState};
use crate::math::sqrt;
use crate::{Error, Result};

pub const DEFAULT_L1_EPS: f64 = 1e-8;

/// Final-time observations `(m1, m2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub m1: ScalarField,
    pub m2: ScalarField,
}

impl Measurement {
    pub fn new(m1: ScalarField, m2: ScalarField) -> Result<Self> {
        m1.check_mesh(&m2)?;
        if !(m1.has_zero_boundary() && m2.has_zero_boundary()) {
            return Err(Error::param("measurement", "boundary values must be zero"));
        }
        Ok(Self { m1, m2 })
    }

    pub fn from_state(state: &WaveState) -> Result<Self> {
        Self::new(state.eta.clone(), state.vel.clone())
    }

    pub fn as_state(&self) -> WaveState {
        WaveState {
            eta: self.m1.clone(),
            vel: self.m2.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveVariant {
    /// Weighted-H1 misfit with `(alpha/2)|c|^2` in L2.
    H1Tikhonov { beta: f64 },
    /// L2 misfit with `(alpha/2)|M - 1|^2`.
    L2Dev1,
    /// L2 misfit with `(alpha/2) int sqrt((M-1)^2 + eps^2)`.
    L1Dev1,
    /// L2 misfit with `(alpha/2)|M|^2`.
    L2Plain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub variant: ObjectiveVariant,
    pub alpha: f64,
    pub measurement: Measurement,
    pub l1_smoothing_eps: f64,
}

impl ObjectiveSpec {
    pub fn new(variant: ObjectiveVariant, alpha: f64, measurement: Measurement) -> Result<Self> {
        Self::with_eps(variant, alpha, measurement, DEFAULT_L1_EPS)
    }

    pub fn with_eps(
        variant: ObjectiveVariant,
        alpha: f64,
        measurement: Measurement,
        l1_smoothing_eps: f64,
    ) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", "must be nonnegative and finite"));
        }
        if !(l1_smoothing_eps > 0.0) {
            return Err(Error::param("l1_smoothing_eps", "must be positive"));
        }
        if let ObjectiveVariant::H1Tikhonov { beta } = variant {
            if !(beta > 0.0) {
                return Err(Error::param("beta", "must be positive"));
            }
        }
        Ok(Self {
            variant,
            alpha,
            measurement,
            l1_smoothing_eps,
        })
    }
}

fn misfit(spec: &ObjectiveSpec, state: &WaveState) -> Result<f64> {
    let r1 = state.eta.sub(&spec.measurement.m1)?;
    let r2 = state.vel.sub(&spec.measurement.m2)?;
    let norm = |f: &ScalarField| match spec.variant {
        ObjectiveVariant::H1Tikhonov { beta } => weighted_h1_norm(f, beta),
        _ => discrete_l2_norm(f),
    };
    let (a, b) = (norm(&r1)?, norm(&r2)?);
    Ok(0.5 * (a * a + b * b))
}

fn regularizer(spec: &ObjectiveSpec, coeff: &ScalarField) -> Result<f64> {
    if spec.alpha == 0.0 {
        return Ok(0.0);
    }
    let mesh = coeff.mesh();
    let dx = mesh.dx();
    let eps = spec.l1_smoothing_eps;
    let v = coeff.values();
    let sum = |g: &dyn Fn(f64) -> f64| -> f64 {
        v.iter()
            .enumerate()
            .map(|(j, &m)| mesh.trapezoid_weight(j) * g(m) * dx)
            .sum()
    };
    let r = match spec.variant {
        ObjectiveVariant::H1Tikhonov { .. } | ObjectiveVariant::L2Plain => sum(&|m| m * m),
        ObjectiveVariant::L2Dev1 => sum(&|m| (m - 1.0) * (m - 1.0)),
        ObjectiveVariant::L1Dev1 => sum(&|m| sqrt((m - 1.0) * (m - 1.0) + eps * eps)),
    };
    Ok(0.5 * spec.alpha * r)
}

/// Misfit of `final_state` plus the regularizer of `coeff`.
pub fn eval_objective(spec: &ObjectiveSpec, final_state: &WaveState, coeff: &ScalarField) -> Result<f64> {
    final_state.eta.check_mesh(&spec.measurement.m1)?;
    coeff.check_mesh(&spec.measurement.m1)?;
    Ok(misfit(spec, final_state)? + regularizer(spec, coeff)?)
}

/// Derivative of the misfit with respect to the nodal final state.
pub fn misfit_gradient(spec: &ObjectiveSpec, final_state: &WaveState) -> Result<(Vec<f64>, Vec<f64>)> {
    let r1 = final_state.eta.sub(&spec.measurement.m1)?;
    let r2 = final_state.vel.sub(&spec.measurement.m2)?;
    let mesh = *r1.mesh();
    match spec.variant {
        ObjectiveVariant::H1Tikhonov { beta } => {
            let gram = mass_matrix(&mesh).axpy(beta / 6.0, &stiffness_matrix(&mesh));
            Ok((gram.mul_vec(r1.values()), gram.mul_vec(r2.values())))
        }
        _ => {
            let dx = mesh.dx();
            let w = |f: &ScalarField| -> Vec<f64> {
                f.values()
                    .iter()
                    .enumerate()
                    .map(|(j, &r)| mesh.trapezoid_weight(j) * dx * r)
                    .collect()
            };
            Ok((w(&r1), w(&r2)))
        }
    }
}

/// Derivative of the regularizer with respect to the nodal coefficient.
pub fn regularizer_gradient(spec: &ObjectiveSpec, coeff: &ScalarField) -> Vec<f64> {
    let mesh = coeff.mesh();
    let dx = mesh.dx();
    let (alpha, eps) = (spec.alpha, spec.l1_smoothing_eps);
    coeff
        .values()
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let w = alpha * mesh.trapezoid_weight(j) * dx;
            match spec.variant {
                ObjectiveVariant::H1Tikhonov { .. } | ObjectiveVariant::L2Plain => w * m,
                ObjectiveVariant::L2Dev1 => w * (m - 1.0),
                ObjectiveVariant::L1Dev1 => {
                    let d = m - 1.0;
                    0.5 * w * d / sqrt(d * d + eps * eps)
                }
            }
        })
        .collect()
}

/// `|computed - exact|` in the discrete L2 norm.
pub fn misfit_error(coeff_computed: &ScalarField, coeff_exact: &ScalarField) -> Result<f64> {
    discrete_l2_norm(&coeff_computed.sub(coeff_exact)?)
}
