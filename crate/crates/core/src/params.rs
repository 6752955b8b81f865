//! Model parameters, the admissible coefficient set and the constants of the
//! a-priori energy estimates.

use alloc::vec::Vec;

use crate::field::{discrete_l2_norm, ScalarField};
use crate::math::{ln, sqrt};
use crate::{Error, Result};

/// Dispersion `beta > 0` and nonlinearity `alpha_tilde >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    beta: f64,
    alpha_tilde: f64,
}

impl ModelParams {
    pub fn new(beta: f64, alpha_tilde: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", "must be positive and finite"));
        }
        if !(alpha_tilde >= 0.0 && alpha_tilde.is_finite()) {
            return Err(Error::param("alpha_tilde", "must be nonnegative and finite"));
        }
        Ok(Self { beta, alpha_tilde })
    }

    pub fn linear(beta: f64) -> Result<Self> {
        Self::new(beta, 0.0)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha_tilde(&self) -> f64 {
        self.alpha_tilde
    }

    pub fn is_linear(&self) -> bool {
        self.alpha_tilde == 0.0
    }
}

/// Coefficients with `|c|_L2 <= gamma`, optionally boxed nodewise.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleSet {
    gamma: f64,
    box_lo: Option<Vec<f64>>,
    box_hi: Option<Vec<f64>>,
}

impl AdmissibleSet {
    /// `gamma = f64::INFINITY` disables the ball.
    pub fn new(gamma: f64, box_lo: Option<Vec<f64>>, box_hi: Option<Vec<f64>>) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::param("gamma", "must be positive"));
        }
        if let (Some(lo), Some(hi)) = (&box_lo, &box_hi) {
            if lo.len() != hi.len() {
                return Err(Error::Configuration("box bounds differ in length"));
            }
            if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                return Err(Error::param("box", "need box_lo <= box_hi nodewise"));
            }
        }
        Ok(Self {
            gamma,
            box_lo,
            box_hi,
        })
    }

    pub fn unconstrained() -> Self {
        Self {
            gamma: f64::INFINITY,
            box_lo: None,
            box_hi: None,
        }
    }

    /// Uniform box `[lo, hi]` on `n` nodes, no ball.
    pub fn uniform_box(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            f64::INFINITY,
            Some(alloc::vec![lo; n]),
            Some(alloc::vec![hi; n]),
        )
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn box_lo(&self) -> Option<&[f64]> {
        self.box_lo.as_deref()
    }

    pub fn box_hi(&self) -> Option<&[f64]> {
        self.box_hi.as_deref()
    }

    pub(crate) fn lo(&self, j: usize) -> f64 {
        self.box_lo.as_ref().map_or(f64::NEG_INFINITY, |b| b[j])
    }

    pub(crate) fn hi(&self, j: usize) -> f64 {
        self.box_hi.as_ref().map_or(f64::INFINITY, |b| b[j])
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        let bad = |b: &Option<Vec<f64>>| b.as_ref().is_some_and(|v| v.len() != n);
        if bad(&self.box_lo) || bad(&self.box_hi) {
            Err(Error::Configuration("box bounds differ from coefficient length"))
        } else {
            Ok(())
        }
    }
}

/// Constants of the linear energy estimates.
///
/// `k_c = L^(1/2)/(beta/6) |c|_L2 + (beta/6)^(-1/2)`, `k2 = exp(k_c T)` and
/// `k1 = exp((k_c + k_c~) T)`. The exponentials overflow for realistic domains,
/// so `k1` and `k2` are kept as logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConstants {
    pub k_c: f64,
    pub ln_k1: f64,
    pub ln_k2: f64,
    length: f64,
    beta: f64,
    t_final: f64,
}

impl EnergyConstants {
    pub fn k_c(c: &ScalarField, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::param("beta", "must be positive"));
        }
        let b = beta / 6.0;
        let length = c.mesh().length();
        Ok(sqrt(length) / b * discrete_l2_norm(c)? + 1.0 / sqrt(b))
    }

    /// Constants for coefficient `c`; `k1` pairs it with `c_tilde` (or with
    /// itself when absent).
    pub fn new(
        c: &ScalarField,
        c_tilde: Option<&ScalarField>,
        beta: f64,
        t_final: f64,
    ) -> Result<Self> {
        let k_c = Self::k_c(c, beta)?;
        let k_tilde = match c_tilde {
            Some(ct) => Self::k_c(ct, beta)?,
            None => k_c,
        };
        Ok(Self {
            k_c,
            ln_k1: (k_c + k_tilde) * t_final,
            ln_k2: k_c * t_final,
            length: c.mesh().length(),
            beta,
            t_final,
        })
    }

    pub fn k1(&self) -> f64 {
        crate::math::exp(self.ln_k1)
    }

    pub fn k2(&self) -> f64 {
        crate::math::exp(self.ln_k2)
    }

    /// Log of the right side of the forward estimate
    /// `|(N,V)|^2 <= T^(1/2) |(N0,V0)|^2 exp(k_c T)` (squared norms).
    pub fn ln_forward_bound_sq(&self, init_norm: f64) -> f64 {
        0.5 * ln(self.t_final) + 2.0 * ln(init_norm) + self.ln_k2
    }

    /// Log of the difference-trajectory bound
    /// `L^(1/2) T^(3/2)/(beta/6) |c~ - c| |(N0,V0)| k1`.
    pub fn ln_difference_bound(&self, coeff_gap: f64, init_norm: f64) -> f64 {
        0.5 * ln(self.length) + 1.5 * ln(self.t_final) - ln(self.beta / 6.0)
            + ln(coeff_gap)
            + ln(init_norm)
            + self.ln_k1
    }

    /// Log of the adjoint bound `T^(1/2) |(eta_T, gamma_T)| k2`.
    pub fn ln_adjoint_bound(&self, final_norm: f64) -> f64 {
        0.5 * ln(self.t_final) + ln(final_norm) + self.ln_k2
    }

    /// Log of the adjoint-difference bound
    /// `T^(1/2) [ |(R_T,H_T)| + L^(1/2)/(beta/6) T^(1/2) |c~-c| |gamma~| ] k2`.
    pub fn ln_adjoint_difference_bound(
        &self,
        final_gap: f64,
        coeff_gap: f64,
        gamma_tilde_norm: f64,
    ) -> f64 {
        let inner = final_gap
            + sqrt(self.length) / (self.beta / 6.0)
                * sqrt(self.t_final)
                * coeff_gap
                * gamma_tilde_norm;
        0.5 * ln(self.t_final) + ln(inner) + self.ln_k2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpatialMesh;

    #[test]
    fn params_invariants() {
        assert!(ModelParams::new(0.0, 0.0).is_err());
        assert!(ModelParams::new(0.1, -0.01).is_err());
        assert!(ModelParams::new(0.1, 0.05).unwrap().beta() == 0.1);
        assert!(ModelParams::linear(0.1).unwrap().is_linear());
    }

    #[test]
    fn admissible_set_invariants() {
        assert!(AdmissibleSet::new(0.0, None, None).is_err());
        assert!(AdmissibleSet::new(1.0, Some(alloc::vec![1.0]), Some(alloc::vec![0.0])).is_err());
        assert!(AdmissibleSet::uniform_box(3, 0.1, 10.0).is_ok());
    }

    #[test]
    fn k_c_matches_formula() {
        let m = SpatialMesh::new(0.0, 4.0, 8).unwrap();
        let c = ScalarField::constant(m, 1.0);
        let beta = 0.6;
        // |c|_L2 = 2, L^(1/2) = 2, beta/6 = 0.1
        let expected = 2.0 / 0.1 * 2.0 + 1.0 / 0.1f64.sqrt();
        let k = EnergyConstants::new(&c, None, beta, 1.0).unwrap();
        assert!((k.k_c - expected).abs() < 1e-12);
        assert!((k.ln_k2 - expected).abs() < 1e-12);
        assert!((k.ln_k1 - 2.0 * expected).abs() < 1e-12);
    }
}
