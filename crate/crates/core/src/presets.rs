//! Closed-form coefficients and initial profiles of the reconstruction experiments.
//!
//! Discontinuities follow the interval conventions of each definition, e.g.
//! [`irregular_step`] is 1.3 on `5 <= xi < 15`.

use crate::field::ScalarField;
use crate::math::exp;
use crate::mesh::SpatialMesh;
use crate::{Error, Result};

/// Chain of Gaussians around a unit background.
pub fn gauss_coeff(xi: f64) -> f64 {
    let g = |c: f64| exp(-(xi - c) * (xi - c));
    1.0 + 0.5 * g(5.0) - 0.3 * g(7.0) + 0.7 * g(9.0) - 0.6 * g(10.0) + 0.7 * g(12.0)
}

pub fn irregular_step(xi: f64) -> f64 {
    if (5.0..15.0).contains(&xi) {
        1.3
    } else {
        1.0
    }
}

/// Continuous, piecewise linear with kinks at 5, 8, 14 and 18.
pub fn piecewise_linear(xi: f64) -> f64 {
    if (5.0..=8.0).contains(&xi) {
        1.0 + 0.1 * (xi - 5.0)
    } else if xi > 8.0 && xi <= 14.0 {
        0.6 - (7.0 / 60.0) * (xi - 14.0)
    } else if xi > 14.0 && xi <= 18.0 {
        1.0 + 0.1 * (xi - 18.0)
    } else {
        1.0
    }
}

pub fn multi_step(xi: f64) -> f64 {
    if (3.0..=5.0).contains(&xi) {
        1.3
    } else if xi > 5.0 && xi <= 10.0 {
        1.4
    } else if xi > 10.0 && xi <= 13.0 {
        1.2
    } else if xi > 13.0 && xi <= 16.0 {
        1.3
    } else {
        1.0
    }
}

pub fn unit_coeff(_xi: f64) -> f64 {
    1.0
}

/// `exp(-(xi - 3)^2)`
pub fn bump_at_three(xi: f64) -> f64 {
    exp(-(xi - 3.0) * (xi - 3.0))
}

/// `exp(-xi^2)`
pub fn bump_at_origin(xi: f64) -> f64 {
    exp(-xi * xi)
}

pub const COEFFICIENT_PRESETS: [&str; 5] = [
    "gauss_coeff",
    "irregularcoeff1",
    "piecewise_linear",
    "multi_step",
    "unit",
];

pub const INITIAL_PRESETS: [&str; 2] = ["bump_at_three", "bump_at_origin"];

pub fn coefficient_fn(name: &str) -> Result<fn(f64) -> f64> {
    Ok(match name {
        "gauss_coeff" => gauss_coeff,
        "irregularcoeff1" => irregular_step,
        "piecewise_linear" => piecewise_linear,
        "multi_step" => multi_step,
        "unit" => unit_coeff,
        _ => return Err(Error::Configuration("unknown coefficient preset")),
    })
}

pub fn initial_fn(name: &str) -> Result<fn(f64) -> f64> {
    Ok(match name {
        "bump_at_three" => bump_at_three,
        "bump_at_origin" => bump_at_origin,
        _ => return Err(Error::Configuration("unknown initial-data preset")),
    })
}

/// Nodal samples of a named coefficient.
pub fn coefficient_preset(name: &str, mesh: &SpatialMesh) -> Result<ScalarField> {
    ScalarField::from_fn(*mesh, coefficient_fn(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_value_at_five() {
        let e = libm::exp;
        let expected = 1.0 + 0.5 - 0.3 * e(-4.0) + 0.7 * e(-16.0) - 0.6 * e(-25.0) + 0.7 * e(-49.0);
        assert!((gauss_coeff(5.0) - expected).abs() < 1e-15);
        assert!((gauss_coeff(5.0) - 1.494505).abs() < 1e-6);
        assert!((gauss_coeff(-20.0) - 1.0).abs() < 1e-10);
        assert!((gauss_coeff(40.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn step_and_linear_values() {
        assert_eq!(irregular_step(10.0), 1.3);
        assert_eq!(irregular_step(20.0), 1.0);
        assert_eq!(irregular_step(5.0), 1.3);
        assert_eq!(irregular_step(15.0), 1.0);
        assert!((piecewise_linear(8.0) - 1.3).abs() < 1e-15);
        assert!((piecewise_linear(14.0) - 0.6).abs() < 1e-15);
        // continuity at every kink
        for k in [5.0, 8.0, 14.0, 18.0] {
            assert!((piecewise_linear(k - 1e-9) - piecewise_linear(k + 1e-9)).abs() < 1e-7);
        }
        assert_eq!(multi_step(4.0), 1.3);
        assert_eq!(multi_step(7.0), 1.4);
        assert_eq!(multi_step(12.0), 1.2);
        assert_eq!(multi_step(15.0), 1.3);
        assert_eq!(multi_step(17.0), 1.0);
    }

    #[test]
    fn lookup_by_name() {
        let mesh = SpatialMesh::new(-20.0, 40.0, 60).unwrap();
        for name in COEFFICIENT_PRESETS {
            assert!(coefficient_preset(name, &mesh).is_ok());
        }
        assert!(coefficient_preset("nope", &mesh).is_err());
        let f = coefficient_preset("irregularcoeff1", &mesh).unwrap();
        assert_eq!(f.values()[30], 1.3);
    }
}
