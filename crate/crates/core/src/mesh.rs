//! Uniform space and time discretizations.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Uniform partition of `[x_left, x_right]` into `n_cells` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialMesh {
    x_left: f64,
    x_right: f64,
    n_cells: usize,
}

impl SpatialMesh {
    pub fn new(x_left: f64, x_right: f64, n_cells: usize) -> Result<Self> {
        if !(x_left.is_finite() && x_right.is_finite()) || x_left >= x_right {
            return Err(Error::param("x_left/x_right", "need finite x_left < x_right"));
        }
        if n_cells < 2 {
            return Err(Error::param("n_cells", "need at least two cells"));
        }
        Ok(Self {
            x_left,
            x_right,
            n_cells,
        })
    }

    /// Mesh whose spacing is as close as possible to `dx`.
    pub fn with_spacing(x_left: f64, x_right: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::param("dx", "spacing must be positive"));
        }
        let n = ((x_right - x_left) / dx + 0.5) as usize;
        Self::new(x_left, x_right, n.max(2))
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_cells as f64
    }

    /// Coordinate of node `j`; the last node is exactly `x_right`.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_cells {
            self.x_right
        } else {
            self.x_left + j as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.node(j)).collect()
    }

    /// Trapezoid weight of node `j` (1/2 at the ends, 1 inside).
    pub fn trapezoid_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.n_cells {
            0.5
        } else {
            1.0
        }
    }

    /// Same mesh refined by an integer factor.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_cells: self.n_cells * factor.max(1),
            ..*self
        }
    }

    pub fn same_as(&self, other: &SpatialMesh) -> bool {
        self == other
    }
}

/// Uniform time grid on `[0, t_final]` with the theta-scheme weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
    theta: f64,
}

impl TimeGrid {
    pub const DEFAULT_THETA: f64 = 0.5;

    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        Self::with_theta(t_final, n_steps, Self::DEFAULT_THETA)
    }

    pub fn with_theta(t_final: f64, n_steps: usize, theta: f64) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::param("t_final", "must be positive and finite"));
        }
        if n_steps == 0 {
            return Err(Error::param("n_steps", "need at least one step"));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::param("theta", "must lie in [0, 1]"));
        }
        Ok(Self {
            t_final,
            n_steps,
            theta,
        })
    }

    /// Grid whose step is as close as possible to `dt`.
    pub fn with_step(t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", "time step must be positive"));
        }
        let n = (t_final / dt + 0.5) as usize;
        Self::new(t_final, n.max(1))
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_final
        } else {
            k as f64 * self.dt()
        }
    }

    /// Trapezoid weight of time level `k`, including the factor `dt`.
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        let w = if k == 0 || k == self.n_steps { 0.5 } else { 1.0 };
        w * self.dt()
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_steps: self.n_steps * factor.max(1),
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_meshes() {
        assert!(SpatialMesh::new(1.0, 1.0, 4).is_err());
        assert!(SpatialMesh::new(0.0, 1.0, 1).is_err());
        assert!(SpatialMesh::new(0.0, f64::NAN, 4).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::with_theta(1.0, 4, 1.5).is_err());
    }

    #[test]
    fn nodes_are_uniform_and_end_exactly() {
        let m = SpatialMesh::new(-20.0, 40.0, 500).unwrap();
        assert!((m.dx() - 0.12).abs() < 1e-15);
        let nodes = m.nodes();
        assert_eq!(nodes.len(), 501);
        assert_eq!(nodes[500], 40.0);
        for w in nodes.windows(2) {
            assert!((w[1] - w[0] - m.dx()).abs() < 1e-12);
        }
    }

    #[test]
    fn spacing_constructors_round_to_nearest() {
        let m = SpatialMesh::with_spacing(-20.0, 40.0, 60.0 / 700.0).unwrap();
        assert_eq!(m.n_cells(), 700);
        let g = TimeGrid::with_step(20.0, 20.0 / 1500.0).unwrap();
        assert_eq!(g.n_steps(), 1500);
        assert_eq!(g.theta(), 0.5);
    }
}
