//! P1 finite elements on a uniform mesh.
//!
//! All element integrals are exact. Operators are stored on the full node set;
//! the Dirichlet-constrained operator `h1op` has its boundary rows and columns
//! replaced by the identity.

use crate::field::ScalarField;
use crate::mesh::SpatialMesh;
use crate::{Error, Result};

pub use crate::linalg::{solve_tridiag, TriDiagMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledOperators {
    /// `int phi_i phi_j`
    pub mass: TriDiagMatrix,
    /// `int phi_i' phi_j'`
    pub stiff: TriDiagMatrix,
    /// `mass + (beta/6) stiff` with Dirichlet rows and columns constrained.
    pub h1op: TriDiagMatrix,
    /// `mass + (beta/6) stiff` without constraints (Gram matrix of the H1 product).
    pub h1_gram: TriDiagMatrix,
    /// `int phi_j phi_i'`: the weak form of `-d/dxi` acting on a P1 field.
    pub derivative: TriDiagMatrix,
}

pub fn mass_matrix(mesh: &SpatialMesh) -> TriDiagMatrix {
    let n = mesh.n_nodes();
    let h = mesh.dx();
    let mut m = TriDiagMatrix::zeros(n);
    for i in 0..n {
        m.diag[i] = if i == 0 || i == n - 1 { h / 3.0 } else { 2.0 * h / 3.0 };
        if i > 0 {
            m.sub[i] = h / 6.0;
        }
        if i + 1 < n {
            m.sup[i] = h / 6.0;
        }
    }
    m
}

pub fn stiffness_matrix(mesh: &SpatialMesh) -> TriDiagMatrix {
    let n = mesh.n_nodes();
    let h = mesh.dx();
    let mut k = TriDiagMatrix::zeros(n);
    for i in 0..n {
        k.diag[i] = if i == 0 || i == n - 1 { 1.0 / h } else { 2.0 / h };
        if i > 0 {
            k.sub[i] = -1.0 / h;
        }
        if i + 1 < n {
            k.sup[i] = -1.0 / h;
        }
    }
    k
}

pub fn derivative_matrix(mesh: &SpatialMesh) -> TriDiagMatrix {
    let n = mesh.n_nodes();
    let mut b = TriDiagMatrix::zeros(n);
    for i in 0..n {
        if i > 0 {
            b.sub[i] = 0.5;
        }
        if i + 1 < n {
            b.sup[i] = -0.5;
        }
    }
    b.diag[0] = -0.5;
    b.diag[n - 1] = 0.5;
    b
}

/// Replaces the first and last rows and columns by identity rows.
pub fn constrain_dirichlet(a: &TriDiagMatrix) -> TriDiagMatrix {
    let mut c = a.clone();
    let n = c.size();
    c.diag[0] = 1.0;
    c.sup[0] = 0.0;
    c.sub[1] = 0.0;
    c.diag[n - 1] = 1.0;
    c.sub[n - 1] = 0.0;
    c.sup[n - 2] = 0.0;
    c
}

pub fn assemble(mesh: &SpatialMesh, beta: f64) -> Result<AssembledOperators> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", "must be positive and finite"));
    }
    let mass = mass_matrix(mesh);
    let stiff = stiffness_matrix(mesh);
    let h1_gram = mass.axpy(beta / 6.0, &stiff);
    let h1op = constrain_dirichlet(&h1_gram);
    Ok(AssembledOperators {
        mass,
        stiff,
        h1op,
        h1_gram,
        derivative: derivative_matrix(mesh),
    })
}

/// Nodal interpolation `values[j] = f(xi_j)`.
pub fn interpolate(f: impl Fn(f64) -> f64, mesh: &SpatialMesh) -> Result<ScalarField> {
    ScalarField::from_fn(*mesh, f)
}
