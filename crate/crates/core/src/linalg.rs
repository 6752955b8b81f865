//! Banded solvers: scalar tridiagonal (Thomas) and tridiagonal with 2x2 blocks.

use alloc::vec::Vec;

use crate::math::{abs, max_abs};
use crate::{Error, Result};

/// Tridiagonal matrix stored by bands. `sub[0]` and `sup[n-1]` are unused and
/// kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiagMatrix {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TriDiagMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            sub: alloc::vec![0.0; n],
            diag: alloc::vec![0.0; n],
            sup: alloc::vec![0.0; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        m.diag.iter_mut().for_each(|d| *d = 1.0);
        m
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j + 1 == i {
            self.sub[i]
        } else if i + 1 == j {
            self.sup[i]
        } else {
            0.0
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut y = alloc::vec![0.0; n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.size();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.sub[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let n = self.size();
        let mut t = Self::zeros(n);
        t.diag.copy_from_slice(&self.diag);
        for i in 1..n {
            t.sub[i] = self.sup[i - 1];
            t.sup[i - 1] = self.sub[i];
        }
        t
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &TriDiagMatrix) -> Self {
        let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + s * y).collect();
        Self {
            sub: comb(&self.sub, &other.sub),
            diag: comb(&self.diag, &other.diag),
            sup: comb(&self.sup, &other.sup),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (1..self.size()).all(|i| self.sub[i] == self.sup[i - 1])
    }
}

/// Solves `A x = rhs` by Thomas elimination (no pivoting).
pub fn solve_tridiag(a: &TriDiagMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.size();
    if rhs.len() != n {
        return Err(Error::Configuration("right-hand side length differs from matrix size"));
    }
    let scale = max_abs(&a.diag).max(max_abs(&a.sub)).max(max_abs(&a.sup));
    let tiny = scale * f64::EPSILON * 1e-3;
    let mut c = alloc::vec![0.0; n];
    let mut x = alloc::vec![0.0; n];
    let mut pivot = a.diag[0];
    if abs(pivot) <= tiny {
        return Err(Error::SingularMatrix { row: 0 });
    }
    c[0] = a.sup[0] / pivot;
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = a.diag[i] - a.sub[i] * c[i - 1];
        if abs(pivot) <= tiny {
            return Err(Error::SingularMatrix { row: i });
        }
        c[i] = if i + 1 < n { a.sup[i] / pivot } else { 0.0 };
        x[i] = (rhs[i] - a.sub[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

pub type Block = [[f64; 2]; 2];
pub type Pair = [f64; 2];

pub(crate) const ZERO_BLOCK: Block = [[0.0; 2]; 2];

#[inline]
fn bmul(a: &Block, b: &Block) -> Block {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

#[inline]
fn bsub(a: &Block, b: &Block) -> Block {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

#[inline]
fn bvec(a: &Block, x: &Pair) -> Pair {
    [
        a[0][0] * x[0] + a[0][1] * x[1],
        a[1][0] * x[0] + a[1][1] * x[1],
    ]
}

#[inline]
fn btrans(a: &Block) -> Block {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

#[inline]
fn binv(a: &Block, row: usize, tiny: f64) -> Result<Block> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(abs(det) > tiny) {
        return Err(Error::SingularMatrix { row });
    }
    Ok([
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ])
}

/// Block-tridiagonal matrix with 2x2 blocks; `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTriDiag {
    pub lower: Vec<Block>,
    pub diag: Vec<Block>,
    pub upper: Vec<Block>,
}

impl BlockTriDiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: alloc::vec![ZERO_BLOCK; n],
            diag: alloc::vec![ZERO_BLOCK; n],
            upper: alloc::vec![ZERO_BLOCK; n],
        }
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[Pair]) -> Vec<Pair> {
        let n = self.size();
        let mut y = alloc::vec![[0.0; 2]; n];
        for i in 0..n {
            let mut acc = bvec(&self.diag[i], &x[i]);
            if i > 0 {
                let l = bvec(&self.lower[i], &x[i - 1]);
                acc[0] += l[0];
                acc[1] += l[1];
            }
            if i + 1 < n {
                let u = bvec(&self.upper[i], &x[i + 1]);
                acc[0] += u[0];
                acc[1] += u[1];
            }
            y[i] = acc;
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let n = self.size();
        let mut t = Self::zeros(n);
        for i in 0..n {
            t.diag[i] = btrans(&self.diag[i]);
        }
        for i in 1..n {
            t.lower[i] = btrans(&self.upper[i - 1]);
            t.upper[i - 1] = btrans(&self.lower[i]);
        }
        t
    }

    /// Block LU factorization without pivoting.
    pub fn factor(&self) -> Result<BlockTriFactor> {
        let n = self.size();
        let scale = self
            .diag
            .iter()
            .flat_map(|b| b.iter().flatten())
            .fold(0.0f64, |m, &x| m.max(abs(x)));
        let tiny = scale * scale * 1e-28;
        let mut dinv = Vec::with_capacity(n);
        let mut ups = Vec::with_capacity(n);
        let mut d = self.diag[0];
        for i in 0..n {
            if i > 0 {
                // D_i = A_i - L_i D_{i-1}^{-1} U_{i-1}
                let prod = bmul(&self.lower[i], &ups[i - 1]);
                d = bsub(&self.diag[i], &prod);
            }
            let inv = binv(&d, i, tiny)?;
            ups.push(bmul(&inv, &self.upper[i]));
            dinv.push(inv);
        }
        Ok(BlockTriFactor {
            lower: self.lower.clone(),
            dinv,
            ups,
        })
    }

    pub fn solve(&self, rhs: &[Pair]) -> Result<Vec<Pair>> {
        Ok(self.factor()?.solve(rhs))
    }
}

/// Reusable factorization of a [`BlockTriDiag`].
#[derive(Debug, Clone)]
pub struct BlockTriFactor {
    lower: Vec<Block>,
    dinv: Vec<Block>,
    // D_i^{-1} U_i
    ups: Vec<Block>,
}

impl BlockTriFactor {
    pub fn solve(&self, rhs: &[Pair]) -> Vec<Pair> {
        let n = self.dinv.len();
        let mut y: Vec<Pair> = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = rhs[i];
            if i > 0 {
                let l = bvec(&self.lower[i], &y[i - 1]);
                r[0] -= l[0];
                r[1] -= l[1];
            }
            y.push(bvec(&self.dinv[i], &r));
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let u = bvec(&self.ups[i], &y[i + 1]);
            y[i][0] -= u[0];
            y[i][1] -= u[1];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve_returns_rhs() {
        let rhs = [1.0, -2.0, 3.5, 0.25];
        let x = solve_tridiag(&TriDiagMatrix::identity(4), &rhs).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut a = TriDiagMatrix::identity(3);
        a.diag[1] = 0.0;
        assert_eq!(solve_tridiag(&a, &[1.0; 3]), Err(Error::SingularMatrix { row: 1 }));
    }

    #[test]
    fn block_solve_matches_product() {
        let n = 6;
        let mut a = BlockTriDiag::zeros(n);
        for i in 0..n {
            a.diag[i] = [[4.0 + i as f64, 0.3], [-0.2, 5.0]];
            if i > 0 {
                a.lower[i] = [[1.0, 0.1], [0.5, -1.0]];
            }
            if i + 1 < n {
                a.upper[i] = [[-0.7, 0.2], [0.0, 1.1]];
            }
        }
        let x: Vec<Pair> = (0..n).map(|i| [i as f64 - 2.0, 0.5 * i as f64]).collect();
        let b = a.mul_vec(&x);
        let got = a.solve(&b).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g[0] - e[0]).abs() < 1e-13 && (g[1] - e[1]).abs() < 1e-13);
        }
        // (A^T y) . x == y . (A x)
        let y: Vec<Pair> = (0..n).map(|i| [1.0 / (1.0 + i as f64), -(i as f64)]).collect();
        let aty = a.transpose().mul_vec(&y);
        let lhs: f64 = aty.iter().zip(&x).map(|(p, q)| p[0] * q[0] + p[1] * q[1]).sum();
        let rhs: f64 = y.iter().zip(&b).map(|(p, q)| p[0] * q[0] + p[1] * q[1]).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
