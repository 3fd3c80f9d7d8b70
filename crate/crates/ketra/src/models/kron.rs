//! Kronecker-structured ridge solves.
//!
//! Every relation-slice update in this crate has the form
//!
//!   ((G2 ⊗ G1) + α·I) vec(R) = vec(B)
//!
//! with G1, G2 symmetric PSD Gram matrices. Eigendecomposing G1 = V1 D1 V1ᵀ
//! and G2 = V2 D2 V2ᵀ diagonalizes the operator without ever materializing
//! the p² × p² matrix: in the eigenbasis the system splits into scalar
//! equations (d1ᵢ d2ⱼ + α) yᵢⱼ = (V1ᵀ B V2)ᵢⱼ.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Cached eigendecompositions for repeated solves against the same Grams.
pub struct KronRidgeSolver {
    v1: DMatrix<f64>,
    d1: DVector<f64>,
    v2: DMatrix<f64>,
    d2: DVector<f64>,
}

/// Outcome flags of a lenient solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveFlags {
    /// Some eigen-coefficient was non-positive: the system was indefinite or
    /// singular and near-null components were replaced by the least-norm
    /// choice (zero).
    pub fell_back: bool,
}

impl KronRidgeSolver {
    pub fn new(g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> Result<KronRidgeSolver> {
        for (name, g) in [("G1", g1), ("G2", g2)] {
            if g.nrows() != g.ncols() {
                return Err(Error::ShapeMismatch(format!(
                    "{name} must be square, got {}×{}",
                    g.nrows(),
                    g.ncols()
                )));
            }
        }
        let e1 = SymmetricEigen::new((g1 + g1.transpose()) * 0.5);
        let e2 = SymmetricEigen::new((g2 + g2.transpose()) * 0.5);
        Ok(KronRidgeSolver {
            v1: e1.eigenvectors,
            d1: e1.eigenvalues,
            v2: e2.eigenvectors,
            d2: e2.eigenvalues,
        })
    }

    fn project(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rhs.nrows() != self.d1.len() || rhs.ncols() != self.d2.len() {
            return Err(Error::ShapeMismatch(format!(
                "rhs is {}×{}, expected {}×{}",
                rhs.nrows(),
                rhs.ncols(),
                self.d1.len(),
                self.d2.len()
            )));
        }
        Ok(self.v1.transpose() * rhs * &self.v2)
    }

    /// Strict solve: errors out if any coefficient d1ᵢ·d2ⱼ + α is numerically
    /// zero (singular system).
    pub fn solve(&self, alpha: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut y = self.project(rhs)?;
        let scale = self.coeff_scale(alpha);
        for i in 0..self.d1.len() {
            for j in 0..self.d2.len() {
                let den = self.d1[i] * self.d2[j] + alpha;
                if den.abs() <= 1e-12 * scale {
                    return Err(Error::Numerical(format!(
                        "singular Kronecker system: eigenvalue product {:.3e}·{:.3e} + α={:.3e}",
                        self.d1[i], self.d2[j], alpha
                    )));
                }
                y[(i, j)] /= den;
            }
        }
        Ok(&self.v1 * y * self.v2.transpose())
    }

    /// Lenient solve for the constrained models, where multiplier sums can
    /// push the ridge term negative. Near-null components get the least-norm
    /// value (zero) and the caller is told a fallback happened.
    pub fn solve_lenient(
        &self,
        alpha: f64,
        rhs: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, SolveFlags)> {
        let mut y = self.project(rhs)?;
        let scale = self.coeff_scale(alpha);
        let mut flags = SolveFlags::default();
        for i in 0..self.d1.len() {
            for j in 0..self.d2.len() {
                let den = self.d1[i] * self.d2[j] + alpha;
                if den <= 0.0 {
                    flags.fell_back = true;
                }
                if den.abs() <= 1e-12 * scale {
                    y[(i, j)] = 0.0;
                } else {
                    y[(i, j)] /= den;
                }
            }
        }
        Ok((&self.v1 * y * self.v2.transpose(), flags))
    }

    fn coeff_scale(&self, alpha: f64) -> f64 {
        let m1 = self.d1.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let m2 = self.d2.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        (m1 * m2 + alpha.abs()).max(1.0)
    }
}

/// One-shot solve of ((G2 ⊗ G1) + α·I) vec(R) = vec(rhs).
pub fn kron_ridge_solve(
    g1: &DMatrix<f64>,
    g2: &DMatrix<f64>,
    alpha: f64,
    rhs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if alpha < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "ridge coefficient must be nonnegative, got {alpha}"
        )));
    }
    KronRidgeSolver::new(g1, g2)?.solve(alpha, rhs)
}
