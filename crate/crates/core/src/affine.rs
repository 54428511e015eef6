//! Affine changes of variables `Φ(x) = A x + b`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An invertible affine map on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    /// Row-major `d × d` linear part.
    linear: Vec<f64>,
    translation: Vec<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, translation: Vec<f64>) -> Result<Self> {
        let d = translation.len();
        if linear.nrows() != d || linear.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: linear.nrows(),
            });
        }
        let det = linear.determinant();
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::Singular {
                condition: f64::INFINITY,
            });
        }
        let mut rows = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                rows.push(linear[(i, j)]);
            }
        }
        Ok(Self {
            linear: rows,
            translation,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), vec![0.0; dim]).expect("identity is invertible")
    }

    /// `x ↦ scale · x + shift` in one dimension.
    pub fn scaling_1d(scale: f64, shift: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, scale), vec![shift])
    }

    /// The map taking the reference triangle (-1,-1), (-1,1), (1,-1) onto
    /// the triangle with vertices `v0, v1, v2` (in that correspondence).
    pub fn reference_triangle_to(v0: [f64; 2], v1: [f64; 2], v2: [f64; 2]) -> Result<Self> {
        // Φ(-1,-1) = v0, Φ(-1,1) = v1, Φ(1,-1) = v2
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                0.5 * (v2[0] - v0[0]),
                0.5 * (v1[0] - v0[0]),
                0.5 * (v2[1] - v0[1]),
                0.5 * (v1[1] - v0[1]),
            ],
        );
        let b = vec![v0[0] + a[(0, 0)] + a[(0, 1)], v0[1] + a[(1, 0)] + a[(1, 1)]];
        Self::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn linear(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.linear)
    }

    pub fn translation(&self) -> &[f64] {
        &self.translation
    }

    pub fn det(&self) -> f64 {
        self.linear().determinant()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let row = &self.linear[i * d..(i + 1) * d];
            out[i] = self.translation[i] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn inverse(&self) -> AffineMap {
        let inv = self
            .linear()
            .try_inverse()
            .expect("affine maps are invertible by construction");
        let shift = &inv * nalgebra::DVector::from_column_slice(&self.translation);
        AffineMap::new(inv, shift.iter().map(|v| -v).collect()).expect("inverse is invertible")
    }

    /// `Some(|λ|)` when the linear part is `λ U` with `U` orthogonal.
    pub fn similarity_factor(&self) -> Option<f64> {
        let a = self.linear();
        let ata = a.transpose() * &a;
        let d = self.dim();
        let lambda2 = ata.trace() / d as f64;
        let dev = (ata - DMatrix::identity(d, d) * lambda2).abs().max();
        (dev <= 1e-12 * lambda2.max(1.0)).then(|| lambda2.sqrt())
    }
}
