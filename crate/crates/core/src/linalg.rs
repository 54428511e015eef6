//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Condition threshold above which a square matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Relative singular-value floor for numerical rank.
pub const RANK_TOL: f64 = 1e-12;

pub fn norm_1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse together with its 1-norm condition number, or `Singular`.
pub fn inverse_with_condition(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    let inv = m.clone().try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = norm_1(m) * norm_1(&inv);
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return Err(Error::Singular { condition });
    }
    Ok((inv, condition))
}

/// `‖A‖∞ ‖A⁻¹‖∞`.
pub fn condition_inf(m: &DMatrix<f64>) -> Result<f64> {
    let inv = m.clone().try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    Ok(norm_inf(m) * norm_inf(&inv))
}

/// Largest singular value from a full SVD.
pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Largest eigenvalue of a small symmetric matrix.
pub fn lambda_max_sym(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)],
        2 => {
            let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let mean = 0.5 * (a + d);
            let half = 0.5 * (a - d);
            mean + half.hypot(b)
        }
        _ => SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Moore–Penrose pseudoinverse, failing if the rank is below `min(rows, cols)`.
pub fn pinv_full_rank(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let expected = m.nrows().min(m.ncols());
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * smax)
        .count();
    if rank < expected || smax == 0.0 {
        return Err(Error::RankDeficient { rank, expected });
    }
    svd.pseudo_inverse(RANK_TOL * smax)
        .map_err(|e| Error::Construction(e.to_string()))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}
