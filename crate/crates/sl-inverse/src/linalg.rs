//! Truncated-SVD least squares over complex matrices, with conditioning
//! diagnostics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LsqSolution {
    pub x: DVector<Complex64>,
    /// Number of singular values retained.
    pub effective_rank: usize,
    /// sigma_max / sigma_min over the retained singular values.
    pub condition: f64,
    /// Fraction of singular values removed by the cutoff.
    pub truncated_fraction: f64,
    pub residual_norm: f64,
}

/// Minimum-norm least squares min |Ax - b| with singular values below
/// `reg * sigma_max` truncated.
pub fn solve_truncated_lsq(
    a: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    reg: f64,
) -> Result<LsqSolution> {
    if a.nrows() != b.len() {
        return Err(Error::InvalidInput(format!(
            "matrix has {} rows but rhs has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    if !(0.0..1.0).contains(&reg) {
        return Err(Error::InvalidInput(format!(
            "regularization cutoff must be in [0,1), got {reg}"
        )));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u requested");
    let v_t = svd.v_t.as_ref().expect("svd with v_t requested");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Err(Error::InvalidInput("zero system matrix".into()));
    }
    let cutoff = reg * sigma_max;
    let mut x = DVector::from_element(a.ncols(), Complex64::ZERO);
    let mut kept = 0usize;
    let mut sigma_min = f64::INFINITY;
    for j in 0..sigma.len() {
        if sigma[j] <= cutoff {
            continue;
        }
        kept += 1;
        sigma_min = sigma_min.min(sigma[j]);
        let coef = u.column(j).dotc(b) / Complex64::from(sigma[j]);
        x += v_t.row(j).adjoint() * coef;
    }
    if kept == 0 {
        return Err(Error::InvalidInput(
            "all singular values truncated; system is numerically zero".into(),
        ));
    }
    let residual_norm = (a * &x - b).norm();
    Ok(LsqSolution {
        x,
        effective_rank: kept,
        condition: sigma_max / sigma_min,
        truncated_fraction: 1.0 - kept as f64 / sigma.len() as f64,
        residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exact_square_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)]);
        let x_true = DVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.3)]);
        let b = &a * &x_true;
        let sol = solve_truncated_lsq(&a, &b, 1e-12).unwrap();
        assert!((sol.x - x_true).norm() < 1e-12);
        assert_eq!(sol.effective_rank, 2);
    }

    #[test]
    fn orthonormal_rows_condition_one() {
        let a = DMatrix::from_row_slice(2, 3, &[
            c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0),
        ]);
        let b = DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]);
        let sol = solve_truncated_lsq(&a, &b, 1e-12).unwrap();
        assert!((sol.condition - 1.0).abs() < 1e-12);
        assert!(sol.residual_norm < 1e-13);
    }

    #[test]
    fn truncation_reported() {
        // rank-1 matrix in 2x2 shape
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let b = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let sol = solve_truncated_lsq(&a, &b, 1e-10).unwrap();
        assert_eq!(sol.effective_rank, 1);
        assert!(sol.truncated_fraction > 0.4);
    }
}
