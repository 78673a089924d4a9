//! Dense least squares with rank diagnostics.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// Solution of `min ‖A x − b‖₂` computed from a thin SVD of `A`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: DVector<f64>,
    /// Singular values in decreasing order.
    pub singular_values: Vec<f64>,
    /// Ratio of the largest to the smallest singular value (infinite when singular).
    pub condition: f64,
    /// Right singular vectors whose singular value fell below `σ_max / max_condition`.
    pub weak_directions: Vec<DVector<f64>>,
}

impl LeastSquares {
    pub fn is_well_conditioned(&self) -> bool {
        self.weak_directions.is_empty()
    }
}

/// Solves the least-squares problem, truncating singular values below
/// `σ_max / max_condition`. `A` must have at least as many rows as columns.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, max_condition: f64) -> LeastSquares {
    debug_assert!(a.nrows() >= a.ncols());
    debug_assert_eq!(a.nrows(), b.len());
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let s_max = singular_values.first().copied().unwrap_or(0.0);
    let s_min = singular_values.last().copied().unwrap_or(0.0);
    let cutoff = s_max / max_condition;

    let mut solution = DVector::zeros(a.ncols());
    let mut weak_directions = Vec::new();
    for &i in &order {
        let s = svd.singular_values[i];
        let v = v_t.row(i).transpose();
        if s > cutoff && s > 0.0 {
            let coeff = u.column(i).dot(b) / s;
            solution += v * coeff;
        } else {
            weak_directions.push(v);
        }
    }
    let condition = if s_min > 0.0 {
        s_max / s_min
    } else {
        f64::INFINITY
    };
    LeastSquares {
        solution,
        singular_values,
        condition,
        weak_directions,
    }
}
