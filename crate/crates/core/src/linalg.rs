//! Small complex-matrix helpers shared by the estimators.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;

pub fn frobenius_sq(a: ArrayView2<'_, C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm_sq(a: ArrayView1<'_, C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Squared norm of every column.
pub fn column_norms_sq(a: ArrayView2<'_, C64>) -> Vec<f64> {
    a.axis_iter(Axis(1)).map(norm_sq).collect()
}

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: ArrayView2<'_, C64>, b: ArrayView2<'_, C64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Dense complex product, used by oracles and small problems.
pub fn matmul(a: ArrayView2<'_, C64>, b: ArrayView2<'_, C64>) -> CMatrix {
    a.dot(&b)
}

/// Conjugate transpose.
pub fn herm(a: ArrayView2<'_, C64>) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn all_finite(a: ArrayView2<'_, C64>) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn norms() {
        let a = array![[C64::new(3.0, 4.0), C64::new(0.0, 1.0)], [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]];
        assert_eq!(frobenius_sq(a.view()), 27.0);
        assert_eq!(column_norms_sq(a.view()), vec![26.0, 1.0]);
        let h = herm(a.view());
        assert_eq!(h[[1, 0]], C64::new(0.0, -1.0));
    }
}
