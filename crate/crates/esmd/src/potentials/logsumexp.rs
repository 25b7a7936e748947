//! Log-sum-exp smoothing of a polytope gauge:
//! `psi(a) = (1/g^2) log^2(m sum_i exp(g <a_i, a>)) + (rho/2) |a|_2^2`.

use nalgebra::{DMatrix, DVector};

/// `s(a) = (1/g) log(m sum_i exp(g <a_i, a>))` and the softmax weights,
/// computed through the max-shifted identity.
pub fn smoothed_gauge(a: &DMatrix<f64>, gamma: f64, x: &DVector<f64>) -> (f64, DVector<f64>) {
    let m = a.nrows();
    let scores = a * x;
    let top = scores.amax_with_sign();
    let mut weights = DVector::zeros(m);
    let mut z = 0.0;
    for i in 0..m {
        let e = (gamma * (scores[i] - top)).exp();
        weights[i] = e;
        z += e;
    }
    weights /= z;
    let s = top + (z.ln() + (m as f64).ln()) / gamma;
    (s, weights)
}

trait AmaxSigned {
    fn amax_with_sign(&self) -> f64;
}

impl AmaxSigned for DVector<f64> {
    /// Maximum entry (signed), not maximum magnitude.
    fn amax_with_sign(&self) -> f64 {
        self.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn value(a: &DMatrix<f64>, gamma: f64, rho: f64, x: &DVector<f64>) -> f64 {
    let (s, _) = smoothed_gauge(a, gamma, x);
    s * s + 0.5 * rho * x.norm_squared()
}

pub fn gradient(a: &DMatrix<f64>, gamma: f64, rho: f64, x: &DVector<f64>) -> DVector<f64> {
    let (s, w) = smoothed_gauge(a, gamma, x);
    let mu = a.tr_mul(&w);
    mu * (2.0 * s) + x * rho
}

/// Hessian `2 mu mu' + 2 g s (sum_i w_i a_i a_i' - mu mu') + rho I`.
pub fn hessian(a: &DMatrix<f64>, gamma: f64, rho: f64, x: &DVector<f64>) -> DMatrix<f64> {
    let d = x.len();
    let (s, w) = smoothed_gauge(a, gamma, x);
    let mu = a.tr_mul(&w);
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..a.nrows() {
        let row = a.row(i).transpose();
        cov += (&row * row.transpose()) * w[i];
    }
    cov -= &mu * mu.transpose();
    cov * (2.0 * gamma * s) + (&mu * mu.transpose()) * 2.0 + DMatrix::identity(d, d) * rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn square() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0])
    }

    #[test]
    fn value_at_origin() {
        // sum exp(0) = m, so s(0) = 2 log(m) / gamma.
        let a = square();
        let gamma = 3.0;
        let expected = (2.0 * 4.0_f64.ln() / gamma).powi(2);
        assert!((value(&a, gamma, 0.5, &dvector![0.0, 0.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_zero_for_balanced_rows() {
        let a = square();
        let g = gradient(&a, 5.0, 0.7, &dvector![0.0, 0.0]);
        assert!(g.norm() < 1e-14);
    }

    #[test]
    fn shift_stability_under_large_gamma() {
        let a = square();
        let v = value(&a, 800.0, 0.1, &dvector![0.9, -0.4]);
        assert!(v.is_finite());
        // s approaches the gauge max(0, max_i <a_i, x>) = 0.9 from above.
        assert!(v >= 0.81 - 1e-9);
    }
}
