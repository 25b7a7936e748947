//! Small numeric helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Pairwise (cascade) summation. Order-independent accumulation error, used
/// wherever Monte Carlo results must reproduce to 1e-12 across thread counts.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Sample standard deviation (Bessel-corrected).
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    (pairwise_sum(&sq) / (n - 1) as f64).sqrt()
}

/// Linear-interpolation quantile (type 7), `q` in [0, 1]. Sorts a copy.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    }
}

/// Largest singular value via power iteration on `XᵀX`, deterministic start.
/// Relative tolerance 1e-12 on the Rayleigh quotient; exact for the zero
/// matrix. Returns an essentially tight estimate (the quotient converges to
/// sigma_max^2 from below; a final 1+1e-10 inflation keeps it usable as an
/// upper bound in step-size rules).
pub fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    let (n, d) = (x.nrows(), x.ncols());
    if n == 0 || d == 0 {
        return 0.0;
    }
    let fro = x.norm();
    if fro == 0.0 {
        return 0.0;
    }
    // Deterministic start with all coordinates active.
    let mut v = DVector::from_fn(d, |i, _| 1.0 + (i as f64 + 1.0).sin() * 0.5);
    v /= v.norm();
    let mut lambda = 0.0_f64;
    for _ in 0..5000 {
        let xv = x * &v;
        let mut w = x.transpose() * xv;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        w /= nw;
        let new_lambda = {
            let xw = x * &w;
            xw.norm_squared()
        };
        let done = (new_lambda - lambda).abs() <= 1e-12 * new_lambda.max(1.0);
        lambda = new_lambda;
        v = w;
        if done {
            break;
        }
    }
    (lambda.sqrt()) * (1.0 + 1e-10)
}

/// All singular values (descending), via nalgebra's SVD.
pub fn singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = x.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Finds the root of a strictly decreasing function on `(lo, hi]` by
/// bisection, assuming `f(lo) >= 0 >= f(hi)`. Tolerance is on the argument.
pub fn bisect_decreasing(mut lo: f64, mut hi: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimization of a unimodal function on [lo, hi].
pub fn golden_min(mut lo: f64, mut hi: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Least-squares fit of `y = a + b x`; returns `(a, b, residual_norm)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let mut res = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let e = yi - a - b * xi;
        res += e * e;
    }
    let _ = n;
    (a, b, res.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let x = dmatrix![3.0, 0.0; 0.0, -7.0];
        assert!((spectral_norm(&x) - 7.0).abs() < 1e-8);
        assert_eq!(spectral_norm(&DMatrix::zeros(4, 3)), 0.0);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn linear_fit_recovers_slope_exactly() {
        let x: Vec<f64> = (1..=7).map(|i| (i as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.25 - 0.5 * v).collect();
        let (a, b, res) = linear_fit(&x, &y);
        assert!((a - 0.25).abs() < 1e-10);
        assert!((b + 0.5).abs() < 1e-10);
        assert!(res < 1e-10);
    }
}
