//! Scalar machinery for the separable squared potentials.
//!
//! Three of the l1-ball potentials share the shape `psi = f(a)^2 (+ rho/2
//! |a|_2^2)` with `f(a) = sum_i g(a_i)` for a convex even scalar `g`. Their
//! mirror inverse reduces to a one-dimensional root find: given the dual
//! point `z`, the stationarity condition reads `2 f(a) g'(a_i) + rho a_i =
//! z_i`, so for a trial scalar `s = f(a)` the coordinates are recovered
//! independently and `s` is pinned by a monotone fixed-point equation.

use nalgebra::DVector;

use crate::error::{EsmdError, Result};

/// Huber scalar `h_lambda` and derivative.
pub fn huber(x: f64, lambda: f64) -> f64 {
    if x.abs() <= lambda {
        x * x / (2.0 * lambda)
    } else {
        x.abs() - lambda / 2.0
    }
}

pub fn huber_prime(x: f64, lambda: f64) -> f64 {
    if x.abs() <= lambda {
        x / lambda
    } else {
        x.signum()
    }
}

/// Adjusted-hypentropy scalar: `(x asinh(x/g) - sqrt(x^2+g^2) + g + 1) / asinh(1/g)`.
pub fn hypentropy(x: f64, gamma: f64, inv_asinh: f64) -> f64 {
    (x * (x / gamma).asinh() - x.hypot(gamma) + gamma + 1.0) * inv_asinh
}

pub fn hypentropy_prime(x: f64, gamma: f64, inv_asinh: f64) -> f64 {
    (x / gamma).asinh() * inv_asinh
}

pub fn hypentropy_second(x: f64, gamma: f64, inv_asinh: f64) -> f64 {
    inv_asinh / x.hypot(gamma)
}

/// Sigmoidal scalar `(log(1+e^{-gx}) + log(1+e^{gx})) / g`, computed through
/// the max-shifted identity `|x| + (2/g) log1p(e^{-g|x|})`.
pub fn sigmoidal(x: f64, gamma: f64) -> f64 {
    let t = x.abs();
    t + 2.0 / gamma * (-gamma * t).exp().ln_1p()
}

pub fn sigmoidal_prime(x: f64, gamma: f64) -> f64 {
    (0.5 * gamma * x).tanh()
}

pub fn sigmoidal_second(x: f64, gamma: f64) -> f64 {
    let c = (0.5 * gamma * x).cosh();
    0.5 * gamma / (c * c)
}

/// Solves the Huber-potential mirror inverse: find `a` with
/// `2 S(a) h'(a_i) + rho a_i = z_i`, `S(a) = sum h(a_i) + d lambda / 2`.
pub fn huber_inverse(z: &DVector<f64>, lambda: f64, rho: f64) -> DVector<f64> {
    let d = z.len();
    let s_min = 0.5 * d as f64 * lambda;
    // Coordinates in closed form for a trial S-value.
    let coords = |s: f64| -> DVector<f64> {
        DVector::from_fn(d, |i, _| {
            let zi = z[i];
            let knee = 2.0 * s + rho * lambda;
            if zi.abs() <= knee {
                zi / (2.0 * s / lambda + rho)
            } else {
                (zi - 2.0 * s * zi.signum()) / rho
            }
        })
    };
    let s_of = |a: &DVector<f64>| -> f64 {
        a.iter().map(|&x| huber(x, lambda)).sum::<f64>() + s_min
    };
    // G(s) = S(a(s)) - s is strictly decreasing with G(s_min) >= 0.
    let mut lo = s_min;
    let mut hi = s_min.max(1e-30);
    let mut iters = 0;
    while s_of(&coords(hi)) > hi {
        hi *= 2.0;
        iters += 1;
        if iters > 300 {
            break;
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if s_of(&coords(mid)) >= mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    coords(0.5 * (lo + hi))
}

/// Hypentropy contribution `g(gamma sinh(w))` evaluated directly in `w`,
/// overflow-safe: `g = (gamma (w sinh w - cosh w + 1) + 1) / asinh(1/gamma)`.
fn hypentropy_of_w(w: f64, gamma: f64, inv_asinh: f64) -> f64 {
    let t = w.abs();
    if t < 34.0 {
        (gamma * (t * t.sinh() - t.cosh() + 1.0) + 1.0) * inv_asinh
    } else {
        // w sinh w - cosh w ~ (t - 1) e^t / 2 up to e^{-t} corrections.
        let log_term = gamma.ln() + t + ((t - 1.0) / 2.0).ln();
        if log_term > 700.0 {
            f64::INFINITY
        } else {
            (log_term.exp() + gamma + 1.0) * inv_asinh
        }
    }
}

/// Mirror inverse of the adjusted hypentropy: `a_i = gamma sinh(A z_i / c)`
/// where `A = asinh(1/gamma)` and `c = 2 f(a)` solves a monotone scalar
/// equation.
pub fn hypentropy_inverse(z: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
    let d = z.len() as f64;
    let a_const = (1.0 / gamma).asinh();
    let inv_asinh = 1.0 / a_const;
    if z.iter().all(|v| *v == 0.0) {
        return Ok(DVector::zeros(z.len()));
    }
    // F(c) = 2 sum_i g(gamma sinh(A z_i / c)) - c, strictly decreasing.
    let f_of = |c: f64| -> f64 {
        let mut acc = 0.0;
        for &zi in z.iter() {
            let w = a_const * zi / c;
            let g = hypentropy_of_w(w, gamma, inv_asinh);
            if !g.is_finite() {
                return f64::INFINITY;
            }
            acc += g;
        }
        2.0 * acc - c
    };
    let c_min = 2.0 * d * inv_asinh;
    let mut lo = c_min;
    let mut hi = c_min;
    let mut iters = 0;
    while f_of(hi) > 0.0 {
        hi *= 2.0;
        iters += 1;
        if iters > 600 {
            return Err(EsmdError::Convergence {
                what: "hypentropy inverse bracketing",
                residual: f_of(hi),
                iterations: iters,
            });
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f_of(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok(DVector::from_fn(z.len(), |i, _| {
        gamma * (a_const * z[i] / c).sinh()
    }))
}

/// Mirror inverse of the sigmoidal potential: `a_i = (2/gamma) atanh(z_i /
/// (2 f))`, with `f` solving a monotone scalar equation. The contribution per
/// coordinate collapses to `(1/gamma) log(4 / (1 - u^2))` with `u = z_i/(2f)`.
pub fn sigmoidal_inverse(z: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
    let d = z.len() as f64;
    if z.iter().all(|v| *v == 0.0) {
        return Ok(DVector::zeros(z.len()));
    }
    let zmax = z.amax();
    let f_of = |s: f64| -> f64 {
        let mut acc = 0.0;
        for &zi in z.iter() {
            let u = zi / (2.0 * s);
            let one_minus = (1.0 - u) * (1.0 + u);
            if one_minus <= 0.0 {
                return f64::INFINITY;
            }
            acc += (4.0 / one_minus).ln() / gamma;
        }
        acc - s
    };
    let s_floor = (d * 4.0_f64.ln() / gamma).max(zmax / 2.0 * (1.0 + 1e-15));
    let mut lo = s_floor;
    let mut hi = s_floor;
    let mut iters = 0;
    while f_of(hi) > 0.0 {
        hi = hi * 2.0;
        iters += 1;
        if iters > 600 {
            return Err(EsmdError::Convergence {
                what: "sigmoidal inverse bracketing",
                residual: f_of(hi),
                iterations: iters,
            });
        }
    }
    // lo may start on the wrong side when the floor comes from zmax.
    for _ in 0..300 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f_of(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = hi;
    Ok(DVector::from_fn(z.len(), |i, _| {
        let u = (z[i] / (2.0 * s)).clamp(-1.0 + 1e-16, 1.0 - 1e-16);
        2.0 / gamma * u.atanh()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_matches_table_formula() {
        let l = 0.5;
        assert!((huber(0.2, l) - 0.04).abs() < 1e-15);
        assert!((huber(2.0, l) - 1.75).abs() < 1e-15);
        assert_eq!(huber_prime(0.2, l), 0.4);
        assert_eq!(huber_prime(-2.0, l), -1.0);
    }

    #[test]
    fn sigmoidal_sandwich() {
        // g(x) in [|x|, |x| + log(4)/gamma] on a grid.
        let gamma: f64 = 7.0;
        let cap = 4.0_f64.ln() / gamma;
        let mut x = -10.0;
        while x <= 10.0 {
            let g = sigmoidal(x, gamma);
            assert!(g >= x.abs() - 1e-12);
            assert!(g <= x.abs() + cap + 1e-12);
            x += 0.05;
        }
        assert!((sigmoidal(0.0, gamma) - cap).abs() < 1e-14);
    }

    #[test]
    fn hypentropy_lower_bounds() {
        // f(a) >= |a|_1 and f(a) >= d asinh(1/gamma)^{-1} per coordinate sums.
        let gamma: f64 = 0.3;
        let inv_a = 1.0 / (1.0 / gamma).asinh();
        let mut x = -8.0;
        while x <= 8.0 {
            let g = hypentropy(x, gamma, inv_a);
            assert!(g >= x.abs() - 1e-12);
            assert!(g >= inv_a - 1e-12);
            x += 0.05;
        }
    }

    #[test]
    fn hypentropy_w_form_consistent() {
        let gamma: f64 = 0.2;
        let inv_a = 1.0 / (1.0 / gamma).asinh();
        for &w in &[0.0_f64, 0.5, -3.0, 20.0] {
            let x = gamma * w.sinh();
            let direct = hypentropy(x, gamma, inv_a);
            let via_w = hypentropy_of_w(w, gamma, inv_a);
            assert!((direct - via_w).abs() <= 1e-10 * (1.0 + direct.abs()));
        }
    }
}
