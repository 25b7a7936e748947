//! Generic smooth minimizers used by the proximal step and inverse-gradient
//! fallbacks. Problems here are strictly convex and desk scale, so dense
//! quasi-Newton / Newton with backtracking is the pragmatic choice.

use nalgebra::{DMatrix, DVector};

use crate::error::{EsmdError, Result};

/// BFGS for convex objectives. `f` returns `(value, gradient)`. The line
/// search bisects the directional derivative's sign change, which stays
/// reliable at gradient kinks (piecewise-smooth potentials) where a
/// value-based Armijo test hits the f64 resolution floor. Terminates when
/// the gradient norm drops below `grad_tol`.
pub fn bfgs_minimize(
    x0: DVector<f64>,
    mut f: impl FnMut(&DVector<f64>) -> (f64, DVector<f64>),
    grad_tol: f64,
    max_iters: usize,
) -> Result<DVector<f64>> {
    let d = x0.len();
    let mut x = x0;
    let (mut fx, mut gx) = f(&x);
    let _ = fx;
    let mut h = DMatrix::<f64>::identity(d, d);
    for _ in 0..max_iters {
        if gx.norm() <= grad_tol {
            return Ok(x);
        }
        let mut dir = -(&h * &gx);
        if gx.dot(&dir) >= 0.0 {
            h = DMatrix::identity(d, d);
            dir = -gx.clone();
        }
        // Line search on the slope sign: slope(0) < 0; bracket the zero of
        // t -> <grad f(x + t dir), dir> and bisect.
        let mut eval = |t: f64| -> (DVector<f64>, f64, DVector<f64>, f64) {
            let cand = &x + &dir * t;
            let (fc, gc) = f(&cand);
            let slope = gc.dot(&dir);
            (cand, fc, gc, slope)
        };
        let mut t_lo = 0.0_f64;
        let mut t_hi = 1.0_f64;
        let (mut cand, mut fc, mut gc, mut slope) = eval(t_hi);
        let mut grow = 0;
        while slope < 0.0 && grow < 60 {
            t_lo = t_hi;
            t_hi *= 2.0;
            (cand, fc, gc, slope) = eval(t_hi);
            grow += 1;
        }
        if slope >= 0.0 {
            for _ in 0..50 {
                let mid = 0.5 * (t_lo + t_hi);
                let (c, fm, gm, sm) = eval(mid);
                if sm < 0.0 {
                    t_lo = mid;
                } else {
                    t_hi = mid;
                }
                cand = c;
                fc = fm;
                gc = gm;
                if sm.abs() <= 1e-3 * gx.norm() * dir.norm() {
                    break;
                }
            }
        }
        let s = &cand - &x;
        if s.norm() == 0.0 {
            break;
        }
        let y = &gc - &gx;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // BFGS inverse update.
            let term = (&s * s.transpose()) * (rho * (1.0 + rho * yhy));
            let cross = (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h = h + term - cross;
        }
        x = cand;
        fx = fc;
        gx = gc;
    }
    if gx.norm() <= grad_tol {
        Ok(x)
    } else {
        Err(EsmdError::Convergence {
            what: "bfgs",
            residual: gx.norm(),
            iterations: max_iters,
        })
    }
}

/// Nesterov's accelerated gradient method for an `mu`-strongly convex,
/// `l`-smooth objective, constant momentum `(sqrt(l)-sqrt(mu))/(sqrt(l)+sqrt(mu))`.
pub fn agd_strongly_convex(
    x0: DVector<f64>,
    mut grad: impl FnMut(&DVector<f64>) -> DVector<f64>,
    l: f64,
    mu: f64,
    grad_tol: f64,
    max_iters: usize,
) -> Result<DVector<f64>> {
    let step = 1.0 / l;
    let momentum = ((l.sqrt() - mu.sqrt()) / (l.sqrt() + mu.sqrt())).max(0.0);
    let mut x = x0.clone();
    let mut y = x0;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let g = grad(&y);
        residual = g.norm();
        if residual <= grad_tol {
            return Ok(y);
        }
        let x_next = &y - &g * step;
        let y_next = &x_next + (&x_next - &x) * momentum;
        x = x_next;
        y = y_next;
    }
    let g = grad(&x);
    if g.norm() <= grad_tol {
        return Ok(x);
    }
    Err(EsmdError::Convergence {
        what: "accelerated gradient descent",
        residual,
        iterations: max_iters,
    })
}

/// Damped Newton for strictly convex twice-differentiable objectives.
pub fn damped_newton(
    x0: DVector<f64>,
    mut fg: impl FnMut(&DVector<f64>) -> (f64, DVector<f64>),
    mut hess: impl FnMut(&DVector<f64>) -> DMatrix<f64>,
    grad_tol: f64,
    max_iters: usize,
) -> Result<DVector<f64>> {
    let mut x = x0;
    let (mut fx, mut gx) = fg(&x);
    for _ in 0..max_iters {
        if gx.norm() <= grad_tol {
            return Ok(x);
        }
        let h = hess(&x);
        let dir = match h.cholesky() {
            Some(chol) => -chol.solve(&gx),
            None => -gx.clone(),
        };
        let g_dot_d = gx.dot(&dir);
        let mut t = 1.0_f64;
        let mut moved = false;
        for _ in 0..70 {
            let cand = &x + &dir * t;
            let (fc, gc) = fg(&cand);
            if fc <= fx + 1e-4 * t * g_dot_d || fc < fx {
                x = cand;
                fx = fc;
                gx = gc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if gx.norm() <= grad_tol {
        Ok(x)
    } else {
        Err(EsmdError::Convergence {
            what: "damped newton",
            residual: gx.norm(),
            iterations: max_iters,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn bfgs_solves_quadratic() {
        let target = dvector![1.0, -2.0, 3.0];
        let sol = bfgs_minimize(
            DVector::zeros(3),
            |x| {
                let r = x - &target;
                (0.5 * r.norm_squared(), r)
            },
            1e-12,
            200,
        )
        .unwrap();
        assert!((sol - target).norm() < 1e-10);
    }

    #[test]
    fn newton_solves_quartic() {
        let sol = damped_newton(
            dvector![3.0],
            |x| {
                let v = x[0];
                (0.25 * v.powi(4) + 0.5 * v * v, dvector![v.powi(3) + v])
            },
            |x| DMatrix::from_element(1, 1, 3.0 * x[0] * x[0] + 1.0),
            1e-12,
            100,
        )
        .unwrap();
        assert!(sol[0].abs() < 1e-10);
    }
}
