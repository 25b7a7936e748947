//! Moreau envelope of a squared gauge, `M_lambda(phi_K^2)`, through the
//! scale decomposition: `phi_K^2(a') = min { t^2 : a' in tK }`, so
//!
//!   `(M_lambda phi_K^2)(x) = min_{t >= 0} [ t^2 + dist^2(x, tK) / (2 lambda) ]`,
//!
//! a one-dimensional convex minimization whose inner distance uses the body's
//! exact projection when available, or away-step Frank-Wolfe over an explicit
//! vertex hull otherwise.

use nalgebra::DVector;

use crate::bodies::ConvexBody;
use crate::error::{EsmdError, Result};
use crate::numeric::golden_min;

/// Squared Euclidean distance to `tK` together with the nearest point.
fn dist_sq_scaled(body: &ConvexBody, t: f64, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    if t <= 0.0 {
        return Ok((x.norm_squared(), DVector::zeros(x.len())));
    }
    if let Ok(p) = body.scale(t)?.project_euclidean(x) {
        let d2 = (x - &p.coords).norm_squared();
        return Ok((d2, p.coords));
    }
    let Some(vertices) = body.vertex_list() else {
        return Err(EsmdError::unsupported(
            "Moreau envelope needs a projectable body or an explicit vertex list",
        ));
    };
    let scaled: Vec<DVector<f64>> = vertices.into_iter().map(|v| v * t).collect();
    let p = nearest_point_in_hull(&scaled, x);
    let d2 = (x - &p).norm_squared();
    Ok((d2, p))
}

/// Away-step Frank-Wolfe for `min_{a in conv(V)} 1/2 |x - a|^2`; linear
/// convergence over polytopes drives the gap to near machine precision.
fn nearest_point_in_hull(vertices: &[DVector<f64>], x: &DVector<f64>) -> DVector<f64> {
    let m = vertices.len();
    let mut weights = vec![0.0_f64; m];
    weights[0] = 1.0;
    let mut alpha = vertices[0].clone();
    let scale = 1.0 + x.norm_squared();
    for _ in 0..20_000 {
        let grad = &alpha - x;
        // FW vertex and away vertex.
        let mut fw = 0usize;
        let mut fw_val = f64::INFINITY;
        let mut away = 0usize;
        let mut away_val = f64::NEG_INFINITY;
        for (i, v) in vertices.iter().enumerate() {
            let g = grad.dot(v);
            if g < fw_val {
                fw_val = g;
                fw = i;
            }
            if weights[i] > 0.0 && g > away_val {
                away_val = g;
                away = i;
            }
        }
        let gap = grad.dot(&alpha) - fw_val;
        if gap <= 1e-14 * scale {
            break;
        }
        let fw_dir = &vertices[fw] - &alpha;
        let away_dir = &alpha - &vertices[away];
        let use_fw = grad.dot(&fw_dir) <= grad.dot(&away_dir);
        let (dir, gamma_max, idx) = if use_fw {
            (fw_dir, 1.0, fw)
        } else {
            let w = weights[away];
            (away_dir, w / (1.0 - w).max(1e-300), away)
        };
        let denom = dir.norm_squared();
        if denom == 0.0 {
            break;
        }
        let gamma = (-grad.dot(&dir) / denom).clamp(0.0, gamma_max);
        if gamma == 0.0 {
            break;
        }
        alpha += &dir * gamma;
        if use_fw {
            for w in weights.iter_mut() {
                *w *= 1.0 - gamma;
            }
            weights[idx] += gamma;
        } else {
            for w in weights.iter_mut() {
                *w *= 1.0 + gamma;
            }
            weights[idx] -= gamma;
        }
    }
    alpha
}

/// Evaluates `(M_lambda phi_K^2)(x)` and the proximal point attaining it.
pub fn prox_gauge_sq(
    body: &ConvexBody,
    lambda: f64,
    x: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    let phi = body.minkowski(x)?;
    if phi == 0.0 {
        return Ok((0.0, x.clone()));
    }
    let objective = |t: f64, body: &ConvexBody| -> Result<f64> {
        let (d2, _) = dist_sq_scaled(body, t, x)?;
        Ok(t * t + d2 / (2.0 * lambda))
    };
    // The objective is convex in t on [0, phi]; at t = phi the distance is 0.
    let mut err = None;
    let t_star = golden_min(0.0, phi, 1e-12 * (1.0 + phi), |t| {
        match objective(t, body) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::INFINITY
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let (d2, point) = dist_sq_scaled(body, t_star, x)?;
    Ok((t_star * t_star + d2 / (2.0 * lambda), point))
}

/// `psi(x) = (M_lambda phi_K^2)(x) + (rho/2) |x|^2`.
pub fn value(body: &ConvexBody, lambda: f64, rho: f64, x: &DVector<f64>) -> Result<f64> {
    let (env, _) = prox_gauge_sq(body, lambda, x)?;
    Ok(env + 0.5 * rho * x.norm_squared())
}

/// `grad psi(x) = (x - prox(x)) / lambda + rho x`.
pub fn gradient(body: &ConvexBody, lambda: f64, rho: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    let (_, p) = prox_gauge_sq(body, lambda, x)?;
    Ok((x - &p) / lambda + x * rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn envelope_under_approximates_gauge_sq() {
        let body = ConvexBody::lp_ball(2, 1.0).unwrap();
        let x = dvector![0.7, -0.4];
        let phi2 = body.minkowski(&x).unwrap().powi(2);
        for &lambda in &[0.5, 0.1, 1e-3] {
            let (env, _) = prox_gauge_sq(&body, lambda, &x).unwrap();
            assert!(env <= phi2 + 1e-10);
        }
    }

    #[test]
    fn envelope_converges_pointwise_as_lambda_vanishes() {
        let body = ConvexBody::lp_ball(2, 1.0).unwrap();
        for x in &[dvector![1.0, 0.0], dvector![0.3, 0.9], dvector![-2.0, 1.5]] {
            let phi2 = body.minkowski(x).unwrap().powi(2);
            let (env, _) = prox_gauge_sq(&body, 1e-6, x).unwrap();
            assert!((env - phi2).abs() < 1e-3 * (1.0 + phi2), "{env} vs {phi2}");
        }
    }

    #[test]
    fn l1_value_bracket_at_vertex() {
        // value at e1 for small lambda lies in [phi^2/4, phi^2] = [0.25, 1].
        let body = ConvexBody::lp_ball(2, 1.0).unwrap();
        let (env, _) = prox_gauge_sq(&body, 0.01, &dvector![1.0, 0.0]).unwrap();
        assert!(env >= 0.25 - 1e-9 && env <= 1.0 + 1e-9, "env = {env}");
    }

    #[test]
    fn hull_distance_agrees_with_projection() {
        // B1 in 2d via its vertex hull vs the closed-form projection.
        let body = ConvexBody::lp_ball(2, 1.0).unwrap();
        let verts = body.vertex_list().unwrap();
        for &ref x in &[dvector![1.5, 1.0], dvector![-0.2, 0.1], dvector![2.0, -3.0]] {
            let p_hull = nearest_point_in_hull(&verts, x);
            let p_proj = body.project_euclidean(x).unwrap().coords;
            assert!((p_hull - p_proj).norm() < 1e-6);
        }
    }
}
