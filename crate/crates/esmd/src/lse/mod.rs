//! Constrained least squares over `tau K` by conditional gradient.
//!
//! The contract is the Frank-Wolfe gap certificate: on success the returned
//! objective is within `tol` of the optimum. Bodies with an explicit vertex
//! list run away-step Frank-Wolfe (linear convergence on polytopes); bodies
//! with a Euclidean projection run FISTA with the gap still checked through
//! the LMO; everything else runs vanilla Frank-Wolfe with exact line search.

use nalgebra::DVector;

use crate::bodies::ConvexBody;
use crate::error::{EsmdError, Result};
use crate::model::RegressionInstance;

#[derive(Debug, Clone)]
pub struct LseSolution {
    pub alpha: DVector<f64>,
    pub predictions: DVector<f64>,
    pub fw_gap: f64,
    pub iterations: usize,
    pub objective: f64,
    /// Objective after each iteration, when recording was requested.
    pub objective_trace: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct LseOptions {
    /// Frank-Wolfe gap tolerance; default `1e-8 (1 + R_n(0))`.
    pub tol: Option<f64>,
    /// Default 100_000.
    pub max_iters: Option<usize>,
    /// Optional feasible starting point (runs the projection/vanilla path).
    pub start: Option<DVector<f64>>,
    pub record_objectives: bool,
}

pub fn solve_lse(
    instance: &RegressionInstance,
    body: &ConvexBody,
    tau: f64,
    opts: &LseOptions,
) -> Result<LseSolution> {
    if body.dim() != instance.d() {
        return Err(EsmdError::DimensionMismatch {
            context: "solve_lse body",
            expected: instance.d(),
            got: body.dim(),
        });
    }
    let scaled = body.scale(tau)?;
    let n = instance.n() as f64;
    let risk0 = instance.response.norm_squared() / n;
    let tol = opts.tol.unwrap_or(1e-8 * (1.0 + risk0));
    if !(tol > 0.0) {
        return Err(EsmdError::invalid("tolerance must be > 0"));
    }
    let max_iters = opts.max_iters.unwrap_or(100_000);

    if let Some(start) = &opts.start {
        if !scaled.membership(start, 1e-9)? {
            return Err(EsmdError::invalid("starting point is not in tau K"));
        }
        if projection_supported(&scaled) {
            return fista(instance, &scaled, tol, max_iters, start.clone(), opts);
        }
        return vanilla_fw(instance, &scaled, tol, max_iters, start.clone(), opts);
    }

    if let Some(vertices) = scaled.vertex_list() {
        return away_fw(instance, &scaled, vertices, tol, max_iters, opts);
    }
    if projection_supported(&scaled) {
        let d = instance.d();
        return fista(instance, &scaled, tol, max_iters, DVector::zeros(d), opts);
    }
    vanilla_fw(
        instance,
        &scaled,
        tol,
        max_iters,
        DVector::zeros(instance.d()),
        opts,
    )
}

/// In-sample risk of a solution; needs the ground truth.
pub fn lse_risk(instance: &RegressionInstance, solution: &LseSolution) -> Result<f64> {
    let Some(truth) = &instance.ground_truth else {
        return Err(EsmdError::invalid("lse_risk needs a known ground truth"));
    };
    crate::model::in_sample_risk(&instance.design, &solution.alpha, truth)
}

fn projection_supported(body: &ConvexBody) -> bool {
    body.project_euclidean(&DVector::zeros(body.dim())).is_ok()
}

fn finish(
    instance: &RegressionInstance,
    alpha: DVector<f64>,
    gap: f64,
    iterations: usize,
    trace: Option<Vec<f64>>,
) -> LseSolution {
    let predictions = instance.design.mul(&alpha);
    let objective = (&predictions - &instance.response).norm_squared() / instance.n() as f64;
    LseSolution {
        alpha,
        predictions,
        fw_gap: gap,
        iterations,
        objective,
        objective_trace: trace,
    }
}

/// Gap of the point `alpha` with gradient `grad`: `max_s <-grad, s - alpha>`.
fn fw_gap(body: &ConvexBody, alpha: &DVector<f64>, grad: &DVector<f64>) -> Result<f64> {
    let s = body.lmo(&(-grad))?;
    Ok((-grad).dot(&(&s.coords - alpha)))
}

fn away_fw(
    instance: &RegressionInstance,
    body: &ConvexBody,
    vertices: Vec<DVector<f64>>,
    tol: f64,
    max_iters: usize,
    opts: &LseOptions,
) -> Result<LseSolution> {
    let n = instance.n() as f64;
    let y = &instance.response;
    // Cache X v for every vertex; iterates live as convex combinations.
    let xv: Vec<DVector<f64>> = vertices.iter().map(|v| instance.design.mul(v)).collect();
    let m = vertices.len();

    // Start at the vertex favored by the gradient at zero.
    let grad0 = instance.design.tr_mul(&(-y)) * (2.0 / n);
    let mut start_idx = 0usize;
    let mut best = f64::INFINITY;
    for (i, v) in vertices.iter().enumerate() {
        let val = grad0.dot(v);
        if val < best {
            best = val;
            start_idx = i;
        }
    }
    let mut weights = vec![0.0_f64; m];
    weights[start_idx] = 1.0;
    let mut alpha = vertices[start_idx].clone();
    let mut x_alpha = xv[start_idx].clone();

    let mut trace = opts.record_objectives.then(Vec::new);
    let mut gap = f64::INFINITY;
    for it in 0..max_iters {
        let resid = &x_alpha - y;
        let grad = instance.design.tr_mul(&resid) * (2.0 / n);
        // FW and away vertices by direct scan.
        let mut fw = 0usize;
        let mut fw_val = f64::INFINITY;
        let mut away = usize::MAX;
        let mut away_val = f64::NEG_INFINITY;
        for i in 0..m {
            let g = grad.dot(&vertices[i]);
            if g < fw_val {
                fw_val = g;
                fw = i;
            }
            if weights[i] > 0.0 && g > away_val {
                away_val = g;
                away = i;
            }
        }
        gap = grad.dot(&alpha) - fw_val;
        if gap <= tol {
            return Ok(finish(instance, alpha, gap, it, trace));
        }
        let toward_gap = gap;
        let away_gap = away_val - grad.dot(&alpha);
        let (dir, x_dir, gamma_max, idx, is_fw) = if toward_gap >= away_gap || away == usize::MAX {
            (
                &vertices[fw] - &alpha,
                &xv[fw] - &x_alpha,
                1.0,
                fw,
                true,
            )
        } else {
            let w = weights[away];
            (
                &alpha - &vertices[away],
                &x_alpha - &xv[away],
                w / (1.0 - w).max(1e-300),
                away,
                false,
            )
        };
        let improving = (-&grad).dot(&dir);
        let denom = x_dir.norm_squared();
        let gamma = if denom == 0.0 {
            // Flat direction in prediction space.
            if improving > 0.0 {
                gamma_max.min(1.0)
            } else {
                return Ok(finish(instance, alpha, gap, it, trace));
            }
        } else {
            (improving * n / (2.0 * denom)).clamp(0.0, gamma_max)
        };
        if gamma == 0.0 {
            return Ok(finish(instance, alpha, gap, it, trace));
        }
        alpha += &dir * gamma;
        x_alpha += &x_dir * gamma;
        if is_fw {
            for w in weights.iter_mut() {
                *w *= 1.0 - gamma;
            }
            weights[idx] += gamma;
        } else {
            for w in weights.iter_mut() {
                *w *= 1.0 + gamma;
            }
            weights[idx] -= gamma;
            if weights[idx] < 1e-14 {
                weights[idx] = 0.0;
            }
        }
        if let Some(t) = &mut trace {
            t.push((&x_alpha - y).norm_squared() / n);
        }
    }
    Err(EsmdError::PartialResult { gap })
}

fn vanilla_fw(
    instance: &RegressionInstance,
    body: &ConvexBody,
    tol: f64,
    max_iters: usize,
    start: DVector<f64>,
    opts: &LseOptions,
) -> Result<LseSolution> {
    let n = instance.n() as f64;
    let y = &instance.response;
    let mut alpha = start;
    let mut x_alpha = instance.design.mul(&alpha);
    let mut trace = opts.record_objectives.then(Vec::new);
    let mut gap = f64::INFINITY;
    for it in 0..max_iters {
        let resid = &x_alpha - y;
        let grad = instance.design.tr_mul(&resid) * (2.0 / n);
        let s = body.lmo(&(-&grad))?;
        let dir = &s.coords - &alpha;
        gap = (-&grad).dot(&dir);
        if gap <= tol {
            return Ok(finish(instance, alpha, gap, it, trace));
        }
        let x_dir = instance.design.mul(&dir);
        let denom = x_dir.norm_squared();
        let gamma = if denom == 0.0 {
            if gap > 0.0 {
                1.0
            } else {
                return Ok(finish(instance, alpha, gap, it, trace));
            }
        } else {
            (gap * n / (2.0 * denom)).clamp(0.0, 1.0)
        };
        alpha += &dir * gamma;
        x_alpha += &x_dir * gamma;
        if let Some(t) = &mut trace {
            t.push((&x_alpha - y).norm_squared() / n);
        }
    }
    Err(EsmdError::PartialResult { gap })
}

fn fista(
    instance: &RegressionInstance,
    body: &ConvexBody,
    tol: f64,
    max_iters: usize,
    start: DVector<f64>,
    opts: &LseOptions,
) -> Result<LseSolution> {
    let n = instance.n() as f64;
    let y = &instance.response;
    let lip = 2.0 * instance.design.spectral_norm().powi(2) / n;
    if lip == 0.0 {
        // Zero design: every feasible point is optimal.
        return Ok(finish(instance, start, 0.0, 0, None));
    }
    let step = 1.0 / lip;
    let objective = |a: &DVector<f64>| (instance.design.mul(a) - y).norm_squared() / n;
    let mut x = body.project_euclidean(&start)?.coords;
    let mut v = x.clone();
    let mut t_k = 1.0_f64;
    let mut f_prev = objective(&x);
    let mut trace = opts.record_objectives.then(Vec::new);
    let mut gap = f64::INFINITY;
    for it in 0..max_iters {
        let grad_v = instance.design.tr_mul(&(instance.design.mul(&v) - y)) * (2.0 / n);
        let x_next = body.project_euclidean(&(&v - &grad_v * step))?.coords;
        let f_next = objective(&x_next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        if f_next > f_prev {
            // Monotone restart.
            v = x.clone();
            t_k = 1.0;
        } else {
            v = &x_next + (&x_next - &x) * ((t_k - 1.0) / t_next);
            t_k = t_next;
            x = x_next;
            f_prev = f_next;
        }
        if let Some(t) = &mut trace {
            t.push(f_prev);
        }
        if it % 8 == 0 || it + 1 == max_iters {
            let grad_x = instance.design.tr_mul(&(instance.design.mul(&x) - y)) * (2.0 / n);
            gap = fw_gap(body, &x, &grad_x)?;
            if gap <= tol {
                return Ok(finish(instance, x, gap, it, trace));
            }
        }
    }
    Err(EsmdError::PartialResult { gap })
}
