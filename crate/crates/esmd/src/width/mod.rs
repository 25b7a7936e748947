//! Monte Carlo estimation of Gaussian widths, localized widths of design
//! images of convex bodies, and the critical radius.
//!
//! Width of the full image: per noise draw `xi`, the supremum of
//! `<xi, X a>` over `tau K` comes straight from the LMO. The localized width
//! intersects the recentered image with a Euclidean ball; each sample then
//! solves a linear maximization over `(X tau K - X a*) ∩ r B` via Lagrangian
//! duality in the squared-ball constraint: the inner concave quadratic is
//! maximized by Frank-Wolfe (away steps when the image has explicit
//! vertices), the multiplier is bisected on the ball residual, and every
//! sample carries a primal-dual gap certificate.
//!
//! The critical radius is the smallest `r` with `w(... ∩ rB) <= r^2 / 2`;
//! a noisy bisection certifies each comparison at four standard errors (plus
//! the per-sample solver tolerance), doubling the sample budget when a
//! comparison is inconclusive, and shares noise draws across all `r` values.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::bodies::{sample_in_body, ConvexBody};
use crate::error::{check_dim, EsmdError, Result};
use crate::model::DesignMatrix;
use crate::numeric::{mean, pairwise_sum, sample_std};
use crate::rng::RngStream;

#[derive(Debug, Clone)]
pub struct WidthEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub per_sample_solver_gap_max: f64,
}

#[derive(Debug, Clone)]
pub struct CriticalRadius {
    pub r_star: f64,
    pub bracket: (f64, f64),
    pub width_at_r: WidthEstimate,
    pub tolerance: f64,
}

/// `w(X tau K)` by Monte Carlo: mean over draws of `tau <X' xi, lmo(X' xi)>`.
pub fn gaussian_width_mc(
    x: &DesignMatrix,
    body: &ConvexBody,
    tau: f64,
    n_samples: usize,
    stream: RngStream,
) -> Result<WidthEstimate> {
    check_dim("gaussian_width_mc body", x.d(), body.dim())?;
    if n_samples < 30 {
        return Err(EsmdError::invalid("width estimation needs n_samples >= 30"));
    }
    if !(tau > 0.0) {
        return Err(EsmdError::invalid("tau must be > 0"));
    }
    let values: Vec<Result<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let xi = stream.substream(i as u64).normal_vector(x.n());
            let c = x.tr_mul(&xi);
            let s = body.lmo(&c)?;
            Ok(tau * c.dot(&s.coords))
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(estimate_from(&values, 0.0))
}

fn estimate_from(values: &[f64], gap_max: f64) -> WidthEstimate {
    WidthEstimate {
        mean: mean(values),
        std_error: sample_std(values) / (values.len() as f64).sqrt(),
        n_samples: values.len(),
        per_sample_solver_gap_max: gap_max,
    }
}

/// The recentered, scaled image `D = X tau K - X a*` with its LMO and, when
/// the body is a hull, its explicit vertex images.
struct ImageSet<'a> {
    x: &'a DesignMatrix,
    body: &'a ConvexBody,
    tau: f64,
    center: DVector<f64>,
    vertex_images: Option<Vec<DVector<f64>>>,
}

impl<'a> ImageSet<'a> {
    fn new(
        x: &'a DesignMatrix,
        body: &'a ConvexBody,
        tau: f64,
        alpha_star: &DVector<f64>,
    ) -> Result<Self> {
        let center = x.mul(alpha_star);
        let vertex_images = body.vertex_list().map(|vs| {
            vs.into_iter()
                .map(|v| x.mul(&v) * tau - &center)
                .collect::<Vec<_>>()
        });
        Ok(ImageSet {
            x,
            body,
            tau,
            center,
            vertex_images,
        })
    }

    /// `argmax_{theta in D} <u, theta>`.
    fn lmo(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if let Some(vs) = &self.vertex_images {
            let mut best = 0usize;
            let mut best_val = f64::NEG_INFINITY;
            for (i, v) in vs.iter().enumerate() {
                let val = u.dot(v);
                if val > best_val {
                    best_val = val;
                    best = i;
                }
            }
            return Ok(vs[best].clone());
        }
        let c = self.x.tr_mul(u);
        let s = self.body.lmo(&c)?;
        Ok(self.x.mul(&s.coords) * self.tau - &self.center)
    }
}

struct SampleOutcome {
    /// Value of a feasible point (lower bound on the sample supremum).
    lower: f64,
    /// Dual certificate (upper bound).
    upper: f64,
}

/// Per-sample solve of `max <xi, theta>` over `D ∩ rB` with a primal-dual
/// certificate. `tol` is the absolute gap target.
fn solve_sample(set: &ImageSet, xi: &DVector<f64>, r: f64, tol: f64) -> Result<SampleOutcome> {
    let theta_free = set.lmo(xi)?;
    let free_norm = theta_free.norm();
    if free_norm <= r {
        let v = xi.dot(&theta_free);
        return Ok(SampleOutcome { lower: v, upper: v });
    }

    // Inner concave maximization of q(theta) = <xi,theta> - mu |theta|^2
    // over D, warm-started across multiplier values. With explicit vertices
    // the away-step variant converges linearly.
    struct InnerState {
        theta: DVector<f64>,
        weights: Option<Vec<f64>>,
    }
    let mut state = match &set.vertex_images {
        Some(vs) => {
            let mut best = 0usize;
            let mut best_val = f64::NEG_INFINITY;
            for (i, v) in vs.iter().enumerate() {
                let val = xi.dot(v);
                if val > best_val {
                    best_val = val;
                    best = i;
                }
            }
            let mut w = vec![0.0; vs.len()];
            w[best] = 1.0;
            InnerState {
                theta: vs[best].clone(),
                weights: Some(w),
            }
        }
        None => InnerState {
            theta: theta_free.clone(),
            weights: None,
        },
    };

    let inner_tol = 0.25 * tol;
    let mut inner_solve = |mu: f64, state: &mut InnerState| -> Result<f64> {
        let mut gap = f64::INFINITY;
        for it in 0..2000 {
            let grad = xi - &state.theta * (2.0 * mu);
            match (&set.vertex_images, &mut state.weights) {
                (Some(vs), Some(weights)) => {
                    let mut fw = 0usize;
                    let mut fw_val = f64::NEG_INFINITY;
                    let mut away = usize::MAX;
                    let mut away_val = f64::INFINITY;
                    for (i, v) in vs.iter().enumerate() {
                        let g = grad.dot(v);
                        if g > fw_val {
                            fw_val = g;
                            fw = i;
                        }
                        if weights[i] > 0.0 && g < away_val {
                            away_val = g;
                            away = i;
                        }
                    }
                    gap = fw_val - grad.dot(&state.theta);
                    if gap <= inner_tol {
                        return Ok(gap.max(0.0));
                    }
                    let toward = gap;
                    let away_gap = grad.dot(&state.theta) - away_val;
                    let (dir, gamma_max, idx, is_fw) = if toward >= away_gap || away == usize::MAX
                    {
                        (&vs[fw] - &state.theta, 1.0, fw, true)
                    } else {
                        let w = weights[away];
                        (
                            &state.theta - &vs[away],
                            w / (1.0 - w).max(1e-300),
                            away,
                            false,
                        )
                    };
                    let denom = 2.0 * mu * dir.norm_squared();
                    if denom == 0.0 {
                        return Ok(gap.max(0.0));
                    }
                    let gamma = (grad.dot(&dir) / denom).clamp(0.0, gamma_max);
                    if gamma == 0.0 {
                        return Ok(gap.max(0.0));
                    }
                    state.theta += &dir * gamma;
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
                }
                _ => {
                    let s = set.lmo(&grad)?;
                    let dir = &s - &state.theta;
                    gap = grad.dot(&dir);
                    if gap <= inner_tol {
                        return Ok(gap.max(0.0));
                    }
                    let denom = 2.0 * mu * dir.norm_squared();
                    if denom == 0.0 {
                        return Ok(gap.max(0.0));
                    }
                    let gamma = (gap / denom).clamp(0.0, 1.0);
                    state.theta += &dir * gamma;
                }
            }
            let _ = it;
        }
        Ok(gap.max(0.0))
    };

    // Ball-residual bisection on the multiplier, tracking the best certified
    // primal and dual values seen.
    let mut best_lower = f64::NEG_INFINITY;
    let mut best_upper = f64::INFINITY;
    let mut mu_lo = 0.0_f64;
    let mut mu_hi = f64::NAN;
    let mut mu = xi.dot(&theta_free).abs() / (2.0 * r * r).max(1e-300);
    if !(mu > 0.0) {
        mu = 1.0;
    }
    for _round in 0..90 {
        let inner_gap = inner_solve(mu, &mut state)?;
        let norm = state.theta.norm();
        let q_val = xi.dot(&state.theta) - mu * norm * norm;
        let upper = q_val + inner_gap + mu * r * r;
        best_upper = best_upper.min(upper);
        let feasible = &state.theta * (r / norm.max(r)).min(1.0);
        best_lower = best_lower.max(xi.dot(&feasible));
        if best_upper - best_lower <= tol {
            break;
        }
        if norm > r {
            mu_lo = mu;
        } else {
            mu_hi = mu;
        }
        mu = if mu_hi.is_nan() {
            mu * 2.0
        } else {
            0.5 * (mu_lo + mu_hi)
        };
    }
    Ok(SampleOutcome {
        lower: best_lower,
        upper: best_upper,
    })
}

struct LocalizedWidth {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LocalizedWidth {
    fn gap_max(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .fold(0.0, f64::max)
    }
}

fn localized_samples(
    set: &ImageSet,
    r: f64,
    n_samples: usize,
    stream: RngStream,
    inner_tol: f64,
) -> Result<LocalizedWidth> {
    localized_samples_range(set, r, 0..n_samples, stream, inner_tol)
}

fn localized_samples_range(
    set: &ImageSet,
    r: f64,
    range: std::ops::Range<usize>,
    stream: RngStream,
    inner_tol: f64,
) -> Result<LocalizedWidth> {
    let n_samples = range.len();
    let outcomes: Vec<Result<SampleOutcome>> = range
        .into_par_iter()
        .map(|i| {
            let xi = stream.substream(i as u64).normal_vector(set.x.n());
            solve_sample(set, &xi, r, inner_tol)
        })
        .collect();
    let mut lower = Vec::with_capacity(n_samples);
    let mut upper = Vec::with_capacity(n_samples);
    for o in outcomes {
        let o = o?;
        lower.push(o.lower);
        upper.push(o.upper);
    }
    Ok(LocalizedWidth { lower, upper })
}

/// `w((X tau K - X a*) ∩ r B)` by Monte Carlo. The reported mean comes from
/// certified feasible points; `per_sample_solver_gap_max` bounds how far any
/// sample may sit below its true supremum.
pub fn localized_width_mc(
    x: &DesignMatrix,
    body: &ConvexBody,
    tau: f64,
    alpha_star: &DVector<f64>,
    r: f64,
    n_samples: usize,
    stream: RngStream,
    inner_tol: f64,
) -> Result<WidthEstimate> {
    check_dim("localized_width_mc body", x.d(), body.dim())?;
    check_dim("localized_width_mc alpha_star", x.d(), alpha_star.len())?;
    if n_samples < 30 {
        return Err(EsmdError::invalid("width estimation needs n_samples >= 30"));
    }
    if !(r > 0.0) {
        return Err(EsmdError::invalid("localized width needs r > 0"));
    }
    if !body.scale(tau)?.membership(alpha_star, 1e-8)? {
        return Err(EsmdError::invalid(
            "localized width: alpha_star lies outside tau K",
        ));
    }
    let set = ImageSet::new(x, body, tau, alpha_star)?;
    let samples = localized_samples(&set, r, n_samples, stream, inner_tol)?;
    Ok(estimate_from(&samples.lower, samples.gap_max()))
}

enum Comparison {
    Below,
    Above,
    Inconclusive,
}

/// Certifies the sign of `w_loc(r) - r^2/2` at four standard errors plus the
/// per-sample solver tolerance.
fn compare_at(samples: &LocalizedWidth, r: f64) -> Comparison {
    let target = r * r / 2.0;
    let n = samples.lower.len() as f64;
    let se_lower = sample_std(&samples.lower) / n.sqrt();
    let se_upper = sample_std(&samples.upper) / n.sqrt();
    let mean_lower = pairwise_sum(&samples.lower) / n;
    let mean_upper = pairwise_sum(&samples.upper) / n;
    if mean_upper - target <= -4.0 * se_upper {
        Comparison::Below
    } else if mean_lower - target >= 4.0 * se_lower {
        Comparison::Above
    } else {
        Comparison::Inconclusive
    }
}

/// Smallest `r >= 0` with `w((X tau K - X a*) ∩ rB) <= r^2/2`, bisected to
/// `tol` with common random numbers and adaptive sample budgets.
pub fn critical_radius(
    x: &DesignMatrix,
    body: &ConvexBody,
    tau: f64,
    alpha_star: &DVector<f64>,
    tol: f64,
    n_samples: usize,
    stream: RngStream,
) -> Result<CriticalRadius> {
    check_dim("critical_radius body", x.d(), body.dim())?;
    if !(tol > 0.0) {
        return Err(EsmdError::invalid("critical_radius needs tol > 0"));
    }
    if n_samples < 30 {
        return Err(EsmdError::invalid("width estimation needs n_samples >= 30"));
    }
    if !body.scale(tau)?.membership(alpha_star, 1e-8)? {
        return Err(EsmdError::invalid(
            "critical_radius: alpha_star lies outside tau K",
        ));
    }

    let set = ImageSet::new(x, body, tau, alpha_star)?;
    let full = gaussian_width_mc(x, body, tau, n_samples, stream.substream(u64::MAX))?;
    // Degenerate image: the set is (statistically) a single point.
    if full.mean <= 4.0 * full.std_error {
        let zero = WidthEstimate {
            mean: 0.0,
            std_error: 0.0,
            n_samples,
            per_sample_solver_gap_max: 0.0,
        };
        return Ok(CriticalRadius {
            r_star: 0.0,
            bracket: (0.0, 0.0),
            width_at_r: zero,
            tolerance: tol,
        });
    }

    let rank_cap = 2.0 * (x.rank() as f64).sqrt();
    let width_cap = 2.0 * full.mean.max(0.0).sqrt();
    let mut hi = rank_cap.min(width_cap);
    let mut lo = 0.0_f64;

    let inner_tol_at = |r: f64| 1e-3 * (1.0 + r * r / 2.0);
    let mut decide = |r: f64| -> Result<Comparison> {
        // Escalate by extending the common-random-number sample set in place.
        let mut samples = localized_samples(&set, r, n_samples, stream, inner_tol_at(r))?;
        loop {
            match compare_at(&samples, r) {
                Comparison::Inconclusive if samples.lower.len() < 16 * n_samples => {
                    let extra = localized_samples_range(
                        &set,
                        r,
                        samples.lower.len()..2 * samples.lower.len(),
                        stream,
                        inner_tol_at(r),
                    )?;
                    samples.lower.extend(extra.lower);
                    samples.upper.extend(extra.upper);
                }
                other => return Ok(other),
            }
        }
    };

    // Certify the top of the bracket, then bisect. An inconclusive probe sits
    // inside the noise core around the crossing; off-center probes of the
    // bracket still resolve there, so several quantiles are tried before
    // giving up.
    match decide(hi)? {
        Comparison::Below => {}
        Comparison::Above | Comparison::Inconclusive => {
            return Err(EsmdError::Indeterminate { lo, hi });
        }
    }
    while hi - lo > tol {
        let mut resolved = false;
        for frac in [
            0.5, 0.375, 0.625, 0.25, 0.75, 0.125, 0.875, 0.0625, 0.9375,
        ] {
            let probe = lo + frac * (hi - lo);
            match decide(probe)? {
                Comparison::Below => {
                    hi = probe;
                    resolved = true;
                    break;
                }
                Comparison::Above => {
                    lo = probe;
                    resolved = true;
                    break;
                }
                Comparison::Inconclusive => {}
            }
        }
        if !resolved {
            return Err(EsmdError::Indeterminate { lo, hi });
        }
    }

    let samples = localized_samples(&set, hi, n_samples, stream, inner_tol_at(hi))?;
    let width_at_r = estimate_from(&samples.lower, samples.gap_max());
    Ok(CriticalRadius {
        r_star: hi,
        bracket: (lo, hi),
        width_at_r,
        tolerance: tol,
    })
}

/// Worst sampled ratio `r*^2(tau-side) / (tau r*^2(unit side))` over probe
/// ground truths; at most `1` up to Monte Carlo tolerance.
pub fn scaling_check(
    x: &DesignMatrix,
    body: &ConvexBody,
    tau: f64,
    n_probes: usize,
    cr_tol: f64,
    n_samples: usize,
    stream: RngStream,
) -> Result<f64> {
    if !(tau >= 1.0) {
        return Err(EsmdError::invalid("scaling check needs tau >= 1"));
    }
    let mut worst: f64 = 0.0;
    for probe in 0..n_probes {
        let alpha = sample_in_body(body, 1.0, stream.substream(1000 + probe as u64))?;
        // Common noise draws across both scales.
        let noise = stream.substream(probe as u64);
        let base = critical_radius(x, body, 1.0, &alpha, cr_tol, n_samples, noise)?;
        let scaled_alpha = &alpha * tau;
        let scaled = critical_radius(x, body, tau, &scaled_alpha, cr_tol, n_samples, noise)?;
        if base.r_star > 0.0 {
            worst = worst.max(scaled.r_star.powi(2) / (tau * base.r_star.powi(2)));
        }
    }
    Ok(worst)
}
