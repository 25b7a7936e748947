//! Convex constraint bodies and their geometric oracles.
//!
//! A [`ConvexBody`] is convex, compact, and contains the origin in its
//! interior. Every body exposes the Minkowski functional (gauge), a linear
//! maximization oracle, membership, and Euclidean projection where a closed
//! form or a reliable scalar dual solve exists.

mod simplex;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, EsmdError, Result};
use crate::model::lp_norm;
use simplex::{in_convex_hull, maximize_over_h_polytope, LpOutcome};

/// Absolute bisection tolerance on the gauge, and its iteration cap.
const GAUGE_TOL: f64 = 1e-10;
const GAUGE_MAX_ITERS: usize = 200;

#[derive(Debug, Clone)]
pub enum BodyKind {
    /// Unit `l_p` ball, `p` in `[1, inf]` (`f64::INFINITY` for the cube).
    LpBall { p: f64 },
    /// `{a : A a <= 1}` with the origin strictly inside; rows are the `a_i`.
    PolytopeH { a: DMatrix<f64> },
    /// Convex hull of explicit vertices.
    PolytopeV { vertices: Vec<DVector<f64>> },
    Scaled { inner: Box<ConvexBody>, tau: f64 },
    Translated { inner: Box<ConvexBody>, shift: DVector<f64> },
}

#[derive(Debug, Clone)]
pub struct ConvexBody {
    kind: BodyKind,
    dim: usize,
}

/// A point of a body, optionally carrying its gauge value.
#[derive(Debug, Clone)]
pub struct BodyPoint {
    pub coords: DVector<f64>,
    pub certificate: Option<f64>,
    /// Set when the LMO was called with a zero direction and the returned
    /// point is arbitrary.
    pub zero_direction: bool,
}

impl BodyPoint {
    fn new(coords: DVector<f64>, certificate: Option<f64>) -> Self {
        BodyPoint {
            coords,
            certificate,
            zero_direction: false,
        }
    }
}

impl ConvexBody {
    pub fn lp_ball(dim: usize, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(EsmdError::invalid("body dimension must be >= 1"));
        }
        if !(p >= 1.0) {
            return Err(EsmdError::invalid(format!("lp ball needs p >= 1, got {p}")));
        }
        Ok(ConvexBody {
            kind: BodyKind::LpBall { p },
            dim,
        })
    }

    /// H-representation `{a : A a <= 1}`. Boundedness is certified at
    /// construction by maximizing `±e_i` over the body.
    pub fn polytope_h(a: DMatrix<f64>) -> Result<Self> {
        let dim = a.ncols();
        if dim == 0 || a.nrows() == 0 {
            return Err(EsmdError::invalid("H-polytope needs m >= 1 rows, d >= 1"));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(EsmdError::invalid("H-polytope rows must be finite"));
        }
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut c = DVector::zeros(dim);
                c[i] = sign;
                if matches!(maximize_over_h_polytope(&a, &c), LpOutcome::Unbounded) {
                    return Err(EsmdError::invalid(format!(
                        "H-polytope is unbounded in direction {}e_{i}",
                        if sign > 0.0 { "+" } else { "-" }
                    )));
                }
            }
        }
        Ok(ConvexBody {
            kind: BodyKind::PolytopeH { a },
            dim,
        })
    }

    /// V-representation. For `d <= 3` the constructor certifies that the
    /// origin is interior by probing a small cross-polytope; for larger `d`
    /// the caller must assert it via `assert_origin_interior`.
    pub fn polytope_v(vertices: Vec<DVector<f64>>, assert_origin_interior: bool) -> Result<Self> {
        let dim = vertices.first().map(|v| v.len()).unwrap_or(0);
        if dim == 0 {
            return Err(EsmdError::invalid("V-polytope needs at least one vertex"));
        }
        if dim > 10 || vertices.len() > 64 {
            return Err(EsmdError::invalid(
                "V-polytope oracles are certified for d <= 10 and at most 64 vertices",
            ));
        }
        if vertices.iter().any(|v| v.len() != dim) {
            return Err(EsmdError::invalid("V-polytope vertices must share a dimension"));
        }
        if dim <= 3 {
            let scale = vertices
                .iter()
                .map(|v| v.amax())
                .fold(0.0_f64, f64::max)
                .max(1e-12);
            let eps = 1e-6 * scale;
            for i in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut probe = DVector::zeros(dim);
                    probe[i] = sign * eps;
                    if !in_convex_hull(&vertices, &probe, 1e-9 * scale.max(1.0)) {
                        return Err(EsmdError::invalid(
                            "V-polytope does not contain the origin in its interior",
                        ));
                    }
                }
            }
        } else if !assert_origin_interior {
            return Err(EsmdError::invalid(
                "V-polytope with d > 3: pass assert_origin_interior = true to vouch for 0 in int(K)",
            ));
        }
        Ok(ConvexBody {
            kind: BodyKind::PolytopeV { vertices },
            dim,
        })
    }

    pub fn scale(&self, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(EsmdError::invalid(format!("scale factor must be > 0, got {tau}")));
        }
        Ok(ConvexBody {
            kind: BodyKind::Scaled {
                inner: Box::new(self.clone()),
                tau,
            },
            dim: self.dim,
        })
    }

    /// Translates the body by `shift`; the origin must stay interior, which
    /// is checked through the inner gauge.
    pub fn translate(&self, shift: DVector<f64>) -> Result<Self> {
        check_dim("translate shift", self.dim, shift.len())?;
        let at_origin = self.minkowski(&(-&shift))?;
        if at_origin >= 1.0 - 1e-12 {
            return Err(EsmdError::invalid(
                "translation would move the origin out of the body's interior",
            ));
        }
        Ok(ConvexBody {
            kind: BodyKind::Translated {
                inner: Box::new(self.clone()),
                shift,
            },
            dim: self.dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    /// Minkowski functional (gauge) `inf { t > 0 : a in tK }`.
    pub fn minkowski(&self, alpha: &DVector<f64>) -> Result<f64> {
        check_dim("minkowski", self.dim, alpha.len())?;
        Ok(match &self.kind {
            BodyKind::LpBall { p } => lp_norm(alpha, *p),
            BodyKind::PolytopeH { a } => {
                let mut m = 0.0_f64;
                for i in 0..a.nrows() {
                    m = m.max(a.row(i).transpose().dot(alpha));
                }
                m.max(0.0)
            }
            BodyKind::PolytopeV { vertices } => {
                if alpha.iter().all(|v| *v == 0.0) {
                    0.0
                } else {
                    let scale = alpha.amax().max(1.0);
                    gauge_by_bisection(alpha, |x, t| in_convex_hull_scaled(vertices, x, t, scale))
                }
            }
            BodyKind::Scaled { inner, tau } => inner.minkowski(alpha)? / tau,
            BodyKind::Translated { inner, shift } => {
                if alpha.iter().all(|v| *v == 0.0) {
                    0.0
                } else {
                    // a in t(K + v)  <=>  gauge_K(a - t v) <= t.
                    let mut hi = 1.0_f64;
                    let g = |t: f64| inner.minkowski(&(alpha - shift * t)).unwrap() - t;
                    let mut iters = 0;
                    while g(hi) > 0.0 {
                        hi *= 2.0;
                        iters += 1;
                        if iters > 200 {
                            return Err(EsmdError::invalid(
                                "translated gauge failed to bracket; origin not interior?",
                            ));
                        }
                    }
                    let mut lo = 0.0_f64;
                    for _ in 0..GAUGE_MAX_ITERS {
                        if hi - lo <= GAUGE_TOL {
                            break;
                        }
                        let mid = 0.5 * (lo + hi);
                        if g(mid) > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    hi
                }
            }
        })
    }

    /// Linear maximization oracle: `argmax_{a in K} <direction, a>`.
    pub fn lmo(&self, direction: &DVector<f64>) -> Result<BodyPoint> {
        check_dim("lmo", self.dim, direction.len())?;
        if direction.iter().any(|v| !v.is_finite()) {
            return Err(EsmdError::invalid("lmo direction must be finite"));
        }
        if direction.iter().all(|v| *v == 0.0) {
            let mut p = BodyPoint::new(DVector::zeros(self.dim), Some(0.0));
            p.zero_direction = true;
            if let BodyKind::Translated { shift, .. } = &self.kind {
                p.coords += shift;
                p.certificate = None;
            }
            return Ok(p);
        }
        Ok(match &self.kind {
            BodyKind::LpBall { p } => lp_ball_lmo(direction, *p),
            BodyKind::PolytopeH { a } => match maximize_over_h_polytope(a, direction) {
                LpOutcome::Optimal { x, .. } => BodyPoint::new(x, None),
                LpOutcome::Unbounded => {
                    return Err(EsmdError::invalid(
                        "H-polytope LMO unbounded; constructor invariant violated",
                    ))
                }
            },
            BodyKind::PolytopeV { vertices } => {
                let mut best = 0usize;
                let mut best_val = f64::NEG_INFINITY;
                for (i, v) in vertices.iter().enumerate() {
                    let val = direction.dot(v);
                    if val > best_val {
                        best_val = val;
                        best = i;
                    }
                }
                BodyPoint::new(vertices[best].clone(), None)
            }
            BodyKind::Scaled { inner, tau } => {
                let mut p = inner.lmo(direction)?;
                p.coords *= *tau;
                p.certificate = p.certificate.map(|c| c);
                p
            }
            BodyKind::Translated { inner, shift } => {
                let mut p = inner.lmo(direction)?;
                p.coords += shift;
                p.certificate = None;
                p
            }
        })
    }

    /// Support function `max_{a in K} <direction, a>`.
    pub fn support(&self, direction: &DVector<f64>) -> Result<f64> {
        Ok(self.lmo(direction)?.coords.dot(direction))
    }

    /// `true` iff the gauge at `alpha` is at most `1 + tol`.
    pub fn membership(&self, alpha: &DVector<f64>, tol: f64) -> Result<bool> {
        if tol < 0.0 {
            return Err(EsmdError::invalid("membership tolerance must be >= 0"));
        }
        Ok(self.minkowski(alpha)? <= 1.0 + tol)
    }

    /// Euclidean projection onto the body. Supported for `l_p` balls (closed
    /// forms for p in {1, 2, inf}, scalar dual Newton otherwise) and their
    /// scalings/translations; polytopes are LMO-only.
    pub fn project_euclidean(&self, point: &DVector<f64>) -> Result<BodyPoint> {
        check_dim("project_euclidean", self.dim, point.len())?;
        match &self.kind {
            BodyKind::LpBall { p } => {
                let coords = project_lp_ball(point, *p);
                let cert = lp_norm(&coords, *p);
                Ok(BodyPoint::new(coords, Some(cert)))
            }
            BodyKind::Scaled { inner, tau } => {
                let inner_pt = inner.project_euclidean(&(point / *tau))?;
                Ok(BodyPoint::new(inner_pt.coords * *tau, None))
            }
            BodyKind::Translated { inner, shift } => {
                let inner_pt = inner.project_euclidean(&(point - shift))?;
                Ok(BodyPoint::new(inner_pt.coords + shift, None))
            }
            _ => Err(EsmdError::unsupported(
                "Euclidean projection is only available for lp-ball based bodies; use LMO methods",
            )),
        }
    }

    /// Explicit vertex list when the body is a polytope with few vertices.
    /// Used by away-step Frank-Wolfe.
    pub fn vertex_list(&self) -> Option<Vec<DVector<f64>>> {
        match &self.kind {
            BodyKind::LpBall { p } if *p == 1.0 => {
                let mut v = Vec::with_capacity(2 * self.dim);
                for j in 0..self.dim {
                    for sign in [1.0, -1.0] {
                        let mut e = DVector::zeros(self.dim);
                        e[j] = sign;
                        v.push(e);
                    }
                }
                Some(v)
            }
            BodyKind::PolytopeV { vertices } => Some(vertices.clone()),
            BodyKind::Scaled { inner, tau } => inner
                .vertex_list()
                .map(|vs| vs.into_iter().map(|v| v * *tau).collect()),
            BodyKind::Translated { inner, shift } => inner
                .vertex_list()
                .map(|vs| vs.into_iter().map(|v| v + shift).collect()),
            _ => None,
        }
    }
}

/// Draws a point of `tau K`, mixing boundary support points, convex
/// combinations of them, and radial shrinkages so both the hull interior and
/// its extreme points are exercised.
pub fn sample_in_body(
    body: &ConvexBody,
    tau: f64,
    stream: crate::rng::RngStream,
) -> Result<DVector<f64>> {
    use rand::Rng;
    let d = body.dim();
    let mut rng = stream.rng();
    let mode: u8 = rng.gen_range(0..3);
    let support_point = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<DVector<f64>> {
        let dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        Ok(body.lmo(&dir)?.coords)
    };
    let point = match mode {
        0 => support_point(&mut rng)?,
        1 => {
            let k = rng.gen_range(2..=4usize);
            let mut weights: Vec<f64> =
                (0..k).map(|_| -f64::ln(rng.gen_range(1e-12..1.0))).collect();
            let total: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= total;
            }
            let mut acc = DVector::zeros(d);
            for w in weights {
                acc += support_point(&mut rng)? * w;
            }
            acc
        }
        _ => {
            let t: f64 = rng.gen_range(0.0..1.0);
            support_point(&mut rng)? * t
        }
    };
    Ok(point * tau)
}

fn in_convex_hull_scaled(
    vertices: &[DVector<f64>],
    x: &DVector<f64>,
    t: f64,
    scale: f64,
) -> bool {
    if t <= 0.0 {
        return false;
    }
    in_convex_hull(vertices, &(x / t), 1e-9 * scale.max(1.0))
}

/// Gauge by bisection on `t` given a membership predicate for `x in tK`.
fn gauge_by_bisection(x: &DVector<f64>, member: impl Fn(&DVector<f64>, f64) -> bool) -> f64 {
    let mut hi = 1.0_f64;
    let mut iters = 0;
    while !member(x, hi) {
        hi *= 2.0;
        iters += 1;
        if iters > 200 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0_f64;
    for _ in 0..GAUGE_MAX_ITERS {
        if hi - lo <= GAUGE_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if member(x, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn lp_ball_lmo(c: &DVector<f64>, p: f64) -> BodyPoint {
    let d = c.len();
    if p == 1.0 {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (i, v) in c.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        let mut out = DVector::zeros(d);
        out[best] = c[best].signum();
        return BodyPoint::new(out, Some(1.0));
    }
    if p.is_infinite() {
        let out = DVector::from_fn(d, |i, _| {
            if c[i] == 0.0 {
                0.0
            } else {
                c[i].signum()
            }
        });
        return BodyPoint::new(out, None);
    }
    let q = p / (p - 1.0);
    let m = c.amax();
    // Work on |c|/m to keep the q-powers in range; renormalize at the end.
    let mut out = DVector::from_fn(d, |i, _| {
        let r = (c[i].abs() / m).powf(q - 1.0);
        c[i].signum() * r
    });
    let norm = lp_norm(&out, p);
    if norm == 0.0 || !norm.is_finite() {
        // Extreme p close to 1 underflows; fall back to the vertex rule.
        return lp_ball_lmo(c, 1.0);
    }
    out /= norm;
    BodyPoint::new(out, Some(1.0))
}

/// Euclidean projection onto the unit `l_p` ball.
fn project_lp_ball(x: &DVector<f64>, p: f64) -> DVector<f64> {
    if lp_norm(x, p) <= 1.0 {
        return x.clone();
    }
    if p == 2.0 {
        return x / x.norm();
    }
    if p.is_infinite() {
        return x.map(|v| v.clamp(-1.0, 1.0));
    }
    if p == 1.0 {
        return project_l1_ball(x);
    }
    // Scalar dual: find mu >= 0 with sum_i t_i(mu)^p = 1, where t_i solves
    // t + (mu p / 2) t^{p-1} = |x_i| on [0, |x_i|].
    let coord = |mu: f64, xi: f64| -> f64 {
        if xi == 0.0 {
            return 0.0;
        }
        let kappa = 0.5 * mu * p;
        let mut lo = 0.0_f64;
        let mut hi = xi;
        for _ in 0..80 {
            let t = 0.5 * (lo + hi);
            if t + kappa * t.powf(p - 1.0) < xi {
                lo = t;
            } else {
                hi = t;
            }
        }
        0.5 * (lo + hi)
    };
    let norm_p = |mu: f64| -> f64 {
        let mut s = 0.0;
        for v in x.iter() {
            s += coord(mu, v.abs()).powf(p);
        }
        s
    };
    let mut mu_lo = 0.0_f64;
    let mut mu_hi = 1.0_f64;
    let mut iters = 0;
    while norm_p(mu_hi) > 1.0 {
        mu_hi *= 2.0;
        iters += 1;
        if iters > 200 {
            break;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (mu_lo + mu_hi);
        if norm_p(mid) > 1.0 {
            mu_lo = mid;
        } else {
            mu_hi = mid;
        }
    }
    let mu = 0.5 * (mu_lo + mu_hi);
    DVector::from_fn(x.len(), |i, _| x[i].signum() * coord(mu, x[i].abs()))
}

/// Duchi et al. sort-based projection onto the unit `l_1` ball (caller has
/// already established the point is outside).
fn project_l1_ball(x: &DVector<f64>) -> DVector<f64> {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - 1.0) / (i as f64 + 1.0);
        if t >= m - 1e-18 {
            break;
        }
        theta = t;
    }
    DVector::from_fn(x.len(), |i, _| {
        let shrunk = (x[i].abs() - theta).max(0.0);
        x[i].signum() * shrunk
    })
}
