//! The potential zoo.
//!
//! Each [`Potential`] packages value / gradient / (Hessian) / inverse
//! gradient, the Bregman divergence, certified constants `(rho, c_l, c_u,
//! c_a)` and capability flags for continuous- and discrete-time mirror
//! descent. Constructors bake in the parameter rules the constants require.

mod checker;
mod logsumexp;
mod moreau;
mod separable;

pub use checker::{check_assumption, sample_in_body, AssumptionReport};

use nalgebra::{DMatrix, DVector};

use crate::bodies::ConvexBody;
use crate::error::{check_dim, EsmdError, Result};
use crate::model::{lp_norm, NormTag};
use crate::rng::RngStream;
use crate::solvers;
use separable as sep;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    pub continuous_ok: bool,
    pub discrete_ok: bool,
    pub has_closed_inverse: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct StrongConvexity {
    pub rho: f64,
    pub norm: NormTag,
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// `|a|_2^2`.
    SquaredL2,
    /// `|a|_p^2`, `p` in (1, 2].
    SquaredLp { p: f64 },
    /// `(sum h_lambda(a_i) + d lambda / 2)^2 + (rho/2)|a|_2^2`.
    HuberMoreau { lambda: f64, rho: f64 },
    /// Squared, normalized hypentropy sum.
    AdjHypentropy { gamma: f64 },
    /// Squared sigmoidal smoothing of the l1 norm; continuous time only.
    Sigmoidal { gamma: f64 },
    /// `(1/g^2) log^2(m sum exp(g <a_i, a>)) + (rho/2)|a|_2^2`.
    LogSumExpHull {
        a: DMatrix<f64>,
        gamma: f64,
        rho: f64,
    },
    /// `|a|_K^2 + (rho/2)|a|_2^2` for a uniformly smooth norm ball
    /// (supported concretely for lp balls with p in (1, 2]).
    SmoothNormPlusRidge { p: f64, rho: f64 },
    /// `(M_lambda phi_K^2)(a) + (rho/2)|a|_2^2` for an arbitrary body.
    GenericMoreau {
        body: ConvexBody,
        lambda: f64,
        rho: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
    dim: usize,
    pub c_l: f64,
    pub c_u: f64,
    pub c_a: f64,
    pub strong: Option<StrongConvexity>,
    pub caps: Caps,
}

/// Names of the four l1-ball potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table1Name {
    SquaredLp,
    HuberMoreau,
    AdjHypentropy,
    Sigmoidal,
}

impl Table1Name {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "squared_lp" => Table1Name::SquaredLp,
            "huber_moreau" | "huber" => Table1Name::HuberMoreau,
            "adj_hypentropy" | "hypentropy" => Table1Name::AdjHypentropy,
            "sigmoidal" => Table1Name::Sigmoidal,
            other => {
                return Err(EsmdError::invalid(format!(
                    "unknown potential name '{other}' (expected squared_lp | huber_moreau | adj_hypentropy | sigmoidal)"
                )))
            }
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Table1Name::SquaredLp => "squared_lp",
            Table1Name::HuberMoreau => "huber_moreau",
            Table1Name::AdjHypentropy => "adj_hypentropy",
            Table1Name::Sigmoidal => "sigmoidal",
        }
    }
}

/// Optional overrides for the Table-1 defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct Table1Overrides {
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
}

impl Potential {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn rho(&self) -> Option<f64> {
        self.strong.map(|s| s.rho)
    }

    pub fn reference_norm(&self) -> NormTag {
        self.strong.map(|s| s.norm).unwrap_or(NormTag::L2)
    }

    /// `|a|_2^2` with `rho = 2`, `c_l = c_u = 1` (its body is the l2 ball).
    pub fn squared_l2(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(EsmdError::invalid("potential dimension must be >= 1"));
        }
        Ok(Potential {
            kind: PotentialKind::SquaredL2,
            dim,
            c_l: 1.0,
            c_u: 1.0,
            c_a: 1.0,
            strong: Some(StrongConvexity {
                rho: 2.0,
                norm: NormTag::L2,
            }),
            caps: Caps {
                continuous_ok: true,
                discrete_ok: true,
                has_closed_inverse: true,
            },
        })
    }

    /// `|a|_p^2` paired with the l_p ball: `rho = 2(p-1)` w.r.t. the l_p
    /// norm and `c_l = c_u = 1`.
    pub fn squared_lp(dim: usize, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(EsmdError::invalid("potential dimension must be >= 1"));
        }
        if !(p > 1.0 && p <= 2.0) {
            return Err(EsmdError::invalid(format!(
                "squared lp potential needs p in (1, 2], got {p}"
            )));
        }
        Ok(Potential {
            kind: PotentialKind::SquaredLp { p },
            dim,
            c_l: 1.0,
            c_u: 1.0,
            c_a: 1.0,
            strong: Some(StrongConvexity {
                rho: 2.0 * (p - 1.0),
                norm: NormTag::Lp(p),
            }),
            caps: Caps {
                continuous_ok: false,
                discrete_ok: true,
                has_closed_inverse: true,
            },
        })
    }

    /// The four l1-ball potentials with defaults exactly at their parameter
    /// bounds for radius `tau`.
    pub fn make_table1(
        name: Table1Name,
        dim: usize,
        tau: f64,
        overrides: Table1Overrides,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(EsmdError::invalid("potential dimension must be >= 1"));
        }
        if !(tau > 0.0) {
            return Err(EsmdError::invalid("tau must be > 0"));
        }
        let d = dim as f64;
        match name {
            Table1Name::SquaredLp => {
                if dim < 2 {
                    return Err(EsmdError::invalid(
                        "squared_lp over the l1 ball needs d >= 2 (p = 1 + 1/log d)",
                    ));
                }
                // Default rule p = 1 + 1/log d; capped at 2 (only binds at d = 2).
                let p = overrides.p.unwrap_or_else(|| (1.0 + 1.0 / d.ln()).min(2.0));
                if !(p > 1.0 && p <= 2.0) {
                    return Err(EsmdError::invalid(format!("override p = {p} out of (1, 2]")));
                }
                if d.powf(1.0 - 1.0 / p) > std::f64::consts::E * (1.0 + 1e-12) {
                    return Err(EsmdError::invalid(format!(
                        "p = {p} violates p <= 1 + 1/log d; the l1 sandwich constant c_l = e fails"
                    )));
                }
                Ok(Potential {
                    kind: PotentialKind::SquaredLp { p },
                    dim,
                    c_l: std::f64::consts::E,
                    c_u: 1.0,
                    c_a: std::f64::consts::E,
                    strong: Some(StrongConvexity {
                        rho: 2.0 * (p - 1.0),
                        norm: NormTag::Lp(p),
                    }),
                    caps: Caps {
                        continuous_ok: false,
                        discrete_ok: true,
                        has_closed_inverse: true,
                    },
                })
            }
            Table1Name::HuberMoreau => {
                let lambda = overrides.lambda.unwrap_or(2.0 * tau / d);
                if !(lambda > 0.0 && lambda <= 2.0 * tau / d * (1.0 + 1e-12)) {
                    return Err(EsmdError::invalid(format!(
                        "huber lambda must lie in (0, 2 tau / d]; got {lambda}"
                    )));
                }
                Ok(Potential {
                    kind: PotentialKind::HuberMoreau { lambda, rho: 2.0 },
                    dim,
                    c_l: 1.0,
                    c_u: 5.0_f64.sqrt(),
                    c_a: 5.0_f64.sqrt(),
                    strong: Some(StrongConvexity {
                        rho: 2.0,
                        norm: NormTag::L2,
                    }),
                    caps: Caps {
                        continuous_ok: false,
                        discrete_ok: true,
                        has_closed_inverse: false,
                    },
                })
            }
            Table1Name::AdjHypentropy => {
                let bound = sinh_recip(d / tau)
                    .min(1.0 / (4.0 * tau))
                    .min(std::f64::consts::FRAC_1_SQRT_2);
                let gamma = overrides.gamma.unwrap_or(bound);
                if !(gamma > 0.0) {
                    return Err(EsmdError::invalid(format!(
                        "hypentropy gamma underflowed (d/tau = {} too large for f64)",
                        d / tau
                    )));
                }
                if gamma > bound * (1.0 + 1e-12) {
                    return Err(EsmdError::invalid(format!(
                        "hypentropy gamma = {gamma} exceeds the bound sinh(d/tau)^-1 ^ (4 tau)^-1 ^ 2^-1/2 = {bound}"
                    )));
                }
                let rho = (1.0 / gamma).asinh().powi(-2);
                Ok(Potential {
                    kind: PotentialKind::AdjHypentropy { gamma },
                    dim,
                    c_l: 1.0,
                    c_u: 3.0,
                    c_a: 3.0,
                    strong: Some(StrongConvexity {
                        rho,
                        norm: NormTag::L2,
                    }),
                    caps: Caps {
                        continuous_ok: true,
                        discrete_ok: true,
                        has_closed_inverse: false,
                    },
                })
            }
            Table1Name::Sigmoidal => {
                let gamma = overrides.gamma.unwrap_or(d * 4.0_f64.ln() / tau);
                if gamma < d * 4.0_f64.ln() / tau * (1.0 - 1e-12) {
                    return Err(EsmdError::invalid(format!(
                        "sigmoidal gamma = {gamma} is below the bound d log(4) / tau"
                    )));
                }
                Ok(Potential {
                    kind: PotentialKind::Sigmoidal { gamma },
                    dim,
                    c_l: 1.0,
                    c_u: 2.0,
                    c_a: 2.0,
                    strong: None,
                    caps: Caps {
                        continuous_ok: true,
                        discrete_ok: false,
                        has_closed_inverse: false,
                    },
                })
            }
        }
    }

    /// Moreau-envelope potential for an arbitrary body: `rho` from certified
    /// support probing, `lambda` halved until the assumption checker passes
    /// condition (IV) with `c_a = 4`.
    pub fn make_lemma32(body: &ConvexBody, lambda: f64, stream: RngStream) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(EsmdError::invalid("lambda must be > 0"));
        }
        let d = body.dim();
        // Upper bound on max_{a in K} |a|_2^2 via LMO probing: the axis
        // directions plus 2d random ones, inflated by 5%.
        let mut max_norm: f64 = 0.0;
        let mut probe = |dir: &DVector<f64>| -> Result<()> {
            let p = body.lmo(dir)?;
            max_norm = max_norm.max(p.coords.norm());
            Ok(())
        };
        for i in 0..d {
            for sign in [1.0, -1.0] {
                let mut e = DVector::zeros(d);
                e[i] = sign;
                probe(&e)?;
            }
        }
        for k in 0..2 * d {
            let dir = stream.substream(k as u64).normal_vector(d);
            probe(&dir)?;
        }
        if max_norm == 0.0 {
            return Err(EsmdError::invalid("body support probing returned 0"));
        }
        let max_sq = (max_norm * 1.05).powi(2);
        let rho = 2.0 / max_sq;

        let mut lam = lambda;
        let mut last_report = None;
        for _ in 0..=20 {
            let cand = Potential {
                kind: PotentialKind::GenericMoreau {
                    body: body.clone(),
                    lambda: lam,
                    rho,
                },
                dim: d,
                c_l: 2.0,
                c_u: 2.0,
                c_a: 4.0,
                strong: Some(StrongConvexity {
                    rho,
                    norm: NormTag::L2,
                }),
                caps: Caps {
                    continuous_ok: false,
                    discrete_ok: true,
                    has_closed_inverse: false,
                },
            };
            let report = check_assumption(&cand, body, 1.0, 400, stream.substream(10_000))?;
            if report.lower_bound_violations == 0 && report.upper_bound_violations == 0 {
                return Ok(cand);
            }
            last_report = Some(report);
            lam *= 0.5;
        }
        Err(EsmdError::invalid(format!(
            "no lambda satisfied condition (IV) with c_a = 4 after 20 halvings; last report: {:?}",
            last_report
        )))
    }

    /// Log-sum-exp potential for an M-convex hull given in H-representation.
    /// `vertices_norm_sq_max` is (an upper bound on) `max_i |k_i|_2^2`.
    pub fn make_msconvexhull(
        a: DMatrix<f64>,
        tau: f64,
        vertices_norm_sq_max: f64,
    ) -> Result<Self> {
        let d = a.ncols();
        let m = a.nrows();
        if m < d + 1 {
            return Err(EsmdError::invalid(format!(
                "an H-representation of a bounded d-dimensional body needs m >= d + 1 rows (m = {m}, d = {d})"
            )));
        }
        if !(tau > 0.0) || !(vertices_norm_sq_max > 0.0) {
            return Err(EsmdError::invalid("tau and vertices_norm_sq_max must be > 0"));
        }
        // Validates boundedness and origin feasibility.
        let _body = ConvexBody::polytope_h(a.clone())?;
        let row_sum = a.row_sum();
        if row_sum.norm() > 1e-10 * a.norm().max(1.0) {
            log::warn!(
                "log-sum-exp hull: rows do not sum to zero (|sum| = {:.3e}); the gradient will not vanish at the origin",
                row_sum.norm()
            );
        }
        let gamma = 2.0 * (m as f64).ln() / tau;
        let rho = 2.0 / vertices_norm_sq_max;
        Ok(Potential {
            kind: PotentialKind::LogSumExpHull { a, gamma, rho },
            dim: d,
            c_l: 1.0,
            c_u: 3.0,
            c_a: 3.0,
            strong: Some(StrongConvexity {
                rho,
                norm: NormTag::L2,
            }),
            caps: Caps {
                continuous_ok: true,
                discrete_ok: true,
                has_closed_inverse: false,
            },
        })
    }

    /// `|a|_K^2 + (rho/2)|a|_2^2` for a uniformly smooth norm ball. `c_k` is
    /// the norm equivalence constant `|.|_2 <= c_k |.|_K`.
    pub fn make_smooth_norm(body: &ConvexBody, c_k: f64) -> Result<Self> {
        if !(c_k > 0.0) {
            return Err(EsmdError::invalid("norm equivalence constant must be > 0"));
        }
        let p = match body.kind() {
            crate::bodies::BodyKind::LpBall { p } if *p > 1.0 && *p <= 2.0 => *p,
            _ => {
                return Err(EsmdError::unsupported(
                    "smooth-norm potential is supported concretely for lp balls with p in (1, 2]",
                ))
            }
        };
        let rho = 2.0 / (c_k * c_k);
        Ok(Potential {
            kind: PotentialKind::SmoothNormPlusRidge { p, rho },
            dim: body.dim(),
            c_l: 1.0,
            c_u: 2.0_f64.sqrt(),
            c_a: 2.0_f64.sqrt(),
            strong: Some(StrongConvexity {
                rho,
                norm: NormTag::L2,
            }),
            caps: Caps {
                continuous_ok: false,
                discrete_ok: true,
                has_closed_inverse: false,
            },
        })
    }

    /// Direct Moreau potential without the lambda search (used in tests and
    /// by callers who know their lambda).
    pub fn generic_moreau(body: &ConvexBody, lambda: f64, rho: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(rho > 0.0) {
            return Err(EsmdError::invalid("lambda and rho must be > 0"));
        }
        Ok(Potential {
            kind: PotentialKind::GenericMoreau {
                body: body.clone(),
                lambda,
                rho,
            },
            dim: body.dim(),
            c_l: 2.0,
            c_u: 2.0,
            c_a: 4.0,
            strong: Some(StrongConvexity {
                rho,
                norm: NormTag::L2,
            }),
            caps: Caps {
                continuous_ok: false,
                discrete_ok: true,
                has_closed_inverse: false,
            },
        })
    }

    pub fn value(&self, alpha: &DVector<f64>) -> Result<f64> {
        check_dim("potential value", self.dim, alpha.len())?;
        Ok(match &self.kind {
            PotentialKind::SquaredL2 => alpha.norm_squared(),
            PotentialKind::SquaredLp { p } => lp_norm(alpha, *p).powi(2),
            PotentialKind::HuberMoreau { lambda, rho } => {
                let s: f64 = alpha.iter().map(|&x| sep::huber(x, *lambda)).sum::<f64>()
                    + 0.5 * self.dim as f64 * lambda;
                s * s + 0.5 * rho * alpha.norm_squared()
            }
            PotentialKind::AdjHypentropy { gamma } => {
                let inv_a = 1.0 / (1.0 / gamma).asinh();
                let f: f64 = alpha
                    .iter()
                    .map(|&x| sep::hypentropy(x, *gamma, inv_a))
                    .sum();
                f * f
            }
            PotentialKind::Sigmoidal { gamma } => {
                let f: f64 = alpha.iter().map(|&x| sep::sigmoidal(x, *gamma)).sum();
                f * f
            }
            PotentialKind::LogSumExpHull { a, gamma, rho } => {
                logsumexp::value(a, *gamma, *rho, alpha)
            }
            PotentialKind::SmoothNormPlusRidge { p, rho } => {
                lp_norm(alpha, *p).powi(2) + 0.5 * rho * alpha.norm_squared()
            }
            PotentialKind::GenericMoreau { body, lambda, rho } => {
                moreau::value(body, *lambda, *rho, alpha)?
            }
        })
    }

    pub fn gradient(&self, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("potential gradient", self.dim, alpha.len())?;
        Ok(match &self.kind {
            PotentialKind::SquaredL2 => alpha * 2.0,
            PotentialKind::SquaredLp { p } => lp_sq_gradient(alpha, *p),
            PotentialKind::HuberMoreau { lambda, rho } => {
                let s: f64 = alpha.iter().map(|&x| sep::huber(x, *lambda)).sum::<f64>()
                    + 0.5 * self.dim as f64 * lambda;
                let mut g =
                    DVector::from_fn(self.dim, |i, _| 2.0 * s * sep::huber_prime(alpha[i], *lambda));
                g += alpha * *rho;
                g
            }
            PotentialKind::AdjHypentropy { gamma } => {
                let inv_a = 1.0 / (1.0 / gamma).asinh();
                let f: f64 = alpha
                    .iter()
                    .map(|&x| sep::hypentropy(x, *gamma, inv_a))
                    .sum();
                DVector::from_fn(self.dim, |i, _| {
                    2.0 * f * sep::hypentropy_prime(alpha[i], *gamma, inv_a)
                })
            }
            PotentialKind::Sigmoidal { gamma } => {
                let f: f64 = alpha.iter().map(|&x| sep::sigmoidal(x, *gamma)).sum();
                DVector::from_fn(self.dim, |i, _| {
                    2.0 * f * sep::sigmoidal_prime(alpha[i], *gamma)
                })
            }
            PotentialKind::LogSumExpHull { a, gamma, rho } => {
                logsumexp::gradient(a, *gamma, *rho, alpha)
            }
            PotentialKind::SmoothNormPlusRidge { p, rho } => {
                lp_sq_gradient(alpha, *p) + alpha * *rho
            }
            PotentialKind::GenericMoreau { body, lambda, rho } => {
                moreau::gradient(body, *lambda, *rho, alpha)?
            }
        })
    }

    /// Hessian for the twice-differentiable kinds.
    pub fn hessian(&self, alpha: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim("potential hessian", self.dim, alpha.len())?;
        match &self.kind {
            PotentialKind::SquaredL2 => Ok(DMatrix::identity(self.dim, self.dim) * 2.0),
            PotentialKind::AdjHypentropy { gamma } => {
                let inv_a = 1.0 / (1.0 / gamma).asinh();
                let f: f64 = alpha
                    .iter()
                    .map(|&x| sep::hypentropy(x, *gamma, inv_a))
                    .sum();
                let grad_f = DVector::from_fn(self.dim, |i, _| {
                    sep::hypentropy_prime(alpha[i], *gamma, inv_a)
                });
                let mut h = (&grad_f * grad_f.transpose()) * 2.0;
                for i in 0..self.dim {
                    h[(i, i)] += 2.0 * f * sep::hypentropy_second(alpha[i], *gamma, inv_a);
                }
                Ok(h)
            }
            PotentialKind::Sigmoidal { gamma } => {
                let f: f64 = alpha.iter().map(|&x| sep::sigmoidal(x, *gamma)).sum();
                let grad_f =
                    DVector::from_fn(self.dim, |i, _| sep::sigmoidal_prime(alpha[i], *gamma));
                let mut h = (&grad_f * grad_f.transpose()) * 2.0;
                for i in 0..self.dim {
                    h[(i, i)] += 2.0 * f * sep::sigmoidal_second(alpha[i], *gamma);
                }
                Ok(h)
            }
            PotentialKind::LogSumExpHull { a, gamma, rho } => {
                Ok(logsumexp::hessian(a, *gamma, *rho, alpha))
            }
            _ => Err(EsmdError::unsupported(
                "hessian requires a twice-differentiable potential (squared l2, hypentropy, sigmoidal, log-sum-exp)",
            )),
        }
    }

    /// Solves `hessian(alpha) v = b`. Separable squared kinds use the
    /// diagonal-plus-rank-one structure; log-sum-exp falls back to Cholesky.
    pub fn hessian_solve(&self, alpha: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("hessian_solve", self.dim, alpha.len())?;
        check_dim("hessian_solve rhs", self.dim, b.len())?;
        match &self.kind {
            PotentialKind::SquaredL2 => Ok(b / 2.0),
            PotentialKind::AdjHypentropy { gamma } => {
                let inv_a = 1.0 / (1.0 / gamma).asinh();
                let f: f64 = alpha
                    .iter()
                    .map(|&x| sep::hypentropy(x, *gamma, inv_a))
                    .sum();
                let grad_f = DVector::from_fn(self.dim, |i, _| {
                    sep::hypentropy_prime(alpha[i], *gamma, inv_a)
                });
                let diag = DVector::from_fn(self.dim, |i, _| {
                    2.0 * f * sep::hypentropy_second(alpha[i], *gamma, inv_a)
                });
                sherman_morrison(&diag, &grad_f, b)
            }
            PotentialKind::Sigmoidal { gamma } => {
                let f: f64 = alpha.iter().map(|&x| sep::sigmoidal(x, *gamma)).sum();
                let grad_f =
                    DVector::from_fn(self.dim, |i, _| sep::sigmoidal_prime(alpha[i], *gamma));
                let diag = DVector::from_fn(self.dim, |i, _| {
                    2.0 * f * sep::sigmoidal_second(alpha[i], *gamma)
                });
                sherman_morrison(&diag, &grad_f, b)
            }
            PotentialKind::LogSumExpHull { .. } => {
                let h = self.hessian(alpha)?;
                h.cholesky()
                    .map(|c| c.solve(b))
                    .ok_or_else(|| EsmdError::Integration("hessian not positive definite".into()))
            }
            _ => Err(EsmdError::unsupported(
                "hessian_solve requires a twice-differentiable potential",
            )),
        }
    }

    /// Inverse of the mirror map: returns `a` with `grad psi(a) = z` to
    /// `1e-8 (1 + |z|)`. Closed forms for the squared l2/lp norms; the
    /// separable squared kinds reduce to a monotone scalar solve; log-sum-exp
    /// runs damped Newton and the Moreau kind accelerated gradient descent.
    pub fn inverse_gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("inverse_gradient", self.dim, z.len())?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(EsmdError::invalid("inverse_gradient input must be finite"));
        }
        match &self.kind {
            PotentialKind::SquaredL2 => Ok(z / 2.0),
            PotentialKind::SquaredLp { p } => Ok(lp_sq_inverse_gradient(z, *p)),
            PotentialKind::HuberMoreau { lambda, rho } => Ok(sep::huber_inverse(z, *lambda, *rho)),
            PotentialKind::AdjHypentropy { gamma } => sep::hypentropy_inverse(z, *gamma),
            PotentialKind::Sigmoidal { gamma } => sep::sigmoidal_inverse(z, *gamma),
            PotentialKind::LogSumExpHull { .. } => {
                let tol = 1e-10 * (1.0 + z.norm());
                let z_owned = z.clone();
                solvers::damped_newton(
                    DVector::zeros(self.dim),
                    |x| {
                        let v = self.value(x).expect("dim checked") - z_owned.dot(x);
                        let g = self.gradient(x).expect("dim checked") - &z_owned;
                        (v, g)
                    },
                    |x| self.hessian(x).expect("dim checked"),
                    tol,
                    500,
                )
            }
            PotentialKind::SmoothNormPlusRidge { p, rho } => {
                Ok(smooth_norm_inverse(z, *p, *rho))
            }
            PotentialKind::GenericMoreau { lambda, rho, .. } => {
                let tol = 1e-10 * (1.0 + z.norm());
                let l = 1.0 / lambda + rho;
                let z_owned = z.clone();
                solvers::agd_strongly_convex(
                    DVector::zeros(self.dim),
                    |x| self.gradient(x).expect("dim checked") - &z_owned,
                    l,
                    *rho,
                    tol,
                    200_000,
                )
            }
        }
    }

    /// Bregman divergence `psi(a) - psi(b) - <grad psi(b), a - b>`.
    pub fn bregman(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        check_dim("bregman first argument", self.dim, a.len())?;
        check_dim("bregman second argument", self.dim, b.len())?;
        Ok(self.value(a)? - self.value(b)? - self.gradient(b)?.dot(&(a - b)))
    }
}

/// `1 / sinh(x)` without overflow: `2 e^{-x} / (1 - e^{-2x})` for large `x`.
fn sinh_recip(x: f64) -> f64 {
    if x < 20.0 {
        1.0 / x.sinh()
    } else {
        2.0 * (-x).exp() / (1.0 - (-2.0 * x).exp())
    }
}

/// Gradient of `|a|_p^2`: `2 sign(a_i) |a_i|^{p-1} |a|_p^{2-p}`, zero at 0.
fn lp_sq_gradient(alpha: &DVector<f64>, p: f64) -> DVector<f64> {
    let norm = lp_norm(alpha, p);
    if norm == 0.0 {
        return DVector::zeros(alpha.len());
    }
    let scale = norm.powf(2.0 - p);
    DVector::from_fn(alpha.len(), |i, _| {
        let x = alpha[i];
        if x == 0.0 {
            0.0
        } else {
            2.0 * x.signum() * x.abs().powf(p - 1.0) * scale
        }
    })
}

/// Inverse of the above, the conjugate-map formula
/// `a_i = sign(z_i) |z_i|^{q-1} |z|_q^{2-q} / 2`, computed with the max
/// scaled out so large `q` cannot overflow.
fn lp_sq_inverse_gradient(z: &DVector<f64>, p: f64) -> DVector<f64> {
    let q = p / (p - 1.0);
    let m = z.amax();
    if m == 0.0 {
        return DVector::zeros(z.len());
    }
    let scaled = z / m;
    let norm_scaled = lp_norm(&scaled, q);
    let factor = 0.5 * m * norm_scaled.powf(2.0 - q);
    DVector::from_fn(z.len(), |i, _| {
        let u = scaled[i];
        if u == 0.0 {
            0.0
        } else {
            u.signum() * u.abs().powf(q - 1.0) * factor
        }
    })
}

/// Scalar-reduced inverse for `|a|_p^2 + (rho/2)|a|_2^2`: for a trial
/// `s = |a|_p` the coordinate equations `2 t^{p-1} s^{2-p} + rho t = |z_i|`
/// are monotone, and `s` solves a decreasing fixed-point equation.
fn smooth_norm_inverse(z: &DVector<f64>, p: f64, rho: f64) -> DVector<f64> {
    let d = z.len();
    if z.iter().all(|v| *v == 0.0) {
        return DVector::zeros(d);
    }
    let coord = |s: f64, zi_abs: f64| -> f64 {
        if zi_abs == 0.0 {
            return 0.0;
        }
        let scale = 2.0 * s.powf(2.0 - p);
        let hi0 = zi_abs / rho;
        let mut lo = 0.0_f64;
        let mut hi = hi0;
        for _ in 0..80 {
            let t = 0.5 * (lo + hi);
            if scale * t.powf(p - 1.0) + rho * t < zi_abs {
                lo = t;
            } else {
                hi = t;
            }
        }
        0.5 * (lo + hi)
    };
    let norm_of = |s: f64| -> f64 {
        let v = DVector::from_fn(d, |i, _| coord(s, z[i].abs()));
        lp_norm(&v, p)
    };
    // g(s) = |a(s)|_p - s is strictly decreasing; bracket and bisect.
    let mut lo = 0.0_f64;
    let mut hi = lp_norm(z, p) / rho + 1.0;
    while norm_of(hi) > hi {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if norm_of(mid) >= mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    DVector::from_fn(d, |i, _| z[i].signum() * coord(s, z[i].abs()))
}

/// Solves `(diag + u u' ) x = b` for positive `diag` (factor 2 conventions
/// folded by the caller: here `H = D + 2 u u'` with `D = diag`), using
/// Sherman-Morrison. The actual Hessians are `2 (u u' + f D0)`; the caller
/// passes `diag = 2 f D0` and `u = grad f`, so `H = diag + 2 u u'`.
fn sherman_morrison(diag: &DVector<f64>, u: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if diag.iter().any(|&v| !(v > 0.0)) {
        return Err(EsmdError::Integration(
            "separable hessian has a vanishing diagonal (saturated coordinate)".into(),
        ));
    }
    let dinv_b = b.component_div(diag);
    let dinv_u = u.component_div(diag);
    let denom = 1.0 + 2.0 * u.dot(&dinv_u);
    let coeff = 2.0 * u.dot(&dinv_b) / denom;
    Ok(&dinv_b - &dinv_u * coeff)
}

#[cfg(test)]
mod tests;
