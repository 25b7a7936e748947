//! Executable checker for the potential design conditions: vanishing
//! gradient at the origin, convex square root, Bregman strong convexity, and
//! the two-sided gauge sandwich with the certified constants.

use nalgebra::DVector;
use rand::Rng;

pub use crate::bodies::sample_in_body;
use crate::bodies::ConvexBody;
use crate::error::{EsmdError, Result};
use crate::potentials::Potential;
use crate::rng::RngStream;

const SLACK: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub grad_at_zero_norm: f64,
    pub sqrt_convexity_violations: usize,
    pub strong_convexity_violations: usize,
    pub lower_bound_violations: usize,
    pub upper_bound_violations: usize,
    pub samples_used: usize,
    pub passed: bool,
}

/// Deterministic stress points for the lower sandwich bound: axis vectors
/// and the all-ones diagonal, where l1-vs-lp gaps are extremal.
fn probe_battery(d: usize, scale: f64) -> Vec<DVector<f64>> {
    let mut probes = Vec::with_capacity(2 * d + 2);
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut e = DVector::zeros(d);
            e[i] = sign * scale;
            probes.push(e);
        }
    }
    probes.push(DVector::from_element(d, scale));
    probes.push(DVector::from_element(d, -scale));
    probes
}

pub fn check_assumption(
    psi: &Potential,
    body: &ConvexBody,
    tau: f64,
    n_samples: usize,
    stream: RngStream,
) -> Result<AssumptionReport> {
    if psi.dim() != body.dim() {
        return Err(EsmdError::DimensionMismatch {
            context: "check_assumption potential vs body",
            expected: body.dim(),
            got: psi.dim(),
        });
    }
    if n_samples < 100 {
        return Err(EsmdError::invalid("check_assumption needs n_samples >= 100"));
    }
    let d = psi.dim();

    // Cube half-width from the body's axis extent.
    let mut extent = 0.0_f64;
    for i in 0..d {
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        extent = extent.max(body.support(&e)?.abs());
        e[i] = -1.0;
        extent = extent.max(body.support(&e)?.abs());
    }
    let cube = 3.0 * tau.max(1.0) * extent.max(1.0);

    // (I) vanishing gradient at the origin.
    let grad_at_zero_norm = psi.gradient(&DVector::zeros(d))?.norm();

    let sqrt_psi = |x: &DVector<f64>| -> Result<f64> { Ok(psi.value(x)?.max(0.0).sqrt()) };
    let cube_sample = |sub: RngStream| -> DVector<f64> {
        let mut rng = sub.rng();
        DVector::from_fn(d, |_, _| rng.gen_range(-cube..cube))
    };

    // (II) midpoint convexity of sqrt(psi).
    let mut sqrt_convexity_violations = 0usize;
    for i in 0..n_samples {
        let a = cube_sample(stream.substream(i as u64));
        let b = cube_sample(stream.substream(1_000_000 + i as u64));
        let mid = (&a + &b) * 0.5;
        if sqrt_psi(&mid)? > 0.5 * (sqrt_psi(&a)? + sqrt_psi(&b)?) + SLACK {
            sqrt_convexity_violations += 1;
        }
    }

    // (III) Bregman strong convexity for discrete-capable potentials.
    let mut strong_convexity_violations = 0usize;
    if psi.caps.discrete_ok {
        if let Some(sc) = psi.strong {
            for i in 0..n_samples {
                let a = cube_sample(stream.substream(2_000_000 + i as u64));
                let b = cube_sample(stream.substream(3_000_000 + i as u64));
                let lhs = psi.bregman(&a, &b)?;
                let dist = sc.norm.eval(&(&a - &b));
                if lhs < 0.5 * sc.rho * dist * dist - SLACK {
                    strong_convexity_violations += 1;
                }
            }
        }
    }

    // (IV) first part: gauge <= c_l sqrt(psi) on the cube plus stress probes.
    let mut lower_bound_violations = 0usize;
    let mut check_lower = |x: &DVector<f64>| -> Result<()> {
        if body.minkowski(x)? > psi.c_l * sqrt_psi(x)? + SLACK {
            lower_bound_violations += 1;
        }
        Ok(())
    };
    for probe in probe_battery(d, cube) {
        check_lower(&probe)?;
    }
    for i in 0..n_samples {
        let x = cube_sample(stream.substream(4_000_000 + i as u64));
        check_lower(&x)?;
    }

    // (IV) second part: sqrt(psi) <= c_u tau on tau K.
    let mut upper_bound_violations = 0usize;
    for i in 0..n_samples {
        let x = sample_in_body(body, tau, stream.substream(5_000_000 + i as u64))?;
        if sqrt_psi(&x)? > psi.c_u * tau + SLACK {
            upper_bound_violations += 1;
        }
    }

    let passed = grad_at_zero_norm <= SLACK
        && sqrt_convexity_violations == 0
        && strong_convexity_violations == 0
        && lower_bound_violations == 0
        && upper_bound_violations == 0;

    Ok(AssumptionReport {
        grad_at_zero_norm,
        sqrt_convexity_violations,
        strong_convexity_violations,
        lower_bound_violations,
        upper_bound_violations,
        samples_used: n_samples,
        passed,
    })
}
