//! Sweeps the localized width across a radius grid and emits the
//! `(r, width_mean, width_stderr)` table used to plot the threshold crossing.

use serde::{Deserialize, Serialize};

use super::{build_hard_design, ExperimentConfig, ExperimentOutput};
use crate::bodies::ConvexBody;
use crate::error::{EsmdError, Result};
use crate::model::{sample_gaussian_design, DesignMatrix};
use crate::rng::RngStream;
use crate::width::localized_width_mc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WidthSweepConfig {
    pub n: usize,
    pub d: usize,
    /// "gaussian" | "identity" | "hard".
    pub design: String,
    /// Block exponent when `design = "hard"`.
    pub hard_p: f64,
    /// "l1" | "l2" | "linf" | "lp".
    pub body: String,
    pub body_p: f64,
    pub tau: f64,
    /// "zero" | "sparse" (tau e_1).
    pub alpha_star: String,
    pub r_min: f64,
    pub r_max: f64,
    pub r_steps: usize,
    pub samples: usize,
    pub inner_tol: f64,
}

impl Default for WidthSweepConfig {
    fn default() -> Self {
        WidthSweepConfig {
            n: 20,
            d: 40,
            design: "gaussian".into(),
            hard_p: 1.5,
            body: "l1".into(),
            body_p: 1.5,
            tau: 1.0,
            alpha_star: "zero".into(),
            r_min: 0.5,
            r_max: 10.0,
            r_steps: 20,
            samples: 500,
            inner_tol: 1e-4,
        }
    }
}

pub fn make_design(wc: &WidthSweepConfig, stream: RngStream) -> Result<DesignMatrix> {
    match wc.design.as_str() {
        "gaussian" => sample_gaussian_design(wc.n, wc.d, stream),
        "identity" => {
            if wc.n != wc.d {
                return Err(EsmdError::Config("identity design needs n = d".into()));
            }
            DesignMatrix::new(nalgebra::DMatrix::identity(wc.n, wc.d))
        }
        "hard" => build_hard_design(wc.n, wc.d, wc.hard_p),
        other => Err(EsmdError::Config(format!("unknown design '{other}'"))),
    }
}

pub fn make_body(kind: &str, d: usize, p: f64) -> Result<ConvexBody> {
    match kind {
        "l1" => ConvexBody::lp_ball(d, 1.0),
        "l2" => ConvexBody::lp_ball(d, 2.0),
        "linf" => ConvexBody::lp_ball(d, f64::INFINITY),
        "lp" => ConvexBody::lp_ball(d, p),
        other => Err(EsmdError::Config(format!("unknown body '{other}'"))),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let wc = &cfg.width_sweep;
    if wc.r_steps < 2 || !(wc.r_min > 0.0) || !(wc.r_max > wc.r_min) {
        return Err(EsmdError::Config("width_sweep needs 0 < r_min < r_max, r_steps >= 2".into()));
    }
    let root = RngStream::new(cfg.base_seed, 0);
    let design = make_design(wc, root.substream(0))?;
    let body = make_body(&wc.body, wc.d, wc.body_p)?;
    let alpha_star = match wc.alpha_star.as_str() {
        "zero" => nalgebra::DVector::zeros(wc.d),
        "sparse" => {
            let mut e = nalgebra::DVector::zeros(wc.d);
            e[0] = wc.tau;
            e
        }
        other => return Err(EsmdError::Config(format!("unknown alpha_star '{other}'"))),
    };

    let mut csv = String::from("r,width_mean,width_stderr\n");
    for step in 0..wc.r_steps {
        let r = wc.r_min + (wc.r_max - wc.r_min) * step as f64 / (wc.r_steps - 1) as f64;
        // Common random numbers across the whole sweep.
        let est = localized_width_mc(
            &design,
            &body,
            wc.tau,
            &alpha_star,
            r,
            wc.samples,
            root.substream(1),
            wc.inner_tol,
        )?;
        csv.push_str(&format!("{r},{},{}\n", est.mean, est.std_error));
    }

    let mut output = ExperimentOutput::default();
    output.files.push(("width_sweep.csv".into(), csv));
    output.push_summary("experiment", "width_sweep");
    output.push_summary("samples", wc.samples);
    Ok(output)
}
