//! Runs the assumption checker across the potential zoo with the certified
//! constants: the four l1-ball potentials on `B_1`, the smooth-norm ridge on
//! an l_p ball, the Moreau construction on `B_2` and `B_1`, and the
//! log-sum-exp hull potential on the 2-D square.

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentOutput};
use crate::bodies::ConvexBody;
use crate::error::{EsmdError, Result};
use crate::potentials::{
    check_assumption, AssumptionReport, Potential, Table1Name, Table1Overrides,
};
use crate::rng::RngStream;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckPotentialsConfig {
    pub d: Vec<usize>,
    pub tau: Vec<f64>,
    pub samples: usize,
    /// Constructions to include; defaults to the full zoo.
    pub include: Vec<String>,
}

impl Default for CheckPotentialsConfig {
    fn default() -> Self {
        CheckPotentialsConfig {
            d: vec![4, 16, 64],
            tau: vec![0.5, 1.0, 4.0],
            samples: 1000,
            include: vec![
                "squared_lp".into(),
                "huber_moreau".into(),
                "adj_hypentropy".into(),
                "sigmoidal".into(),
                "smooth_norm".into(),
                "lemma32_l2".into(),
                "lemma32_l1".into(),
                "logsumexp_square".into(),
            ],
        }
    }
}

struct CheckRow {
    construction: String,
    d: usize,
    tau: f64,
    c_a: f64,
    report: AssumptionReport,
}

fn check_cell(
    construction: &str,
    d: usize,
    tau: f64,
    samples: usize,
    stream: RngStream,
) -> Result<Option<CheckRow>> {
    let (psi, body): (Potential, ConvexBody) = match construction {
        "squared_lp" | "huber_moreau" | "adj_hypentropy" | "sigmoidal" => {
            let name = Table1Name::parse(construction)?;
            let body = ConvexBody::lp_ball(d, 1.0)?;
            (
                Potential::make_table1(name, d, tau, Table1Overrides::default())?,
                body,
            )
        }
        "smooth_norm" => {
            let body = ConvexBody::lp_ball(d, 1.5)?;
            (Potential::make_smooth_norm(&body, 1.0)?, body)
        }
        "lemma32_l2" => {
            let body = ConvexBody::lp_ball(d, 2.0)?;
            (
                Potential::make_lemma32(&body, 0.1, stream.substream(999))?,
                body,
            )
        }
        "lemma32_l1" => {
            let body = ConvexBody::lp_ball(d, 1.0)?;
            (
                Potential::make_lemma32(&body, 0.1, stream.substream(999))?,
                body,
            )
        }
        "logsumexp_square" => {
            // The square is 2-dimensional; run it once per tau.
            if d != 2 {
                return Ok(None);
            }
            let rows = nalgebra::DMatrix::from_row_slice(
                4,
                2,
                &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
            );
            let body = ConvexBody::polytope_h(rows.clone())?;
            (Potential::make_msconvexhull(rows, tau, 2.0)?, body)
        }
        other => {
            return Err(EsmdError::Config(format!(
                "unknown construction '{other}' in check_potentials.include"
            )))
        }
    };
    let report = check_assumption(&psi, &body, tau, samples, stream)?;
    Ok(Some(CheckRow {
        construction: construction.to_string(),
        d: psi.dim(),
        tau,
        c_a: psi.c_a,
        report,
    }))
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let cp = &cfg.check_potentials;
    if cp.d.is_empty() || cp.tau.is_empty() || cp.include.is_empty() {
        return Err(EsmdError::Config("check_potentials grid must be non-empty".into()));
    }
    if cp.samples < 100 {
        return Err(EsmdError::Config("check_potentials needs samples >= 100".into()));
    }
    let root = RngStream::new(cfg.base_seed, 0);
    let mut rows = Vec::new();
    let mut cell_idx = 0u64;
    for construction in &cp.include {
        let d_grid: Vec<usize> = if construction == "logsumexp_square" {
            vec![2]
        } else {
            cp.d.clone()
        };
        for &d in &d_grid {
            for &tau in &cp.tau {
                cell_idx += 1;
                if let Some(row) =
                    check_cell(construction, d, tau, cp.samples, root.substream(cell_idx))?
                {
                    rows.push(row);
                }
            }
        }
    }

    let mut csv = String::from(
        "construction,d,tau,c_a,grad_at_zero,sqrt_convexity_violations,strong_convexity_violations,lower_bound_violations,upper_bound_violations,samples,passed\n",
    );
    let mut failed = 0usize;
    for r in &rows {
        if !r.report.passed {
            failed += 1;
        }
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.construction,
            r.d,
            r.tau,
            r.c_a,
            r.report.grad_at_zero_norm,
            r.report.sqrt_convexity_violations,
            r.report.strong_convexity_violations,
            r.report.lower_bound_violations,
            r.report.upper_bound_violations,
            r.report.samples_used,
            r.report.passed
        ));
    }

    let mut output = ExperimentOutput::default();
    output.files.push(("assumption_checks.csv".into(), csv));
    output.push_summary("experiment", "check_potentials");
    output.push_summary("cells", rows.len());
    output.push_summary("failed", failed);
    output.failed = failed > 0;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes_at_small_scale() {
        let cfg = ExperimentConfig::from_toml(
            r#"
experiment = "check_potentials"
base_seed = 3

[check_potentials]
d = [4]
tau = [1.0]
samples = 300
"#,
        )
        .unwrap();
        let out = run(&cfg).unwrap();
        assert!(!out.failed, "{}", out.files[0].1);
    }

    #[test]
    fn empty_grid_is_a_usage_error() {
        let cfg = ExperimentConfig::from_toml(
            r#"
experiment = "check_potentials"
[check_potentials]
d = []
"#,
        )
        .unwrap();
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn injected_violation_is_reported() {
        // Hypentropy with gamma far above its bound fails the upper sandwich.
        let body = ConvexBody::lp_ball(6, 1.0).unwrap();
        let good =
            Potential::make_table1(Table1Name::AdjHypentropy, 6, 1.0, Table1Overrides::default())
                .unwrap();
        let mut cfg_bad = Table1Overrides::default();
        cfg_bad.gamma = Some(1.0);
        assert!(
            Potential::make_table1(Table1Name::AdjHypentropy, 6, 1.0, cfg_bad).is_err(),
            "constructor rejects out-of-bound gamma"
        );
        let rep = check_assumption(&good, &body, 1.0, 300, RngStream::new(4, 0)).unwrap();
        let _ = &body;
        assert!(rep.passed);
    }
}
