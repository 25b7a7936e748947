//! Minimax-rate simulation: LSE risk over l_p balls on the hard design,
//! `alpha* = 0`, log-log slope of mean risk against the sample size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_hard_design, ExperimentConfig, ExperimentOutput};
use crate::bodies::ConvexBody;
use crate::error::{EsmdError, Result};
use crate::lse::{solve_lse, LseOptions};
use crate::model::RegressionInstance;
use crate::numeric::{linear_fit, mean, quantile};
use crate::rng::RngStream;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimaxConfig {
    pub n: Vec<usize>,
    /// Defaults to `n` (the paper grid keeps d = n).
    pub d: Vec<usize>,
    pub p: Vec<f64>,
    pub lse_tol: f64,
    pub lse_max_iters: usize,
    pub allow_rectangular: bool,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        MinimaxConfig {
            n: vec![10, 20, 40, 80, 160, 320, 640],
            d: Vec::new(),
            p: vec![1.0, 1.25, 1.5, 1.75, 2.0],
            lse_tol: 1e-6,
            lse_max_iters: 400_000,
            allow_rectangular: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SlopeFit {
    pub p: f64,
    pub fitted_slope: f64,
    pub target_slope: f64,
    pub residual: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone)]
struct CellResult {
    n: usize,
    d: usize,
    p: f64,
    replicate: usize,
    stream_id: u64,
    risk: f64,
    objective: f64,
    fw_gap: f64,
    iterations: usize,
    marked: bool,
}

pub struct MinimaxResult {
    pub output: ExperimentOutput,
    pub slopes: Vec<SlopeFit>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    Ok(run_detailed(cfg)?.output)
}

pub fn run_detailed(cfg: &ExperimentConfig) -> Result<MinimaxResult> {
    let mc = &cfg.minimax_rate;
    if mc.n.is_empty() || mc.p.is_empty() {
        return Err(EsmdError::Config("minimax grid must be non-empty".into()));
    }
    let d_list: Vec<usize> = if mc.d.is_empty() {
        mc.n.clone()
    } else {
        if mc.d.len() != mc.n.len() {
            return Err(EsmdError::Config("d list must match n list".into()));
        }
        mc.d.clone()
    };
    if !mc.allow_rectangular && d_list != mc.n {
        return Err(EsmdError::Config(
            "minimax_rate enforces d = n; set allow_rectangular = true to override".into(),
        ));
    }

    // Cells in grid order; the design is deterministic and shared by all
    // replicates of a cell.
    struct Cell {
        n: usize,
        d: usize,
        p: f64,
        design: crate::model::DesignMatrix,
    }
    let mut cells = Vec::new();
    for (&n, &d) in mc.n.iter().zip(&d_list) {
        for &p in &mc.p {
            cells.push(Cell {
                n,
                d,
                p,
                design: build_hard_design(n, d, p)?,
            });
        }
    }

    let root = RngStream::new(cfg.base_seed, 0);
    let reps = cfg.replicates;
    let total = cells.len() * reps;
    let results: Vec<Result<CellResult>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let cell_idx = flat / reps;
            let rep = flat % reps;
            let cell = &cells[cell_idx];
            let stream = root.substream(cell_idx as u64).substream(rep as u64);
            let xi = stream.normal_vector(cell.n);
            let mut inst = RegressionInstance::from_data(cell.design.clone(), xi)?;
            inst.ground_truth = Some(nalgebra::DVector::zeros(cell.d));
            let body = ConvexBody::lp_ball(cell.d, cell.p)?;
            let opts = LseOptions {
                tol: Some(mc.lse_tol),
                max_iters: Some(mc.lse_max_iters),
                ..Default::default()
            };
            let base = CellResult {
                n: cell.n,
                d: cell.d,
                p: cell.p,
                replicate: rep,
                stream_id: stream.stream_id,
                risk: f64::NAN,
                objective: f64::NAN,
                fw_gap: f64::NAN,
                iterations: 0,
                marked: true,
            };
            match solve_lse(&inst, &body, 1.0, &opts) {
                Ok(sol) => Ok(CellResult {
                    risk: sol.predictions.norm_squared() / cell.n as f64,
                    objective: sol.objective,
                    fw_gap: sol.fw_gap,
                    iterations: sol.iterations,
                    marked: false,
                    ..base
                }),
                Err(EsmdError::PartialResult { gap }) => Ok(CellResult {
                    fw_gap: gap,
                    ..base
                }),
                Err(e) => Err(e),
            }
        })
        .collect();
    let results: Vec<CellResult> = results.into_iter().collect::<Result<Vec<_>>>()?;

    // Raw rows.
    let mut cells_csv =
        String::from("seed,n,d,p,replicate,objective,risk,fw_gap,iterations,marked\n");
    for r in &results {
        cells_csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.stream_id,
            r.n,
            r.d,
            r.p,
            r.replicate,
            r.objective,
            r.risk,
            r.fw_gap,
            r.iterations,
            r.marked
        ));
    }

    // Per-cell summary with the quantiles the figure plots.
    let mut summary_csv = String::from("p,n,mean_risk,q20,q80,replicates_used\n");
    let mut slopes = Vec::new();
    for &p in &mc.p {
        let mut log_n = Vec::new();
        let mut log_mean = Vec::new();
        for (&n, &d) in mc.n.iter().zip(&d_list) {
            let risks: Vec<f64> = results
                .iter()
                .filter(|r| r.n == n && r.d == d && r.p == p && !r.marked)
                .map(|r| r.risk)
                .collect();
            if risks.is_empty() {
                continue;
            }
            let m = mean(&risks);
            summary_csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p,
                n,
                m,
                quantile(&risks, 0.2),
                quantile(&risks, 0.8),
                risks.len()
            ));
            log_n.push((n as f64).ln());
            log_mean.push(m.ln());
        }
        if log_n.len() >= 3 {
            let (_, slope, residual) = linear_fit(&log_n, &log_mean);
            slopes.push(SlopeFit {
                p,
                fitted_slope: slope,
                target_slope: 0.5 - 1.0 / p,
                residual,
                n_points: log_n.len(),
            });
        }
    }

    let mut slopes_csv = String::from("p,fitted_slope,target_slope,residual,n_points\n");
    for s in &slopes {
        slopes_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            s.p, s.fitted_slope, s.target_slope, s.residual, s.n_points
        ));
    }

    let mut output = ExperimentOutput::default();
    output.files.push(("cells.csv".into(), cells_csv));
    output.files.push(("summary.csv".into(), summary_csv));
    output.files.push(("slopes.csv".into(), slopes_csv));
    let marked = results.iter().filter(|r| r.marked).count();
    output.push_summary("experiment", "minimax_rate");
    output.push_summary("cells", cells.len());
    output.push_summary("replicates", reps);
    output.push_summary("marked_cells", marked);
    for s in &slopes {
        output.push_summary(&format!("slope_p_{}", s.p), s.fitted_slope);
        output.push_summary(&format!("target_p_{}", s.p), s.target_slope);
    }
    Ok(MinimaxResult { output, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::from_toml(
            r#"
experiment = "minimax_rate"
replicates = 1

[minimax_rate]
n = [10]
p = [1.5]
"#,
        )
        .unwrap();
        cfg.base_seed = 7;
        cfg
    }

    #[test]
    fn single_cell_emits_one_row_plus_header() {
        let out = run_detailed(&tiny_config()).unwrap();
        let cells = &out.output.files[0].1;
        assert_eq!(cells.lines().count(), 2);
        assert!(cells.starts_with("seed,n,d,p,replicate"));
    }

    #[test]
    fn slope_fit_recovers_synthetic_line() {
        let x: Vec<f64> = (1..=7).map(|i| (10.0 * i as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.3 - 0.37 * v).collect();
        let (a, b, res) = linear_fit(&x, &y);
        assert!((a - 1.3).abs() < 1e-10);
        assert!((b + 0.37).abs() < 1e-10);
        assert!(res < 1e-10);
    }

    #[test]
    fn rectangular_grid_requires_flag() {
        let cfg = ExperimentConfig::from_toml(
            r#"
experiment = "minimax_rate"
[minimax_rate]
n = [10]
d = [20]
p = [1.5]
"#,
        )
        .unwrap();
        assert!(run(&cfg).is_err());
        let cfg = ExperimentConfig::from_toml(
            r#"
experiment = "minimax_rate"
replicates = 1
[minimax_rate]
n = [10]
d = [20]
p = [1.5]
allow_rectangular = true
"#,
        )
        .unwrap();
        assert!(run(&cfg).is_ok());
    }
}
