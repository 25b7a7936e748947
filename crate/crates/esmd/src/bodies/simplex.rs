//! Minimal dense simplex routines for the polytope oracles.
//!
//! Two entry points: maximizing a linear functional over `{a : A a <= 1}`
//! (free variables, slack start, Bland's rule), and a phase-1 feasibility
//! check for `V lambda = x, sum lambda = 1, lambda >= 0`. Problem sizes are
//! desk scale (m <= a few hundred, d <= a few dozen), so a full tableau is
//! the simplest reliable choice.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-9;

pub enum LpOutcome {
    Optimal { x: DVector<f64>, value: f64 },
    Unbounded,
}

/// Runs Bland-rule simplex minimization on a canonical tableau.
///
/// `tab` holds `m` constraint rows of `[A | b]` followed by the cost row
/// `[r | -z]`; `basis[i]` is the basic column of row `i`, and the tableau is
/// already in canonical form with `b >= 0`. Returns `false` on unboundedness.
fn run_simplex(tab: &mut DMatrix<f64>, basis: &mut [usize]) -> bool {
    let m = tab.nrows() - 1;
    let ncols = tab.ncols() - 1;
    loop {
        // Bland: entering column = smallest index with negative reduced cost.
        let mut enter = None;
        for j in 0..ncols {
            if tab[(m, j)] < -COST_TOL {
                enter = Some(j);
                break;
            }
        }
        let Some(j) = enter else {
            return true;
        };
        // Ratio test, ties broken by smallest basic variable (Bland).
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = tab[(i, j)];
            if a > PIVOT_TOL {
                let ratio = tab[(i, ncols)] / a;
                let better = ratio < best_ratio - PIVOT_TOL
                    || (ratio < best_ratio + PIVOT_TOL
                        && leave.map(|l| basis[l] > basis[i]).unwrap_or(false));
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return false;
        };
        // Pivot on (r, j).
        let piv = tab[(r, j)];
        for c in 0..=ncols {
            tab[(r, c)] /= piv;
        }
        for i in 0..=m {
            if i != r {
                let f = tab[(i, j)];
                if f != 0.0 {
                    for c in 0..=ncols {
                        tab[(i, c)] -= f * tab[(r, c)];
                    }
                }
            }
        }
        basis[r] = j;
    }
}

/// Maximizes `<c, a>` over `{a in R^d : A a <= 1}`. The feasible set contains
/// the origin, so the slack basis starts feasible and no phase 1 is needed.
pub fn maximize_over_h_polytope(a: &DMatrix<f64>, c: &DVector<f64>) -> LpOutcome {
    let m = a.nrows();
    let d = a.ncols();
    // Variables: a = u - w with u, w >= 0, plus m slacks.
    let ncols = 2 * d + m;
    let mut tab = DMatrix::zeros(m + 1, ncols + 1);
    for i in 0..m {
        for j in 0..d {
            tab[(i, j)] = a[(i, j)];
            tab[(i, d + j)] = -a[(i, j)];
        }
        tab[(i, 2 * d + i)] = 1.0;
        tab[(i, ncols)] = 1.0;
    }
    // Minimize -c'u + c'w; slack basis has zero cost so the row is canonical.
    for j in 0..d {
        tab[(m, j)] = -c[j];
        tab[(m, d + j)] = c[j];
    }
    let mut basis: Vec<usize> = (0..m).map(|i| 2 * d + i).collect();
    if !run_simplex(&mut tab, &mut basis) {
        return LpOutcome::Unbounded;
    }
    let mut x = DVector::zeros(d);
    for (i, &b) in basis.iter().enumerate() {
        let v = tab[(i, ncols)];
        if b < d {
            x[b] += v;
        } else if b < 2 * d {
            x[b - d] -= v;
        }
    }
    let value = c.dot(&x);
    LpOutcome::Optimal { x, value }
}

/// Phase-1 feasibility: is `x` a convex combination of the given vertices?
pub fn in_convex_hull(vertices: &[DVector<f64>], x: &DVector<f64>, tol: f64) -> bool {
    let m = vertices.len();
    let d = x.len();
    let rows = d + 1;
    // Constraints: sum_i lambda_i v_i = x ; sum_i lambda_i = 1; lambda >= 0.
    // Artificial variables give the starting basis; feasible iff min sum(artificials) ~ 0.
    let ncols = m + rows;
    let mut tab = DMatrix::zeros(rows + 1, ncols + 1);
    for r in 0..rows {
        let b = if r < d { x[r] } else { 1.0 };
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for j in 0..m {
            let coeff = if r < d { vertices[j][r] } else { 1.0 };
            tab[(r, j)] = sign * coeff;
        }
        tab[(r, m + r)] = 1.0;
        tab[(r, ncols)] = sign * b;
    }
    // Cost row: sum of artificials, made canonical by subtracting basic rows.
    for r in 0..rows {
        for c in 0..=ncols {
            let v = tab[(r, c)];
            tab[(rows, c)] -= v;
        }
    }
    for r in 0..rows {
        tab[(rows, m + r)] += 1.0;
    }
    let mut basis: Vec<usize> = (0..rows).map(|r| m + r).collect();
    let ok = run_simplex(&mut tab, &mut basis);
    debug_assert!(ok, "phase-1 objective is bounded below by zero");
    let infeasibility = -tab[(rows, ncols)];
    infeasibility.abs() <= tol
}
