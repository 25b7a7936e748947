//! Explicit column-normalized design matrix whose blocks make the l_p-ball
//! regression problem as hard as the minimax rate allows: `sqrt(n)` times a
//! block matrix whose first `k` rows carry disjoint runs of `m` ones.

use nalgebra::DMatrix;

use crate::error::{EsmdError, Result};
use crate::model::DesignMatrix;

/// `m = floor(d^{1/p} / sqrt(n))`, `k = floor(sqrt(n) d^{1/q})`, both clamped
/// to at least 1 (clamping sets the degenerate flag), `k <= n`, `k m <= d`.
pub fn build_hard_design(n: usize, d: usize, p: f64) -> Result<DesignMatrix> {
    if n == 0 || d == 0 {
        return Err(EsmdError::invalid("hard design needs n, d >= 1"));
    }
    if !(1.0..=2.0).contains(&p) {
        return Err(EsmdError::invalid(format!(
            "hard design is defined for p in [1, 2], got {p}"
        )));
    }
    let nf = n as f64;
    let df = d as f64;
    let inv_q = 1.0 - 1.0 / p;
    if !(p > 1.0 && p < 2.0) {
        log::warn!(
            "hard design at p = {p} lies outside the (1, 2) regime; block sizes are clamped"
        );
    } else {
        let lo = nf.powf(p / 2.0);
        let hi = nf.powf(1.0 / (2.0 * inv_q));
        if df < lo || df > hi {
            log::warn!(
                "hard design: d = {d} outside [n^(p/2), n^(q/2)] = [{lo:.1}, {hi:.1}]"
            );
        }
    }

    let mut degenerate = false;
    let m_raw = (df.powf(1.0 / p) / nf.sqrt()).floor() as usize;
    let k_raw = (nf.sqrt() * df.powf(inv_q)).floor() as usize;
    let mut m = if m_raw == 0 {
        degenerate = true;
        1
    } else {
        m_raw
    };
    let mut k = if k_raw == 0 {
        degenerate = true;
        1
    } else {
        k_raw
    };
    if k > n {
        degenerate = true;
        k = n;
    }
    if k * m > d {
        m = (d / k).max(1);
        if k * m > d {
            degenerate = true;
            k = d;
            m = 1;
        }
    }

    let mut entries = DMatrix::zeros(n, d);
    let scale = nf.sqrt();
    for i in 0..k {
        for j in 0..m {
            entries[(i, i * m + j)] = scale;
        }
    }
    let mut design = DesignMatrix::new(entries)?;
    design.degenerate = degenerate;
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_by_four_p2_is_twice_identity() {
        let x = build_hard_design(4, 4, 2.0).unwrap();
        assert!(!x.degenerate);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 2.0 } else { 0.0 };
                assert_eq!(x.matrix()[(i, j)], expected);
            }
        }
        assert_eq!(x.rank(), 4);
    }

    #[test]
    fn nonzero_columns_have_norm_sqrt_n() {
        for (n, d, p) in [(10, 10, 1.0), (20, 20, 1.25), (40, 40, 1.5), (16, 16, 1.75)] {
            let x = build_hard_design(n, d, p).unwrap();
            let root_n = (n as f64).sqrt();
            for j in 0..d {
                let norm = x.column(j).norm();
                assert!(
                    norm == 0.0 || (norm - root_n).abs() < 1e-12,
                    "column {j} of ({n},{d},{p}) has norm {norm}"
                );
            }
        }
    }

    #[test]
    fn rank_equals_block_count() {
        let n = 16;
        let d = 16;
        let p = 1.5;
        let x = build_hard_design(n, d, p).unwrap();
        let inv_q = 1.0 - 1.0 / p;
        let k = ((n as f64).sqrt() * (d as f64).powf(inv_q)).floor() as usize;
        assert_eq!(x.rank(), k.min(n));
    }

    #[test]
    fn degenerate_sizes_are_flagged() {
        // d^{1/p} < sqrt(n) forces m = 0 -> clamped and flagged.
        let x = build_hard_design(100, 4, 1.5).unwrap();
        assert!(x.degenerate);
    }
}
