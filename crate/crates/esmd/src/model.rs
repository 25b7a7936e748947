//! Regression model, risk functionals and design-matrix primitives.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, EsmdError, Result};
use crate::numeric;
use crate::rng::RngStream;

/// Norm tag used by smoothness/strong-convexity bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormTag {
    L1,
    L2,
    Lp(f64),
}

impl NormTag {
    pub fn eval(&self, v: &DVector<f64>) -> f64 {
        match self {
            NormTag::L1 => v.iter().map(|x| x.abs()).sum(),
            NormTag::L2 => v.norm(),
            NormTag::Lp(p) => lp_norm(v, *p),
        }
    }
}

pub fn lp_norm(v: &DVector<f64>, p: f64) -> f64 {
    if p.is_infinite() {
        return v.iter().fold(0.0, |m, x| m.max(x.abs()));
    }
    if p == 1.0 {
        return v.iter().map(|x| x.abs()).sum();
    }
    if p == 2.0 {
        return v.norm();
    }
    // Scale out the max to avoid overflow for large p.
    let m = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|x| (x.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// Dense design matrix with lazily cached spectral norm and rank.
#[derive(Debug)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
    spectral: OnceLock<f64>,
    rank: OnceLock<usize>,
    /// Set by the hard-design builder when block sizes had to be clamped.
    pub degenerate: bool,
}

impl Clone for DesignMatrix {
    fn clone(&self) -> Self {
        DesignMatrix {
            entries: self.entries.clone(),
            spectral: self.spectral.clone(),
            rank: self.rank.clone(),
            degenerate: self.degenerate,
        }
    }
}

impl DesignMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(EsmdError::invalid("design matrix must have n >= 1, d >= 1"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(EsmdError::invalid("design matrix entries must be finite"));
        }
        Ok(DesignMatrix {
            entries,
            spectral: OnceLock::new(),
            rank: OnceLock::new(),
            degenerate: false,
        })
    }

    /// Builds from a row-major slice.
    pub fn from_rows(n: usize, d: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * d {
            return Err(EsmdError::DimensionMismatch {
                context: "DesignMatrix::from_rows",
                expected: n * d,
                got: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, d, data))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn d(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn mul(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.entries * v
    }

    pub fn tr_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        self.entries.tr_mul(v)
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.entries.column(j).into_owned()
    }

    /// Largest singular value, cached.
    pub fn spectral_norm(&self) -> f64 {
        *self
            .spectral
            .get_or_init(|| numeric::spectral_norm(&self.entries))
    }

    /// Numerical rank: singular values above `1e-10 * sigma_max`, cached.
    pub fn rank(&self) -> usize {
        *self.rank.get_or_init(|| {
            let sv = numeric::singular_values(&self.entries);
            match sv.first() {
                None | Some(&0.0) => 0,
                Some(&smax) => sv.iter().filter(|&&s| s > 1e-10 * smax).count(),
            }
        })
    }
}

/// One regression problem: `y = X alpha* + xi`.
#[derive(Debug, Clone)]
pub struct RegressionInstance {
    pub design: DesignMatrix,
    pub response: DVector<f64>,
    pub ground_truth: Option<DVector<f64>>,
    /// Stream the noise was drawn from; `None` for instances built from raw data.
    pub noise_stream: Option<RngStream>,
}

impl RegressionInstance {
    pub fn from_data(design: DesignMatrix, response: DVector<f64>) -> Result<Self> {
        check_dim("RegressionInstance response", design.n(), response.len())?;
        Ok(RegressionInstance {
            design,
            response,
            ground_truth: None,
            noise_stream: None,
        })
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn d(&self) -> usize {
        self.design.d()
    }
}

/// Empirical risk `(1/n) ||X a - y||^2`.
pub fn empirical_risk(instance: &RegressionInstance, alpha: &DVector<f64>) -> Result<f64> {
    check_dim("empirical_risk alpha", instance.d(), alpha.len())?;
    let r = instance.design.mul(alpha) - &instance.response;
    Ok(r.norm_squared() / instance.n() as f64)
}

/// In-sample prediction risk `(1/n) ||X (a - a*)||^2`.
pub fn in_sample_risk(
    design: &DesignMatrix,
    alpha: &DVector<f64>,
    alpha_star: &DVector<f64>,
) -> Result<f64> {
    check_dim("in_sample_risk alpha", design.d(), alpha.len())?;
    check_dim("in_sample_risk alpha_star", design.d(), alpha_star.len())?;
    let diff = alpha - alpha_star;
    Ok(design.mul(&diff).norm_squared() / design.n() as f64)
}

/// Gradient of the empirical risk, `(2/n) X'(X a - y)`.
pub fn empirical_risk_gradient(
    instance: &RegressionInstance,
    alpha: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("empirical_risk_gradient alpha", instance.d(), alpha.len())?;
    let r = instance.design.mul(alpha) - &instance.response;
    Ok(instance.design.tr_mul(&r) * (2.0 / instance.n() as f64))
}

/// Draws `y = X a* + sigma xi` with `xi ~ N(0, I_n)` from the given stream.
/// The noise standard deviation defaults to 1 everywhere in the crate.
pub fn sample_instance_scaled(
    design: &DesignMatrix,
    alpha_star: &DVector<f64>,
    noise_scale: f64,
    stream: RngStream,
) -> Result<RegressionInstance> {
    check_dim("sample_instance alpha_star", design.d(), alpha_star.len())?;
    if !(noise_scale >= 0.0) {
        return Err(EsmdError::invalid("noise_scale must be >= 0"));
    }
    let xi = stream.normal_vector(design.n());
    let y = design.mul(alpha_star) + xi * noise_scale;
    Ok(RegressionInstance {
        design: design.clone(),
        response: y,
        ground_truth: Some(alpha_star.clone()),
        noise_stream: Some(stream),
    })
}

pub fn sample_instance(
    design: &DesignMatrix,
    alpha_star: &DVector<f64>,
    stream: RngStream,
) -> Result<RegressionInstance> {
    sample_instance_scaled(design, alpha_star, 1.0, stream)
}

/// An `n x d` matrix of i.i.d. standard normals.
pub fn sample_gaussian_design(n: usize, d: usize, stream: RngStream) -> Result<DesignMatrix> {
    if n == 0 || d == 0 {
        return Err(EsmdError::invalid("gaussian design needs n, d >= 1"));
    }
    let draws = stream.normal_vector(n * d);
    // Column-major fill; the layout convention only matters for determinism.
    DesignMatrix::new(DMatrix::from_column_slice(n, d, draws.as_slice()))
}

/// Certified upper bound on the smoothness of the empirical risk with respect
/// to the given norm: `2 sigma_max^2 / n` for l2, multiplied by the squared
/// norm-equivalence factor `sup ||v||_2 / ||v||` for other norms.
pub fn smoothness_constant(design: &DesignMatrix, norm: NormTag) -> Result<f64> {
    let base = 2.0 * design.spectral_norm().powi(2) / design.n() as f64;
    let d = design.d() as f64;
    let factor = match norm {
        NormTag::L2 => 1.0,
        NormTag::L1 => 1.0,
        NormTag::Lp(p) => {
            if !(p >= 1.0) {
                return Err(EsmdError::invalid(format!("unsupported norm exponent p={p}")));
            }
            if p <= 2.0 {
                1.0
            } else if p.is_infinite() {
                d.sqrt()
            } else {
                d.powf(0.5 - 1.0 / p)
            }
        }
    };
    Ok(base * factor * factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn identity_design(n: usize) -> DesignMatrix {
        DesignMatrix::new(DMatrix::identity(n, n)).unwrap()
    }

    #[test]
    fn empirical_risk_trivial_cases() {
        let x = identity_design(2);
        let inst =
            RegressionInstance::from_data(x.clone(), dvector![0.0, 0.0]).unwrap();
        assert_eq!(empirical_risk(&inst, &dvector![0.0, 0.0]).unwrap(), 0.0);

        let inst = RegressionInstance::from_data(x, dvector![1.0, 1.0]).unwrap();
        assert_eq!(empirical_risk(&inst, &dvector![0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn empirical_risk_matches_scalar_loop() {
        let stream = RngStream::new(7, 0);
        let x = sample_gaussian_design(4, 3, stream.substream(0)).unwrap();
        let alpha = stream.substream(1).normal_vector(3);
        let y = stream.substream(2).normal_vector(4);
        let inst = RegressionInstance::from_data(x.clone(), y.clone()).unwrap();
        let got = empirical_risk(&inst, &alpha).unwrap();
        let mut acc = 0.0;
        for i in 0..4 {
            let mut pred = 0.0;
            for j in 0..3 {
                pred += x.matrix()[(i, j)] * alpha[j];
            }
            acc += (pred - y[i]) * (pred - y[i]);
        }
        assert!((got - acc / 4.0).abs() <= 1e-12 * (1.0 + acc));
    }

    #[test]
    fn empirical_risk_rejects_bad_dims() {
        let x = identity_design(2);
        let inst = RegressionInstance::from_data(x, dvector![0.0, 0.0]).unwrap();
        assert!(matches!(
            empirical_risk(&inst, &dvector![0.0]),
            Err(EsmdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn in_sample_risk_examples() {
        let x = identity_design(2);
        let a = dvector![1.0, 0.0];
        let z = dvector![0.0, 0.0];
        assert_eq!(in_sample_risk(&x, &a, &a).unwrap(), 0.0);
        assert!((in_sample_risk(&x, &a, &z).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn in_sample_risk_matches_scalar_loop() {
        let stream = RngStream::new(11, 0);
        let x = sample_gaussian_design(5, 4, stream.substream(0)).unwrap();
        let a = stream.substream(1).normal_vector(4);
        let b = stream.substream(2).normal_vector(4);
        let got = in_sample_risk(&x, &a, &b).unwrap();
        let mut acc = 0.0;
        for i in 0..5 {
            let mut pred = 0.0;
            for j in 0..4 {
                pred += x.matrix()[(i, j)] * (a[j] - b[j]);
            }
            acc += pred * pred;
        }
        assert!((got - acc / 5.0).abs() <= 1e-12 * (1.0 + acc));
    }

    #[test]
    fn in_sample_risk_kernel_invariance() {
        // Duplicate columns: e1 - e2 lies in the kernel.
        let x = DesignMatrix::from_rows(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]).unwrap();
        let kernel = dvector![1.0, -1.0];
        let a = dvector![0.3, 0.7];
        let b = dvector![-0.2, 0.5];
        let base = in_sample_risk(&x, &a, &b).unwrap();
        let shifted =
            in_sample_risk(&x, &(a + &kernel * 2.5), &(b + &kernel * 2.5)).unwrap();
        assert!((base - shifted).abs() < 1e-12);
    }

    #[test]
    fn sample_instance_is_deterministic_and_reconstructible() {
        let x = identity_design(3);
        let a = dvector![1.0, -2.0, 0.5];
        let s = RngStream::new(42, 7);
        let i1 = sample_instance(&x, &a, s).unwrap();
        let i2 = sample_instance(&x, &a, s).unwrap();
        assert_eq!(i1.response.as_slice(), i2.response.as_slice());

        // y - X a* reproduces the noise from the stream.
        let xi = s.normal_vector(3);
        let resid = &i1.response - x.mul(&a);
        assert!((resid - xi).norm() < 1e-12);

        // Risk at the truth equals ||xi||^2 / n.
        let r = empirical_risk(&i1, &a).unwrap();
        let xi = s.normal_vector(3);
        assert!((r - xi.norm_squared() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sample_instance_null_design() {
        let x = DesignMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        let a = dvector![5.0, -3.0];
        let s = RngStream::new(1, 1);
        let inst = sample_instance(&x, &a, s).unwrap();
        let xi = s.normal_vector(3);
        assert!((inst.response - xi).norm() < 1e-15);
    }

    #[test]
    fn sample_instance_clt_mean_check() {
        // alpha* = 0 so y = xi; mean over fresh streams is ~N(0, 1/K).
        let x = identity_design(2);
        let a = dvector![0.0, 0.0];
        let root = RngStream::new(99, 0);
        let k = 100_000usize;
        let mut acc = 0.0;
        for rep in 0..k {
            let inst = sample_instance(&x, &a, root.substream(rep as u64)).unwrap();
            acc += inst.response[0];
        }
        let mean = acc / k as f64;
        let se = 1.0 / (k as f64).sqrt();
        assert!(mean.abs() <= 4.0 * se, "mean {mean} exceeds 4 se {se}");
    }

    #[test]
    fn gaussian_design_moments_and_determinism() {
        let s = RngStream::new(3, 5);
        let x1 = sample_gaussian_design(1000, 1000, s).unwrap();
        let x2 = sample_gaussian_design(1000, 1000, s).unwrap();
        assert_eq!(x1.matrix().as_slice(), x2.matrix().as_slice());
        let var = x1.matrix().iter().map(|v| v * v).sum::<f64>() / 1e6;
        assert!((0.99..=1.01).contains(&var), "variance {var}");
        let single = sample_gaussian_design(1, 1, s).unwrap();
        assert_eq!(single.n(), 1);
        assert_eq!(single.d(), 1);
    }

    #[test]
    fn rank_of_standard_cases() {
        assert_eq!(identity_design(3).rank(), 3);
        let u = dvector![1.0, 2.0, -1.0];
        let v = dvector![3.0, 0.5];
        let outer = DesignMatrix::new(&u * v.transpose()).unwrap();
        assert_eq!(outer.rank(), 1);
        assert_eq!(DesignMatrix::new(DMatrix::zeros(2, 2)).unwrap().rank(), 0);
    }

    #[test]
    fn smoothness_identity_and_scaling() {
        let x = identity_design(4);
        let b = smoothness_constant(&x, NormTag::L2).unwrap();
        assert!((b - 0.5).abs() < 1e-9);
        let xc = DesignMatrix::new(DMatrix::identity(4, 4) * 3.0).unwrap();
        let bc = smoothness_constant(&xc, NormTag::L2).unwrap();
        assert!((bc - 2.0 * 9.0 / 4.0).abs() < 1e-8);
    }

    #[test]
    fn smoothness_bound_holds_on_sampled_pairs() {
        let stream = RngStream::new(21, 0);
        let x = sample_gaussian_design(3, 3, stream.substream(0)).unwrap();
        let y = stream.substream(1).normal_vector(3);
        let inst = RegressionInstance::from_data(x.clone(), y).unwrap();
        let beta = smoothness_constant(&x, NormTag::L2).unwrap();
        for i in 0..1000 {
            let a = stream.substream(100 + i).normal_vector(3) * 2.0;
            let b = stream.substream(5000 + i).normal_vector(3) * 2.0;
            let fa = empirical_risk(&inst, &a).unwrap();
            let fb = empirical_risk(&inst, &b).unwrap();
            let gb = empirical_risk_gradient(&inst, &b).unwrap();
            let diff = &a - &b;
            let quad = fb + gb.dot(&diff) + 0.5 * beta * diff.norm_squared();
            assert!(fa <= quad + 1e-9 * (1.0 + fa.abs()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let stream = RngStream::new(33, 0);
        let x = sample_gaussian_design(6, 4, stream.substream(0)).unwrap();
        let y = stream.substream(1).normal_vector(6);
        let inst = RegressionInstance::from_data(x, y).unwrap();
        for i in 0..20 {
            let a = stream.substream(10 + i).normal_vector(4);
            let g = empirical_risk_gradient(&inst, &a).unwrap();
            let h = 1e-5 * (1.0 + a.norm());
            let mut fd = DVector::zeros(4);
            for j in 0..4 {
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[j] += h;
                am[j] -= h;
                fd[j] = (empirical_risk(&inst, &ap).unwrap()
                    - empirical_risk(&inst, &am).unwrap())
                    / (2.0 * h);
            }
            let rel = (g.clone() - &fd).norm() / (1.0 + g.norm());
            assert!(rel <= 1e-6, "rel err {rel}");
        }
    }
}
