//! C ABI for the esmd library.
//!
//! Conventions:
//! - opaque handles (`EsmdDesign`, `EsmdBody`, `EsmdPotential`, `EsmdTrace`)
//!   created by `esmd_*_new`-style constructors and released by the matching
//!   `esmd_*_free`;
//! - every function returns an [`EsmdStatus`]; results go through out
//!   pointers and caller-owned buffers;
//! - on failure a thread-local message is readable via
//!   [`esmd_last_error_message`];
//! - panics never cross the boundary (mapped to `EsmdStatus::Panic`).

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use esmd::mirror::{md_run, EtaRule, MdConfig, MdMode};
use esmd::potentials::{Potential, Table1Name, Table1Overrides};
use esmd::{
    sample_gaussian_design, ConvexBody, DesignMatrix, EsmdError, RegressionInstance, RngStream,
};
use nalgebra::DVector;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsmdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Unsupported = 4,
    ConvergenceFailure = 5,
    Indeterminate = 6,
    Panic = 7,
}

/// Potentials constructible through the C API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsmdPotentialName {
    SquaredL2 = 0,
    SquaredLp = 1,
    HuberMoreau = 2,
    AdjHypentropy = 3,
    Sigmoidal = 4,
}

pub struct EsmdDesign(DesignMatrix);
pub struct EsmdBody(ConvexBody);
pub struct EsmdPotential(Potential);
pub struct EsmdTrace(esmd::mirror::RiskTrace);

fn set_error(msg: impl ToString) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.to_string());
}

fn status_of(err: &EsmdError) -> EsmdStatus {
    match err {
        EsmdError::DimensionMismatch { .. } => EsmdStatus::DimensionMismatch,
        EsmdError::Unsupported(_) => EsmdStatus::Unsupported,
        EsmdError::Convergence { .. } | EsmdError::Divergence { .. } => {
            EsmdStatus::ConvergenceFailure
        }
        EsmdError::Indeterminate { .. } => EsmdStatus::Indeterminate,
        _ => EsmdStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> EsmdStatus) -> EsmdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic across FFI boundary".into());
            set_error(msg);
            EsmdStatus::Panic
        }
    }
}

fn fallible(f: impl FnOnce() -> Result<(), EsmdError>) -> EsmdStatus {
    guard(|| match f() {
        Ok(()) => EsmdStatus::Ok,
        Err(e) => {
            let status = status_of(&e);
            set_error(e);
            status
        }
    })
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len`); returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes, or be null.
#[no_mangle]
pub unsafe extern "C" fn esmd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(unsafe { std::slice::from_raw_parts(ptr, len) })
    }
}

macro_rules! out_handle {
    ($out:ident, $value:expr) => {{
        if $out.is_null() {
            set_error("null output pointer");
            return EsmdStatus::NullPointer;
        }
        unsafe { *$out = Box::into_raw(Box::new($value)) };
        EsmdStatus::Ok
    }};
}

// ----- design matrices ------------------------------------------------------

/// Builds a design matrix from a row-major `n x d` buffer.
///
/// # Safety
/// `data` must point to `n * d` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_design_new(
    n: usize,
    d: usize,
    data: *const f64,
    out: *mut *mut EsmdDesign,
) -> EsmdStatus {
    guard(|| {
        let Some(data) = (unsafe { slice_arg(data, n.saturating_mul(d)) }) else {
            set_error("null data pointer");
            return EsmdStatus::NullPointer;
        };
        match DesignMatrix::from_rows(n, d, data) {
            Ok(m) => out_handle!(out, EsmdDesign(m)),
            Err(e) => {
                let s = status_of(&e);
                set_error(e);
                s
            }
        }
    })
}

/// Seeded i.i.d. standard Gaussian design.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_design_gaussian(
    n: usize,
    d: usize,
    seed: u64,
    stream_id: u64,
    out: *mut *mut EsmdDesign,
) -> EsmdStatus {
    guard(|| match sample_gaussian_design(n, d, RngStream::new(seed, stream_id)) {
        Ok(m) => out_handle!(out, EsmdDesign(m)),
        Err(e) => {
            let s = status_of(&e);
            set_error(e);
            s
        }
    })
}

/// The explicit block design used by the minimax simulation.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_design_hard(
    n: usize,
    d: usize,
    p: f64,
    out: *mut *mut EsmdDesign,
) -> EsmdStatus {
    guard(|| match esmd::experiments::build_hard_design(n, d, p) {
        Ok(m) => out_handle!(out, EsmdDesign(m)),
        Err(e) => {
            let s = status_of(&e);
            set_error(e);
            s
        }
    })
}

/// Numerical rank (singular values above `1e-10 sigma_max`).
///
/// # Safety
/// `design` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_design_rank(
    design: *const EsmdDesign,
    out: *mut usize,
) -> EsmdStatus {
    guard(|| {
        if design.is_null() || out.is_null() {
            set_error("null pointer");
            return EsmdStatus::NullPointer;
        }
        unsafe { *out = (*design).0.rank() };
        EsmdStatus::Ok
    })
}

/// # Safety
/// `design` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn esmd_design_free(design: *mut EsmdDesign) {
    if !design.is_null() {
        drop(unsafe { Box::from_raw(design) });
    }
}

// ----- convex bodies --------------------------------------------------------

/// Unit l_p ball (`p >= 1`; pass INFINITY for the cube).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_body_lp_ball(
    d: usize,
    p: f64,
    out: *mut *mut EsmdBody,
) -> EsmdStatus {
    guard(|| match ConvexBody::lp_ball(d, p) {
        Ok(b) => out_handle!(out, EsmdBody(b)),
        Err(e) => {
            let s = status_of(&e);
            set_error(e);
            s
        }
    })
}

/// H-polytope `{a : A a <= 1}` from a row-major `m x d` buffer; boundedness
/// is certified at construction.
///
/// # Safety
/// `rows` must point to `m * d` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_body_polytope_h(
    m: usize,
    d: usize,
    rows: *const f64,
    out: *mut *mut EsmdBody,
) -> EsmdStatus {
    guard(|| {
        let Some(rows) = (unsafe { slice_arg(rows, m.saturating_mul(d)) }) else {
            set_error("null rows pointer");
            return EsmdStatus::NullPointer;
        };
        let a = nalgebra::DMatrix::from_row_slice(m, d, rows);
        match ConvexBody::polytope_h(a) {
            Ok(b) => out_handle!(out, EsmdBody(b)),
            Err(e) => {
                let s = status_of(&e);
                set_error(e);
                s
            }
        }
    })
}

/// Minkowski functional (gauge) at `alpha`.
///
/// # Safety
/// `body` live handle, `alpha` readable for `len`, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_body_minkowski(
    body: *const EsmdBody,
    alpha: *const f64,
    len: usize,
    out: *mut f64,
) -> EsmdStatus {
    fallible(|| {
        if body.is_null() || out.is_null() {
            return Err(EsmdError::invalid("null pointer"));
        }
        let alpha = unsafe { slice_arg(alpha, len) }
            .ok_or_else(|| EsmdError::invalid("null alpha pointer"))?;
        let v = unsafe { &(*body).0 }.minkowski(&DVector::from_column_slice(alpha))?;
        unsafe { *out = v };
        Ok(())
    })
}

/// Linear maximization oracle; writes the maximizer into `out_coords`.
///
/// # Safety
/// `body` live handle, `direction` readable and `out_coords` writable for `len`.
#[no_mangle]
pub unsafe extern "C" fn esmd_body_lmo(
    body: *const EsmdBody,
    direction: *const f64,
    len: usize,
    out_coords: *mut f64,
) -> EsmdStatus {
    fallible(|| {
        if body.is_null() || out_coords.is_null() {
            return Err(EsmdError::invalid("null pointer"));
        }
        let dir = unsafe { slice_arg(direction, len) }
            .ok_or_else(|| EsmdError::invalid("null direction pointer"))?;
        let p = unsafe { &(*body).0 }.lmo(&DVector::from_column_slice(dir))?;
        unsafe {
            std::ptr::copy_nonoverlapping(p.coords.as_slice().as_ptr(), out_coords, len);
        }
        Ok(())
    })
}

/// # Safety
/// `body` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn esmd_body_free(body: *mut EsmdBody) {
    if !body.is_null() {
        drop(unsafe { Box::from_raw(body) });
    }
}

// ----- potentials -----------------------------------------------------------

/// Builds a potential from the zoo with its default certified parameters for
/// radius `tau` (the l1-ball rules for the four named kinds).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_potential_new(
    name: EsmdPotentialName,
    d: usize,
    tau: f64,
    out: *mut *mut EsmdPotential,
) -> EsmdStatus {
    guard(|| {
        let made = match name {
            EsmdPotentialName::SquaredL2 => Potential::squared_l2(d),
            EsmdPotentialName::SquaredLp => {
                Potential::make_table1(Table1Name::SquaredLp, d, tau, Table1Overrides::default())
            }
            EsmdPotentialName::HuberMoreau => {
                Potential::make_table1(Table1Name::HuberMoreau, d, tau, Table1Overrides::default())
            }
            EsmdPotentialName::AdjHypentropy => Potential::make_table1(
                Table1Name::AdjHypentropy,
                d,
                tau,
                Table1Overrides::default(),
            ),
            EsmdPotentialName::Sigmoidal => {
                Potential::make_table1(Table1Name::Sigmoidal, d, tau, Table1Overrides::default())
            }
        };
        match made {
            Ok(p) => out_handle!(out, EsmdPotential(p)),
            Err(e) => {
                let s = status_of(&e);
                set_error(e);
                s
            }
        }
    })
}

/// Certified constants; `rho` is 0 when the potential has no discrete-time
/// strong-convexity modulus.
///
/// # Safety
/// `potential` live handle; out pointers writable or null.
#[no_mangle]
pub unsafe extern "C" fn esmd_potential_constants(
    potential: *const EsmdPotential,
    out_c_l: *mut f64,
    out_c_u: *mut f64,
    out_c_a: *mut f64,
    out_rho: *mut f64,
) -> EsmdStatus {
    guard(|| {
        if potential.is_null() {
            set_error("null potential");
            return EsmdStatus::NullPointer;
        }
        let p = unsafe { &(*potential).0 };
        unsafe {
            if !out_c_l.is_null() {
                *out_c_l = p.c_l;
            }
            if !out_c_u.is_null() {
                *out_c_u = p.c_u;
            }
            if !out_c_a.is_null() {
                *out_c_a = p.c_a;
            }
            if !out_rho.is_null() {
                *out_rho = p.rho().unwrap_or(0.0);
            }
        }
        EsmdStatus::Ok
    })
}

/// # Safety
/// `potential` live handle, `alpha` readable for `len`, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_potential_value(
    potential: *const EsmdPotential,
    alpha: *const f64,
    len: usize,
    out: *mut f64,
) -> EsmdStatus {
    fallible(|| {
        if potential.is_null() || out.is_null() {
            return Err(EsmdError::invalid("null pointer"));
        }
        let alpha = unsafe { slice_arg(alpha, len) }
            .ok_or_else(|| EsmdError::invalid("null alpha pointer"))?;
        let v = unsafe { &(*potential).0 }.value(&DVector::from_column_slice(alpha))?;
        unsafe { *out = v };
        Ok(())
    })
}

/// # Safety
/// `potential` live handle; `alpha` readable and `out_grad` writable for `len`.
#[no_mangle]
pub unsafe extern "C" fn esmd_potential_gradient(
    potential: *const EsmdPotential,
    alpha: *const f64,
    len: usize,
    out_grad: *mut f64,
) -> EsmdStatus {
    fallible(|| {
        if potential.is_null() || out_grad.is_null() {
            return Err(EsmdError::invalid("null pointer"));
        }
        let alpha = unsafe { slice_arg(alpha, len) }
            .ok_or_else(|| EsmdError::invalid("null alpha pointer"))?;
        let g = unsafe { &(*potential).0 }.gradient(&DVector::from_column_slice(alpha))?;
        unsafe { std::ptr::copy_nonoverlapping(g.as_slice().as_ptr(), out_grad, len) };
        Ok(())
    })
}

/// Bregman divergence `D_psi(a, b)`.
///
/// # Safety
/// `potential` live handle, `a`/`b` readable for `len`, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_potential_bregman(
    potential: *const EsmdPotential,
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> EsmdStatus {
    fallible(|| {
        if potential.is_null() || out.is_null() {
            return Err(EsmdError::invalid("null pointer"));
        }
        let a = unsafe { slice_arg(a, len) }.ok_or_else(|| EsmdError::invalid("null a"))?;
        let b = unsafe { slice_arg(b, len) }.ok_or_else(|| EsmdError::invalid("null b"))?;
        let v = unsafe { &(*potential).0 }.bregman(
            &DVector::from_column_slice(a),
            &DVector::from_column_slice(b),
        )?;
        unsafe { *out = v };
        Ok(())
    })
}

/// # Safety
/// `potential` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn esmd_potential_free(potential: *mut EsmdPotential) {
    if !potential.is_null() {
        drop(unsafe { Box::from_raw(potential) });
    }
}

// ----- mirror descent -------------------------------------------------------

/// Runs discrete-time mirror descent from zero on `(design, y)` and returns a
/// risk-trace handle. `truth` may be null (in-sample risks then unavailable);
/// `eta <= 0` resolves the theorem step-size rule; the horizon is the theorem
/// stopping time capped at `max_iters`.
///
/// # Safety
/// `design`/`potential` live handles; `y` readable for the design's row
/// count; `truth` null or readable for its column count; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_md_run(
    design: *const EsmdDesign,
    y: *const f64,
    potential: *const EsmdPotential,
    truth: *const f64,
    tau: f64,
    epsilon: f64,
    eta: f64,
    max_iters: u64,
    record_every: u64,
    out: *mut *mut EsmdTrace,
) -> EsmdStatus {
    guard(|| {
        if design.is_null() || potential.is_null() {
            set_error("null handle");
            return EsmdStatus::NullPointer;
        }
        let dm = unsafe { &(*design).0 };
        let Some(y) = (unsafe { slice_arg(y, dm.n()) }) else {
            set_error("null response pointer");
            return EsmdStatus::NullPointer;
        };
        let run = || -> Result<esmd::mirror::RiskTrace, EsmdError> {
            let mut instance =
                RegressionInstance::from_data(dm.clone(), DVector::from_column_slice(y))?;
            if !truth.is_null() {
                let t = unsafe { std::slice::from_raw_parts(truth, dm.d()) };
                instance.ground_truth = Some(DVector::from_column_slice(t));
            }
            let cfg = MdConfig {
                potential: unsafe { &(*potential).0 }.clone(),
                tau,
                epsilon,
                eta: if eta > 0.0 {
                    EtaRule::Fixed(eta)
                } else {
                    EtaRule::Auto
                },
                mode: MdMode::Discrete,
                max_iters: if max_iters == 0 { 1_000_000 } else { max_iters },
                record_every: record_every.max(1),
            };
            md_run(&instance, &cfg)
        };
        match run() {
            Ok(trace) => out_handle!(out, EsmdTrace(trace)),
            Err(e) => {
                let s = status_of(&e);
                set_error(e);
                s
            }
        }
    })
}

/// Number of recorded states.
///
/// # Safety
/// `trace` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn esmd_trace_len(trace: *const EsmdTrace) -> usize {
    if trace.is_null() {
        return 0;
    }
    unsafe { &(*trace).0 }.times.len()
}

/// Reads one recorded state; `out_in_sample` receives NaN when the ground
/// truth was not provided.
///
/// # Safety
/// `trace` live handle; out pointers writable or null.
#[no_mangle]
pub unsafe extern "C" fn esmd_trace_row(
    trace: *const EsmdTrace,
    index: usize,
    out_t: *mut f64,
    out_empirical: *mut f64,
    out_in_sample: *mut f64,
) -> EsmdStatus {
    guard(|| {
        if trace.is_null() {
            set_error("null trace");
            return EsmdStatus::NullPointer;
        }
        let t = unsafe { &(*trace).0 };
        if index >= t.times.len() {
            set_error(format!("index {index} out of range ({})", t.times.len()));
            return EsmdStatus::InvalidArgument;
        }
        unsafe {
            if !out_t.is_null() {
                *out_t = t.times[index];
            }
            if !out_empirical.is_null() {
                *out_empirical = t.empirical_risks[index];
            }
            if !out_in_sample.is_null() {
                *out_in_sample = t
                    .in_sample_risks
                    .as_ref()
                    .map(|v| v[index])
                    .unwrap_or(f64::NAN);
            }
        }
        EsmdStatus::Ok
    })
}

/// Position of the oracle stopping state among the recorded rows.
///
/// # Safety
/// `trace` live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn esmd_trace_oracle_index(
    trace: *const EsmdTrace,
    out: *mut usize,
) -> EsmdStatus {
    guard(|| {
        if trace.is_null() || out.is_null() {
            set_error("null pointer");
            return EsmdStatus::NullPointer;
        }
        match unsafe { &(*trace).0 }.oracle_t_star {
            Some(i) => {
                unsafe { *out = i };
                EsmdStatus::Ok
            }
            None => {
                set_error("trace has no in-sample risks (ground truth unknown)");
                EsmdStatus::InvalidArgument
            }
        }
    })
}

/// # Safety
/// `trace` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn esmd_trace_free(trace: *mut EsmdTrace) {
    if !trace.is_null() {
        drop(unsafe { Box::from_raw(trace) });
    }
}

// ----- constrained least squares and widths ----------------------------------

/// Solves the constrained least squares baseline over `tau K`; writes the
/// minimizer into `out_alpha` (length d) and reports objective / gap /
/// iteration count through the out pointers.
///
/// # Safety
/// Handles live; `y` readable for n; `out_alpha` writable for d; scalar out
/// pointers writable or null.
#[no_mangle]
pub unsafe extern "C" fn esmd_solve_lse(
    design: *const EsmdDesign,
    y: *const f64,
    body: *const EsmdBody,
    tau: f64,
    tol: f64,
    max_iters: usize,
    out_alpha: *mut f64,
    out_objective: *mut f64,
    out_gap: *mut f64,
    out_iterations: *mut usize,
) -> EsmdStatus {
    fallible(|| {
        if design.is_null() || body.is_null() || out_alpha.is_null() {
            return Err(EsmdError::invalid("null pointer"));
        }
        let dm = unsafe { &(*design).0 };
        let y = unsafe { slice_arg(y, dm.n()) }
            .ok_or_else(|| EsmdError::invalid("null response pointer"))?;
        let instance = RegressionInstance::from_data(dm.clone(), DVector::from_column_slice(y))?;
        let opts = esmd::lse::LseOptions {
            tol: (tol > 0.0).then_some(tol),
            max_iters: (max_iters > 0).then_some(max_iters),
            ..Default::default()
        };
        let sol = esmd::lse::solve_lse(&instance, unsafe { &(*body).0 }, tau, &opts)?;
        unsafe {
            std::ptr::copy_nonoverlapping(sol.alpha.as_slice().as_ptr(), out_alpha, dm.d());
            if !out_objective.is_null() {
                *out_objective = sol.objective;
            }
            if !out_gap.is_null() {
                *out_gap = sol.fw_gap;
            }
            if !out_iterations.is_null() {
                *out_iterations = sol.iterations;
            }
        }
        Ok(())
    })
}

/// Monte Carlo Gaussian width of `X tau K`.
///
/// # Safety
/// Handles live; out pointers writable or null.
#[no_mangle]
pub unsafe extern "C" fn esmd_gaussian_width(
    design: *const EsmdDesign,
    body: *const EsmdBody,
    tau: f64,
    n_samples: usize,
    seed: u64,
    stream_id: u64,
    out_mean: *mut f64,
    out_std_error: *mut f64,
) -> EsmdStatus {
    fallible(|| {
        if design.is_null() || body.is_null() {
            return Err(EsmdError::invalid("null pointer"));
        }
        let est = esmd::width::gaussian_width_mc(
            unsafe { &(*design).0 },
            unsafe { &(*body).0 },
            tau,
            n_samples,
            RngStream::new(seed, stream_id),
        )?;
        unsafe {
            if !out_mean.is_null() {
                *out_mean = est.mean;
            }
            if !out_std_error.is_null() {
                *out_std_error = est.std_error;
            }
        }
        Ok(())
    })
}

/// Critical radius of `(X tau K - X alpha*)` with its certified bracket.
///
/// # Safety
/// Handles live; `alpha_star` readable for d; out pointers writable or null.
#[no_mangle]
pub unsafe extern "C" fn esmd_critical_radius(
    design: *const EsmdDesign,
    body: *const EsmdBody,
    tau: f64,
    alpha_star: *const f64,
    tol: f64,
    n_samples: usize,
    seed: u64,
    stream_id: u64,
    out_r_star: *mut f64,
    out_bracket_lo: *mut f64,
    out_bracket_hi: *mut f64,
) -> EsmdStatus {
    fallible(|| {
        if design.is_null() || body.is_null() {
            return Err(EsmdError::invalid("null pointer"));
        }
        let dm = unsafe { &(*design).0 };
        let a = unsafe { slice_arg(alpha_star, dm.d()) }
            .ok_or_else(|| EsmdError::invalid("null alpha_star pointer"))?;
        let cr = esmd::width::critical_radius(
            dm,
            unsafe { &(*body).0 },
            tau,
            &DVector::from_column_slice(a),
            tol,
            n_samples,
            RngStream::new(seed, stream_id),
        )?;
        unsafe {
            if !out_r_star.is_null() {
                *out_r_star = cr.r_star;
            }
            if !out_bracket_lo.is_null() {
                *out_bracket_lo = cr.bracket.0;
            }
            if !out_bracket_hi.is_null() {
                *out_bracket_hi = cr.bracket.1;
            }
        }
        Ok(())
    })
}
