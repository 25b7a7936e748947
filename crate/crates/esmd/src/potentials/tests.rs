use super::*;
use crate::bodies::ConvexBody;
use crate::rng::RngStream;
use nalgebra::dvector;

fn fd_gradient(psi: &Potential, alpha: &DVector<f64>) -> DVector<f64> {
    let h = 1e-5 * (1.0 + alpha.norm());
    DVector::from_fn(alpha.len(), |i, _| {
        let mut ap = alpha.clone();
        let mut am = alpha.clone();
        ap[i] += h;
        am[i] -= h;
        (psi.value(&ap).unwrap() - psi.value(&am).unwrap()) / (2.0 * h)
    })
}

fn fd_hessian(psi: &Potential, alpha: &DVector<f64>) -> DMatrix<f64> {
    let h = 1e-5 * (1.0 + alpha.norm());
    let d = alpha.len();
    let mut out = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut ap = alpha.clone();
        let mut am = alpha.clone();
        ap[j] += h;
        am[j] -= h;
        let col = (psi.gradient(&ap).unwrap() - psi.gradient(&am).unwrap()) / (2.0 * h);
        out.set_column(j, &col);
    }
    out
}

fn zoo(d: usize, tau: f64) -> Vec<(String, Potential)> {
    let stream = RngStream::new(2024, 0);
    let b1 = ConvexBody::lp_ball(d, 1.0).unwrap();
    let b2 = ConvexBody::lp_ball(d, 2.0).unwrap();
    let bp = ConvexBody::lp_ball(d, 1.5).unwrap();
    let mut out = vec![
        ("squared_l2".to_string(), Potential::squared_l2(d).unwrap()),
        (
            "squared_lp".to_string(),
            Potential::make_table1(Table1Name::SquaredLp, d, tau, Table1Overrides::default())
                .unwrap(),
        ),
        (
            "huber_moreau".to_string(),
            Potential::make_table1(Table1Name::HuberMoreau, d, tau, Table1Overrides::default())
                .unwrap(),
        ),
        (
            "adj_hypentropy".to_string(),
            Potential::make_table1(Table1Name::AdjHypentropy, d, tau, Table1Overrides::default())
                .unwrap(),
        ),
        (
            "sigmoidal".to_string(),
            Potential::make_table1(Table1Name::Sigmoidal, d, tau, Table1Overrides::default())
                .unwrap(),
        ),
        (
            "smooth_norm".to_string(),
            Potential::make_smooth_norm(&bp, 1.0).unwrap(),
        ),
        (
            "generic_moreau".to_string(),
            Potential::make_lemma32(&b2, 0.1, stream).unwrap(),
        ),
    ];
    if d == 2 {
        let square = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        out.push((
            "logsumexp".to_string(),
            Potential::make_msconvexhull(square, tau, 2.0).unwrap(),
        ));
    }
    let _ = b1;
    out
}

#[test]
fn value_examples() {
    let d = 4;
    let lp = Potential::squared_lp(d, 1.5).unwrap();
    let mut e1 = DVector::zeros(d);
    e1[0] = 1.0;
    assert!((lp.value(&e1).unwrap() - 1.0).abs() < 1e-14);

    let sig = Potential::make_table1(Table1Name::Sigmoidal, d, 1.0, Table1Overrides::default())
        .unwrap();
    let gamma = match sig.kind() {
        PotentialKind::Sigmoidal { gamma } => *gamma,
        _ => unreachable!(),
    };
    let expected = (d as f64 * 2.0 * 2.0_f64.ln() / gamma).powi(2);
    assert!((sig.value(&DVector::zeros(d)).unwrap() - expected).abs() < 1e-12);

    let square = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
    let lse = Potential::make_msconvexhull(square, 1.0, 2.0).unwrap();
    let gamma = match lse.kind() {
        PotentialKind::LogSumExpHull { gamma, .. } => *gamma,
        _ => unreachable!(),
    };
    let expected = (2.0 * 4.0_f64.ln() / gamma).powi(2);
    assert!((lse.value(&DVector::zeros(2)).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn gradient_vanishes_at_origin_for_all_kinds() {
    for d in [2usize, 6] {
        for (name, psi) in zoo(d, 1.0) {
            let g = psi.gradient(&DVector::zeros(d)).unwrap();
            assert!(g.norm() <= 1e-12, "{name}: |grad(0)| = {}", g.norm());
        }
    }
}

#[test]
fn squared_l2_gradient_exact() {
    let psi = Potential::squared_l2(3).unwrap();
    let a = dvector![0.5, -1.0, 2.0];
    assert_eq!(psi.gradient(&a).unwrap(), &a * 2.0);
}

#[test]
fn gradients_match_finite_differences() {
    let d = 6;
    let stream = RngStream::new(77, 0);
    for (name, psi) in zoo(d, 1.0) {
        for i in 0..20 {
            let a = stream.substream(i).normal_vector(d);
            let g = psi.gradient(&a).unwrap();
            let fd = fd_gradient(&psi, &a);
            let rel = (&g - &fd).norm() / (1.0 + g.norm());
            assert!(rel <= 1e-5, "{name} point {i}: rel grad error {rel}");
        }
    }
}

#[test]
fn hessians_match_finite_differences() {
    let d = 5;
    let stream = RngStream::new(78, 0);
    let kinds: Vec<(String, Potential)> = vec![
        ("squared_l2".into(), Potential::squared_l2(d).unwrap()),
        (
            "adj_hypentropy".into(),
            Potential::make_table1(Table1Name::AdjHypentropy, d, 1.0, Table1Overrides::default())
                .unwrap(),
        ),
        (
            "sigmoidal".into(),
            Potential::make_table1(Table1Name::Sigmoidal, d, 1.0, Table1Overrides::default())
                .unwrap(),
        ),
    ];
    for (name, psi) in kinds {
        for i in 0..20 {
            let a = stream.substream(i).normal_vector(d) * 0.3;
            let h = psi.hessian(&a).unwrap();
            assert!((h.clone() - h.transpose()).norm() < 1e-10);
            let fd = fd_hessian(&psi, &a);
            let rel = (&h - &fd).norm() / (1.0 + h.norm());
            assert!(rel <= 1e-4, "{name} point {i}: rel hessian error {rel}");
        }
    }
    let square = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
    let lse = Potential::make_msconvexhull(square, 1.0, 2.0).unwrap();
    for i in 0..20 {
        let a = stream.substream(100 + i).normal_vector(2) * 0.5;
        let h = lse.hessian(&a).unwrap();
        let fd = fd_hessian(&lse, &a);
        let rel = (&h - &fd).norm() / (1.0 + h.norm());
        assert!(rel <= 1e-4, "logsumexp point {i}: rel hessian error {rel}");
    }
}

#[test]
fn squared_l2_hessian_exact_and_unsupported_kinds_error() {
    let psi = Potential::squared_l2(3).unwrap();
    let h = psi.hessian(&dvector![1.0, 2.0, 3.0]).unwrap();
    assert_eq!(h, DMatrix::identity(3, 3) * 2.0);
    let huber =
        Potential::make_table1(Table1Name::HuberMoreau, 3, 1.0, Table1Overrides::default())
            .unwrap();
    assert!(huber.hessian(&dvector![0.0, 0.0, 0.0]).is_err());
}

#[test]
fn logsumexp_hessian_eigenvalues_respect_rho() {
    let square = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
    let lse = Potential::make_msconvexhull(square, 1.0, 2.0).unwrap();
    let rho = lse.rho().unwrap();
    let stream = RngStream::new(80, 0);
    for i in 0..1000 {
        let a = stream.substream(i).normal_vector(2);
        let h = lse.hessian(&a).unwrap();
        let eig = h.symmetric_eigen();
        let min = eig.eigenvalues.min();
        assert!(min >= rho - 1e-8, "eigenvalue {min} below rho {rho}");
    }
}

#[test]
fn inverse_gradient_round_trip_all_kinds() {
    let d = 6;
    let stream = RngStream::new(79, 0);
    for (name, psi) in zoo(d, 1.0) {
        for i in 0..20 {
            let a = stream.substream(i).normal_vector(d);
            let z = psi.gradient(&a).unwrap();
            let back = psi.inverse_gradient(&z).unwrap();
            let err = (&back - &a).norm();
            assert!(err <= 1e-6, "{name} point {i}: round-trip error {err:.3e}");
            let z_back = psi.gradient(&back).unwrap();
            assert!(
                (&z_back - &z).norm() <= 1e-8 * (1.0 + z.norm()),
                "{name}: inverse postcondition violated"
            );
        }
    }
}

#[test]
fn inverse_examples() {
    let psi = Potential::squared_l2(3).unwrap();
    let z = dvector![2.0, -4.0, 6.0];
    assert_eq!(psi.inverse_gradient(&z).unwrap(), z / 2.0);

    let lp = Potential::squared_lp(3, 1.5).unwrap();
    let e1 = dvector![1.0, 0.0, 0.0];
    let z = lp.gradient(&e1).unwrap();
    let back = lp.inverse_gradient(&z).unwrap();
    assert!((back - e1).norm() <= 1e-8);
}

#[test]
fn bregman_basics_and_huber_strong_convexity() {
    let stream = RngStream::new(81, 0);
    for (name, psi) in zoo(4, 1.0) {
        let a = stream.substream(1).normal_vector(4);
        assert!(psi.bregman(&a, &a).unwrap().abs() <= 1e-12, "{name}");
    }
    let l2 = Potential::squared_l2(4).unwrap();
    let a = stream.substream(2).normal_vector(4);
    let b = stream.substream(3).normal_vector(4);
    assert!((l2.bregman(&a, &b).unwrap() - (&a - &b).norm_squared()).abs() < 1e-12);

    let huber =
        Potential::make_table1(Table1Name::HuberMoreau, 4, 1.0, Table1Overrides::default())
            .unwrap();
    for i in 0..1000 {
        let a = stream.substream(100 + i).normal_vector(4);
        let b = stream.substream(10_000 + i).normal_vector(4);
        let lhs = huber.bregman(&a, &b).unwrap();
        assert!(lhs >= (&a - &b).norm_squared() - 1e-8);
        assert!(lhs >= -1e-10);
    }
}

#[test]
fn table1_defaults_match_rules() {
    // p = 1 + 1/log d: at d = 55 this is ~1.25 and rho ~ 0.5.
    let lp = Potential::make_table1(Table1Name::SquaredLp, 55, 1.0, Table1Overrides::default())
        .unwrap();
    match lp.kind() {
        PotentialKind::SquaredLp { p } => {
            assert!((p - 1.2496).abs() < 1e-3, "p = {p}");
        }
        _ => unreachable!(),
    }
    assert!((lp.rho().unwrap() - 0.4992).abs() < 2e-3);
    assert_eq!(lp.c_l, std::f64::consts::E);

    let huber =
        Potential::make_table1(Table1Name::HuberMoreau, 10, 1.0, Table1Overrides::default())
            .unwrap();
    match huber.kind() {
        PotentialKind::HuberMoreau { lambda, rho } => {
            assert!((lambda - 0.2).abs() < 1e-15);
            assert_eq!(*rho, 2.0);
        }
        _ => unreachable!(),
    }
    assert!((huber.c_a - 5.0_f64.sqrt()).abs() < 1e-15);

    let sig = Potential::make_table1(Table1Name::Sigmoidal, 10, 1.0, Table1Overrides::default())
        .unwrap();
    match sig.kind() {
        PotentialKind::Sigmoidal { gamma } => {
            assert!((gamma - 10.0 * 4.0_f64.ln()).abs() < 1e-12);
        }
        _ => unreachable!(),
    }
    assert!(!sig.caps.discrete_ok);
    assert!(sig.caps.continuous_ok);
    assert!((sig.c_a - 2.0).abs() < 1e-15);

    assert!(Potential::make_table1(Table1Name::SquaredLp, 1, 1.0, Table1Overrides::default())
        .is_err());
}

#[test]
fn hypentropy_constants_track_gamma() {
    let hyp =
        Potential::make_table1(Table1Name::AdjHypentropy, 8, 1.0, Table1Overrides::default())
            .unwrap();
    let gamma = match hyp.kind() {
        PotentialKind::AdjHypentropy { gamma } => *gamma,
        _ => unreachable!(),
    };
    let bound = (1.0 / (8.0_f64).sinh())
        .min(0.25)
        .min(std::f64::consts::FRAC_1_SQRT_2);
    assert!((gamma - bound).abs() < 1e-15);
    let rho = hyp.rho().unwrap();
    assert!((rho - (1.0 / gamma).asinh().powi(-2)).abs() < 1e-15);
    assert!(rho <= (1.0 / 8.0_f64).powi(2) + 1e-12, "rho <= (tau/d)^2");
}

#[test]
fn assumption_checker_passes_table1_and_catches_bad_constants() {
    let d = 8;
    let b1 = ConvexBody::lp_ball(d, 1.0).unwrap();
    let stream = RngStream::new(90, 0);
    for name in [
        Table1Name::SquaredLp,
        Table1Name::HuberMoreau,
        Table1Name::AdjHypentropy,
        Table1Name::Sigmoidal,
    ] {
        let psi = Potential::make_table1(name, d, 1.0, Table1Overrides::default()).unwrap();
        let rep = check_assumption(&psi, &b1, 1.0, 1000, stream).unwrap();
        assert!(rep.passed, "{:?}: {rep:?}", name);
    }

    // Deliberately wrong c_l on the squared lp potential is caught.
    let mut bad =
        Potential::make_table1(Table1Name::SquaredLp, d, 1.0, Table1Overrides::default()).unwrap();
    bad.c_l = 0.5;
    bad.c_a = bad.c_l * bad.c_u;
    let rep = check_assumption(&bad, &b1, 1.0, 1000, stream).unwrap();
    assert!(rep.lower_bound_violations > 0);
    assert!(!rep.passed);

    // Hypentropy with gamma far above its bound violates the upper bound.
    let loose = Potential {
        kind: PotentialKind::AdjHypentropy { gamma: 1.0 },
        dim: d,
        c_l: 1.0,
        c_u: 3.0,
        c_a: 3.0,
        strong: Some(StrongConvexity {
            rho: (1.0_f64).asinh().powi(-2),
            norm: NormTag::L2,
        }),
        caps: Caps {
            continuous_ok: true,
            discrete_ok: true,
            has_closed_inverse: false,
        },
    };
    let rep = check_assumption(&loose, &b1, 1.0, 1000, stream).unwrap();
    assert!(rep.upper_bound_violations > 0);

    // psi = phi^2 exactly: squared l2 on the l2 ball with c_l = c_u = 1.
    let b2 = ConvexBody::lp_ball(d, 2.0).unwrap();
    let l2 = Potential::squared_l2(d).unwrap();
    let rep = check_assumption(&l2, &b2, 1.0, 1000, stream).unwrap();
    assert!(rep.passed);
}

#[test]
fn lemma32_round_trip_on_l2_ball() {
    let b2 = ConvexBody::lp_ball(3, 2.0).unwrap();
    let stream = RngStream::new(91, 0);
    let psi = Potential::make_lemma32(&b2, 0.1, stream).unwrap();
    assert!((psi.c_a - 4.0).abs() < 1e-15);
    let rep = check_assumption(&psi, &b2, 1.0, 500, stream.substream(1)).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn msconvexhull_sandwich_and_checker() {
    let square = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
    let body = ConvexBody::polytope_h(square.clone()).unwrap();
    let psi = Potential::make_msconvexhull(square.clone(), 1.0, 2.0).unwrap();
    let gamma = match psi.kind() {
        PotentialKind::LogSumExpHull { gamma, .. } => *gamma,
        _ => unreachable!(),
    };
    let cap = 2.0 * 4.0_f64.ln() / gamma;
    let stream = RngStream::new(92, 0);
    for i in 0..500 {
        let x = stream.substream(i).normal_vector(2) * 2.0;
        let phi = body.minkowski(&x).unwrap();
        let (s, _) = logsumexp::smoothed_gauge(&square, gamma, &x);
        assert!(s >= phi - 1e-10);
        assert!(s <= phi + cap + 1e-10);
        assert!(phi <= psi.value(&x).unwrap().sqrt() + 1e-10);
    }
    let rep = check_assumption(&psi, &body, 1.0, 1000, stream).unwrap();
    assert!(rep.passed, "{rep:?}");
    // m < d + 1 is rejected.
    assert!(Potential::make_msconvexhull(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
        1.0,
        1.0
    )
    .is_err());
}

#[test]
fn smooth_norm_examples_and_checker() {
    let b2 = ConvexBody::lp_ball(3, 2.0).unwrap();
    let psi = Potential::make_smooth_norm(&b2, 1.0).unwrap();
    let a = dvector![0.5, -0.25, 1.0];
    assert!((psi.value(&a).unwrap() - 2.0 * a.norm_squared()).abs() < 1e-12);
    assert!((psi.gradient(&a).unwrap() - &a * 4.0).norm() < 1e-12);
    assert_eq!(psi.rho().unwrap(), 2.0);

    let bp = ConvexBody::lp_ball(4, 1.5).unwrap();
    let psi = Potential::make_smooth_norm(&bp, 1.0).unwrap();
    assert_eq!(psi.rho().unwrap(), 2.0);
    let stream = RngStream::new(93, 0);
    // |.|_2 <= |.|_p for p <= 2, so c_k = 1 is an admissible constant.
    for i in 0..200 {
        let x = stream.substream(i).normal_vector(4);
        assert!(x.norm() <= crate::model::lp_norm(&x, 1.5) + 1e-12);
    }
    let rep = check_assumption(&psi, &bp, 1.0, 1000, stream).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!((psi.c_u - 2.0_f64.sqrt()).abs() < 1e-15);

    let b1 = ConvexBody::lp_ball(3, 1.0).unwrap();
    assert!(Potential::make_smooth_norm(&b1, 1.0).is_err());
}

#[test]
fn strong_convexity_holds_on_sampled_pairs() {
    // Bregman >= (rho/2) |a-b|^2 in the reference norm for discrete kinds.
    let d = 6;
    let stream = RngStream::new(94, 0);
    for (name, psi) in zoo(d, 1.0) {
        if !psi.caps.discrete_ok {
            continue;
        }
        let sc = psi.strong.unwrap();
        for i in 0..1000 {
            let a = stream.substream(i).normal_vector(d) * 1.5;
            let b = stream.substream(50_000 + i).normal_vector(d) * 1.5;
            let lhs = psi.bregman(&a, &b).unwrap();
            let dist = sc.norm.eval(&(&a - &b));
            assert!(
                lhs >= 0.5 * sc.rho * dist * dist - 1e-8,
                "{name} pair {i}: {lhs} < {}",
                0.5 * sc.rho * dist * dist
            );
        }
    }
}
