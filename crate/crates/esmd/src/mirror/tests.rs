use super::*;
use crate::bodies::ConvexBody;
use crate::model::{sample_gaussian_design, sample_instance, DesignMatrix};
use crate::potentials::{Table1Name, Table1Overrides};
use crate::rng::RngStream;
use nalgebra::{dvector, DMatrix};

fn random_instance(n: usize, d: usize, seed: u64) -> RegressionInstance {
    let stream = RngStream::new(seed, 0);
    let x = sample_gaussian_design(n, d, stream.substream(0)).unwrap();
    let truth = stream.substream(1).normal_vector(d);
    sample_instance(&x, &truth, stream.substream(2)).unwrap()
}

#[test]
fn md_with_squared_l2_is_gradient_descent_at_half_rate() {
    let psi = Potential::squared_l2(8).unwrap();
    for seed in 0..5 {
        let inst = random_instance(12, 8, 100 + seed);
        let eta = 0.05;
        let mut md = DVector::zeros(8);
        let mut gd = DVector::zeros(8);
        for _ in 0..100 {
            let g_md = crate::model::empirical_risk_gradient(&inst, &md).unwrap();
            md = md_step_discrete(&psi, &md, &g_md, eta).unwrap();
            let g_gd = crate::model::empirical_risk_gradient(&inst, &gd).unwrap();
            gd -= g_gd * (eta / 2.0);
            assert!((&md - &gd).norm() <= 1e-10, "iterates diverged");
        }
    }
}

#[test]
fn zero_gradient_is_a_fixed_point() {
    let psi =
        Potential::make_table1(Table1Name::HuberMoreau, 4, 1.0, Table1Overrides::default())
            .unwrap();
    let alpha = dvector![0.3, -0.2, 0.0, 0.9];
    let next = md_step_discrete(&psi, &alpha, &DVector::zeros(4), 0.1).unwrap();
    assert!((next - &alpha).norm() <= 1e-10);
}

#[test]
fn mirror_and_proximal_steps_agree() {
    let stream = RngStream::new(55, 0);
    let d = 5;
    let kinds: Vec<Potential> = vec![
        Potential::squared_l2(d).unwrap(),
        Potential::make_table1(Table1Name::SquaredLp, d, 1.0, Table1Overrides::default()).unwrap(),
        Potential::make_table1(Table1Name::HuberMoreau, d, 1.0, Table1Overrides::default())
            .unwrap(),
        Potential::make_table1(Table1Name::AdjHypentropy, d, 1.0, Table1Overrides::default())
            .unwrap(),
    ];
    for (k, psi) in kinds.iter().enumerate() {
        for i in 0..10 {
            let alpha = stream.substream((k * 100 + i) as u64).normal_vector(d) * 0.5;
            let grad = stream.substream((k * 100 + 50 + i) as u64).normal_vector(d);
            let eta = 0.1;
            let a = md_step_discrete(psi, &alpha, &grad, eta).unwrap();
            let b = proximal_step(psi, &alpha, &grad, eta).unwrap();
            assert!(
                (&a - &b).norm() <= 1e-6,
                "kind {k} draw {i}: |mirror - proximal| = {:.3e}",
                (&a - &b).norm()
            );
        }
    }
}

#[test]
fn proximal_step_shrinks_with_eta() {
    let psi = Potential::make_table1(Table1Name::HuberMoreau, 4, 1.0, Table1Overrides::default())
        .unwrap();
    let alpha = dvector![0.2, -0.4, 0.1, 0.0];
    let grad = dvector![1.0, 0.5, -2.0, 0.3];
    let mut last = f64::INFINITY;
    for eta in [1e-2, 1e-3, 1e-4] {
        let step = proximal_step(&psi, &alpha, &grad, eta).unwrap();
        let moved = (step - &alpha).norm();
        assert!(moved < last);
        last = moved;
    }
}

#[test]
fn md_run_noiseless_converges_monotonically() {
    let stream = RngStream::new(7, 0);
    let x = sample_gaussian_design(10, 6, stream.substream(0)).unwrap();
    let truth = stream.substream(1).normal_vector(6) * 0.1;
    let y = x.mul(&truth);
    let mut inst = RegressionInstance::from_data(x, y).unwrap();
    inst.ground_truth = Some(truth);
    let mut cfg = MdConfig::discrete(Potential::squared_l2(6).unwrap(), 1.0, 1e-9);
    cfg.max_iters = 20_000;
    let trace = md_run(&inst, &cfg).unwrap();
    for w in trace.empirical_risks.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "risk increased");
    }
    assert!(*trace.empirical_risks.last().unwrap() <= 1e-8);
}

#[test]
fn md_run_stationary_at_zero_truth() {
    let x = DesignMatrix::new(DMatrix::identity(4, 4)).unwrap();
    let mut inst = RegressionInstance::from_data(x, DVector::zeros(4)).unwrap();
    inst.ground_truth = Some(DVector::zeros(4));
    let mut cfg = MdConfig::discrete(Potential::squared_l2(4).unwrap(), 1.0, 0.1);
    cfg.eta = EtaRule::Fixed(0.1);
    cfg.max_iters = 50;
    let trace = md_run(&inst, &cfg).unwrap();
    assert!(trace.final_iterate.norm() == 0.0);
    assert!(trace.empirical_risks.iter().all(|&r| r == 0.0));
}

#[test]
fn divergence_is_detected() {
    let inst = random_instance(6, 4, 3);
    let mut cfg = MdConfig::discrete(Potential::squared_l2(4).unwrap(), 1.0, 1e-6);
    cfg.eta = EtaRule::Fixed(50.0);
    cfg.max_iters = 100_000;
    match md_run(&inst, &cfg) {
        Err(EsmdError::Divergence { .. }) => {}
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn stopping_horizon_examples() {
    assert_eq!(
        stopping_horizon(1.0, 1.0, 0.1, 0.05, true).unwrap(),
        Horizon::Discrete(400)
    );
    assert_eq!(
        stopping_horizon(1.0, 1.0, 0.5, 1.0, false).unwrap(),
        Horizon::Continuous(2.0)
    );
    let t1 = stopping_horizon(1.0, 1.0, 0.1, 0.05, true).unwrap();
    let t2 = stopping_horizon(1.0, 1.0, 0.2, 0.05, true).unwrap();
    match (t1, t2) {
        (Horizon::Discrete(a), Horizon::Discrete(b)) => assert_eq!(a, 2 * b),
        _ => unreachable!(),
    }
}

#[test]
fn step_size_bound_examples() {
    let mut psi = Potential::squared_l2(3).unwrap();
    if let Some(s) = &mut psi.strong {
        s.rho = 2.0;
    }
    assert!((step_size_bound(&psi, 4.0, 10.0).unwrap() - 0.5).abs() < 1e-15);
    assert!((step_size_bound(&psi, 0.1, 0.2).unwrap() - 0.1).abs() < 1e-15);
    let b1 = step_size_bound(&psi, 1.0, 100.0).unwrap();
    let b2 = step_size_bound(&psi, 2.0, 100.0).unwrap();
    assert!((b1 - 2.0 * b2).abs() < 1e-15);
    let sig = Potential::make_table1(Table1Name::Sigmoidal, 3, 1.0, Table1Overrides::default())
        .unwrap();
    assert!(step_size_bound(&sig, 1.0, 1.0).is_err());
}

#[test]
fn oracle_stop_examples() {
    let mk = |risks: Vec<f64>| RiskTrace {
        iterate_indices: (0..risks.len() as u64).collect(),
        times: (0..risks.len()).map(|i| i as f64).collect(),
        empirical_risks: vec![0.0; risks.len()],
        in_sample_risks: Some(risks),
        bregman_to_truth: None,
        final_iterate: DVector::zeros(1),
        horizon: Horizon::Discrete(10),
        resolved_eta: None,
        dt: None,
        oracle_t_star: None,
        proof_horizon_bound: None,
    };
    assert_eq!(oracle_stop(&mk(vec![5.0, 4.0, 3.0, 2.0])).unwrap(), 3);
    assert_eq!(oracle_stop(&mk(vec![1.0, 0.4, 0.2, 0.3, 0.6])).unwrap(), 2);
    assert_eq!(oracle_stop(&mk(vec![1.0, 1.0, 1.0])).unwrap(), 0);
    let mut t = mk(vec![1.0]);
    t.in_sample_risks = None;
    assert!(oracle_stop(&t).is_err());
}

#[test]
fn offset_gap_at_truth_is_minus_epsilon() {
    let inst = random_instance(6, 4, 9);
    let truth = inst.ground_truth.clone().unwrap();
    let gap = offset_condition_gap(&inst, &truth, &truth, 0.3).unwrap();
    assert!((gap + 0.3).abs() < 1e-12);
}

#[test]
fn continuous_matches_exact_gradient_flow() {
    // Diagonal design: the flow for psi = |a|_2^2 solves component-wise as
    // exponential decay toward y_i / s_i.
    let s = [2.0, 0.7];
    let x = DesignMatrix::new(DMatrix::from_diagonal(&dvector![s[0], s[1]])).unwrap();
    let y = dvector![1.0, -0.5];
    let inst = RegressionInstance::from_data(x, y.clone()).unwrap();
    let mut cfg = MdConfig::continuous(Potential::squared_l2(2).unwrap(), 1.0, 1.0, 1e-3);
    // eps = 1 gives T = 1.
    cfg.record_every = 1000;
    let trace = md_run(&inst, &cfg).unwrap();
    let t_end = match trace.horizon {
        Horizon::Continuous(t) => t,
        _ => unreachable!(),
    };
    let exact = DVector::from_fn(2, |i, _| {
        let si: f64 = s[i];
        let target = y[i] / si;
        target + (0.0 - target) * (-si * si * t_end / 2.0).exp()
    });
    let err = (&trace.final_iterate - &exact).norm();
    assert!(err <= 1e-5, "RK4 error {err}");
}

#[test]
fn rk4_halving_shrinks_error_fourth_order() {
    let s = [2.0, 0.7];
    let x = DesignMatrix::new(DMatrix::from_diagonal(&dvector![s[0], s[1]])).unwrap();
    let y = dvector![1.0, -0.5];
    let inst = RegressionInstance::from_data(x, y.clone()).unwrap();
    let exact_at = |t: f64| {
        DVector::from_fn(2, |i, _| {
            let si: f64 = s[i];
            let target = y[i] / si;
            target - target * (-si * si * t / 2.0).exp()
        })
    };
    let run = |dt: f64| {
        let mut cfg = MdConfig::continuous(Potential::squared_l2(2).unwrap(), 1.0, 1.0, dt);
        cfg.record_every = 1_000_000;
        md_run(&inst, &cfg).unwrap().final_iterate
    };
    let e1 = (run(0.1) - exact_at(1.0)).norm();
    let e2 = (run(0.05) - exact_at(1.0)).norm();
    let ratio = e1 / e2;
    assert!(
        (8.0..=32.0).contains(&ratio),
        "expected 4th-order ratio, got {ratio} (e1={e1:.3e}, e2={e2:.3e})"
    );
}

#[test]
fn sigmoidal_runs_in_continuous_mode() {
    let stream = RngStream::new(123, 0);
    let x = sample_gaussian_design(10, 10, stream.substream(0)).unwrap();
    let mut truth = DVector::zeros(10);
    truth[0] = 0.3;
    let inst = sample_instance(&x, &truth, stream.substream(1)).unwrap();
    let psi = Potential::make_table1(Table1Name::Sigmoidal, 10, 1.0, Table1Overrides::default())
        .unwrap();
    let mut cfg = MdConfig::continuous(psi, 1.0, 2.0, 1e-3);
    cfg.max_iters = 3000;
    cfg.record_every = 100;
    let trace = md_run(&inst, &cfg).unwrap();
    assert!(trace.empirical_risks.iter().all(|r| r.is_finite()));
    // Discrete mode is rejected by the capability gate.
    let psi = Potential::make_table1(Table1Name::Sigmoidal, 10, 1.0, Table1Overrides::default())
        .unwrap();
    let cfg = MdConfig::discrete(psi, 1.0, 0.5);
    assert!(md_run(&inst, &cfg).is_err());
}

#[test]
fn discrete_md_approaches_continuous_flow_as_eta_vanishes() {
    // Fixed total mirror time S: discrete MD with eta -> 0 approaches the
    // RK4 trajectory at matched times.
    let inst = random_instance(6, 4, 77);
    let psi = || {
        Potential::make_table1(Table1Name::AdjHypentropy, 4, 1.0, Table1Overrides::default())
            .unwrap()
    };
    let s_total = 0.05;
    let mut cfg = MdConfig::continuous(psi(), 1.0, 1.0, 1e-4);
    // Continuous horizon c_u^2 tau^2 / eps = 9 / eps; pick eps so T = s_total.
    cfg.epsilon = 9.0 / s_total;
    cfg.record_every = 1_000_000;
    let reference = md_run(&inst, &cfg).unwrap().final_iterate;

    let mut errs = Vec::new();
    for eta in [5e-4, 2.5e-4, 1.25e-4] {
        let steps = (s_total / eta).round() as usize;
        let p = psi();
        let mut alpha = DVector::zeros(4);
        for _ in 0..steps {
            let g = crate::model::empirical_risk_gradient(&inst, &alpha).unwrap();
            alpha = md_step_discrete(&p, &alpha, &g, eta).unwrap();
        }
        errs.push((alpha - &reference).norm());
    }
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "errors {errs:?}");
}

#[test]
fn traces_are_bitwise_deterministic() {
    let inst = random_instance(10, 8, 42);
    let psi = || {
        Potential::make_table1(Table1Name::HuberMoreau, 8, 1.0, Table1Overrides::default())
            .unwrap()
    };
    let mut cfg = MdConfig::discrete(psi(), 1.0, 0.5);
    cfg.max_iters = 500;
    cfg.record_every = 7;
    let a = md_run(&inst, &cfg).unwrap();
    let b = md_run(&inst, &cfg).unwrap();
    assert_eq!(a.empirical_risks, b.empirical_risks);
    assert_eq!(a.final_iterate, b.final_iterate);
    assert_eq!(a.in_sample_risks, b.in_sample_risks);
    assert_eq!(a.resolved_eta, b.resolved_eta);
}

#[test]
fn iterates_stay_confined_up_to_oracle_stop() {
    // Theorem-rule step size, iterates up to t* satisfy the gauge cap
    // phi_K <= 3 c_a tau (1 + 1e-6), conditioned on R_n(a*) <= 2.
    let n = 10;
    let d = 10;
    let tau = 1.0;
    let body = ConvexBody::lp_ball(d, 1.0).unwrap();
    let names = [
        Table1Name::SquaredLp,
        Table1Name::HuberMoreau,
        Table1Name::AdjHypentropy,
    ];
    for name in names {
        let mut checked = 0;
        for rep in 0..100u64 {
            let stream = RngStream::new(9000 + rep, 0);
            let x = sample_gaussian_design(n, d, stream.substream(0)).unwrap();
            let mut truth = DVector::zeros(d);
            truth[(rep % d as u64) as usize] = tau;
            let inst = sample_instance(&x, &truth, stream.substream(1)).unwrap();
            if crate::model::empirical_risk(&inst, &truth).unwrap() > 2.0 {
                continue;
            }
            let psi = Potential::make_table1(name, d, tau, Table1Overrides::default()).unwrap();
            let cap = 3.0 * psi.c_a * tau * (1.0 + 1e-6);
            let mut cfg = MdConfig::discrete(psi, tau, 1.0);
            cfg.max_iters = 60_000;
            let trace = md_run(&inst, &cfg).unwrap();
            let t_star = trace.oracle_t_star.unwrap();
            // Replay the run to inspect every iterate up to t*.
            let eta = trace.resolved_eta.unwrap();
            let stop_index = trace.iterate_indices[t_star];
            let psi =
                Potential::make_table1(name, d, tau, Table1Overrides::default()).unwrap();
            let mut alpha = DVector::zeros(d);
            for _ in 0..stop_index {
                let g = crate::model::empirical_risk_gradient(&inst, &alpha).unwrap();
                alpha = md_step_discrete(&psi, &alpha, &g, eta).unwrap();
                let gauge = body.minkowski(&alpha).unwrap();
                assert!(
                    gauge <= cap,
                    "{:?} rep {rep}: gauge {gauge} exceeds cap {cap}",
                    name
                );
            }
            checked += 1;
        }
        assert!(checked >= 90, "{:?}: too few replicates checked", name);
    }
}
