use num_complex::Complex64;
use proptest::prelude::*;
use qrotor::dynamics::{build_generator, solve_model};
use qrotor::gme::ohmic_rates;
use qrotor::linalg::{self, CMat};
use qrotor::liouvillian::ModelKind;
use qrotor::operators::{partial_trace, rotor_populations, Subsystem};
use qrotor::rectify::{rectification_ratio, swap_temperatures};
use qrotor::thermo::thermo_report;
use qrotor::{build_hamiltonians, gibbs_state, Params};

fn small(p: Params) -> Params {
    Params {
        l_min: -3,
        l_max: 3,
        ..p
    }
}

fn params_strategy() -> impl Strategy<Value = Params> {
    (
        2.0..6.0f64,
        1.0..3.0f64,
        0.01..0.3f64,
        0.2..1.5f64,
        -0.9..0.9f64,
        0.05..0.8f64,
        0.0..1e-3f64,
    )
        .prop_map(|(b1, b2, lambda, g, chi, ratio, gamma)| {
            small(Params {
                b1,
                b2,
                lambda,
                g,
                chi,
                gamma,
                beta2: 0.1 * ratio,
                ..Params::fig2(0.5)
            })
        })
}

fn random_state(n: usize, seed: &[f64]) -> CMat {
    let a = CMat::from_fn(n, n, |i, j| {
        let k = (i * n + j) % seed.len();
        Complex64::new(seed[k] * (1.0 + i as f64).sin(), seed[(k + 1) % seed.len()] * (j as f64).cos())
    });
    let rho = &a * a.adjoint() + CMat::identity(n, n).scale(1e-3);
    let tr = linalg::trace(&rho);
    rho / tr
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generators_preserve_trace_and_hermiticity(
        p in params_strategy(),
        seed in prop::collection::vec(-1.0..1.0f64, 7),
        global in any::<bool>(),
    ) {
        let model = if global { ModelKind::Global } else { ModelKind::Local };
        let g = build_generator(&p, model).unwrap();
        prop_assert!(g.total.trace_defect() < 1e-10);
        let rho = random_state(p.space().unwrap().dim(), &seed);
        let d = g.total.apply(&rho);
        prop_assert!(linalg::trace(&d).norm() < 1e-10);
        prop_assert!(linalg::hermiticity_defect(&d) < 1e-10);
    }

    #[test]
    fn first_law_holds_at_any_state(
        p in params_strategy(),
        seed in prop::collection::vec(-1.0..1.0f64, 5),
    ) {
        let g = build_generator(&p, ModelKind::Local).unwrap();
        let rho = random_state(p.space().unwrap().dim(), &seed);
        let r = thermo_report(&rho, &g, &p).unwrap();
        let scale = [r.q1, r.q2, r.qr, r.w_q, r.w_r, r.u_dot]
            .iter()
            .fold(1e-300f64, |m, x| m.max(x.abs()));
        prop_assert!(r.first_law_residual.abs() / scale < 1e-9);
    }

    #[test]
    fn steady_states_are_physical(p in params_strategy(), global in any::<bool>()) {
        let model = if global { ModelKind::Global } else { ModelKind::Local };
        let (_, ss) = solve_model(&p, model).unwrap();
        prop_assert!((linalg::trace(&ss.rho).re - 1.0).abs() < 1e-10);
        prop_assert!(linalg::hermiticity_defect(&ss.rho) < 1e-10);
        let min = linalg::eigvalsh(&ss.rho).into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!(min > -1e-8);
        let pops = rotor_populations(&ss.rho, p.space().unwrap());
        prop_assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ohmic_rates_obey_detailed_balance(
        w in 0.01..20.0f64,
        g in 0.1..2.0f64,
        beta in 0.01..2.0f64,
        cutoff in 0.5..30.0f64,
    ) {
        let (heat, cool) = ohmic_rates(w, g, beta, cutoff);
        prop_assert!(heat > 0.0 && cool > heat);
        prop_assert!((heat / cool - (-beta * w).exp()).abs() < 1e-12);
        let (heat_neg, cool_neg) = ohmic_rates(-w, g, beta, cutoff);
        prop_assert!((heat_neg - cool).abs() <= 1e-12 * cool);
        prop_assert!((cool_neg - heat).abs() <= 1e-12 * cool);
    }

    #[test]
    fn rectification_ratio_is_bounded_for_same_sign(f in 1e-6..10.0f64, s in 1e-6..10.0f64) {
        let (r, _) = rectification_ratio(f, s);
        prop_assert!((0.0..1.0).contains(&r));
        prop_assert_eq!(r, rectification_ratio(s, f).0);
    }
}

#[test]
fn global_model_thermalizes_at_equal_temperatures() {
    let p = Params {
        beta2: 0.1,
        gamma: 0.0,
        ..small(Params::fig4(0.5))
    };
    let space = p.space().unwrap();
    let (_, ss) = solve_model(&p, ModelKind::Global).unwrap();
    let h = build_hamiltonians(&p, space);
    let gibbs = gibbs_state(&h.hs, p.beta1).unwrap().to_dense();
    assert!(linalg::trace_distance(&ss.rho, &gibbs) < 1e-8);
}

#[test]
fn decoupled_qubits_reach_their_own_temperatures() {
    let p = Params {
        lambda: 0.0,
        ..small(Params::fig2(0.4))
    };
    let space = p.space().unwrap();
    let (_, ss) = solve_model(&p, ModelKind::Local).unwrap();
    for (keep, b, beta) in [(Subsystem::Qubit1, p.b1, p.beta1), (Subsystem::Qubit2, p.b2, p.beta2)] {
        let red = partial_trace(&ss.rho, space, &[keep]).unwrap();
        let excited = red.matrix[(1, 1)].re;
        let expected = 1.0 / (1.0 + (2.0 * b * beta).exp());
        assert!((excited - expected).abs() < 1e-9, "{keep:?}: {excited} vs {expected}");
    }
}

#[test]
fn swapping_twice_is_identity() {
    let p = Params::fig4(0.3);
    assert_eq!(swap_temperatures(&swap_temperatures(&p)), p);
}

#[test]
fn symmetric_device_mirrors_under_bath_swap() {
    let p = Params {
        b2: 4.0,
        chi: 0.0,
        ..small(Params::fig4(0.5))
    };
    let q = |p: &Params| {
        let (g, ss) = solve_model(p, ModelKind::Global).unwrap();
        thermo_report(&ss.rho, &g, p).unwrap()
    };
    let fwd = q(&p);
    let swp = q(&swap_temperatures(&p));
    assert!((fwd.q2 - swp.q1).abs() < 1e-8 * fwd.q2.abs());
    assert!((fwd.q1 - swp.q2).abs() < 1e-8 * fwd.q1.abs());
}
