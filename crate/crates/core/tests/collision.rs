use num_complex::Complex64;
use qrotor::collision::{lme_oracle, run_collisions, CollisionConfig};
use qrotor::linalg::{self, CMat};
use qrotor::model::product_gibbs;
use qrotor::Params;

fn reduced(p: Params) -> Params {
    Params {
        l_min: -2,
        l_max: 3,
        ..p
    }
}

#[test]
fn collision_model_converges_to_local_equation() {
    let p = reduced(Params::fig2(0.5));
    let s = p.space().unwrap();
    let mut rho0 = CMat::zeros(s.dim(), s.dim());
    let i = s.index(0, 1, 0);
    rho0[(i, i)] = Complex64::new(1.0, 0.0);
    let r = lme_oracle(&p, &rho0, &[0.1, 0.05], 0.1, 1.0).unwrap();
    assert!(r.errors[1] < r.errors[0], "{:?}", r.errors);
    assert!((0.8..1.3).contains(&r.fitted_order), "order {}", r.fitted_order);
    assert!(r.rate_rel_errors.iter().all(|&e| e < 0.05), "{:?}", r.rate_rel_errors);
    assert!(r.max_trace_drift < 1e-10);
}

#[test]
fn collisions_keep_states_physical_and_conserve_energy() {
    let p = reduced(Params::fig2(0.3));
    let s = p.space().unwrap();
    let rho0 = product_gibbs(&p, s);
    let cfg = CollisionConfig::adaptive(&p, 0.05, 40);
    let tr = run_collisions(&rho0, &cfg, &p).unwrap();
    assert_eq!(tr.states.len(), 41);
    assert!(tr.max_energy_audit < 1e-9);
    for rho in &tr.states {
        assert!((linalg::trace(rho).re - 1.0).abs() < 1e-10);
        assert!(linalg::hermiticity_defect(rho) < 1e-10);
        let min = linalg::eigvalsh(rho).into_iter().fold(f64::INFINITY, f64::min);
        assert!(min > -1e-10);
    }
}
