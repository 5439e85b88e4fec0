use super::*;
use crate::grid::{random_admissible, DomainSpec, FieldTexture};
use crate::operators::spectrum::stokes_eigenpairs;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn domain() -> DomainSpec {
    DomainSpec::new(1, 1.0, 0.125).unwrap()
}

fn params(mu: f64, alpha: f64, beta: f64, r: f64, advection: AdvectionForm) -> PhysicsParams {
    PhysicsParams { mu, alpha, beta, r, advection }
}

fn system(p: PhysicsParams, f_amp: f64, sigma: f64) -> System {
    let d = domain();
    let ws = OperatorWorkspace::new(d);
    let f = VelocityField::from_stream_fn(d, |x, y| {
        f_amp * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin().powi(2)
    });
    let g = VelocityField::from_stream_fn(d, |x, y| (1.0 - x * x).powi(2) * (std::f64::consts::PI * y).sin().powi(2));
    let noise = NoiseSpec::scalar(g, sigma, 0.7).unwrap();
    System::new(ws, p, &f, &noise).unwrap()
}

fn field(seed: u64, scale: f64) -> VelocityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_admissible(&domain(), &mut rng, FieldTexture::Smooth).scaled(scale)
}

fn path(seed: u64, t0: f64, t1: f64, dt: f64) -> OuPath {
    OuPath::generate(seed, &[0.7], t0, t1, dt, true).unwrap()
}

#[test]
fn zero_data_gives_zero_record() {
    let sys = system(params(1.0, 0.5, 1.0, 3.0, AdvectionForm::SkewSymmetric), 0.0, 0.0);
    let v0 = VelocityField::zeros(domain());
    let opts = RecordOptions { energy_ledger: true, v_ledger: true, tail_radius: Some(0.5), snapshot_times: vec![0.1] };
    let rec = integrate(&sys, &v0, &path(1, 0.0, 0.2, 0.01), 0.0, 0.2, 0.01, &opts).unwrap();
    assert_eq!(rec.rows.len(), 21);
    assert!(rec.final_u.is_zero());
    for r in &rec.rows {
        assert_eq!((r.v_h, r.v_v, r.u_h, r.u_lr, r.tail), (0.0, 0.0, 0.0, 0.0, Some(0.0)));
    }
    assert_eq!(energy_residual_total(&rec.rows), 0.0);
    assert!(v_ledger(&rec.rows, 1.0).passed());
    assert_eq!(rec.snapshots.len(), 1);
    assert!(sys.rhs_v(&v0, &[0.0]).unwrap().is_zero());
}

#[test]
fn frozen_system_keeps_state() {
    let mut sys = system(params(1.0, 0.0, 0.0, 1.0, AdvectionForm::Off), 0.0, 0.0);
    sys.params.mu = 0.0;
    let v = field(2, 1.0);
    for dt in [1e-3, 0.5, 10.0] {
        let next = sys.step(&v, &[0.3], dt, false).unwrap().v;
        assert!(next.sub(&v).norm_h() <= 1e-12);
    }
}

#[test]
fn linear_eigenfield_decay() {
    let p = params(0.8, 0.3, 0.0, 1.0, AdvectionForm::Off);
    let sys = system(p, 0.0, 0.0);
    let spec = stokes_eigenpairs(&sys.ws, 1).unwrap();
    let (lambda, e) = (spec.values[0], &spec.fields[0]);
    let rate = p.mu * lambda + p.alpha;
    let rhs = sys.rhs_v(e, &[0.0]).unwrap();
    assert!(rhs.sub(&e.scaled(-rate)).norm_h() <= 1e-8 * rate);
    let defect = |dt: f64| {
        let next = sys.step(e, &[0.0], dt, false).unwrap().v;
        next.sub(&e.scaled((-rate * dt).exp())).norm_h()
    };
    let next = sys.step(e, &[0.0], 0.02, false).unwrap().v;
    assert!(next.sub(&e.scaled(1.0 / (1.0 + rate * 0.02))).norm_h() <= 1e-10);
    let (d1, d2) = (defect(1e-3), defect(5e-4));
    assert!(d1 <= (rate * 1e-3).powi(2));
    assert!((3.6..=4.4).contains(&(d1 / d2)), "{}", d1 / d2);
}

#[test]
fn global_error_is_first_order() {
    let sys = system(params(0.5, 0.2, 0.5, 3.0, AdvectionForm::SkewSymmetric), 2.0, 0.0);
    let v0 = field(3, 1.0);
    let p = path(1, 0.0, 0.2, 0.001);
    let end = |dt: f64| advance(&sys, &v0, &p, 0.0, 0.2, dt).unwrap();
    let reference = end(0.001);
    let e1 = end(0.02).sub(&reference).norm_h();
    let e2 = end(0.01).sub(&reference).norm_h();
    let ratio = e1 / e2;
    assert!((1.7..=2.3).contains(&ratio), "{ratio}");
}

#[test]
fn drift_coefficients() {
    let p = params(0.9, 0.7, 0.0, 1.0, AdvectionForm::Off);
    let sys = system(p, 0.0, 0.4);
    let m = &sys.noise.modes[0];
    let drift = sys.noise_drift(&[1.5]);
    assert!(drift.sub(&m.ag.scaled(-0.9 * 0.4 * 1.5)).norm_h() <= 1e-14 * drift.norm_h());
    let stokes_z = sys.stokes_of_z(&[2.0]);
    assert!(stokes_z.sub(&m.ag.scaled(0.8)).norm_h() <= 1e-14 * stokes_z.norm_h());
}

#[test]
fn ledger_terms_and_refinement() {
    let sys = system(params(0.5, 0.3, 0.5, 3.0, AdvectionForm::SkewSymmetric), 1.0, 0.5);
    let v0 = field(4, 1.0);
    let y = [0.8];
    let w = v0.add(&sys.z(&y));
    let out = sys.step(&v0, &y, 0.01, true).unwrap();
    let l = out.ledger.unwrap();
    let b = sys.ws.advection(AdvectionForm::SkewSymmetric).trilinear(&w, &w, &v0);
    assert!((l.advection - b).abs() <= 1e-12 * w.norm_h().powi(2) * v0.norm_h().max(1.0));
    let p = path(5, 0.0, 1.0, 0.0025);
    let opts = RecordOptions { energy_ledger: true, ..Default::default() };
    let totals: Vec<f64> = [0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| energy_residual_total(&integrate(&sys, &v0, &p, 0.0, 1.0, dt, &opts).unwrap().rows))
        .collect();
    for w in totals.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..=2.3).contains(&ratio), "{totals:?}");
    }
}

#[test]
fn deterministic_decay_envelope() {
    let p = params(1.0, 0.1, 1.0, 3.0, AdvectionForm::SkewSymmetric);
    let sys = system(p, 0.0, 0.0);
    let lambda = crate::operators::spectrum::ground_eigenvalue(&sys.ws).unwrap();
    let v0 = field(6, 3.0);
    let rec = integrate(&sys, &v0, &path(1, 0.0, 1.0, 0.01), 0.0, 1.0, 0.01, &RecordOptions::default()).unwrap();
    let u0 = rec.rows[0].u_h;
    for w in rec.rows.windows(2) {
        assert!(w[1].u_h <= w[0].u_h);
    }
    // implicit Euler lags the exponential; its own envelope is (1 + ρ dt)^{-n}
    let rho = p.mu * lambda + p.alpha;
    for (n, r) in rec.rows.iter().enumerate() {
        assert!(r.u_h <= u0 * (1.0 + rho * 0.01).powi(-(n as i32)) * (1.0 + 1e-3));
    }
}

#[test]
fn linear_v_ledger_holds_with_unit_constant() {
    let sys = system(params(1.0, 0.4, 0.0, 2.0, AdvectionForm::Off), 0.0, 2.0);
    let v0 = field(7, 1.0);
    let opts = RecordOptions { v_ledger: true, ..Default::default() };
    let rec = integrate(&sys, &v0, &path(8, 0.0, 1.0, 0.01), 0.0, 1.0, 0.01, &opts).unwrap();
    let scale = rec.rows.iter().filter_map(|r| r.v_ledger.map(|l| l.stokes_sq)).fold(0.0, f64::max);
    let check = v_ledger_linear(&rec.rows, 1e-8 * scale);
    assert_eq!(check.steps, 100);
    assert!(check.passed(), "{check:?}");
    assert!(check.max_required > 0.0);
    let c = calibrate_v_ledger(&[&rec.rows]);
    assert!(c.is_finite() && v_ledger(&rec.rows, c).passed());
    let mut hot = sys.clone();
    hot.params.r = 3.5;
    assert!(integrate(&hot, &v0, &path(8, 0.0, 1.0, 0.01), 0.0, 1.0, 0.01, &opts).is_err());
}

#[test]
fn reconstruction() {
    let sys = system(params(1.0, 0.0, 0.0, 1.0, AdvectionForm::Off), 0.0, 0.5);
    let p = path(9, 0.0, 1.0, 0.125);
    let v = field(10, 1.0);
    let u = sys.reconstruct_u(&v, &p, 0.5).unwrap();
    let z = sys.z(&p.values_at(0.5).unwrap());
    assert!(u.norm_h() <= v.norm_h() + z.norm_h() + 1e-15);
    let silent = system(params(1.0, 0.0, 0.0, 1.0, AdvectionForm::Off), 0.0, 0.0);
    assert_eq!(reconstruct_u(&silent, &v, &p, 0.5).unwrap().sub(&VelocityField::zeros(domain())), v);
    let dy = |k: usize| (k % 7) as f64 * 0.25 - 0.75;
    let mut a = VelocityField::zeros(domain());
    let mut b = VelocityField::zeros(domain());
    for (k, x) in a.ux.iter_mut().enumerate() {
        *x = dy(k);
    }
    for (k, x) in b.uy.iter_mut().enumerate() {
        *x = dy(k + 3) * 8.0;
    }
    assert_eq!(a.add(&b).sub(&b), a);
}

#[test]
fn guards_and_aborts() {
    let mut sys = system(params(1.0, 0.0, 0.0, 1.0, AdvectionForm::SkewSymmetric), 0.0, 0.0);
    let big = field(11, 1e3);
    sys.cfl_policy = GuardPolicy::Reject;
    assert!(matches!(sys.step(&big, &[0.0], 0.1, false), Err(Error::Cfl { .. })));
    sys.cfl_policy = GuardPolicy::Warn;
    assert!(sys.step(&big, &[0.0], 0.1, false).unwrap().cfl_exceeded);
    sys.cfl_policy = GuardPolicy::Substep;
    let split = sys.step(&big, &[0.0], 0.1, false).unwrap();
    assert!(split.cfl_substeps > 1 && split.v.norm_h() < big.norm_h());
    let mut bad = field(12, 1.0);
    let k = bad.ix(3, 2);
    bad.ux[k] = f64::NAN;
    let err = integrate(&sys, &bad, &path(1, 0.0, 0.1, 0.01), 0.0, 0.1, 0.01, &RecordOptions::default());
    assert!(matches!(err, Err(Error::NumericalAbort { step: 0, .. })), "{err:?}");
    assert!(integrate(&sys, &field(1, 1.0), &path(1, 0.0, 0.1, 0.01), 0.0, 0.5, 0.01, &RecordOptions::default()).is_err());
}

#[test]
fn stiff_damping_is_substepped() {
    let sys = system(params(0.1, 0.0, 50.0, 3.0, AdvectionForm::Off), 0.0, 0.0);
    let v = field(13, 2.0);
    let out = sys.step(&v, &[0.0], 0.05, false).unwrap();
    assert!(out.damping_substeps > 1);
    assert!(out.v.norm_h() < v.norm_h());
}

#[test]
fn runs_are_reproducible_and_pressure_is_pinned() {
    let sys = system(params(0.5, 0.2, 1.0, 3.0, AdvectionForm::SkewSymmetric), 1.0, 0.5);
    let p = path(14, 0.0, 0.3, 0.01);
    let opts = RecordOptions { energy_ledger: true, v_ledger: true, ..Default::default() };
    let a = integrate(&sys, &field(15, 1.0), &p, 0.0, 0.3, 0.01, &opts).unwrap();
    let b = integrate(&sys, &field(15, 1.0), &p, 0.0, 0.3, 0.01, &opts).unwrap();
    assert_eq!(a.final_v, b.final_v);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    a.write_csv(&mut csv_a).unwrap();
    b.write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 32);
    assert!(pressure_recover(&sys, &VelocityField::zeros(domain())).unwrap().max_abs() == 0.0);
    let pr = pressure_recover(&sys, &a.final_u).unwrap();
    assert!(pr.mean().abs() <= 1e-12 * pr.max_abs().max(1e-300));
}
