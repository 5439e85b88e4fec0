use super::*;
use crate::grid::DomainSpec;
use crate::noise::NoiseSpec;
use crate::operators::{AdvectionForm, OperatorWorkspace};
use crate::solver::PhysicsParams;

fn domain() -> DomainSpec {
    DomainSpec::new(1, 1.0, 0.125).unwrap()
}

fn system(r: f64, f_amp: f64, sigma: f64) -> System {
    let d = domain();
    let p = PhysicsParams { mu: 1.0, alpha: 1.0, beta: 1.0, r, advection: AdvectionForm::SkewSymmetric };
    let f = VelocityField::from_stream_fn(d, |x, y| {
        f_amp * (std::f64::consts::PI * x).cos().powi(2) * (std::f64::consts::PI * y).sin().powi(2)
    });
    let g = VelocityField::from_stream_fn(d, |x, y| (1.0 - x * x).powi(2) * (std::f64::consts::PI * y).sin().powi(2));
    System::new(OperatorWorkspace::new(d), p, &f, &NoiseSpec::scalar(g, sigma, 1.0).unwrap()).unwrap()
}

fn ball(seed: u64, count: usize) -> PullbackConfig {
    PullbackConfig {
        pullback_times: vec![0.5, 1.0],
        ics: IcEnsemble::Ball { radius: 2.0, count, texture: FieldTexture::Mixed },
        seed,
        dt: 0.01,
    }
}

#[test]
fn cocycle_identities() {
    let sys = system(3.0, 1.0, 0.5);
    let path = OuPath::generate(3, &[1.0], -1.0, 1.0, 0.01, true).unwrap();
    let x = ball(1, 1).initial_states(&sys).unwrap().remove(0);
    assert_eq!(cocycle(&sys, &path, 0.0, 0.0, 0.01, &x).unwrap(), x);
    let whole = cocycle(&sys, &path, -0.5, 0.8, 0.01, &x).unwrap();
    let first = cocycle(&sys, &path, -0.5, 0.3, 0.01, &x).unwrap();
    let shifted = path.shift(-0.2).unwrap();
    let second = cocycle(&sys, &shifted, 0.0, 0.5, 0.01, &first).unwrap();
    assert!(whole.sub(&second).norm_h() <= 1e-8 * x.norm_h());
    let other = OuPath::generate(4, &[1.0], -1.0, 1.0, 0.01, true).unwrap();
    assert!(cocycle(&sys, &other, -0.5, 0.8, 0.01, &x).unwrap().sub(&whole).norm_h() > 1e-6);
    assert!(cocycle(&sys, &path, 0.0, -1.0, 0.01, &x).is_err());
}

#[test]
fn pullback_clouds() {
    let sys = system(3.0, 1.0, 0.5);
    let path = OuPath::generate(5, &[1.0], -1.0, 0.0, 0.01, true).unwrap();
    let x = ball(2, 1).initial_states(&sys).unwrap().remove(0);
    let same = PullbackConfig { ics: IcEnsemble::Fields(vec![x.clone(), x.clone(), x]), ..ball(2, 1) };
    let rep = pullback_report(&sys, &path, &same).unwrap();
    assert_eq!(rep.diameters, vec![0.0, 0.0]);
    let cfg = ball(2, 3);
    let ics = cfg.initial_states(&sys).unwrap();
    assert_eq!(ics, cfg.initial_states(&sys).unwrap());
    assert!(ics.iter().all(|x| (x.norm_h() - 2.0).abs() < 1e-12));
    let rep = pullback_report(&sys, &path, &cfg).unwrap();
    assert!(rep.initial_diameter > 0.0);
    assert!(rep.diameters[1] < rep.diameters[0] && rep.diameters[0] < rep.initial_diameter);
    assert!(rep.monotone(0.05));
    assert!(rep.contraction() < 0.1);
    let cloud = pullback_evolve(&sys, &path, &cfg, 1.0).unwrap();
    assert_eq!(cloud.diameter, rep.diameters[1]);
    let bad = PullbackConfig { pullback_times: vec![1.0, 0.5], ..ball(2, 3) };
    assert!(bad.validate().is_err());
}

#[test]
fn absorbing_functional() {
    let path = OuPath::generate(6, &[1.0], -10.0, 0.0, 0.01, true).unwrap();
    let silent = system(3.0, 0.0, 0.0);
    let est = absorbing_radius(&silent, &path, 3.0, 10.0).unwrap();
    assert_eq!((est.l_hat, est.l_star_sq), (0.0, 0.0));
    let forced = system(3.0, 2.0, 0.0);
    let f_sq = forced.f.norm_h_sq();
    let est = absorbing_radius(&forced, &path, 3.0, 10.0).unwrap();
    let exact = 3.0 * f_sq * (1.0 - (-10.0f64).exp());
    assert!((est.l_hat - exact).abs() <= 1e-12 * exact);
    let noisy = system(2.0, 2.0, 0.5);
    let short = absorbing_radius(&noisy, &path, 1.0, 2.0).unwrap();
    let long = absorbing_radius(&noisy, &path, 1.0, 8.0).unwrap();
    assert!(long.l_hat >= short.l_hat && long.l_star_sq > long.l_hat);
    assert!(absorbing_radius(&system(1.0, 1.0, 0.5), &path, 1.0, 2.0).is_err());
    assert!(absorbing_radius(&noisy, &path, 1.0, 20.0).is_err());
}

#[test]
fn absorption_and_calibration() {
    let mut sys = system(3.0, 2.0, 0.5);
    sys.cfl_policy = crate::solver::GuardPolicy::Substep;
    let path = OuPath::generate(7, &[1.0], -12.0, 0.0, 0.02, true).unwrap();
    let est = absorbing_radius(&sys, &path, 1.0, 6.0).unwrap();
    let check = absorption_check(&sys, &path, &est, 10.0, 2, &[0.0, 1.0], 0.02).unwrap();
    assert!(check.entry_time > 0.0 && check.times.len() == 2);
    let m = calibrate_absorbing_constant(&[(est.clone(), check.clone())], 2.0);
    assert!(m > 0.0);
    let frozen = absorbing_radius(&sys, &path, m, 6.0).unwrap();
    assert!(check.v_sq.iter().all(|&v| v <= frozen.l_star_sq));
}

#[test]
fn tail_masses() {
    let d = DomainSpec::new(2, 1.0, 0.125).unwrap();
    let inner = VelocityField::from_stream_fn(d, |x, y| {
        if x.abs() < 0.5 { (0.25 - x * x).powi(2) * (std::f64::consts::PI * y).sin() } else { 0.0 }
    });
    assert!(inner.norm_h() > 0.0);
    assert_eq!(tail_mass(&inner, 0.75).smooth, 0.0);
    let mut band = VelocityField::zeros(d);
    for j in 0..d.ny {
        for i in 0..=d.nx {
            let x = d.x_face(i);
            if x.abs() >= 1.0 && x.abs() <= 1.5 {
                let k = band.ix(i, j);
                band.ux[k] = 3.0;
            }
        }
    }
    let tm = tail_mass(&band, 1.0);
    let area = 2.0 * 0.5 * d.ly;
    assert!((tm.hard - 9.0 * area).abs() <= 9.0 * 2.0 * d.ly * d.h);
    assert!(tm.hard_outer <= tm.smooth && tm.smooth <= tm.hard);
    assert_eq!(cutoff(0.5), 0.0);
    assert_eq!(cutoff(2.5), 1.0);
    assert!((cutoff(1.5) - 0.5).abs() < 1e-15);
    let slope = (1..1000).map(|i| (cutoff(1.0 + i as f64 * 1e-3) - cutoff(1.0 + (i - 1) as f64 * 1e-3)) / 1e-3).fold(0.0, f64::max);
    assert!(slope <= 1.875 + 1e-9);
}
