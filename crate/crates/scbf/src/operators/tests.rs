use super::*;
use crate::grid::{random_admissible, FieldTexture, ScalarField};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_raw(d: &DomainSpec, rng: &mut ChaCha8Rng) -> VelocityField {
    let mut w = VelocityField::zeros(*d);
    w.ux.iter_mut().chain(w.uy.iter_mut()).for_each(|x| *x = rng.gen_range(-1.0..1.0));
    w.zero_boundary();
    w
}

fn small() -> OperatorWorkspace {
    OperatorWorkspace::new(DomainSpec::new(1, 1.0, 0.125).unwrap())
}

#[test]
fn projection_properties() {
    let ws = small();
    let d = ws.domain;
    let mut r = rng(1);
    for _ in 0..20 {
        let w = random_raw(&d, &mut r);
        let p = ws.project(&w).unwrap();
        assert!(p.divergence().max_abs() <= ws.poisson_tol);
        let pp = ws.project(&p).unwrap();
        assert!(pp.sub(&p).max_abs_face() <= 10.0 * ws.poisson_tol);
        let phi = ScalarField { domain: d, values: (0..d.n_cells()).map(|_| r.gen_range(-1.0..1.0)).collect() };
        let g = phi.gradient();
        assert!(p.dot(&g).abs() <= 1e-10 * p.norm_h() * g.norm_h());
        assert!(ws.project(&g).unwrap().norm_h() <= 1e-10 * g.norm_h());
        let resid = w.sub(&p);
        assert!(resid.dot(&p).abs() <= 1e-10 * w.norm_h_sq());
    }
    let v = random_admissible(&d, &mut r, FieldTexture::Mixed);
    assert!(ws.project(&v).unwrap().sub(&v).max_abs_face() <= 10.0 * ws.poisson_tol);
}

#[test]
fn stokes_form_and_symmetry() {
    let ws = OperatorWorkspace::new(DomainSpec::new(2, 1.0, 0.125).unwrap());
    let mut r = rng(2);
    for _ in 0..100 {
        let v = random_admissible(&ws.domain, &mut r, FieldTexture::Mixed);
        let av = ws.stokes_apply(&v).unwrap();
        let nv = v.norm_v_sq();
        assert!((av.dot(&v) - nv).abs() <= 1e-9 * nv);
    }
    for _ in 0..10 {
        let v = random_admissible(&ws.domain, &mut r, FieldTexture::Mixed);
        let w = random_admissible(&ws.domain, &mut r, FieldTexture::White);
        let a = ws.stokes_apply(&v).unwrap().dot(&w);
        let b = v.dot(&ws.stokes_apply(&w).unwrap());
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
    }
}

/// Generalized eigenproblem on the stream-function basis: every discrete
/// divergence-free admissible field is the curl of a nodal function.
fn dense_stokes_eigenvalues(d: DomainSpec, ws: &OperatorWorkspace) -> Vec<f64> {
    let (nx, ny) = (d.nx, d.ny);
    let mut basis = Vec::new();
    for j in 1..ny {
        for i in 1..nx {
            let mut psi = vec![0.0; (nx + 1) * (ny + 1)];
            psi[i + j * (nx + 1)] = 1.0;
            basis.push(VelocityField::from_stream_function(d, &psi));
        }
    }
    let n = basis.len();
    let lap: Vec<VelocityField> = basis.iter().map(|b| ws.neg_laplacian(b)).collect();
    let g = DMatrix::from_fn(n, n, |a, b| basis[a].dot(&basis[b]));
    let s = DMatrix::from_fn(n, n, |a, b| 0.5 * (lap[a].dot(&basis[b]) + lap[b].dot(&basis[a])));
    let l = g.cholesky().unwrap().l();
    let li = l.try_inverse().unwrap();
    let c = &li * s * li.transpose();
    let mut vals: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

#[test]
fn eigenpairs_match_dense_oracle() {
    let d = DomainSpec::new(1, 1.0, 0.25).unwrap();
    let ws = OperatorWorkspace::new(d);
    let dense = dense_stokes_eigenvalues(d, &ws);
    let spec = spectrum::stokes_eigenpairs(&ws, 3).unwrap();
    for k in 0..3 {
        assert!((spec.values[k] - dense[k]).abs() <= 1e-9 * dense[k], "{k}: {} vs {}", spec.values[k], dense[k]);
        let av = ws.stokes_apply(&spec.fields[k]).unwrap();
        assert!(av.sub(&spec.fields[k].scaled(spec.values[k])).norm_h() <= 1e-8 * spec.values[k]);
    }
    let lam = spec.values[0];
    let analytic = std::f64::consts::PI.powi(2) * (0.25 + 1.0);
    assert!(lam >= analytic);
}

/// Independent evaluation of `((u·∇)v, w)` with explicit ghost lookups.
fn brute_convective(u: &VelocityField, v: &VelocityField, w: &VelocityField) -> f64 {
    let d = u.domain;
    let (nx, ny, h) = (d.nx as i64, d.ny as i64, d.h);
    let ux = |f: &VelocityField, i: i64, j: i64| -> f64 {
        if j < 0 {
            -f.ux[(i + 0 * (nx + 1)) as usize]
        } else if j >= ny {
            -f.ux[(i + (ny - 1) * (nx + 1)) as usize]
        } else {
            f.ux[(i + j * (nx + 1)) as usize]
        }
    };
    let uy = |f: &VelocityField, i: i64, j: i64| -> f64 {
        if i < 0 {
            -f.uy[(j * nx) as usize]
        } else if i >= nx {
            -f.uy[(nx - 1 + j * nx) as usize]
        } else {
            f.uy[(i + j * nx) as usize]
        }
    };
    let mut s = 0.0;
    for j in 0..ny {
        for i in 1..nx {
            let a = ux(u, i, j);
            let b = (uy(u, i - 1, j) + uy(u, i, j) + uy(u, i - 1, j + 1) + uy(u, i, j + 1)) / 4.0;
            let conv = a * (ux(v, i + 1, j) - ux(v, i - 1, j)) / (2.0 * h) + b * (ux(v, i, j + 1) - ux(v, i, j - 1)) / (2.0 * h);
            s += conv * ux(w, i, j);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let a = (ux(u, i, j - 1) + ux(u, i + 1, j - 1) + ux(u, i, j) + ux(u, i + 1, j)) / 4.0;
            let b = uy(u, i, j);
            let conv = a * (uy(v, i + 1, j) - uy(v, i - 1, j)) / (2.0 * h) + b * (uy(v, i, j + 1) - uy(v, i, j - 1)) / (2.0 * h);
            s += conv * uy(w, i, j);
        }
    }
    s * h * h
}

#[test]
fn trilinear_form_identities() {
    let d = DomainSpec::new(1, 0.5, 0.125).unwrap();
    assert_eq!((d.nx, d.ny), (16, 4));
    let ws = OperatorWorkspace::new(d);
    let adv = ws.advection(AdvectionForm::SkewSymmetric);
    let mut r = rng(3);
    for _ in 0..100 {
        let u = random_admissible(&d, &mut r, FieldTexture::Mixed);
        let v = random_admissible(&d, &mut r, FieldTexture::White);
        let w = random_admissible(&d, &mut r, FieldTexture::Mixed);
        assert!(adv.trilinear(&u, &v, &v).abs() <= 1e-12 * u.norm_h() * v.norm_h_sq());
        assert_eq!(adv.trilinear(&u, &v, &w).to_bits(), (-adv.trilinear(&u, &w, &v)).to_bits());
    }
    let d4 = DomainSpec::new(1, 2.0, 0.5).unwrap();
    assert_eq!((d4.nx, d4.ny), (4, 4));
    let ws4 = OperatorWorkspace::new(d4);
    let adv4 = ws4.advection(AdvectionForm::SkewSymmetric);
    for _ in 0..20 {
        let u = random_raw(&d4, &mut r);
        let v = random_raw(&d4, &mut r);
        let w = random_raw(&d4, &mut r);
        let want = 0.5 * (brute_convective(&u, &v, &w) - brute_convective(&u, &w, &v));
        assert!((adv4.trilinear(&u, &v, &w) - want).abs() <= 1e-13);
        let conv = ws4.advection(AdvectionForm::Convective).trilinear(&u, &v, &w);
        assert!((conv - brute_convective(&u, &v, &w)).abs() <= 1e-13);
    }
}

#[test]
fn advection_field_represents_the_form() {
    let ws = small();
    let d = ws.domain;
    let adv = ws.advection(AdvectionForm::SkewSymmetric);
    let mut r = rng(4);
    let u0 = VelocityField::zeros(d);
    let v0 = random_admissible(&d, &mut r, FieldTexture::Mixed);
    assert!(adv.apply(&u0, &v0).unwrap().is_zero());
    for _ in 0..50 {
        let u = random_admissible(&d, &mut r, FieldTexture::Mixed);
        let v = random_admissible(&d, &mut r, FieldTexture::Mixed);
        let w = random_admissible(&d, &mut r, FieldTexture::Mixed);
        let b = adv.apply(&u, &v).unwrap();
        let scale = u.norm_v() * v.norm_v() * w.norm_h();
        assert!((b.dot(&w) - adv.trilinear(&u, &v, &w)).abs() <= 1e-12 * scale);
        assert!(b.dot(&v).abs() <= 1e-12 * u.norm_v() * v.norm_v() * v.norm_h());
    }
    let u = random_admissible(&d, &mut r, FieldTexture::White);
    let v = random_admissible(&d, &mut r, FieldTexture::White);
    let bad = ws.advection(AdvectionForm::Convective).trilinear(&u, &v, &v);
    assert!(bad.abs() > 1e-6);
}

#[test]
fn damping_on_constant_field() {
    // unit area: m = 1, Ly = 0.5
    let d = DomainSpec::new(1, 0.5, 0.125).unwrap();
    let mut w = VelocityField::zeros(d);
    w.ux.iter_mut().for_each(|x| *x = 2.0);
    let c = damping_raw(&w, 3.0);
    assert!(c.ux.iter().all(|&x| x == 8.0));
    assert!(c.uy.iter().all(|&x| x == 0.0));
    assert!((c.dot(&w) - 16.0).abs() < 1e-12);
    assert!((w.norm_lp(4.0).powi(4) - 16.0).abs() < 1e-12);
}

#[test]
fn damping_energy_and_monotonicity() {
    let ws = small();
    let d = ws.domain;
    let mut r = rng(5);
    for rexp in [1.0, 2.0, 3.0, 3.5] {
        for _ in 0..50 {
            let w = random_admissible(&d, &mut r, FieldTexture::Mixed).scaled(r.gen_range(0.1..5.0));
            let c = damping_raw(&w, rexp);
            let lp = w.norm_lp(rexp + 1.0).powf(rexp + 1.0);
            assert!((c.dot(&w) - lp).abs() <= 1e-12 * lp);
            let w2 = random_admissible(&d, &mut r, FieldTexture::White).scaled(r.gen_range(0.1..5.0));
            let diff = ws.damping(&w, rexp).unwrap().sub(&ws.damping(&w2, rexp).unwrap());
            assert!(diff.dot(&w.sub(&w2)) >= -1e-12);
        }
    }
}

#[test]
fn damping_derivative() {
    let ws = small();
    let d = ws.domain;
    let mut r = rng(6);
    let w = random_admissible(&d, &mut r, FieldTexture::Mixed);
    let dir = random_admissible(&d, &mut r, FieldTexture::Mixed);
    let pd = ws.project(&dir).unwrap();
    assert!(ws.damping_derivative(&w, &dir, 1.0).unwrap().sub(&pd).max_abs_face() == 0.0);
    let zero = VelocityField::zeros(d);
    assert!(ws.damping_derivative(&zero, &dir, 2.0).unwrap().is_zero());
    for rexp in [1.5, 2.0, 3.0, 3.5] {
        let exact = ws.damping_derivative(&w, &dir, rexp).unwrap();
        let fd = |eps: f64| {
            let a = ws.damping(&w.add(&dir.scaled(eps)), rexp).unwrap();
            let b = ws.damping(&w.sub(&dir.scaled(eps)), rexp).unwrap();
            a.sub(&b).scaled(0.5 / eps).sub(&exact).norm_h()
        };
        let (e1, e2) = (fd(1e-2), fd(5e-3));
        assert!(e1 < 1e-2 * exact.norm_h(), "r={rexp}: {e1}");
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "r={rexp}: ratio {ratio}");
    }
}

#[test]
fn diffusion_solve_oracles() {
    let ws = small();
    let d = ws.domain;
    let mut r = rng(7);
    let x0 = random_raw(&d, &mut r);
    assert_eq!(ws.implicit_diffusion_solve(&x0, 0.0).unwrap(), x0);
    for gamma in [1e-3, 0.1, 10.0] {
        let mut rhs = ws.neg_laplacian(&x0);
        rhs.scale(gamma);
        rhs.axpy(1.0, &x0);
        let x = ws.implicit_diffusion_solve(&rhs, gamma).unwrap();
        assert!(x.sub(&x0).max_abs_face() <= 1e-9);
        let v = random_raw(&d, &mut r);
        assert!(ws.implicit_diffusion_solve(&v, gamma).unwrap().dot(&v) > 0.0);
    }
}

#[test]
fn stokes_solve_inverts() {
    let ws = small();
    let mut r = rng(8);
    let x0 = random_admissible(&ws.domain, &mut r, FieldTexture::Mixed);
    for (sigma, gamma) in [(1.0, 0.01), (1.1, 1.0), (0.0, 1.0)] {
        let mut b = ws.stokes_apply(&x0).unwrap();
        b.scale(gamma);
        b.axpy(sigma, &x0);
        let x = ws.stokes_solve(&b, sigma, gamma).unwrap();
        assert!(x.sub(&x0).norm_h() <= 1e-10, "({sigma}, {gamma})");
    }
}

#[test]
fn pressure_basics() {
    let ws = small();
    let d = ws.domain;
    assert!(ws.pressure_recover(&VelocityField::zeros(d), 1.0, 3.0).unwrap().values.iter().all(|&p| p == 0.0));
    let mut r = rng(9);
    let w = random_admissible(&d, &mut r, FieldTexture::Mixed);
    let p = ws.pressure_recover(&w, 0.5, 3.0).unwrap();
    assert!(p.mean().abs() < 1e-14);
}

/// Gaussian vortex in cyclostrophic balance: `p = -(A/a)² e^{-2ρ²/a²}` + const.
#[test]
fn pressure_of_a_gaussian_vortex_converges_at_second_order() {
    let (amp, a, yc) = (1.0, 0.35, 1.5);
    let err = |h: f64| {
        let d = DomainSpec::new(2, 3.0, h).unwrap();
        let ws = OperatorWorkspace::new(d);
        let w = VelocityField::from_stream_fn(d, |x, y| amp * (-(x * x + (y - yc).powi(2)) / (a * a)).exp());
        let p = ws.pressure_recover(&w, 0.0, 3.0).unwrap();
        let mut exact = ScalarField::zeros(d);
        for j in 0..d.ny {
            for i in 0..d.nx {
                let rho2 = d.x_center(i).powi(2) + (d.y_center(j) - yc).powi(2);
                exact.values[i + j * d.nx] = -(amp / a).powi(2) * (-2.0 * rho2 / (a * a)).exp();
            }
        }
        exact.remove_mean();
        p.values.iter().zip(&exact.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(1.0 / 16.0), err(1.0 / 32.0));
    let ratio = e1 / e2;
    assert!(e2 < 0.05 * (amp / a).powi(2), "error {e2}");
    assert!((3.0..5.5).contains(&ratio), "ratio {ratio} ({e1}, {e2})");
}

#[test]
fn commutator_is_finite() {
    let ws = small();
    let mut r = rng(10);
    let v = random_admissible(&ws.domain, &mut r, FieldTexture::Smooth);
    assert!(ws.commutator_norm(&v).unwrap().is_finite());
}

#[test]
fn residual_log_collects_solves() {
    let mut ws = small();
    ws.enable_residual_log();
    let mut r = rng(11);
    let w = random_raw(&ws.domain, &mut r);
    ws.project(&w).unwrap();
    let log = ws.residual_log();
    assert_eq!(log.len(), 1);
    assert!(log[0].residual <= ws.poisson_tol * w.max_abs_face());
}
