//! Operator identity suites on random admissible fields, with the measured
//! defect of each identity.

use crate::config::InvariantsBlock;
use crate::error::Result;
use crate::grid::{null_expand, random_admissible, DomainSpec, FieldTexture, ScalarField, VelocityField};
use crate::operators::{damping_raw, AdvectionForm, OperatorWorkspace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const REPORT_SCHEMA: &str = "scbf-invariants/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    /// Worst case over the samples; the check passes when `defect <= tolerance`.
    pub defect: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub schema: String,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub seed: u64,
    pub advection: AdvectionForm,
    pub passed: bool,
    pub checks: Vec<IdentityCheck>,
}

impl InvariantReport {
    pub fn failures(&self) -> Vec<&IdentityCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

struct Suite {
    checks: Vec<IdentityCheck>,
}

impl Suite {
    fn push(&mut self, name: &str, defect: f64, tolerance: f64, samples: usize) {
        // NaN defects fail
        let passed = defect <= tolerance;
        self.checks.push(IdentityCheck { name: name.into(), defect, tolerance, samples, passed });
    }
}

fn texture(k: usize) -> FieldTexture {
    [FieldTexture::Smooth, FieldTexture::Mixed, FieldTexture::White][k % 3]
}

fn random_raw(d: &DomainSpec, rng: &mut ChaCha8Rng) -> VelocityField {
    let mut w = VelocityField::zeros(*d);
    w.ux.iter_mut().chain(w.uy.iter_mut()).for_each(|x| *x = rng.gen_range(-1.0..1.0));
    w.zero_boundary();
    w
}

fn fold_max(acc: f64, x: f64) -> f64 {
    if x.is_nan() || acc.is_nan() {
        f64::NAN
    } else {
        acc.max(x)
    }
}

/// Runs every identity on `ws`'s grid with `tol.samples` draws seeded by `seed`.
pub fn operator_identities(ws: &OperatorWorkspace, advection: AdvectionForm, tol: &InvariantsBlock, seed: u64) -> Result<InvariantReport> {
    let d = ws.domain;
    let n = tol.samples;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Suite { checks: Vec::new() };
    let adv = ws.advection(advection);

    let (mut skew, mut anti) = (0.0, 0.0);
    for k in 0..n {
        let u = random_admissible(&d, &mut rng, texture(k));
        let v = random_admissible(&d, &mut rng, texture(k + 1)).scaled(rng.gen_range(0.1..10.0));
        let w = random_admissible(&d, &mut rng, texture(k + 2));
        skew = fold_max(skew, adv.trilinear(&u, &v, &v).abs() / (u.norm_h() * v.norm_h_sq()));
        let scale = u.norm_h() * v.norm_h() * w.norm_h();
        anti = fold_max(anti, (adv.trilinear(&u, &v, &w) + adv.trilinear(&u, &w, &v)).abs() / scale);
    }
    s.push("trilinear_vanishes_on_diagonal", skew, tol.trilinear_tol, n);
    s.push("trilinear_antisymmetry", anti, tol.trilinear_tol, n);

    let (mut form, mut sym) = (0.0, 0.0);
    for k in 0..n {
        let v = random_admissible(&d, &mut rng, texture(k));
        let av = ws.stokes_apply(&v)?;
        let nv = v.norm_v_sq();
        form = fold_max(form, (av.dot(&v) - nv).abs() / nv);
        if k % 10 == 0 {
            let w = random_admissible(&d, &mut rng, texture(k + 1));
            let a = av.dot(&w);
            let b = v.dot(&ws.stokes_apply(&w)?);
            sym = fold_max(sym, (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
        }
    }
    s.push("stokes_form_equals_v_norm", form, tol.stokes_form_tol, n);
    s.push("stokes_symmetry", sym, tol.stokes_form_tol, n.div_ceil(10));

    for &r in &tol.r_values {
        let (mut mono, mut energy) = (0.0_f64, 0.0);
        for k in 0..n {
            let w1 = random_admissible(&d, &mut rng, texture(k)).scaled(rng.gen_range(0.1..5.0));
            let w2 = random_admissible(&d, &mut rng, texture(k + 1)).scaled(rng.gen_range(0.1..5.0));
            let diff = ws.damping(&w1, r)?.sub(&ws.damping(&w2, r)?);
            mono = fold_max(mono, -diff.dot(&w1.sub(&w2)));
            let lp = w1.norm_lp(r + 1.0).powf(r + 1.0);
            energy = fold_max(energy, (damping_raw(&w1, r).dot(&w1) - lp).abs() / lp);
        }
        s.push(&format!("damping_monotone_r{r}"), mono.max(0.0), tol.monotonicity_tol, n);
        s.push(&format!("damping_energy_r{r}"), energy, 1e-12, n);
    }

    let lambda = PI * PI * (1.0 / (2.0 * d.half_width()).powi(2) + 1.0 / (d.ly * d.ly));
    let (mut lady, mut poinc) = (0.0, 0.0);
    for k in 0..n {
        let v = random_admissible(&d, &mut rng, texture(k));
        let (h, vn) = (v.norm_h(), v.norm_v());
        lady = fold_max(lady, v.norm_lp(4.0) / (2f64.powf(0.25) * (h * vn).sqrt()) - 1.0);
        poinc = fold_max(poinc, 1.0 - v.norm_v_sq() / (lambda * v.norm_h_sq()));
    }
    s.push("ladyzhenskaya", lady.max(0.0), tol.ladyzhenskaya_slack, n);
    s.push("poincare_rectangle_constant", poinc.max(0.0), 1e-12, n);

    let outer = DomainSpec::new(2 * d.m, d.ly, d.h)?;
    let mut iso: f64 = 0.0;
    for k in 0..n.min(20) {
        let v = random_admissible(&d, &mut rng, texture(k));
        let e = null_expand(&v, &outer)?;
        iso = fold_max(iso, (e.norm_h() - v.norm_h()).abs() / v.norm_h());
        iso = fold_max(iso, (e.norm_lp(4.0) - v.norm_lp(4.0)).abs() / v.norm_lp(4.0));
    }
    s.push("null_expansion_isometry", iso, 1e-13, n.min(20));

    let (mut idem, mut div, mut orth, mut kernel) = (0.0, 0.0, 0.0, 0.0);
    let m = n.min(50);
    for _ in 0..m {
        let w = random_raw(&d, &mut rng);
        let p = ws.project(&w)?;
        idem = fold_max(idem, ws.project(&p)?.sub(&p).max_abs_face());
        div = fold_max(div, p.divergence().max_abs());
        let phi = ScalarField { domain: d, values: (0..d.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let g = phi.gradient();
        orth = fold_max(orth, p.dot(&g).abs() / (p.norm_h() * g.norm_h()));
        kernel = fold_max(kernel, ws.project(&g)?.norm_h() / g.norm_h());
    }
    s.push("projection_idempotent", idem, 10.0 * ws.poisson_tol, m);
    s.push("projection_divergence", div, ws.poisson_tol, m);
    s.push("projection_gradient_orthogonal", orth, tol.orthogonality_tol, m);
    s.push("projection_kills_gradients", kernel, tol.orthogonality_tol, m);

    let w = random_admissible(&d, &mut rng, FieldTexture::Mixed);
    let dir = random_admissible(&d, &mut rng, FieldTexture::Mixed);
    let mut ratio_defect: f64 = 0.0;
    for r in [1.5, 2.0, 3.0] {
        let exact = ws.damping_derivative(&w, &dir, r)?;
        let fd = |eps: f64| -> Result<f64> {
            let a = ws.damping(&w.add(&dir.scaled(eps)), r)?;
            let b = ws.damping(&w.sub(&dir.scaled(eps)), r)?;
            Ok(a.sub(&b).scaled(0.5 / eps).sub(&exact).norm_h())
        };
        let (e1, e2) = (fd(1e-2)?, fd(5e-3)?);
        // second order: halving eps quarters the error
        ratio_defect = fold_max(ratio_defect, ((e1 / e2) - 4.0).abs());
    }
    s.push("damping_derivative_second_order", ratio_defect, 1.0, 3);

    let passed = s.checks.iter().all(|c| c.passed);
    Ok(InvariantReport {
        schema: REPORT_SCHEMA.into(),
        nx: d.nx,
        ny: d.ny,
        h: d.h,
        seed,
        advection,
        passed,
        checks: s.checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> InvariantsBlock {
        InvariantsBlock { samples: 12, ..InvariantsBlock::default() }
    }

    #[test]
    fn skew_form_passes_everything() {
        let ws = OperatorWorkspace::new(DomainSpec::new(1, 1.0, 0.125).unwrap());
        let rep = operator_identities(&ws, AdvectionForm::SkewSymmetric, &quick(), 3).unwrap();
        assert!(rep.passed, "{:?}", rep.failures());
        assert!(rep.checks.len() >= 18);
    }

    #[test]
    fn convective_form_fails_the_skew_identity() {
        let ws = OperatorWorkspace::new(DomainSpec::new(1, 1.0, 0.125).unwrap());
        let rep = operator_identities(&ws, AdvectionForm::Convective, &quick(), 3).unwrap();
        assert!(!rep.passed);
        let names: Vec<_> = rep.failures().iter().map(|c| c.name.clone()).collect();
        assert!(names.contains(&"trilinear_vanishes_on_diagonal".to_string()));
        assert!(names.iter().all(|n| n.starts_with("trilinear")));
    }

    #[test]
    fn report_is_deterministic_and_schema_stable() {
        let ws = OperatorWorkspace::new(DomainSpec::new(1, 0.5, 0.125).unwrap());
        let a = operator_identities(&ws, AdvectionForm::SkewSymmetric, &quick(), 9).unwrap();
        let b = operator_identities(&ws, AdvectionForm::SkewSymmetric, &quick(), 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let names: Vec<_> = a.checks.iter().map(|c| c.name.as_str()).collect();
        let other = operator_identities(&ws, AdvectionForm::SkewSymmetric, &quick(), 10).unwrap();
        assert_eq!(names, other.checks.iter().map(|c| c.name.as_str()).collect::<Vec<_>>());
    }
}
