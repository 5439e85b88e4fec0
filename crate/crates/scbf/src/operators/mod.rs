//! Discrete Stokes operator, Helmholtz projection, skew-symmetric advection,
//! Forchheimer damping and the implicit solves used by the time stepper.

mod fast;
mod nonlinear;
mod pcg;
pub mod spectrum;

pub use nonlinear::{AdvectionForm, Advection};

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, ScalarField, VelocityField};
use fast::{Line, Separable};
use pcg::{pcg, Outcome};
use std::sync::Mutex;

pub const DEFAULT_POISSON_TOL: f64 = 1e-10;
pub const DEFAULT_STOKES_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveRecord {
    pub solver: &'static str,
    pub iterations: usize,
    pub residual: f64,
}

/// Per-domain solver state. Cheap to share read-only across threads; the
/// optional residual log is the only mutable part.
#[derive(Debug)]
pub struct OperatorWorkspace {
    pub domain: DomainSpec,
    pub poisson_tol: f64,
    pub stokes_tol: f64,
    pub max_iters: usize,
    pressure: Separable,
    diffuse_x: Separable,
    diffuse_y: Separable,
    log: Option<Mutex<Vec<SolveRecord>>>,
}

impl Clone for OperatorWorkspace {
    fn clone(&self) -> Self {
        Self {
            domain: self.domain,
            poisson_tol: self.poisson_tol,
            stokes_tol: self.stokes_tol,
            max_iters: self.max_iters,
            pressure: self.pressure.clone(),
            diffuse_x: self.diffuse_x.clone(),
            diffuse_y: self.diffuse_y.clone(),
            log: self.log.as_ref().map(|_| Mutex::new(Vec::new())),
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

impl OperatorWorkspace {
    pub fn new(domain: DomainSpec) -> Self {
        Self::with_tolerances(domain, DEFAULT_POISSON_TOL, DEFAULT_STOKES_TOL, DEFAULT_MAX_ITERS)
            .expect("default tolerances are valid")
    }

    pub fn with_tolerances(domain: DomainSpec, poisson_tol: f64, stokes_tol: f64, max_iters: usize) -> Result<Self> {
        if !(poisson_tol > 0.0 && stokes_tol > 0.0 && max_iters > 0) {
            return Err(Error::Invalid("solver tolerances and iteration cap must be positive".into()));
        }
        let (nx, ny, h) = (domain.nx, domain.ny, domain.h);
        Ok(Self {
            domain,
            poisson_tol,
            stokes_tol,
            max_iters,
            pressure: Separable::new(Line::NeumannCells, nx, Line::NeumannCells, ny, h),
            diffuse_x: Separable::new(Line::DirichletNodes, nx.saturating_sub(1), Line::DirichletCells, ny, h),
            diffuse_y: Separable::new(Line::DirichletCells, nx, Line::DirichletNodes, ny.saturating_sub(1), h),
            log: None,
        })
    }

    pub fn enable_residual_log(&mut self) {
        self.log = Some(Mutex::new(Vec::new()));
    }

    pub fn residual_log(&self) -> Vec<SolveRecord> {
        self.log.as_ref().map(|l| l.lock().unwrap().clone()).unwrap_or_default()
    }

    fn record<V>(&self, solver: &'static str, out: &Outcome<V>) {
        if let Some(log) = &self.log {
            log.lock().unwrap().push(SolveRecord { solver, iterations: out.iterations, residual: out.residual });
        }
    }

    fn check(&self, v: &VelocityField) -> Result<()> {
        if v.domain != self.domain {
            return Err(Error::GridMismatch(format!("field on {:?}, workspace on {:?}", v.domain, self.domain)));
        }
        Ok(())
    }

    /// `-Δ_h` on interior faces with no-slip ghost reflection; boundary
    /// faces of the result are zero.
    pub fn neg_laplacian(&self, v: &VelocityField) -> VelocityField {
        let d = self.domain;
        let (nx, ny) = (d.nx, d.ny);
        let ih2 = 1.0 / (d.h * d.h);
        let mut out = VelocityField::zeros(d);
        for j in 0..ny {
            for i in 1..nx {
                let a = v.ux[v.ix(i, j)];
                let mut s = 2.0 * a - v.ux[v.ix(i - 1, j)] - v.ux[v.ix(i + 1, j)];
                s += if j > 0 { a - v.ux[v.ix(i, j - 1)] } else { 2.0 * a };
                s += if j + 1 < ny { a - v.ux[v.ix(i, j + 1)] } else { 2.0 * a };
                let k = out.ix(i, j);
                out.ux[k] = s * ih2;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let a = v.uy[v.iy(i, j)];
                let mut s = 2.0 * a - v.uy[v.iy(i, j - 1)] - v.uy[v.iy(i, j + 1)];
                s += if i > 0 { a - v.uy[v.iy(i - 1, j)] } else { 2.0 * a };
                s += if i + 1 < nx { a - v.uy[v.iy(i + 1, j)] } else { 2.0 * a };
                let k = out.iy(i, j);
                out.uy[k] = s * ih2;
            }
        }
        out
    }

    fn neumann_apply(&self, phi: &Vec<f64>) -> Vec<f64> {
        let g = ScalarField { domain: self.domain, values: phi.clone() }.gradient();
        g.divergence().values.into_iter().map(|x| -x).collect()
    }

    /// Mean-zero solution of `-Δ_h φ = rhs` with zero-flux walls; the mean
    /// of `rhs` is discarded. `scale` sets the absolute residual target.
    fn neumann_solve(&self, mut rhs: Vec<f64>, scale: f64) -> Result<Vec<f64>> {
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        rhs.iter_mut().for_each(|r| *r -= mean);
        if scale == 0.0 || rhs.iter().all(|&r| r == 0.0) {
            return Ok(vec![0.0; rhs.len()]);
        }
        let out = pcg(
            "pressure Poisson",
            |x: &Vec<f64>| Ok(self.neumann_apply(x)),
            |r: &Vec<f64>| Ok(self.pressure.solve(r, 0.0, 1.0)),
            |r: &Vec<f64>| max_abs(r),
            &rhs,
            self.poisson_tol * scale,
            self.max_iters,
        )?;
        self.record("pressure Poisson", &out);
        let mut phi = out.x;
        let m = phi.iter().sum::<f64>() / phi.len() as f64;
        phi.iter_mut().for_each(|p| *p -= m);
        Ok(phi)
    }

    /// Helmholtz projection `w - ∇_h φ` with `Δ_h φ = div_h w`.
    pub fn project(&self, w: &VelocityField) -> Result<VelocityField> {
        self.check(w)?;
        let scale = w.max_abs_face();
        let rhs: Vec<f64> = w.divergence().values.into_iter().map(|x| -x).collect();
        let phi = self.neumann_solve(rhs, scale)?;
        let mut out = w.clone();
        out.axpy(-1.0, &ScalarField { domain: self.domain, values: phi }.gradient());
        Ok(out)
    }

    /// Mean-zero solution of `-Δ_h p = rhs` (zero-flux walls).
    pub fn poisson_neumann(&self, rhs: &ScalarField) -> Result<ScalarField> {
        let scale = rhs.max_abs();
        let values = self.neumann_solve(rhs.values.clone(), scale)?;
        Ok(ScalarField { domain: self.domain, values })
    }

    /// `A_h v = P(-Δ_h v)`.
    pub fn stokes_apply(&self, v: &VelocityField) -> Result<VelocityField> {
        self.check(v)?;
        self.project(&self.neg_laplacian(v))
    }

    fn split(&self, v: &VelocityField) -> (Vec<f64>, Vec<f64>) {
        let d = self.domain;
        let mut bx = Vec::with_capacity(self.diffuse_x.len());
        for j in 0..d.ny {
            bx.extend_from_slice(&v.ux[v.ix(1, j)..v.ix(d.nx, j)]);
        }
        let by = v.uy[v.iy(0, 1)..v.iy(0, d.ny)].to_vec();
        (bx, by)
    }

    fn join(&self, bx: &[f64], by: &[f64]) -> VelocityField {
        let d = self.domain;
        let mut v = VelocityField::zeros(d);
        let w = d.nx.saturating_sub(1);
        for j in 0..d.ny {
            let k = v.ix(1, j);
            v.ux[k..k + w].copy_from_slice(&bx[j * w..(j + 1) * w]);
        }
        let k = v.iy(0, 1);
        v.uy[k..k + by.len()].copy_from_slice(by);
        v
    }

    fn diffusion_direct(&self, rhs: &VelocityField, sigma: f64, gamma: f64) -> VelocityField {
        let (bx, by) = self.split(rhs);
        let xx = self.diffuse_x.solve(&bx, sigma, gamma);
        let xy = self.diffuse_y.solve(&by, sigma, gamma);
        self.join(&xx, &xy)
    }

    /// Solves `(sigma I + gamma (-Δ_h)) x = rhs` on interior faces,
    /// componentwise, with no-slip walls.
    pub fn diffusion_solve(&self, rhs: &VelocityField, sigma: f64, gamma: f64) -> Result<VelocityField> {
        self.check(rhs)?;
        if !(sigma >= 0.0 && gamma >= 0.0 && sigma + gamma > 0.0) {
            return Err(Error::Invalid(format!("diffusion solve needs sigma, gamma >= 0 (got {sigma}, {gamma})")));
        }
        let mut b = rhs.clone();
        b.zero_boundary();
        if gamma == 0.0 {
            b.scale(1.0 / sigma);
            return Ok(b);
        }
        let scale = b.max_abs_face();
        if scale == 0.0 {
            return Ok(b);
        }
        let out = pcg(
            "implicit diffusion",
            |x: &VelocityField| {
                let mut y = self.neg_laplacian(x);
                y.scale(gamma);
                y.axpy(sigma, x);
                Ok(y)
            },
            |r: &VelocityField| Ok(self.diffusion_direct(r, sigma, gamma)),
            |r: &VelocityField| r.max_abs_face(),
            &b,
            self.poisson_tol * scale,
            self.max_iters,
        )?;
        self.record("implicit diffusion", &out);
        Ok(out.x)
    }

    /// `(I + gamma (-Δ_h))^{-1} rhs`.
    pub fn implicit_diffusion_solve(&self, rhs: &VelocityField, gamma: f64) -> Result<VelocityField> {
        self.diffusion_solve(rhs, 1.0, gamma)
    }

    /// Solves `(sigma I + gamma A_h) x = b` on divergence-free fields
    /// (`b` divergence free). `sigma = 0, gamma = 1` inverts the Stokes
    /// operator.
    pub fn stokes_solve(&self, b: &VelocityField, sigma: f64, gamma: f64) -> Result<VelocityField> {
        self.check(b)?;
        if !(sigma >= 0.0 && gamma >= 0.0 && sigma + gamma > 0.0) {
            return Err(Error::Invalid(format!("Stokes solve needs sigma, gamma >= 0 (got {sigma}, {gamma})")));
        }
        if gamma == 0.0 {
            return Ok(b.scaled(1.0 / sigma));
        }
        let scale = b.norm_h();
        if scale == 0.0 {
            return Ok(VelocityField::zeros(self.domain));
        }
        let out = pcg(
            "implicit Stokes",
            |x: &VelocityField| {
                let mut y = self.stokes_apply(x)?;
                y.scale(gamma);
                y.axpy(sigma, x);
                Ok(y)
            },
            |r: &VelocityField| self.project(&self.diffusion_direct(r, sigma, gamma)),
            |r: &VelocityField| r.norm_h(),
            b,
            self.stokes_tol * scale,
            self.max_iters,
        )?;
        self.record("implicit Stokes", &out);
        Ok(out.x)
    }

    /// `‖P(-Δ_h)v - (-Δ_h)P v‖_H`; the two need not commute with walls.
    pub fn commutator_norm(&self, v: &VelocityField) -> Result<f64> {
        let a = self.project(&self.neg_laplacian(v))?;
        let mut b = self.neg_laplacian(&self.project(v)?);
        b.axpy(-1.0, &a);
        Ok(b.norm_h())
    }

    pub fn advection(&self, form: AdvectionForm) -> Advection<'_> {
        Advection { ws: self, form }
    }

    /// Damping `P(|w|^{r-1} w)`.
    pub fn damping(&self, w: &VelocityField, r: f64) -> Result<VelocityField> {
        self.check(w)?;
        self.project(&nonlinear::damping_raw(w, r))
    }

    /// Gateaux derivative of the damping map at `w` in direction `d`.
    pub fn damping_derivative(&self, w: &VelocityField, d: &VelocityField, r: f64) -> Result<VelocityField> {
        self.check(w)?;
        self.check(d)?;
        self.project(&nonlinear::damping_derivative_raw(w, d, r))
    }

    /// Mean-zero pressure `p` with `-Δ_h p = div_h div_h(w ⊗ w) + β div_h(|w|^{r-1} w)`.
    pub fn pressure_recover(&self, w: &VelocityField, beta: f64, r: f64) -> Result<ScalarField> {
        self.check(w)?;
        let mut flux = nonlinear::momentum_flux_divergence(w);
        if beta != 0.0 {
            let mut c = nonlinear::damping_raw(w, r);
            c.zero_boundary();
            flux.axpy(beta, &c);
        }
        self.poisson_neumann(&flux.divergence())
    }
}

pub use nonlinear::{damping_derivative_raw, damping_raw};

#[cfg(test)]
mod tests;
