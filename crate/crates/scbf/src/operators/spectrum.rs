//! Lowest eigenpairs of the discrete Stokes operator by block inverse
//! iteration with Rayleigh-Ritz extraction.

use super::OperatorWorkspace;
use crate::error::{Error, Result};
use crate::grid::{random_admissible, FieldTexture, VelocityField};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct StokesSpectrum {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Unit H-norm eigenfields.
    pub fields: Vec<VelocityField>,
    /// `‖A v - λ v‖ / λ` per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

const RESIDUAL_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 400;

fn orthonormalise(vs: Vec<VelocityField>) -> Vec<VelocityField> {
    let mut out: Vec<VelocityField> = Vec::with_capacity(vs.len());
    for mut v in vs {
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&v);
                v.axpy(-c, q);
            }
        }
        let n = v.norm_h();
        if n > 1e-300 {
            v.scale(1.0 / n);
            out.push(v);
        }
    }
    out
}

/// The `k` smallest eigenpairs of `A_h`.
pub fn stokes_eigenpairs(ws: &OperatorWorkspace, k: usize) -> Result<StokesSpectrum> {
    let d = ws.domain;
    let dim = d.nx.saturating_sub(1) * d.ny.saturating_sub(1);
    if k == 0 || k > dim {
        return Err(Error::Invalid(format!("asked for {k} Stokes modes, space has dimension {dim}")));
    }
    let block = (k + 6).min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut x: Vec<VelocityField> = (0..block).map(|_| random_admissible(&d, &mut rng, FieldTexture::Mixed)).collect();
    for sweep in 1..=MAX_SWEEPS {
        let y = x.iter().map(|xi| ws.stokes_solve(xi, 0.0, 1.0)).collect::<Result<Vec<_>>>()?;
        let q = orthonormalise(y);
        let aq = q.iter().map(|qi| ws.stokes_apply(qi)).collect::<Result<Vec<_>>>()?;
        let n = q.len();
        let h = DMatrix::from_fn(n, n, |a, b| 0.5 * (q[a].dot(&aq[b]) + q[b].dot(&aq[a])));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut values = Vec::with_capacity(n);
        let mut fields = Vec::with_capacity(n);
        let mut residuals = Vec::with_capacity(n);
        for &col in &order {
            let theta = eig.eigenvalues[col];
            let mut v = VelocityField::zeros(d);
            let mut av = VelocityField::zeros(d);
            for a in 0..n {
                let c = eig.eigenvectors[(a, col)];
                v.axpy(c, &q[a]);
                av.axpy(c, &aq[a]);
            }
            let norm = v.norm_h();
            v.scale(1.0 / norm);
            av.scale(1.0 / norm);
            av.axpy(-theta, &v);
            values.push(theta);
            residuals.push(av.norm_h() / theta.abs().max(f64::MIN_POSITIVE));
            fields.push(v);
        }
        // Ritz values settle long before the vectors do; judge by residuals.
        let worst = residuals[..k].iter().fold(0.0f64, |a, &b| a.max(b));
        if worst <= RESIDUAL_TOL {
            fields.truncate(k);
            values.truncate(k);
            residuals.truncate(k);
            for f in &mut fields {
                orient(f);
            }
            return Ok(StokesSpectrum { values, fields, residuals, iterations: sweep });
        }
        x = fields;
    }
    Err(Error::NoConvergence { solver: "Stokes eigenpairs", iterations: MAX_SWEEPS, residual: f64::NAN, target: RESIDUAL_TOL })
}

/// Fixes the sign so the largest face value is positive.
fn orient(v: &mut VelocityField) {
    let mut best = 0.0f64;
    for &x in v.ux.iter().chain(&v.uy) {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        v.scale(-1.0);
    }
}

/// Smallest eigenvalue of `A_h`.
pub fn ground_eigenvalue(ws: &OperatorWorkspace) -> Result<f64> {
    Ok(stokes_eigenpairs(ws, 1)?.values[0])
}
