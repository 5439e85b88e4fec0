use crate::error::{Error, Result};

pub(crate) trait KrylovVector: Clone {
    fn inner(&self, other: &Self) -> f64;
    fn axpy(&mut self, a: f64, x: &Self);
    /// `self = x + b * self`
    fn xpby(&mut self, x: &Self, b: f64);
}

impl KrylovVector for Vec<f64> {
    fn inner(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| a * b).sum()
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        self.iter_mut().zip(x).for_each(|(s, v)| *s += a * v);
    }
    fn xpby(&mut self, x: &Self, b: f64) {
        self.iter_mut().zip(x).for_each(|(s, v)| *s = v + b * *s);
    }
}

impl KrylovVector for crate::grid::VelocityField {
    fn inner(&self, other: &Self) -> f64 {
        self.dot(other)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        crate::grid::VelocityField::axpy(self, a, x)
    }
    fn xpby(&mut self, x: &Self, b: f64) {
        for (s, v) in self.ux.iter_mut().zip(&x.ux) {
            *s = v + b * *s;
        }
        for (s, v) in self.uy.iter_mut().zip(&x.uy) {
            *s = v + b * *s;
        }
    }
}

pub(crate) struct Outcome<V> {
    pub x: V,
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned conjugate gradients started from `M b`. Stops once
/// `size(r) <= target`.
pub(crate) fn pcg<V: KrylovVector>(
    solver: &'static str,
    apply: impl Fn(&V) -> Result<V>,
    precondition: impl Fn(&V) -> Result<V>,
    size: impl Fn(&V) -> f64,
    b: &V,
    target: f64,
    max_iters: usize,
) -> Result<Outcome<V>> {
    let mut x = precondition(b)?;
    let mut r = b.clone();
    r.axpy(-1.0, &apply(&x)?);
    let mut res = size(&r);
    if res <= target {
        return Ok(Outcome { x, iterations: 1, residual: res });
    }
    let mut z = precondition(&r)?;
    let mut p = z.clone();
    let mut rz = r.inner(&z);
    for it in 1..=max_iters {
        let q = apply(&p)?;
        let pq = p.inner(&q);
        if !(pq > 0.0) || !rz.is_finite() {
            return Err(Error::NoConvergence { solver, iterations: it, residual: res, target });
        }
        let a = rz / pq;
        x.axpy(a, &p);
        r.axpy(-a, &q);
        res = size(&r);
        if res <= target {
            return Ok(Outcome { x, iterations: it + 1, residual: res });
        }
        z = precondition(&r)?;
        let rz_new = r.inner(&z);
        p.xpby(&z, rz_new / rz);
        rz = rz_new;
    }
    Err(Error::NoConvergence { solver, iterations: max_iters, residual: res, target })
}
