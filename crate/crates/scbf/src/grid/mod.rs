//! Staggered (MAC) grids on the channel `(-m, m) x (0, Ly)`, discrete velocity
//! fields, their norms, and the maps between nested domains.
//!
//! Layout: `ux` sits on vertical faces, `(nx + 1) * ny` values indexed
//! `i + j * (nx + 1)`; `uy` sits on horizontal faces, `nx * (ny + 1)` values
//! indexed `i + j * nx`. Faces on the domain boundary carry the no-slip
//! condition and are zero for admissible fields.

mod sample;
pub mod snapshot;

pub use sample::{random_admissible, FieldTexture};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainSpec {
    pub m: u32,
    pub ly: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    let q = num / den;
    let k = q.round();
    if k >= 1.0 && (q - k).abs() <= 1e-9 * k.max(1.0) {
        Some(k as usize)
    } else {
        None
    }
}

impl DomainSpec {
    pub fn new(m: u32, ly: f64, h: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("half width m must be at least 1".into()));
        }
        if !(h.is_finite() && h > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::Domain(format!("need positive finite Ly and h, got Ly={ly}, h={h}")));
        }
        let width = 2.0 * m as f64;
        let nx = integer_ratio(width, h).ok_or_else(|| {
            Error::Domain(format!("spacing h={h} does not divide the channel width 2m={width}"))
        })?;
        let ny = integer_ratio(ly, h)
            .ok_or_else(|| Error::Domain(format!("spacing h={h} does not divide the height Ly={ly}")))?;
        Ok(Self { m, ly, h, nx, ny })
    }

    pub fn n_ux(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_uy(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn half_width(&self) -> f64 {
        self.m as f64
    }

    /// x coordinate of vertical face column `i`.
    pub fn x_face(&self, i: usize) -> f64 {
        -self.half_width() + i as f64 * self.h
    }

    pub fn x_center(&self, i: usize) -> f64 {
        -self.half_width() + (i as f64 + 0.5) * self.h
    }

    pub fn y_face(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h
    }

    fn same_cells(&self, other: &DomainSpec) -> bool {
        self.h == other.h && self.ly == other.ly && self.ny == other.ny
    }

    /// Column offset of `self` inside the larger grid `outer`.
    pub fn offset_in(&self, outer: &DomainSpec) -> Result<usize> {
        if !self.same_cells(outer) {
            return Err(Error::GridMismatch(format!(
                "h/Ly differ: ({}, {}) vs ({}, {})",
                self.h, self.ly, outer.h, outer.ly
            )));
        }
        if self.m > outer.m {
            return Err(Error::GridMismatch(format!(
                "domain m={} does not fit inside m={}",
                self.m, outer.m
            )));
        }
        if (outer.nx - self.nx) % 2 != 0 {
            return Err(Error::GridMismatch("subgrid is not node aligned".into()));
        }
        Ok((outer.nx - self.nx) / 2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub domain: DomainSpec,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(domain: DomainSpec) -> Self {
        Self {
            domain,
            ux: vec![0.0; domain.n_ux()],
            uy: vec![0.0; domain.n_uy()],
        }
    }

    pub fn from_parts(domain: DomainSpec, ux: Vec<f64>, uy: Vec<f64>) -> Result<Self> {
        if ux.len() != domain.n_ux() || uy.len() != domain.n_uy() {
            return Err(Error::Invalid(format!(
                "face arrays have lengths ({}, {}), expected ({}, {})",
                ux.len(),
                uy.len(),
                domain.n_ux(),
                domain.n_uy()
            )));
        }
        Ok(Self { domain, ux, uy })
    }

    #[inline]
    pub fn ix(&self, i: usize, j: usize) -> usize {
        i + j * (self.domain.nx + 1)
    }

    #[inline]
    pub fn iy(&self, i: usize, j: usize) -> usize {
        i + j * self.domain.nx
    }

    pub fn check_same_grid(&self, other: &VelocityField) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.domain, other.domain)));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.ux.iter().chain(&self.uy).all(|&x| x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.ux.iter().chain(&self.uy).all(|x| x.is_finite())
    }

    /// Largest absolute value on a boundary face.
    pub fn boundary_defect(&self) -> f64 {
        let d = self.domain;
        let mut worst = 0.0f64;
        for j in 0..d.ny {
            worst = worst.max(self.ux[self.ix(0, j)].abs()).max(self.ux[self.ix(d.nx, j)].abs());
        }
        for i in 0..d.nx {
            worst = worst.max(self.uy[self.iy(i, 0)].abs()).max(self.uy[self.iy(i, d.ny)].abs());
        }
        worst
    }

    pub fn zero_boundary(&mut self) {
        let d = self.domain;
        for j in 0..d.ny {
            let (a, b) = (self.ix(0, j), self.ix(d.nx, j));
            self.ux[a] = 0.0;
            self.ux[b] = 0.0;
        }
        for i in 0..d.nx {
            let (a, b) = (self.iy(i, 0), self.iy(i, d.ny));
            self.uy[a] = 0.0;
            self.uy[b] = 0.0;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.ux.iter_mut().chain(self.uy.iter_mut()).for_each(|x| *x *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &VelocityField) {
        debug_assert_eq!(self.domain, x.domain);
        for (s, v) in self.ux.iter_mut().zip(&x.ux) {
            *s += a * v;
        }
        for (s, v) in self.uy.iter_mut().zip(&x.uy) {
            *s += a * v;
        }
    }

    pub fn add(&self, x: &VelocityField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, x);
        out
    }

    pub fn sub(&self, x: &VelocityField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, x);
        out
    }

    /// Trapezoid-weighted face inner product; boundary faces count half.
    pub fn dot(&self, other: &VelocityField) -> f64 {
        debug_assert_eq!(self.domain, other.domain);
        let d = self.domain;
        let mut s = 0.0;
        for j in 0..d.ny {
            let row = j * (d.nx + 1);
            s += 0.5 * (self.ux[row] * other.ux[row] + self.ux[row + d.nx] * other.ux[row + d.nx]);
            for k in row + 1..row + d.nx {
                s += self.ux[k] * other.ux[k];
            }
        }
        let top = d.ny * d.nx;
        for i in 0..d.nx {
            s += 0.5 * (self.uy[i] * other.uy[i] + self.uy[top + i] * other.uy[top + i]);
        }
        for k in d.nx..top {
            s += self.uy[k] * other.uy[k];
        }
        s * d.cell_area()
    }

    /// Squared magnitude per cell, each component averaged in the
    /// root-mean-square sense over its two faces.
    pub fn cell_magnitudes_sq(&self) -> Vec<f64> {
        let d = self.domain;
        let mut out = Vec::with_capacity(d.n_cells());
        for j in 0..d.ny {
            for i in 0..d.nx {
                let a = self.ux[self.ix(i, j)];
                let b = self.ux[self.ix(i + 1, j)];
                let c = self.uy[self.iy(i, j)];
                let e = self.uy[self.iy(i, j + 1)];
                out.push(0.5 * (a * a + b * b) + 0.5 * (c * c + e * e));
            }
        }
        out
    }

    pub fn norm_h(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_h_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm_lp(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "Lp norm needs p >= 1");
        if p == 2.0 {
            return self.norm_h();
        }
        let half = 0.5 * p;
        let s: f64 = self.cell_magnitudes_sq().iter().map(|&q| q.powf(half)).sum();
        (s * self.domain.cell_area()).powf(1.0 / p)
    }

    /// Gradient seminorm squared; tangential walls use the ghost value `-u`.
    pub fn norm_v_sq(&self) -> f64 {
        let d = self.domain;
        let (nx, ny) = (d.nx, d.ny);
        let mut s = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let diff = self.ux[self.ix(i + 1, j)] - self.ux[self.ix(i, j)];
                s += diff * diff;
            }
        }
        for i in 1..nx {
            let b = self.ux[self.ix(i, 0)];
            let t = self.ux[self.ix(i, ny - 1)];
            s += 2.0 * (b * b + t * t);
            for j in 0..ny - 1 {
                let diff = self.ux[self.ix(i, j + 1)] - self.ux[self.ix(i, j)];
                s += diff * diff;
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                let diff = self.uy[self.iy(i, j + 1)] - self.uy[self.iy(i, j)];
                s += diff * diff;
            }
        }
        for j in 1..ny {
            let l = self.uy[self.iy(0, j)];
            let r = self.uy[self.iy(nx - 1, j)];
            s += 2.0 * (l * l + r * r);
            for i in 0..nx - 1 {
                let diff = self.uy[self.iy(i + 1, j)] - self.uy[self.iy(i, j)];
                s += diff * diff;
            }
        }
        s
    }

    pub fn norm_v(&self) -> f64 {
        self.norm_v_sq().sqrt()
    }

    /// Largest cell-centred speed.
    pub fn max_speed(&self) -> f64 {
        self.cell_magnitudes_sq().into_iter().fold(0.0f64, f64::max).sqrt()
    }

    pub fn max_abs_face(&self) -> f64 {
        self.ux.iter().chain(&self.uy).fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    /// Discrete divergence per cell.
    pub fn divergence(&self) -> ScalarField {
        let d = self.domain;
        let inv_h = 1.0 / d.h;
        let mut values = Vec::with_capacity(d.n_cells());
        for j in 0..d.ny {
            for i in 0..d.nx {
                let dx = self.ux[self.ix(i + 1, j)] - self.ux[self.ix(i, j)];
                let dy = self.uy[self.iy(i, j + 1)] - self.uy[self.iy(i, j)];
                values.push((dx + dy) * inv_h);
            }
        }
        ScalarField { domain: d, values }
    }

    /// Field built as the discrete curl of a nodal stream function
    /// `psi[i + j * (nx + 1)]`; exactly divergence free, and admissible when
    /// `psi` vanishes on boundary nodes.
    pub fn from_stream_function(domain: DomainSpec, psi: &[f64]) -> Self {
        let (nx, ny) = (domain.nx, domain.ny);
        assert_eq!(psi.len(), (nx + 1) * (ny + 1));
        let node = |i: usize, j: usize| psi[i + j * (nx + 1)];
        let inv_h = 1.0 / domain.h;
        let mut f = Self::zeros(domain);
        for j in 0..ny {
            for i in 0..=nx {
                let k = f.ix(i, j);
                f.ux[k] = (node(i, j + 1) - node(i, j)) * inv_h;
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                let k = f.iy(i, j);
                f.uy[k] = -(node(i + 1, j) - node(i, j)) * inv_h;
            }
        }
        f
    }

    /// Stream function sampled at the nodes, `psi(x, y)`, then curled.
    pub fn from_stream_fn<F: Fn(f64, f64) -> f64>(domain: DomainSpec, psi: F) -> Self {
        let (nx, ny) = (domain.nx, domain.ny);
        let mut nodes = vec![0.0; (nx + 1) * (ny + 1)];
        for j in 1..ny {
            for i in 1..nx {
                nodes[i + j * (nx + 1)] = psi(domain.x_face(i), domain.y_face(j));
            }
        }
        Self::from_stream_function(domain, &nodes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub domain: DomainSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: DomainSpec) -> Self {
        Self { domain, values: vec![0.0; domain.n_cells()] }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn remove_mean(&mut self) {
        let m = self.mean();
        self.values.iter_mut().for_each(|v| *v -= m);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.domain.cell_area()
    }

    /// Face gradient; boundary faces are left at zero.
    pub fn gradient(&self) -> VelocityField {
        let d = self.domain;
        let inv_h = 1.0 / d.h;
        let c = |i: usize, j: usize| self.values[i + j * d.nx];
        let mut g = VelocityField::zeros(d);
        for j in 0..d.ny {
            for i in 1..d.nx {
                let k = g.ix(i, j);
                g.ux[k] = (c(i, j) - c(i - 1, j)) * inv_h;
            }
        }
        for j in 1..d.ny {
            for i in 0..d.nx {
                let k = g.iy(i, j);
                g.uy[k] = (c(i, j) - c(i, j - 1)) * inv_h;
            }
        }
        g
    }
}

/// Zero extension of `v` from a subdomain onto `target`.
pub fn null_expand(v: &VelocityField, target: &DomainSpec) -> Result<VelocityField> {
    let src = v.domain;
    let off = src.offset_in(target)?;
    let mut out = VelocityField::zeros(*target);
    for j in 0..src.ny {
        let from = v.ix(0, j);
        let to = out.ix(off, j);
        out.ux[to..to + src.nx + 1].copy_from_slice(&v.ux[from..from + src.nx + 1]);
    }
    for j in 0..=src.ny {
        let from = v.iy(0, j);
        let to = out.iy(off, j);
        out.uy[to..to + src.nx].copy_from_slice(&v.uy[from..from + src.nx]);
    }
    Ok(out)
}

/// Copy of `v` on the subdomain `target`, with the new boundary faces zeroed.
/// The result is generally not divergence free; callers project it.
pub fn restrict(v: &VelocityField, target: &DomainSpec) -> Result<VelocityField> {
    let off = target.offset_in(&v.domain)?;
    let mut out = VelocityField::zeros(*target);
    for j in 0..target.ny {
        let from = v.ix(off, j);
        let to = out.ix(0, j);
        out.ux[to..to + target.nx + 1].copy_from_slice(&v.ux[from..from + target.nx + 1]);
    }
    for j in 0..=target.ny {
        let from = v.iy(off, j);
        let to = out.iy(0, j);
        out.uy[to..to + target.nx].copy_from_slice(&v.uy[from..from + target.nx]);
    }
    out.zero_boundary();
    Ok(out)
}
