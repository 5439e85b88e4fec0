//! Direct solvers for `(sigma + gamma * T)` where `T` is a separable
//! second-difference operator: an orthonormal sine/cosine transform in y
//! and a tridiagonal solve per mode in x.

use std::f64::consts::PI;

/// Boundary treatment of a one-dimensional line of unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Line {
    /// Cell centres with zero-flux walls.
    NeumannCells,
    /// Cell centres with a zero wall value halfway to the ghost.
    DirichletCells,
    /// Interior nodes between two zero boundary nodes.
    DirichletNodes,
}

impl Line {
    fn end_correction(self) -> f64 {
        match self {
            Line::NeumannCells => -1.0,
            Line::DirichletCells => 1.0,
            Line::DirichletNodes => 0.0,
        }
    }
}

/// Orthonormal eigenbasis of the 1D operator, row `k` holds mode `k`.
#[derive(Clone, Debug)]
pub(crate) struct Basis {
    pub n: usize,
    pub q: Vec<f64>,
    pub eig: Vec<f64>,
}

impl Basis {
    pub fn new(line: Line, n: usize, h: f64) -> Self {
        let mut q = vec![0.0; n * n];
        let mut eig = vec![0.0; n];
        let nf = n as f64;
        let s = |x: f64| 4.0 / (h * h) * x.sin().powi(2);
        for k in 0..n {
            let kf = k as f64;
            match line {
                Line::NeumannCells => {
                    let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    for j in 0..n {
                        q[k * n + j] = c * (PI * kf * (j as f64 + 0.5) / nf).cos();
                    }
                    eig[k] = s(PI * kf / (2.0 * nf));
                }
                Line::DirichletCells => {
                    let kk = kf + 1.0;
                    let c = if k + 1 == n { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    for j in 0..n {
                        q[k * n + j] = c * (PI * kk * (j as f64 + 0.5) / nf).sin();
                    }
                    eig[k] = s(PI * kk / (2.0 * nf));
                }
                Line::DirichletNodes => {
                    let np = nf + 1.0;
                    let c = (2.0 / np).sqrt();
                    for j in 0..n {
                        q[k * n + j] = c * (PI * (kf + 1.0) * (j as f64 + 1.0) / np).sin();
                    }
                    eig[k] = s(PI * (kf + 1.0) / (2.0 * np));
                }
            }
        }
        Self { n, q, eig }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Separable {
    pub y: Basis,
    pub x_line: Line,
    pub nxp: usize,
    pub h: f64,
}

impl Separable {
    pub fn new(x_line: Line, nxp: usize, y_line: Line, nyp: usize, h: f64) -> Self {
        Self { y: Basis::new(y_line, nyp, h), x_line, nxp, h }
    }

    pub fn len(&self) -> usize {
        self.nxp * self.y.n
    }

    fn transform(&self, data: &[f64], inverse: bool) -> Vec<f64> {
        let (n, w) = (self.y.n, self.nxp);
        let mut out = vec![0.0; n * w];
        for k in 0..n {
            for j in 0..n {
                let c = if inverse { self.y.q[j * n + k] } else { self.y.q[k * n + j] };
                if c == 0.0 {
                    continue;
                }
                let src = &data[j * w..(j + 1) * w];
                let dst = &mut out[k * w..(k + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
        out
    }

    /// Solves `(sigma + gamma * T) x = b`, data laid out row-major with x
    /// fastest. A singular zero mode (pure Neumann, `sigma = 0`) is solved
    /// in the mean-zero complement.
    pub fn solve(&self, b: &[f64], sigma: f64, gamma: f64) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.len());
        let w = self.nxp;
        let mut hat = self.transform(b, false);
        let inv_h2 = 1.0 / (self.h * self.h);
        let off = -gamma * inv_h2;
        let end = self.x_line.end_correction() * inv_h2;
        let mut cp = vec![0.0; w];
        for k in 0..self.y.n {
            let row = &mut hat[k * w..(k + 1) * w];
            let shift = sigma + gamma * self.y.eig[k];
            if self.x_line == Line::NeumannCells && shift == 0.0 {
                neumann_zero_mode(row, gamma * inv_h2);
                continue;
            }
            let diag = |i: usize| {
                let mut d = 2.0 * inv_h2;
                if i == 0 {
                    d += end;
                }
                if i + 1 == w {
                    d += end;
                }
                shift + gamma * d
            };
            thomas(row, diag, off, &mut cp);
        }
        self.transform(&hat, true)
    }
}

/// Constant off-diagonal tridiagonal solve, in place.
fn thomas(rhs: &mut [f64], diag: impl Fn(usize) -> f64, off: f64, cp: &mut [f64]) {
    let n = rhs.len();
    if n == 0 {
        return;
    }
    let mut m = diag(0);
    cp[0] = off / m;
    rhs[0] /= m;
    for i in 1..n {
        m = diag(i) - off * cp[i - 1];
        cp[i] = off / m;
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= cp[i] * rhs[i + 1];
    }
}

/// `c * (x_{i-1} - 2 x_i + x_{i+1})` with zero-flux ends equals `-rhs`, via
/// accumulated fluxes; the mean of `rhs` is discarded and the result has
/// zero mean.
fn neumann_zero_mode(rhs: &mut [f64], c: f64) {
    let n = rhs.len();
    let mean = rhs.iter().sum::<f64>() / n as f64;
    let mut flux = 0.0;
    let mut x = 0.0;
    let mut xs = Vec::with_capacity(n);
    xs.push(0.0);
    for r in rhs.iter().take(n - 1) {
        flux += r - mean;
        x -= flux / c;
        xs.push(x);
    }
    let xm = xs.iter().sum::<f64>() / n as f64;
    for (r, x) in rhs.iter_mut().zip(xs) {
        *r = x - xm;
    }
}
