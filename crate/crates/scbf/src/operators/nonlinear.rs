use super::OperatorWorkspace;
use crate::error::Result;
use crate::grid::VelocityField;

/// Discretization of the advection term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvectionForm {
    /// `½[(u·∇)v - (u·∇)ᵀv]`; `b(u, v, v) = 0` exactly.
    SkewSymmetric,
    /// Plain centred `(u·∇)v`, kept as a negative control.
    Convective,
    Off,
}

/// Visits every coefficient of the centred stencil of `(u·∇)` acting on a
/// face field: `visit(f, g, c)` adds `c * a[g]` to output face `f`. Face
/// indices run over `ux` then `uy`. Only interior faces are outputs.
fn for_each_coefficient(u: &VelocityField, mut visit: impl FnMut(usize, usize, f64)) {
    let d = u.domain;
    let (nx, ny) = (d.nx, d.ny);
    let off = d.n_ux();
    let c = 0.5 / d.h;
    for j in 0..ny {
        for i in 1..nx {
            let f = u.ix(i, j);
            let uu = u.ux[f] * c;
            let vv = 0.25 * (u.uy[u.iy(i - 1, j)] + u.uy[u.iy(i, j)] + u.uy[u.iy(i - 1, j + 1)] + u.uy[u.iy(i, j + 1)]) * c;
            visit(f, u.ix(i + 1, j), uu);
            visit(f, u.ix(i - 1, j), -uu);
            if j + 1 < ny {
                visit(f, u.ix(i, j + 1), vv);
            } else {
                visit(f, f, -vv);
            }
            if j > 0 {
                visit(f, u.ix(i, j - 1), -vv);
            } else {
                visit(f, f, vv);
            }
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let k = u.iy(i, j);
            let f = off + k;
            let uu = 0.25 * (u.ux[u.ix(i, j - 1)] + u.ux[u.ix(i + 1, j - 1)] + u.ux[u.ix(i, j)] + u.ux[u.ix(i + 1, j)]) * c;
            let vv = u.uy[k] * c;
            visit(f, off + u.iy(i, j + 1), vv);
            visit(f, off + u.iy(i, j - 1), -vv);
            if i + 1 < nx {
                visit(f, off + u.iy(i + 1, j), uu);
            } else {
                visit(f, f, -uu);
            }
            if i > 0 {
                visit(f, off + u.iy(i - 1, j), -uu);
            } else {
                visit(f, f, uu);
            }
        }
    }
}

fn get(v: &VelocityField, g: usize) -> f64 {
    let n = v.ux.len();
    if g < n {
        v.ux[g]
    } else {
        v.uy[g - n]
    }
}

fn slot(v: &mut VelocityField, g: usize) -> &mut f64 {
    let n = v.ux.len();
    if g < n {
        &mut v.ux[g]
    } else {
        &mut v.uy[g - n]
    }
}

/// `(u·∇_h) a` on interior faces.
pub fn convect(u: &VelocityField, a: &VelocityField) -> VelocityField {
    let mut out = VelocityField::zeros(u.domain);
    for_each_coefficient(u, |f, g, c| *slot(&mut out, f) += c * get(a, g));
    out
}

/// Adjoint of [`convect`] in the face inner product, interior faces only.
pub fn convect_transpose(u: &VelocityField, b: &VelocityField) -> VelocityField {
    let mut out = VelocityField::zeros(u.domain);
    for_each_coefficient(u, |f, g, c| *slot(&mut out, g) += c * get(b, f));
    out.zero_boundary();
    out
}

pub struct Advection<'a> {
    pub(super) ws: &'a OperatorWorkspace,
    pub form: AdvectionForm,
}

impl Advection<'_> {
    /// `b_h(u, v, w)`.
    pub fn trilinear(&self, u: &VelocityField, v: &VelocityField, w: &VelocityField) -> f64 {
        match self.form {
            AdvectionForm::Off => 0.0,
            AdvectionForm::Convective => convect(u, v).dot(w),
            AdvectionForm::SkewSymmetric => {
                let x_vw = convect(u, v).dot(w);
                let x_wv = convect(u, w).dot(v);
                0.5 * (x_vw - x_wv)
            }
        }
    }

    /// The unprojected field representing `b_h(u, v, ·)`.
    pub fn raw(&self, u: &VelocityField, v: &VelocityField) -> VelocityField {
        match self.form {
            AdvectionForm::Off => VelocityField::zeros(u.domain),
            AdvectionForm::Convective => convect(u, v),
            AdvectionForm::SkewSymmetric => {
                let mut out = convect(u, v);
                out.axpy(-1.0, &convect_transpose(u, v));
                out.scale(0.5);
                out
            }
        }
    }

    /// `B_h(u, v) = P raw(u, v)`.
    pub fn apply(&self, u: &VelocityField, v: &VelocityField) -> Result<VelocityField> {
        self.ws.project(&self.raw(u, v))
    }
}

/// `|w_c|^{r-1}` per cell, with `|0|^0 = 1`.
fn cell_weights(w: &VelocityField, r: f64) -> Vec<f64> {
    let e = 0.5 * (r - 1.0);
    w.cell_magnitudes_sq()
        .into_iter()
        .map(|q| if r == 1.0 { 1.0 } else if q == 0.0 { 0.0 } else { q.powf(e) })
        .collect()
}

/// Averages a cell quantity onto faces (one-sided on walls).
fn cells_to_faces(w: &VelocityField, cells: &[f64], mut put: impl FnMut(bool, usize, f64)) {
    let d = w.domain;
    let (nx, ny) = (d.nx, d.ny);
    let cell = |i: usize, j: usize| cells[i + j * nx];
    for j in 0..ny {
        for i in 0..=nx {
            let a = if i == 0 {
                cell(0, j)
            } else if i == nx {
                cell(nx - 1, j)
            } else {
                0.5 * (cell(i - 1, j) + cell(i, j))
            };
            put(true, w.ix(i, j), a);
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let a = if j == 0 {
                cell(i, 0)
            } else if j == ny {
                cell(i, ny - 1)
            } else {
                0.5 * (cell(i, j - 1) + cell(i, j))
            };
            put(false, w.iy(i, j), a);
        }
    }
}

/// `|w|^{r-1} w` before projection: the gradient of
/// `h²/(r+1) Σ_c |w_c|^{r+1}` in the face inner product.
pub fn damping_raw(w: &VelocityField, r: f64) -> VelocityField {
    assert!(r >= 1.0, "damping exponent must be at least 1");
    let weights = cell_weights(w, r);
    let mut out = w.clone();
    cells_to_faces(w, &weights, |is_x, k, a| {
        if is_x {
            out.ux[k] *= a;
        } else {
            out.uy[k] *= a;
        }
    });
    out
}

/// Directional derivative of [`damping_raw`] at `w` along `d`.
pub fn damping_derivative_raw(w: &VelocityField, d: &VelocityField, r: f64) -> VelocityField {
    assert!(r >= 1.0, "damping exponent must be at least 1");
    let dom = w.domain;
    let weights = cell_weights(w, r);
    let mags = w.cell_magnitudes_sq();
    // (r-1)|w_c|^{r-3} Σ_{f in c} w_f d_f / 2, zero where w_c = 0
    let mut sens = vec![0.0; dom.n_cells()];
    if r != 1.0 {
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                let c = i + j * dom.nx;
                if mags[c] == 0.0 {
                    continue;
                }
                let (a, b) = (w.ix(i, j), w.ix(i + 1, j));
                let (p, q) = (w.iy(i, j), w.iy(i, j + 1));
                let dot = 0.5 * (w.ux[a] * d.ux[a] + w.ux[b] * d.ux[b] + w.uy[p] * d.uy[p] + w.uy[q] * d.uy[q]);
                sens[c] = (r - 1.0) * mags[c].powf(0.5 * (r - 3.0)) * dot;
            }
        }
    }
    let mut out = VelocityField::zeros(dom);
    cells_to_faces(w, &weights, |is_x, k, a| {
        if is_x {
            out.ux[k] = d.ux[k] * a;
        } else {
            out.uy[k] = d.uy[k] * a;
        }
    });
    cells_to_faces(w, &sens, |is_x, k, s| {
        if is_x {
            out.ux[k] += w.ux[k] * s;
        } else {
            out.uy[k] += w.uy[k] * s;
        }
    });
    out
}

/// Conservative `div_h(w ⊗ w)` on interior faces: normal fluxes at cell
/// centres, cross fluxes at nodes (zero on walls).
pub fn momentum_flux_divergence(w: &VelocityField) -> VelocityField {
    let d = w.domain;
    let (nx, ny) = (d.nx, d.ny);
    let ih = 1.0 / d.h;
    let uu = |i: usize, j: usize| {
        let a = 0.5 * (w.ux[w.ix(i, j)] + w.ux[w.ix(i + 1, j)]);
        a * a
    };
    let vv = |i: usize, j: usize| {
        let a = 0.5 * (w.uy[w.iy(i, j)] + w.uy[w.iy(i, j + 1)]);
        a * a
    };
    // node (i, j), 0 <= i <= nx, 0 <= j <= ny
    let uv = |i: usize, j: usize| {
        if i == 0 || i == nx || j == 0 || j == ny {
            return 0.0;
        }
        let u = 0.5 * (w.ux[w.ix(i, j - 1)] + w.ux[w.ix(i, j)]);
        let v = 0.5 * (w.uy[w.iy(i - 1, j)] + w.uy[w.iy(i, j)]);
        u * v
    };
    let mut out = VelocityField::zeros(d);
    for j in 0..ny {
        for i in 1..nx {
            let k = out.ix(i, j);
            out.ux[k] = (uu(i, j) - uu(i - 1, j) + uv(i, j + 1) - uv(i, j)) * ih;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let k = out.iy(i, j);
            out.uy[k] = (uv(i + 1, j) - uv(i, j) + vv(i, j) - vv(i, j - 1)) * ih;
        }
    }
    out
}
