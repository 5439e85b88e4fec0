use super::{DomainSpec, VelocityField};
use rand::Rng;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldTexture {
    /// A handful of low sine modes of the stream function.
    Smooth,
    /// Independent stream-function values at every interior node.
    White,
    Mixed,
}

/// Random admissible (divergence-free, zero boundary) field with unit H norm.
pub fn random_admissible<R: Rng + ?Sized>(d: &DomainSpec, rng: &mut R, texture: FieldTexture) -> VelocityField {
    let (nx, ny) = (d.nx, d.ny);
    let mut psi = vec![0.0; (nx + 1) * (ny + 1)];
    if texture != FieldTexture::White {
        let modes_x = (nx - 1).clamp(1, 12);
        let modes_y = (ny - 1).clamp(1, 6);
        let width = 2.0 * d.half_width();
        for a in 1..=modes_x {
            for b in 1..=modes_y {
                let c: f64 = rng.gen_range(-1.0..1.0) / (a * a + b * b) as f64;
                for j in 1..ny {
                    let sy = (b as f64 * PI * d.y_face(j) / d.ly).sin();
                    for i in 1..nx {
                        let sx = (a as f64 * PI * (d.x_face(i) + d.half_width()) / width).sin();
                        psi[i + j * (nx + 1)] += c * sx * sy;
                    }
                }
            }
        }
        normalise(&mut psi, d);
    }
    if texture != FieldTexture::Smooth {
        let weight = if texture == FieldTexture::White { 1.0 } else { 0.3 };
        let mut white = vec![0.0; psi.len()];
        for j in 1..ny {
            for i in 1..nx {
                white[i + j * (nx + 1)] = rng.gen_range(-1.0..1.0);
            }
        }
        normalise(&mut white, d);
        for (p, w) in psi.iter_mut().zip(&white) {
            *p += weight * w;
        }
    }
    let mut v = VelocityField::from_stream_function(*d, &psi);
    let n = v.norm_h();
    if n > 0.0 {
        v.scale(1.0 / n);
    }
    v
}

fn normalise(psi: &mut [f64], d: &DomainSpec) {
    let n = VelocityField::from_stream_function(*d, psi).norm_h();
    if n > 0.0 {
        psi.iter_mut().for_each(|p| *p /= n);
    }
}
