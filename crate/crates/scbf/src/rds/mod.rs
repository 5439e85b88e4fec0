//! Random dynamics on top of the solver: the cocycle, pullback ensembles,
//! the absorbing radius and tail masses.

use crate::error::{Error, Result};
use crate::grid::{random_admissible, FieldTexture, VelocityField};
use crate::noise::OuPath;
use crate::solver::{advance, System};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Constant `M` of the absorbing functional. Fitted by
/// [`calibrate_absorbing_constant`] on seeds 1000..1010 of the reference
/// absorption regime and frozen here.
pub const DEFAULT_ABSORBING_M: f64 = 3.75e-4;

/// `Φ(t, θ_base ω) x`: transform, integrate on `[base, base + t]`, reconstruct.
/// `t = 0` returns `x` itself.
pub fn cocycle(sys: &System, path: &OuPath, base: f64, t: f64, dt: f64, x: &VelocityField) -> Result<VelocityField> {
    if t < 0.0 {
        return Err(Error::Invalid(format!("cocycle time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(x.clone());
    }
    let v0 = x.sub(&sys.z(&path.values_at(base)?));
    let v = advance(sys, &v0, path, base, base + t, dt)?;
    sys.reconstruct_u(&v, path, base + t)
}

/// Initial conditions of a pullback ensemble.
#[derive(Clone, Debug)]
pub enum IcEnsemble {
    Fields(Vec<VelocityField>),
    /// `count` fields on the sphere of radius `radius`.
    Ball { radius: f64, count: usize, texture: FieldTexture },
}

#[derive(Clone, Debug)]
pub struct PullbackConfig {
    pub pullback_times: Vec<f64>,
    pub ics: IcEnsemble,
    pub seed: u64,
    pub dt: f64,
}

const IC_SALT: u64 = 0x1c5e_ed00_b411_0001;

impl PullbackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pullback_times.is_empty() || self.pullback_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("pullback times must be a non-empty increasing list".into()));
        }
        if self.pullback_times[0] < 0.0 {
            return Err(Error::Invalid("pullback times must be non-negative".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Invalid("dt must be positive".into()));
        }
        match &self.ics {
            IcEnsemble::Fields(f) if f.is_empty() => Err(Error::Invalid("empty initial ensemble".into())),
            IcEnsemble::Fields(f) if f.iter().any(|x| x.domain != f[0].domain) => {
                Err(Error::GridMismatch("initial fields live on different grids".into()))
            }
            IcEnsemble::Ball { count: 0, .. } => Err(Error::Invalid("ball ensemble needs count >= 1".into())),
            IcEnsemble::Ball { radius, .. } if !(*radius >= 0.0) => Err(Error::Invalid("ball radius must be >= 0".into())),
            _ => Ok(()),
        }
    }

    pub fn t_max(&self) -> f64 {
        self.pullback_times.last().copied().unwrap_or(0.0)
    }

    /// The ensemble on `sys`'s domain; ball members depend only on the seed.
    pub fn initial_states(&self, sys: &System) -> Result<Vec<VelocityField>> {
        match &self.ics {
            IcEnsemble::Fields(f) => {
                for x in f {
                    if x.domain != sys.ws.domain {
                        return Err(Error::GridMismatch("initial field is not on the system grid".into()));
                    }
                }
                Ok(f.clone())
            }
            IcEnsemble::Ball { radius, count, texture } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ IC_SALT);
                Ok((0..*count)
                    .map(|_| random_admissible(&sys.ws.domain, &mut rng, *texture).scaled(*radius))
                    .collect())
            }
        }
    }
}

/// Largest pairwise H-distance.
pub fn diameter(states: &[VelocityField]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            d = d.max(a.sub(b).norm_h());
        }
    }
    d
}

/// Level below which differences of trajectories are solver noise.
pub fn roundoff_floor(sys: &System, scale: f64) -> f64 {
    (1e3 * f64::EPSILON).max(10.0 * sys.ws.stokes_tol) * scale
}

#[derive(Clone, Debug)]
pub struct PullbackCloud {
    pub t: f64,
    /// `Φ(t, θ_{-t} ω) x` for each initial `x`.
    pub states: Vec<VelocityField>,
    pub diameter: f64,
}

/// Evolves every initial state from `-t` to `0` on `path`.
pub fn pullback_evolve(sys: &System, path: &OuPath, cfg: &PullbackConfig, t: f64) -> Result<PullbackCloud> {
    let ics = cfg.initial_states(sys)?;
    pullback_states(sys, path, &ics, t, cfg.dt)
}

pub fn pullback_states(sys: &System, path: &OuPath, ics: &[VelocityField], t: f64, dt: f64) -> Result<PullbackCloud> {
    let states = ics
        .par_iter()
        .map(|x| cocycle(sys, path, -t, t, dt, x))
        .collect::<Result<Vec<_>>>()?;
    let diameter = diameter(&states);
    Ok(PullbackCloud { t, states, diameter })
}

#[derive(Clone, Debug, Serialize)]
pub struct PullbackReport {
    pub seed: u64,
    pub t_list: Vec<f64>,
    pub initial_diameter: f64,
    pub diameters: Vec<f64>,
    /// Largest smooth tail mass of the cloud at `k = m/2`.
    pub tail_masses: Vec<f64>,
    pub floor: f64,
    #[serde(skip)]
    pub last: Option<PullbackCloud>,
}

impl PullbackReport {
    /// Final diameter over initial diameter.
    pub fn contraction(&self) -> f64 {
        match self.diameters.last() {
            Some(&d) if self.initial_diameter > 0.0 => d / self.initial_diameter,
            _ => 0.0,
        }
    }

    /// Nonincreasing within relative `slack`, ignoring values under the floor.
    pub fn monotone(&self, slack: f64) -> bool {
        self.diameters
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + slack) || w[1] <= self.floor)
    }
}

/// All pullback times of `cfg`; `path` must cover `[-t_max, 0]`.
pub fn pullback_report(sys: &System, path: &OuPath, cfg: &PullbackConfig) -> Result<PullbackReport> {
    cfg.validate()?;
    let ics = cfg.initial_states(sys)?;
    let k = sys.ws.domain.half_width() / 2.0;
    let mut diameters = Vec::new();
    let mut tail_masses = Vec::new();
    let mut scale: f64 = ics.iter().map(|x| x.norm_h()).fold(0.0, f64::max);
    let mut last = None;
    for &t in &cfg.pullback_times {
        let cloud = pullback_states(sys, path, &ics, t, cfg.dt)?;
        scale = cloud.states.iter().map(|x| x.norm_h()).fold(scale, f64::max);
        diameters.push(cloud.diameter);
        tail_masses.push(cloud.states.iter().map(|x| tail_mass(x, k).smooth).fold(0.0, f64::max));
        last = Some(cloud);
    }
    Ok(PullbackReport {
        seed: cfg.seed,
        t_list: cfg.pullback_times.clone(),
        initial_diameter: diameter(&ics),
        diameters,
        tail_masses,
        floor: roundoff_floor(sys, scale),
        last,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AbsorbingEstimate {
    /// `ℒ`.
    pub l_hat: f64,
    /// `ℒ*² = ℒ + Σ σ_k² ‖g_k‖² y_k(0)²`.
    pub l_star_sq: f64,
    /// `(ζ, integrand)` on the path lattice.
    pub integrand: Vec<(f64, f64)>,
    pub horizon: f64,
    pub m_const: f64,
    pub seed: u64,
}

/// `ℒ = M ∫_{-T}^0 e^{αζ} [‖f‖² + Σ_k (‖G_k‖² + ‖A G_k‖²) y_k² + |y_k|^p ‖G_k‖^p_{L^p}
/// + |y_k|^{r+1} ‖G_k‖^{r+1}_{L^{r+1}}] dζ` with `G_k = σ_k g_k`, `p = 2(r+1)/(r-1)`.
/// Exponential weights are integrated exactly on each lattice interval.
pub fn absorbing_radius(sys: &System, path: &OuPath, m_const: f64, horizon: f64) -> Result<AbsorbingEstimate> {
    let r = sys.params.r;
    if r <= 1.0 {
        return Err(Error::Invalid(
            "the absorbing radius needs r > 1; for r = 1 the estimate is singular".into(),
        ));
    }
    if !(horizon >= 0.0) || !path.covers(-horizon, 0.0) {
        return Err(Error::Invalid(format!("noise path does not cover [-{horizon}, 0]")));
    }
    let alpha = sys.params.alpha;
    let p = 2.0 * (r + 1.0) / (r - 1.0);
    let f_sq = sys.f.norm_h_sq();
    let coeffs: Vec<[f64; 3]> = sys
        .noise
        .modes
        .iter()
        .map(|m| {
            let g = m.g.scaled(m.sigma);
            let ag = m.ag.scaled(m.sigma);
            [g.norm_h_sq() + ag.norm_h_sq(), g.norm_lp(p).powf(p), g.norm_lp(r + 1.0).powf(r + 1.0)]
        })
        .collect();
    let integrand_at = |t: f64| -> Result<f64> {
        let y = path.values_at(t)?;
        let mut s = f_sq;
        for (c, &yk) in coeffs.iter().zip(&y) {
            let a = yk.abs();
            s += c[0] * a * a + c[1] * a.powf(p) + c[2] * a.powf(r + 1.0);
        }
        Ok(s)
    };
    let dt = path.dt;
    let n = crate::solver::steps_between(-horizon, 0.0, dt)?;
    let mut integrand = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = -horizon + i as f64 * dt;
        integrand.push((t, integrand_at(t)?));
    }
    let weight = |a: f64, b: f64| if alpha == 0.0 { b - a } else { ((alpha * b).exp() - (alpha * a).exp()) / alpha };
    let mut integral = 0.0;
    for w in integrand.windows(2) {
        integral += weight(w[0].0, w[1].0) * 0.5 * (w[0].1 + w[1].1);
    }
    let l_hat = m_const * integral;
    let y0 = path.values_at(0.0)?;
    let g0: f64 = sys
        .noise
        .modes
        .iter()
        .zip(&y0)
        .map(|(m, &y)| m.sigma * m.sigma * m.g.norm_h_sq() * y * y)
        .sum();
    Ok(AbsorbingEstimate { l_hat, l_star_sq: l_hat + g0, integrand, horizon, m_const, seed: path.seed })
}

#[derive(Clone, Debug, Serialize)]
pub struct AbsorptionCheck {
    pub seed: u64,
    pub l_star_sq: f64,
    /// Entry time `𝒯` with `e^{-α𝒯} max‖x‖² = ℒ`.
    pub entry_time: f64,
    pub times: Vec<f64>,
    /// `max_x ‖v(0, -t)‖²` for each checked time.
    pub v_sq: Vec<f64>,
}

impl AbsorptionCheck {
    pub fn absorbed(&self) -> bool {
        self.v_sq.iter().all(|&v| v <= self.l_star_sq)
    }
}

/// Starts `count` fields on the sphere of radius `radius_factor·ℒ*` and checks
/// `‖v(0,-t)‖² <= ℒ*²` at `t = 𝒯 + offset` for each offset.
pub fn absorption_check(
    sys: &System,
    path: &OuPath,
    est: &AbsorbingEstimate,
    radius_factor: f64,
    count: usize,
    offsets: &[f64],
    dt: f64,
) -> Result<AbsorptionCheck> {
    let radius = radius_factor * est.l_star_sq.sqrt();
    let cfg = PullbackConfig {
        pullback_times: vec![1.0],
        ics: IcEnsemble::Ball { radius, count, texture: FieldTexture::Mixed },
        seed: est.seed,
        dt,
    };
    let ics = cfg.initial_states(sys)?;
    let alpha = sys.params.alpha;
    let entry_time = if est.l_hat > 0.0 && alpha > 0.0 {
        ((radius * radius / est.l_hat).ln() / alpha).max(0.0)
    } else {
        0.0
    };
    let t0 = (entry_time / dt).ceil() * dt;
    let mut times = Vec::new();
    let mut v_sq = Vec::new();
    for &off in offsets {
        let t = t0 + (off / dt).round() * dt;
        let v = ics
            .par_iter()
            .map(|x| {
                let v0 = x.sub(&sys.z(&path.values_at(-t)?));
                advance(sys, &v0, path, -t, 0.0, dt).map(|v| v.norm_h_sq())
            })
            .collect::<Result<Vec<_>>>()?;
        times.push(t);
        v_sq.push(v.into_iter().fold(0.0, f64::max));
    }
    Ok(AbsorptionCheck { seed: est.seed, l_star_sq: est.l_star_sq, entry_time, times, v_sq })
}

/// Smallest `M` (times `safety`) for which every calibration check is absorbed,
/// given checks computed with `M = 1`.
pub fn calibrate_absorbing_constant(runs: &[(AbsorbingEstimate, AbsorptionCheck)], safety: f64) -> f64 {
    let mut need: f64 = f64::MIN_POSITIVE;
    for (est, check) in runs {
        let noise_part = est.l_star_sq - est.l_hat;
        let unit = est.l_hat / est.m_const;
        for &v in &check.v_sq {
            if unit > 0.0 {
                need = need.max((v - noise_part) / unit);
            }
        }
    }
    safety * need
}

/// Quintic smoothstep: 0 on `[0, 1]`, 1 on `[2, ∞)`, `|ρ'| <= 15/8`.
pub fn cutoff(s: f64) -> f64 {
    let t = (s - 1.0).clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailMass {
    /// `Σ ρ(x²/k²) |v|² h²` over cells.
    pub smooth: f64,
    /// Mass where `|x| >= k`.
    pub hard: f64,
    /// Mass where `|x| >= √2 k`.
    pub hard_outer: f64,
}

/// Mass of `v` outside the strip `|x| < k` (streamwise coordinate).
pub fn tail_mass(v: &VelocityField, k: f64) -> TailMass {
    let d = &v.domain;
    let mags = v.cell_magnitudes_sq();
    let area = d.cell_area();
    let outer = std::f64::consts::SQRT_2 * k;
    let mut tm = TailMass { smooth: 0.0, hard: 0.0, hard_outer: 0.0 };
    for i in 0..d.nx {
        let x = d.x_center(i);
        let (rho, hard, hard_outer) = if k > 0.0 {
            (cutoff(x * x / (k * k)), x.abs() >= k, x.abs() >= outer)
        } else {
            (1.0, true, true)
        };
        let col: f64 = (0..d.ny).map(|j| mags[i + j * d.nx]).sum::<f64>() * area;
        tm.smooth += rho * col;
        if hard {
            tm.hard += col;
        }
        if hard_outer {
            tm.hard_outer += col;
        }
    }
    tm
}

#[cfg(test)]
mod tests;
