//! Two-sided Ornstein-Uhlenbeck paths sampled exactly on a time lattice,
//! the shift flow on paths, spatial noise profiles and temperedness checks.

mod rng;

use crate::error::{Error, Result};
use crate::grid::{restrict, DomainSpec, VelocityField};
use crate::operators::{spectrum::stokes_eigenpairs, OperatorWorkspace};
use rng::NormalStream;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NoiseKind {
    /// Independent scalar OU processes with their own damping.
    ScalarOu,
    /// Stokes eigenmodes, each damped by `mu * lambda_k + eta`.
    StokesOuTruncated { eta: f64 },
}

#[derive(Clone, Debug)]
pub struct NoiseMode {
    /// Divergence-free, zero-boundary profile on the largest domain.
    pub profile: VelocityField,
    pub sigma: f64,
    pub eta: f64,
}

#[derive(Clone, Debug)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub modes: Vec<NoiseMode>,
}

impl NoiseSpec {
    pub fn scalar(profile: VelocityField, sigma: f64, ell: f64) -> Result<Self> {
        let spec = Self { kind: NoiseKind::ScalarOu, modes: vec![NoiseMode { profile, sigma, eta: ell }] };
        spec.validate()?;
        Ok(spec)
    }

    /// A single silent mode; every path evaluates to the zero field.
    pub fn silent(domain: DomainSpec) -> Self {
        Self {
            kind: NoiseKind::ScalarOu,
            modes: vec![NoiseMode { profile: VelocityField::zeros(domain), sigma: 0.0, eta: 1.0 }],
        }
    }

    /// The `sigmas.len()` lowest Stokes eigenfields of `ws`'s domain.
    pub fn stokes_truncated(ws: &OperatorWorkspace, sigmas: &[f64], eta: f64, mu: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Invalid(format!("OU damping must be positive, got {eta}")));
        }
        let spec = stokes_eigenpairs(ws, sigmas.len())?;
        let modes = spec
            .fields
            .into_iter()
            .zip(spec.values)
            .zip(sigmas)
            .map(|((profile, lambda), &sigma)| NoiseMode { profile, sigma, eta: mu * lambda + eta })
            .collect();
        let out = Self { kind: NoiseKind::StokesOuTruncated { eta }, modes };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Invalid("noise needs at least one mode".into()));
        }
        let d = self.modes[0].profile.domain;
        for (k, m) in self.modes.iter().enumerate() {
            if !(m.eta > 0.0 && m.eta.is_finite()) {
                return Err(Error::Invalid(format!("mode {k}: OU damping must be positive, got {}", m.eta)));
            }
            if !m.sigma.is_finite() {
                return Err(Error::Invalid(format!("mode {k}: amplitude is not finite")));
            }
            if m.profile.domain != d {
                return Err(Error::Invalid("noise profiles live on different grids".into()));
            }
            if m.profile.boundary_defect() != 0.0 || !m.profile.is_finite() {
                return Err(Error::Invalid(format!("mode {k}: profile must be finite with zero boundary")));
            }
        }
        Ok(())
    }

    pub fn etas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eta).collect()
    }

    /// `Σ σ_k² ‖g_k‖²_H` on the reference domain.
    pub fn trace(&self) -> f64 {
        self.modes.iter().map(|m| m.sigma * m.sigma * m.profile.norm_h_sq()).sum()
    }

    /// Profiles restricted to `ws`'s domain, with `A_h g_k` precomputed.
    pub fn on_domain(&self, ws: &OperatorWorkspace) -> Result<DomainNoise> {
        let mut modes = Vec::with_capacity(self.modes.len());
        for m in &self.modes {
            let g = restrict_profile(&m.profile, ws)?;
            let ag = ws.stokes_apply(&g)?;
            modes.push(DomainMode { g, ag, sigma: m.sigma, eta: m.eta });
        }
        Ok(DomainNoise { domain: ws.domain, modes })
    }
}

/// Restriction followed by one projection; identity on the same grid.
pub fn restrict_profile(v: &VelocityField, ws: &OperatorWorkspace) -> Result<VelocityField> {
    if v.domain == ws.domain {
        return Ok(v.clone());
    }
    ws.project(&restrict(v, &ws.domain)?)
}

#[derive(Clone, Debug)]
pub struct DomainMode {
    pub g: VelocityField,
    /// `A_h g`.
    pub ag: VelocityField,
    pub sigma: f64,
    pub eta: f64,
}

#[derive(Clone, Debug)]
pub struct DomainNoise {
    pub domain: DomainSpec,
    pub modes: Vec<DomainMode>,
}

impl DomainNoise {
    pub fn is_silent(&self) -> bool {
        self.modes.iter().all(|m| m.sigma == 0.0 || m.g.is_zero())
    }
}

/// `z(t) = Σ σ_k g_k y_k(t)`.
pub fn evaluate_z(path: &OuPath, noise: &DomainNoise, t: f64) -> Result<VelocityField> {
    let y = path.values_at(t)?;
    Ok(combine(noise, &y))
}

pub(crate) fn combine(noise: &DomainNoise, y: &[f64]) -> VelocityField {
    let mut z = VelocityField::zeros(noise.domain);
    for (m, &yk) in noise.modes.iter().zip(y) {
        let c = m.sigma * yk;
        if c != 0.0 {
            z.axpy(c, &m.g);
        }
    }
    z
}

const ANCHOR: u64 = 0;
const FORWARD: u64 = 1;
const BACKWARD: u64 = 2;
const FROM_REST: u64 = 3;

/// A window of OU paths on the lattice `k * dt`. Lattice index `k`
/// corresponds to path time `(k - shift) * dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct OuPath {
    pub seed: u64,
    pub dt: f64,
    pub etas: Vec<f64>,
    pub stationary_init: bool,
    /// Lattice index where a non-stationary path starts from rest.
    pub rest_index: i64,
    pub k_start: i64,
    pub k_end: i64,
    pub shift: i64,
    /// `samples[mode][k - k_start]`.
    pub samples: Vec<Vec<f64>>,
}

/// Paths are walked from the anchor at 0, so this also bounds the work per sample.
pub const MAX_LATTICE_INDEX: i64 = 1 << 27;
/// Samples held by one path, all modes together.
pub const MAX_PATH_SAMPLES: usize = 1 << 26;

fn lattice_index(t: f64, dt: f64) -> Result<i64> {
    let q = t / dt;
    let k = q.round();
    if (q - k).abs() > 1e-6 || !k.is_finite() {
        return Err(Error::Invalid(format!("time {t} is not on the lattice of spacing {dt}")));
    }
    if k.abs() > MAX_LATTICE_INDEX as f64 {
        return Err(Error::Invalid(format!("time {t} is more than {MAX_LATTICE_INDEX} steps of {dt} from 0")));
    }
    Ok(k as i64)
}

fn coefficients(eta: f64, dt: f64) -> (f64, f64) {
    let a = (-eta * dt).exp();
    let s = ((1.0 - (-2.0 * eta * dt).exp()) / (2.0 * eta)).sqrt();
    (a, s)
}

/// Stationary two-sided path of one mode on lattice `[k0, k1]`.
fn stationary_mode(seed: u64, mode: u64, eta: f64, dt: f64, k0: i64, k1: i64) -> Vec<f64> {
    let (a, s) = coefficients(eta, dt);
    let base = 4 * mode;
    let y0 = rng::normal(seed, base + ANCHOR, 0) / (2.0 * eta).sqrt();
    let mut out = vec![0.0; (k1 - k0 + 1) as usize];
    let mut put = |k: i64, y: f64| {
        if (k0..=k1).contains(&k) {
            out[(k - k0) as usize] = y;
        }
    };
    put(0, y0);
    if k1 > 0 {
        let mut xi = NormalStream::at(seed, base + FORWARD, 0);
        let mut y = y0;
        for k in 1..=k1 {
            y = a * y + s * xi.next();
            put(k, y);
        }
    }
    if k0 < 0 {
        let mut xi = NormalStream::at(seed, base + BACKWARD, 0);
        let mut y = y0;
        for k in 1..=-k0 {
            y = a * y + s * xi.next();
            put(-k, y);
        }
    }
    out
}

/// Path started at zero at lattice index `rest`, forward only.
fn rest_mode(seed: u64, mode: u64, eta: f64, dt: f64, rest: i64, k0: i64, k1: i64) -> Vec<f64> {
    let (a, s) = coefficients(eta, dt);
    let mut out = vec![0.0; (k1 - k0 + 1) as usize];
    let start = (rest as i128 + (1i128 << 62)) as u64;
    let mut xi = NormalStream::at(seed, 4 * mode + FROM_REST, start);
    let mut y = 0.0;
    for k in rest..=k1 {
        if k > rest {
            y = a * y + s * xi.next();
        }
        if k >= k0 {
            out[(k - k0) as usize] = y;
        }
    }
    out
}

/// Samples every mode of `spec` on `[t_start, t_end]` (lattice aligned).
pub fn sample_ou_path(seed: u64, spec: &NoiseSpec, t_start: f64, t_end: f64, dt: f64) -> Result<OuPath> {
    OuPath::generate(seed, &spec.etas(), t_start, t_end, dt, true)
}

impl OuPath {
    pub fn generate(seed: u64, etas: &[f64], t_start: f64, t_end: f64, dt: f64, stationary_init: bool) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Invalid(format!("path step must be positive, got {dt}")));
        }
        if !(t_start < t_end) {
            return Err(Error::Invalid(format!("empty window [{t_start}, {t_end}]")));
        }
        if let Some(e) = etas.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Invalid(format!("OU damping must be positive, got {e}")));
        }
        let k0 = lattice_index(t_start, dt)?;
        let k1 = lattice_index(t_end, dt)?;
        let rest_index = k0;
        Self::build(seed, etas, dt, stationary_init, rest_index, k0, k1, 0)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(seed: u64, etas: &[f64], dt: f64, stationary_init: bool, rest_index: i64, k0: i64, k1: i64, shift: i64) -> Result<Self> {
        if k0.abs().max(k1.abs()) > MAX_LATTICE_INDEX
            || ((k1 - k0 + 1) as usize).saturating_mul(etas.len()) > MAX_PATH_SAMPLES
        {
            return Err(Error::Invalid(format!(
                "path window [{k0}, {k1}] is too long (at most {MAX_LATTICE_INDEX} steps from 0 and {MAX_PATH_SAMPLES} samples)"
            )));
        }
        if !stationary_init && k0 < rest_index {
            return Err(Error::Invalid("a path started from rest has no values before its start".into()));
        }
        let samples = etas
            .iter()
            .enumerate()
            .map(|(m, &eta)| {
                if stationary_init {
                    stationary_mode(seed, m as u64, eta, dt, k0, k1)
                } else {
                    rest_mode(seed, m as u64, eta, dt, rest_index, k0, k1)
                }
            })
            .collect();
        Ok(Self { seed, dt, etas: etas.to_vec(), stationary_init, rest_index, k_start: k0, k_end: k1, shift, samples })
    }

    pub fn n_modes(&self) -> usize {
        self.etas.len()
    }

    pub fn t_start(&self) -> f64 {
        (self.k_start - self.shift) as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        (self.k_end - self.shift) as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        (self.k_end - self.k_start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Path time of sample `n`.
    pub fn time(&self, n: usize) -> f64 {
        (self.k_start + n as i64 - self.shift) as f64 * self.dt
    }

    fn slot(&self, t: f64) -> Result<usize> {
        let k = lattice_index(t, self.dt)? + self.shift;
        if k < self.k_start || k > self.k_end {
            return Err(Error::Invalid(format!(
                "time {t} outside the sampled window [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        Ok((k - self.k_start) as usize)
    }

    pub fn value(&self, mode: usize, t: f64) -> Result<f64> {
        Ok(self.samples[mode][self.slot(t)?])
    }

    pub fn values_at(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.slot(t)?;
        Ok(self.samples.iter().map(|s| s[n]).collect())
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        self.slot(t0).is_ok() && self.slot(t1).is_ok()
    }

    /// `θ_s`: the returned path at time `τ` equals this one at `τ + s`.
    /// Randomness is never redrawn.
    pub fn shift(&self, s: f64) -> Result<Self> {
        let ds = lattice_index(s, self.dt)?;
        let mut out = self.clone();
        out.shift = self.shift + ds;
        Ok(out)
    }

    /// The same underlying path regenerated on another window of path time.
    pub fn window(&self, t0: f64, t1: f64) -> Result<Self> {
        if !(t0 < t1) {
            return Err(Error::Invalid(format!("empty window [{t0}, {t1}]")));
        }
        let k0 = lattice_index(t0, self.dt)? + self.shift;
        let k1 = lattice_index(t1, self.dt)? + self.shift;
        Self::build(self.seed, &self.etas, self.dt, self.stationary_init, self.rest_index, k0, k1, self.shift)
    }

    /// CSV with columns `t, y_1, ..., y_K`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.n_modes()).map(|k| format!("y_{k}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for n in 0..self.len() {
            let mut row = vec![format!("{:e}", self.time(n))];
            row.extend(self.samples.iter().map(|s| format!("{:e}", s[n])));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn manifest(&self, kind: NoiseKind, sigmas: &[f64]) -> SeedManifest {
        SeedManifest {
            seed: self.seed,
            kind,
            modes: sigmas.iter().zip(&self.etas).map(|(&sigma, &eta)| ModeManifest { sigma, eta }).collect(),
            t_start: self.t_start(),
            t_end: self.t_end(),
            dt: self.dt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeManifest {
    pub sigma: f64,
    pub eta: f64,
}

/// Enough to regenerate an exported path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedManifest {
    pub seed: u64,
    pub kind: NoiseKind,
    pub modes: Vec<ModeManifest>,
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl SeedManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("seed manifest: {e}")))?;
        if m.modes.is_empty() {
            return Err(Error::Invalid("seed manifest lists no modes".into()));
        }
        Ok(m)
    }

    pub fn regenerate(&self) -> Result<OuPath> {
        let etas: Vec<f64> = self.modes.iter().map(|m| m.eta).collect();
        OuPath::generate(self.seed, &etas, self.t_start, self.t_end, self.dt, true)
    }
}

#[derive(Clone, Debug)]
pub struct TemperednessReport {
    pub deltas: Vec<f64>,
    /// Pullback times `t >= 0` at which `y(θ_{-t} ω) = y(-t)` is read.
    pub times: Vec<f64>,
    /// `values[d][n] = e^{-δ t_n} max_k |y_k(-t_n)|`.
    pub values: Vec<Vec<f64>>,
    /// Max of `values[d]` over `t in [T/2, T]`.
    pub tail_max: Vec<f64>,
    /// `max_k |y_k(-t)| / t` for `t > 0`.
    pub growth: Vec<f64>,
}

/// Exponential-weight decay of the path read backwards from time 0.
pub fn temperedness_report(path: &OuPath, deltas: &[f64]) -> Result<TemperednessReport> {
    if path.t_start() >= 0.0 || !path.covers(0.0, 0.0) {
        return Err(Error::Invalid("temperedness needs a path covering [-T, 0]".into()));
    }
    let horizon = -path.t_start();
    let steps = (horizon / path.dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut mags = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        let t = n as f64 * path.dt;
        let y = path.values_at(-t)?;
        times.push(t);
        mags.push(y.iter().fold(0.0f64, |a, &b| a.max(b.abs())));
    }
    let values: Vec<Vec<f64>> = deltas
        .iter()
        .map(|&delta| times.iter().zip(&mags).map(|(&t, &m)| (-delta * t).exp() * m).collect())
        .collect();
    let tail_max = values
        .iter()
        .map(|v| {
            times.iter().zip(v).filter(|(&t, _)| t >= 0.5 * horizon).fold(0.0f64, |a, (_, &b)| a.max(b))
        })
        .collect();
    let growth = times.iter().zip(&mags).filter(|(&t, _)| t > 0.0).map(|(&t, &m)| m / t).collect();
    Ok(TemperednessReport { deltas: deltas.to_vec(), times, values, tail_max, growth })
}
