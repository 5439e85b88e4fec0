//! Run configuration: one TOML file, every key optional, unknown keys
//! rejected. `RunConfig::default()` is what `--print-defaults` shows.

use crate::attractor::UpsemiConfig;
use crate::error::{Error, Result};
use crate::grid::{null_expand, snapshot, DomainSpec, VelocityField};
use crate::noise::NoiseSpec;
use crate::operators::{spectrum::stokes_eigenpairs, AdvectionForm, OperatorWorkspace};
use crate::operators::{DEFAULT_MAX_ITERS, DEFAULT_POISSON_TOL, DEFAULT_STOKES_TOL};
use crate::rds::DEFAULT_ABSORBING_M;
use crate::solver::{GuardPolicy, PhysicsParams, System};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::PathBuf;

/// Upper bound on cells per grid accepted from a config.
pub const MAX_CONFIG_CELLS: usize = 1 << 22;

/// Named velocity profiles, built from a stream function on the nodes (so
/// they are divergence free with zero boundary faces) or read from a snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Zero {},
    /// `ψ = A exp(-|x - c|² / 2w²) sin(π y / Ly)`.
    GaussianVortex { amplitude: f64, width: f64, center: [f64; 2] },
    /// `ψ = A sin(kx π (x + m) / 2m) sin(ky π y / Ly)`.
    Cellular { amplitude: f64, kx: u32, ky: u32 },
    /// The `k`-th discrete Stokes eigenfield (k = 1 is the ground mode), unit H norm.
    StokesMode { amplitude: f64, k: usize },
    /// Snapshot on the same or a smaller nested grid, null-expanded and projected.
    Snapshot {
        path: PathBuf,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ProfileSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("profile {name} must be finite")))
            }
        };
        match self {
            Self::Zero {} => Ok(()),
            Self::GaussianVortex { amplitude, width, center } => {
                finite("amplitude", *amplitude)?;
                finite("center", center[0] + center[1])?;
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::Config(format!("gaussian-vortex width must be positive, got {width}")));
                }
                Ok(())
            }
            Self::Cellular { amplitude, kx, ky } => {
                finite("amplitude", *amplitude)?;
                if *kx == 0 || *ky == 0 {
                    return Err(Error::Config("cellular wave numbers must be at least 1".into()));
                }
                Ok(())
            }
            Self::StokesMode { amplitude, k } => {
                finite("amplitude", *amplitude)?;
                if !(1..=64).contains(k) {
                    return Err(Error::Config(format!("stokes-mode index must be in 1..=64, got {k}")));
                }
                Ok(())
            }
            Self::Snapshot { scale, .. } => finite("scale", *scale),
        }
    }

    pub fn build(&self, ws: &OperatorWorkspace) -> Result<VelocityField> {
        self.validate()?;
        let d = ws.domain;
        let (m, ly) = (d.half_width(), d.ly);
        Ok(match self {
            Self::Zero {} => VelocityField::zeros(d),
            Self::GaussianVortex { amplitude, width, center } => {
                let (a, w2, [cx, cy]) = (*amplitude, 2.0 * width * width, *center);
                VelocityField::from_stream_fn(d, |x, y| {
                    a * (-((x - cx).powi(2) + (y - cy).powi(2)) / w2).exp() * (PI * y / ly).sin()
                })
            }
            Self::Cellular { amplitude, kx, ky } => {
                let (a, kx, ky) = (*amplitude, *kx as f64, *ky as f64);
                VelocityField::from_stream_fn(d, |x, y| {
                    a * (kx * PI * (x + m) / (2.0 * m)).sin() * (ky * PI * y / ly).sin()
                })
            }
            Self::StokesMode { amplitude, k } => {
                let spec = stokes_eigenpairs(ws, *k)?;
                let g = &spec.fields[k - 1];
                g.scaled(amplitude / g.norm_h())
            }
            Self::Snapshot { path, scale } => {
                let v = snapshot::read(path)?;
                if !v.is_finite() {
                    return Err(Error::Config(format!("{}: snapshot is not finite", path.display())));
                }
                let v = if v.domain == d { v } else { null_expand(&v, &d)? };
                let mut p = ws.project(&v)?;
                p.scale(*scale);
                p
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainBlock {
    pub m: u32,
    pub m_list: Vec<u32>,
    pub m_ref: u32,
    pub ly: f64,
    pub h: f64,
}

impl Default for DomainBlock {
    fn default() -> Self {
        Self { m: 4, m_list: vec![4, 8, 16], m_ref: 32, ly: 1.0, h: 0.125 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsBlock {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub advection: AdvectionForm,
    pub forcing: ProfileSpec,
}

impl Default for PhysicsBlock {
    fn default() -> Self {
        Self {
            mu: 1.0,
            alpha: 1.0,
            beta: 1.0,
            r: 3.0,
            advection: AdvectionForm::SkewSymmetric,
            forcing: ProfileSpec::GaussianVortex { amplitude: 0.5, width: 0.5, center: [0.0, 0.5] },
        }
    }
}

impl PhysicsBlock {
    pub fn params(&self) -> PhysicsParams {
        PhysicsParams { mu: self.mu, alpha: self.alpha, beta: self.beta, r: self.r, advection: self.advection }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKindName {
    ScalarOu,
    StokesOuTruncated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeBlock {
    /// Required for scalar-ou; must be absent for stokes-ou-truncated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    pub sigma: f64,
    /// Per-mode OU damping; defaults to the block's `eta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseBlock {
    pub kind: NoiseKindName,
    /// `ℓ` for scalar-ou, `η` for stokes-ou-truncated.
    pub eta: f64,
    pub modes: Vec<ModeBlock>,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        Self {
            kind: NoiseKindName::ScalarOu,
            eta: 1.0,
            modes: vec![ModeBlock {
                profile: Some(ProfileSpec::GaussianVortex { amplitude: 1.0, width: 0.5, center: [0.0, 0.5] }),
                sigma: 0.1,
                eta: None,
            }],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeBlock {
    pub dt: f64,
    pub t_end: f64,
    pub pullback_times: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub cfl_policy: GuardPolicy,
}

impl Default for TimeBlock {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 2.0,
            pullback_times: vec![5.0, 10.0, 20.0],
            snapshot_times: vec![1.0],
            cfl_policy: GuardPolicy::Substep,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub poisson_tol: f64,
    pub stokes_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self { poisson_tol: DEFAULT_POISSON_TOL, stokes_tol: DEFAULT_STOKES_TOL, max_iters: DEFAULT_MAX_ITERS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantsBlock {
    pub samples: usize,
    pub r_values: Vec<f64>,
    pub ladyzhenskaya_slack: f64,
    pub trilinear_tol: f64,
    pub stokes_form_tol: f64,
    pub monotonicity_tol: f64,
    pub orthogonality_tol: f64,
}

impl Default for InvariantsBlock {
    fn default() -> Self {
        Self {
            samples: 200,
            r_values: vec![1.0, 2.0, 3.0, 3.5],
            ladyzhenskaya_slack: 0.05,
            trilinear_tol: 1e-12,
            stokes_form_tol: 1e-8,
            monotonicity_tol: 1e-12,
            orthogonality_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateBlock {
    pub initial: ProfileSpec,
    pub energy_ledger: bool,
    pub v_ledger: bool,
    /// Frozen constant `C` of the V-level ledger.
    pub v_ledger_constant: f64,
    pub tail_radius: Option<f64>,
    pub hard: bool,
}

/// `C` of the V-level ledger, calibrated on the default regime (seeds 1..=10)
/// with a safety factor of 2.
pub const DEFAULT_V_LEDGER_CONSTANT: f64 = 26.0;

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            initial: ProfileSpec::Cellular { amplitude: 0.5, kx: 2, ky: 1 },
            energy_ledger: true,
            v_ledger: true,
            v_ledger_constant: DEFAULT_V_LEDGER_CONSTANT,
            tail_radius: Some(2.0),
            hard: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PullbackBlock {
    pub ic_radius: f64,
    pub ic_count: usize,
    /// Converged when the final diameter is below `rel_tol` times the initial one.
    pub rel_tol: f64,
    pub monotone_slack: f64,
    pub absorbing_m: f64,
    pub absorbing_horizon: f64,
    pub hard: bool,
}

impl Default for PullbackBlock {
    fn default() -> Self {
        Self {
            ic_radius: 1.0,
            ic_count: 4,
            rel_tol: 1e-3,
            monotone_slack: 0.05,
            absorbing_m: DEFAULT_ABSORBING_M,
            absorbing_horizon: 20.0,
            hard: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UpsemiBlock {
    pub ic_radius: f64,
    pub ic_count: usize,
    pub rel_tol: f64,
    /// `d_max(m_list)` must fall below this fraction of `d_min(m_list)`.
    pub threshold_factor: f64,
    pub hard: bool,
}

impl Default for UpsemiBlock {
    fn default() -> Self {
        Self { ic_radius: 1.0, ic_count: 2, rel_tol: 1e-3, threshold_factor: 0.1, hard: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureBlock {
    pub initial: ProfileSpec,
    /// Second initial state of the coupling run.
    pub coupled: ProfileSpec,
    pub burn_in: f64,
    pub probes: usize,
    pub bins: usize,
    /// `c` in the per-step slack `c·dt·t` of the coupling inequality.
    pub coupling_slack: f64,
    pub eps: f64,
    pub moment_horizon: f64,
    pub hard: bool,
}

impl Default for MeasureBlock {
    fn default() -> Self {
        Self {
            initial: ProfileSpec::Cellular { amplitude: 0.5, kx: 2, ky: 1 },
            coupled: ProfileSpec::Zero {},
            burn_in: 0.5,
            probes: 2,
            bins: 20,
            coupling_slack: 10.0,
            eps: 0.01,
            moment_horizon: 1.0,
            hard: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    pub invariants: InvariantsBlock,
    pub simulate: SimulateBlock,
    pub pullback: PullbackBlock,
    pub upsemi: UpsemiBlock,
    pub measure: MeasureBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// First seed; multi-seed experiments use `seed..seed + seed_count`.
    pub seed: u64,
    pub seed_count: usize,
    pub out_dir: PathBuf,
    pub domain: DomainBlock,
    pub physics: PhysicsBlock,
    pub noise: NoiseBlock,
    pub time: TimeBlock,
    pub solver: SolverBlock,
    pub experiment: ExperimentBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            seed_count: 10,
            out_dir: PathBuf::from("scbf-out"),
            domain: DomainBlock::default(),
            physics: PhysicsBlock::default(),
            noise: NoiseBlock::default(),
            time: TimeBlock::default(),
            solver: SolverBlock::default(),
            experiment: ExperimentBlock::default(),
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

fn non_negative(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be non-negative and finite, got {x}")))
    }
}

fn on_lattice(name: &str, t: f64, dt: f64) -> Result<()> {
    let k = t / dt;
    if (k - k.round()).abs() > 1e-9 * k.abs().max(1.0) {
        return Err(Error::Config(format!("{name} = {t} is not a multiple of dt = {dt}")));
    }
    Ok(())
}

impl RunConfig {
    /// Parses and validates; every failure is an [`Error::Config`].
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.seed_count as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }

    fn domain_for(&self, m: u32) -> Result<DomainSpec> {
        let d = DomainSpec::new(m, self.domain.ly, self.domain.h).map_err(|e| Error::Config(e.to_string()))?;
        if d.n_cells() > MAX_CONFIG_CELLS {
            return Err(Error::Config(format!("grid with {} cells exceeds the limit {MAX_CONFIG_CELLS}", d.n_cells())));
        }
        Ok(d)
    }

    pub fn main_domain(&self) -> Result<DomainSpec> {
        self.domain_for(self.domain.m)
    }

    pub fn reference_domain(&self) -> Result<DomainSpec> {
        self.domain_for(self.domain.m_ref)
    }

    /// Checks everything that can be checked without touching files or solving.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::Config(s) => Error::Config(s),
            other => Error::Config(other.to_string()),
        };
        self.main_domain()?;
        self.reference_domain()?;
        if self.domain.m_list.is_empty() {
            return Err(Error::Config("domain.m_list must not be empty".into()));
        }
        for &m in &self.domain.m_list {
            self.domain_for(m)?;
            if m > self.domain.m_ref {
                return Err(Error::Config(format!("m_list entry {m} exceeds m_ref {}", self.domain.m_ref)));
            }
        }
        self.physics.params().validate().map_err(cfg_err)?;
        self.physics.forcing.validate()?;

        positive("noise.eta", self.noise.eta)?;
        if self.noise.modes.is_empty() {
            return Err(Error::Config("noise needs at least one mode".into()));
        }
        if self.noise.modes.len() > 64 {
            return Err(Error::Config("at most 64 noise modes".into()));
        }
        for (k, mode) in self.noise.modes.iter().enumerate() {
            if !mode.sigma.is_finite() {
                return Err(Error::Config(format!("noise mode {k}: sigma must be finite")));
            }
            if let Some(eta) = mode.eta {
                positive("noise mode eta", eta)?;
            }
            match (self.noise.kind, &mode.profile) {
                (NoiseKindName::ScalarOu, Some(p)) => p.validate()?,
                (NoiseKindName::ScalarOu, None) => {
                    return Err(Error::Config(format!("noise mode {k}: scalar-ou needs a profile")))
                }
                (NoiseKindName::StokesOuTruncated, Some(_)) => {
                    return Err(Error::Config(format!(
                        "noise mode {k}: stokes-ou-truncated uses eigenfields, drop the profile"
                    )))
                }
                (NoiseKindName::StokesOuTruncated, None) => {
                    if mode.eta.is_some() {
                        return Err(Error::Config("stokes-ou-truncated takes one eta for all modes".into()));
                    }
                }
            }
        }

        let t = &self.time;
        positive("time.dt", t.dt)?;
        positive("time.t_end", t.t_end)?;
        on_lattice("time.t_end", t.t_end, t.dt)?;
        if t.t_end / t.dt > 1e8 {
            return Err(Error::Config("more than 1e8 steps".into()));
        }
        if t.pullback_times.is_empty() || t.pullback_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("time.pullback_times must be a non-empty increasing list".into()));
        }
        for &p in &t.pullback_times {
            non_negative("pullback time", p)?;
            on_lattice("pullback time", p, t.dt)?;
        }
        for &s in &t.snapshot_times {
            non_negative("snapshot time", s)?;
            on_lattice("snapshot time", s, t.dt)?;
            if s > t.t_end {
                return Err(Error::Config(format!("snapshot time {s} beyond t_end {}", t.t_end)));
            }
        }

        let s = &self.solver;
        positive("solver.poisson_tol", s.poisson_tol)?;
        positive("solver.stokes_tol", s.stokes_tol)?;
        if s.max_iters == 0 {
            return Err(Error::Config("solver.max_iters must be at least 1".into()));
        }
        if self.seed_count == 0 {
            return Err(Error::Config("seed_count must be at least 1".into()));
        }

        let e = &self.experiment;
        let inv = &e.invariants;
        if inv.samples == 0 {
            return Err(Error::Config("experiment.invariants.samples must be at least 1".into()));
        }
        for &r in &inv.r_values {
            if !(r >= 1.0 && r.is_finite()) {
                return Err(Error::Config(format!("invariant exponent {r} must be at least 1")));
            }
        }
        for (name, x) in [
            ("ladyzhenskaya_slack", inv.ladyzhenskaya_slack),
            ("trilinear_tol", inv.trilinear_tol),
            ("stokes_form_tol", inv.stokes_form_tol),
            ("monotonicity_tol", inv.monotonicity_tol),
            ("orthogonality_tol", inv.orthogonality_tol),
        ] {
            non_negative(name, x)?;
        }

        let sim = &e.simulate;
        sim.initial.validate()?;
        positive("v_ledger_constant", sim.v_ledger_constant)?;
        if let Some(k) = sim.tail_radius {
            positive("tail_radius", k)?;
        }

        let pb = &e.pullback;
        non_negative("pullback.ic_radius", pb.ic_radius)?;
        if pb.ic_count < 2 {
            return Err(Error::Config("pullback.ic_count must be at least 2".into()));
        }
        positive("pullback.rel_tol", pb.rel_tol)?;
        non_negative("pullback.monotone_slack", pb.monotone_slack)?;
        positive("pullback.absorbing_m", pb.absorbing_m)?;
        positive("pullback.absorbing_horizon", pb.absorbing_horizon)?;
        on_lattice("pullback.absorbing_horizon", pb.absorbing_horizon, t.dt)?;

        let us = &e.upsemi;
        non_negative("upsemi.ic_radius", us.ic_radius)?;
        if us.ic_count == 0 {
            return Err(Error::Config("upsemi.ic_count must be at least 1".into()));
        }
        positive("upsemi.rel_tol", us.rel_tol)?;
        positive("upsemi.threshold_factor", us.threshold_factor)?;

        let ms = &e.measure;
        ms.initial.validate()?;
        ms.coupled.validate()?;
        non_negative("measure.burn_in", ms.burn_in)?;
        if ms.burn_in >= t.t_end {
            return Err(Error::Config("measure.burn_in must be below time.t_end".into()));
        }
        if ms.bins == 0 || ms.bins > 1 << 16 {
            return Err(Error::Config("measure.bins must be in 1..=65536".into()));
        }
        if ms.probes > 64 {
            return Err(Error::Config("measure.probes must be at most 64".into()));
        }
        non_negative("measure.coupling_slack", ms.coupling_slack)?;
        non_negative("measure.eps", ms.eps)?;
        positive("measure.moment_horizon", ms.moment_horizon)?;
        on_lattice("measure.moment_horizon", ms.moment_horizon, t.dt)?;
        Ok(())
    }

    pub fn workspace(&self, d: DomainSpec) -> Result<OperatorWorkspace> {
        OperatorWorkspace::with_tolerances(d, self.solver.poisson_tol, self.solver.stokes_tol, self.solver.max_iters)
    }

    /// Noise with profiles on `reference`.
    pub fn noise_spec(&self, reference: &OperatorWorkspace) -> Result<NoiseSpec> {
        match self.noise.kind {
            NoiseKindName::ScalarOu => {
                let mut modes = Vec::with_capacity(self.noise.modes.len());
                for mode in &self.noise.modes {
                    let profile = mode.profile.as_ref().expect("validated").build(reference)?;
                    modes.push(crate::noise::NoiseMode {
                        profile,
                        sigma: mode.sigma,
                        eta: mode.eta.unwrap_or(self.noise.eta),
                    });
                }
                let spec = NoiseSpec { kind: crate::noise::NoiseKind::ScalarOu, modes };
                spec.validate()?;
                Ok(spec)
            }
            NoiseKindName::StokesOuTruncated => {
                let sigmas: Vec<f64> = self.noise.modes.iter().map(|m| m.sigma).collect();
                NoiseSpec::stokes_truncated(reference, &sigmas, self.noise.eta, self.physics.mu)
            }
        }
    }

    /// System on `m` with forcing and noise defined on `reference` and restricted.
    pub fn system_on(&self, m: u32, reference: &OperatorWorkspace, noise: &NoiseSpec) -> Result<System> {
        let ws = self.workspace(self.domain_for(m)?)?;
        let f = self.physics.forcing.build(reference)?;
        let mut sys = System::new(ws, self.physics.params(), &f, noise)?;
        sys.cfl_policy = self.time.cfl_policy;
        Ok(sys)
    }

    /// System on the main domain, with the noise on that same domain.
    pub fn main_system(&self) -> Result<(System, NoiseSpec)> {
        let ws = self.workspace(self.main_domain()?)?;
        let noise = self.noise_spec(&ws)?;
        let sys = self.system_on(self.domain.m, &ws, &noise)?;
        Ok((sys, noise))
    }

    /// Nested-domain experiment with forcing and noise on the reference domain.
    pub fn upsemi_config(&self) -> Result<UpsemiConfig> {
        let reference = self.workspace(self.reference_domain()?)?;
        let us = &self.experiment.upsemi;
        Ok(UpsemiConfig {
            m_list: self.domain.m_list.clone(),
            m_ref: self.domain.m_ref,
            ly: self.domain.ly,
            h: self.domain.h,
            params: self.physics.params(),
            f: self.physics.forcing.build(&reference)?,
            noise: self.noise_spec(&reference)?,
            pullback_times: self.time.pullback_times.clone(),
            ic_radius: us.ic_radius,
            ic_count: us.ic_count,
            dt: self.time.dt,
            rel_tol: us.rel_tol,
            threshold: us.threshold_factor,
            tolerances: (self.solver.poisson_tol, self.solver.stokes_tol, self.solver.max_iters),
        })
    }
}
