//! Point-cloud attractor estimates, Hausdorff semidistances over the null
//! expansion, and the domain-growth experiment.

use crate::error::{Error, Result};
use crate::grid::{null_expand, DomainSpec, FieldTexture, VelocityField};
use crate::noise::{sample_ou_path, NoiseSpec, OuPath};
use crate::operators::OperatorWorkspace;
use crate::rds::{diameter, pullback_states, IcEnsemble, PullbackConfig};
use crate::solver::{GuardPolicy, PhysicsParams, System};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CloudProvenance {
    pub seed: u64,
    pub pullback_time: f64,
    pub ensemble_size: usize,
    pub diameter: f64,
    pub converged: bool,
}

/// States at time 0 after pullback. Not a certified invariant set.
#[derive(Clone, Debug)]
pub struct AttractorCloud {
    pub domain: DomainSpec,
    pub states: Vec<VelocityField>,
    pub centroid: VelocityField,
    pub provenance: CloudProvenance,
}

impl AttractorCloud {
    pub fn new(states: Vec<VelocityField>, provenance: CloudProvenance) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::Invalid("empty cloud".into()))?;
        let domain = first.domain;
        if states.iter().any(|s| s.domain != domain) {
            return Err(Error::GridMismatch("cloud states live on different grids".into()));
        }
        let mut centroid = VelocityField::zeros(domain);
        for s in &states {
            centroid.axpy(1.0 / states.len() as f64, s);
        }
        Ok(Self { domain, states, centroid, provenance })
    }

    pub fn recomputed_diameter(&self) -> f64 {
        diameter(&self.states)
    }
}

/// Pulls back from increasing times until the cloud diameter drops below
/// `tol`; otherwise returns the last cloud flagged unconverged.
pub fn estimate_attractor(sys: &System, path: &OuPath, cfg: &PullbackConfig, tol: f64) -> Result<AttractorCloud> {
    cfg.validate()?;
    let ics = cfg.initial_states(sys)?;
    let mut last = None;
    for &t in &cfg.pullback_times {
        let cloud = pullback_states(sys, path, &ics, t, cfg.dt)?;
        let converged = cloud.diameter < tol;
        last = Some((cloud, converged));
        if converged {
            break;
        }
    }
    let (cloud, converged) = last.expect("validated non-empty time list");
    AttractorCloud::new(
        cloud.states,
        CloudProvenance {
            seed: cfg.seed,
            pullback_time: cloud.t,
            ensemble_size: ics.len(),
            diameter: cloud.diameter,
            converged,
        },
    )
}

/// `max_{a∈A} min_{b∈B} ‖ã - b‖` with `ã` the null expansion of `a` onto `B`'s grid.
pub fn hausdorff_semidist(a: &[VelocityField], b: &[VelocityField]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Invalid("Hausdorff semidistance of an empty cloud".into()));
    }
    let target = b[0].domain;
    if b.iter().any(|x| x.domain != target) {
        return Err(Error::GridMismatch("second cloud lives on different grids".into()));
    }
    let mut d: f64 = 0.0;
    for x in a {
        let e = null_expand(x, &target)?;
        let nearest = b.iter().map(|y| e.sub(y).norm_h()).fold(f64::INFINITY, f64::min);
        d = d.max(nearest);
    }
    Ok(d)
}

pub fn cloud_semidist(a: &AttractorCloud, b: &AttractorCloud) -> Result<f64> {
    hausdorff_semidist(&a.states, &b.states)
}

/// Shared settings of the domain-growth experiment; `f` and the noise
/// profiles live on `O_{M_ref}` and are restricted per domain.
#[derive(Clone, Debug)]
pub struct UpsemiConfig {
    pub m_list: Vec<u32>,
    pub m_ref: u32,
    pub ly: f64,
    pub h: f64,
    pub params: PhysicsParams,
    pub f: VelocityField,
    pub noise: NoiseSpec,
    pub pullback_times: Vec<f64>,
    pub ic_radius: f64,
    pub ic_count: usize,
    pub dt: f64,
    /// Convergence tolerance relative to the initial ensemble diameter.
    pub rel_tol: f64,
    /// Pass threshold: `d_{max m} < threshold · d_{min m}`.
    pub threshold: f64,
    /// `(poisson_tol, stokes_tol, max_iters)` of every workspace.
    pub tolerances: (f64, f64, usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct UpsemiRow {
    pub seed: u64,
    pub m: u32,
    pub d_m: f64,
    pub converged: bool,
    pub diameter: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UpsemiSummary {
    pub m_list: Vec<u32>,
    pub m_ref: u32,
    pub median_d: Vec<f64>,
    /// Median of the largest domain below the median of the smallest.
    pub trend: bool,
    /// Median of the largest domain below `threshold` times the smallest.
    pub below_threshold: bool,
    /// Heuristic: medians nonincreasing in `m`.
    pub nonincreasing: bool,
    pub all_converged: bool,
    pub note: &'static str,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl UpsemiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_list.is_empty() || self.m_list.iter().any(|&m| m > self.m_ref || m == 0) {
            return Err(Error::Invalid("m_list must be non-empty with 0 < m <= m_ref".into()));
        }
        if self.f.domain != self.reference_domain()? {
            return Err(Error::GridMismatch("forcing must live on the reference domain".into()));
        }
        self.noise.validate()?;
        if self.noise.modes[0].profile.domain != self.f.domain {
            return Err(Error::GridMismatch("noise profiles must live on the reference domain".into()));
        }
        Ok(())
    }

    pub fn reference_domain(&self) -> Result<DomainSpec> {
        DomainSpec::new(self.m_ref, self.ly, self.h)
    }

    pub fn system(&self, m: u32) -> Result<System> {
        let (p, s, n) = self.tolerances;
        let ws = OperatorWorkspace::with_tolerances(DomainSpec::new(m, self.ly, self.h)?, p, s, n)?;
        let mut sys = System::new(ws, self.params, &self.f, &self.noise)?;
        sys.cfl_policy = GuardPolicy::Substep;
        Ok(sys)
    }

    /// Attractor cloud on `O_m` for one seed; the OU path depends only on the seed.
    pub fn cloud(&self, sys: &System, seed: u64) -> Result<AttractorCloud> {
        let t_max = self.pullback_times.last().copied().unwrap_or(0.0);
        let path = sample_ou_path(seed, &self.noise, -t_max, 0.0, self.dt)?;
        let cfg = PullbackConfig {
            pullback_times: self.pullback_times.clone(),
            ics: IcEnsemble::Ball { radius: self.ic_radius, count: self.ic_count, texture: FieldTexture::Mixed },
            seed,
            dt: self.dt,
        };
        let initial = diameter(&cfg.initial_states(sys)?);
        estimate_attractor(sys, &path, &cfg, self.rel_tol * initial)
    }
}

/// `d_m = dist(Ã_m, A_{M_ref})` for every seed and `m`.
pub fn upper_semi_experiment(cfg: &UpsemiConfig, seeds: &[u64]) -> Result<(Vec<UpsemiRow>, UpsemiSummary)> {
    cfg.validate()?;
    let mut domains = cfg.m_list.clone();
    if !domains.contains(&cfg.m_ref) {
        domains.push(cfg.m_ref);
    }
    let systems = domains.iter().map(|&m| cfg.system(m)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(u64, usize)> = seeds.iter().flat_map(|&s| (0..domains.len()).map(move |k| (s, k))).collect();
    let clouds = jobs
        .par_iter()
        .map(|&(seed, k)| cfg.cloud(&systems[k], seed))
        .collect::<Result<Vec<_>>>()?;
    let ref_index = domains.iter().position(|&m| m == cfg.m_ref).expect("reference domain is listed");
    let mut rows = Vec::new();
    for (si, &seed) in seeds.iter().enumerate() {
        let base = si * domains.len();
        let reference = &clouds[base + ref_index];
        for (k, &m) in cfg.m_list.iter().enumerate() {
            let c = &clouds[base + k];
            rows.push(UpsemiRow {
                seed,
                m,
                d_m: cloud_semidist(c, reference)?,
                converged: c.provenance.converged && reference.provenance.converged,
                diameter: c.provenance.diameter,
            });
        }
    }
    let median_d: Vec<f64> = cfg
        .m_list
        .iter()
        .map(|&m| median(&rows.iter().filter(|r| r.m == m).map(|r| r.d_m).collect::<Vec<_>>()))
        .collect();
    let (lo, hi) = (min_index(&cfg.m_list), max_index(&cfg.m_list));
    let summary = UpsemiSummary {
        m_list: cfg.m_list.clone(),
        m_ref: cfg.m_ref,
        trend: median_d[hi] < median_d[lo] || (median_d[hi] == 0.0 && median_d[lo] == 0.0),
        below_threshold: median_d[hi] <= cfg.threshold * median_d[lo],
        nonincreasing: {
            let mut order: Vec<usize> = (0..cfg.m_list.len()).collect();
            order.sort_by_key(|&i| cfg.m_list[i]);
            order.windows(2).all(|w| median_d[w[1]] <= median_d[w[0]])
        },
        median_d,
        all_converged: rows.iter().all(|r| r.converged),
        note: "the largest domain stands in for the whole strip; monotonicity in m is a heuristic",
    };
    Ok((rows, summary))
}

fn min_index(m: &[u32]) -> usize {
    (0..m.len()).min_by_key(|&i| m[i]).unwrap_or(0)
}

fn max_index(m: &[u32]) -> usize {
    (0..m.len()).max_by_key(|&i| m[i]).unwrap_or(0)
}
