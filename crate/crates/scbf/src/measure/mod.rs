//! Statistics of the transition semigroup: time averages, coupling of two
//! trajectories on one noise path, and the exponential moment.

use crate::error::{Error, Result};
use crate::grid::VelocityField;
use crate::noise::{sample_ou_path, NoiseSpec, OuPath};
use crate::operators::spectrum::ground_eigenvalue;
use crate::rds::roundoff_floor;
use crate::solver::System;
use rayon::prelude::*;
use serde::Serialize;

/// Pure functionals of a state.
#[derive(Clone, Debug)]
pub struct ObservableSet {
    pub r: f64,
    /// Projections `⟨u, e_k⟩` onto stored probe fields.
    pub probes: Vec<VelocityField>,
}

impl ObservableSet {
    pub fn names(&self) -> Vec<String> {
        let mut n = vec!["energy".to_string(), "enstrophy".to_string(), "lr_power".to_string()];
        n.extend((1..=self.probes.len()).map(|k| format!("mode_{k}")));
        n
    }

    pub fn evaluate(&self, u: &VelocityField) -> Vec<f64> {
        let mut out = vec![u.norm_h_sq(), u.norm_v_sq(), u.norm_lp(self.r + 1.0).powf(self.r + 1.0)];
        out.extend(self.probes.iter().map(|e| u.dot(e)));
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal bins over the range of `xs`.
    pub fn of(xs: &[f64], bins: usize) -> Self {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bins = bins.max(1);
        let (lo, hi) = if xs.is_empty() { (0.0, 1.0) } else if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &x in xs {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureStats {
    pub names: Vec<String>,
    pub seeds: Vec<u64>,
    /// `[seed][observable]` time average after burn-in.
    pub per_seed: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Standard error of the cross-seed mean.
    pub std_err: Vec<f64>,
    pub histograms: Vec<Histogram>,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Time averages of `obs` over `[burn_in, t_end]` for each seed, from `u0` at 0.
pub fn empirical_measure(
    sys: &System,
    noise: &NoiseSpec,
    seeds: &[u64],
    u0: &VelocityField,
    burn_in: f64,
    t_end: f64,
    dt: f64,
    obs: &ObservableSet,
    bins: usize,
) -> Result<MeasureStats> {
    if !(burn_in >= 0.0 && burn_in < t_end) {
        return Err(Error::Invalid(format!("need 0 <= burn_in < T, got {burn_in} and {t_end}")));
    }
    if seeds.is_empty() {
        return Err(Error::Invalid("empirical measure needs at least one seed".into()));
    }
    let n_obs = obs.names().len();
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let path = sample_ou_path(seed, noise, 0.0, t_end, dt)?;
            let n = crate::solver::steps_between(0.0, t_end, dt)?;
            let n_burn = (burn_in / dt).round() as usize;
            let mut v = u0.sub(&sys.z(&path.values_at(0.0)?));
            let mut sums = vec![0.0; n_obs];
            let mut samples = Vec::with_capacity(n + 1 - n_burn);
            for k in 0..=n {
                let t = k as f64 * dt;
                let y = path.values_at(t)?;
                if k >= n_burn {
                    let vals = obs.evaluate(&v.add(&sys.z(&y)));
                    for (s, x) in sums.iter_mut().zip(&vals) {
                        *s += x;
                    }
                    samples.push(vals);
                }
                if k < n {
                    v = sys.step(&v, &y, dt, false)?.v;
                    if !v.is_finite() {
                        return Err(Error::NumericalAbort { step: k, time: t });
                    }
                }
            }
            let count = samples.len() as f64;
            Ok((sums.into_iter().map(|s| s / count).collect::<Vec<f64>>(), samples))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_seed: Vec<Vec<f64>> = runs.iter().map(|r| r.0.clone()).collect();
    let mut mean = Vec::new();
    let mut std_err = Vec::new();
    let mut histograms = Vec::new();
    for j in 0..n_obs {
        let col: Vec<f64> = per_seed.iter().map(|r| r[j]).collect();
        let (m, se) = mean_and_se(&col);
        mean.push(m);
        std_err.push(se);
        let all: Vec<f64> = runs.iter().flat_map(|r| r.1.iter().map(move |s| s[j])).collect();
        histograms.push(Histogram::of(&all, bins));
    }
    Ok(MeasureStats { names: obs.names(), seeds: seeds.to_vec(), per_seed, mean, std_err, histograms })
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingReport {
    pub times: Vec<f64>,
    /// `‖u1(t) - u2(t)‖²`.
    pub x_sq: Vec<f64>,
    pub lambda1: f64,
    /// Slack coefficient `c` in `c·dt·t`.
    pub slack: f64,
    /// Steps where the inequality fails while `‖X‖` is resolved.
    pub violations: Vec<usize>,
    /// Smallest `c` that would make every resolved step pass.
    pub needed_slack: f64,
    /// Last time with `‖X‖` above the roundoff floor.
    pub last_resolved: f64,
    pub floor: f64,
    /// Least-squares slope of `log‖X‖²` over the resolved part; `None` when `X ≡ 0`.
    pub fitted_rate: Option<f64>,
    /// Rate of the expectation envelope, `(2/μ²α)‖f‖² + (2/μ²)Tr - μλ1 - 2α`.
    pub envelope_rate: f64,
}

impl CouplingReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs two trajectories on the same path and checks
/// `log‖X(t)‖² <= log‖X(0)‖² - (μλ1 + 2α)t + (2/μ)∫‖u1‖²_V + c·dt·t` per step.
pub fn coupling_decay(
    sys: &System,
    path: &OuPath,
    u10: &VelocityField,
    u20: &VelocityField,
    t_end: f64,
    dt: f64,
    slack: f64,
    trace: f64,
) -> Result<CouplingReport> {
    let p = sys.params;
    let lambda1 = ground_eigenvalue(&sys.ws)?;
    let n = crate::solver::steps_between(0.0, t_end, dt)?;
    let z0 = sys.z(&path.values_at(0.0)?);
    let mut v1 = u10.sub(&z0);
    let mut v2 = u20.sub(&z0);
    let x0 = u10.sub(u20).norm_h_sq();
    let mut times = Vec::with_capacity(n + 1);
    let mut x_sq = Vec::with_capacity(n + 1);
    let mut violations = Vec::new();
    let mut needed: f64 = 0.0;
    let mut integral = 0.0;
    let mut scale = u10.norm_h().max(u20.norm_h());
    let mut resolved = true;
    let mut last_resolved = 0.0;
    let mut fit = Vec::new();
    let rate = p.mu * lambda1 + 2.0 * p.alpha;
    let mut floor = roundoff_floor(sys, scale);
    for k in 0..=n {
        let t = k as f64 * dt;
        let y = path.values_at(t)?;
        let z = sys.z(&y);
        let u1 = v1.add(&z);
        let x = v1.sub(&v2).norm_h_sq();
        times.push(t);
        x_sq.push(x);
        scale = scale.max(u1.norm_h()).max(v2.add(&z).norm_h());
        floor = roundoff_floor(sys, scale);
        if x0 > 0.0 && resolved && x.sqrt() > floor {
            last_resolved = t;
            fit.push((t, x.ln()));
            if k > 0 {
                let bound = x0.ln() - rate * t + 2.0 / p.mu * integral;
                let excess = x.ln() - bound;
                if excess > slack * dt * t {
                    violations.push(k);
                }
                needed = needed.max(excess / (dt * t));
            }
        } else {
            resolved = false;
        }
        if k == n {
            break;
        }
        integral += u1.norm_v_sq() * dt;
        v1 = sys.step(&v1, &y, dt, false)?.v;
        v2 = sys.step(&v2, &y, dt, false)?.v;
        if !v1.is_finite() || !v2.is_finite() {
            return Err(Error::NumericalAbort { step: k, time: t });
        }
    }
    let fitted_rate = if fit.len() >= 2 { Some(slope(&fit)) } else { None };
    let f_sq = sys.f.norm_h_sq();
    let envelope_rate = 2.0 / (p.mu * p.mu * p.alpha) * f_sq + 2.0 / (p.mu * p.mu) * trace - rate;
    Ok(CouplingReport {
        times,
        x_sq,
        lambda1,
        slack,
        violations,
        needed_slack: needed,
        last_resolved,
        floor,
        fitted_rate,
        envelope_rate,
    })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Left and right sides of the uniqueness condition, plus the operator-norm
/// side condition with `‖i*‖² <- max_k σ_k² ‖g_k‖²`.
#[derive(Clone, Debug, Serialize)]
pub struct UniquenessCondition {
    pub lhs: f64,
    pub rhs: f64,
    pub norm_lhs: f64,
    pub norm_rhs: f64,
}

impl UniquenessCondition {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs && self.norm_lhs <= self.norm_rhs
    }
}

pub fn uniqueness_condition(sys: &System, noise: &NoiseSpec) -> Result<UniquenessCondition> {
    let p = sys.params;
    let lambda1 = ground_eigenvalue(&sys.ws)?;
    let i_star = noise
        .modes
        .iter()
        .map(|m| m.sigma * m.sigma * m.profile.norm_h_sq())
        .fold(0.0, f64::max);
    Ok(UniquenessCondition {
        lhs: 2.0 / (p.mu * p.mu * p.alpha) * sys.f.norm_h_sq() + 2.0 / (p.mu * p.mu) * noise.trace(),
        rhs: p.mu * lambda1 + 2.0 * p.alpha,
        norm_lhs: 2.0 / (p.mu * p.mu),
        norm_rhs: if i_star > 0.0 { p.alpha / (2.0 * i_star) } else { f64::INFINITY },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpMomentReport {
    pub eps: f64,
    pub t: f64,
    pub samples: usize,
    pub estimate: f64,
    pub std_err: f64,
    pub bound: f64,
}

impl ExpMomentReport {
    /// Estimate within three standard errors of the bound or below it.
    pub fn holds(&self) -> bool {
        self.estimate <= self.bound + 3.0 * self.std_err
    }
}

/// Largest `ε·Z` allowed before the exponential is deemed to overflow.
const EXP_GUARD: f64 = 600.0;

/// `E[exp(ε(‖u(t)‖² + μ∫‖u‖²_V))]` against `exp(ε(‖u0‖² + t‖f‖²/α + t Tr))`.
pub fn exp_moment_check(
    sys: &System,
    noise: &NoiseSpec,
    seeds: &[u64],
    u0: &VelocityField,
    eps: f64,
    t_end: f64,
    dt: f64,
) -> Result<ExpMomentReport> {
    if !(eps >= 0.0) || seeds.is_empty() {
        return Err(Error::Invalid("need eps >= 0 and at least one seed".into()));
    }
    let p = sys.params;
    let n = crate::solver::steps_between(0.0, t_end, dt)?;
    let bound_exp = eps * (u0.norm_h_sq() + t_end / p.alpha * sys.f.norm_h_sq() + t_end * noise.trace());
    if bound_exp > EXP_GUARD {
        return Err(Error::Invalid(format!(
            "exponential moment overflows at eps = {eps}; try eps <= {:.3e}",
            EXP_GUARD * eps / bound_exp
        )));
    }
    let zs = seeds
        .par_iter()
        .map(|&seed| {
            let path = sample_ou_path(seed, noise, 0.0, t_end, dt)?;
            let mut v = u0.sub(&sys.z(&path.values_at(0.0)?));
            let mut integral = 0.0;
            // right-point rule, the level at which the step is dissipative
            for k in 0..n {
                let y = path.values_at(k as f64 * dt)?;
                v = sys.step(&v, &y, dt, false)?.v;
                integral += v.add(&sys.z(&path.values_at((k + 1) as f64 * dt)?)).norm_v_sq() * dt;
            }
            let u = v.add(&sys.z(&path.values_at(t_end)?));
            Ok(u.norm_h_sq() + p.mu * integral)
        })
        .collect::<Result<Vec<f64>>>()?;
    let z_max = zs.iter().copied().fold(0.0, f64::max);
    if eps * z_max > EXP_GUARD {
        let z_ref = z_max.max(bound_exp / eps);
        return Err(Error::Invalid(format!(
            "exponential moment overflows at eps = {eps}; try eps <= {:.3e}",
            EXP_GUARD / z_ref
        )));
    }
    let vals: Vec<f64> = zs.iter().map(|z| (eps * z).exp()).collect();
    let (estimate, se) = mean_and_se(&vals);
    Ok(ExpMomentReport {
        eps,
        t: t_end,
        samples: vals.len(),
        estimate,
        std_err: if se.is_nan() { 0.0 } else { se },
        bound: bound_exp.exp(),
    })
}
