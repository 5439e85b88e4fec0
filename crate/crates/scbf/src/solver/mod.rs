//! Time integration of the transformed pathwise system `u = v + z`, with
//! energy bookkeeping.
//!
//! One step from `t_n` with `w_n = v_n + z_n`:
//!
//! ```text
//! x       = P(v_n + dt E_n),   E_n = -B(w_n) - β C(w_n) + f + N_n
//! v_{n+1} = ((1 + α dt) I + μ dt A_h)^{-1} x
//! N_n     = Σ_k σ_k y_k(t_n) [(η_k - α) g_k - μ A_h g_k]
//! ```

mod ledger;

pub use ledger::{
    calibrate_v_ledger, energy_ledger, energy_residual_total, v_ledger, v_ledger_linear, LedgerTerms, VLedgerCheck,
    VLedgerTerms,
};

use crate::error::{Error, Result};
use crate::grid::VelocityField;
use crate::noise::{combine, DomainNoise, NoiseSpec, OuPath};
use crate::operators::{damping_raw, AdvectionForm, OperatorWorkspace};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsParams {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    #[serde(default = "default_advection")]
    pub advection: AdvectionForm,
}

fn default_advection() -> AdvectionForm {
    AdvectionForm::SkewSymmetric
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::Invalid("alpha and beta must be non-negative".into()));
        }
        if !(self.r >= 1.0 && self.r.is_finite()) {
            return Err(Error::Invalid(format!("absorption exponent r must be at least 1, got {}", self.r)));
        }
        Ok(())
    }
}

/// Beyond this the explicit damping update is refused.
pub const MAX_DAMPING_SUBSTEPS: usize = 10_000;

/// What to do when a step exceeds the explicit advection limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardPolicy {
    Warn,
    Reject,
    /// Split the step into pieces that satisfy the limit, noise frozen.
    Substep,
}

/// Everything needed to advance states on one domain.
#[derive(Clone, Debug)]
pub struct System {
    pub ws: OperatorWorkspace,
    pub params: PhysicsParams,
    /// Projected forcing on this domain.
    pub f: VelocityField,
    pub noise: DomainNoise,
    pub cfl_policy: GuardPolicy,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub v: VelocityField,
    pub damping_substeps: usize,
    /// Number of advection-limited pieces when the guard splits the step.
    pub cfl_substeps: usize,
    pub cfl_exceeded: bool,
    pub ledger: Option<LedgerTerms>,
}

impl System {
    /// `f_ref` and the noise profiles may live on a larger grid; they are
    /// restricted and projected onto `ws`'s domain.
    pub fn new(ws: OperatorWorkspace, params: PhysicsParams, f_ref: &VelocityField, noise: &NoiseSpec) -> Result<Self> {
        params.validate()?;
        noise.validate()?;
        let f = crate::noise::restrict_profile(f_ref, &ws)?;
        let f = if f_ref.domain == ws.domain { ws.project(&f)? } else { f };
        let noise = noise.on_domain(&ws)?;
        Ok(Self { ws, params, f, noise, cfl_policy: GuardPolicy::Warn })
    }

    pub fn z(&self, y: &[f64]) -> VelocityField {
        combine(&self.noise, y)
    }

    /// `Σ_k σ_k y_k [(η_k - α) g_k - μ A_h g_k]`.
    pub fn noise_drift(&self, y: &[f64]) -> VelocityField {
        let mut out = VelocityField::zeros(self.ws.domain);
        for (m, &yk) in self.noise.modes.iter().zip(y) {
            let c = m.sigma * yk;
            if c == 0.0 {
                continue;
            }
            out.axpy(c * (m.eta - self.params.alpha), &m.g);
            out.axpy(-c * self.params.mu, &m.ag);
        }
        out
    }

    /// `A_h z = Σ σ_k y_k A_h g_k`.
    pub fn stokes_of_z(&self, y: &[f64]) -> VelocityField {
        let mut out = VelocityField::zeros(self.ws.domain);
        for (m, &yk) in self.noise.modes.iter().zip(y) {
            out.axpy(m.sigma * yk, &m.ag);
        }
        out
    }

    /// Right-hand side of the `v` equation, projected.
    pub fn rhs_v(&self, v: &VelocityField, y: &[f64]) -> Result<VelocityField> {
        let p = &self.params;
        let w = v.add(&self.z(y));
        let mut raw = self.ws.neg_laplacian(v);
        raw.scale(-p.mu);
        raw.axpy(-1.0, &self.ws.advection(p.advection).raw(&w, &w));
        raw.axpy(-p.alpha, v);
        if p.beta != 0.0 {
            raw.axpy(-p.beta, &damping_raw(&w, p.r));
        }
        raw.axpy(1.0, &self.f);
        raw.axpy(1.0, &self.noise_drift(y));
        self.ws.project(&raw)
    }

    /// Largest stable step for the explicit advection.
    pub fn cfl_limit(&self, w: &VelocityField) -> f64 {
        if self.params.advection == AdvectionForm::Off {
            return f64::INFINITY;
        }
        let s = w.max_abs_face();
        if s == 0.0 {
            f64::INFINITY
        } else {
            self.ws.domain.h / (4.0 * s)
        }
    }

    /// One IMEX step from `v_n` with OU values `y_n` at `t_n`.
    pub fn step(&self, v: &VelocityField, y: &[f64], dt: f64, with_ledger: bool) -> Result<StepOutcome> {
        let z = self.z(y);
        let drift = self.noise_drift(y);
        let limit = self.cfl_limit(&v.add(&z));
        let cfl_exceeded = dt > limit;
        let mut damping_substeps = 0;
        let mut cfl_substeps = 1;
        let v_next = match (cfl_exceeded, self.cfl_policy) {
            (true, GuardPolicy::Reject) => return Err(Error::Cfl { dt, limit }),
            (true, GuardPolicy::Substep) => {
                let mut u = v.clone();
                let mut done = 0.0;
                while done < dt {
                    let lim = self.cfl_limit(&u.add(&z));
                    let k = ((dt - done) / lim).ceil().max(1.0);
                    let h = if k > 1.0 { (dt - done) / k } else { dt - done };
                    let (next, sub) = self.imex(&u, &z, &drift, h)?;
                    damping_substeps += sub;
                    cfl_substeps += 1;
                    u = next;
                    done += h;
                    if k <= 1.0 {
                        break;
                    }
                }
                cfl_substeps -= 1;
                u
            }
            _ => {
                let (next, sub) = self.imex(v, &z, &drift, dt)?;
                damping_substeps = sub;
                next
            }
        };
        let ledger = with_ledger.then(|| self.ledger_terms(v, &v_next, &z, &drift, dt));
        Ok(StepOutcome { v: v_next, damping_substeps, cfl_substeps, cfl_exceeded, ledger })
    }

    fn imex(&self, v: &VelocityField, z: &VelocityField, drift: &VelocityField, dt: f64) -> Result<(VelocityField, usize)> {
        let p = &self.params;
        let w = v.add(z);
        let mut x = v.clone();
        let mut substeps = 0;
        if p.beta != 0.0 {
            let stiffness = if p.r == 1.0 { 1.0 } else { w.max_speed().powf(p.r - 1.0) };
            let load = dt * p.beta * stiffness;
            if load <= 0.5 {
                x.axpy(-dt * p.beta, &damping_raw(&w, p.r));
            } else {
                if 2.0 * load > MAX_DAMPING_SUBSTEPS as f64 || !load.is_finite() {
                    return Err(Error::Cfl { dt, limit: 0.5 * dt / load });
                }
                substeps = (2.0 * load).ceil() as usize;
                let h = dt / substeps as f64;
                for _ in 0..substeps {
                    let c = damping_raw(&x.add(z), p.r);
                    x.axpy(-h * p.beta, &c);
                }
            }
        }
        x.axpy(-dt, &self.ws.advection(p.advection).raw(&w, &w));
        x.axpy(dt, &self.f);
        x.axpy(dt, drift);
        let b = self.ws.project(&x)?;
        Ok((self.ws.stokes_solve(&b, 1.0 + p.alpha * dt, p.mu * dt)?, substeps))
    }

    fn ledger_terms(&self, v: &VelocityField, v_next: &VelocityField, z: &VelocityField, drift: &VelocityField, dt: f64) -> LedgerTerms {
        let p = &self.params;
        let w = v.add(z);
        LedgerTerms {
            energy_change: v_next.norm_h_sq() - v.norm_h_sq(),
            viscous: p.mu * v_next.norm_v_sq(),
            darcy: p.alpha * v_next.norm_h_sq(),
            advection: self.ws.advection(p.advection).raw(&w, &w).dot(v),
            damping: if p.beta != 0.0 { p.beta * damping_raw(&w, p.r).dot(v) } else { 0.0 },
            forcing: self.f.dot(v),
            noise: drift.dot(v),
            dt,
        }
    }

    /// `u = v + z(t)`.
    pub fn reconstruct_u(&self, v: &VelocityField, path: &OuPath, t: f64) -> Result<VelocityField> {
        Ok(v.add(&self.z(&path.values_at(t)?)))
    }
}

/// Advances `v0` from `t0` to `t1` without recording.
pub fn advance(sys: &System, v0: &VelocityField, path: &OuPath, t0: f64, t1: f64, dt: f64) -> Result<VelocityField> {
    let n_steps = steps_between(t0, t1, dt)?;
    let mut v = v0.clone();
    for n in 0..n_steps {
        let t = t0 + n as f64 * dt;
        v = sys.step(&v, &path.values_at(t)?, dt, false)?.v;
        if !v.is_finite() {
            return Err(Error::NumericalAbort { step: n, time: t });
        }
    }
    Ok(v)
}

/// Diagnostic pressure of the assembled velocity `w = v + z`.
pub fn pressure_recover(sys: &System, w: &VelocityField) -> Result<crate::grid::ScalarField> {
    sys.ws.pressure_recover(w, sys.params.beta, sys.params.r)
}

/// `u = v + z(t)` on the system's domain.
pub fn reconstruct_u(sys: &System, v: &VelocityField, path: &OuPath, t: f64) -> Result<VelocityField> {
    sys.reconstruct_u(v, path, t)
}

#[derive(Clone, Debug, Default)]
pub struct RecordOptions {
    pub energy_ledger: bool,
    pub v_ledger: bool,
    /// Cut-off radius for the tail mass of `v`.
    pub tail_radius: Option<f64>,
    /// Times at which `(v, u)` are kept.
    pub snapshot_times: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecordRow {
    pub t: f64,
    pub v_h: f64,
    pub v_v: f64,
    pub u_h: f64,
    pub u_v: f64,
    /// `‖u‖_{L^{r+1}}`.
    pub u_lr: f64,
    pub tail: Option<f64>,
    /// Terms of the step leaving `t`.
    pub ledger: Option<LedgerTerms>,
    pub v_ledger: Option<VLedgerTerms>,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub v: VelocityField,
    pub u: VelocityField,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub dt: f64,
    pub rows: Vec<RecordRow>,
    pub snapshots: Vec<Snapshot>,
    pub final_v: VelocityField,
    pub final_u: VelocityField,
    pub cfl_violations: usize,
    pub damping_substeps: usize,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// CSV with one column per recorded quantity.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "t,v_h,v_v,u_h,u_v,u_lr,tail,energy_change,viscous,darcy,advection,damping,forcing,noise,energy_residual,v_v_change_rate,stokes_v_sq,q,q_tilde"
        )?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        for r in &self.rows {
            let l = r.ledger.as_ref();
            let vl = r.v_ledger.as_ref();
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.v_h,
                r.v_v,
                r.u_h,
                r.u_v,
                r.u_lr,
                opt(r.tail),
                opt(l.map(|l| l.energy_change)),
                opt(l.map(|l| l.viscous)),
                opt(l.map(|l| l.darcy)),
                opt(l.map(|l| l.advection)),
                opt(l.map(|l| l.damping)),
                opt(l.map(|l| l.forcing)),
                opt(l.map(|l| l.noise)),
                opt(l.map(|l| l.residual())),
                opt(vl.map(|l| l.v_norm_rate)),
                opt(vl.map(|l| l.stokes_sq)),
                opt(vl.map(|l| l.q)),
                opt(vl.map(|l| l.q_tilde)),
            )?;
        }
        Ok(())
    }
}

pub(crate) fn steps_between(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    let q = (t1 - t0) / dt;
    let n = q.round();
    if n < 0.0 || (q - n).abs() > 1e-6 {
        return Err(Error::Invalid(format!("[{t0}, {t1}] is not a whole number of steps of {dt}")));
    }
    Ok(n as usize)
}

/// Advances `v0` from `t0` to `t1` on `path`, recording every step.
pub fn integrate(
    sys: &System,
    v0: &VelocityField,
    path: &OuPath,
    t0: f64,
    t1: f64,
    dt: f64,
    opts: &RecordOptions,
) -> Result<TrajectoryRecord> {
    v0.check_same_grid(&VelocityField::zeros(sys.ws.domain))?;
    let n_steps = steps_between(t0, t1, dt)?;
    if !path.covers(t0, t1) {
        return Err(Error::Invalid(format!(
            "noise path [{}, {}] does not cover [{t0}, {t1}]",
            path.t_start(),
            path.t_end()
        )));
    }
    if opts.v_ledger && sys.params.r > 3.0 {
        return Err(Error::Invalid("the V-level ledger only applies for r <= 3".into()));
    }
    let r = sys.params.r;
    let f_sq = sys.f.norm_h_sq();
    if !v0.is_finite() {
        return Err(Error::NumericalAbort { step: 0, time: t0 });
    }
    let mut v = v0.clone();
    let mut rows = Vec::with_capacity(n_steps + 1);
    let mut snapshots = Vec::new();
    let mut cfl_violations = 0;
    let mut damping_substeps = 0;
    let mut pending_snaps: Vec<f64> = opts.snapshot_times.clone();
    pending_snaps.sort_by(f64::total_cmp);
    let mut snap_at = 0;
    for n in 0..=n_steps {
        let t = t0 + n as f64 * dt;
        let y = path.values_at(t)?;
        let z = sys.z(&y);
        let u = v.add(&z);
        let v_v_sq = v.norm_v_sq();
        let mut row = RecordRow {
            t,
            v_h: v.norm_h(),
            v_v: v_v_sq.sqrt(),
            u_h: u.norm_h(),
            u_v: u.norm_v(),
            u_lr: u.norm_lp(r + 1.0),
            tail: opts.tail_radius.map(|k| crate::rds::tail_mass(&v, k).smooth),
            ledger: None,
            v_ledger: None,
        };
        while snap_at < pending_snaps.len() && pending_snaps[snap_at] <= t + 0.5 * dt {
            if (pending_snaps[snap_at] - t).abs() <= 0.5 * dt {
                snapshots.push(Snapshot { t, v: v.clone(), u: u.clone() });
            }
            snap_at += 1;
        }
        if n == n_steps {
            rows.push(row);
            return Ok(TrajectoryRecord { dt, rows, snapshots, final_v: v, final_u: u, cfl_violations, damping_substeps });
        }
        let out = sys.step(&v, &y, dt, opts.energy_ledger)?;
        if !out.v.is_finite() {
            return Err(Error::NumericalAbort { step: n, time: t });
        }
        cfl_violations += out.cfl_exceeded as usize;
        damping_substeps += out.damping_substeps;
        row.ledger = out.ledger;
        if opts.v_ledger {
            let az = sys.stokes_of_z(&y);
            let av_next = sys.ws.stokes_apply(&out.v)?;
            row.v_ledger = Some(VLedgerTerms::new(
                (out.v.norm_v_sq() - v_v_sq) / dt,
                av_next.norm_h_sq(),
                v.norm_h_sq(),
                v_v_sq,
                z.norm_h(),
                z.norm_v(),
                az.norm_h(),
                f_sq,
                sys.f.add(&sys.noise_drift(&y)).norm_h_sq(),
                r,
            ));
        }
        rows.push(row);
        v = out.v;
    }
    unreachable!("loop returns on the last row")
}

#[cfg(test)]
mod tests;
