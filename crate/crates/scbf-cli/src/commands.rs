use crate::Failure;
use rayon::prelude::*;
use scbf::attractor::upper_semi_experiment;
use scbf::checks::operator_identities;
use scbf::config::RunConfig;
use scbf::grid::{snapshot, FieldTexture, VelocityField};
use scbf::measure::{coupling_decay, empirical_measure, exp_moment_check, uniqueness_condition, ObservableSet};
use scbf::noise::{sample_ou_path, NoiseSpec, OuPath};
use scbf::operators::{spectrum::stokes_eigenpairs, OperatorWorkspace};
use scbf::rds::{absorbing_radius, pullback_report, IcEnsemble, PullbackConfig};
use scbf::solver::{energy_residual_total, integrate, v_ledger, RecordOptions};
use serde::Serialize;
use serde_json::{json, Value};
use std::cell::RefCell;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

pub struct Context {
    command: &'static str,
    pub cfg: RunConfig,
    threads: Option<usize>,
    out: PathBuf,
    outputs: RefCell<Vec<String>>,
}

impl Context {
    pub fn new(command: &'static str, cfg: RunConfig, threads: Option<usize>) -> Result<Self, Failure> {
        let out = cfg.out_dir.clone();
        std::fs::create_dir_all(&out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
        Ok(Self { command, cfg, threads, out, outputs: RefCell::new(Vec::new()) })
    }

    fn path(&self, name: &str) -> Result<PathBuf, Failure> {
        let p = self.out.join(name);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        self.outputs.borrow_mut().push(name.to_string());
        Ok(p)
    }

    fn write_with<F>(&self, name: &str, f: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), Failure>,
    {
        let p = self.path(name)?;
        let mut w = BufWriter::new(File::create(&p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Failure::Io(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn write_snapshot(&self, name: &str, v: &VelocityField) -> Result<(), Failure> {
        let p = self.path(name)?;
        snapshot::write(&p, v)?;
        Ok(())
    }

    /// Writes the effective config and the manifest, then turns a failed
    /// verdict into an assertion failure when `hard` is set.
    fn finish(&self, seeds: &[u64], verdict: Value, passed: bool, hard: bool) -> Result<(), Failure> {
        std::fs::write(self.out.join("config.toml"), self.cfg.to_toml())?;
        let manifest = json!({
            "command": self.command,
            "version": concat!("scbf ", env!("CARGO_PKG_VERSION")),
            "seed": self.cfg.seed,
            "seeds": seeds,
            "threads": self.threads,
            "rerun": format!("scbf {} --config config.toml", self.command),
            "config": serde_json::to_value(&self.cfg).map_err(|e| Failure::Io(e.to_string()))?,
            "outputs": *self.outputs.borrow(),
            "passed": passed,
            "hard": hard,
            "verdict": verdict,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))?;
        std::fs::write(self.out.join("manifest.json"), text + "\n")?;
        println!("{}: {} (outputs in {})", self.command, if passed { "pass" } else { "FAIL" }, self.out.display());
        if hard && !passed {
            return Err(Failure::Assertion(format!("{} verdict failed; see {}", self.command, self.out.join("manifest.json").display())));
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::Io(e.to_string())
}

fn sigmas(noise: &NoiseSpec) -> Vec<f64> {
    noise.modes.iter().map(|m| m.sigma).collect()
}

fn write_path(ctx: &Context, path: &OuPath, noise: &NoiseSpec) -> Result<(), Failure> {
    ctx.write_with("noise_path.csv", |w| Ok(path.write_csv(w)?))?;
    ctx.write_json("seed_manifest.json", &path.manifest(noise.kind, &sigmas(noise)))
}

pub fn check_invariants(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let ws: OperatorWorkspace = cfg.workspace(cfg.main_domain()?)?;
    let rep = operator_identities(&ws, cfg.physics.advection, &cfg.experiment.invariants, cfg.seed)?;
    for c in &rep.checks {
        println!("{:<36} defect {:>11.3e}  tol {:>9.2e}  {}", c.name, c.defect, c.tolerance, if c.passed { "ok" } else { "FAIL" });
    }
    ctx.write_json("invariants.json", &rep)?;
    let failed: Vec<&str> = rep.failures().iter().map(|c| c.name.as_str()).collect();
    ctx.finish(&[cfg.seed], json!({ "failed": failed }), rep.passed, true)
}

pub fn simulate(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let sim = &cfg.experiment.simulate;
    let (sys, noise) = cfg.main_system()?;
    if let Some(k) = sim.tail_radius {
        if k >= sys.ws.domain.half_width() {
            return Err(Failure::Config(format!("tail_radius {k} must be below the half width {}", sys.ws.domain.m)));
        }
    }
    let (dt, t_end) = (cfg.time.dt, cfg.time.t_end);
    let path = sample_ou_path(cfg.seed, &noise, 0.0, t_end, dt)?;
    let u0 = sim.initial.build(&sys.ws)?;
    let v0 = u0.sub(&sys.z(&path.values_at(0.0)?));
    let with_v_ledger = sim.v_ledger && cfg.physics.r <= 3.0;
    let opts = RecordOptions {
        energy_ledger: sim.energy_ledger,
        v_ledger: with_v_ledger,
        tail_radius: sim.tail_radius,
        snapshot_times: cfg.time.snapshot_times.clone(),
    };
    let rec = integrate(&sys, &v0, &path, 0.0, t_end, dt, &opts)?;
    ctx.write_with("trajectory.csv", |w| Ok(rec.write_csv(w)?))?;
    write_path(ctx, &path, &noise)?;
    for s in &rec.snapshots {
        ctx.write_snapshot(&format!("snapshots/u_t{:.6}.scbf", s.t), &s.u)?;
        ctx.write_snapshot(&format!("snapshots/v_t{:.6}.scbf", s.t), &s.v)?;
    }
    ctx.write_snapshot("snapshots/u_final.scbf", &rec.final_u)?;

    let energy = sim.energy_ledger.then(|| energy_residual_total(&rec.rows));
    let vl = with_v_ledger.then(|| v_ledger(&rec.rows, sim.v_ledger_constant));
    let passed = vl.as_ref().map_or(true, |c| c.passed());
    let verdict = json!({
        "steps": rec.rows.len().saturating_sub(1),
        "energy_residual_total": energy,
        "v_ledger": vl.as_ref().map(|c| json!({
            "constant": c.constant,
            "steps": c.steps,
            "violations": c.violations.len(),
            "max_required": c.max_required,
        })),
        "v_ledger_disabled_reason": (!with_v_ledger && sim.v_ledger).then_some("r > 3: only H-level checks apply"),
        "cfl_violations": rec.cfl_violations,
        "damping_substeps": rec.damping_substeps,
        "final_u_h": rec.final_u.norm_h(),
    });
    ctx.write_json("summary.json", &verdict)?;
    ctx.finish(&[cfg.seed], verdict, passed, sim.hard)
}

pub fn pullback(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let pb = &cfg.experiment.pullback;
    let (sys, noise) = cfg.main_system()?;
    let dt = cfg.time.dt;
    let t_max = *cfg.time.pullback_times.last().expect("validated");
    let path = sample_ou_path(cfg.seed, &noise, -t_max.max(pb.absorbing_horizon), 0.0, dt)?;
    let pcfg = PullbackConfig {
        pullback_times: cfg.time.pullback_times.clone(),
        ics: IcEnsemble::Ball { radius: pb.ic_radius, count: pb.ic_count, texture: FieldTexture::Mixed },
        seed: cfg.seed,
        dt,
    };
    let rep = pullback_report(&sys, &path, &pcfg)?;
    let absorbing = if cfg.physics.r > 1.0 {
        let est = absorbing_radius(&sys, &path, pb.absorbing_m, pb.absorbing_horizon)?;
        ctx.write_with("absorbing_integrand.csv", |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["zeta", "integrand"]).map_err(csv_err)?;
            for (t, x) in &est.integrand {
                c.write_record([format!("{t:e}"), format!("{x:e}")]).map_err(csv_err)?;
            }
            c.flush()?;
            Ok(())
        })?;
        json!({ "L_hat": est.l_hat, "L_star_sq": est.l_star_sq, "M": est.m_const, "horizon": est.horizon })
    } else {
        json!({ "rejected": "r = 1: the exponent 2(r+1)/(r-1) is singular" })
    };
    if let Some(cloud) = &rep.last {
        for (k, s) in cloud.states.iter().enumerate() {
            ctx.write_snapshot(&format!("cloud/state_{k:03}.scbf"), s)?;
        }
    }
    let last = rep.diameters.last().copied().unwrap_or(0.0);
    let converged = rep.contraction() < pb.rel_tol || last <= rep.floor;
    let monotone = rep.monotone(pb.monotone_slack);
    let report = json!({
        "seed": rep.seed,
        "t_list": rep.t_list,
        "initial_diameter": rep.initial_diameter,
        "diameters": rep.diameters,
        "tail_masses": rep.tail_masses,
        "tail_radius": sys.ws.domain.half_width() / 2.0,
        "floor": rep.floor,
        "contraction": rep.contraction(),
        "converged": converged,
        "monotone": monotone,
        "absorbing": absorbing,
    });
    ctx.write_json("pullback_report.json", &report)?;
    write_path(ctx, &path, &noise)?;
    ctx.finish(&[cfg.seed], report, converged && monotone, pb.hard)
}

pub fn upsemi(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let us = &cfg.experiment.upsemi;
    let ucfg = cfg.upsemi_config()?;
    let seeds = cfg.seeds();
    let (rows, summary) = upper_semi_experiment(&ucfg, &seeds)?;
    ctx.write_with("upsemi.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        for r in &rows {
            c.serialize(r).map_err(csv_err)?;
        }
        c.flush()?;
        Ok(())
    })?;
    let mut distinct = cfg.domain.m_list.clone();
    distinct.sort_unstable();
    distinct.dedup();
    // a single domain has no trend to assert
    let passed = distinct.len() < 2 || (summary.trend && summary.below_threshold);
    let verdict = serde_json::to_value(&summary).map_err(|e| Failure::Io(e.to_string()))?;
    ctx.write_json("upsemi_summary.json", &verdict)?;
    ctx.finish(&seeds, verdict, passed, us.hard)
}

#[derive(Serialize)]
struct ErgodicCheck {
    assessed: bool,
    /// Per observable: `|mean_a - mean_b| / sqrt(se_a² + se_b²)`.
    z_scores: Vec<f64>,
    consistent: bool,
}

fn ergodic_split(per_seed: &[Vec<f64>]) -> ErgodicCheck {
    let n = per_seed.len();
    if n < 4 {
        return ErgodicCheck { assessed: false, z_scores: Vec::new(), consistent: true };
    }
    let (a, b) = per_seed.split_at(n / 2);
    let stats = |rows: &[Vec<f64>], j: usize| {
        let k = rows.len() as f64;
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / k;
        let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (k - 1.0);
        (m, var / k)
    };
    let z_scores: Vec<f64> = (0..per_seed[0].len())
        .map(|j| {
            let ((ma, va), (mb, vb)) = (stats(a, j), stats(b, j));
            let se = (va + vb).sqrt();
            if se > 0.0 {
                (ma - mb).abs() / se
            } else if ma == mb {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let consistent = z_scores.iter().all(|&z| z <= 3.0);
    ErgodicCheck { assessed: true, z_scores, consistent }
}

pub fn measure(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let ms = &cfg.experiment.measure;
    let (sys, noise) = cfg.main_system()?;
    let (dt, t_end) = (cfg.time.dt, cfg.time.t_end);
    let seeds = cfg.seeds();
    let probes = if ms.probes > 0 { stokes_eigenpairs(&sys.ws, ms.probes)?.fields } else { Vec::new() };
    let obs = ObservableSet { r: cfg.physics.r, probes };
    let u0 = ms.initial.build(&sys.ws)?;
    let u20 = ms.coupled.build(&sys.ws)?;

    let stats = empirical_measure(&sys, &noise, &seeds, &u0, ms.burn_in, t_end, dt, &obs, ms.bins)?;
    ctx.write_with("measure_per_seed.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        let mut header = vec!["seed".to_string()];
        header.extend(stats.names.iter().cloned());
        c.write_record(&header).map_err(csv_err)?;
        for (seed, row) in stats.seeds.iter().zip(&stats.per_seed) {
            let mut rec = vec![seed.to_string()];
            rec.extend(row.iter().map(|x| format!("{x:e}")));
            c.write_record(&rec).map_err(csv_err)?;
        }
        c.flush()?;
        Ok(())
    })?;
    let ergodic = ergodic_split(&stats.per_seed);

    let trace = noise.trace();
    let couplings = seeds
        .par_iter()
        .map(|&seed| {
            let path = sample_ou_path(seed, &noise, 0.0, t_end, dt)?;
            coupling_decay(&sys, &path, &u0, &u20, t_end, dt, ms.coupling_slack, trace)
        })
        .collect::<scbf::Result<Vec<_>>>()?;
    ctx.write_with("coupling.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["seed", "t", "x_sq"]).map_err(csv_err)?;
        for (seed, rep) in seeds.iter().zip(&couplings) {
            for (t, x) in rep.times.iter().zip(&rep.x_sq) {
                c.write_record([seed.to_string(), format!("{t:e}"), format!("{x:e}")]).map_err(csv_err)?;
            }
        }
        c.flush()?;
        Ok(())
    })?;
    let n = seeds.len() as f64;
    let mean_x0 = couplings.iter().map(|r| r.x_sq[0]).sum::<f64>() / n;
    let mean_xt = couplings.iter().map(|r| *r.x_sq.last().expect("non-empty")).sum::<f64>() / n;
    let coupling_ok = couplings.iter().all(|r| r.passed());
    let uniq = uniqueness_condition(&sys, &noise)?;
    let moment = exp_moment_check(&sys, &noise, &seeds, &u0, ms.eps, ms.moment_horizon, dt)?;

    let verdict = json!({
        "observables": stats.names,
        "mean": stats.mean,
        "std_err": stats.std_err,
        "histograms": stats.histograms,
        "ergodic_split": ergodic,
        "coupling": {
            "per_step_inequality_holds": coupling_ok,
            "slack": ms.coupling_slack,
            "needed_slack": couplings.iter().map(|r| r.needed_slack).collect::<Vec<_>>(),
            "fitted_rate": couplings.iter().map(|r| r.fitted_rate).collect::<Vec<_>>(),
            "envelope_rate": couplings.first().map(|r| r.envelope_rate),
            "lambda1": couplings.first().map(|r| r.lambda1),
            "mean_initial": mean_x0,
            "mean_final": mean_xt,
            "mean_ratio": if mean_x0 > 0.0 { Some(mean_xt / mean_x0) } else { None },
        },
        "uniqueness_condition": { "holds": uniq.holds(), "terms": uniq },
        "exp_moment": { "holds": moment.holds(), "report": moment },
    });
    ctx.write_json("measure_summary.json", &verdict)?;
    let passed = coupling_ok && ergodic.consistent && moment.holds();
    ctx.finish(&seeds, verdict, passed, ms.hard)
}
