//! Re-derives the frozen calibration constants.
//!
//! `cargo run --release -p scbf --example calibrate`

use scbf::config::RunConfig;
use scbf::noise::sample_ou_path;
use scbf::rds::{absorbing_radius, absorption_check, calibrate_absorbing_constant};
use scbf::solver::{calibrate_v_ledger, integrate, RecordOptions};

const ABSORBING: &str = include_str!("../../../configs/absorbing.toml");

/// Offsets after the entry time at which absorption is checked.
pub const ENTRY_OFFSETS: [f64; 4] = [0.0, 1.0, 2.0, 4.0];

fn main() -> scbf::Result<()> {
    let cfg = RunConfig::parse(ABSORBING)?;
    let ws = cfg.workspace(cfg.main_domain()?)?;
    let noise = cfg.noise_spec(&ws)?;
    let sys = cfg.system_on(cfg.domain.m, &ws, &noise)?;
    let (dt, horizon) = (cfg.time.dt, cfg.experiment.pullback.absorbing_horizon);
    let mut runs = Vec::new();
    for seed in 1000..1010 {
        let path = sample_ou_path(seed, &noise, -horizon, 0.0, dt)?;
        let est = absorbing_radius(&sys, &path, 1.0, horizon)?;
        let check = absorption_check(&sys, &path, &est, 10.0, cfg.experiment.pullback.ic_count, &ENTRY_OFFSETS, dt)?;
        println!("seed {seed}: L(M=1) {:.4e}  entry {:.3}  max |v|^2 {:.4e}", est.l_hat, check.entry_time,
            check.v_sq.iter().copied().fold(0.0, f64::max));
        runs.push((est, check));
    }
    println!("absorbing M (safety 2): {:.4e}", calibrate_absorbing_constant(&runs, 2.0));

    let cfg = RunConfig::default();
    let ws = cfg.workspace(cfg.main_domain()?)?;
    let noise = cfg.noise_spec(&ws)?;
    let sys = cfg.system_on(cfg.domain.m, &ws, &noise)?;
    let sim = &cfg.experiment.simulate;
    let opts = RecordOptions { v_ledger: true, ..RecordOptions::default() };
    let mut records = Vec::new();
    for seed in 1..=10 {
        let path = sample_ou_path(seed, &noise, 0.0, cfg.time.t_end, cfg.time.dt)?;
        let v0 = sim.initial.build(&sys.ws)?.sub(&sys.z(&path.values_at(0.0)?));
        let rec = integrate(&sys, &v0, &path, 0.0, cfg.time.t_end, cfg.time.dt, &opts)?;
        let c = calibrate_v_ledger(&[&rec.rows]);
        println!("seed {seed}: V-ledger C {c:.4}");
        records.push(rec);
    }
    let rows: Vec<&[_]> = records.iter().map(|r| r.rows.as_slice()).collect();
    println!("V-ledger C (safety 2): {:.4}", 2.0 * calibrate_v_ledger(&rows));
    Ok(())
}
