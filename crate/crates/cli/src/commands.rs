//! The four run modes. Each writes into its own output directory and returns
//! the process exit code; hard errors come back as `Err`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use thinfilm::bounds::{
    detect_period, existence_ladder, h1_offset, interpolation_check, k_constant,
    local_existence_time, standard_reports, write_diagnostics_csv, BoundReport, PeriodEstimate,
};
use thinfilm::evolve::{run, EvolveConfig, Trajectory};
use thinfilm::steady::{
    asymptotic_guess, capillary_solve, continue_branch, critical_flux, moffatt_profile,
    nonexistence_threshold, pukhnachov_bound, solvability_residuals, write_branch_csv,
    ContinuationMode, ContinuationStep, SteadyProfile,
};
use thinfilm::{Params, PeriodicField};

use crate::config::{build_params_with, Mode, RawConfig, RunConfig, SteadyParameter};

pub const ARTIFACT: &str = "thinfilm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit code when a hard-failure bound report fires in check mode.
pub const EXIT_BOUND_FAILURE: i32 = 2;

#[derive(Serialize)]
struct Manifest<'a> {
    artifact: &'static str,
    version: &'static str,
    mode: Mode,
    seed: u64,
    /// The configuration file exactly as read.
    config_text: &'a str,
    /// The configuration after command-line overrides.
    config: &'a RawConfig,
    results: Value,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_manifest(dir: &Path, cfg: &RunConfig, text: &str, results: Value) -> Result<()> {
    let m = Manifest {
        artifact: ARTIFACT,
        version: VERSION,
        mode: cfg.mode,
        seed: cfg.raw.seed,
        config_text: text,
        config: &cfg.raw,
        results,
    };
    write_json(&dir.join("manifest.json"), &m)
}

fn write_field(path: &Path, h: &PeriodicField) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    h.write_csv(&mut w, "h")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SnapshotEntry {
    index: usize,
    t: f64,
    file: String,
}

/// Snapshot CSVs plus `diagnostics.csv`; returns the snapshot index.
fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<SnapshotEntry>> {
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps).with_context(|| format!("creating {}", snaps.display()))?;
    let mut index = Vec::with_capacity(traj.snapshots.len());
    for (i, s) in traj.snapshots.iter().enumerate() {
        let name = format!("snapshots/snap_{i:04}.csv");
        write_field(&dir.join(&name), &s.h)?;
        index.push(SnapshotEntry {
            index: i,
            t: s.t,
            file: name,
        });
    }
    let path = dir.join("diagnostics.csv");
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    write_diagnostics_csv(&mut w, traj.diagnostics())?;
    w.flush()?;
    Ok(index)
}

/// Bound reports and existence-time data for a finished run.
fn bound_summary(traj: &Trajectory, p: &Params, ev: &EvolveConfig, max_rungs: usize) -> Result<(Vec<BoundReport>, Value)> {
    let reports = standard_reports(traj, p, ev.newton_tol)?;
    let Some(first) = traj.snapshots.first() else {
        return Ok((reports, Value::Null));
    };
    let m = first.diagnostics.mass;
    let t_loc = local_existence_time(&first.h, p).ok();
    let ladder = existence_ladder(traj, p, max_rungs).ok();
    let extra = json!({
        "mass": m,
        "k1_observed": traj.k1_observed,
        "k_constant": k_constant(p, traj.k1_observed, m),
        "h1_offset": h1_offset(p, m),
        "local_existence_time": t_loc,
        "existence_ladder": ladder,
        "floor_violations": traj.floor_violations,
        "concavity_defect": traj.concavity_defect,
    });
    Ok((reports, extra))
}

struct EvolveOutcome {
    results: Value,
    reports: Vec<BoundReport>,
    error: Option<anyhow::Error>,
}

fn evolve_into(dir: &Path, p: &Params, h0: &PeriodicField, ev: &EvolveConfig, max_rungs: usize) -> Result<EvolveOutcome> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let (traj, error) = match run(h0, p, ev) {
        Ok(t) => (t, None),
        Err(f) => {
            let f = *f;
            (f.partial, Some(anyhow::Error::new(f.error).context("evolution failed")))
        }
    };
    let index = write_trajectory(dir, &traj)?;
    let (reports, extra) = if traj.snapshots.is_empty() {
        (Vec::new(), Value::Null)
    } else {
        bound_summary(&traj, p, ev, max_rungs)?
    };
    write_json(
        &dir.join("bounds.json"),
        &json!({ "reports": reports, "summary": extra }),
    )?;
    let last = traj.last();
    let results = json!({
        "termination": traj.termination,
        "steps": traj.steps.len(),
        "snapshots": index,
        "final_t": last.map(|s| s.t),
        "final_min_h": last.map(|s| s.h.min()),
        "bounds_satisfied": reports.iter().all(|r| r.satisfied),
    });
    Ok(EvolveOutcome {
        results,
        reports,
        error,
    })
}

pub fn cmd_evolve(cfg: &RunConfig, text: &str, dir: &Path) -> Result<i32> {
    let out = evolve_into(dir, cfg.params(), cfg.h0(), cfg.evolve(), 8)?;
    write_manifest(dir, cfg, text, out.results)?;
    match out.error {
        Some(e) => Err(e),
        None => Ok(0),
    }
}

pub fn cmd_check(cfg: &RunConfig, text: &str, dir: &Path) -> Result<i32> {
    let spec = cfg.raw.check.clone().unwrap_or_default();
    let run_dir = dir.join("run");
    let out = evolve_into(&run_dir, cfg.params(), cfg.h0(), cfg.evolve(), spec.max_rungs)?;
    if let Some(e) = out.error {
        write_manifest(dir, cfg, text, json!({ "run": out.results }))?;
        return Err(e);
    }

    let mut reports = out.reports;
    let grid = cfg.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.raw.seed);
    let mut drawn = 0;
    while drawn < spec.samples {
        let deg = rng.random_range(1..=spec.max_degree.max(1));
        let mean: f64 = rng.random_range(0.0..2.0);
        let coef: Vec<(f64, f64)> = (0..deg)
            .map(|_| (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
            .collect();
        let h = grid.sample(|x| {
            mean + coef
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let k = (k + 1) as f64;
                    a * (k * x).cos() + b * (k * x).sin()
                })
                .sum::<f64>()
        });
        if h.min() < 0.0 {
            continue;
        }
        let mut r = interpolation_check(&h)?;
        r.name = format!("interpolation/random#{drawn}");
        reports.push(r);
        drawn += 1;
    }
    for c in [1e-3, 0.3, 1.0] {
        let r = interpolation_check(&grid.constant(c))?;
        reports.push(BoundReport::new(
            format!("interpolation/constant={c}/equality"),
            (r.lhs - r.rhs).abs(),
            1e-12 * r.rhs.max(1.0),
            0.0,
        ));
    }

    let failures: Vec<&str> = reports
        .iter()
        .filter(|r| !r.satisfied)
        .map(|r| r.name.as_str())
        .collect();
    write_json(
        &dir.join("bounds.json"),
        &json!({ "reports": reports, "hard_failures": failures }),
    )?;
    let code = if failures.is_empty() { 0 } else { EXIT_BOUND_FAILURE };
    write_manifest(
        dir,
        cfg,
        text,
        json!({
            "run": out.results,
            "reports": reports.len(),
            "hard_failures": failures,
            "exit_code": code,
        }),
    )?;
    Ok(code)
}

#[derive(Serialize)]
struct ProfileEntry {
    index: usize,
    q: f64,
    mass: f64,
    min_h: f64,
    max_h: f64,
    residual_sup: f64,
    beta: f64,
    r0: Option<f64>,
    r1: Option<f64>,
    file: String,
}

fn write_profiles(dir: &Path, profiles: &[SteadyProfile], capillary: bool) -> Result<Vec<ProfileEntry>> {
    let pdir = dir.join("profiles");
    fs::create_dir_all(&pdir).with_context(|| format!("creating {}", pdir.display()))?;
    let f = File::create(dir.join("branch.csv")).context("creating branch.csv")?;
    let mut w = BufWriter::new(f);
    write_branch_csv(&mut w, profiles)?;
    w.flush()?;
    let mut out = Vec::with_capacity(profiles.len());
    for (i, p) in profiles.iter().enumerate() {
        let file = format!("profiles/profile_{i:04}.csv");
        write_field(&dir.join(&file), &p.h)?;
        let s = if capillary { solvability_residuals(p).ok() } else { None };
        out.push(ProfileEntry {
            index: i,
            q: p.q,
            mass: p.mass,
            min_h: p.h.min(),
            max_h: p.h.max(),
            residual_sup: p.residual_sup,
            beta: p.beta(),
            r0: s.map(|s| s.r0),
            r1: s.map(|s| s.r1),
            file,
        });
    }
    Ok(out)
}

pub fn cmd_steady(cfg: &RunConfig, text: &str, dir: &Path) -> Result<i32> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let spec = cfg.raw.steady.as_ref().expect("validated");
    let phys = cfg.raw.physical.expect("validated");
    let (mu, chi) = (phys.mu, phys.chi);
    let thresholds = json!({
        "critical_flux": critical_flux(mu).ok(),
        "nonexistence_threshold": nonexistence_threshold(mu).ok(),
        "pukhnachov_bound": pukhnachov_bound(mu).ok(),
    });

    if chi == 0.0 {
        let mut profiles = Vec::new();
        let mut missing = Vec::new();
        for &q in &spec.values {
            match moffatt_profile(mu, q, cfg.grid)? {
                Some(p) => profiles.push(p),
                None => missing.push(q),
            }
        }
        let entries = write_profiles(dir, &profiles, false)?;
        write_manifest(
            dir,
            cfg,
            text,
            json!({
                "model": "zero_surface_tension",
                "thresholds": thresholds,
                "profiles": entries,
                "no_smooth_profile": missing,
            }),
        )?;
        return Ok(0);
    }

    let step = |target: f64| ContinuationStep {
        mode: match spec.parameter {
            SteadyParameter::Flux => ContinuationMode::FixedFlux,
            SteadyParameter::Mass => ContinuationMode::FixedMass,
        },
        target,
        max_newton: spec.max_newton,
        tol: spec.tol,
    };
    let v0 = spec.values[0];
    let q0 = match spec.parameter {
        SteadyParameter::Flux => v0,
        SteadyParameter::Mass => v0 / cfg.grid.length(),
    };
    let init = SteadyProfile::new(asymptotic_guess(q0, cfg.grid), q0, mu, chi);
    let start = capillary_solve(&init, &step(v0)).context("steady solve at the first target")?;
    let schedule: Vec<_> = spec.values[1..].iter().map(|&v| step(v)).collect();
    let branch = continue_branch(&start, &schedule, spec.min_increment)?;
    let entries = write_profiles(dir, &branch.profiles, true)?;
    write_manifest(
        dir,
        cfg,
        text,
        json!({
            "model": "capillary",
            "thresholds": thresholds,
            "profiles": entries,
            "stopped": branch.stopped.map(|e| e.to_string()),
        }),
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct SweepEntry {
    index: usize,
    value: f64,
    dir: String,
    /// Period of the energy series over the tail window.
    period: Option<PeriodEstimate>,
    result: Value,
    error: Option<String>,
}

fn tail_period(dir: &Path, window: f64, tol: f64) -> Result<PeriodEstimate> {
    let text = fs::read_to_string(dir.join("diagnostics.csv"))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (Some(ti), Some(ei)) = (col("t"), col("energy")) else {
        anyhow::bail!("diagnostics.csv lacks t/energy columns");
    };
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            Ok((c[ti].parse::<f64>()?, c[ei].parse::<f64>()?))
        })
        .collect::<Result<_>>()?;
    let t_end = rows.last().map_or(0.0, |r| r.0);
    let tail: Vec<_> = rows
        .into_iter()
        .filter(|(t, _)| *t >= (1.0 - window) * t_end)
        .collect();
    Ok(detect_period(&tail, tol))
}

pub fn cmd_sweep(cfg: &RunConfig, text: &str, dir: &Path) -> Result<i32> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let spec = cfg.raw.sweep.as_ref().expect("validated");
    let ev = cfg.evolve();
    let job = |(i, &v): (usize, &f64)| -> SweepEntry {
        let name = format!("run_{i:03}");
        let sub = dir.join(&name);
        let mut entry = SweepEntry {
            index: i,
            value: v,
            dir: name,
            period: None,
            result: Value::Null,
            error: None,
        };
        let p = match build_params_with(&cfg.raw, cfg.grid, &cfg.base, Some((spec.parameter, v))) {
            Ok(p) => p,
            Err(e) => {
                entry.error = Some(e.to_string());
                return entry;
            }
        };
        match evolve_into(&sub, &p, cfg.h0(), ev, 8) {
            Ok(mut out) => {
                out.results["sweep"] = json!({ "parameter": spec.parameter, "value": v });
                if let Err(e) = write_manifest(&sub, cfg, text, out.results.clone()) {
                    entry.error = Some(format!("{e:#}"));
                }
                entry.result = out.results;
                if let Some(e) = out.error {
                    entry.error = Some(format!("{e:#}"));
                }
                entry.period = tail_period(&sub, spec.period_window, spec.period_tol).ok();
            }
            Err(e) => entry.error = Some(format!("{e:#}")),
        }
        entry
    };
    let entries: Vec<SweepEntry> = match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| spec.values.par_iter().enumerate().map(job).collect()),
        None => spec.values.par_iter().enumerate().map(job).collect(),
    };
    let failed = entries.iter().filter(|e| e.error.is_some()).count();
    write_json(
        &dir.join("sweep_index.json"),
        &json!({ "parameter": spec.parameter, "runs": entries }),
    )?;
    write_manifest(
        dir,
        cfg,
        text,
        json!({ "runs": spec.values.len(), "failed": failed, "index": "sweep_index.json" }),
    )?;
    if failed > 0 {
        anyhow::bail!("{failed} of {} sweep runs failed (see sweep_index.json)", spec.values.len());
    }
    Ok(0)
}
