use std::path::Path;
use std::time::Instant;

use serde_json::{json, Map, Value};

use hkfp::analysis::{
    dispersion_growth_rate, neutral_sigma2, stability_report, StabilityReport,
};
use hkfp::particles::{empirical_density, ParticleEnsemble};
use hkfp::solver::{picard_solve, solve, Trajectory};
use hkfp::{fourier_multiplier, DensityField, Grid};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{num, sig, write_csv, write_meta};
use crate::sweep::{run_sweep, threshold_curves, CURVE_HEADER, SWEEP_HEADER};

/// Ensembles up to this size get their positions written at every snapshot;
/// larger ones only at the end.
pub const MAX_TRACKED_AGENTS: usize = 1000;

fn prepare_out(cfg: &RunConfig) -> CliResult<&Path> {
    std::fs::create_dir_all(&cfg.out)?;
    Ok(cfg.out.as_path())
}

fn write_trajectory(dir: &Path, traj: &Trajectory) -> CliResult<()> {
    write_csv(
        &dir.join("diagnostics.csv"),
        &["t", "mass", "min_rho", "l1", "psi_l2", "psi_h1"],
        traj.diagnostics.iter().map(|d| vec![num(d.t), num(d.mass), num(d.min_rho), num(d.l1), num(d.psi_l2), num(d.psi_h1)]),
    )?;
    let last = traj.last().expect("trajectory holds the initial state");
    write_field(&dir.join("final.csv"), last)
}

fn write_field(path: &Path, field: &DensityField) -> CliResult<()> {
    let grid = *field.grid();
    write_csv(path, &["x", "rho"], field.values().iter().enumerate().map(|(j, v)| vec![num(grid.node(j)), num(*v)]))
}

pub fn solve_cmd(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate_pde()?;
    let started = Instant::now();
    let params = cfg.params()?;
    let grid = cfg.make_grid()?;
    let rho0 = cfg.initial_condition().build(grid)?;
    let sc = cfg.solver_config(&grid, &params)?;
    let traj = solve(&rho0, &params, &sc)?;
    let dir = prepare_out(cfg)?;
    write_trajectory(dir, &traj)?;
    let (steps, dt) = sc.steps();
    let mut extra = Map::new();
    extra.insert("steps".into(), steps.into());
    extra.insert("dt_used".into(), dt.into());
    write_meta(dir, "solve", cfg, started.elapsed().as_secs_f64(), extra)
}

pub fn picard_cmd(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate_pde()?;
    let started = Instant::now();
    let params = cfg.params()?;
    let grid = cfg.make_grid()?;
    let rho0 = cfg.initial_condition().build(grid)?;
    let sc = cfg.solver_config(&grid, &params)?;
    let outcome = picard_solve(&rho0, &params, &sc)?;
    let dir = prepare_out(cfg)?;
    write_trajectory(dir, &outcome.trajectory)?;
    write_csv(
        &dir.join("picard.csv"),
        &["iteration", "residual"],
        outcome.residuals.iter().enumerate().map(|(i, r)| vec![(i + 1).to_string(), num(*r)]),
    )?;
    let (steps, dt) = sc.steps();
    let mut extra = Map::new();
    extra.insert("steps".into(), steps.into());
    extra.insert("dt_used".into(), dt.into());
    extra.insert("iterations".into(), outcome.iterations.into());
    write_meta(dir, "picard", cfg, started.elapsed().as_secs_f64(), extra)
}

fn histogram_rows(rows: &mut Vec<Vec<String>>, t: f64, ens: &ParticleEnsemble, grid: &Grid) {
    let hist = empirical_density(ens, grid);
    rows.extend(hist.values().iter().enumerate().map(|(j, v)| vec![num(t), num(grid.node(j)), num(*v)]));
}

fn position_rows(rows: &mut Vec<Vec<String>>, t: f64, ens: &ParticleEnsemble) {
    rows.extend(ens.positions().iter().enumerate().map(|(i, x)| vec![num(t), i.to_string(), num(*x)]));
}

pub fn particles_cmd(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate_particles()?;
    let started = Instant::now();
    let params = cfg.params()?;
    let grid = cfg.make_grid()?;
    let mut ens = match &cfg.positions {
        Some(p) => ParticleEnsemble::new(cfg.ell, p.clone(), cfg.seed)?,
        None => ParticleEnsemble::sample(&cfg.initial_condition().build(grid)?, cfg.agents, cfg.seed)?,
    };
    let steps = if cfg.t_end == 0.0 { 0 } else { ((cfg.t_end / cfg.particle_dt) - 1e-9).ceil() as usize };
    let dt = if steps == 0 { cfg.particle_dt } else { cfg.t_end / steps as f64 };
    let track = ens.len() <= MAX_TRACKED_AGENTS;

    let mut hist = Vec::new();
    let mut pos = Vec::new();
    histogram_rows(&mut hist, 0.0, &ens, &grid);
    if track {
        position_rows(&mut pos, 0.0, &ens);
    }
    for k in 1..=steps {
        ens.step_mut(&params, dt, cfg.force);
        if k % cfg.snapshot_every == 0 || k == steps {
            let t = k as f64 * dt;
            histogram_rows(&mut hist, t, &ens, &grid);
            if track {
                position_rows(&mut pos, t, &ens);
            }
        }
    }
    if !track {
        position_rows(&mut pos, steps as f64 * dt, &ens);
    }

    let dir = prepare_out(cfg)?;
    write_csv(&dir.join("histogram.csv"), &["t", "x", "rho"], hist)?;
    write_csv(&dir.join("positions.csv"), &["t", "agent", "x"], pos)?;
    let mut extra = Map::new();
    extra.insert("agents".into(), ens.len().into());
    extra.insert("steps".into(), steps.into());
    extra.insert("dt_used".into(), dt.into());
    write_meta(dir, "particles", cfg, started.elapsed().as_secs_f64(), extra)
}

pub fn sweep_cmd(cfg: &RunConfig) -> CliResult<()> {
    let started = Instant::now();
    let records = run_sweep(cfg)?;
    let dir = prepare_out(cfg)?;
    write_csv(&dir.join("sweep.csv"), &SWEEP_HEADER, records.iter().map(|r| r.row(cfg.record_timings)))?;
    write_csv(&dir.join("thresholds.csv"), &CURVE_HEADER, threshold_curves(cfg)?)?;
    let failed = records.iter().filter(|r| r.classification == "failed").count();
    let mut extra = Map::new();
    extra.insert("points".into(), records.len().into());
    extra.insert("failed_points".into(), failed.into());
    extra.insert("point_t_end".into(), Value::from(records.iter().map(|r| r.t_end).collect::<Vec<_>>()));
    extra.insert(
        "point_runtime_seconds".into(),
        Value::from(records.iter().map(|r| r.runtime_seconds).collect::<Vec<_>>()),
    );
    write_meta(dir, "sweep", cfg, started.elapsed().as_secs_f64(), extra)
}

pub fn dispersion_cmd(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate_analysis()?;
    let started = Instant::now();
    let params = cfg.params()?;
    let rows = (1..=cfg.modes).map(|m| {
        let k = m as f64 * std::f64::consts::PI / cfg.ell;
        vec![
            m.to_string(),
            num(k),
            num(fourier_multiplier(k, &params)),
            num(dispersion_growth_rate(k, &params)),
            num(neutral_sigma2(k, &params)),
        ]
    });
    let dir = prepare_out(cfg)?;
    write_csv(&dir.join("dispersion.csv"), &["m", "k", "multiplier", "lambda", "neutral_sigma2"], rows)?;
    write_meta(dir, "dispersion", cfg, started.elapsed().as_secs_f64(), Map::new())
}

fn report_lines(cfg: &RunConfig, r: &StabilityReport) -> Vec<(String, String, f64)> {
    let mut lines = vec![
        ("ell".to_string(), sig(cfg.ell, 7), cfg.ell),
        ("radius".to_string(), sig(cfg.radius, 7), cfg.radius),
        ("sigma2".to_string(), sig(cfg.sigma2, 7), cfg.sigma2),
        ("sigma2_global".to_string(), sig(r.sigma2_global, 7), r.sigma2_global),
        ("sigma2_linear".to_string(), sig(r.sigma2_linear, 7), r.sigma2_linear),
    ];
    if let Some(k) = r.kappa_bound {
        lines.push(("kappa".to_string(), sig(k, 7), k));
    }
    lines
}

pub fn threshold_cmd(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate_analysis()?;
    let started = Instant::now();
    let params = cfg.params()?;
    let report = stability_report(&params);
    let lines = report_lines(cfg, &report);
    for (name, short, _) in &lines {
        println!("{name}={short}");
    }
    println!("regime={}", report.regime);
    let dir = prepare_out(cfg)?;
    let mut rows: Vec<Vec<String>> = lines.iter().map(|(n, _, v)| vec![n.clone(), num(*v)]).collect();
    rows.push(vec!["regime".into(), report.regime.to_string()]);
    write_csv(&dir.join("threshold.csv"), &["quantity", "value"], rows)?;
    let extra: Map<String, Value> = [("report".to_string(), json!({
        "sigma2_global": report.sigma2_global,
        "sigma2_linear": report.sigma2_linear,
        "kappa": report.kappa_bound,
        "regime": report.regime.to_string(),
    }))]
    .into_iter()
    .collect();
    write_meta(dir, "threshold", cfg, started.elapsed().as_secs_f64(), extra)
}
