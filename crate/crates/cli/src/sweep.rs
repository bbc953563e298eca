//! Phase-diagram sweep over `(R, sigma^2)`.
//!
//! Each grid point evolves a small random perturbation of the uniform
//! state and classifies the end state. Points where the uniform state is
//! linearly unstable run until the fastest mode has had time to grow by
//! `exp(sweep_horizon)`; everything else runs to `t_end`.

use std::time::Instant;

use hkfp::analysis::{
    classify_state, dispersion_growth_rate, fit_exponential_decay, global_stability_threshold,
    linear_instability_threshold, DEFAULT_FIT_START,
};
use hkfp::solver::{default_dt, solve, SolverConfig};
use hkfp::InitialCondition;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::num;

pub const SWEEP_HEADER: [&str; 10] = [
    "ell",
    "radius",
    "sigma2",
    "final_psi_l2",
    "classification",
    "cluster_count",
    "fitted_rate",
    "sigma2_global",
    "sigma2_linear",
    "runtime_seconds",
];

pub const CURVE_HEADER: [&str; 3] = ["radius", "sigma2_global", "sigma2_linear"];

/// Upper end of the window for the growth-rate fit: the perturbation is
/// treated as linear while its L2 norm stays in this band.
const LINEAR_BAND: (f64, f64) = (1e-11, 1e-2);

/// Target number of recorded snapshots per point.
const RECORDS_PER_POINT: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub ell: f64,
    pub radius: f64,
    pub sigma2: f64,
    pub final_psi_l2: f64,
    /// `uniform`, `clustered` or `failed`.
    pub classification: String,
    pub cluster_count: usize,
    pub fitted_rate: f64,
    pub sigma2_global: f64,
    pub sigma2_linear: f64,
    pub t_end: f64,
    pub runtime_seconds: f64,
}

impl SweepRecord {
    pub fn row(&self, timings: bool) -> Vec<String> {
        vec![
            num(self.ell),
            num(self.radius),
            num(self.sigma2),
            num(self.final_psi_l2),
            self.classification.clone(),
            self.cluster_count.to_string(),
            num(self.fitted_rate),
            num(self.sigma2_global),
            num(self.sigma2_linear),
            if timings { num(self.runtime_seconds) } else { String::new() },
        ]
    }
}

/// Largest growth rate over the modes the grid resolves.
fn fastest_rate(cfg: &RunConfig, params: &hkfp::Params) -> f64 {
    (1..=cfg.grid / 2)
        .map(|m| dispersion_growth_rate(m as f64 * std::f64::consts::PI / cfg.ell, params))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn point_horizon(cfg: &RunConfig, lambda_max: f64) -> f64 {
    if lambda_max > 0.0 {
        (cfg.sweep_horizon / lambda_max).max(cfg.t_end).min(cfg.sweep_t_end_cap)
    } else {
        cfg.t_end
    }
}

fn run_point_inner(cfg: &RunConfig, radius: f64, sigma2: f64, record: &mut SweepRecord) -> CliResult<()> {
    let params = cfg.params_at(radius, sigma2)?;
    let grid = cfg.make_grid()?;
    let rho0 = InitialCondition::RandomPerturbation { amplitude: cfg.sweep_amplitude, seed: cfg.seed }.build(grid)?;
    let t_end = point_horizon(cfg, fastest_rate(cfg, &params));
    record.t_end = t_end;
    let dt = cfg.dt.unwrap_or_else(|| default_dt(&grid, &params));
    let probe = SolverConfig::new(dt, t_end);
    let every = (probe.steps().0 / RECORDS_PER_POINT).max(1);
    let traj = solve(&rho0, &params, &probe.scheme(cfg.scheme).record_every(every))?;

    let final_field = traj.last().expect("trajectory holds the initial state");
    let state = classify_state(final_field, &params, None);
    record.final_psi_l2 = traj.diagnostics.last().map(|d| d.psi_l2).unwrap_or(f64::NAN);
    record.classification = state.label().to_string();
    record.cluster_count = state.cluster_count();

    let series: Vec<(f64, f64)> = traj.diagnostics.iter().map(|d| (d.t, d.psi_l2)).collect();
    let stop = series
        .iter()
        .find(|(t, v)| *t >= DEFAULT_FIT_START && !(*v > LINEAR_BAND.0 && *v < LINEAR_BAND.1))
        .map_or(t_end, |(t, _)| *t);
    // a sample that left the band is excluded from the fit
    let hi = series.iter().rev().find(|(t, _)| *t < stop).map_or(stop, |(t, _)| *t);
    record.fitted_rate = fit_exponential_decay(&series, (DEFAULT_FIT_START, hi)).map_or(f64::NAN, |f| f.rate);
    Ok(())
}

/// One grid point. Failures are recorded, not propagated.
pub fn run_point(cfg: &RunConfig, radius: f64, sigma2: f64) -> SweepRecord {
    let started = Instant::now();
    let mut record = SweepRecord {
        ell: cfg.ell,
        radius,
        sigma2,
        final_psi_l2: f64::NAN,
        classification: "failed".into(),
        cluster_count: 0,
        fitted_rate: f64::NAN,
        sigma2_global: f64::NAN,
        sigma2_linear: f64::NAN,
        t_end: f64::NAN,
        runtime_seconds: 0.0,
    };
    if let Ok(params) = cfg.params_at(radius, sigma2) {
        record.sigma2_global = global_stability_threshold(&params);
        record.sigma2_linear = linear_instability_threshold(&params);
    }
    if let Err(e) = run_point_inner(cfg, radius, sigma2, &mut record) {
        log::warn!("sweep point R = {radius}, sigma2 = {sigma2} failed: {}", e.message());
        record.classification = "failed".into();
        record.cluster_count = 0;
    }
    record.runtime_seconds = started.elapsed().as_secs_f64();
    record
}

/// All points in R-major, sigma^2-minor order, whatever order they finish in.
pub fn run_sweep(cfg: &RunConfig) -> CliResult<Vec<SweepRecord>> {
    cfg.validate_sweep()?;
    let points: Vec<(usize, f64, f64)> = cfg
        .radii
        .iter()
        .flat_map(|&r| cfg.sigma2_values.iter().map(move |&s| (r, s)))
        .enumerate()
        .map(|(i, (r, s))| (i, r, s))
        .collect();
    let mut records = map_points(&points, |&(i, r, s)| (i, run_point(cfg, r, s)));
    records.sort_by_key(|(i, _)| *i);
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

#[cfg(feature = "parallel")]
fn map_points<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_points<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Both threshold curves sampled at the sweep radii.
pub fn threshold_curves(cfg: &RunConfig) -> CliResult<Vec<Vec<String>>> {
    cfg.radii
        .iter()
        .map(|&r| {
            let p = cfg.params_at(r, cfg.sigma2)?;
            Ok(vec![num(r), num(global_stability_threshold(&p)), num(linear_instability_threshold(&p))])
        })
        .collect::<Result<_, CliError>>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_rules() {
        let cfg = RunConfig { t_end: 20.0, sweep_horizon: 15.0, sweep_t_end_cap: 1000.0, ..RunConfig::default() };
        assert_eq!(point_horizon(&cfg, -1.0), 20.0);
        assert_eq!(point_horizon(&cfg, 0.1), 150.0);
        assert_eq!(point_horizon(&cfg, 2.0), 20.0);
        assert_eq!(point_horizon(&cfg, 1e-6), 1000.0);
    }

    #[test]
    fn failed_points_are_recorded() {
        let cfg = RunConfig { dt: Some(10.0), t_end: 20.0, ..RunConfig::default() };
        let rec = run_point(&cfg, 0.5, 0.02);
        assert_eq!(rec.classification, "failed");
        assert!(rec.final_psi_l2.is_nan());
        assert!(rec.sigma2_global > 0.7);
    }

    #[test]
    fn rows_blank_runtime_without_timings() {
        let cfg = RunConfig { grid: 64, t_end: 1.0, ..RunConfig::default() };
        let rec = run_point(&cfg, 0.5, 1.0);
        assert_eq!(rec.classification, "uniform");
        let row = rec.row(false);
        assert_eq!(row.len(), SWEEP_HEADER.len());
        assert_eq!(row[9], "");
        assert!(!rec.row(true)[9].is_empty());
    }
}
