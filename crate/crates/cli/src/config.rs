//! Run configuration: a flat `key = value` file, overridden by flags.
//!
//! Every key has a default, so an empty file (or none at all) is a valid
//! configuration. [`RunConfig::to_text`] writes the effective configuration
//! back in the same format, and a run's `meta.json` can be fed to
//! `--config` as well.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hkfp::particles::ForceMethod;
use hkfp::solver::{default_dt, Scheme, SolverConfig};
use hkfp::{make_grid, Grid, InitialCondition, Params};

use crate::error::{CliError, CliResult};

const INIT_KINDS: [&str; 5] = ["uniform", "cosine", "bump", "random_perturbation", "random_density"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ell: f64,
    pub radius: f64,
    pub sigma2: f64,
    pub grid: usize,
    /// `None` picks the drift-CFL default.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub scheme: Scheme,
    pub record_every: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,

    pub init: String,
    pub amplitude: f64,
    pub mode: u32,
    pub center: f64,
    pub width: f64,
    pub seed: u64,

    pub agents: usize,
    pub particle_dt: f64,
    pub snapshot_every: usize,
    pub force: ForceMethod,
    /// Explicit agent positions; replaces sampling from the initial density.
    pub positions: Option<Vec<f64>>,

    pub radii: Vec<f64>,
    pub sigma2_values: Vec<f64>,
    pub sweep_amplitude: f64,
    /// Unstable points run to `sweep_horizon / lambda_max`, at least `t_end`.
    pub sweep_horizon: f64,
    pub sweep_t_end_cap: f64,
    pub record_timings: bool,

    pub modes: usize,
    /// 0 lets the thread pool decide.
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ell: 1.0,
            radius: 0.5,
            sigma2: 1.0,
            grid: hkfp::grid::DEFAULT_CELLS,
            dt: None,
            t_end: 5.0,
            scheme: Scheme::ImexBe,
            record_every: 1,
            picard_tol: 1e-8,
            picard_max_iter: 50,
            init: "cosine".into(),
            amplitude: 0.1,
            mode: 1,
            center: 0.0,
            width: 0.1,
            seed: 0,
            agents: 10_000,
            particle_dt: 1e-3,
            snapshot_every: 100,
            force: ForceMethod::Auto,
            positions: None,
            radii: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            sigma2_values: vec![0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 2.0],
            sweep_amplitude: 1e-3,
            sweep_horizon: 15.0,
            sweep_t_end_cap: 1000.0,
            record_timings: false,
            modes: 20,
            workers: 0,
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| CliError::Config(format!("cannot parse {key} = {value:?}")))
}

fn parse_list(key: &str, value: &str) -> CliResult<Vec<f64>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("cannot parse {key} = {value:?} as a boolean"))),
    }
}

fn parse_auto(key: &str, value: &str) -> CliResult<Option<f64>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn force_name(f: ForceMethod) -> &'static str {
    match f {
        ForceMethod::Auto => "auto",
        ForceMethod::Direct => "direct",
        ForceMethod::Sorted => "sorted",
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        match key {
            "ell" => self.ell = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "sigma2" => self.sigma2 = parse(key, value)?,
            "grid" => self.grid = parse(key, value)?,
            "dt" => self.dt = parse_auto(key, value)?,
            "t_end" => self.t_end = parse(key, value)?,
            "scheme" => {
                self.scheme = value.parse().map_err(|_| CliError::Config(format!("unknown scheme {value:?}")))?
            }
            "record_every" => self.record_every = parse(key, value)?,
            "picard_tol" => self.picard_tol = parse(key, value)?,
            "picard_max_iter" => self.picard_max_iter = parse(key, value)?,
            "init" => {
                if !INIT_KINDS.contains(&value) {
                    return Err(CliError::Config(format!(
                        "unknown init {value:?} (expected one of {})",
                        INIT_KINDS.join(", ")
                    )));
                }
                self.init = value.to_string();
            }
            "amplitude" => self.amplitude = parse(key, value)?,
            "mode" => self.mode = parse(key, value)?,
            "center" => self.center = parse(key, value)?,
            "width" => self.width = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "agents" => self.agents = parse(key, value)?,
            "particle_dt" => self.particle_dt = parse(key, value)?,
            "snapshot_every" => self.snapshot_every = parse(key, value)?,
            "force" => {
                self.force = match value {
                    "auto" => ForceMethod::Auto,
                    "direct" => ForceMethod::Direct,
                    "sorted" => ForceMethod::Sorted,
                    _ => return Err(CliError::Config(format!("unknown force method {value:?}"))),
                }
            }
            "positions" => {
                self.positions = if value.is_empty() || value == "none" { None } else { Some(parse_list(key, value)?) }
            }
            "radii" => self.radii = parse_list(key, value)?,
            "sigma2_values" => self.sigma2_values = parse_list(key, value)?,
            "sweep_amplitude" => self.sweep_amplitude = parse(key, value)?,
            "sweep_horizon" => self.sweep_horizon = parse(key, value)?,
            "sweep_t_end_cap" => self.sweep_t_end_cap = parse(key, value)?,
            "record_timings" => self.record_timings = parse_bool(key, value)?,
            "modes" => self.modes = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got {raw:?}", n + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| CliError::Config(format!("line {}: {}", n + 1, e.message())))?;
        }
        Ok(())
    }

    /// Apply the `config` object of a `meta.json` (or a bare object).
    pub fn apply_json(&mut self, text: &str) -> CliResult<()> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        let object = value.get("config").unwrap_or(&value);
        let object = object
            .as_object()
            .ok_or_else(|| CliError::Config("JSON config must be an object".into()))?;
        for (key, v) in object {
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            self.set(key, &text)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        if text.trim_start().starts_with('{') {
            cfg.apply_json(&text)?;
        } else {
            cfg.apply_text(&text)?;
        }
        Ok(cfg)
    }

    /// Every key with its effective value, in a fixed order. Floats use the
    /// shortest representation that parses back to the same bits.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("ell", format!("{:?}", self.ell)),
            ("radius", format!("{:?}", self.radius)),
            ("sigma2", format!("{:?}", self.sigma2)),
            ("grid", self.grid.to_string()),
            ("dt", self.dt.map_or_else(|| "auto".to_string(), |d| format!("{d:?}"))),
            ("t_end", format!("{:?}", self.t_end)),
            ("scheme", self.scheme.to_string()),
            ("record_every", self.record_every.to_string()),
            ("picard_tol", format!("{:?}", self.picard_tol)),
            ("picard_max_iter", self.picard_max_iter.to_string()),
            ("init", self.init.clone()),
            ("amplitude", format!("{:?}", self.amplitude)),
            ("mode", self.mode.to_string()),
            ("center", format!("{:?}", self.center)),
            ("width", format!("{:?}", self.width)),
            ("seed", self.seed.to_string()),
            ("agents", self.agents.to_string()),
            ("particle_dt", format!("{:?}", self.particle_dt)),
            ("snapshot_every", self.snapshot_every.to_string()),
            ("force", force_name(self.force).to_string()),
            ("positions", self.positions.as_deref().map_or_else(|| "none".to_string(), join)),
            ("radii", join(&self.radii)),
            ("sigma2_values", join(&self.sigma2_values)),
            ("sweep_amplitude", format!("{:?}", self.sweep_amplitude)),
            ("sweep_horizon", format!("{:?}", self.sweep_horizon)),
            ("sweep_t_end_cap", format!("{:?}", self.sweep_t_end_cap)),
            ("record_timings", self.record_timings.to_string()),
            ("modes", self.modes.to_string()),
            ("workers", self.workers.to_string()),
            ("out", self.out.display().to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn params(&self) -> CliResult<Params> {
        self.params_at(self.radius, self.sigma2)
    }

    pub fn params_at(&self, radius: f64, sigma2: f64) -> CliResult<Params> {
        Params::with_sigma2(self.ell, radius, sigma2).map_err(CliError::from)
    }

    pub fn make_grid(&self) -> CliResult<Grid> {
        make_grid(self.ell, self.grid).map_err(CliError::from)
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match self.init.as_str() {
            "uniform" => InitialCondition::Uniform,
            "bump" => InitialCondition::Bump { center: self.center, width: self.width },
            "random_perturbation" => InitialCondition::RandomPerturbation { amplitude: self.amplitude, seed: self.seed },
            "random_density" => InitialCondition::RandomDensity { seed: self.seed },
            _ => InitialCondition::Cosine { amplitude: self.amplitude, mode: self.mode },
        }
    }

    pub fn solver_config(&self, grid: &Grid, params: &Params) -> CliResult<SolverConfig> {
        let dt = self.dt.unwrap_or_else(|| default_dt(grid, params));
        let cfg = SolverConfig::new(dt, self.t_end)
            .scheme(self.scheme)
            .record_every(self.record_every)
            .picard(self.picard_tol, self.picard_max_iter);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks for the PDE commands, run before any computation.
    pub fn validate_pde(&self) -> CliResult<()> {
        let params = self.params()?;
        let grid = self.make_grid()?;
        grid.snap_radius(params.radius())?;
        self.initial_condition().build(grid)?;
        self.solver_config(&grid, &params)?;
        Ok(())
    }

    pub fn validate_particles(&self) -> CliResult<()> {
        self.params()?;
        if !(self.particle_dt > 0.0 && self.particle_dt.is_finite()) {
            return Err(CliError::Config(format!("particle_dt must be positive, got {}", self.particle_dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(CliError::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if self.snapshot_every == 0 {
            return Err(CliError::Config("snapshot_every must be at least 1".into()));
        }
        match &self.positions {
            Some(p) if p.len() < 2 => Err(CliError::Config("positions needs at least 2 agents".into())),
            Some(_) => Ok(()),
            None if self.agents < 2 => Err(CliError::Config(format!("agents must be at least 2, got {}", self.agents))),
            None => self.initial_condition().build(self.make_grid()?).map(|_| ()).map_err(CliError::from),
        }
    }

    pub fn validate_sweep(&self) -> CliResult<()> {
        if self.radii.is_empty() || self.sigma2_values.is_empty() {
            return Err(CliError::Config("sweep needs nonempty radii and sigma2_values".into()));
        }
        let grid = self.make_grid()?;
        for &r in &self.radii {
            grid.snap_radius(r)?;
            for &s2 in &self.sigma2_values {
                self.params_at(r, s2)?;
            }
        }
        if let Some(dt) = self.dt {
            SolverConfig::new(dt, self.t_end).validate()?;
        }
        if !(self.sweep_horizon > 0.0 && self.sweep_t_end_cap >= self.t_end) {
            return Err(CliError::Config("need sweep_horizon > 0 and sweep_t_end_cap >= t_end".into()));
        }
        InitialCondition::RandomPerturbation { amplitude: self.sweep_amplitude, seed: self.seed }.build(grid)?;
        Ok(())
    }

    pub fn validate_analysis(&self) -> CliResult<()> {
        self.params()?;
        if self.modes == 0 {
            return Err(CliError::Config("modes must be at least 1".into()));
        }
        Ok(())
    }
}
