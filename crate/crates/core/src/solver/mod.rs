//! Time integration of the periodic nonlocal Fokker-Planck problem.
//!
//! Diffusion is implicit (cyclic tridiagonal solve), the drift flux
//! `(rho G)_x` explicit in conservative centered form. Two drivers share
//! the stepper: [`solve`] lags the nonlinearity one step, [`picard_solve`]
//! freezes it over the whole time interval and iterates.

mod picard;
mod tridiag;

pub use picard::{picard_solve, PicardOutcome};
pub use tridiag::CyclicTridiagonal;

use serde::{Deserialize, Serialize};

use crate::analysis::{h1_seminorm, lp_norm};
use crate::error::{Error, Result};
use crate::field::{total_mass, DensityField};
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::params::Params;

/// Undershoots down to this level are clipped; deeper ones abort.
pub const NEGATIVE_TOLERANCE: f64 = 1e-8;

// Corrector iteration of the self-consistent Crank-Nicolson step.
const CORRECTOR_RTOL: f64 = 1e-14;
const CORRECTOR_MAX_ITER: usize = 12;

/// Tolerance on the unit-mass precondition of the drivers.
const INITIAL_MASS_TOLERANCE: f64 = 1e-8;

/// Upper bound on the default time step.
const MAX_DEFAULT_DT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Backward-Euler diffusion, forward-Euler drift.
    #[default]
    ImexBe,
    /// Crank-Nicolson diffusion with a Heun predictor-corrector drift;
    /// second order in time.
    ImexCn,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imex_be" => Ok(Scheme::ImexBe),
            "imex_cn" => Ok(Scheme::ImexCn),
            other => Err(Error::InvalidInput(format!("unknown scheme {other:?}"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::ImexBe => "imex_be",
            Scheme::ImexCn => "imex_cn",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub record_every: usize,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, scheme: Scheme::ImexBe, picard_tol: 1e-8, picard_max_iter: 50, record_every: 1 }
    }

    /// Config with [`default_dt`] for the given problem.
    pub fn with_default_dt(grid: &Grid, params: &Params, t_end: f64) -> Self {
        Self::new(default_dt(grid, params), t_end)
    }

    pub fn scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn picard(mut self, tol: f64, max_iter: usize) -> Self {
        self.picard_tol = tol;
        self.picard_max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return bad(format!("t_end = {} must be at least dt = {}", self.t_end, self.dt));
        }
        if !(self.picard_tol > 0.0) {
            return bad(format!("picard_tol must be positive, got {}", self.picard_tol));
        }
        if self.picard_max_iter == 0 {
            return bad("picard_max_iter must be at least 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        Ok(())
    }

    /// Number of steps and the step that lands exactly on `t_end`.
    pub fn steps(&self) -> (usize, f64) {
        let n = ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Drift CFL limit `dt * max|G| <= h / 2` using `max|G| <= 2R`, capped at
/// `1e-2`. Diffusion is implicit and imposes no limit.
pub fn default_dt(grid: &Grid, params: &Params) -> f64 {
    (0.5 * grid.h() / (2.0 * params.radius())).min(MAX_DEFAULT_DT)
}

/// Scalar observables of one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub min_rho: f64,
    pub l1: f64,
    pub psi_l2: f64,
    pub psi_h1: f64,
}

impl Diagnostics {
    pub fn of(t: f64, rho: &DensityField) -> Self {
        let level = 1.0 / (2.0 * rho.grid().ell());
        let psi = rho.offset(level);
        Self {
            t,
            mass: total_mass(rho),
            min_rho: rho.min(),
            l1: lp_norm(rho, 1).expect("p = 1 is supported"),
            psi_l2: lp_norm(&psi, 2).expect("p = 2 is supported"),
            psi_h1: h1_seminorm(&psi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<DensityField>,
    pub diagnostics: Vec<Diagnostics>,
}

impl Trajectory {
    pub(crate) fn push(&mut self, t: f64, rho: DensityField) {
        self.diagnostics.push(Diagnostics::of(t, &rho));
        self.times.push(t);
        self.fields.push(rho);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&DensityField> {
        self.fields.last()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// How the drift velocity is obtained inside a step.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Drift<'a> {
    /// `G` recomputed from the current state (and predictor stage).
    SelfConsistent,
    /// `G` frozen at the given samples for the whole step.
    Frozen(&'a [f64]),
    /// Frozen `G` at the start and end of the step (second-order scheme).
    FrozenPair(&'a [f64], &'a [f64]),
}

/// One fixed-`dt` IMEX stepper for a given grid and parameter set.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    kernel: Kernel,
    dt: f64,
    scheme: Scheme,
    // D dt / h^2 with D = sigma^2 / 2
    mesh_ratio: f64,
    implicit: CyclicTridiagonal,
}

impl Stepper {
    pub fn new(grid: Grid, params: &Params, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        let kernel = Kernel::new(grid, params)?;
        let s = params.diffusivity() * dt / (grid.h() * grid.h());
        let implicit = match scheme {
            Scheme::ImexBe => CyclicTridiagonal::new(grid.m(), -s, 1.0 + 2.0 * s, -s)?,
            Scheme::ImexCn => CyclicTridiagonal::new(grid.m(), -0.5 * s, 1.0 + s, -0.5 * s)?,
        };
        Ok(Self { grid, kernel, dt, scheme, mesh_ratio: s, implicit })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// One step of `rho_t - D rho_xx = (rho g)_x` with `g` frozen.
    pub fn step_frozen(&self, rho: &DensityField, g: &DensityField) -> Result<DensityField> {
        rho.check_same_grid(g)?;
        self.advance(rho, Drift::Frozen(g.values()), 0.0)
    }

    /// One step of the full nonlinear problem with `G` lagged.
    pub fn step(&self, rho: &DensityField) -> Result<DensityField> {
        self.advance(rho, Drift::SelfConsistent, 0.0)
    }

    pub(crate) fn advance(&self, rho: &DensityField, drift: Drift<'_>, t: f64) -> Result<DensityField> {
        let m = self.grid.m();
        if rho.len() != m {
            return Err(Error::GridMismatch { field: rho.len(), grid: m });
        }
        let v = rho.values();
        let mut g_buf = Vec::new();
        let g0: &[f64] = match drift {
            Drift::SelfConsistent => {
                g_buf.resize(m, 0.0);
                self.g_into(v, &mut g_buf);
                &g_buf
            }
            Drift::Frozen(g) | Drift::FrozenPair(g, _) => g,
        };
        self.check_cfl(g0)?;

        let mut div0 = vec![0.0; m];
        self.flux_divergence(v, g0, &mut div0);
        let mut rhs = vec![0.0; m];
        let mut out = vec![0.0; m];

        match self.scheme {
            Scheme::ImexBe => {
                for i in 0..m {
                    rhs[i] = v[i] + self.dt * div0[i];
                }
                self.implicit.solve_into(&rhs, &mut out);
            }
            Scheme::ImexCn => {
                let half = 0.5 * self.mesh_ratio;
                let mut base = vec![0.0; m];
                for i in 0..m {
                    let lap = v[(i + m - 1) % m] - 2.0 * v[i] + v[(i + 1) % m];
                    base[i] = v[i] + half * lap;
                    rhs[i] = base[i] + self.dt * div0[i];
                }
                let mut pred = vec![0.0; m];
                self.implicit.solve_into(&rhs, &mut pred);

                let mut div1 = vec![0.0; m];
                let mut corrector = |g1: &[f64], out: &mut [f64]| -> Result<()> {
                    self.check_cfl(g1)?;
                    self.flux_divergence(&pred, g1, &mut div1);
                    for i in 0..m {
                        rhs[i] = base[i] + 0.5 * self.dt * (div0[i] + div1[i]);
                    }
                    self.implicit.solve_into(&rhs, out);
                    Ok(())
                };
                match drift {
                    Drift::Frozen(g) | Drift::FrozenPair(_, g) => corrector(g, &mut out)?,
                    Drift::SelfConsistent => {
                        // end-of-step drift taken from the end-of-step state,
                        // iterated until stationary; this is the same fixed
                        // point the frozen-pair Picard iteration converges to
                        let mut g1 = vec![0.0; m];
                        self.g_into(&pred, &mut g1);
                        corrector(&g1, &mut out)?;
                        let mut prev = vec![0.0; m];
                        for _ in 1..CORRECTOR_MAX_ITER {
                            prev.copy_from_slice(&out);
                            self.g_into(&prev, &mut g1);
                            corrector(&g1, &mut out)?;
                            let scale = out.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                            let change = out.iter().zip(&prev).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                            if change <= CORRECTOR_RTOL * scale {
                                break;
                            }
                        }
                    }
                }
            }
        }

        enforce_sign(&mut out, total_mass(rho) / self.grid.h(), t + self.dt)?;
        Ok(DensityField::from_vec(self.grid, out))
    }

    fn g_into(&self, rho: &[f64], out: &mut [f64]) {
        let m = self.grid.m();
        let exec = crate::exec::Execution::for_work(m * self.kernel.radius_cells());
        self.kernel.g_into(rho, out, exec);
    }

    /// Centered conservative differencing: `((rho g)_{i+1} - (rho g)_{i-1}) / 2h`.
    fn flux_divergence(&self, rho: &[f64], g: &[f64], out: &mut [f64]) {
        let m = self.grid.m();
        let inv = 0.5 / self.grid.h();
        let flux: Vec<f64> = rho.iter().zip(g).map(|(r, g)| r * g).collect();
        for i in 0..m {
            out[i] = inv * (flux[(i + 1) % m] - flux[(i + m - 1) % m]);
        }
    }

    fn check_cfl(&self, g: &[f64]) -> Result<()> {
        let speed = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let courant = self.dt * speed;
        if !courant.is_finite() {
            return Err(Error::Blowup { t: f64::NAN, reason: "non-finite drift".into() });
        }
        if courant > self.grid.h() {
            return Err(Error::Cfl { courant, h: self.grid.h() });
        }
        Ok(())
    }
}

/// Undershoot policy: NaN or values below `-NEGATIVE_TOLERANCE` abort; small
/// undershoots are clipped and the sum restored to `target_sum`.
fn enforce_sign(values: &mut [f64], target_sum: f64, t: f64) -> Result<()> {
    let mut clipped = false;
    for (i, v) in values.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::Blowup { t, reason: format!("non-finite value at node {i}") });
        }
        if *v < 0.0 {
            if *v < -NEGATIVE_TOLERANCE {
                return Err(Error::Blowup { t, reason: format!("density {:e} at node {i}", *v) });
            }
            *v = 0.0;
            clipped = true;
        }
    }
    if clipped {
        let sum: f64 = values.iter().sum();
        if sum > 0.0 {
            let scale = target_sum / sum;
            values.iter_mut().for_each(|v| *v *= scale);
        }
    }
    Ok(())
}

/// One backward-Euler IMEX step of the linear problem with drift `g_field`
/// frozen.
pub fn step_linear_frozen(
    rho: &DensityField,
    g_field: &DensityField,
    params: &Params,
    dt: f64,
) -> Result<DensityField> {
    Stepper::new(*rho.grid(), params, dt, Scheme::ImexBe)?.step_frozen(rho, g_field)
}

/// One backward-Euler IMEX step of the nonlinear problem; identical to
/// `step_linear_frozen(rho, apply_g(rho), ..)`.
pub fn step_imex(rho: &DensityField, params: &Params, dt: f64) -> Result<DensityField> {
    Stepper::new(*rho.grid(), params, dt, Scheme::ImexBe)?.step(rho)
}

pub(crate) fn check_initial(rho0: &DensityField) -> Result<()> {
    if let Some((index, &value)) = rho0.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    let mass = total_mass(rho0);
    if (mass - 1.0).abs() > INITIAL_MASS_TOLERANCE {
        return Err(Error::InvalidInput(format!("initial density must have unit mass, got {mass}")));
    }
    Ok(())
}

/// Crank-Nicolson runs start with this many backward Euler steps. Rough
/// initial data (a density vanishing on an interval) is not damped by the
/// trapezoidal rule and would undershoot; a fixed number of first-order steps
/// smooths it while keeping the global error second order.
pub const CN_STARTUP_STEPS: usize = 2;

pub(crate) fn startup_stepper(grid: Grid, params: &Params, dt: f64, scheme: Scheme) -> Result<Option<Stepper>> {
    match scheme {
        Scheme::ImexCn => Stepper::new(grid, params, dt, Scheme::ImexBe).map(Some),
        Scheme::ImexBe => Ok(None),
    }
}

/// Integrate from `rho0` to `config.t_end`, recording every
/// `config.record_every` steps plus the final state.
pub fn solve(rho0: &DensityField, params: &Params, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    check_initial(rho0)?;
    let (n_steps, dt) = config.steps();
    let stepper = Stepper::new(*rho0.grid(), params, dt, config.scheme)?;
    let startup = startup_stepper(*rho0.grid(), params, dt, config.scheme)?;

    let mut traj = Trajectory::default();
    traj.push(0.0, rho0.clone());
    let mut rho = rho0.clone();
    for k in 1..=n_steps {
        let t_prev = (k - 1) as f64 * dt;
        let s = if k <= CN_STARTUP_STEPS { startup.as_ref().unwrap_or(&stepper) } else { &stepper };
        rho = s.advance(&rho, Drift::SelfConsistent, t_prev)?;
        if k % config.record_every == 0 || k == n_steps {
            traj.push(k as f64 * dt, rho.clone());
        }
    }
    Ok(traj)
}
