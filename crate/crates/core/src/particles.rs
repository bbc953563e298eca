//! Euler-Maruyama simulation of the N-agent system
//!
//! ```text
//! dx_i = -(1/N) sum_j 1{|x_i - x_j| <= R} (x_i - x_j) dt + sigma dW_i
//! ```
//!
//! on the periodic domain `[-ell, ell)`, with displacements taken as the
//! signed minimal image. Each agent owns a ChaCha stream selected by its
//! index from a master seed, so the noise of agent `i` does not depend on
//! how many other agents exist or in which order they are processed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{total_mass, DensityField};
use crate::grid::{minimal_image, wrap_periodic, Grid};
use crate::params::Params;

/// Ensembles up to this size use direct pair summation by default.
pub const DIRECT_MAX_AGENTS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForceMethod {
    /// Direct pair sum for small ensembles, sorted prefix sums otherwise.
    #[default]
    Auto,
    /// `O(N^2)` pair sum.
    Direct,
    /// `O(N log N)` window sums over sorted positions.
    Sorted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    ell: f64,
    positions: Vec<f64>,
    streams: Vec<ChaCha8Rng>,
    time: f64,
}

fn agent_stream(seed: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent as u64);
    rng
}

impl ParticleEnsemble {
    /// Agents at the given positions (wrapped into the domain), agent `i`
    /// drawing its noise from stream `i` of `seed`.
    pub fn new(ell: f64, positions: Vec<f64>, seed: u64) -> Result<Self> {
        let streams = (0..positions.len()).map(|i| agent_stream(seed, i)).collect();
        Self::from_parts(ell, positions, streams)
    }

    pub fn from_parts(ell: f64, positions: Vec<f64>, streams: Vec<ChaCha8Rng>) -> Result<Self> {
        if !(ell > 0.0) {
            return Err(Error::InvalidParams(format!("ell must be positive, got {ell}")));
        }
        if positions.len() < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 agents, got {}", positions.len())));
        }
        if streams.len() != positions.len() {
            return Err(Error::InvalidInput("one noise stream per agent is required".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite agent position".into()));
        }
        let positions = positions.into_iter().map(|x| wrap_periodic(x, ell)).collect();
        Ok(Self { ell, positions, streams, time: 0.0 })
    }

    /// Agents drawn iid from `rho0`, treated as constant on each cell
    /// `[x_j - h/2, x_j + h/2)`. Agent `i` uses the first draw of its own
    /// stream.
    pub fn sample(rho0: &DensityField, n: usize, seed: u64) -> Result<Self> {
        if let Some((index, &value)) = rho0.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeDensity { index, value });
        }
        let mass = total_mass(rho0);
        if !(mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        let grid = *rho0.grid();
        let h = grid.h();
        let mut cdf = Vec::with_capacity(grid.m());
        let mut acc = 0.0;
        for v in rho0.values() {
            acc += v * h / mass;
            cdf.push(acc);
        }
        let mut streams: Vec<ChaCha8Rng> = (0..n).map(|i| agent_stream(seed, i)).collect();
        let positions = streams
            .iter_mut()
            .map(|rng| {
                let u: f64 = rng.random::<f64>() * acc;
                let j = cdf.partition_point(|&c| c <= u).min(grid.m() - 1);
                let below = if j == 0 { 0.0 } else { cdf[j - 1] };
                let width = cdf[j] - below;
                let frac = if width > 0.0 { ((u - below) / width).clamp(0.0, 1.0) } else { 0.5 };
                grid.node(j) - 0.5 * h + frac * h
            })
            .collect();
        Self::from_parts(grid.ell(), positions, streams)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Reorder agents together with their noise streams:
    /// agent `k` of the result is agent `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            ell: self.ell,
            positions: perm.iter().map(|&i| self.positions[i]).collect(),
            streams: perm.iter().map(|&i| self.streams[i].clone()).collect(),
            time: self.time,
        }
    }

    /// Mean-field drift `-(1/N) sum_j 1{|d_ij| <= R} d_ij` of every agent.
    pub fn drift(&self, radius: f64, method: ForceMethod) -> Vec<f64> {
        let method = match method {
            ForceMethod::Auto if self.len() <= DIRECT_MAX_AGENTS => ForceMethod::Direct,
            ForceMethod::Auto => ForceMethod::Sorted,
            other => other,
        };
        let n = self.len();
        let exec = match method {
            ForceMethod::Direct => Execution::for_work(n * n),
            _ => Execution::for_work(n * 64),
        };
        self.drift_with(radius, method, exec)
    }

    pub fn drift_with(&self, radius: f64, method: ForceMethod, exec: Execution) -> Vec<f64> {
        match method {
            ForceMethod::Sorted => sorted_drift(&self.positions, self.ell, radius, exec),
            _ => direct_drift(&self.positions, self.ell, radius, exec),
        }
    }

    /// Advance one Euler-Maruyama step in place.
    pub fn step_mut(&mut self, params: &Params, dt: f64, method: ForceMethod) {
        let drift = self.drift(params.radius(), method);
        let noise = params.sigma() * dt.sqrt();
        let ell = self.ell;
        let n = self.len();
        let exec = Execution::for_work(n * 16);
        let mut agents: Vec<(&mut f64, &mut ChaCha8Rng)> =
            self.positions.iter_mut().zip(self.streams.iter_mut()).collect();
        exec.for_each_mut(&mut agents, |i, (x, rng)| {
            let mut y = **x + dt * drift[i];
            if noise > 0.0 {
                let xi: f64 = rng.sample(StandardNormal);
                y += noise * xi;
            }
            **x = wrap_periodic(y, ell);
        });
        self.time += dt;
    }
}

/// One Euler-Maruyama step, returning the advanced ensemble.
pub fn em_step(ens: &ParticleEnsemble, params: &Params, dt: f64) -> ParticleEnsemble {
    let mut next = ens.clone();
    next.step_mut(params, dt, ForceMethod::Auto);
    next
}

fn direct_drift(x: &[f64], ell: f64, radius: f64, exec: Execution) -> Vec<f64> {
    let n = x.len();
    let inv_n = 1.0 / n as f64;
    let mut out = vec![0.0; n];
    exec.fill(&mut out, |i| {
        let xi = x[i];
        let mut acc = 0.0;
        for &xj in x {
            let d = minimal_image(xi - xj, ell);
            if d.abs() <= radius {
                acc += d;
            }
        }
        -acc * inv_n
    });
    out
}

/// Window sums over sorted positions: for agent `i` the neighbours are the
/// agents in `[x_i - R, x_i + R]` modulo the period, and
/// `sum_j d_ij = count * (x_i - offset) - sum_j x_j` on each unwrapped piece.
fn sorted_drift(x: &[f64], ell: f64, radius: f64, exec: Execution) -> Vec<f64> {
    let n = x.len();
    let mut sorted = x.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &s in &sorted {
        acc += s;
        prefix.push(acc);
    }
    let period = 2.0 * ell;
    let window = |lo: f64, hi: f64| -> (f64, f64) {
        let a = sorted.partition_point(|&s| s < lo);
        let b = sorted.partition_point(|&s| s <= hi);
        if b <= a {
            (0.0, 0.0)
        } else {
            ((b - a) as f64, prefix[b] - prefix[a])
        }
    };
    let inv_n = 1.0 / n as f64;
    let mut out = vec![0.0; n];
    exec.fill(&mut out, |i| {
        let xi = x[i];
        let (lo, hi) = (xi - radius, xi + radius);
        let (c0, s0) = window(lo.max(-ell), hi.min(ell));
        let mut total = c0 * xi - s0;
        if lo < -ell {
            // images at y - 2 ell
            let (c, s) = window(lo + period, ell);
            total += c * (xi + period) - s;
        }
        if hi >= ell {
            // images at y + 2 ell
            let (c, s) = window(-ell, hi - period);
            total += c * (xi - period) - s;
        }
        -total * inv_n
    });
    out
}

/// Normalized histogram on the cells `[x_j - h/2, x_j + h/2)`.
pub fn empirical_density(ens: &ParticleEnsemble, grid: &Grid) -> DensityField {
    let mut counts = vec![0usize; grid.m()];
    for &x in ens.positions() {
        counts[grid.cell_of(x)] += 1;
    }
    let scale = 1.0 / (ens.len() as f64 * grid.h());
    DensityField::from_vec(*grid, counts.into_iter().map(|c| c as f64 * scale).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleRun {
    pub ensemble: ParticleEnsemble,
    pub times: Vec<f64>,
    pub snapshots: Vec<DensityField>,
}

/// Sample `n` agents from `rho0` and integrate to `t_end`, taking a
/// histogram on `rho0`'s grid every `snapshot_every` steps and at the end.
pub fn run_particles(
    rho0: &DensityField,
    n: usize,
    params: &Params,
    dt: f64,
    t_end: f64,
    seed: u64,
    snapshot_every: usize,
) -> Result<ParticleRun> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput(format!("need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}")));
    }
    if (params.ell() - rho0.grid().ell()).abs() > 1e-12 * params.ell() {
        return Err(Error::InvalidInput("rho0 grid and params disagree on ell".into()));
    }
    let mut ensemble = ParticleEnsemble::sample(rho0, n, seed)?;
    let grid = *rho0.grid();
    let steps = if t_end == 0.0 { 0 } else { ((t_end / dt) - 1e-9).ceil() as usize };
    let dt = if steps == 0 { dt } else { t_end / steps as f64 };
    let every = snapshot_every.max(1);
    let mut times = vec![0.0];
    let mut snapshots = vec![empirical_density(&ensemble, &grid)];
    for k in 1..=steps {
        ensemble.step_mut(params, dt, ForceMethod::Auto);
        if k % every == 0 || k == steps {
            times.push(k as f64 * dt);
            snapshots.push(empirical_density(&ensemble, &grid));
        }
    }
    Ok(ParticleRun { ensemble, times, snapshots })
}
