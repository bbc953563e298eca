//! Whole-interval frozen-drift iteration.
//!
//! Iterate `n` solves the *linear* problem
//! `rho_n,t - D rho_n,xx = (rho_n G_{rho_{n-1}})_x` on `[0, T]`, where the
//! drift comes from the complete trajectory of iterate `n - 1`. Iterate 0
//! is the initial datum held constant in time. The iteration stops once the
//! time-integrated L1 change between consecutive iterates drops below the
//! tolerance.

use serde::{Deserialize, Serialize};

use super::{check_initial, startup_stepper, Drift, Scheme, SolverConfig, Stepper, Trajectory, CN_STARTUP_STEPS};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::DensityField;
use crate::params::Params;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardOutcome {
    pub trajectory: Trajectory,
    pub iterations: usize,
    /// `r_n = int_0^T ||rho_n - rho_{n-1}||_1 dt` for each iteration.
    pub residuals: Vec<f64>,
}

pub fn picard_solve(rho0: &DensityField, params: &Params, config: &SolverConfig) -> Result<PicardOutcome> {
    config.validate()?;
    check_initial(rho0)?;
    let (n_steps, dt) = config.steps();
    let grid = *rho0.grid();
    let stepper = Stepper::new(grid, params, dt, config.scheme)?;
    let startup = startup_stepper(grid, params, dt, config.scheme)?;
    let m = grid.m();
    let h = grid.h();

    let mut previous: Vec<DensityField> = vec![rho0.clone(); n_steps + 1];
    let mut residuals = Vec::new();

    for iteration in 1..=config.picard_max_iter {
        // drift of the previous iterate at every time level; independent
        // across levels, so this is the parallel part of the iteration
        let kernel = stepper.kernel();
        let exec = Execution::for_work(n_steps * m * kernel.radius_cells().max(1));
        let drifts: Vec<Vec<f64>> = exec.map(&previous, |rho| {
            let mut g = vec![0.0; m];
            kernel.g_into(rho.values(), &mut g, Execution::Sequential);
            g
        });

        let mut current = Vec::with_capacity(n_steps + 1);
        current.push(rho0.clone());
        for k in 0..n_steps {
            let next = match (&startup, config.scheme) {
                (Some(be), _) if k < CN_STARTUP_STEPS => be.advance(&current[k], Drift::Frozen(&drifts[k]), k as f64 * dt)?,
                (_, Scheme::ImexBe) => stepper.advance(&current[k], Drift::Frozen(&drifts[k]), k as f64 * dt)?,
                (_, Scheme::ImexCn) => {
                    stepper.advance(&current[k], Drift::FrozenPair(&drifts[k], &drifts[k + 1]), k as f64 * dt)?
                }
            };
            current.push(next);
        }

        // trapezoid in time of the L1 change
        let diffs: Vec<f64> = current
            .iter()
            .zip(&previous)
            .map(|(a, b)| h * a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .collect();
        let residual = dt * (diffs.iter().sum::<f64>() - 0.5 * (diffs[0] + diffs[n_steps]));
        residuals.push(residual);
        log::debug!("picard iteration {iteration}: residual {residual:.3e}");
        previous = current;

        if residual < config.picard_tol {
            let mut trajectory = Trajectory::default();
            for (k, rho) in previous.into_iter().enumerate() {
                if k % config.record_every == 0 || k == n_steps {
                    trajectory.push(k as f64 * dt, rho);
                }
            }
            return Ok(PicardOutcome { trajectory, iterations: iteration, residuals });
        }
    }

    Err(Error::IterationLimit {
        iterations: config.picard_max_iter,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::uniform_density;
    use crate::grid::make_grid;
    use crate::init::InitialCondition;

    #[test]
    fn uniform_converges_immediately() {
        let g = make_grid(1.0, 64).unwrap();
        let p = Params::with_sigma2(1.0, 0.5, 1.0).unwrap();
        let out = picard_solve(&uniform_density(g), &p, &SolverConfig::new(1e-2, 0.5)).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.residuals[0] < 1e-12);
    }

    #[test]
    fn iteration_limit_carries_residual() {
        let g = make_grid(1.0, 64).unwrap();
        let p = Params::with_sigma2(1.0, 0.5, 1.0).unwrap();
        let rho0 = InitialCondition::Cosine { amplitude: 0.3, mode: 1 }.build(g).unwrap();
        let cfg = SolverConfig::new(1e-2, 0.5).picard(1e-14, 2);
        match picard_solve(&rho0, &p, &cfg) {
            Err(Error::IterationLimit { iterations: 2, residual }) => assert!(residual > 1e-14),
            other => panic!("unexpected {other:?}"),
        }
    }
}
