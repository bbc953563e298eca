//! Numerical laboratory for the mean-field (nonlinear Fokker-Planck) form of
//! the noisy Hegselmann-Krause opinion model on a periodic opinion space.
//!
//! The evolution problem is
//!
//! ```text
//! rho_t - (sigma^2 / 2) rho_xx = (rho G_rho)_x   on [-ell, ell), periodic
//! G_rho(x) = int_{x-R}^{x+R} (x - y) rho(y) dy
//! ```
//!
//! Two independent solvers are provided ([`solver::solve`], an IMEX time
//! stepper, and [`solver::picard_solve`], a frozen-drift fixed-point
//! iteration), together with an Euler-Maruyama particle system
//! ([`particles`]) and the stability analysis that locates the uniform and
//! clustered regimes ([`analysis`]).

pub mod analysis;
pub mod error;
pub mod exec;
pub mod field;
pub mod grid;
pub mod init;
pub mod kernel;
pub mod params;
pub mod particles;
pub mod solver;

pub use error::{Error, Result};
pub use exec::Execution;
pub use field::{normalize, total_mass, uniform_density, DensityField};
pub use grid::{make_grid, Grid};
pub use init::InitialCondition;
pub use kernel::{apply_g, apply_g_x, fourier_multiplier, Kernel};
pub use params::Params;
