//! Initial-condition descriptors.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{normalize, DensityField};
use crate::grid::Grid;

/// Highest Fourier mode used by the random initial conditions.
const RANDOM_MODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `1 / (2 ell)`.
    Uniform,
    /// `1/(2 ell) + amplitude * cos(mode * pi * x / ell)`, normalized.
    Cosine { amplitude: f64, mode: u32 },
    /// Periodised Gaussian bump, normalized.
    Bump { center: f64, width: f64 },
    /// Uniform plus a seeded random smooth perturbation with sup norm
    /// `amplitude`; mean zero, so the mass stays 1.
    RandomPerturbation { amplitude: f64, seed: u64 },
    /// Seeded random nonnegative density; may vanish on sub-intervals.
    RandomDensity { seed: u64 },
}

impl InitialCondition {
    pub fn build(&self, grid: Grid) -> Result<DensityField> {
        let ell = grid.ell();
        let level = 1.0 / (2.0 * ell);
        match *self {
            InitialCondition::Uniform => Ok(crate::field::uniform_density(grid)),
            InitialCondition::Cosine { amplitude, mode } => {
                let k = mode as f64 * PI / ell;
                let f = DensityField::from_fn(grid, |x| level + amplitude * (k * x).cos())?;
                normalize(&f)
            }
            InitialCondition::Bump { center, width } => {
                if !(width > 0.0) {
                    return Err(Error::InvalidInput(format!("bump width must be positive, got {width}")));
                }
                let period = 2.0 * ell;
                let f = DensityField::from_fn(grid, |x| {
                    (-3..=3)
                        .map(|n| {
                            let d = x - center - n as f64 * period;
                            (-0.5 * d * d / (width * width)).exp()
                        })
                        .sum()
                })?;
                normalize(&f)
            }
            InitialCondition::RandomPerturbation { amplitude, seed } => {
                let xi = random_smooth(grid, seed, 1.0);
                let sup = xi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let values = xi.iter().map(|v| level + amplitude * v / sup).collect();
                let f = DensityField::new(grid, values)?;
                if f.min() < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "perturbation amplitude {amplitude} exceeds the uniform level {level}"
                    )));
                }
                Ok(f)
            }
            InitialCondition::RandomDensity { seed } => {
                let xi = random_smooth(grid, seed, 0.8);
                let values = xi.into_iter().map(|v| (1.0 + v).max(0.0)).collect();
                normalize(&DensityField::new(grid, values)?)
            }
        }
    }
}

/// Random trigonometric polynomial with modes `1..=RANDOM_MODES` and
/// coefficient scale `scale / m`.
fn random_smooth(grid: Grid, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (1..=RANDOM_MODES)
        .map(|m| {
            let s = scale / m as f64;
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (s * a, s * b)
        })
        .collect();
    let ell = grid.ell();
    grid.nodes()
        .into_iter()
        .map(|x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(i, (a, b))| {
                    let k = (i + 1) as f64 * PI / ell;
                    a * (k * x).cos() + b * (k * x).sin()
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::total_mass;
    use crate::grid::make_grid;

    #[test]
    fn every_kind_is_a_probability_density() {
        let g = make_grid(1.0, 128).unwrap();
        let kinds = [
            InitialCondition::Uniform,
            InitialCondition::Cosine { amplitude: 0.1, mode: 1 },
            InitialCondition::Bump { center: 0.9, width: 0.1 },
            InitialCondition::RandomPerturbation { amplitude: 1e-3, seed: 7 },
            InitialCondition::RandomDensity { seed: 7 },
        ];
        for ic in kinds {
            let f = ic.build(g).unwrap();
            assert!(f.min() >= 0.0, "{ic:?}");
            assert!((total_mass(&f) - 1.0).abs() < 1e-12, "{ic:?}");
        }
    }

    #[test]
    fn perturbation_amplitude() {
        let g = make_grid(1.0, 128).unwrap();
        let f = InitialCondition::RandomPerturbation { amplitude: 1e-3, seed: 3 }.build(g).unwrap();
        let dev = f.offset(0.5).values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((dev - 1e-3).abs() < 1e-15);
        assert!(InitialCondition::RandomPerturbation { amplitude: 0.9, seed: 3 }.build(g).is_err());
    }

    #[test]
    fn seeded_and_reproducible() {
        let g = make_grid(1.0, 64).unwrap();
        let a = InitialCondition::RandomDensity { seed: 11 }.build(g).unwrap();
        let b = InitialCondition::RandomDensity { seed: 11 }.build(g).unwrap();
        let c = InitialCondition::RandomDensity { seed: 12 }.build(g).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
