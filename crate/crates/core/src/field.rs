use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Grid samples of a density (or a density fluctuation) at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.m() {
            return Err(Error::GridMismatch { field: values.len(), grid: grid.m() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Callers guarantee the length matches; used on hot paths.
    pub(crate) fn from_vec(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.m());
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.m()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Unit-mass spike at node `j`.
    pub fn delta(grid: Grid, j: usize) -> Self {
        let mut values = vec![0.0; grid.m()];
        values[j % grid.m()] = 1.0 / grid.h();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &DensityField, b: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Fluctuation about `level`, e.g. `psi = rho - 1/(2 ell)`.
    pub fn offset(&self, level: f64) -> Self {
        self.map(|v| v - level)
    }

    /// Periodic shift by `j` nodes: `out[i] = self[i - j]`.
    pub fn shift(&self, j: isize) -> Self {
        let values = (0..self.grid.m()).map(|i| self.values[self.grid.wrap_index(i, -j)]).collect();
        Self { grid: self.grid, values }
    }

    pub fn max_abs_diff(&self, other: &DensityField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Discrete L1 distance `h * sum |a - b|`.
    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.grid.h() * self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Periodic piecewise-linear interpolation at `x`.
    pub fn sample_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        let s = (g.wrap_position(x) + g.ell()) / g.h();
        let j = s.floor();
        let frac = s - j;
        let j = (j as usize) % g.m();
        let k = (j + 1) % g.m();
        (1.0 - frac) * self.values[j] + frac * self.values[k]
    }

    /// Interpolate onto the nodes of another grid over the same domain.
    pub fn resample(&self, grid: Grid) -> Result<Self> {
        if (grid.ell() - self.grid.ell()).abs() > 1e-12 * self.grid.ell() {
            return Err(Error::InvalidGrid("resampling needs grids over the same domain".into()));
        }
        let values = grid.nodes().into_iter().map(|x| self.sample_at(x)).collect();
        Ok(Self { grid, values })
    }

    pub(crate) fn check_same_grid(&self, other: &DensityField) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch { field: other.len(), grid: self.grid.m() });
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// The spatially uniform probability density `1 / (2 ell)`.
pub fn uniform_density(grid: Grid) -> DensityField {
    DensityField::constant(grid, 1.0 / (2.0 * grid.ell()))
}

/// Periodic rectangle-rule integral `h * sum values`.
pub fn total_mass(field: &DensityField) -> f64 {
    field.grid.h() * field.values.iter().sum::<f64>()
}

/// Rescale a nonnegative field to unit mass.
pub fn normalize(field: &DensityField) -> Result<DensityField> {
    if let Some((index, &value)) = field.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    let mass = total_mass(field);
    if mass <= 0.0 {
        return Err(Error::ZeroMass);
    }
    Ok(field.scale(1.0 / mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    #[test]
    fn uniform_levels() {
        for (ell, level) in [(1.0, 0.5), (std::f64::consts::PI, 0.1591549431), (0.5, 1.0)] {
            let f = uniform_density(make_grid(ell, 16).unwrap());
            assert!(f.values().iter().all(|v| (v - level).abs() < 1e-10));
            assert!((total_mass(&f) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn masses() {
        let g = make_grid(1.0, 64).unwrap();
        assert!((total_mass(&uniform_density(g)) - 1.0).abs() < 1e-14);
        assert_eq!(total_mass(&DensityField::zeros(g)), 0.0);
        assert!((total_mass(&DensityField::delta(g, 17)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_examples() {
        let g = make_grid(1.0, 32).unwrap();
        let f = normalize(&DensityField::constant(g, 2.0)).unwrap();
        assert!(f.values().iter().all(|v| (v - 0.5).abs() < 1e-15));

        let d = DensityField::delta(g, 3);
        let n = normalize(&d.scale(3.0)).unwrap();
        assert!(n.max_abs_diff(&d).unwrap() < 1e-12);

        assert_eq!(normalize(&DensityField::zeros(g)), Err(Error::ZeroMass));
        let mut bad = DensityField::constant(g, 1.0);
        bad.values_mut()[5] = -0.1;
        assert!(matches!(normalize(&bad), Err(Error::NegativeDensity { index: 5, .. })));
    }

    #[test]
    fn construction_checks() {
        let g = make_grid(1.0, 8).unwrap();
        assert!(DensityField::new(g, vec![0.0; 7]).is_err());
        assert!(DensityField::new(g, vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn shift_and_interp() {
        let g = make_grid(1.0, 8).unwrap();
        let f = DensityField::new(g, (0..8).map(|i| i as f64).collect()).unwrap();
        assert_eq!(f.shift(1).values()[0], 7.0);
        assert_eq!(f.shift(-2).values()[0], 2.0);
        assert_eq!(f.sample_at(g.node(3)), 3.0);
        assert!((f.sample_at(g.node(3) + 0.5 * g.h()) - 3.5).abs() < 1e-14);
        // between the last node and the periodic image of the first
        assert!((f.sample_at(0.875) - 3.5).abs() < 1e-14);
    }

    fn field_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..10.0, 16)
    }

    proptest! {
        #[test]
        fn mass_is_homogeneous(v in field_strategy(), c in 1e-3f64..1e3) {
            let g = make_grid(1.3, 16).unwrap();
            let f = DensityField::new(g, v).unwrap();
            let m = total_mass(&f);
            let ms = total_mass(&f.scale(c));
            prop_assert!((ms - c * m).abs() <= 1e-12 * (c * m).abs().max(1e-300));
        }

        #[test]
        fn normalize_idempotent(v in field_strategy()) {
            let g = make_grid(1.0, 16).unwrap();
            let f = DensityField::new(g, v).unwrap();
            prop_assume!(total_mass(&f) > 1e-6);
            let once = normalize(&f).unwrap();
            let twice = normalize(&once).unwrap();
            prop_assert!((total_mass(&once) - 1.0).abs() < 1e-12);
            prop_assert!(once.max_abs_diff(&twice).unwrap() <= 1e-12 * once.max().max(1.0));
        }
    }
}
