use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible cell count.
pub const MIN_CELLS: usize = 8;

/// Default cell count for solver runs.
pub const DEFAULT_CELLS: usize = 256;

/// Uniform node-based mesh on `[-ell, ell)`; the right endpoint is the
/// periodic image of the left one and is not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    ell: f64,
    m: usize,
    h: f64,
}

/// Build a periodic grid with `m` cells. `m` must be even and at least 8.
pub fn make_grid(ell: f64, m: usize) -> Result<Grid> {
    if m < MIN_CELLS {
        return Err(Error::InvalidGrid(format!("need at least {MIN_CELLS} cells, got {m}")));
    }
    if m % 2 != 0 {
        return Err(Error::InvalidGrid(format!("cell count must be even, got {m}")));
    }
    Grid::unchecked(ell, m)
}

impl Grid {
    /// Grid without the cell-count restrictions of [`make_grid`]; used for
    /// tiny illustrative meshes.
    pub fn unchecked(ell: f64, m: usize) -> Result<Grid> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidGrid(format!("ell must be positive, got {ell}")));
        }
        if m == 0 {
            return Err(Error::InvalidGrid("cell count must be positive".into()));
        }
        Ok(Grid { ell, m, h: 2.0 * ell / m as f64 })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.ell + j as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.node(j)).collect()
    }

    /// Index of `i + offset` modulo `m`.
    #[inline]
    pub fn wrap_index(&self, i: usize, offset: isize) -> usize {
        (i as isize + offset).rem_euclid(self.m as isize) as usize
    }

    /// Map any real position into `[-ell, ell)`.
    #[inline]
    pub fn wrap_position(&self, x: f64) -> f64 {
        wrap_periodic(x, self.ell)
    }

    /// Index of the cell `[x_j - h/2, x_j + h/2)` containing `x`.
    #[inline]
    pub fn cell_of(&self, x: f64) -> usize {
        let s = ((x + self.ell) / self.h + 0.5).floor() as i64;
        s.rem_euclid(self.m as i64) as usize
    }

    /// Number of cells spanned by `radius` after rounding to the nearest
    /// multiple of `h`, with the snapped radius itself.
    pub fn snap_radius(&self, radius: f64) -> Result<(usize, f64)> {
        let cells = (radius / self.h).round();
        if !cells.is_finite() || cells < 0.0 {
            return Err(Error::InvalidParams(format!("cannot snap radius {radius}")));
        }
        let cells = cells as usize;
        if 2 * cells >= self.m {
            return Err(Error::InvalidParams(format!(
                "radius {radius} spans {cells} cells, at least half of the {} cell grid",
                self.m
            )));
        }
        Ok((cells, cells as f64 * self.h))
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.m == other.m && self.ell == other.ell
    }
}

/// Map `x` into `[-ell, ell)`.
#[inline]
pub fn wrap_periodic(x: f64, ell: f64) -> f64 {
    let period = 2.0 * ell;
    let mut y = x - period * ((x + ell) / period).floor();
    // floor can leave y == ell (or a hair below -ell) through rounding
    if y >= ell {
        y -= period;
    }
    if y < -ell {
        y = -ell;
    }
    y
}

/// Signed minimal-image representative of `d` in `[-ell, ell)`.
#[inline]
pub fn minimal_image(d: f64, ell: f64) -> f64 {
    wrap_periodic(d, ell)
}
