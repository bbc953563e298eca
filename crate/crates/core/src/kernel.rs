//! The nonlocal interaction operator
//!
//! ```text
//! G_rho(x) = int_{x-R}^{x+R} (x - y) rho(y) dy = int_{-R}^{R} z rho(x - z) dz
//! ```
//!
//! discretised with the trapezoidal rule on the window `z = j h`,
//! `|j| <= r`, with `R` snapped to `r h`. The resulting stencil is
//! antisymmetric, so `G` of a constant field vanishes exactly in floating
//! point and the operator commutes exactly with node shifts.

use std::collections::HashSet;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::exec::Execution;
use crate::field::DensityField;
use crate::grid::Grid;
use crate::params::Params;

/// Grids at least this large use the FFT path in [`Kernel::apply_g`].
pub const FFT_MIN_CELLS: usize = 2048;

/// Antisymmetric quadrature stencil for `G` on a fixed grid.
#[derive(Clone)]
pub struct Kernel {
    grid: Grid,
    radius_cells: usize,
    radius: f64,
    // coeffs[j - 1] multiplies rho[i - j] - rho[i + j]
    coeffs: Vec<f64>,
    plan: OnceLock<Arc<FftPlan>>,
}

struct FftPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbol: Vec<Complex<f64>>,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("grid", &self.grid)
            .field("radius_cells", &self.radius_cells)
            .field("radius", &self.radius)
            .finish()
    }
}

/// Warn about a radius snap, once per grid and radius per process.
fn warn_snap(grid: &Grid, requested: f64, snapped: f64) {
    static SEEN: Mutex<Option<HashSet<(u64, usize, u64)>>> = Mutex::new(None);
    let rel = (snapped - requested).abs() / requested;
    if rel <= 1e-12 {
        return;
    }
    let key = (grid.ell().to_bits(), grid.m(), requested.to_bits());
    let mut seen = SEEN.lock().unwrap_or_else(|e| e.into_inner());
    if seen.get_or_insert_with(HashSet::new).insert(key) {
        log::warn!("radius {requested} snapped to {snapped} on the {} cell grid (relative change {rel:.3e})", grid.m());
    }
}

impl Kernel {
    pub fn new(grid: Grid, params: &Params) -> Result<Self> {
        let (r, radius) = grid.snap_radius(params.radius())?;
        warn_snap(&grid, params.radius(), radius);
        Ok(Self::with_cells(grid, r, radius))
    }

    fn with_cells(grid: Grid, r: usize, radius: f64) -> Self {
        let h2 = grid.h() * grid.h();
        let mut coeffs: Vec<f64> = (1..=r).map(|j| h2 * j as f64).collect();
        if let Some(last) = coeffs.last_mut() {
            *last *= 0.5;
        }
        Self { grid, radius_cells: r, radius, coeffs, plan: OnceLock::new() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn radius_cells(&self) -> usize {
        self.radius_cells
    }

    /// Radius after snapping to the grid.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Full stencil weights `w[j + r]` for offsets `j = -r..=r`, such that
    /// `G_i = sum_j w_j rho_{i-j}`.
    pub fn weights(&self) -> Vec<f64> {
        let r = self.radius_cells;
        let mut w = vec![0.0; 2 * r + 1];
        for (j, &c) in self.coeffs.iter().enumerate() {
            w[r + j + 1] = c;
            w[r - j - 1] = -c;
        }
        w
    }

    /// `G_rho` at every node; direct summation below [`FFT_MIN_CELLS`],
    /// FFT convolution above.
    pub fn apply_g(&self, rho: &DensityField) -> Result<DensityField> {
        if self.grid.m() >= FFT_MIN_CELLS && self.radius_cells > 8 {
            self.apply_g_fft(rho)
        } else {
            self.apply_g_direct(rho)
        }
    }

    /// Direct `O(M r)` stencil summation.
    pub fn apply_g_direct(&self, rho: &DensityField) -> Result<DensityField> {
        self.apply_g_direct_with(rho, Execution::for_work(self.grid.m() * self.radius_cells))
    }

    pub fn apply_g_direct_with(&self, rho: &DensityField, exec: Execution) -> Result<DensityField> {
        self.check(rho)?;
        let mut out = vec![0.0; self.grid.m()];
        self.g_into(rho.values(), &mut out, exec);
        Ok(DensityField::from_vec(self.grid, out))
    }

    pub(crate) fn g_into(&self, rho: &[f64], out: &mut [f64], exec: Execution) {
        let m = self.grid.m();
        let coeffs = &self.coeffs;
        exec.fill(out, |i| {
            let mut acc = 0.0;
            for (jm1, &c) in coeffs.iter().enumerate() {
                let j = jm1 + 1;
                let left = rho[(i + m - j) % m];
                let right = rho[(i + j) % m];
                acc += c * (left - right);
            }
            acc
        });
    }

    /// Circular convolution with the stencil via FFT, `O(M log M)`.
    pub fn apply_g_fft(&self, rho: &DensityField) -> Result<DensityField> {
        self.check(rho)?;
        let plan = self.plan.get_or_init(|| Arc::new(self.build_plan()));
        let m = self.grid.m();
        // G annihilates constants, so shift by a sample value first: a
        // constant input then transforms as exact zeros
        let base = rho.values()[0];
        let mut buf: Vec<Complex<f64>> = rho.values().iter().map(|&v| Complex::new(v - base, 0.0)).collect();
        plan.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&plan.symbol) {
            *b *= s;
        }
        plan.inverse.process(&mut buf);
        let scale = 1.0 / m as f64;
        Ok(DensityField::from_vec(self.grid, buf.into_iter().map(|c| c.re * scale).collect()))
    }

    fn build_plan(&self) -> FftPlan {
        let m = self.grid.m();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let mut symbol = vec![Complex::new(0.0, 0.0); m];
        for (jm1, &c) in self.coeffs.iter().enumerate() {
            let j = jm1 + 1;
            symbol[j].re += c;
            symbol[m - j].re -= c;
        }
        forward.process(&mut symbol);
        FftPlan { forward, inverse, symbol }
    }

    /// Exact derivative of `G`:
    /// `(G_rho)_x = -R (rho(x+R) + rho(x-R)) + int_{x-R}^{x+R} rho(y) dy`,
    /// with the window integral taken by the same trapezoidal rule.
    pub fn apply_g_x(&self, rho: &DensityField) -> Result<DensityField> {
        self.check(rho)?;
        let m = self.grid.m();
        let r = self.radius_cells;
        let h = self.grid.h();
        let radius = self.radius;
        let v = rho.values();
        let mut out = vec![0.0; m];
        if r > 0 {
            Execution::for_work(m * r).fill(&mut out, |i| {
                let ends = v[(i + r) % m] + v[(i + m - r) % m];
                let mut inner = 0.0;
                for j in 1..r {
                    inner += v[(i + j) % m] + v[(i + m - j) % m];
                }
                inner += v[i];
                -radius * ends + h * (inner + 0.5 * ends)
            });
        }
        Ok(DensityField::from_vec(self.grid, out))
    }

    fn check(&self, rho: &DensityField) -> Result<()> {
        if !rho.grid().same_as(&self.grid) {
            return Err(crate::Error::GridMismatch { field: rho.len(), grid: self.grid.m() });
        }
        Ok(())
    }
}

/// `G_rho` for the given parameters, with `R` snapped to `rho`'s grid.
pub fn apply_g(rho: &DensityField, params: &Params) -> Result<DensityField> {
    Kernel::new(*rho.grid(), params)?.apply_g(rho)
}

/// `(G_rho)_x` for the given parameters, with `R` snapped to `rho`'s grid.
pub fn apply_g_x(rho: &DensityField, params: &Params) -> Result<DensityField> {
    Kernel::new(*rho.grid(), params)?.apply_g_x(rho)
}

/// Real symbol of `d/dx G` on the mode `e^{ikx}`:
/// `m(k) = 2 (sin kR - kR cos kR) / k`, with `m(0) = 0`.
pub fn fourier_multiplier(k: f64, params: &Params) -> f64 {
    multiplier(k, params.radius())
}

pub(crate) fn multiplier(k: f64, radius: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let x = k * radius;
    // sin x - x cos x loses all digits to cancellation near 0
    let core = if x.abs() < 1e-2 {
        let x2 = x * x;
        x * x2 * (1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0)
    } else {
        x.sin() - x * x.cos()
    };
    2.0 * core / k
}
