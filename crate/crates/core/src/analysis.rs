//! Stability thresholds, decay bounds, the dispersion relation of the
//! uniform state, discrete norms, exponential fits and a steady-state
//! classifier.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::kernel::fourier_multiplier;
use crate::params::Params;

/// Window start for decay fits; earlier samples are treated as transient.
pub const DEFAULT_FIT_START: f64 = 0.5;

/// Cluster peaks must exceed this multiple of the uniform level.
pub const CLUSTER_PEAK_FACTOR: f64 = 1.5;

const MIN_FIT_SAMPLES: usize = 5;

/// Noise level above which the uniform state attracts every initial
/// density: `(2 ell / pi) (2R + R^2 / (sqrt(3) ell))`.
pub fn global_stability_threshold(params: &Params) -> f64 {
    let (ell, r) = (params.ell(), params.radius());
    2.0 * ell / PI * (2.0 * r + r * r / (3f64.sqrt() * ell))
}

/// Exponent `kappa` of the energy bound `||psi(t)||_2^2 <= C e^{kappa t}`:
/// `(2 / sigma^2) (2R + R^2/(sqrt(3) ell))^2 - pi^2 sigma^2 / (2 ell^2)`.
pub fn decay_rate_bound(params: &Params) -> Result<f64> {
    let s2 = params.sigma2();
    if s2 == 0.0 {
        return Err(Error::InvalidParams("decay bound needs sigma > 0".into()));
    }
    let (ell, r) = (params.ell(), params.radius());
    let a = 2.0 * r + r * r / (3f64.sqrt() * ell);
    Ok(2.0 / s2 * a * a - PI * PI * s2 / (2.0 * ell * ell))
}

/// Linear growth rate of the mode `e^{ikx}` about the uniform state:
/// `lambda(k) = -sigma^2 k^2 / 2 + m(k) / (2 ell)`.
pub fn dispersion_growth_rate(k: f64, params: &Params) -> f64 {
    -0.5 * params.sigma2() * k * k + fourier_multiplier(k, params) / (2.0 * params.ell())
}

/// Noise level at which a mode `k = m pi / ell` becomes neutral.
pub fn neutral_sigma2(k: f64, params: &Params) -> f64 {
    fourier_multiplier(k, params) / (params.ell() * k * k)
}

/// Noise level below which at least one admissible mode `k = m pi / ell`
/// (`m = 1..=max_mode`) grows. Returns the value and the maximizing `m`.
pub fn linear_instability_threshold_modes(params: &Params, max_mode: usize) -> (f64, usize) {
    let ell = params.ell();
    (1..=max_mode.max(1))
        .map(|m| (neutral_sigma2(m as f64 * PI / ell, params), m))
        .fold((f64::NEG_INFINITY, 0), |best, cur| if cur.0 > best.0 { cur } else { best })
}

/// [`linear_instability_threshold_modes`] over enough modes to cover every
/// maximum: beyond `m ~ ell / R` the neutral curve decays like `1/k^2`.
pub fn linear_instability_threshold(params: &Params) -> f64 {
    let max_mode = ((8.0 * params.ell() / params.radius()).ceil() as usize).max(64);
    linear_instability_threshold_modes(params, max_mode).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Above the global threshold: uniform state globally attracting.
    Supercritical,
    /// Between the curves: both states may be locally stable.
    BistableCandidate,
    /// Below the linear threshold: uniform state unstable.
    LinearlyUnstable,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Supercritical => "supercritical",
            Regime::BistableCandidate => "bistable-candidate",
            Regime::LinearlyUnstable => "linearly-unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub sigma2_global: f64,
    pub sigma2_linear: f64,
    /// `None` when `sigma = 0`.
    pub kappa_bound: Option<f64>,
    pub regime: Regime,
}

pub fn stability_report(params: &Params) -> StabilityReport {
    let sigma2_global = global_stability_threshold(params);
    let sigma2_linear = linear_instability_threshold(params);
    let s2 = params.sigma2();
    let regime = if s2 > sigma2_global {
        Regime::Supercritical
    } else if s2 < sigma2_linear {
        Regime::LinearlyUnstable
    } else {
        Regime::BistableCandidate
    };
    StabilityReport { sigma2_global, sigma2_linear, kappa_bound: decay_rate_bound(params).ok(), regime }
}

/// Discrete `L^p` norm, `p` in {1, 2}.
pub fn lp_norm(field: &DensityField, p: u32) -> Result<f64> {
    let h = field.grid().h();
    match p {
        1 => Ok(h * field.values().iter().map(|v| v.abs()).sum::<f64>()),
        2 => Ok((h * field.values().iter().map(|v| v * v).sum::<f64>()).sqrt()),
        other => Err(Error::UnsupportedNorm(other)),
    }
}

/// `||f_x||_2` with centered differences.
pub fn h1_seminorm(field: &DensityField) -> f64 {
    let v = field.values();
    let m = v.len();
    let h = field.grid().h();
    let sum: f64 = (0..m)
        .map(|i| {
            let d = (v[(i + 1) % m] - v[(i + m - 1) % m]) / (2.0 * h);
            d * d
        })
        .sum();
    (h * sum).sqrt()
}

/// Amplitude of the mode `k` in `field`: `sqrt(a^2 + b^2)` with
/// `a = (1/ell) int f cos(kx)`, `b = (1/ell) int f sin(kx)`.
pub fn mode_amplitude(field: &DensityField, k: f64) -> f64 {
    let g = field.grid();
    let (mut a, mut b) = (0.0, 0.0);
    for (x, v) in g.nodes().into_iter().zip(field.values()) {
        a += v * (k * x).cos();
        b += v * (k * x).sin();
    }
    let s = g.h() / g.ell();
    (s * a).hypot(s * b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Least-squares line through `(t, ln value)` for samples with `t` in
/// `window`; the rate is the slope.
pub fn fit_exponential_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("empty fit window [{lo}, {hi}]")));
    }
    let mut pts = Vec::new();
    for &(t, v) in series.iter().filter(|(t, _)| *t >= lo && *t <= hi) {
        if !(v > 0.0) {
            return Err(Error::NonPositiveSample { t, value: v });
        }
        pts.push((t, v.ln()));
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_FIT_SAMPLES, got: pts.len() });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::InvalidInput("fit window holds a single time".into()));
    }
    // a constant series leaves only rounding noise in syy
    let flat = syy <= n * (4.0 * f64::EPSILON * ym.abs().max(1.0)).powi(2);
    let rate = if flat { 0.0 } else { sty / stt };
    let intercept = ym - rate * tm;
    let r_squared = if flat { 0.0 } else { (sty * sty / (stt * syy)).clamp(0.0, 1.0) };
    Ok(DecayFit { rate, intercept, r_squared, window })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteadyState {
    Uniform,
    Clustered(usize),
}

impl SteadyState {
    pub fn is_clustered(&self) -> bool {
        matches!(self, SteadyState::Clustered(_))
    }

    pub fn cluster_count(&self) -> usize {
        match self {
            SteadyState::Uniform => 0,
            SteadyState::Clustered(n) => *n,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SteadyState::Uniform => "uniform",
            SteadyState::Clustered(_) => "clustered",
        }
    }
}

/// Default uniformity tolerance `0.05 / sqrt(2 ell)`.
pub fn default_uniform_tolerance(params: &Params) -> f64 {
    0.05 / (2.0 * params.ell()).sqrt()
}

/// `Uniform` if `||field - 1/(2 ell)||_2 < tol`; otherwise `Clustered`
/// with the number of strict local maxima above `1.5 / (2 ell)` of the
/// 3-point moving average.
pub fn classify_state(field: &DensityField, params: &Params, tol: Option<f64>) -> SteadyState {
    let tol = tol.unwrap_or_else(|| default_uniform_tolerance(params));
    let level = 1.0 / (2.0 * field.grid().ell());
    let dev = lp_norm(&field.offset(level), 2).expect("p = 2 is supported");
    if dev < tol {
        return SteadyState::Uniform;
    }
    let v = field.values();
    let m = v.len();
    let smooth: Vec<f64> = (0..m).map(|i| (v[(i + m - 1) % m] + v[i] + v[(i + 1) % m]) / 3.0).collect();
    let peak = CLUSTER_PEAK_FACTOR * level;
    let count = (0..m)
        .filter(|&i| {
            let s = smooth[i];
            s > peak && s > smooth[(i + m - 1) % m] && s > smooth[(i + 1) % m]
        })
        .count();
    SteadyState::Clustered(count)
}
