//! Constant-coefficient cyclic tridiagonal solver (Thomas algorithm with a
//! Sherman-Morrison correction for the two corner entries).

use crate::error::{Error, Result};

// pivots below this fraction of the row scale count as singular
const PIVOT_RTOL: f64 = 1e-12;

/// Factorised periodic matrix with `sub` below, `diag` on, and `sup` above
/// the diagonal, including the wrap-around corners.
#[derive(Debug, Clone)]
pub struct CyclicTridiagonal {
    n: usize,
    sub: f64,
    gamma: f64,
    cprime: Vec<f64>,
    denom: Vec<f64>,
    // Sherman-Morrison correction vector and scale
    z: Vec<f64>,
    z_factor: f64,
    // the corner-free system is exactly the identity
    identity: bool,
}

impl CyclicTridiagonal {
    pub fn new(n: usize, sub: f64, diag: f64, sup: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!("cyclic system needs n >= 3, got {n}")));
        }
        let identity = sub == 0.0 && sup == 0.0 && diag == 1.0;
        // corners: A[0][n-1] = sub, A[n-1][0] = sup
        let scale = diag.abs() + sub.abs() + sup.abs();
        let gamma = -diag;
        let mut bb = vec![diag; n];
        bb[0] = diag - gamma;
        bb[n - 1] = diag - sup * sub / gamma;

        let mut cprime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for i in 0..n {
            let d = if i == 0 { bb[0] } else { bb[i] - sub * cprime[i - 1] };
            if !(d.abs() > PIVOT_RTOL * scale) || !d.is_finite() {
                return Err(Error::Singular { row: i, pivot: d });
            }
            denom[i] = d;
            cprime[i] = sup / d;
        }

        let mut this = Self {
            n,
            sub,
            gamma,
            cprime,
            denom,
            z: vec![0.0; n],
            z_factor: 0.0,
            identity,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = sup;
        let mut z = vec![0.0; n];
        this.thomas(&u, &mut z);
        let den = 1.0 + z[0] + sub * z[n - 1] / gamma;
        let den_scale = 1.0 + z[0].abs() + (sub * z[n - 1] / gamma).abs();
        if !(den.abs() > PIVOT_RTOL * den_scale) {
            return Err(Error::Singular { row: n, pivot: den });
        }
        this.z = z;
        this.z_factor = 1.0 / den;
        Ok(this)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn thomas(&self, r: &[f64], x: &mut [f64]) {
        let n = self.n;
        x[0] = r[0] / self.denom[0];
        for i in 1..n {
            x[i] = (r[i] - self.sub * x[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.cprime[i] * x[i + 1];
        }
    }

    /// Solve `A x = rhs` into `x`.
    pub fn solve_into(&self, rhs: &[f64], x: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.n);
        if self.identity {
            x.copy_from_slice(rhs);
            return;
        }
        self.thomas(rhs, x);
        let n = self.n;
        let fact = (x[0] + self.sub * x[n - 1] / self.gamma) * self.z_factor;
        for (xi, zi) in x.iter_mut().zip(&self.z) {
            *xi -= fact * zi;
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.solve_into(rhs, &mut x);
        x
    }
}
