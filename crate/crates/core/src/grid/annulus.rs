use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::Field;
use crate::error::{config, Result};

/// Polar grid on the annulus `r_inner <= |x| <= r_outer`.
///
/// Nodes are uniform in radius (both circles included) and in angle
/// (periodic, `theta_j = 2 pi j / n_theta`). Node `(i, j)` has flat index
/// `i * n_theta + j`. The two boundary circles carry homogeneous Dirichlet data.
///
/// Quadrature is trapezoidal in `r` with the Jacobian `r` evaluated at the
/// nodes and trapezoidal in `theta`, so constants and functions linear in `r`
/// integrate exactly.
#[derive(Clone)]
pub struct AnnulusGrid {
    r_inner: f64,
    r_outer: f64,
    n_r: usize,
    n_theta: usize,
    h_r: f64,
    h_theta: f64,
    radii: Vec<f64>,
    weights: Vec<f64>,
    solver: OnceLock<Arc<PolarPoisson>>,
}

impl fmt::Debug for AnnulusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnnulusGrid")
            .field("r_inner", &self.r_inner)
            .field("r_outer", &self.r_outer)
            .field("n_r", &self.n_r)
            .field("n_theta", &self.n_theta)
            .finish()
    }
}

impl AnnulusGrid {
    pub fn new(r_inner: f64, r_outer: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        if !(r_inner.is_finite() && r_outer.is_finite()) || r_inner <= 0.0 || r_outer <= r_inner {
            return config(format!(
                "annulus radii must satisfy 0 < r_inner < r_outer (got {r_inner}, {r_outer})"
            ));
        }
        if n_r < 8 || n_theta < 8 {
            return config(format!("annulus needs n_r, n_theta >= 8 (got {n_r}, {n_theta})"));
        }
        if !n_theta.is_multiple_of(2) {
            return config(format!("n_theta must be even (got {n_theta})"));
        }
        let h_r = (r_outer - r_inner) / (n_r - 1) as f64;
        let h_theta = 2.0 * PI / n_theta as f64;
        let radii: Vec<f64> = (0..n_r)
            .map(|i| if i == n_r - 1 { r_outer } else { r_inner + i as f64 * h_r })
            .collect();
        let mut weights = Vec::with_capacity(n_r * n_theta);
        for (i, &r) in radii.iter().enumerate() {
            let edge = if i == 0 || i == n_r - 1 { 0.5 } else { 1.0 };
            let w = edge * r * h_r * h_theta;
            weights.extend(std::iter::repeat_n(w, n_theta));
        }
        Ok(AnnulusGrid {
            r_inner,
            r_outer,
            n_r,
            n_theta,
            h_r,
            h_theta,
            radii,
            weights,
            solver: OnceLock::new(),
        })
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn h_r(&self) -> f64 {
        self.h_r
    }

    pub fn h_theta(&self) -> f64 {
        self.h_theta
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.h_theta
    }

    pub fn node_count(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    /// `(r, theta)` of a flat node index.
    pub fn polar(&self, idx: usize) -> (f64, f64) {
        let (i, j) = (idx / self.n_theta, idx % self.n_theta);
        (self.radii[i], self.theta(j))
    }

    pub fn cartesian(&self, idx: usize) -> (f64, f64) {
        let (r, t) = self.polar(idx);
        (r * t.cos(), r * t.sin())
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let i = idx / self.n_theta;
        i == 0 || i == self.n_r - 1
    }

    pub fn area(&self) -> f64 {
        PI * (self.r_outer * self.r_outer - self.r_inner * self.r_inner)
    }

    /// Smallest grid spacing, measured on the inner circle in angle.
    pub fn min_spacing(&self) -> f64 {
        self.h_r.min(self.r_inner * self.h_theta)
    }

    /// Evaluate `f(r, theta)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        (0..self.node_count())
            .map(|idx| {
                let (r, t) = self.polar(idx);
                f(r, t)
            })
            .collect::<Vec<_>>()
            .into()
    }

    /// Zero the boundary circles in place.
    pub fn clamp_boundary(&self, u: &mut [f64]) {
        let n = self.n_theta;
        let last = (self.n_r - 1) * n;
        u[..n].iter_mut().for_each(|v| *v = 0.0);
        u[last..].iter_mut().for_each(|v| *v = 0.0);
    }

    /// Conservative five-point polar stencil for `-Δu`, interior rows only.
    pub(crate) fn apply_neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let (nr, nt) = (self.n_r, self.n_theta);
        let hr2 = self.h_r * self.h_r;
        let ht2 = self.h_theta * self.h_theta;
        let mut out = vec![0.0; nr * nt];
        let at = |i: usize, j: usize| -> f64 {
            if i == 0 || i == nr - 1 {
                0.0
            } else {
                u[i * nt + j]
            }
        };
        for i in 1..nr - 1 {
            let r = self.radii[i];
            let rp = r + 0.5 * self.h_r;
            let rm = r - 0.5 * self.h_r;
            let cr = 1.0 / (r * hr2);
            let ct = 1.0 / (r * r * ht2);
            for j in 0..nt {
                let jp = if j + 1 == nt { 0 } else { j + 1 };
                let jm = if j == 0 { nt - 1 } else { j - 1 };
                let c = at(i, j);
                let radial = rp * (at(i + 1, j) - c) - rm * (c - at(i - 1, j));
                let angular = at(i, jp) - 2.0 * c + at(i, jm);
                out[i * nt + j] = -cr * radial - ct * angular;
            }
        }
        out
    }

    /// `½ Σ_edges` form of the discrete Dirichlet energy; equals `½⟨-Δu, u⟩_w`
    /// by summation by parts.
    pub(crate) fn edge_energy(&self, u: &[f64]) -> f64 {
        let (nr, nt) = (self.n_r, self.n_theta);
        let at = |i: usize, j: usize| -> f64 {
            if i == 0 || i == nr - 1 {
                0.0
            } else {
                u[i * nt + j]
            }
        };
        let mut radial = 0.0;
        for i in 0..nr - 1 {
            let coef = (self.radii[i] + 0.5 * self.h_r) * self.h_theta / self.h_r;
            let mut s = 0.0;
            for j in 0..nt {
                let d = at(i + 1, j) - at(i, j);
                s += d * d;
            }
            radial += coef * s;
        }
        let mut angular = 0.0;
        for i in 1..nr - 1 {
            let coef = self.h_r / (self.h_theta * self.radii[i]);
            let mut s = 0.0;
            for j in 0..nt {
                let jp = if j + 1 == nt { 0 } else { j + 1 };
                let d = at(i, jp) - at(i, j);
                s += d * d;
            }
            angular += coef * s;
        }
        0.5 * (radial + angular)
    }

    pub(crate) fn solver(&self) -> &PolarPoisson {
        self.solver.get_or_init(|| Arc::new(PolarPoisson::new(self)))
    }
}

/// Direct Dirichlet Poisson solver: FFT in angle, one factored tridiagonal
/// system in radius per angular wavenumber. Built once per grid.
pub(crate) struct PolarPoisson {
    n_r: usize,
    n_theta: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// Sub-diagonal of the radial operator (interior rows), shared by all modes.
    lower: Vec<f64>,
    /// Thomas factors per wavenumber `0..=n_theta/2`: `(inverse pivots, scaled upper)`.
    factors: Vec<(Vec<f64>, Vec<f64>)>,
}

impl PolarPoisson {
    fn new(g: &AnnulusGrid) -> Self {
        let m = g.n_r - 2;
        let hr2 = g.h_r * g.h_r;
        let mut lower = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut inv_r2 = vec![0.0; m];
        for k in 0..m {
            let r = g.radii[k + 1];
            let rp = r + 0.5 * g.h_r;
            let rm = r - 0.5 * g.h_r;
            lower[k] = -rm / (r * hr2);
            upper[k] = -rp / (r * hr2);
            diag[k] = (rp + rm) / (r * hr2);
            inv_r2[k] = 1.0 / (r * r);
        }
        let ht2 = g.h_theta * g.h_theta;
        let factors = (0..=g.n_theta / 2)
            .map(|mode| {
                let symbol = (2.0 - 2.0 * (mode as f64 * g.h_theta).cos()) / ht2;
                let mut inv_pivot = vec![0.0; m];
                let mut cprime = vec![0.0; m];
                for k in 0..m {
                    let b = diag[k] + symbol * inv_r2[k];
                    let denom = if k == 0 { b } else { b - lower[k] * cprime[k - 1] };
                    inv_pivot[k] = 1.0 / denom;
                    cprime[k] = upper[k] / denom;
                }
                (inv_pivot, cprime)
            })
            .collect();
        let mut planner = FftPlanner::new();
        PolarPoisson {
            n_r: g.n_r,
            n_theta: g.n_theta,
            fft: planner.plan_fft_forward(g.n_theta),
            ifft: planner.plan_fft_inverse(g.n_theta),
            lower,
            factors,
        }
    }

    /// Solve `-Δg = f` with `g = 0` on both circles; boundary entries of `f` are ignored.
    pub(crate) fn solve(&self, f: &[f64]) -> Vec<f64> {
        let (nr, nt) = (self.n_r, self.n_theta);
        let m = nr - 2;
        let mut buf: Vec<Complex<f64>> = f[nt..(nr - 1) * nt]
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .collect();
        self.fft.process(&mut buf);
        let mut column = vec![Complex::new(0.0, 0.0); m];
        for mode in 0..nt {
            let (inv_pivot, cprime) = &self.factors[mode.min(nt - mode)];
            for k in 0..m {
                let d = buf[k * nt + mode];
                column[k] = if k == 0 {
                    d * inv_pivot[0]
                } else {
                    (d - column[k - 1] * self.lower[k]) * inv_pivot[k]
                };
            }
            for k in (0..m - 1).rev() {
                let next = column[k + 1];
                column[k] -= next * cprime[k];
            }
            for k in 0..m {
                buf[k * nt + mode] = column[k];
            }
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / nt as f64;
        let mut out = vec![0.0; nr * nt];
        for (o, c) in out[nt..(nr - 1) * nt].iter_mut().zip(&buf) {
            *o = c.re * scale;
        }
        out
    }
}
