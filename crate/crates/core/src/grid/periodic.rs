use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::Field;
use crate::error::{config, Result};

/// Discretization of `-Δ` on the periodic grid. Both variants are diagonal in
/// the discrete Fourier basis and share the same transform code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TorusStencil {
    /// Exact symbol `|k|²` (spectral accuracy for smooth periodic fields).
    Spectral,
    /// Periodic five-point stencil, symbol `Σ (2 sin(k h / 2) / h)²`.
    FivePoint,
}

/// Uniform grid on the flat torus `[0, L_x) × [0, L_y)`.
///
/// Node `(i, j)` sits at `(i L_x / n_x, j L_y / n_y)` with flat index `i * n_y + j`.
#[derive(Clone)]
pub struct TorusGrid {
    l_x: f64,
    l_y: f64,
    n_x: usize,
    n_y: usize,
    stencil: TorusStencil,
    weights: Vec<f64>,
    symbol: Vec<f64>,
    plans: Arc<Plans>,
}

struct Plans {
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("l_x", &self.l_x)
            .field("l_y", &self.l_y)
            .field("n_x", &self.n_x)
            .field("n_y", &self.n_y)
            .field("stencil", &self.stencil)
            .finish()
    }
}

fn wavenumber(m: usize, n: usize, len: f64) -> f64 {
    let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
    2.0 * PI * signed / len
}

impl TorusGrid {
    pub fn new(l_x: f64, l_y: f64, n_x: usize, n_y: usize) -> Result<Self> {
        Self::with_stencil(l_x, l_y, n_x, n_y, TorusStencil::Spectral)
    }

    pub fn with_stencil(
        l_x: f64,
        l_y: f64,
        n_x: usize,
        n_y: usize,
        stencil: TorusStencil,
    ) -> Result<Self> {
        if !(l_x.is_finite() && l_y.is_finite()) || l_x <= 0.0 || l_y <= 0.0 {
            return config(format!("torus periods must be positive (got {l_x}, {l_y})"));
        }
        if n_x < 4 || n_y < 4 {
            return config(format!("torus needs n_x, n_y >= 4 (got {n_x}, {n_y})"));
        }
        let cell = l_x * l_y / (n_x * n_y) as f64;
        let (hx, hy) = (l_x / n_x as f64, l_y / n_y as f64);
        let mut symbol = Vec::with_capacity(n_x * n_y);
        for i in 0..n_x {
            let kx = wavenumber(i, n_x, l_x);
            for j in 0..n_y {
                let ky = wavenumber(j, n_y, l_y);
                symbol.push(match stencil {
                    TorusStencil::Spectral => kx * kx + ky * ky,
                    TorusStencil::FivePoint => {
                        let sx = 2.0 * (0.5 * kx * hx).sin() / hx;
                        let sy = 2.0 * (0.5 * ky * hy).sin() / hy;
                        sx * sx + sy * sy
                    }
                });
            }
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            fwd_x: planner.plan_fft_forward(n_x),
            inv_x: planner.plan_fft_inverse(n_x),
            fwd_y: planner.plan_fft_forward(n_y),
            inv_y: planner.plan_fft_inverse(n_y),
        };
        Ok(TorusGrid {
            l_x,
            l_y,
            n_x,
            n_y,
            stencil,
            weights: vec![cell; n_x * n_y],
            symbol,
            plans: Arc::new(plans),
        })
    }

    pub fn l_x(&self) -> f64 {
        self.l_x
    }

    pub fn l_y(&self) -> f64 {
        self.l_y
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn stencil(&self) -> TorusStencil {
        self.stencil
    }

    pub fn node_count(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_area(&self) -> f64 {
        self.weights[0]
    }

    pub fn area(&self) -> f64 {
        self.l_x * self.l_y
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_y + j
    }

    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (i, j) = (idx / self.n_y, idx % self.n_y);
        (
            i as f64 * self.l_x / self.n_x as f64,
            j as f64 * self.l_y / self.n_y as f64,
        )
    }

    pub fn min_spacing(&self) -> f64 {
        (self.l_x / self.n_x as f64).min(self.l_y / self.n_y as f64)
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        (0..self.node_count())
            .map(|idx| {
                let (x, y) = self.coords(idx);
                f(x, y)
            })
            .collect::<Vec<_>>()
            .into()
    }

    /// Nonzero eigenvalues of the discrete `-Δ`, ascending, with multiplicity.
    pub fn laplacian_spectrum(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.symbol.iter().copied().filter(|&v| v > 0.0).collect();
        s.sort_by(f64::total_cmp);
        s
    }

    fn forward(&self, u: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = u.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.plans.fwd_y.process(&mut buf);
        let mut t = transpose(&buf, self.n_x, self.n_y);
        self.plans.fwd_x.process(&mut t);
        t
    }

    fn inverse(&self, spec: Vec<Complex<f64>>) -> Vec<f64> {
        let mut t = spec;
        self.plans.inv_x.process(&mut t);
        let mut buf = transpose(&t, self.n_y, self.n_x);
        self.plans.inv_y.process(&mut buf);
        let scale = 1.0 / (self.n_x * self.n_y) as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Multiply by `f(symbol)` in Fourier space. The spectrum is stored transposed
    /// (`j * n_x + i`) between the two passes.
    fn fourier_multiply(&self, u: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut spec = self.forward(u);
        for j in 0..self.n_y {
            for i in 0..self.n_x {
                spec[j * self.n_x + i] *= f(self.symbol[i * self.n_y + j]);
            }
        }
        self.inverse(spec)
    }

    pub(crate) fn apply_neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        self.fourier_multiply(u, |s| s)
    }

    /// Zero-mean solution of `-Δg = f - mean(f)`.
    pub(crate) fn solve(&self, f: &[f64]) -> Vec<f64> {
        self.fourier_multiply(f, |s| if s > 0.0 { 1.0 / s } else { 0.0 })
    }
}

fn transpose(a: &[Complex<f64>], rows: usize, cols: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}
