//! Structured grids, quadrature and the discrete Laplacian.
//!
//! Two geometries are supported: a polar grid on an annulus with homogeneous
//! Dirichlet data, and a uniform periodic grid on a flat torus. All operators
//! are written against the weighted inner product `⟨f, g⟩_w = Σ w_i f_i g_i`
//! given by the quadrature weights, in which the discrete `-Δ` is symmetric and
//! positive (on Dirichlet fields, resp. zero-mean fields).

mod annulus;
mod field;
mod periodic;

pub use annulus::AnnulusGrid;
pub use field::Field;
pub use periodic::{TorusGrid, TorusStencil};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Either of the supported geometries.
#[derive(Clone, Debug)]
pub enum GridSpec {
    Annulus(AnnulusGrid),
    Torus(TorusGrid),
}

/// Which geometry a grid or problem lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Annulus,
    Torus,
}

impl From<AnnulusGrid> for GridSpec {
    fn from(g: AnnulusGrid) -> Self {
        GridSpec::Annulus(g)
    }
}

impl From<TorusGrid> for GridSpec {
    fn from(g: TorusGrid) -> Self {
        GridSpec::Torus(g)
    }
}

/// Build the polar annulus grid; see [`AnnulusGrid::new`].
pub fn build_annulus_grid(r_inner: f64, r_outer: f64, n_r: usize, n_theta: usize) -> Result<GridSpec> {
    AnnulusGrid::new(r_inner, r_outer, n_r, n_theta).map(GridSpec::Annulus)
}

impl GridSpec {
    pub fn kind(&self) -> DomainKind {
        match self {
            GridSpec::Annulus(_) => DomainKind::Annulus,
            GridSpec::Torus(_) => DomainKind::Torus,
        }
    }

    pub fn as_annulus(&self) -> Option<&AnnulusGrid> {
        match self {
            GridSpec::Annulus(g) => Some(g),
            GridSpec::Torus(_) => None,
        }
    }

    pub fn as_torus(&self) -> Option<&TorusGrid> {
        match self {
            GridSpec::Torus(g) => Some(g),
            GridSpec::Annulus(_) => None,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            GridSpec::Annulus(g) => g.node_count(),
            GridSpec::Torus(g) => g.node_count(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            GridSpec::Annulus(g) => g.weights(),
            GridSpec::Torus(g) => g.weights(),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            GridSpec::Annulus(g) => g.area(),
            GridSpec::Torus(g) => g.area(),
        }
    }

    /// Cartesian coordinates of a node (torus: position in the fundamental cell).
    pub fn position(&self, idx: usize) -> (f64, f64) {
        match self {
            GridSpec::Annulus(g) => g.cartesian(idx),
            GridSpec::Torus(g) => g.coords(idx),
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        match self {
            GridSpec::Annulus(g) => g.is_boundary(idx),
            GridSpec::Torus(_) => false,
        }
    }

    pub fn min_spacing(&self) -> f64 {
        match self {
            GridSpec::Annulus(g) => g.min_spacing(),
            GridSpec::Torus(g) => g.min_spacing(),
        }
    }

    pub fn check(&self, u: &[f64]) -> Result<()> {
        let expected = self.node_count();
        if u.len() != expected {
            return Err(Error::Mismatch { expected, found: u.len() });
        }
        Ok(())
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.node_count())
    }

    /// Weighted inner product `Σ w_i a_i b_i`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights()
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// Project onto the admissible subspace: Dirichlet fields (annulus) or
    /// zero-mean fields (torus).
    pub fn project(&self, f: &mut [f64]) {
        match self {
            GridSpec::Annulus(g) => g.clamp_boundary(f),
            GridSpec::Torus(g) => {
                let mean = f.iter().sum::<f64>() / g.node_count() as f64;
                f.iter_mut().for_each(|v| *v -= mean);
            }
        }
    }

    /// Zero the Dirichlet boundary (annulus); no-op on the torus.
    pub fn enforce_boundary(&self, u: &mut [f64]) {
        if let GridSpec::Annulus(g) = self {
            g.clamp_boundary(u);
        }
    }

    /// `-Δu`, second order on the annulus (boundary rows are zero and boundary
    /// values of `u` are treated as zero), spectral or five-point on the torus.
    pub fn laplacian_apply(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Ok(Field::from_vec(match self {
            GridSpec::Annulus(g) => g.apply_neg_laplacian(u),
            GridSpec::Torus(g) => g.apply_neg_laplacian(u),
        }))
    }

    /// Solve `-Δg = f`: zero Dirichlet data on the annulus (boundary entries of `f`
    /// are ignored), zero-mean solution on the torus (the mean of `f` is projected out).
    pub fn poisson_solve(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let g = match self {
            GridSpec::Annulus(g) => g.solver().solve(f),
            GridSpec::Torus(g) => g.solve(f),
        };
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal("Poisson solve produced non-finite values".into()));
        }
        Ok(Field::from_vec(g))
    }

    /// Quadrature sum `Σ w_i f_i`.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        Ok(self.weights().iter().zip(f.iter()).map(|(w, v)| w * v).sum())
    }

    /// Discrete `½∫|∇u|²`, consistent with [`GridSpec::laplacian_apply`]:
    /// equal to `½⟨-Δu, u⟩_w` up to rounding.
    pub fn dirichlet_energy(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        Ok(match self {
            GridSpec::Annulus(g) => g.edge_energy(u),
            GridSpec::Torus(g) => 0.5 * self.inner(&g.apply_neg_laplacian(u), u),
        })
    }
}

/// Seeded smooth admissible field built from six random low modes: Dirichlet
/// on the annulus, mean zero on the torus.
pub fn random_field(grid: &GridSpec, seed: u64, amplitude: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(1..4) as f64,
                rng.gen_range(0..4) as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut u = match grid {
        GridSpec::Annulus(g) => {
            let (a, b) = (g.r_inner(), g.r_outer());
            g.sample(|r, t| {
                let s = (r - a) / (b - a);
                modes
                    .iter()
                    .map(|&(c, k, m, p)| c * (std::f64::consts::PI * k * s).sin() * (m * t + p).cos())
                    .sum()
            })
        }
        GridSpec::Torus(g) => {
            let (lx, ly) = (g.l_x(), g.l_y());
            let tau = std::f64::consts::TAU;
            g.sample(|x, y| {
                modes
                    .iter()
                    .map(|&(c, k, m, p)| c * (tau * (k * x / lx + m * y / ly) + p).cos())
                    .sum()
            })
        }
    };
    u.scale(amplitude);
    grid.project(&mut u);
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn annulus(nr: usize, nt: usize) -> GridSpec {
        build_annulus_grid(1.0, 2.0, nr, nt).unwrap()
    }

    #[test]
    fn annulus_area_is_exact() {
        let g = annulus(64, 128);
        let one = Field::constant(g.node_count(), 1.0);
        let area = g.integrate(&one).unwrap();
        assert!((area - 3.0 * PI).abs() <= 1e-12 * 3.0 * PI, "{area}");
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn minimal_grid_accepted_and_bad_radii_rejected() {
        assert!(build_annulus_grid(1.0, 2.0, 8, 8).is_ok());
        assert!(matches!(build_annulus_grid(2.0, 1.0, 64, 128), Err(Error::Config(_))));
        assert!(matches!(build_annulus_grid(0.0, 1.0, 64, 128), Err(Error::Config(_))));
        assert!(matches!(build_annulus_grid(1.0, 2.0, 7, 128), Err(Error::Config(_))));
        assert!(matches!(build_annulus_grid(1.0, 2.0, 16, 9), Err(Error::Config(_))));
    }

    #[test]
    fn boundary_flags() {
        let g = AnnulusGrid::new(1.0, 2.0, 8, 8).unwrap();
        assert!(g.is_boundary(0) && g.is_boundary(7) && g.is_boundary(56));
        assert!(!g.is_boundary(8));
        assert_eq!(g.radii()[7], 2.0);
    }

    #[test]
    fn torus_area_is_exact() {
        let g = GridSpec::from(TorusGrid::new(1.0, 1.0, 32, 32).unwrap());
        let one = Field::constant(g.node_count(), 1.0);
        assert_eq!(g.integrate(&one).unwrap(), 1.0);
        let g = GridSpec::from(TorusGrid::new(2.0, 0.5, 16, 8).unwrap());
        let one = Field::constant(g.node_count(), 1.0);
        assert!((g.integrate(&one).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_in_zero_out() {
        for g in [annulus(16, 16), TorusGrid::new(1.0, 1.0, 16, 16).unwrap().into()] {
            let z = g.zeros();
            assert_eq!(g.laplacian_apply(&z).unwrap().max_abs(), 0.0);
            assert_eq!(g.poisson_solve(&z).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn torus_constant_rhs_projects_to_zero() {
        let g: GridSpec = TorusGrid::new(1.0, 1.0, 16, 16).unwrap().into();
        let f = Field::constant(g.node_count(), 3.5);
        assert!(g.poisson_solve(&f).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn mismatch_is_reported() {
        let g = annulus(16, 16);
        let bad = Field::zeros(10);
        assert!(matches!(g.laplacian_apply(&bad), Err(Error::Mismatch { expected: 256, found: 10 })));
        assert!(g.integrate(&bad).is_err());
    }

    #[test]
    fn torus_cosine_is_an_eigenfunction() {
        let g = TorusGrid::new(1.5, 1.0, 32, 32).unwrap();
        let k = 2.0 * PI / 1.5;
        let u = g.sample(|x, _| (k * x).cos());
        let lu = GridSpec::from(g.clone()).laplacian_apply(&u).unwrap();
        let err = lu.iter().zip(u.iter()).map(|(a, b)| (a - k * k * b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn five_point_symbol_on_the_lowest_mode() {
        let n = 32;
        let g = TorusGrid::with_stencil(1.0, 1.0, n, n, TorusStencil::FivePoint).unwrap();
        let h = 1.0 / n as f64;
        let expected = (2.0 * (PI * h).sin() / h).powi(2);
        assert!((g.laplacian_spectrum()[0] - expected).abs() < 1e-9);
    }
}
