//! The mean field energy, its first and second variations, and the
//! exponential integrals they share.
//!
//! Annulus (Dirichlet):
//! `J_ρ(u) = ½∫|∇u|² − ρ log∫K e^u`, Euler–Lagrange equation `−Δu = ρ K e^u / ∫K e^u`.
//!
//! Torus (periodic, area `|Σ|`):
//! `J_c(u) = ½∫|∇u|² + (c/|Σ|)∫u − c log∫K e^u`, Euler–Lagrange equation
//! `−Δu + c/|Σ| − c K e^u / ∫K e^u = 0`. The functional and the equation are
//! invariant under `u → u + const`; on a unit-area torus with `∫K e^u = 1` the
//! equation is `Δu − c + c K e^u = 0`.
//!
//! Every exponential integral is evaluated with the maximum of `u` shifted out.

use std::sync::Arc;

use crate::error::{config, Error, Result};
use crate::grid::{DomainKind, Field, GridSpec};

/// A mean field problem: geometry, coupling (`ρ` on the annulus, `c` on the
/// torus) and a positive weight `K` (constant one unless set).
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    grid: Arc<GridSpec>,
    coupling: f64,
    weight: Option<Field>,
}

/// The terms of the energy, exactly as summed into `total`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub log_mass: f64,
    /// `(c/|Σ|)∫u` on the torus, zero on the annulus.
    pub linear: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn key_values(&self) -> [(&'static str, f64); 4] {
        [
            ("dirichlet", self.dirichlet),
            ("log_mass", self.log_mass),
            ("linear", self.linear),
            ("total", self.total),
        ]
    }
}

impl ProblemSpec {
    /// `−Δu = ρ e^u/∫e^u` on an annulus grid. Here `ρ = −β` for the inverse
    /// temperature `β` of the stream-function formulation (`u = −βψ`).
    pub fn annulus(grid: Arc<GridSpec>, rho: f64) -> Result<Self> {
        if grid.kind() != DomainKind::Annulus {
            return config("annulus problem needs an annulus grid");
        }
        Self::new(grid, rho)
    }

    /// `Δu − c + cKe^u = 0` on a torus grid.
    pub fn torus(grid: Arc<GridSpec>, c: f64) -> Result<Self> {
        if grid.kind() != DomainKind::Torus {
            return config("torus problem needs a torus grid");
        }
        Self::new(grid, c)
    }

    fn new(grid: Arc<GridSpec>, coupling: f64) -> Result<Self> {
        if !coupling.is_finite() || coupling < 0.0 {
            return config(format!("coupling must be finite and non-negative (got {coupling})"));
        }
        Ok(ProblemSpec { grid, coupling, weight: None })
    }

    /// Replace the weight `K`; it must be strictly positive everywhere.
    pub fn with_weight(mut self, k: Field) -> Result<Self> {
        self.grid.check(&k)?;
        if k.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return config("weight K must be finite and strictly positive");
        }
        self.weight = Some(k);
        Ok(self)
    }

    /// Same geometry and weight, different coupling.
    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        let mut p = Self::new(self.grid.clone(), coupling)?;
        p.weight = self.weight.clone();
        Ok(p)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn kind(&self) -> DomainKind {
        self.grid.kind()
    }

    /// `ρ` (annulus) or `c` (torus).
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn weight(&self) -> Option<&Field> {
        self.weight.as_ref()
    }

    fn k_at(&self, i: usize) -> f64 {
        self.weight.as_ref().map_or(1.0, |k| k[i])
    }

    /// Shifted exponentials of `u`: `log∫K e^u` and the probability density
    /// `K e^u / ∫K e^u` (unit mass in the weighted quadrature).
    pub fn mass(&self, u: &Field) -> Result<Mass> {
        self.grid.check(u)?;
        if !u.is_finite() {
            return Err(Error::Numeric("field has non-finite values".into()));
        }
        let shift = u.max();
        let mut density: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, &v)| self.k_at(i) * (v - shift).exp())
            .collect();
        let sum: f64 = self.grid.inner(&density, &vec![1.0; density.len()]);
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::Numeric(format!("exponential integral is {sum}")));
        }
        density.iter_mut().for_each(|d| *d /= sum);
        Ok(Mass { log_mass: shift + sum.ln(), density })
    }

    pub fn energy(&self, u: &Field) -> Result<EnergyBreakdown> {
        let mass = self.mass(u)?;
        let dirichlet = self.grid.dirichlet_energy(u)?;
        let c = self.coupling;
        let linear = match self.kind() {
            DomainKind::Annulus => 0.0,
            DomainKind::Torus => c / self.grid.area() * self.grid.integrate(u)?,
        };
        let total = dirichlet + linear - c * mass.log_mass;
        if !total.is_finite() {
            return Err(Error::Numeric("energy is not finite".into()));
        }
        Ok(EnergyBreakdown { dirichlet, log_mass: mass.log_mass, linear, total })
    }

    /// Euler–Lagrange residual, the `L²_w` representative of `dJ(u)`:
    /// `⟨residual(u), φ⟩_w = dJ(u)[φ]` for every admissible `φ`.
    pub fn residual(&self, u: &Field) -> Result<Field> {
        let mass = self.mass(u)?;
        self.residual_with(u, &mass)
    }

    pub(crate) fn residual_with(&self, u: &Field, mass: &Mass) -> Result<Field> {
        let mut r = self.grid.laplacian_apply(u)?;
        let c = self.coupling;
        let offset = match self.kind() {
            DomainKind::Annulus => 0.0,
            DomainKind::Torus => c / self.grid.area(),
        };
        for (ri, p) in r.iter_mut().zip(&mass.density) {
            *ri += offset - c * p;
        }
        if self.kind() == DomainKind::Annulus {
            self.grid.project(&mut r);
        }
        Ok(r)
    }

    /// Gradient of `J` in the Dirichlet-energy inner product: `g = (−Δ)⁻¹ residual`.
    pub fn sobolev_gradient(&self, u: &Field) -> Result<Field> {
        let r = self.residual(u)?;
        self.grid.poisson_solve(&r)
    }

    /// Residual, Sobolev gradient and the dual norm `sqrt⟨residual, g⟩_w`.
    pub fn gradient(&self, u: &Field) -> Result<Gradient> {
        let mass = self.mass(u)?;
        let residual = self.residual_with(u, &mass)?;
        let sobolev = self.grid.poisson_solve(&residual)?;
        let dual_norm = self.grid.inner(&residual, &sobolev).max(0.0).sqrt();
        Ok(Gradient { residual, sobolev, dual_norm })
    }

    /// Second variation `H(u)φ`:
    /// `−Δφ − ρ[K e^u φ/∫K e^u − K e^u ∫K e^u φ/(∫K e^u)²]`.
    pub fn second_variation_apply(&self, u: &Field, phi: &Field) -> Result<Field> {
        let mass = self.mass(u)?;
        self.hessian_with(&mass, phi)
    }

    pub(crate) fn hessian_with(&self, mass: &Mass, phi: &Field) -> Result<Field> {
        let mut out = self.grid.laplacian_apply(phi)?;
        let c = self.coupling;
        let mean = self.grid.inner(&mass.density, phi);
        for ((o, p), f) in out.iter_mut().zip(&mass.density).zip(phi.iter()) {
            *o -= c * p * (f - mean);
        }
        if self.kind() == DomainKind::Annulus {
            self.grid.project(&mut out);
        }
        Ok(out)
    }
}

/// Output of [`ProblemSpec::mass`].
#[derive(Clone, Debug)]
pub struct Mass {
    pub log_mass: f64,
    pub density: Vec<f64>,
}

/// Output of [`ProblemSpec::gradient`].
#[derive(Clone, Debug)]
pub struct Gradient {
    pub residual: Field,
    pub sobolev: Field,
    pub dual_norm: f64,
}

/// `log Σ w_i e^{u_i}`, evaluated as `M + log Σ w_i e^{u_i − M}` with `M = max u`.
pub fn log_integral_exp(grid: &GridSpec, u: &Field) -> Result<f64> {
    grid.check(u)?;
    if !u.is_finite() {
        return Err(Error::Numeric("field has non-finite values".into()));
    }
    let m = u.max();
    let s: f64 = grid.weights().iter().zip(u.iter()).map(|(w, v)| w * (v - m).exp()).sum();
    Ok(m + s.ln())
}

/// Center of mass `∫x e^u / ∫e^u` on the annulus.
pub fn center_of_mass(grid: &GridSpec, u: &Field) -> Result<(f64, f64)> {
    if grid.kind() != DomainKind::Annulus {
        return config("center of mass is defined on the annulus only; use the torus phase center");
    }
    grid.check(u)?;
    if !u.is_finite() {
        return Err(Error::Numeric("field has non-finite values".into()));
    }
    let m = u.max();
    let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
    for (idx, (w, v)) in grid.weights().iter().zip(u.iter()).enumerate() {
        let e = w * (v - m).exp();
        let (x, y) = grid.position(idx);
        sx += e * x;
        sy += e * y;
        s += e;
    }
    Ok((sx / s, sy / s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_annulus_grid, TorusGrid};
    use crate::grid::random_field;
    use std::f64::consts::PI;

    fn annulus_problem(nr: usize, nt: usize, rho: f64) -> ProblemSpec {
        ProblemSpec::annulus(Arc::new(build_annulus_grid(1.0, 2.0, nr, nt).unwrap()), rho).unwrap()
    }

    fn torus_problem(n: usize, c: f64) -> ProblemSpec {
        ProblemSpec::torus(Arc::new(TorusGrid::new(1.0, 1.0, n, n).unwrap().into()), c).unwrap()
    }

    #[test]
    fn zero_field_energies() {
        let p = annulus_problem(32, 64, 12.0 * PI);
        let e = p.energy(&p.grid().zeros()).unwrap();
        let expected = -12.0 * PI * (3.0 * PI).ln();
        assert!((e.total - expected).abs() < 1e-11, "{}", e.total);
        assert!((e.total + 84.572).abs() < 1e-3);

        let t = torus_problem(16, 30.0);
        let e = t.energy(&t.grid().zeros()).unwrap();
        assert!(e.total.abs() < 1e-14);
        assert_eq!(e.total, e.dirichlet + e.linear - 30.0 * e.log_mass);
    }

    #[test]
    fn log_integral_exp_is_shift_exact() {
        let g = build_annulus_grid(1.0, 2.0, 32, 64).unwrap();
        let z = g.zeros();
        assert!((log_integral_exp(&g, &z).unwrap() - (3.0 * PI).ln()).abs() < 1e-12);
        let big = Field::constant(g.node_count(), 1000.0);
        let v = log_integral_exp(&g, &big).unwrap();
        assert!((v - 1000.0 - (3.0 * PI).ln()).abs() < 1e-10);
        let u = random_field(&g, 7, 20.0);
        let naive = g.integrate(&u.map(f64::exp)).unwrap().ln();
        let stable = log_integral_exp(&g, &u).unwrap();
        assert!((naive - stable).abs() <= 1e-13 * naive.abs());
        let nan = Field::constant(g.node_count(), f64::NAN);
        assert!(matches!(log_integral_exp(&g, &nan), Err(Error::Numeric(_))));
    }

    #[test]
    fn torus_constant_is_a_solution_for_every_c() {
        for c in [5.0, 30.0, 45.0] {
            let p = torus_problem(16, c);
            let r = p.residual(&p.grid().zeros()).unwrap();
            assert!(r.max_abs() <= 1e-12, "{c}: {}", r.max_abs());
        }
    }

    #[test]
    fn torus_gauge_invariance() {
        let p = torus_problem(32, 30.0);
        let u = random_field(p.grid(), 3, 1.0);
        let shifted = u.map(|v| v + 5.0);
        let (a, b) = (p.energy(&u).unwrap(), p.energy(&shifted).unwrap());
        assert!((a.total - b.total).abs() < 1e-9);
        let d = p.residual(&u).unwrap().sub(&p.residual(&shifted).unwrap()).max_abs();
        assert!(d < 1e-9, "{d}");
        let phi = random_field(p.grid(), 4, 1.0);
        let d = p
            .second_variation_apply(&u, &phi)
            .unwrap()
            .sub(&p.second_variation_apply(&shifted, &phi).unwrap())
            .max_abs();
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn hessian_reduces_to_laplacian_without_coupling() {
        let p = annulus_problem(16, 32, 0.0);
        let u = random_field(p.grid(), 1, 2.0);
        let phi = random_field(p.grid(), 2, 1.0);
        let h = p.second_variation_apply(&u, &phi).unwrap();
        let l = p.grid().laplacian_apply(&phi).unwrap();
        assert!(h.sub(&l).max_abs() < 1e-12);
    }

    #[test]
    fn scaling_identity_between_couplings() {
        let p = annulus_problem(32, 64, 10.0 * PI);
        let q = p.with_coupling(14.0 * PI).unwrap();
        for seed in 0..5 {
            let u = random_field(p.grid(), seed, 3.0);
            let (ep, eq) = (p.energy(&u).unwrap(), q.energy(&u).unwrap());
            let lhs = ep.total / p.coupling() - eq.total / q.coupling();
            let rhs = 0.5 * (1.0 / p.coupling() - 1.0 / q.coupling()) * 2.0 * ep.dirichlet;
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300), "{lhs} {rhs}");
        }
    }

    #[test]
    fn energy_decreases_in_coupling_when_log_mass_positive() {
        let p = annulus_problem(32, 64, 9.0 * PI);
        for seed in 0..10 {
            let u = random_field(p.grid(), seed, 2.0);
            let e = p.energy(&u).unwrap();
            if e.log_mass > 0.0 {
                for rho2 in [9.5 * PI, 12.0 * PI, 15.9 * PI] {
                    let q = p.with_coupling(rho2).unwrap();
                    assert!(q.energy(&u).unwrap().total <= e.total);
                }
            }
        }
    }

    #[test]
    fn center_of_mass_of_uniform_density_is_origin() {
        let g = build_annulus_grid(1.0, 2.0, 32, 64).unwrap();
        let (x, y) = center_of_mass(&g, &g.zeros()).unwrap();
        assert!(x.abs() < 1e-12 && y.abs() < 1e-12);
        let t: GridSpec = TorusGrid::new(1.0, 1.0, 8, 8).unwrap().into();
        assert!(matches!(center_of_mass(&t, &t.zeros()), Err(Error::Config(_))));
    }

    #[test]
    fn weight_must_be_positive() {
        let p = torus_problem(8, 30.0);
        let mut k = Field::constant(64, 1.0);
        k[3] = 0.0;
        assert!(p.clone().with_weight(k).is_err());
        assert!(p.with_weight(Field::constant(64, 2.0)).is_ok());
    }

    #[test]
    fn non_finite_fields_are_rejected() {
        let p = annulus_problem(16, 16, 12.0 * PI);
        let mut u = p.grid().zeros();
        u[40] = f64::INFINITY;
        assert!(matches!(p.energy(&u), Err(Error::Numeric(_))));
        assert!(matches!(p.residual(&u), Err(Error::Numeric(_))));
    }

    fn fd_checks(p: &ProblemSpec) {
        let u = random_field(p.grid(), 21, 2.0);
        let phi = random_field(p.grid(), 22, 1.0);
        let eps = 1e-5;
        let jp = p.energy(&u.add_scaled(eps, &phi)).unwrap().total;
        let jm = p.energy(&u.add_scaled(-eps, &phi)).unwrap().total;
        let fd = (jp - jm) / (2.0 * eps);
        let exact = p.grid().inner(&p.residual(&u).unwrap(), &phi);
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "grad {fd} {exact}");

        let rp = p.residual(&u.add_scaled(eps, &phi)).unwrap();
        let rm = p.residual(&u.add_scaled(-eps, &phi)).unwrap();
        let fd = rp.sub(&rm).scaled(0.5 / eps);
        let h = p.second_variation_apply(&u, &phi).unwrap();
        let err = p.grid().norm(&fd.sub(&h)) / p.grid().norm(&h);
        assert!(err <= 1e-5, "hessian {err}");

        let psi = random_field(p.grid(), 23, 1.0);
        let a = p.grid().inner(&h, &psi);
        let b = p.grid().inner(&p.second_variation_apply(&u, &psi).unwrap(), &phi);
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "symmetry {a} {b}");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        fd_checks(&annulus_problem(24, 48, 12.0 * PI));
        fd_checks(&torus_problem(24, 30.0));
    }
}
