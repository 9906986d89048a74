//! The mean field equation `Δu − c + cKe^u = 0` on a flat torus.
//!
//! Solutions are computed for the gauge-invariant form and returned normalized
//! so that `∫K e^u = 1`. The winding of the bubble center around a
//! non-contractible circle is measured through the first circular moment of
//! the density along one axis.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{config, Error, Result};
use crate::functional::ProblemSpec;
use crate::grid::{DomainKind, Field, GridSpec, TorusGrid};
use crate::minimax::{
    build_family, minimize, run_minimax, CriticalPoint, FamilyConfig, LoopMeasure, MinimaxResult, PathFamily,
    PipelineConfig, Provenance,
};

/// Torus axis used for the winding condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseAxis {
    X,
    Y,
}

/// A torus problem: grid, coupling `c` and weight `K`.
#[derive(Clone, Debug)]
pub struct TorusProblem {
    spec: ProblemSpec,
}

impl TorusProblem {
    pub fn new(grid: TorusGrid, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return config(format!("c must be positive (got {c})"));
        }
        Ok(TorusProblem { spec: ProblemSpec::torus(Arc::new(grid.into()), c)? })
    }

    pub fn with_weight(self, k: Field) -> Result<Self> {
        Ok(TorusProblem { spec: self.spec.with_weight(k)? })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &TorusGrid {
        self.spec.grid().as_torus().expect("torus problem holds a torus grid")
    }

    pub fn c(&self) -> f64 {
        self.spec.coupling()
    }
}

/// `u − log∫K e^u`, which satisfies `∫K e^{u'} = 1`.
pub fn normalize(p: &TorusProblem, u: &Field) -> Result<Field> {
    let lm = p.spec.mass(u)?.log_mass;
    Ok(u.map(|v| v - lm))
}

/// First circular moments of the density `Ke^u/∫Ke^u` along both axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseCenter {
    pub m_x: f64,
    pub m_y: f64,
    /// In `[0, 2π)`; `None` when the magnitude is below [`EPS_PHASE`].
    pub phi_x: Option<f64>,
    pub phi_y: Option<f64>,
}

/// Magnitude below which a phase angle is undefined.
pub const EPS_PHASE: f64 = 1e-9;

impl PhaseCenter {
    /// `(magnitude, angle)` along one axis; angle zero when undefined.
    pub fn axis(&self, axis: PhaseAxis) -> (f64, f64) {
        match axis {
            PhaseAxis::X => (self.m_x, self.phi_x.unwrap_or(0.0)),
            PhaseAxis::Y => (self.m_y, self.phi_y.unwrap_or(0.0)),
        }
    }
}

pub fn phase_center(p: &TorusProblem, u: &Field) -> Result<PhaseCenter> {
    phase_center_of(&p.spec, u)
}

pub(crate) fn phase_center_of(p: &ProblemSpec, u: &Field) -> Result<PhaseCenter> {
    let g = match p.grid() {
        GridSpec::Torus(g) => g,
        GridSpec::Annulus(_) => return config("phase center is defined on the torus only"),
    };
    let mass = p.mass(u)?;
    let (mut cx, mut sx, mut cy, mut sy) = (0.0, 0.0, 0.0, 0.0);
    let w = g.cell_area();
    for (idx, d) in mass.density.iter().enumerate() {
        let (x, y) = g.coords(idx);
        let (ax, ay) = (2.0 * PI * x / g.l_x(), 2.0 * PI * y / g.l_y());
        cx += w * d * ax.cos();
        sx += w * d * ax.sin();
        cy += w * d * ay.cos();
        sy += w * d * ay.sin();
    }
    let m_x = cx.hypot(sx).min(1.0);
    let m_y = cy.hypot(sy).min(1.0);
    let angle = |m: f64, s: f64, c: f64| (m >= EPS_PHASE).then(|| s.atan2(c).rem_euclid(2.0 * PI));
    Ok(PhaseCenter { m_x, m_y, phi_x: angle(m_x, sx, cx), phi_y: angle(m_y, sy, cy) })
}

/// Family whose boundary bubbles traverse the x-direction circle.
pub fn build_torus_family(p: &TorusProblem, n_radial: usize, n_angular: usize) -> Result<PathFamily> {
    build_torus_family_along(p, n_radial, n_angular, PhaseAxis::X)
}

/// Family whose boundary bubbles traverse the circle along `axis`.
pub fn build_torus_family_along(p: &TorusProblem, n_radial: usize, n_angular: usize, axis: PhaseAxis) -> Result<PathFamily> {
    let cfg = FamilyConfig { n_radial, n_angular, measure: LoopMeasure::Phase(axis), ..FamilyConfig::default() };
    build_family(&p.spec, &cfg)
}

/// Options for [`solve_torus`].
#[derive(Clone, Debug)]
pub struct TorusConfig {
    pub pipeline: PipelineConfig,
    /// Descent iterations before Newton in the subcritical case.
    pub max_descent: usize,
    /// Amplitude of the seeded perturbation that starts the subcritical minimization.
    pub perturbation: f64,
}

impl Default for TorusConfig {
    fn default() -> Self {
        let mut pipeline = PipelineConfig::default();
        pipeline.family.measure = LoopMeasure::Phase(PhaseAxis::X);
        TorusConfig { pipeline, max_descent: 2000, perturbation: 0.5 }
    }
}

/// A normalized torus solution.
#[derive(Debug)]
pub struct TorusSolution {
    pub critical: CriticalPoint,
    /// `max u − min u`.
    pub oscillation: f64,
    pub phase: PhaseCenter,
    /// `∫K e^u` of the returned field.
    pub mass: f64,
    /// Deformation result (supercritical runs only).
    pub minimax: Option<MinimaxResult>,
}

/// For `c ∈ (8π, 16π)` run the minimax pipeline; for `c ≤ 8π` minimize from a
/// small seeded perturbation of zero. The result is normalized and annotated
/// with its Morse index.
pub fn solve_torus(p: &TorusProblem, cfg: &TorusConfig) -> Result<TorusSolution> {
    let c = p.c();
    let spec = &p.spec;
    if c >= 16.0 * PI {
        return config(format!("c must be below 16π (got {c})"));
    }
    let (mut cp, minimax) = if c > 8.0 * PI {
        let out = run_minimax(spec, &cfg.pipeline)?;
        (out.critical?, Some(out.minimax))
    } else {
        let g = p.grid();
        let (lx, ly) = (g.l_x(), g.l_y());
        let seed = cfg.pipeline.seed as f64;
        let u0 = g.sample(|x, y| {
            cfg.perturbation * ((2.0 * PI * x / lx + seed).cos() + 0.5 * (2.0 * PI * y / ly).sin())
        });
        let mut cp = minimize(spec, &u0, &cfg.pipeline.newton, cfg.max_descent)?;
        cp.provenance = Provenance { source: "minimize".into(), continuation_step: None, seed: cfg.pipeline.seed };
        cp.annotate(spec, cfg.pipeline.eigen_count, cfg.pipeline.seed)?;
        (cp, None)
    };
    cp.field = normalize(p, &cp.field)?;
    cp.energy = spec.energy(&cp.field)?;
    let mass = spec.mass(&cp.field)?.log_mass.exp();
    let phase = phase_center(p, &cp.field)?;
    if spec.kind() != DomainKind::Torus {
        return Err(Error::Internal("torus problem without torus grid".into()));
    }
    Ok(TorusSolution { oscillation: cp.field.oscillation(), phase, mass, critical: cp, minimax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimax::{make_torus_bubble, BubbleParams};

    fn unit(n: usize, c: f64) -> TorusProblem {
        TorusProblem::new(TorusGrid::new(1.0, 1.0, n, n).unwrap(), c).unwrap()
    }

    #[test]
    fn normalization() {
        let p = unit(16, 30.0);
        let z = p.spec().grid().zeros();
        assert!(normalize(&p, &z).unwrap().max_abs() < 1e-15);
        let q = TorusProblem::new(TorusGrid::new(2.0, 1.5, 16, 16).unwrap(), 30.0).unwrap();
        let seven = Field::constant(256, 7.0);
        let n = normalize(&q, &seven).unwrap();
        assert!((n[0] + 3f64.ln()).abs() < 1e-12);
        let u = crate::grid::random_field(p.spec().grid(), 4, 2.0).map(|v| v + 3.0);
        let once = normalize(&p, &u).unwrap();
        let twice = normalize(&p, &once).unwrap();
        assert!(once.sub(&twice).max_abs() <= 1e-14);
        assert!((p.spec().mass(&once).unwrap().log_mass).abs() < 1e-12);
    }

    #[test]
    fn phase_center_properties() {
        let p = unit(64, 30.0);
        let pc = phase_center(&p, &p.spec().grid().zeros()).unwrap();
        assert!(pc.m_x < 1e-12 && pc.phi_x.is_none() && pc.phi_y.is_none());
        let (x0, y0) = (0.3, 0.7);
        let u = make_torus_bubble(p.grid(), &BubbleParams::new((x0, y0), 60.0, 1.0)).unwrap();
        let pc = phase_center(&p, &u).unwrap();
        let dx = (pc.phi_x.unwrap() - 2.0 * PI * x0).abs();
        let dy = (pc.phi_y.unwrap() - 2.0 * PI * y0).abs();
        assert!(dx < 0.05 && dy < 0.05, "{dx} {dy}");
        // Shift by one cell in x.
        let n = 64;
        let mut shifted = u.clone();
        for i in 0..n {
            for j in 0..n {
                shifted[((i + 1) % n) * n + j] = u[i * n + j];
            }
        }
        let ps = phase_center(&p, &shifted).unwrap();
        let d = (ps.phi_x.unwrap() - pc.phi_x.unwrap()).rem_euclid(2.0 * PI);
        assert!((d - 2.0 * PI / n as f64).abs() < 1e-12);
        // Gauge invariance of phases and oscillation.
        let g = phase_center(&p, &u.map(|v| v + 4.0)).unwrap();
        assert!((g.phi_x.unwrap() - pc.phi_x.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn torus_family_winds_once() {
        let p = unit(32, 30.0);
        let fam = build_torus_family(&p, 6, 12).unwrap();
        assert_eq!(fam.boundary_winding(p.spec()).unwrap(), 1);
        let fy = build_torus_family_along(&p, 6, 12, PhaseAxis::Y).unwrap();
        assert_eq!(fy.boundary_winding(p.spec()).unwrap(), 1);
        assert!(fam.energies[0].abs() < 1e-14);
        assert!(fam.boundary_max_energy() < 0.0);
    }

    #[test]
    fn subcritical_torus_minimization() {
        let p = unit(32, 20.0);
        let sol = solve_torus(&p, &TorusConfig::default()).unwrap();
        assert_eq!(sol.critical.morse_index(), Some(0));
        assert!((sol.mass - 1.0).abs() < 1e-10);
    }
}
