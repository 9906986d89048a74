use std::f64::consts::PI;

use crate::error::{config, Result};
use crate::grid::{AnnulusGrid, Field, GridSpec, TorusGrid};

/// A truncated Liouville bubble.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BubbleParams {
    /// Center; Cartesian on the annulus, position in the fundamental cell on the torus.
    pub center: (f64, f64),
    /// Concentration `λ ≥ 1`.
    pub lambda: f64,
    /// Amplitude scale `t ∈ [0, 1]`.
    pub amplitude: f64,
}

impl BubbleParams {
    pub fn new(center: (f64, f64), lambda: f64, amplitude: f64) -> Self {
        BubbleParams { center, lambda, amplitude }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return config(format!("bubble concentration must be >= 1 (got {})", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.amplitude) {
            return config(format!("bubble amplitude must lie in [0, 1] (got {})", self.amplitude));
        }
        Ok(())
    }
}

/// `C¹` cutoff: one on `[0, ½]`, `cos²(π(s − ½))` on `[½, 1]`, zero beyond.
pub fn cutoff(s: f64) -> f64 {
    if s <= 0.5 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let c = (PI * (s - 0.5)).cos();
        c * c
    }
}

/// `t χ(d/R) · 2 log((1 + λ²R²)/(1 + λ²d²))`: the Liouville profile
/// `log(λ²/(1+λ²d²)²)` shifted to vanish at `d = R`, times the cutoff.
pub fn bubble_profile(d: f64, lambda: f64, radius: f64, amplitude: f64) -> f64 {
    let chi = cutoff(d / radius);
    if chi == 0.0 {
        return 0.0;
    }
    let l2 = lambda * lambda;
    amplitude * chi * 2.0 * ((1.0 + l2 * radius * radius) / (1.0 + l2 * d * d)).ln()
}

/// Support radius of a bubble centered at `p` on the annulus: the distance to the boundary.
pub fn annulus_support_radius(grid: &AnnulusGrid, center: (f64, f64)) -> f64 {
    let rho = center.0.hypot(center.1);
    (rho - grid.r_inner()).min(grid.r_outer() - rho)
}

/// Truncated bubble on the annulus, supported in the largest disk around the
/// center that fits in the domain; exact zeros on both circles.
pub fn make_bubble(grid: &AnnulusGrid, params: &BubbleParams) -> Result<Field> {
    params.validate()?;
    let radius = annulus_support_radius(grid, params.center);
    let cells = 3.0 * grid.min_spacing().max(grid.h_r());
    if radius < cells {
        return config(format!(
            "bubble center ({:.4}, {:.4}) is within {:.3e} of the boundary; support narrower than 3 cells",
            params.center.0, params.center.1, radius
        ));
    }
    let mut u = grid.sample(|r, t| {
        let d = (r * t.cos() - params.center.0).hypot(r * t.sin() - params.center.1);
        bubble_profile(d, params.lambda, radius, params.amplitude)
    });
    grid.clamp_boundary(&mut u);
    Ok(u)
}

/// Periodic distance on the torus.
pub fn torus_distance(grid: &TorusGrid, a: (f64, f64), b: (f64, f64)) -> f64 {
    let wrap = |d: f64, l: f64| {
        let d = d.rem_euclid(l);
        d.min(l - d)
    };
    wrap(a.0 - b.0, grid.l_x()).hypot(wrap(a.1 - b.1, grid.l_y()))
}

/// Default support radius of torus bubbles.
pub fn torus_support_radius(grid: &TorusGrid) -> f64 {
    0.45 * grid.l_x().min(grid.l_y())
}

/// Truncated bubble on the torus (periodic distance).
pub fn make_torus_bubble(grid: &TorusGrid, params: &BubbleParams) -> Result<Field> {
    params.validate()?;
    let radius = torus_support_radius(grid);
    Ok(grid.sample(|x, y| bubble_profile(torus_distance(grid, (x, y), params.center), params.lambda, radius, params.amplitude)))
}

/// Bubble on either geometry.
pub fn bubble_on(grid: &GridSpec, params: &BubbleParams) -> Result<Field> {
    match grid {
        GridSpec::Annulus(g) => make_bubble(g, params),
        GridSpec::Torus(g) => make_torus_bubble(g, params),
    }
}

/// Default bubble center for a loop angle `θ`: on the mid-circle of the annulus,
/// on the horizontal mid-line `(θ L_x/2π, L_y/2)` of the torus.
pub fn loop_center(grid: &GridSpec, theta: f64) -> (f64, f64) {
    match grid {
        GridSpec::Annulus(g) => {
            let m = 0.5 * (g.r_inner() + g.r_outer());
            (m * theta.cos(), m * theta.sin())
        }
        GridSpec::Torus(g) => (theta.rem_euclid(2.0 * PI) / (2.0 * PI) * g.l_x(), 0.5 * g.l_y()),
    }
}

/// The planar Liouville density `8λ²/(1 + λ²|x − p|²)²`, total mass `8π` on `ℝ²`.
pub fn liouville_density(lambda: f64, d: f64) -> f64 {
    let l2 = lambda * lambda;
    8.0 * l2 / (1.0 + l2 * d * d).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{center_of_mass, ProblemSpec};
    use crate::grid::build_annulus_grid;
    use std::sync::Arc;

    #[test]
    fn bubble_vanishes_on_boundary_and_peaks_at_center() {
        let g = AnnulusGrid::new(1.0, 2.0, 33, 64).unwrap();
        let u = make_bubble(&g, &BubbleParams::new((1.5, 0.0), 10.0, 1.0)).unwrap();
        for j in 0..64 {
            assert_eq!(u[g.index(0, j)], 0.0);
            assert_eq!(u[g.index(32, j)], 0.0);
        }
        let peak = u[g.index(16, 0)];
        assert!((peak - 2.0 * (1.0 + 25.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = AnnulusGrid::new(1.0, 2.0, 64, 128).unwrap();
        assert!(make_bubble(&g, &BubbleParams::new((1.01, 0.0), 10.0, 1.0)).is_err());
        assert!(make_bubble(&g, &BubbleParams::new((1.5, 0.0), 0.5, 1.0)).is_err());
        assert!(make_bubble(&g, &BubbleParams::new((1.5, 0.0), 5.0, 1.5)).is_err());
    }

    #[test]
    fn planar_mass_on_grid() {
        let g = AnnulusGrid::new(1.0, 2.0, 256, 512).unwrap();
        let dens = g.sample(|r, t| liouville_density(30.0, (r * t.cos() - 1.5).hypot(r * t.sin())));
        let gs: GridSpec = g.into();
        let mass = gs.integrate(&dens).unwrap();
        assert!((mass / (8.0 * PI) - 1.0).abs() < 0.01, "{}", mass / (8.0 * PI));
    }

    #[test]
    fn center_of_mass_tracks_sharp_bubble_and_rotates() {
        let g = build_annulus_grid(1.0, 2.0, 64, 128).unwrap();
        let a = g.as_annulus().unwrap();
        let u = make_bubble(a, &BubbleParams::new((1.5, 0.0), 50.0, 1.0)).unwrap();
        let (x, y) = center_of_mass(&g, &u).unwrap();
        assert!((x - 1.5).hypot(y) < 0.05, "{x} {y}");
        // Rotating by a grid angle permutes nodes exactly.
        let shift = 5;
        let dt = shift as f64 * a.h_theta();
        let mut rot = u.clone();
        for i in 0..a.n_r() {
            for j in 0..a.n_theta() {
                rot[a.index(i, (j + shift) % a.n_theta())] = u[a.index(i, j)];
            }
        }
        let (xr, yr) = center_of_mass(&g, &rot).unwrap();
        let (ex, ey) = (x * dt.cos() - y * dt.sin(), x * dt.sin() + y * dt.cos());
        assert!((xr - ex).abs() < 1e-10 && (yr - ey).abs() < 1e-10);
    }

    #[test]
    fn supercritical_energy_drops_with_concentration() {
        let g = Arc::new(build_annulus_grid(1.0, 2.0, 64, 128).unwrap());
        let p = ProblemSpec::annulus(g.clone(), 12.0 * PI).unwrap();
        let e = |l: f64| p.energy(&bubble_on(&g, &BubbleParams::new((1.5, 0.0), l, 1.0)).unwrap()).unwrap().total;
        assert!(e(100.0) < e(30.0) && e(30.0) < e(10.0));
    }
}
