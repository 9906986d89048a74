use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{config, Error, Result};
use crate::functional::{center_of_mass, ProblemSpec};
use crate::grid::{DomainKind, Field, GridSpec};
use crate::torus::{phase_center_of, PhaseAxis};

use super::bubble::{bubble_on, loop_center, BubbleParams};

/// How a boundary sample is mapped to a point of the plane for the winding test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopMeasure {
    /// Center of mass `∫x e^u/∫e^u` (annulus), wound around the origin.
    CenterOfMass,
    /// First circular moment of the density along one torus axis, wound around zero.
    Phase(PhaseAxis),
}

/// Construction options for a disk-parameterized family.
#[derive(Clone, Debug)]
pub struct FamilyConfig {
    pub n_radial: usize,
    pub n_angular: usize,
    /// Concentration at which the amplitude ramp ends and the concentration ramp starts.
    pub lambda0: f64,
    /// Largest concentration considered for the boundary ring.
    pub lambda_max: f64,
    /// Boundary energies must lie below this; defaults to the energy of the zero field.
    pub j_low: Option<f64>,
    /// Largest allowed energy jump between neighboring samples.
    pub delta_cont: f64,
    /// Fraction of the radial parameter spent ramping the amplitude.
    pub ramp_fraction: f64,
    /// Disk parameter of the outermost ring (the `r → 1` limit).
    pub r_max: f64,
    /// Concentrations scanned when choosing the boundary concentration.
    pub n_scan: usize,
    pub measure: LoopMeasure,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            n_radial: 12,
            n_angular: 16,
            lambda0: 3.0,
            lambda_max: 1e3,
            j_low: None,
            delta_cont: 40.0,
            ramp_fraction: 0.3,
            r_max: 0.95,
            n_scan: 40,
            measure: LoopMeasure::CenterOfMass,
        }
    }
}

/// Discrete map from the unit disk into field space.
///
/// Sample 0 is the disk center; ring `i ∈ 1..=n_radial`, angle `j` is sample
/// `1 + (i − 1) n_angular + j` at disk point `(r_max i/n_radial, 2πj/n_angular)`.
/// The center and the outermost ring are frozen.
#[derive(Clone, Debug)]
pub struct PathFamily {
    pub n_radial: usize,
    pub n_angular: usize,
    /// Disk coordinates `(r, θ)` of every sample.
    pub params: Vec<(f64, f64)>,
    pub fields: Vec<Field>,
    pub energies: Vec<f64>,
    pub frozen: Vec<bool>,
    pub lambda0: f64,
    pub lambda_end: f64,
    pub j_low: f64,
    pub delta_cont: f64,
    pub measure: LoopMeasure,
}

impl PathFamily {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn index(&self, ring: usize, j: usize) -> usize {
        debug_assert!(ring >= 1 && ring <= self.n_radial && j < self.n_angular);
        1 + (ring - 1) * self.n_angular + j
    }

    pub fn boundary_indices(&self) -> std::ops::Range<usize> {
        let start = self.index(self.n_radial, 0);
        start..start + self.n_angular
    }

    /// Largest energy; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &e) in self.energies.iter().enumerate() {
            if e > self.energies[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_energy(&self) -> f64 {
        self.energies[self.argmax()]
    }

    /// Largest energy difference between neighboring samples (radial, angular,
    /// and center to first ring).
    pub fn max_neighbor_jump(&self) -> f64 {
        let mut jump = 0.0f64;
        for j in 0..self.n_angular {
            jump = jump.max((self.energies[0] - self.energies[self.index(1, j)]).abs());
        }
        for ring in 1..=self.n_radial {
            for j in 0..self.n_angular {
                let e = self.energies[self.index(ring, j)];
                let next = self.energies[self.index(ring, (j + 1) % self.n_angular)];
                jump = jump.max((e - next).abs());
                if ring < self.n_radial {
                    jump = jump.max((e - self.energies[self.index(ring + 1, j)]).abs());
                }
            }
        }
        jump
    }

    pub fn boundary_max_energy(&self) -> f64 {
        self.boundary_indices().map(|i| self.energies[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Points traced by the boundary ring under the loop measure.
    pub fn boundary_loop(&self, p: &ProblemSpec) -> Result<Vec<(f64, f64)>> {
        self.boundary_indices().map(|i| loop_point(p, self.measure, &self.fields[i])).collect()
    }

    /// Winding number of the boundary loop around the origin.
    pub fn boundary_winding(&self, p: &ProblemSpec) -> Result<i32> {
        winding_number(&self.boundary_loop(p)?, (0.0, 0.0))
    }
}

fn loop_point(p: &ProblemSpec, measure: LoopMeasure, u: &Field) -> Result<(f64, f64)> {
    match measure {
        LoopMeasure::CenterOfMass => center_of_mass(p.grid(), u),
        LoopMeasure::Phase(axis) => {
            let pc = phase_center_of(p, u)?;
            let (m, phi) = pc.axis(axis);
            Ok((m * phi.cos(), m * phi.sin()))
        }
    }
}

/// Winding number of a closed polygon around `center`. A repeated final point
/// is ignored; the closing segment is always included.
pub fn winding_number(points: &[(f64, f64)], center: (f64, f64)) -> Result<i32> {
    if points.len() < 3 {
        return config("a loop needs at least three points");
    }
    let scale = points
        .iter()
        .map(|p| (p.0 - center.0).hypot(p.1 - center.1))
        .fold(0.0, f64::max)
        .max(1e-300);
    let eps = 1e-9 * scale.max(1e-3);
    for (i, p) in points.iter().enumerate() {
        let d = (p.0 - center.0).hypot(p.1 - center.1);
        if d <= eps {
            return Err(Error::DegenerateLoop { index: i, distance: d });
        }
    }
    let mut pts = points;
    let (f, l) = (points[0], points[points.len() - 1]);
    if (f.0 - l.0).hypot(f.1 - l.1) <= 1e-12 * scale {
        pts = &points[..points.len() - 1];
    }
    let mut total = 0.0;
    for k in 0..pts.len() {
        let a = (pts[k].0 - center.0, pts[k].1 - center.1);
        let b = pts[(k + 1) % pts.len()];
        let b = (b.0 - center.0, b.1 - center.1);
        total += (a.0 * b.1 - a.1 * b.0).atan2(a.0 * b.0 + a.1 * b.1);
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

/// Amplitude and concentration of the bubble at disk radius fraction `s ∈ [0, 1]`.
fn ramp(s: f64, cfg: &FamilyConfig, lambda_end: f64) -> (f64, f64) {
    let f = cfg.ramp_fraction;
    if s <= f {
        (s / f, cfg.lambda0)
    } else {
        let x = (s - f) / (1.0 - f);
        (1.0, cfg.lambda0 * (lambda_end / cfg.lambda0).powf(x))
    }
}

/// Bubble center at loop angle `θ`: [`loop_center`], or on the torus the
/// circle along the measured axis.
fn ring_center(grid: &GridSpec, measure: LoopMeasure, theta: f64) -> (f64, f64) {
    match (grid, measure) {
        (GridSpec::Torus(g), LoopMeasure::Phase(PhaseAxis::Y)) => {
            (0.5 * g.l_x(), theta.rem_euclid(2.0 * PI) / (2.0 * PI) * g.l_y())
        }
        _ => loop_center(grid, theta),
    }
}

/// Annulus family for `ρ ∈ (8π, 16π)` with default options.
pub fn build_path_family(p: &ProblemSpec, n_radial: usize, n_angular: usize) -> Result<PathFamily> {
    if p.kind() != DomainKind::Annulus {
        return config("build_path_family needs an annulus problem; use build_torus_family on the torus");
    }
    let cfg = FamilyConfig { n_radial, n_angular, ..FamilyConfig::default() };
    build_family(p, &cfg)
}

/// Build a family of bubbles: along the ray at angle `θ` the bubble is centered
/// at [`loop_center`]`(θ)`; its amplitude ramps from zero, then its
/// concentration grows log-uniformly up to the boundary value `λ_end`, which
/// is the scanned concentration of lowest energy.
pub fn build_family(p: &ProblemSpec, cfg: &FamilyConfig) -> Result<PathFamily> {
    let c = p.coupling();
    if !(c > 8.0 * PI && c < 16.0 * PI) {
        return config(format!("family construction needs a coupling in (8π, 16π) (got {c})"));
    }
    if cfg.n_radial < 4 || cfg.n_angular < 8 {
        return config(format!(
            "family resolution must be at least 4 × 8 (got {} × {})",
            cfg.n_radial, cfg.n_angular
        ));
    }
    if !(cfg.lambda0 >= 1.0 && cfg.lambda_max > cfg.lambda0) {
        return config("family needs 1 <= lambda0 < lambda_max");
    }
    if !(cfg.ramp_fraction > 0.0 && cfg.ramp_fraction < 1.0 && cfg.r_max > 0.0 && cfg.r_max < 1.0) {
        return config("ramp_fraction and r_max must lie in (0, 1)");
    }
    let grid = p.grid();
    let zero = grid.zeros();
    let j0 = p.energy(&zero)?.total;
    let j_low = cfg.j_low.unwrap_or(j0);

    // Boundary concentration: lowest energy over a log-uniform scan.
    let c0 = ring_center(grid, cfg.measure, 0.0);
    let scan: Vec<f64> = (0..cfg.n_scan.max(2))
        .map(|k| cfg.lambda0 * (cfg.lambda_max / cfg.lambda0).powf(k as f64 / (cfg.n_scan.max(2) - 1) as f64))
        .collect();
    let scan_e: Vec<f64> = scan
        .par_iter()
        .map(|&l| Ok(p.energy(&bubble_on(grid, &BubbleParams::new(c0, l, 1.0))?)?.total))
        .collect::<Result<_>>()?;
    let (best, best_e) = scan_e
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &e)| if e < acc.1 { (k, e) } else { acc });
    if best_e >= j_low {
        return config(format!(
            "bubbles up to lambda_max = {} reach energy {best_e:.4} >= J_low = {j_low:.4}; increase lambda_max or refine the grid",
            cfg.lambda_max
        ));
    }
    let lambda_end = scan[best];

    let mut params = vec![(0.0, 0.0)];
    let mut specs = vec![None];
    for ring in 1..=cfg.n_radial {
        let s = ring as f64 / cfg.n_radial as f64;
        let (t, l) = ramp(s, cfg, lambda_end);
        for j in 0..cfg.n_angular {
            let theta = 2.0 * PI * j as f64 / cfg.n_angular as f64;
            params.push((s * cfg.r_max, theta));
            specs.push(Some(BubbleParams::new(ring_center(grid, cfg.measure, theta), l, t)));
        }
    }
    let built: Vec<(Field, f64)> = specs
        .par_iter()
        .map(|spec| {
            let u = match spec {
                None => zero.clone(),
                Some(b) => bubble_on(grid, b)?,
            };
            let e = p.energy(&u)?.total;
            Ok((u, e))
        })
        .collect::<Result<_>>()?;
    let (fields, energies): (Vec<Field>, Vec<f64>) = built.into_iter().unzip();
    let n = fields.len();
    let mut frozen = vec![false; n];
    frozen[0] = true;
    frozen[n - cfg.n_angular..].iter_mut().for_each(|f| *f = true);
    let family = PathFamily {
        n_radial: cfg.n_radial,
        n_angular: cfg.n_angular,
        params,
        fields,
        energies,
        frozen,
        lambda0: cfg.lambda0,
        lambda_end,
        j_low,
        delta_cont: cfg.delta_cont,
        measure: cfg.measure,
    };
    let bmax = family.boundary_max_energy();
    if bmax >= j_low {
        return config(format!("boundary ring energy {bmax:.4} is not below J_low = {j_low:.4}"));
    }
    let jump = family.max_neighbor_jump();
    if jump > cfg.delta_cont {
        return config(format!(
            "energy jump {jump:.3} between neighboring samples exceeds {}; use more rings",
            cfg.delta_cont
        ));
    }
    let w = family.boundary_winding(p)?;
    if w != 1 {
        return Err(Error::Internal(format!("boundary loop winds {w} times instead of once")));
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(n: usize, reverse: bool) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64 * if reverse { -1.0 } else { 1.0 };
                (t.cos(), t.sin())
            })
            .collect()
    }

    #[test]
    fn circle_winds_once() {
        assert_eq!(winding_number(&circle(16, false), (0.0, 0.0)).unwrap(), 1);
        assert_eq!(winding_number(&circle(16, true), (0.0, 0.0)).unwrap(), -1);
        assert_eq!(winding_number(&circle(16, false), (3.0, 0.0)).unwrap(), 0);
        let mut closed = circle(16, false);
        closed.push(closed[0]);
        assert_eq!(winding_number(&closed, (0.0, 0.0)).unwrap(), 1);
    }

    #[test]
    fn degenerate_loop_is_rejected() {
        let mut pts = circle(16, false);
        pts[3] = (0.0, 0.0);
        assert!(matches!(winding_number(&pts, (0.0, 0.0)), Err(Error::DegenerateLoop { index: 3, .. })));
    }

    #[test]
    fn figure_eight_matches_fine_angle_accumulation() {
        // Lemniscate shifted so that one lobe encloses the center.
        let curve = |t: f64| (2.0 * t.cos() / (1.0 + t.sin().powi(2)) + 1.0, 2.0 * t.sin() * t.cos() / (1.0 + t.sin().powi(2)));
        let coarse: Vec<_> = (0..64).map(|k| curve(2.0 * PI * k as f64 / 64.0)).collect();
        let fine: Vec<_> = (0..20000).map(|k| curve(2.0 * PI * k as f64 / 20000.0)).collect();
        let mut acc = 0.0;
        for k in 0..fine.len() {
            let a = fine[k];
            let b = fine[(k + 1) % fine.len()];
            acc += (b.1.atan2(b.0) - a.1.atan2(a.0) + PI).rem_euclid(2.0 * PI) - PI;
        }
        let brute = (acc / (2.0 * PI)).round() as i32;
        assert_eq!(winding_number(&coarse, (0.0, 0.0)).unwrap(), brute);
        assert_eq!(brute.abs(), 1);
    }
}
