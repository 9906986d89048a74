use std::f64::consts::PI;
use std::io::Write;

use crate::error::{config, Result};
use crate::functional::ProblemSpec;
use crate::grid::{Field, GridSpec};
use crate::minimax::torus_distance;

/// A density peak and the mass around it.
#[derive(Clone, Debug, PartialEq)]
pub struct Peak {
    pub location: (f64, f64),
    pub density: f64,
    /// `∫_{B_r(peak)} e^v`.
    pub mass: f64,
    /// `mass / 8π`.
    pub ratio_8pi: f64,
    /// Distance of `ratio_8pi` to the nearest integer.
    pub integer_deviation: f64,
    /// Peak within `radius` of the Dirichlet boundary.
    pub near_boundary: bool,
}

/// Peaks of `e^v` with their local masses.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationReport {
    pub radius: f64,
    pub peaks: Vec<Peak>,
    pub total_mass: f64,
    /// Largest density over mean density.
    pub peak_to_mean: f64,
    /// `peak_to_mean` exceeds [`BLOW_UP_RATIO`].
    pub blow_up: bool,
}

/// Peak-to-mean density ratio above which a density is flagged as concentrating.
pub const BLOW_UP_RATIO: f64 = 1e3;

/// Fraction of the maximal density a local maximum must reach to count as a peak.
pub const PEAK_THRESHOLD: f64 = 0.5;

impl ConcentrationReport {
    /// CSV `peak_x,peak_y,mass,ratio_8pi`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "peak_x,peak_y,mass,ratio_8pi")?;
        for p in &self.peaks {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", p.location.0, p.location.1, p.mass, p.ratio_8pi)?;
        }
        Ok(())
    }

    pub fn peak_mass_sum(&self) -> f64 {
        self.peaks.iter().map(|p| p.mass).sum()
    }
}

fn distance(grid: &GridSpec, a: (f64, f64), b: (f64, f64)) -> f64 {
    match grid {
        GridSpec::Annulus(_) => (a.0 - b.0).hypot(a.1 - b.1),
        GridSpec::Torus(g) => torus_distance(g, a, b),
    }
}

/// Node neighbors in the 8-neighborhood of the structured grid (periodic in
/// angle on the annulus, in both directions on the torus).
fn neighbors(grid: &GridSpec, idx: usize) -> Vec<usize> {
    let (ni, nj, wrap_i) = match grid {
        GridSpec::Annulus(g) => (g.n_r(), g.n_theta(), false),
        GridSpec::Torus(g) => (g.n_x(), g.n_y(), true),
    };
    let (i, j) = ((idx / nj) as isize, (idx % nj) as isize);
    let mut out = Vec::with_capacity(8);
    for di in -1..=1isize {
        for dj in -1..=1isize {
            if di == 0 && dj == 0 {
                continue;
            }
            let mut ii = i + di;
            if wrap_i {
                ii = ii.rem_euclid(ni as isize);
            } else if ii < 0 || ii >= ni as isize {
                continue;
            }
            let jj = (j + dj).rem_euclid(nj as isize);
            out.push(ii as usize * nj + jj as usize);
        }
    }
    out
}

/// Find local maxima of `e^v` at or above `threshold` times the largest
/// density, merge peaks closer than `2·radius` (keeping the higher), and
/// integrate `e^v` over the ball of the given radius around each.
pub fn detect_concentration(grid: &GridSpec, v: &Field, radius: f64, threshold: f64) -> Result<ConcentrationReport> {
    grid.check(v)?;
    if !v.is_finite() {
        return config("concentration detection needs a finite field");
    }
    if !(radius >= 2.0 * grid.min_spacing()) {
        return config(format!("radius {radius} is below two grid cells ({})", 2.0 * grid.min_spacing()));
    }
    let vmax = v.max();
    let dens: Vec<f64> = v.iter().map(|&x| x.exp()).collect();
    let total_mass = grid.inner(&dens, &vec![1.0; dens.len()]);
    let mean = total_mass / grid.area();
    let dmax = vmax.exp();
    let peak_to_mean = dmax / mean;
    let mut cand: Vec<usize> = (0..v.len())
        .filter(|&i| v[i] >= vmax + threshold.ln())
        .filter(|&i| neighbors(grid, i).iter().all(|&n| v[n] < v[i] || (v[n] == v[i] && n > i)))
        .collect();
    // Constant densities have no peaks.
    if v.oscillation() <= 1e-12 * vmax.abs().max(1.0) {
        cand.clear();
    }
    cand.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in cand {
        let pc = grid.position(c);
        if kept.iter().all(|&k| distance(grid, pc, grid.position(k)) >= 2.0 * radius) {
            kept.push(c);
        }
    }
    let positions: Vec<(f64, f64)> = (0..v.len()).map(|i| grid.position(i)).collect();
    let peaks = kept
        .into_iter()
        .map(|c| {
            let pc = positions[c];
            let mass: f64 = (0..v.len())
                .filter(|&i| distance(grid, pc, positions[i]) <= radius)
                .map(|i| grid.weights()[i] * dens[i])
                .sum();
            let ratio = mass / (8.0 * PI);
            let near_boundary = match grid {
                GridSpec::Annulus(g) => {
                    let r = pc.0.hypot(pc.1);
                    r - g.r_inner() < radius || g.r_outer() - r < radius
                }
                GridSpec::Torus(_) => false,
            };
            Peak {
                location: pc,
                density: dens[c],
                mass,
                ratio_8pi: ratio,
                integer_deviation: (ratio - ratio.round()).abs(),
                near_boundary,
            }
        })
        .collect();
    Ok(ConcentrationReport { radius, peaks, total_mass, peak_to_mean, blow_up: peak_to_mean > BLOW_UP_RATIO })
}

/// `v = log ρ + u − log∫K e^u`, so that `∫e^v = ρ` (with the weight folded in).
pub fn normalized_density_log(p: &ProblemSpec, u: &Field) -> Result<Field> {
    let mass = p.mass(u)?;
    let shift = p.coupling().ln();
    Ok(Field::from_vec(mass.density.iter().map(|&d| shift + d.max(f64::MIN_POSITIVE).ln()).collect()))
}

/// Concentration report of a solution with the default radius (a fifth of the
/// domain size, at least two cells) and threshold.
pub fn concentration_of_solution(p: &ProblemSpec, u: &Field) -> Result<ConcentrationReport> {
    let grid = p.grid();
    let v = normalized_density_log(p, u)?;
    let size = match grid {
        GridSpec::Annulus(g) => g.r_outer() - g.r_inner(),
        GridSpec::Torus(g) => g.l_x().min(g.l_y()),
    };
    let radius = (0.2 * size).max(2.0 * grid.min_spacing());
    detect_concentration(grid, &v, radius, PEAK_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_annulus_grid;
    use crate::minimax::liouville_density;

    fn bubbles(grid: &GridSpec, centers: &[(f64, f64)], lambda: f64) -> Field {
        Field::from_vec(
            (0..grid.node_count())
                .map(|i| {
                    let x = grid.position(i);
                    centers
                        .iter()
                        .map(|c| liouville_density(lambda, (x.0 - c.0).hypot(x.1 - c.1)))
                        .sum::<f64>()
                        .ln()
                })
                .collect(),
        )
    }

    #[test]
    fn single_and_double_bubble_quantization() {
        let g = build_annulus_grid(1.0, 2.0, 256, 512).unwrap();
        let one = detect_concentration(&g, &bubbles(&g, &[(1.5, 0.0)], 30.0), 0.45, PEAK_THRESHOLD).unwrap();
        assert_eq!(one.peaks.len(), 1);
        assert!((one.peaks[0].ratio_8pi - 1.0).abs() < 0.02, "{:?}", one.peaks);
        assert!(one.peaks[0].mass / one.total_mass > 0.99);
        assert!(one.blow_up);
        let two = detect_concentration(&g, &bubbles(&g, &[(1.5, 0.0), (-1.5, 0.0)], 30.0), 0.45, PEAK_THRESHOLD).unwrap();
        assert_eq!(two.peaks.len(), 2);
        assert!((two.peak_mass_sum() / (16.0 * PI) - 1.0).abs() < 0.02);
        assert!(two.peaks.iter().all(|p| p.integer_deviation < 0.02));
    }

    #[test]
    fn constant_density_has_no_peaks() {
        let g = build_annulus_grid(1.0, 2.0, 32, 64).unwrap();
        let rep = detect_concentration(&g, &Field::constant(g.node_count(), 2.0), 0.2, PEAK_THRESHOLD).unwrap();
        assert!(rep.peaks.is_empty());
        assert!(!rep.blow_up);
        assert!(detect_concentration(&g, &g.zeros(), 1e-4, PEAK_THRESHOLD).is_err());
    }
}
