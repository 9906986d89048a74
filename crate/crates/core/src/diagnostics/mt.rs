use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{config, Result};
use crate::functional::ProblemSpec;
use crate::grid::{Field, GridSpec};
use crate::minimax::{bubble_on, loop_center, BubbleParams};

/// Which trial fields to evaluate.
#[derive(Clone, Debug)]
pub struct SamplerConfig {
    /// Coefficient in front of `log∫e^u`; the sharp value is `8π`.
    pub coefficient: f64,
    /// Single bubbles at these concentrations.
    pub lambdas: Vec<f64>,
    /// Each bubble is also evaluated at these amplitude scales.
    pub scales: Vec<f64>,
    /// Amplitude of the random smooth fields.
    pub random_amplitude: f64,
    pub seed: u64,
    /// Minimum below which the sweep counts as unbounded-below evidence.
    pub floor: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            coefficient: 8.0 * PI,
            lambdas: vec![10.0, 30.0, 100.0, 300.0],
            scales: vec![1.0],
            random_amplitude: 3.0,
            seed: 0,
            floor: -1e3,
        }
    }
}

/// One evaluated trial field.
#[derive(Clone, Debug, PartialEq)]
pub struct MtSample {
    pub descriptor: String,
    pub value: f64,
}

/// Empirical evidence about `F(u) = ½∫|∇u|² − a log∫e^u + a log|Ω|`
/// (torus: plus `(a/|Σ|)∫u`, which keeps `F` gauge invariant).
#[derive(Clone, Debug, PartialEq)]
pub struct MtReport {
    pub coefficient: f64,
    pub sample_count: usize,
    pub min_value: f64,
    pub argmin: String,
    pub floor: f64,
    /// `min_value < floor`.
    pub violation: bool,
    pub samples: Vec<MtSample>,
}

/// `F(u)` for the given coefficient.
pub fn mt_functional(grid: &Arc<GridSpec>, coefficient: f64, u: &Field) -> Result<f64> {
    let p = match grid.kind() {
        crate::grid::DomainKind::Annulus => ProblemSpec::annulus(grid.clone(), coefficient)?,
        crate::grid::DomainKind::Torus => ProblemSpec::torus(grid.clone(), coefficient)?,
    };
    Ok(p.energy(u)?.total + coefficient * grid.area().ln())
}

/// Smooth random field built from a few low modes.
fn random_smooth(grid: &GridSpec, rng: &mut ChaCha8Rng, amplitude: f64) -> Field {
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(1..4) as f64,
                rng.gen_range(0..4) as f64,
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let mut u = match grid {
        GridSpec::Annulus(g) => {
            let (a, b) = (g.r_inner(), g.r_outer());
            g.sample(|r, t| {
                let s = (r - a) / (b - a);
                modes.iter().map(|&(c, k, m, ph)| c * (PI * k * s).sin() * (m * t + ph).cos()).sum()
            })
        }
        GridSpec::Torus(g) => {
            let (lx, ly) = (g.l_x(), g.l_y());
            g.sample(|x, y| {
                modes
                    .iter()
                    .map(|&(c, k, m, ph)| c * (2.0 * PI * (k * x / lx + m * y / ly) + ph).cos())
                    .sum()
            })
        }
    };
    u.scale(amplitude);
    grid.enforce_boundary(&mut u);
    u
}

/// Evaluate `F` over `n` random smooth fields and the configured bubble sweep.
/// Reports the minimum only; no bound is claimed.
pub fn moser_trudinger_check(grid: &Arc<GridSpec>, sampler: &SamplerConfig, n: usize) -> Result<MtReport> {
    if !(sampler.coefficient > 0.0) {
        return config("coefficient must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut trials: Vec<(String, Field)> = vec![("zero".to_string(), grid.zeros())];
    for k in 0..n {
        trials.push((format!("random#{k}"), random_smooth(grid, &mut rng, sampler.random_amplitude)));
    }
    let center = loop_center(grid, 0.0);
    for &l in &sampler.lambdas {
        for &t in &sampler.scales {
            let u = bubble_on(grid, &BubbleParams::new(center, l, t))?;
            trials.push((format!("bubble lambda={l} t={t}"), u));
        }
    }
    let values: Vec<f64> = trials
        .par_iter()
        .map(|(_, u)| mt_functional(grid, sampler.coefficient, u))
        .collect::<Result<_>>()?;
    let samples: Vec<MtSample> = trials
        .into_iter()
        .zip(values)
        .map(|((descriptor, _), value)| MtSample { descriptor, value })
        .collect();
    let mut best = 0;
    for (i, s) in samples.iter().enumerate() {
        if s.value < samples[best].value {
            best = i;
        }
    }
    Ok(MtReport {
        coefficient: sampler.coefficient,
        sample_count: samples.len(),
        min_value: samples[best].value,
        argmin: samples[best].descriptor.clone(),
        floor: sampler.floor,
        violation: samples[best].value < sampler.floor,
        samples,
    })
}

/// A region of the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    /// Angular sector `θ ∈ [from, to]` (radians, measured counterclockwise, wrapping).
    Sector { from: f64, to: f64 },
    Disk { center: (f64, f64), radius: f64 },
}

impl Region {
    fn contains(&self, grid: &GridSpec, x: (f64, f64)) -> bool {
        match *self {
            Region::Sector { from, to } => {
                let t = x.1.atan2(x.0).rem_euclid(2.0 * PI);
                let a = from.rem_euclid(2.0 * PI);
                let width = (to - from).rem_euclid(2.0 * PI);
                (t - a).rem_euclid(2.0 * PI) <= width
            }
            Region::Disk { center, radius } => match grid {
                GridSpec::Torus(g) => crate::minimax::torus_distance(g, x, center) <= radius,
                GridSpec::Annulus(_) => (x.0 - center.0).hypot(x.1 - center.1) <= radius,
            },
        }
    }
}

/// Outcome of the improved-inequality check.
#[derive(Clone, Debug, PartialEq)]
pub struct ImprovedMtReport {
    pub fractions: (f64, f64),
    /// Smallest distance between nodes of the two regions.
    pub separation: f64,
    pub hypothesis_holds: bool,
    /// `log∫e^u − ∫|∇u|²/(32π − ε)` when the hypothesis holds.
    pub deficit: Option<f64>,
}

/// Running record of deficits; its maximum is an empirical lower bound for the
/// constant of the improved inequality.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmpiricalConstant {
    pub deficits: Vec<f64>,
}

impl EmpiricalConstant {
    pub fn record(&mut self, report: &ImprovedMtReport) {
        if let Some(d) = report.deficit {
            self.deficits.push(d);
        }
    }

    pub fn max(&self) -> Option<f64> {
        self.deficits.iter().copied().reduce(f64::max)
    }
}

/// Check whether both regions carry at least a fraction `γ0` of `∫e^u`; if
/// so, evaluate the deficit of the improved inequality with coefficient
/// `1/(32π − ε)`.
pub fn improved_mt_check(
    grid: &GridSpec,
    u: &Field,
    s1: &Region,
    s2: &Region,
    gamma0: f64,
    eps: f64,
) -> Result<ImprovedMtReport> {
    grid.check(u)?;
    if !(gamma0 > 0.0 && gamma0 < 0.5) {
        return config(format!("gamma0 must lie in (0, 1/2) (got {gamma0})"));
    }
    if !(eps > 0.0 && eps < 32.0 * PI) {
        return config(format!("epsilon must lie in (0, 32π) (got {eps})"));
    }
    let pos: Vec<(f64, f64)> = (0..u.len()).map(|i| grid.position(i)).collect();
    let in1: Vec<usize> = (0..u.len()).filter(|&i| s1.contains(grid, pos[i])).collect();
    let in2: Vec<usize> = (0..u.len()).filter(|&i| s2.contains(grid, pos[i])).collect();
    if in1.is_empty() || in2.is_empty() {
        return config("regions must contain grid nodes");
    }
    let dist = |a: (f64, f64), b: (f64, f64)| match grid {
        GridSpec::Torus(g) => crate::minimax::torus_distance(g, a, b),
        GridSpec::Annulus(_) => (a.0 - b.0).hypot(a.1 - b.1),
    };
    let separation = in1
        .par_iter()
        .map(|&i| in2.iter().map(|&j| dist(pos[i], pos[j])).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min);
    if !(separation > 0.0) {
        return config("regions must be disjoint with positive distance");
    }
    let m = u.max();
    let e: Vec<f64> = u.iter().map(|&v| (v - m).exp()).collect();
    let w = grid.weights();
    let total: f64 = e.iter().zip(w).map(|(a, b)| a * b).sum();
    let f1 = in1.iter().map(|&i| w[i] * e[i]).sum::<f64>() / total;
    let f2 = in2.iter().map(|&i| w[i] * e[i]).sum::<f64>() / total;
    let holds = f1 >= gamma0 && f2 >= gamma0;
    let deficit = if holds {
        let log_mass = m + total.ln();
        Some(log_mass - 2.0 * grid.dirichlet_energy(u)? / (32.0 * PI - eps))
    } else {
        None
    };
    Ok(ImprovedMtReport { fractions: (f1, f2), separation, hypothesis_holds: holds, deficit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_annulus_grid;

    fn annulus(nr: usize, nt: usize) -> Arc<GridSpec> {
        Arc::new(build_annulus_grid(1.0, 2.0, nr, nt).unwrap())
    }

    #[test]
    fn zero_field_has_zero_f() {
        let g = annulus(32, 64);
        assert!(mt_functional(&g, 8.0 * PI, &g.zeros()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sweep_dichotomy_on_shared_data() {
        let g = annulus(64, 128);
        let sampler = SamplerConfig { lambdas: vec![10.0, 30.0, 100.0, 300.0, 1000.0], ..Default::default() };
        let sharp = moser_trudinger_check(&g, &sampler, 4).unwrap();
        assert!(sharp.min_value > -50.0, "{}", sharp.min_value);
        assert!(!sharp.violation);
        let above = moser_trudinger_check(&g, &SamplerConfig { coefficient: 9.0 * PI, ..sampler }, 4).unwrap();
        let bubble_min = |r: &MtReport| {
            r.samples.iter().filter(|s| s.descriptor.starts_with("bubble")).map(|s| s.value).fold(f64::INFINITY, f64::min)
        };
        assert!(bubble_min(&above) < bubble_min(&sharp));
        for (a, s) in above.samples.iter().zip(&sharp.samples).skip(1) {
            assert!(a.value < s.value, "{} {} {}", a.descriptor, a.value, s.value);
        }
    }

    #[test]
    fn two_symmetric_bubbles_satisfy_the_hypothesis() {
        let g = annulus(64, 128);
        let b1 = bubble_on(&g, &BubbleParams::new((1.5, 0.0), 20.0, 1.0)).unwrap();
        let b2 = bubble_on(&g, &BubbleParams::new((-1.5, 0.0), 20.0, 1.0)).unwrap();
        let both = b1.add_scaled(1.0, &b2);
        let s1 = Region::Sector { from: -PI / 3.0, to: PI / 3.0 };
        let s2 = Region::Sector { from: 2.0 * PI / 3.0, to: 4.0 * PI / 3.0 };
        let rep = improved_mt_check(&g, &both, &s1, &s2, 0.25, 1.0).unwrap();
        assert!(rep.hypothesis_holds);
        assert!((rep.fractions.0 - 0.5).abs() < 0.05 && (rep.fractions.1 - 0.5).abs() < 0.05);
        let mut ledger = EmpiricalConstant::default();
        ledger.record(&rep);
        assert!(ledger.max().unwrap().is_finite());

        let single = improved_mt_check(&g, &b1, &s1, &s2, 0.25, 1.0).unwrap();
        assert!(!single.hypothesis_holds && single.fractions.1 < 0.05);
    }

    #[test]
    fn uniform_density_fractions_are_area_fractions() {
        let g = annulus(64, 128);
        let s1 = Region::Sector { from: 0.0, to: PI / 2.0 };
        let s2 = Region::Sector { from: PI, to: 1.1 * PI };
        let rep = improved_mt_check(&g, &g.zeros(), &s1, &s2, 0.2, 1.0).unwrap();
        assert!((rep.fractions.0 - 0.25).abs() < 0.02);
        assert!((rep.fractions.1 - 0.05).abs() < 0.02);
        assert!(!rep.hypothesis_holds);
        let overlapping = Region::Sector { from: 0.1, to: 0.3 };
        assert!(improved_mt_check(&g, &g.zeros(), &s1, &overlapping, 0.2, 1.0).is_err());
    }
}
