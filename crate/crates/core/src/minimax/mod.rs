//! Mountain-pass machinery: bubble families over the unit disk whose boundary
//! loop winds around the hole, windowed Sobolev-gradient deformation of the
//! family maximum, Newton refinement of the resulting saddle, and continuation
//! of solutions in the coupling.

mod bubble;
mod continuation;
mod deform;
mod family;
mod newton;

pub use bubble::{
    annulus_support_radius, bubble_on, bubble_profile, cutoff, liouville_density, loop_center, make_bubble,
    make_torus_bubble, torus_distance, torus_support_radius, BubbleParams,
};
pub use continuation::{continuation_in_rho, ContinuationConfig, ContinuationResult};
pub use deform::{
    deform, deform_sweep, estimate_minimax, write_trace_csv, DeformationConfig, MinimaxResult, SweepStats, TraceRow,
};
pub use family::{build_family, build_path_family, winding_number, FamilyConfig, LoopMeasure, PathFamily};
pub use newton::{energy_norm, minimize, saddle_refine, saddle_refine_with, verify_dual_norm, NewtonConfig};

use crate::diagnostics::{self, ConcentrationReport, SpectrumReport};
use crate::error::Result;
use crate::functional::{EnergyBreakdown, ProblemSpec};
use crate::grid::Field;

/// Where a critical point came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    /// `"minimax"`, `"radial"`, `"continuation"`, ...
    pub source: String,
    pub continuation_step: Option<usize>,
    pub seed: u64,
}

/// A converged solution with its certificates.
#[derive(Clone, Debug)]
pub struct CriticalPoint {
    pub field: Field,
    pub energy: EnergyBreakdown,
    /// Max norm of the Euler–Lagrange residual.
    pub residual_max: f64,
    /// Dual norm `sqrt⟨residual, (−Δ)⁻¹ residual⟩` at convergence.
    pub dual_norm: f64,
    /// The same norm recomputed along an independent path.
    pub verified_dual_norm: f64,
    pub newton_steps: usize,
    /// Dual norm per Newton iteration.
    pub trace: Vec<f64>,
    pub morse: Option<SpectrumReport>,
    pub concentration: Option<ConcentrationReport>,
    pub provenance: Provenance,
}

impl CriticalPoint {
    pub fn morse_index(&self) -> Option<usize> {
        self.morse.as_ref().map(|m| m.morse_index)
    }

    /// Fill in the Morse index (`k` lowest eigenvalues) and the concentration report.
    pub fn annotate(&mut self, p: &ProblemSpec, k: usize, seed: u64) -> Result<()> {
        self.morse = Some(diagnostics::morse_index_seeded(p, &self.field, k, seed)?);
        self.concentration = Some(diagnostics::concentration_of_solution(p, &self.field)?);
        Ok(())
    }
}

/// Options for the full minimax pipeline.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub family: FamilyConfig,
    pub deformation: DeformationConfig,
    pub newton: NewtonConfig,
    /// Eigenvalues computed for the Morse index.
    pub eigen_count: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            family: FamilyConfig::default(),
            deformation: DeformationConfig::default(),
            newton: NewtonConfig::default(),
            eigen_count: 4,
            seed: 0,
        }
    }
}

/// Outcome of [`run_minimax`]: the deformation result and, when Newton
/// converged, the refined critical point.
#[derive(Debug)]
pub struct PipelineResult {
    pub minimax: MinimaxResult,
    pub critical: Result<CriticalPoint>,
}

/// Build the family, deform it, and refine maximizing samples by Newton in
/// order of increasing gradient norm. The first refined point with Morse index
/// at least one is returned; failing that, the first converged point. Each
/// result is annotated with its Morse index and concentration report.
pub fn run_minimax(p: &ProblemSpec, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let family = build_family(p, &cfg.family)?;
    let minimax = estimate_minimax(p, family, &cfg.deformation)?;
    let mut fallback: Option<CriticalPoint> = None;
    let mut last_err = None;
    for (k, (seed, _)) in minimax.candidates.iter().enumerate() {
        let refined = saddle_refine_with(p, seed, &cfg.newton).and_then(|mut cp| {
            cp.provenance = Provenance { source: format!("minimax candidate {k}"), continuation_step: None, seed: cfg.seed };
            cp.annotate(p, cfg.eigen_count, cfg.seed)?;
            Ok(cp)
        });
        match refined {
            Ok(cp) if cp.morse_index().unwrap_or(0) >= 1 => {
                return Ok(PipelineResult { minimax, critical: Ok(cp) });
            }
            Ok(cp) => {
                fallback.get_or_insert(cp);
            }
            Err(e) => last_err = Some(e),
        }
    }
    let critical = match (fallback, last_err) {
        (Some(cp), _) => Ok(cp),
        (None, Some(e)) => Err(e),
        (None, None) => Err(crate::error::Error::Internal("no Newton candidates".into())),
    };
    Ok(PipelineResult { minimax, critical })
}
