use std::f64::consts::PI;

use crate::error::{config, Error, Result};
use crate::functional::ProblemSpec;
use crate::grid::Field;

use super::newton::{saddle_refine_with, NewtonConfig};
use super::{CriticalPoint, Provenance};

/// Options for [`continuation_in_rho`].
#[derive(Clone, Debug)]
pub struct ContinuationConfig {
    pub newton: NewtonConfig,
    /// Abort once `∫|∇u|²` of a solution exceeds this.
    pub dirichlet_cap: f64,
    /// Smallest step, as a fraction of the scheduled step, tried by bisection.
    pub min_step_fraction: f64,
    pub seed: u64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig { newton: NewtonConfig::default(), dirichlet_cap: 1e4, min_step_fraction: 1.0 / 64.0, seed: 0 }
    }
}

/// A solution branch; `complete` is false when the run stopped early.
#[derive(Clone, Debug)]
pub struct ContinuationResult {
    pub rhos: Vec<f64>,
    pub points: Vec<CriticalPoint>,
    /// `∫|∇u|²` per recorded point.
    pub dirichlet: Vec<f64>,
    pub complete: bool,
    pub failure: Option<String>,
}

/// Solve at `ρ_k = ρ_start + k(ρ_end − ρ_start)/steps`, `k = 0..=steps`,
/// warm-starting Newton from the previous solution. A failed step is bisected
/// down to `min_step_fraction` of the scheduled step before the run stops
/// with the partial branch.
pub fn continuation_in_rho(
    p: &ProblemSpec,
    u0: &Field,
    rho_start: f64,
    rho_end: f64,
    steps: usize,
    cfg: &ContinuationConfig,
) -> Result<ContinuationResult> {
    if !(rho_start > 0.0 && rho_start <= rho_end && rho_end < 16.0 * PI) {
        return config(format!("continuation needs 0 < rho_start <= rho_end < 16π (got {rho_start}, {rho_end})"));
    }
    let steps = if rho_start == rho_end { 0 } else { steps.max(1) };
    let h = if steps == 0 { 0.0 } else { (rho_end - rho_start) / steps as f64 };
    let mut out = ContinuationResult { rhos: Vec::new(), points: Vec::new(), dirichlet: Vec::new(), complete: true, failure: None };
    let mut current_rho = rho_start;
    let mut current = u0.clone();
    for k in 0..=steps {
        let target = if k == steps { rho_end } else { rho_start + k as f64 * h };
        // Bisect towards the target if a direct solve fails.
        let floor = cfg.min_step_fraction * h.abs();
        let (mut from_rho, mut from_u) = (current_rho, current.clone());
        let mut sub = target - from_rho;
        let mut reached = None;
        let mut last_err = None;
        loop {
            let goal = if sub >= target - from_rho { target } else { from_rho + sub };
            match p.with_coupling(goal).and_then(|q| saddle_refine_with(&q, &from_u, &cfg.newton)) {
                Ok(cp) if goal == target => {
                    reached = Some(cp);
                    break;
                }
                Ok(cp) => {
                    from_rho = goal;
                    from_u = cp.field;
                }
                Err(e) => {
                    last_err = Some(e);
                    if k == 0 || sub <= floor {
                        break;
                    }
                    sub *= 0.5;
                }
            }
        }
        let Some(mut cp) = reached else {
            out.complete = false;
            out.failure = Some(format!(
                "no convergence towards rho = {target}: {}",
                last_err.map_or_else(|| "unknown".to_string(), |e| e.to_string())
            ));
            break;
        };
        let dir = 2.0 * cp.energy.dirichlet;
        cp.provenance = Provenance { source: "continuation".into(), continuation_step: Some(k), seed: cfg.seed };
        current_rho = target;
        current = cp.field.clone();
        out.rhos.push(target);
        out.points.push(cp);
        out.dirichlet.push(dir);
        if !(dir <= cfg.dirichlet_cap) {
            out.complete = false;
            out.failure = Some(format!("Dirichlet integral {dir:.4e} exceeds cap {:.4e} at rho = {target}", cfg.dirichlet_cap));
            break;
        }
    }
    if out.points.is_empty() {
        return Err(Error::NoConvergence {
            method: "continuation",
            iterations: 0,
            residual: f64::NAN,
            trace: Vec::new(),
        });
    }
    Ok(out)
}
