use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::ProblemSpec;
use crate::grid::Field;

use super::family::PathFamily;

/// Deformation and stopping options.
#[derive(Clone, Debug)]
pub struct DeformationConfig {
    /// Window half-width as a fraction of `|α|`.
    pub window_fraction: f64,
    /// Smallest window half-width.
    pub window_floor: f64,
    pub max_sweeps: usize,
    /// Relative decrease of the family maximum below which a sweep counts as stagnant.
    pub tol_stag: f64,
    /// Consecutive stagnant sweeps required to stop.
    pub stag_sweeps: usize,
    /// Stop once the dual gradient norm at the maximizing sample falls below this.
    pub grad_tol: f64,
    /// Longest trial step, measured in the energy norm.
    pub max_step: f64,
    pub armijo: f64,
}

impl Default for DeformationConfig {
    fn default() -> Self {
        DeformationConfig {
            window_fraction: 0.1,
            window_floor: 1.0,
            max_sweeps: 60,
            tol_stag: 1e-5,
            stag_sweeps: 3,
            grad_tol: 1e-3,
            max_step: 1.0,
            armijo: 1e-4,
        }
    }
}

/// One row of the deformation trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub sweep: usize,
    pub max_energy: f64,
    /// Dual gradient norm at the maximizing sample.
    pub max_grad_norm: f64,
    /// Running maximum of `∫|∇u|²` over all samples.
    pub dirichlet_bound: f64,
    /// Samples moved in this sweep.
    pub moved: usize,
    /// Winding number of the boundary loop after the sweep.
    pub winding: i32,
}

/// Write the trace as CSV `sweep,max_energy,max_grad_norm,dirichlet_bound`.
pub fn write_trace_csv(trace: &[TraceRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "sweep,max_energy,max_grad_norm,dirichlet_bound")?;
    for t in trace {
        writeln!(w, "{},{:.16e},{:.16e},{:.16e}", t.sweep, t.max_energy, t.max_grad_norm, t.dirichlet_bound)?;
    }
    Ok(())
}

/// Outcome of [`estimate_minimax`].
#[derive(Clone, Debug)]
pub struct MinimaxResult {
    pub alpha_estimate: f64,
    pub argmax: usize,
    pub argmax_param: (f64, f64),
    pub argmax_field: Field,
    /// Maximizing sample with the smallest gradient norm seen over all sweeps;
    /// the starting point for Newton refinement.
    pub seed_field: Field,
    pub seed_grad_norm: f64,
    /// Movable maximizing samples of every sweep with their gradient norms,
    /// ascending by gradient norm. `seed_field` is the first.
    pub candidates: Vec<(Field, f64)>,
    /// The maximum ended on a frozen sample, so further sweeps cannot lower it.
    pub pinned: bool,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub family: PathFamily,
}

/// Summary of one sweep.
#[derive(Clone, Debug)]
pub struct SweepStats {
    pub moved: usize,
    pub max_before: f64,
    pub max_after: f64,
    pub argmax_grad_norm: f64,
}

fn dirichlet_integral(p: &ProblemSpec, u: &Field) -> Result<f64> {
    Ok(2.0 * p.grid().dirichlet_energy(u)?)
}

/// Apply one windowed descent sweep in place. Samples whose energy lies in
/// `[α − δ_w, α + δ_w]` (α the current family maximum) take one Sobolev-gradient
/// step with Armijo backtracking; frozen samples never move. Returns the sweep
/// statistics; the family maximum cannot increase.
pub fn deform_sweep(p: &ProblemSpec, family: &mut PathFamily, cfg: &DeformationConfig) -> Result<SweepStats> {
    let alpha = family.max_energy();
    let argmax = family.argmax();
    let delta = (cfg.window_fraction * alpha.abs()).max(cfg.window_floor);
    let window: Vec<usize> = (0..family.len())
        .filter(|&i| !family.frozen[i] && (family.energies[i] - alpha).abs() <= delta)
        .collect();
    // (sample, accepted step with its energy, gradient norm before the step)
    #[allow(clippy::type_complexity)]
    let updates: Vec<(usize, Option<(Field, f64)>, f64)> = window
        .par_iter()
        .map(|&i| {
            let u = &family.fields[i];
            let e0 = family.energies[i];
            let g = p.gradient(u)?;
            let slope = g.dual_norm * g.dual_norm;
            if slope == 0.0 {
                return Ok((i, None, 0.0));
            }
            let mut t = (cfg.max_step / g.dual_norm).min(1.0);
            while t > 1e-10 {
                let trial = u.add_scaled(-t, &g.sobolev);
                if let Ok(e) = p.energy(&trial) {
                    if e.total <= e0 - cfg.armijo * t * slope {
                        return Ok((i, Some((trial, e.total)), g.dual_norm));
                    }
                }
                t *= 0.5;
            }
            Ok((i, None, g.dual_norm))
        })
        .collect::<Result<_>>()?;
    let mut moved = 0;
    let mut argmax_grad = if window.contains(&argmax) { f64::NAN } else { p.gradient(&family.fields[argmax])?.dual_norm };
    for (i, up, gn) in updates {
        if i == argmax {
            argmax_grad = gn;
        }
        if let Some((u, e)) = up {
            if e > family.energies[i] {
                return Err(Error::Internal(format!("sample {i} energy increased during descent")));
            }
            family.fields[i] = u;
            family.energies[i] = e;
            moved += 1;
        }
    }
    let max_after = family.max_energy();
    if max_after > alpha {
        return Err(Error::Internal("family maximum increased during a sweep".into()));
    }
    Ok(SweepStats { moved, max_before: alpha, max_after, argmax_grad_norm: argmax_grad })
}

/// One deformation sweep returning the deformed family; the boundary winding
/// is checked afterwards.
pub fn deform(p: &ProblemSpec, family: &PathFamily, cfg: &DeformationConfig) -> Result<PathFamily> {
    let mut f = family.clone();
    deform_sweep(p, &mut f, cfg)?;
    let w = f.boundary_winding(p)?;
    if w != 1 {
        return Err(Error::Internal(format!("boundary winding changed to {w}")));
    }
    Ok(f)
}

/// Repeat deformation sweeps until the family maximum stagnates or the
/// maximizing sample is nearly critical.
pub fn estimate_minimax(p: &ProblemSpec, family: PathFamily, cfg: &DeformationConfig) -> Result<MinimaxResult> {
    let mut family = family;
    let mut trace = Vec::new();
    let mut bound = family
        .fields
        .iter()
        .map(|u| dirichlet_integral(p, u))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let first = family.argmax();
    let g0 = p.gradient(&family.fields[first])?.dual_norm;
    let mut candidates = Vec::new();
    if !family.frozen[first] {
        candidates.push((family.fields[first].clone(), g0));
    }
    trace.push(TraceRow {
        sweep: 0,
        max_energy: family.max_energy(),
        max_grad_norm: g0,
        dirichlet_bound: bound,
        moved: 0,
        winding: family.boundary_winding(p)?,
    });
    let mut stagnant = 0;
    let mut converged = g0 <= cfg.grad_tol;
    let mut pinned = family.frozen[first];
    converged |= pinned;
    let mut sweep = 0;
    while !converged && !pinned && sweep < cfg.max_sweeps {
        sweep += 1;
        let stats = deform_sweep(p, &mut family, cfg)?;
        let winding = family.boundary_winding(p)?;
        if winding != 1 {
            return Err(Error::Internal(format!("boundary winding changed to {winding} in sweep {sweep}")));
        }
        let am = family.argmax();
        bound = bound.max(dirichlet_integral(p, &family.fields[am])?);
        for i in 0..family.len() {
            if !family.frozen[i] {
                bound = bound.max(dirichlet_integral(p, &family.fields[i])?);
            }
        }
        let gn = p.gradient(&family.fields[am])?.dual_norm;
        if family.frozen[am] {
            // A frozen maximum cannot be lowered; this is terminal stagnation.
            pinned = true;
            converged = true;
        } else {
            candidates.push((family.fields[am].clone(), gn));
        }
        trace.push(TraceRow {
            sweep,
            max_energy: stats.max_after,
            max_grad_norm: gn,
            dirichlet_bound: bound,
            moved: stats.moved,
            winding,
        });
        let rel = (stats.max_before - stats.max_after) / stats.max_before.abs().max(1.0);
        stagnant = if rel < cfg.tol_stag { stagnant + 1 } else { 0 };
        if stagnant >= cfg.stag_sweeps || gn <= cfg.grad_tol || stats.moved == 0 {
            converged = true;
        }
    }
    let argmax = family.argmax();
    if candidates.is_empty() {
        return Err(Error::Internal("no movable sample ever attained the family maximum".into()));
    }
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    let seed = candidates[0].clone();
    Ok(MinimaxResult {
        alpha_estimate: family.max_energy(),
        argmax,
        argmax_param: family.params[argmax],
        argmax_field: family.fields[argmax].clone(),
        seed_field: seed.0,
        seed_grad_norm: seed.1,
        candidates,
        pinned,
        trace,
        converged,
        family,
    })
}
