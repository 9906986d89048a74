use crate::minimax::TraceRow;

/// Outcome of [`palais_smale_monitor`].
#[derive(Clone, Debug, PartialEq)]
pub struct PalaisSmaleReport {
    /// `∫|∇u|²` stayed at or below the cap along the whole trace.
    pub pass: bool,
    pub max_dirichlet: f64,
    /// Trace row where the maximum was attained.
    pub max_at: Option<usize>,
    /// Gradient norms stalled while the Dirichlet integral kept growing.
    pub compactness_warning: bool,
}

/// Check a deformation or continuation trace against a cap on `∫|∇u|²`.
/// An empty trace passes vacuously.
pub fn palais_smale_monitor(trace: &[TraceRow], cap: f64) -> PalaisSmaleReport {
    let mut max_dirichlet = f64::NEG_INFINITY;
    let mut max_at = None;
    for (k, row) in trace.iter().enumerate() {
        if !(row.dirichlet_bound <= max_dirichlet) {
            max_dirichlet = row.dirichlet_bound;
            max_at = Some(k);
        }
    }
    let pass = trace.iter().all(|r| r.dirichlet_bound <= cap);
    // Stagnation: over the last half of the trace the gradient norm did not
    // halve while the Dirichlet integral at least doubled.
    let compactness_warning = trace.len() >= 4 && {
        let mid = &trace[trace.len() / 2];
        let last = &trace[trace.len() - 1];
        last.max_grad_norm > 0.5 * mid.max_grad_norm && last.dirichlet_bound > 2.0 * mid.dirichlet_bound.max(f64::MIN_POSITIVE)
    };
    PalaisSmaleReport {
        pass,
        max_dirichlet: if max_at.is_some() { max_dirichlet } else { 0.0 },
        max_at,
        compactness_warning,
    }
}

/// Trace rows from a continuation branch (`∫|∇u|²` and dual norms per step).
pub fn continuation_trace(dirichlet: &[f64], dual_norms: &[f64]) -> Vec<TraceRow> {
    dirichlet
        .iter()
        .zip(dual_norms)
        .enumerate()
        .map(|(k, (&d, &g))| TraceRow {
            sweep: k,
            max_energy: f64::NAN,
            max_grad_norm: g,
            dirichlet_bound: d,
            moved: 0,
            winding: 1,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, d: f64, g: f64) -> TraceRow {
        TraceRow { sweep: k, max_energy: -1.0, max_grad_norm: g, dirichlet_bound: d, moved: 1, winding: 1 }
    }

    #[test]
    fn healthy_and_blown_up_traces() {
        let healthy: Vec<_> = (0..6).map(|k| row(k, 50.0 + k as f64, 1.0 / (k + 1) as f64)).collect();
        let rep = palais_smale_monitor(&healthy, 100.0);
        assert!(rep.pass && !rep.compactness_warning);
        assert_eq!(rep.max_at, Some(5));
        let mut bad = healthy.clone();
        for (k, r) in bad.iter_mut().enumerate().skip(3) {
            r.dirichlet_bound = 10f64.powi(k as i32);
            r.max_grad_norm = 1.0;
        }
        let rep = palais_smale_monitor(&bad, 100.0);
        assert!(!rep.pass && rep.compactness_warning);
    }

    #[test]
    fn empty_and_idle_traces_pass() {
        assert!(palais_smale_monitor(&[], 1.0).pass);
        let idle: Vec<_> = (0..3).map(|k| TraceRow { moved: 0, ..row(k, 5.0, 0.1) }).collect();
        assert!(palais_smale_monitor(&idle, 10.0).pass);
    }
}
