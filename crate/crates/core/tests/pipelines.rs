use std::f64::consts::PI;
use std::sync::Arc;

use meanfield::diagnostics::{morse_index, palais_smale_monitor};
use meanfield::grid::TorusGrid;
use meanfield::minimax::{
    continuation_in_rho, energy_norm, run_minimax, saddle_refine, ContinuationConfig, PipelineConfig,
};
use meanfield::radial::{evaluate_on_grid, solve_radial};
use meanfield::torus::{solve_torus, TorusConfig, TorusProblem};
use meanfield::{build_annulus_grid, ProblemSpec};

fn annulus(nr: usize, nt: usize, rho: f64) -> ProblemSpec {
    ProblemSpec::annulus(Arc::new(build_annulus_grid(1.0, 2.0, nr, nt).unwrap()), rho).unwrap()
}

#[test]
fn newton_matches_radial_oracle_with_refinement() {
    let prof = solve_radial(1.0, 2.0, 12.0 * PI, 4000).unwrap();
    let mut errs = Vec::new();
    for (nr, nt) in [(32, 64), (64, 128)] {
        let p = annulus(nr, nt, 12.0 * PI);
        let u0 = evaluate_on_grid(&prof, p.grid().as_annulus().unwrap()).unwrap();
        let cp = saddle_refine(&p, &u0, 1e-10).unwrap();
        errs.push(cp.field.sub(&u0).max_abs() / u0.max_abs());
        // The radial branch is a local minimum.
        assert_eq!(morse_index(&p, &cp.field, 3).unwrap().morse_index, 0);
    }
    assert!(errs[1] < errs[0] && errs[1] <= 5e-3, "{errs:?}");
}

#[test]
fn twelve_pi_minimax_finds_a_saddle() {
    let p = annulus(64, 128, 12.0 * PI);
    let out = run_minimax(&p, &PipelineConfig::default()).unwrap();
    assert!(out.minimax.converged);
    assert!(out.minimax.trace.iter().all(|t| t.winding == 1));
    let cp = out.critical.unwrap();
    let scale = energy_norm(p.grid(), &cp.field).unwrap().max(1.0);
    assert!(cp.verified_dual_norm <= 1e-8 * scale);
    assert!(cp.morse_index().unwrap() >= 1);
    // Non-radial: the saddle sits above the radial minimum.
    assert!((cp.energy.total + 82.634).abs() < 0.05, "{}", cp.energy.total);
    assert!(palais_smale_monitor(&out.minimax.trace, 1e4).pass);
}

#[test]
fn continuation_keeps_j_over_rho_nonincreasing() {
    let p = annulus(32, 64, 10.0 * PI);
    let prof = solve_radial(1.0, 2.0, 10.0 * PI, 2000).unwrap();
    let u0 = evaluate_on_grid(&prof, p.grid().as_annulus().unwrap()).unwrap();
    let res = continuation_in_rho(&p, &u0, 10.0 * PI, 14.0 * PI, 4, &ContinuationConfig::default()).unwrap();
    assert!(res.complete);
    assert_eq!(res.points.len(), 5);
    let ratios: Vec<f64> = res.rhos.iter().zip(&res.points).map(|(r, c)| c.energy.total / r).collect();
    assert!(ratios.windows(2).all(|w| w[1] <= w[0]), "{ratios:?}");
    assert!(res.points.iter().enumerate().all(|(k, c)| c.provenance.continuation_step == Some(k)));
    assert!(continuation_in_rho(&p, &u0, 14.0 * PI, 10.0 * PI, 4, &ContinuationConfig::default()).is_err());
}

#[test]
fn torus_supercritical_solution_is_non_constant() {
    let tp = TorusProblem::new(TorusGrid::new(1.0, 1.0, 32, 32).unwrap(), 30.0).unwrap();
    let sol = solve_torus(&tp, &TorusConfig::default()).unwrap();
    assert!(sol.oscillation > 0.1);
    assert!(sol.critical.morse_index().unwrap() >= 1);
    assert!((sol.mass - 1.0).abs() <= 1e-10);
    assert!(tp.spec().residual(&sol.critical.field).unwrap().max_abs() <= 1e-7);
    assert!(sol.phase.phi_x.is_some());
}
