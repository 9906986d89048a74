use crate::error::{Error, Result};
use crate::functional::ProblemSpec;
use crate::grid::Field;
use crate::linalg::lobpcg;

/// Lowest eigenvalues of the second variation.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `‖He − λe‖_w / ‖e‖_w` per pair.
    pub residuals: Vec<f64>,
    /// Threshold below which an eigenvalue counts as negative: `tol_rel · max|λ|`.
    pub tol_eig: f64,
    pub morse_index: usize,
    pub iterations: usize,
}

/// Relative eigen tolerance used for both the residual test and the sign count.
pub const TOL_EIG_REL: f64 = 1e-6;

/// `k` smallest eigenvalues of `H(u)` on Dirichlet fields (annulus) or
/// mean-zero fields (torus; the constant gauge mode is excluded) and the
/// count of those below `−tol_eig`.
pub fn morse_index(p: &ProblemSpec, u: &Field, k: usize) -> Result<SpectrumReport> {
    morse_index_seeded(p, u, k, 0)
}

pub fn morse_index_seeded(p: &ProblemSpec, u: &Field, k: usize, seed: u64) -> Result<SpectrumReport> {
    if k == 0 {
        return Err(Error::Config("morse_index needs k >= 1".into()));
    }
    let grid = p.grid();
    let mass = p.mass(u)?;
    let guard = k.clamp(2, 4);
    let res = lobpcg(
        grid,
        |v| p.hessian_with(&mass, v),
        |v| grid.poisson_solve(v),
        k,
        guard,
        TOL_EIG_REL,
        400,
        seed ^ 0x5eed,
    )?;
    let scale = res.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol_eig = TOL_EIG_REL * scale;
    let residuals: Vec<f64> = res.residuals.iter().map(|r| r * scale).collect();
    if !res.converged {
        return Err(Error::NoConvergence {
            method: "lobpcg",
            iterations: res.iterations,
            residual: residuals.iter().copied().fold(0.0, f64::max),
            trace: residuals,
        });
    }
    let morse_index = res.values.iter().filter(|&&l| l < -tol_eig).count();
    Ok(SpectrumReport { eigenvalues: res.values, residuals, tol_eig, morse_index, iterations: res.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn torus(c: f64) -> ProblemSpec {
        ProblemSpec::torus(Arc::new(TorusGrid::new(1.0, 1.0, 32, 32).unwrap().into()), c).unwrap()
    }

    #[test]
    fn constant_torus_solution_spectrum() {
        let p = torus(30.0);
        let rep = morse_index(&p, &p.grid().zeros(), 5).unwrap();
        assert_eq!(rep.morse_index, 0);
        let l1 = 4.0 * PI * PI;
        for v in &rep.eigenvalues[..4] {
            assert!((v - (l1 - 30.0)).abs() < 1e-6, "{v}");
        }
        let p = torus(45.0);
        let rep = morse_index(&p, &p.grid().zeros(), 5).unwrap();
        assert_eq!(rep.morse_index, 4);
        assert!(rep.residuals.iter().all(|&r| r <= rep.tol_eig));
    }

    #[test]
    fn gauge_mode_is_an_exact_null_vector() {
        let p = torus(30.0);
        let u = crate::grid::random_field(p.grid(), 9, 1.0);
        let one = Field::constant(p.grid().node_count(), 1.0);
        let h = p.second_variation_apply(&u, &one).unwrap();
        assert!(h.max_abs() < 1e-10);
    }
}
