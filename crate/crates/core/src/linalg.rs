//! Iterative solvers in the weighted inner product `⟨·,·⟩_w` of a grid.
//!
//! Operators map admissible fields to `L²_w` representatives and are assumed
//! symmetric in `⟨·,·⟩_w`. Preconditioners are symmetric positive definite in
//! the same inner product; in practice the exact Poisson solve is used.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

/// Outcome of a Krylov solve.
#[derive(Clone, Debug)]
pub struct KrylovStats {
    pub iterations: usize,
    /// Final preconditioned residual norm relative to the right-hand side.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned MINRES for `A x = b`. The stopping test uses the residual
/// in the norm induced by the preconditioner, `sqrt⟨r, M⁻¹ r⟩_w`, which for
/// `M⁻¹ = (−Δ)⁻¹` is the `H⁻¹` dual norm. Works for indefinite and singular
/// (consistent) systems.
pub fn minres(
    grid: &GridSpec,
    mut apply: impl FnMut(&Field) -> Result<Field>,
    mut precond: impl FnMut(&Field) -> Result<Field>,
    b: &Field,
    rtol: f64,
    max_iter: usize,
) -> Result<(Field, KrylovStats)> {
    let n = b.len();
    let mut x = Field::zeros(n);
    let mut r1 = b.clone();
    let mut y = precond(&r1)?;
    let beta1_sq = grid.inner(&r1, &y);
    if beta1_sq < 0.0 {
        return Err(Error::Internal("preconditioner is not positive definite".into()));
    }
    let beta1 = beta1_sq.sqrt();
    if beta1 == 0.0 {
        return Ok((x, KrylovStats { iterations: 0, relative_residual: 0.0, converged: true }));
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = Field::zeros(n);
    let mut w2 = Field::zeros(n);
    for itn in 1..=max_iter {
        let v = y.scaled(1.0 / beta);
        y = apply(&v)?;
        if itn >= 2 {
            y.axpy(-beta / oldb, &r1);
        }
        let alfa = grid.inner(&v, &y);
        y.axpy(-alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, y);
        y = precond(&r2)?;
        oldb = beta;
        let bsq = grid.inner(&r2, &y);
        if bsq < 0.0 {
            return Err(Error::Internal("preconditioner is not positive definite".into()));
        }
        beta = bsq.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w);
        let mut wn = v;
        wn.axpy(-oldeps, &w1);
        wn.axpy(-delta, &w2);
        wn.scale(1.0 / gamma);
        w = wn;
        x.axpy(phi, &w);
        let rel = phibar / beta1;
        if !rel.is_finite() {
            return Err(Error::Numeric("MINRES produced non-finite values".into()));
        }
        if rel <= rtol || beta <= f64::EPSILON * beta1 {
            return Ok((x, KrylovStats { iterations: itn, relative_residual: rel, converged: true }));
        }
        if itn == max_iter {
            return Ok((x, KrylovStats { iterations: itn, relative_residual: rel, converged: false }));
        }
    }
    Ok((x, KrylovStats { iterations: max_iter, relative_residual: phibar / beta1, converged: false }))
}

/// Unpreconditioned conjugate gradients for a symmetric positive definite `A`
/// on admissible fields. Relative residual measured in `‖·‖_w`.
pub fn cg(
    grid: &GridSpec,
    mut apply: impl FnMut(&Field) -> Result<Field>,
    b: &Field,
    rtol: f64,
    max_iter: usize,
) -> Result<(Field, KrylovStats)> {
    let mut x = Field::zeros(b.len());
    let mut r = b.clone();
    grid.project(&mut r);
    let bnorm = grid.norm(&r);
    if bnorm == 0.0 {
        return Ok((x, KrylovStats { iterations: 0, relative_residual: 0.0, converged: true }));
    }
    let mut p = r.clone();
    let mut rr = grid.inner(&r, &r);
    for itn in 1..=max_iter {
        let ap = apply(&p)?;
        let pap = grid.inner(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Numeric(format!("CG: operator not positive (pAp = {pap:e})")));
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = grid.inner(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel <= rtol {
            return Ok((x, KrylovStats { iterations: itn, relative_residual: rel, converged: true }));
        }
        p = r.add_scaled(rr_new / rr, &p);
        rr = rr_new;
    }
    Ok((x, KrylovStats { iterations: max_iter, relative_residual: rr.sqrt() / bnorm, converged: false }))
}

/// Lowest eigenpairs from [`lobpcg`].
#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: Vec<Field>,
    pub iterations: usize,
    /// `‖Aφ − λφ‖_w / (‖φ‖_w max|λ|)` of the returned pairs.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Locally optimal block preconditioned conjugate gradients for the `k` lowest
/// eigenpairs of `A φ = λ φ` (mass matrix: the quadrature weights).
/// `guard` extra vectors are carried to speed up convergence of the last pairs.
/// Stops when `‖Aφ_i − λ_i φ_i‖_w ≤ tol · max_{j<k}|λ_j| · ‖φ_i‖_w` for all `i < k`.
#[allow(clippy::too_many_arguments)]
pub fn lobpcg(
    grid: &GridSpec,
    mut apply: impl FnMut(&Field) -> Result<Field>,
    mut precond: impl FnMut(&Field) -> Result<Field>,
    k: usize,
    guard: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenResult> {
    let n = grid.node_count();
    let m = k + guard;
    if k == 0 || m >= n {
        return Err(Error::Config(format!("lobpcg: need 0 < k and k + guard < {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Field> = (0..m)
        .map(|_| {
            let mut v = Field::from_vec((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            grid.project(&mut v);
            precond(&v)
        })
        .collect::<Result<_>>()?;
    let mut p: Vec<Field> = Vec::new();
    let mut values = vec![0.0; m];
    let mut residuals = vec![f64::INFINITY; m];
    let mut ax: Vec<Field> = x.iter().map(&mut apply).collect::<Result<_>>()?;
    let mut ap: Vec<Field> = Vec::new();
    // Initial Rayleigh-Ritz on X alone.
    let (vals, coef) = rayleigh_ritz(grid, &x, &ax, m)?;
    x = combine(&x, &coef, m);
    ax = combine(&ax, &coef, m);
    values.copy_from_slice(&vals[..m]);
    for itn in 1..=max_iter {
        let mut w = Vec::with_capacity(m);
        let scale = values[..k].iter().fold(f64::MIN_POSITIVE, |a, l| a.max(l.abs()));
        for i in 0..m {
            let mut r = ax[i].add_scaled(-values[i], &x[i]);
            grid.project(&mut r);
            residuals[i] = grid.norm(&r) / grid.norm(&x[i]) / scale;
            w.push(precond(&r)?);
        }
        if residuals[..k].iter().all(|&r| r <= tol) {
            return Ok(finish(values, x, residuals, k, itn, true));
        }
        let aw: Vec<Field> = w.iter().map(&mut apply).collect::<Result<_>>()?;
        let mut basis = x.clone();
        basis.extend(w);
        basis.extend(p.iter().cloned());
        let mut abasis = ax.clone();
        abasis.extend(aw);
        abasis.extend(ap.iter().cloned());
        let (vals, coef) = rayleigh_ritz(grid, &basis, &abasis, m)?;
        let new_x = combine(&basis, &coef, m);
        let new_ax = combine(&abasis, &coef, m);
        // P: the part of the update outside the old X.
        let mut coef_p = coef.clone();
        for r in 0..m {
            for c in 0..m {
                coef_p[(r, c)] = 0.0;
            }
        }
        p = combine(&basis, &coef_p, m);
        ap = combine(&abasis, &coef_p, m);
        x = new_x;
        ax = new_ax;
        values.copy_from_slice(&vals[..m]);
    }
    Ok(finish(values, x, residuals, k, max_iter, false))
}

fn finish(values: Vec<f64>, x: Vec<Field>, residuals: Vec<f64>, k: usize, it: usize, ok: bool) -> EigenResult {
    EigenResult {
        values: values[..k].to_vec(),
        vectors: x.into_iter().take(k).collect(),
        iterations: it,
        residuals: residuals[..k].to_vec(),
        converged: ok,
    }
}

/// Ritz values and coefficient columns (`basis.len() × m`) of the `m` lowest
/// Ritz pairs in the span of `basis`. Near-dependent directions are dropped.
fn rayleigh_ritz(grid: &GridSpec, basis: &[Field], abasis: &[Field], m: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let s = basis.len();
    let mut gram = DMatrix::zeros(s, s);
    let mut stiff = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in i..s {
            let g = grid.inner(&basis[i], &basis[j]);
            let a = 0.5 * (grid.inner(&basis[i], &abasis[j]) + grid.inner(&basis[j], &abasis[i]));
            gram[(i, j)] = g;
            gram[(j, i)] = g;
            stiff[(i, j)] = a;
            stiff[(j, i)] = a;
        }
    }
    // Scale to unit diagonal before the rank decision.
    let d: Vec<f64> = (0..s).map(|i| 1.0 / gram[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    for i in 0..s {
        for j in 0..s {
            gram[(i, j)] *= d[i] * d[j];
            stiff[(i, j)] *= d[i] * d[j];
        }
    }
    let ge = SymmetricEigen::new(gram);
    let gmax = ge.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..s).filter(|&i| ge.eigenvalues[i] > 1e-12 * gmax).collect();
    if keep.len() < m {
        return Err(Error::Numeric("lobpcg: search space lost rank".into()));
    }
    // Orthonormal basis Q = V Λ^{-1/2} of the kept directions.
    let mut q = DMatrix::zeros(s, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let f = 1.0 / ge.eigenvalues[i].sqrt();
        for r in 0..s {
            q[(r, c)] = ge.eigenvectors[(r, i)] * f;
        }
    }
    let reduced = q.transpose() * &stiff * &q;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let re = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&a, &b| re.eigenvalues[a].total_cmp(&re.eigenvalues[b]));
    let mut coef = DMatrix::zeros(s, m);
    let mut vals = Vec::with_capacity(m);
    for (c, &i) in order.iter().take(m).enumerate() {
        vals.push(re.eigenvalues[i]);
        let col = &q * re.eigenvectors.column(i);
        for r in 0..s {
            coef[(r, c)] = col[r] * d[r];
        }
    }
    Ok((vals, coef))
}

fn combine(basis: &[Field], coef: &DMatrix<f64>, m: usize) -> Vec<Field> {
    let n = basis[0].len();
    (0..m)
        .map(|c| {
            let mut out = Field::zeros(n);
            for (r, b) in basis.iter().enumerate() {
                let a = coef[(r, c)];
                if a != 0.0 {
                    out.axpy(a, b);
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_annulus_grid, TorusGrid};
    use crate::grid::random_field;
    use std::f64::consts::PI;

    #[test]
    fn cg_matches_direct_poisson_solve() {
        let g = build_annulus_grid(1.0, 2.0, 24, 48).unwrap();
        let f = random_field(&g, 11, 1.0);
        let direct = g.poisson_solve(&f).unwrap();
        let (x, stats) = cg(&g, |v| g.laplacian_apply(v), &f, 1e-12, 2000).unwrap();
        assert!(stats.converged);
        assert!(x.sub(&direct).max_abs() < 1e-9 * direct.max_abs());
    }

    #[test]
    fn minres_solves_a_shifted_indefinite_system() {
        let g: GridSpec = TorusGrid::new(1.0, 1.0, 32, 32).unwrap().into();
        let shift = 50.0; // between eigenvalues (2π)² ≈ 39.5 and 2(2π)² ≈ 79
        let apply = |v: &Field| -> Result<Field> {
            let mut out = g.laplacian_apply(v)?;
            out.axpy(-shift, v);
            g.project(&mut out);
            Ok(out)
        };
        let x_true = random_field(&g, 5, 1.0);
        let b = apply(&x_true).unwrap();
        let (x, stats) = minres(&g, apply, |v| g.poisson_solve(v), &b, 1e-12, 500).unwrap();
        assert!(stats.converged, "{stats:?}");
        assert!(x.sub(&x_true).max_abs() < 1e-8, "{}", x.sub(&x_true).max_abs());
    }

    #[test]
    fn lobpcg_recovers_torus_laplacian_spectrum() {
        let tg = TorusGrid::new(1.0, 1.0, 16, 16).unwrap();
        let exact = tg.laplacian_spectrum();
        let g: GridSpec = tg.into();
        let res = lobpcg(&g, |v| g.laplacian_apply(v), |v| g.poisson_solve(v), 6, 3, 1e-8, 200, 1).unwrap();
        assert!(res.converged);
        for (a, b) in res.values.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-6 * b, "{a} {b}");
        }
        assert!((res.values[0] - 4.0 * PI * PI).abs() < 1e-6);
    }

    #[test]
    fn lobpcg_on_shifted_operator_finds_negative_values() {
        let g: GridSpec = TorusGrid::new(1.0, 1.0, 16, 16).unwrap().into();
        let apply = |v: &Field| -> Result<Field> {
            let mut out = g.laplacian_apply(v)?;
            out.axpy(-50.0, v);
            g.project(&mut out);
            Ok(out)
        };
        let res = lobpcg(&g, apply, |v| g.poisson_solve(v), 5, 3, 1e-8, 300, 2).unwrap();
        let neg = res.values.iter().filter(|&&l| l < 0.0).count();
        assert_eq!(neg, 4, "{:?}", res.values);
    }
}
