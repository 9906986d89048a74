//! Radially symmetric solutions on the annulus by shooting.
//!
//! Solves `−(1/r)(r u')' = σ e^u` on `[a, b]` with `u(a) = u(b) = 0` and
//! `σ · 2π∫_a^b r e^u dr = ρ`. The unknowns are the initial slope `s = u'(a)`
//! and the multiplier `σ`; both matching conditions are driven to zero by
//! Newton's method using the variational equations, and the branch is
//! continued from `ρ → 0⁺` where the solution is `ρ/(3π)`-scaled linear Poisson data.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{config, Error, Result};
use crate::grid::{AnnulusGrid, Field};
use crate::ode::{self, Tolerances};

/// A radial solution sampled on a fine uniform mesh.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    /// `u'(r)`, used for Hermite interpolation.
    pub du: Vec<f64>,
    pub rho: f64,
    pub sigma: f64,
    /// Initial slope `u'(r_inner)` of the shooting solution.
    pub slope: f64,
    /// `u(r_outer)` from the final shot.
    pub outer_residual: f64,
    /// `σ·2π∫ r e^u dr / ρ − 1` on the fine mesh.
    pub mass_residual: f64,
    /// Max over mesh intervals of the integrated ODE defect divided by the interval length.
    pub ode_residual: f64,
}

/// Shooting options.
#[derive(Clone, Debug)]
pub struct RadialOptions {
    /// Start the Newton iteration at this `(slope, σ)` instead of continuing from small `ρ`.
    pub seed: Option<(f64, f64)>,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Halvings of a failed continuation step before giving up.
    pub max_restarts: usize,
    pub ode: Tolerances,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions {
            seed: None,
            newton_tol: 1e-12,
            max_newton: 30,
            max_restarts: 12,
            ode: Tolerances { rtol: 1e-12, atol: 1e-13, max_steps: 500_000 },
        }
    }
}

/// Solve on the branch continued from small `ρ`, sampled at `n` uniform radii.
pub fn solve_radial(r_inner: f64, r_outer: f64, rho: f64, n: usize) -> Result<RadialProfile> {
    solve_radial_with(r_inner, r_outer, rho, n, &RadialOptions::default())
}

pub fn solve_radial_with(
    r_inner: f64,
    r_outer: f64,
    rho: f64,
    n: usize,
    opts: &RadialOptions,
) -> Result<RadialProfile> {
    if !(r_inner > 0.0 && r_outer > r_inner && r_outer.is_finite()) {
        return config(format!("radii must satisfy 0 < r_inner < r_outer (got {r_inner}, {r_outer})"));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return config(format!("rho must be positive (got {rho})"));
    }
    if n < 1000 {
        return config(format!("radial mesh needs at least 1000 nodes (got {n})"));
    }
    let shooter = Shooter { a: r_inner, b: r_outer, tol: opts.ode };
    let (s, sigma) = match opts.seed {
        Some(seed) => shooter.newton(rho, seed, opts)?,
        None => shooter.continue_to(rho, opts)?,
    };
    shooter.profile(rho, s, sigma, n)
}

struct Shooter {
    a: f64,
    b: f64,
    tol: Tolerances,
}

/// State: `u, u', m` and their derivatives with respect to `s` and `σ`,
/// where `m(r) = 2π∫_a^r t e^u dt`.
fn rhs(r: f64, y: &[f64; 9], sigma: f64) -> [f64; 9] {
    let e = y[0].exp();
    let re = 2.0 * PI * r * e;
    [
        y[1],
        -y[1] / r - sigma * e,
        re,
        y[4],
        -y[4] / r - sigma * e * y[3],
        re * y[3],
        y[7],
        -y[7] / r - e - sigma * e * y[6],
        re * y[6],
    ]
}

impl Shooter {
    fn area(&self) -> f64 {
        PI * (self.b * self.b - self.a * self.a)
    }

    /// Slope at `a` of the Dirichlet solution of `−Δw = 1`.
    fn linear_slope(&self) -> f64 {
        let (a, b) = (self.a, self.b);
        let big_a = (b * b - a * a) / (4.0 * (b / a).ln());
        -a / 2.0 + big_a / a
    }

    fn shoot(&self, s: f64, sigma: f64) -> Result<[f64; 9]> {
        let y0 = [0.0, s, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let ys = ode::integrate(|r, y| rhs(r, y, sigma), self.a, y0, &[self.b], self.tol)?;
        Ok(ys[0])
    }

    fn newton(&self, rho: f64, start: (f64, f64), opts: &RadialOptions) -> Result<(f64, f64)> {
        let (mut s, mut sigma) = start;
        let mut trace = Vec::new();
        for it in 0..opts.max_newton {
            let y = self.shoot(s, sigma)?;
            let f1 = y[0];
            let f2 = sigma * y[2] / rho - 1.0;
            let res = f1.abs().max(f2.abs());
            trace.push(res);
            if res <= opts.newton_tol {
                return Ok((s, sigma));
            }
            let (j11, j12) = (y[3], y[6]);
            let (j21, j22) = (sigma * y[5] / rho, (y[2] + sigma * y[8]) / rho);
            let det = j11 * j22 - j12 * j21;
            if !(det.abs() > 1e-300 && det.is_finite()) {
                break;
            }
            let ds = (f1 * j22 - f2 * j12) / det;
            let dsig = (j11 * f2 - j21 * f1) / det;
            // Keep σ positive.
            let mut damp = 1.0;
            while sigma - damp * dsig <= 0.0 && damp > 1e-6 {
                damp *= 0.5;
            }
            s -= damp * ds;
            sigma -= damp * dsig;
            if it > 3 && res > 1e3 {
                break;
            }
        }
        Err(Error::NoConvergence {
            method: "radial shooting",
            iterations: trace.len(),
            residual: trace.last().copied().unwrap_or(f64::NAN),
            trace,
        })
    }

    /// Follow the branch from `ρ₀ = min(ρ, 0.1)` upward with secant predictions.
    fn continue_to(&self, rho: f64, opts: &RadialOptions) -> Result<(f64, f64)> {
        let mut r0 = rho.min(0.1);
        let sigma0 = r0 / self.area();
        let mut cur = self.newton(r0, (sigma0 * self.linear_slope(), sigma0), opts)?;
        let mut prev: Option<(f64, (f64, f64))> = None;
        let mut step = (rho - r0).min(0.5);
        let mut failures = 0;
        while r0 < rho {
            let target = (r0 + step).min(rho);
            let guess = match prev {
                Some((rp, (sp, gp))) => {
                    let f = (target - r0) / (r0 - rp);
                    (cur.0 + f * (cur.0 - sp), cur.1 + f * (cur.1 - gp))
                }
                None => (cur.0 * target / r0, cur.1 * target / r0),
            };
            match self.newton(target, guess, opts) {
                Ok(next) => {
                    prev = Some((r0, cur));
                    cur = next;
                    r0 = target;
                    step = (step * 1.5).min(2.0);
                    failures = 0;
                }
                Err(e) => {
                    failures += 1;
                    if failures > opts.max_restarts {
                        return Err(e);
                    }
                    step *= 0.5;
                }
            }
        }
        Ok(cur)
    }

    fn profile(&self, rho: f64, s: f64, sigma: f64, n: usize) -> Result<RadialProfile> {
        let h = (self.b - self.a) / (n - 1) as f64;
        let r: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { self.b } else { self.a + i as f64 * h })
            .collect();
        let y0 = [0.0, s, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let f = |t: f64, y: &[f64; 3]| {
            let e = y[0].exp();
            [y[1], -y[1] / t - sigma * e, 2.0 * PI * t * e]
        };
        let states = ode::integrate(f, self.a, [y0[0], y0[1], y0[2]], &r[1..], self.tol)?;
        let mut u = vec![0.0];
        let mut du = vec![s];
        for st in &states {
            u.push(st[0]);
            du.push(st[1]);
        }
        let outer_residual = u[n - 1];
        u[n - 1] = 0.0;
        // Hermite-corrected trapezoid for ∫ g with g = r e^u, g' = e^u (1 + r u').
        let g = |i: usize| r[i] * u[i].exp();
        let dg = |i: usize| u[i].exp() * (1.0 + r[i] * du[i]);
        let mut mass = 0.0;
        let mut ode_residual = 0.0f64;
        for i in 0..n - 1 {
            let hi = r[i + 1] - r[i];
            let integral = 0.5 * hi * (g(i) + g(i + 1)) + hi * hi / 12.0 * (dg(i) - dg(i + 1));
            mass += integral;
            let defect = r[i + 1] * du[i + 1] - r[i] * du[i] + sigma * integral;
            ode_residual = ode_residual.max((defect / hi).abs());
        }
        let mass_residual = sigma * 2.0 * PI * mass / rho - 1.0;
        Ok(RadialProfile {
            r,
            u,
            du,
            rho,
            sigma,
            slope: s,
            outer_residual,
            mass_residual,
            ode_residual,
        })
    }
}

impl RadialProfile {
    pub fn max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cubic Hermite interpolation of `u` at radius `x`.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        let (a, b) = (self.r[0], self.r[self.r.len() - 1]);
        let slack = 1e-12 * (b - a);
        if !(x >= a - slack && x <= b + slack) {
            return config(format!("radius {x} outside profile range [{a}, {b}]"));
        }
        let x = x.clamp(a, b);
        let n = self.r.len();
        let i = self.r.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
        let h = self.r[i + 1] - self.r[i];
        let t = (x - self.r[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.u[i] + h10 * h * self.du[i] + h01 * self.u[i + 1] + h11 * h * self.du[i + 1])
    }

    /// Write `r,u` rows followed by a `# rho=... sigma=...` footer.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "r,u")?;
        for (r, u) in self.r.iter().zip(&self.u) {
            writeln!(w, "{r:.16e},{u:.16e}")?;
        }
        writeln!(w, "# rho={:.16e} sigma={:.16e}", self.rho, self.sigma)?;
        Ok(())
    }

    /// Read `r,u` and the footer back (derivatives are rebuilt by finite differences).
    pub fn read_csv(reader: impl BufRead) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
        let mut r = Vec::new();
        let mut u = Vec::new();
        let mut footer = None;
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            if k == 0 {
                if line.trim() != "r,u" {
                    return Err(Error::Parse { line: lineno, message: "expected header `r,u`".into() });
                }
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut rho = None;
                let mut sigma = None;
                for kv in rest.split_whitespace() {
                    if let Some(v) = kv.strip_prefix("rho=") {
                        rho = v.parse().ok();
                    } else if let Some(v) = kv.strip_prefix("sigma=") {
                        sigma = v.parse().ok();
                    }
                }
                match (rho, sigma) {
                    (Some(a), Some(b)) => footer = Some((a, b)),
                    _ => return Err(Error::Parse { line: lineno, message: "bad footer".into() }),
                }
                continue;
            }
            let mut parts = line.split(',');
            let parse = |p: Option<&str>| -> Result<f64> {
                p.and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse { line: lineno, message: format!("bad row `{line}`") })
            };
            r.push(parse(parts.next())?);
            u.push(parse(parts.next())?);
        }
        let (rho, sigma) = footer.ok_or(Error::Parse { line: r.len() + 2, message: "missing footer".into() })?;
        Ok((r, u, rho, sigma))
    }
}

/// Interpolate a profile onto an annulus grid (constant in θ, exact zeros on both circles).
pub fn evaluate_on_grid(profile: &RadialProfile, grid: &AnnulusGrid) -> Result<Field> {
    let (a, b) = (profile.r[0], profile.r[profile.r.len() - 1]);
    let tol = 1e-12 * (b - a);
    if (grid.r_inner() - a).abs() > tol || (grid.r_outer() - b).abs() > tol {
        return config(format!(
            "grid radii [{}, {}] do not match profile range [{a}, {b}]",
            grid.r_inner(),
            grid.r_outer()
        ));
    }
    let nt = grid.n_theta();
    let mut out = Vec::with_capacity(grid.node_count());
    for (i, &r) in grid.radii().iter().enumerate() {
        let v = if i == 0 || i == grid.n_r() - 1 { 0.0 } else { profile.value_at(r)? };
        out.extend(std::iter::repeat_n(v, nt));
    }
    Ok(Field::from_vec(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rho_matches_scaled_linear_solution() {
        let rho = 0.1;
        let p = solve_radial(1.0, 2.0, rho, 2001).unwrap();
        let a_coef = 3.0 / (4.0 * 2f64.ln());
        let lin = |r: f64| (-(r * r) / 4.0 + a_coef * r.ln() + 0.25) / (3.0 * PI);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (r, u) in p.r.iter().zip(&p.u) {
            worst = worst.max((u - rho * lin(*r)).abs());
            scale = scale.max((rho * lin(*r)).abs());
        }
        assert!(worst / scale <= 0.01, "{}", worst / scale);
    }

    #[test]
    fn twelve_pi_profile_is_self_consistent() {
        let p = solve_radial(1.0, 2.0, 12.0 * PI, 2001).unwrap();
        assert!(p.sigma > 0.0);
        assert!(p.outer_residual.abs() <= 1e-10, "{}", p.outer_residual);
        assert!(p.mass_residual.abs() <= 1e-8, "{}", p.mass_residual);
        assert!(p.ode_residual <= 1e-8, "{}", p.ode_residual);
        assert_eq!(p.u[0], 0.0);
        assert!(p.max() > 0.3 && p.max() < 1.0, "{}", p.max());
    }

    #[test]
    fn seeded_solve_reproduces_branch() {
        let p = solve_radial(1.0, 2.0, 12.0 * PI, 1000).unwrap();
        let opts = RadialOptions { seed: Some((p.slope * 1.01, p.sigma * 0.99)), ..Default::default() };
        let q = solve_radial_with(1.0, 2.0, 12.0 * PI, 1000, &opts).unwrap();
        assert!((q.slope - p.slope).abs() < 1e-9 && (q.sigma - p.sigma).abs() < 1e-9);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(solve_radial(1.0, 2.0, -1.0, 2000), Err(Error::Config(_))));
        assert!(matches!(solve_radial(1.0, 2.0, 1.0, 10), Err(Error::Config(_))));
        assert!(matches!(solve_radial(2.0, 1.0, 1.0, 2000), Err(Error::Config(_))));
    }

    #[test]
    fn grid_interpolation_is_radial_with_exact_boundary() {
        let p = solve_radial(1.0, 2.0, 12.0 * PI, 1000).unwrap();
        let g = AnnulusGrid::new(1.0, 2.0, 33, 16).unwrap();
        let u = evaluate_on_grid(&p, &g).unwrap();
        for i in 0..g.n_r() {
            let row = &u[i * 16..(i + 1) * 16];
            assert!(row.iter().all(|&v| v == row[0]));
            if i == 0 || i == g.n_r() - 1 {
                assert_eq!(row[0], 0.0);
            } else {
                let avg = row.iter().sum::<f64>() / 16.0;
                assert!((avg - p.value_at(g.radii()[i]).unwrap()).abs() <= 1e-8);
            }
        }
        let other = AnnulusGrid::new(1.0, 3.0, 16, 16).unwrap();
        assert!(matches!(evaluate_on_grid(&p, &other), Err(Error::Config(_))));
    }

    #[test]
    fn csv_round_trip() {
        let p = solve_radial(1.0, 2.0, 4.0 * PI, 1000).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let (r, u, rho, sigma) = RadialProfile::read_csv(&buf[..]).unwrap();
        assert_eq!(r, p.r);
        assert_eq!(u, p.u);
        assert_eq!((rho, sigma), (p.rho, p.sigma));
        let truncated = &buf[..buf.len() / 2];
        assert!(matches!(RadialProfile::read_csv(truncated), Err(Error::Parse { .. })));
    }
}
