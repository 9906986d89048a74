//! Subcommand implementations. Each command resolves its settings, runs the
//! solvers, writes CSV sidecars into the output directory and returns the
//! result sections of its report.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use meanfield::diagnostics::{
    concentration_of_solution, continuation_trace, detect_concentration, moser_trudinger_check, morse_index_seeded,
    normalized_density_log, palais_smale_monitor, ConcentrationReport, SamplerConfig, PEAK_THRESHOLD,
};
use meanfield::grid::{AnnulusGrid, TorusGrid, TorusStencil};
use meanfield::minimax::{
    continuation_in_rho, minimize, run_minimax, saddle_refine_with, write_trace_csv, ContinuationConfig,
    CriticalPoint, DeformationConfig, FamilyConfig, LoopMeasure, MinimaxResult, NewtonConfig, PipelineConfig,
    Provenance,
};
use meanfield::radial::{evaluate_on_grid, solve_radial};
use meanfield::torus::{phase_center, solve_torus, PhaseAxis, TorusConfig, TorusProblem};
use meanfield::{io, Error, Field, GridSpec, ProblemSpec, Result};

use crate::config::Settings;
use crate::report::{num, now, Report};
use crate::{
    Command, Common, DiagnoseArgs, FamilyArgs, MinimaxArgs, MtArgs, RadialArgs, SolveArgs, SweepArgs, TorusArgs,
    EXIT_NO_CONVERGENCE, EXIT_OK,
};

/// Result of a completed command.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    /// Rendered report (also written to `report.txt`).
    pub text: String,
    pub out_dir: PathBuf,
}

/// What a command hands back to the driver.
struct Run {
    body: Report,
    code: i32,
    status: String,
}

impl Run {
    fn ok(body: Report) -> Self {
        Run { body, code: EXIT_OK, status: "ok".into() }
    }

    fn failed(mut body: Report, err: &Error) -> Self {
        body.section("failure").put("error", err);
        Run { body, code: crate::exit_code(err).max(EXIT_NO_CONVERGENCE), status: "no-convergence".into() }
    }
}

struct Ctx {
    settings: Settings,
    out: PathBuf,
    seed: u64,
    sidecars: Vec<(String, String)>,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let mut settings = Settings::load(common.config.as_deref())?;
        let out = PathBuf::from(settings.text("out", common.out.as_ref().map(|p| p.display().to_string()), "out")?);
        let seed = settings.seed(common.seed)?;
        Ok(Ctx { settings, out, seed, sidecars: Vec::new() })
    }

    fn path(&mut self, role: &str, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        self.sidecars.push((role.to_string(), name.to_string()));
        Ok(self.out.join(name))
    }

    fn save_field(&mut self, grid: &GridSpec, u: &Field) -> Result<()> {
        let path = self.path("solution", "solution.csv")?;
        io::save_field(grid, u, path)
    }

    fn save_peaks(&mut self, c: &ConcentrationReport) -> Result<()> {
        let path = self.path("peaks", "peaks.csv")?;
        let mut buf = Vec::new();
        c.write_csv(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    fn newton(&mut self, common: &Common) -> Result<NewtonConfig> {
        let tol = self.settings.real("tol", common.tol, Some(1e-9))?;
        if !(tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        Ok(NewtonConfig::with_tol(tol))
    }

    fn eigen_count(&mut self, common: &Common) -> Result<usize> {
        let k = self.settings.count("eigen-count", common.eigen_count, 4)?;
        if k == 0 {
            return Err(Error::Config("eigen-count must be at least 1".into()));
        }
        Ok(k)
    }

    fn grid(&mut self, common: &Common, default_domain: &str) -> Result<Arc<GridSpec>> {
        let s = &mut self.settings;
        let domain = s.text("domain", common.domain.clone(), default_domain)?;
        let grid: GridSpec = match domain.as_str() {
            "annulus" => {
                let a = s.real("r-inner", common.r_inner, Some(1.0))?;
                let b = s.real("r-outer", common.r_outer, Some(2.0))?;
                let nr = s.count("nr", common.nr, 64)?;
                let nt = s.count("ntheta", common.ntheta, 128)?;
                AnnulusGrid::new(a, b, nr, nt)?.into()
            }
            "torus" => {
                let lx = s.real("lx", common.lx, Some(1.0))?;
                let ly = s.real("ly", common.ly, Some(1.0))?;
                let nx = s.count("nx", common.nx, 64)?;
                let ny = s.count("ny", common.ny, 64)?;
                let stencil = match s.text("stencil", common.stencil.clone(), "spectral")?.as_str() {
                    "spectral" => TorusStencil::Spectral,
                    "five-point" => TorusStencil::FivePoint,
                    other => return Err(Error::Config(format!("unknown stencil `{other}`"))),
                };
                TorusGrid::with_stencil(lx, ly, nx, ny, stencil)?.into()
            }
            other => return Err(Error::Config(format!("unknown domain `{other}` (expected annulus or torus)"))),
        };
        Ok(Arc::new(grid))
    }

    fn coupling(&mut self, grid: &GridSpec, flag: Option<f64>) -> Result<f64> {
        let key = if grid.as_annulus().is_some() { "rho" } else { "c" };
        let other = if key == "rho" { "c" } else { "rho" };
        if self.settings.file_has(other) && !self.settings.file_has(key) {
            return self.settings.real(other, flag, None);
        }
        self.settings.real(key, flag, None)
    }

    fn family(&mut self, f: &FamilyArgs, grid: &GridSpec, axis: PhaseAxis) -> Result<(FamilyConfig, DeformationConfig)> {
        let s = &mut self.settings;
        let d = FamilyConfig::default();
        let dd = DeformationConfig::default();
        let family = FamilyConfig {
            n_radial: s.count("n-radial", f.n_radial, d.n_radial)?,
            n_angular: s.count("n-angular", f.n_angular, d.n_angular)?,
            lambda_max: s.real("lambda-max", f.lambda_max, Some(d.lambda_max))?,
            j_low: s.real_opt("j-low", f.j_low, None)?,
            delta_cont: s.real("delta-cont", f.delta_cont, Some(d.delta_cont))?,
            measure: if grid.as_torus().is_some() { LoopMeasure::Phase(axis) } else { LoopMeasure::CenterOfMass },
            ..d
        };
        let deformation = DeformationConfig {
            window_fraction: s.real("window-fraction", f.window_fraction, Some(dd.window_fraction))?,
            max_sweeps: s.count("max-sweeps", f.max_sweeps, dd.max_sweeps)?,
            grad_tol: s.real("grad-tol", f.grad_tol, Some(dd.grad_tol))?,
            ..dd
        };
        Ok((family, deformation))
    }
}

fn problem(grid: &Arc<GridSpec>, coupling: f64) -> Result<ProblemSpec> {
    match grid.as_annulus() {
        Some(_) => ProblemSpec::annulus(grid.clone(), coupling),
        None => ProblemSpec::torus(grid.clone(), coupling),
    }
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

fn put_critical(r: &mut Report, p: &ProblemSpec, cp: &CriticalPoint) {
    r.section("energy");
    for (k, v) in cp.energy.key_values() {
        r.put(k, num(v));
    }
    r.put("total_over_coupling", num(cp.energy.total / p.coupling()));
    r.section("solution")
        .put("residual_max", num(cp.residual_max))
        .put("dual_norm", num(cp.dual_norm))
        .put("verified_dual_norm", num(cp.verified_dual_norm))
        .put("newton_steps", cp.newton_steps)
        .put("max_u", num(cp.field.max()))
        .put("min_u", num(cp.field.min()))
        .put("provenance", &cp.provenance.source)
        .put("provenance_seed", cp.provenance.seed);
    if let Some(m) = &cp.morse {
        r.put("morse_index", m.morse_index)
            .put("eigenvalues", list(&m.eigenvalues))
            .put("eigen_residuals", list(&m.residuals))
            .put("tol_eig", num(m.tol_eig));
    }
    if let Some(c) = &cp.concentration {
        put_concentration(r, c);
    }
}

fn put_concentration(r: &mut Report, c: &ConcentrationReport) {
    r.section("concentration")
        .put("radius", num(c.radius))
        .put("peaks", c.peaks.len())
        .put("total_mass", num(c.total_mass))
        .put("peak_to_mean", num(c.peak_to_mean))
        .put("blow_up", c.blow_up)
        .put("ratios_8pi", list(&c.peaks.iter().map(|p| p.ratio_8pi).collect::<Vec<_>>()))
        .put("near_boundary", c.peaks.iter().any(|p| p.near_boundary));
}

fn put_minimax(r: &mut Report, m: &MinimaxResult) {
    let ps = palais_smale_monitor(&m.trace, 1e4);
    r.section("deformation")
        .put("alpha_estimate", num(m.alpha_estimate))
        .put("sweeps", m.trace.len().saturating_sub(1))
        .put("converged", m.converged)
        .put("pinned", m.pinned)
        .put("candidates", m.candidates.len())
        .put("seed_grad_norm", num(m.seed_grad_norm))
        .put("argmax", m.argmax)
        .put("argmax_param", format!("{},{}", num(m.argmax_param.0), num(m.argmax_param.1)))
        .put("lambda_end", num(m.family.lambda_end))
        .put("j_low", num(m.family.j_low))
        .put("winding_all_sweeps", m.trace.iter().all(|t| t.winding == 1))
        .put("max_dirichlet", num(ps.max_dirichlet))
        .put("palais_smale_pass", ps.pass)
        .put("compactness_warning", ps.compactness_warning);
}

fn start_field(ctx: &mut Ctx, p: &ProblemSpec, start: &str, newton: &NewtonConfig, fam: Option<&FamilyArgs>) -> Result<Field> {
    let grid = p.grid();
    match start {
        "zero" => Ok(grid.zeros()),
        "radial" => {
            let a = grid.as_annulus().ok_or_else(|| Error::Config("radial start needs the annulus".into()))?;
            let prof = solve_radial(a.r_inner(), a.r_outer(), p.coupling(), 4000)?;
            evaluate_on_grid(&prof, a)
        }
        "minimax" => {
            let default = FamilyArgs::default();
            let (family, deformation) = ctx.family(fam.unwrap_or(&default), grid, PhaseAxis::X)?;
            let cfg = PipelineConfig { family, deformation, newton: newton.clone(), eigen_count: 1, seed: ctx.seed };
            Ok(run_minimax(p, &cfg)?.critical?.field)
        }
        path if Path::new(path).is_file() => io::load_field(grid, Path::new(path)),
        other => Err(Error::Config(format!("start must be zero, radial, minimax or an existing field file (got `{other}`)"))),
    }
}

fn solve(ctx: &mut Ctx, a: &SolveArgs) -> Result<Run> {
    let grid = ctx.grid(&a.common, "annulus")?;
    let coupling = ctx.coupling(&grid, a.rho)?;
    let newton = ctx.newton(&a.common)?;
    let k = ctx.eigen_count(&a.common)?;
    let start = ctx.settings.text("start", a.start.clone(), "zero")?;
    let max_descent = ctx.settings.count("max-descent", a.max_descent, 2000)?;
    let p = problem(&grid, coupling)?;
    let u0 = start_field(ctx, &p, &start, &newton, None)?;
    let coercive = coupling < 8.0 * PI || (grid.as_torus().is_some() && coupling <= 8.0 * PI);
    let mut body = Report::new();
    body.section("method").put("method", if coercive { "minimize" } else { "newton" });
    let result = if coercive { minimize(&p, &u0, &newton, max_descent) } else { saddle_refine_with(&p, &u0, &newton) };
    let mut cp = match result {
        Ok(cp) => cp,
        Err(e) => return Ok(Run::failed(body, &e)),
    };
    cp.provenance = Provenance { source: format!("solve from {start}"), continuation_step: None, seed: ctx.seed };
    cp.annotate(&p, k, ctx.seed)?;
    ctx.save_field(&grid, &cp.field)?;
    if let Some(c) = &cp.concentration {
        ctx.save_peaks(c)?;
    }
    put_critical(&mut body, &p, &cp);
    Ok(Run::ok(body))
}

fn radial(ctx: &mut Ctx, a: &RadialArgs) -> Result<Run> {
    let grid = ctx.grid(&a.common, "annulus")?;
    let ag = grid.as_annulus().ok_or_else(|| Error::Config("radial needs the annulus".into()))?;
    let rho = ctx.settings.real("rho", a.rho, None)?;
    let n = ctx.settings.count("n", a.n, 4000)?;
    let mut body = Report::new();
    let prof = match solve_radial(ag.r_inner(), ag.r_outer(), rho, n) {
        Ok(p) => p,
        Err(e @ Error::NoConvergence { .. }) => return Ok(Run::failed(body, &e)),
        Err(e) => return Err(e),
    };
    let path = ctx.path("profile", "radial.csv")?;
    let mut buf = Vec::new();
    prof.write_csv(&mut buf)?;
    fs::write(path, buf)?;
    let u = evaluate_on_grid(&prof, ag)?;
    let p = problem(&grid, rho)?;
    let e = p.energy(&u)?;
    ctx.save_field(&grid, &u)?;
    body.section("profile")
        .put("sigma", num(prof.sigma))
        .put("slope", num(prof.slope))
        .put("max_u", num(prof.max()))
        .put("outer_residual", num(prof.outer_residual))
        .put("mass_residual", num(prof.mass_residual))
        .put("ode_residual", num(prof.ode_residual))
        .put("nodes", prof.r.len());
    body.section("on_grid")
        .put("energy_total", num(e.total))
        .put("energy_over_rho", num(e.total / rho))
        .put("dual_norm", num(p.gradient(&u)?.dual_norm));
    Ok(Run::ok(body))
}

fn minimax(ctx: &mut Ctx, a: &MinimaxArgs) -> Result<Run> {
    let grid = ctx.grid(&a.common, "annulus")?;
    let coupling = ctx.coupling(&grid, a.rho)?;
    let newton = ctx.newton(&a.common)?;
    let eigen_count = ctx.eigen_count(&a.common)?;
    let (family, deformation) = ctx.family(&a.family, &grid, PhaseAxis::X)?;
    let p = problem(&grid, coupling)?;
    let cfg = PipelineConfig { family, deformation, newton, eigen_count, seed: ctx.seed };
    let out = run_minimax(&p, &cfg)?;
    let mut body = Report::new();
    let trace = ctx.path("trace", "trace.csv")?;
    let mut buf = Vec::new();
    write_trace_csv(&out.minimax.trace, &mut buf)?;
    fs::write(trace, buf)?;
    put_minimax(&mut body, &out.minimax);
    match out.critical {
        Ok(cp) => {
            ctx.save_field(&grid, &cp.field)?;
            if let Some(c) = &cp.concentration {
                ctx.save_peaks(c)?;
            }
            put_critical(&mut body, &p, &cp);
            Ok(Run::ok(body))
        }
        Err(e) => {
            ctx.save_field(&grid, &out.minimax.seed_field)?;
            Ok(Run::failed(body, &e))
        }
    }
}

fn torus(ctx: &mut Ctx, a: &TorusArgs) -> Result<Run> {
    let grid = ctx.grid(&a.common, "torus")?;
    let tg = grid.as_torus().ok_or_else(|| Error::Config("the torus command needs domain = torus".into()))?.clone();
    let c = ctx.coupling(&grid, a.c)?;
    let newton = ctx.newton(&a.common)?;
    let eigen_count = ctx.eigen_count(&a.common)?;
    let axis = match ctx.settings.text("axis", a.axis.clone(), "x")?.as_str() {
        "x" => PhaseAxis::X,
        "y" => PhaseAxis::Y,
        other => return Err(Error::Config(format!("axis must be x or y (got `{other}`)"))),
    };
    let (family, deformation) = ctx.family(&a.family, &grid, axis)?;
    let tp = TorusProblem::new(tg, c)?;
    let cfg = TorusConfig {
        pipeline: PipelineConfig { family, deformation, newton, eigen_count, seed: ctx.seed },
        ..TorusConfig::default()
    };
    let mut body = Report::new();
    let sol = match solve_torus(&tp, &cfg) {
        Ok(s) => s,
        Err(e @ (Error::NoConvergence { .. } | Error::Numeric(_))) => return Ok(Run::failed(body, &e)),
        Err(e) => return Err(e),
    };
    if let Some(m) = &sol.minimax {
        let trace = ctx.path("trace", "trace.csv")?;
        let mut buf = Vec::new();
        write_trace_csv(&m.trace, &mut buf)?;
        fs::write(trace, buf)?;
        put_minimax(&mut body, m);
    }
    ctx.save_field(&grid, &sol.critical.field)?;
    if let Some(cr) = &sol.critical.concentration {
        ctx.save_peaks(cr)?;
    }
    let phase = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), num);
    body.section("torus")
        .put("c", num(c))
        .put("osc", num(sol.oscillation))
        .put("phase_x", phase(sol.phase.phi_x))
        .put("phase_y", phase(sol.phase.phi_y))
        .put("phase_mag_x", num(sol.phase.m_x))
        .put("phase_mag_y", num(sol.phase.m_y))
        .put("mass", num(sol.mass));
    put_critical(&mut body, tp.spec(), &sol.critical);
    Ok(Run::ok(body))
}

fn sweep(ctx: &mut Ctx, a: &SweepArgs) -> Result<Run> {
    let grid = ctx.grid(&a.common, "annulus")?;
    let from = ctx.settings.real("from", a.from, None)?;
    let to = ctx.settings.real("to", a.to, None)?;
    let steps = ctx.settings.count("steps", a.steps, 8)?;
    let default_start = if grid.as_annulus().is_some() { "radial" } else { "minimax" };
    let start = ctx.settings.text("start", a.start.clone(), default_start)?;
    let cap = ctx.settings.real("cap", a.cap, Some(1e4))?;
    let newton = ctx.newton(&a.common)?;
    let k = ctx.eigen_count(&a.common)?;
    let p = problem(&grid, from)?;
    let mut body = Report::new();
    let u0 = match start_field(ctx, &p, &start, &newton, Some(&a.family)) {
        Ok(u) => u,
        Err(e @ Error::NoConvergence { .. }) => return Ok(Run::failed(body, &e)),
        Err(e) => return Err(e),
    };
    let cfg = ContinuationConfig { newton, dirichlet_cap: cap, seed: ctx.seed, ..ContinuationConfig::default() };
    let res = match continuation_in_rho(&p, &u0, from, to, steps, &cfg) {
        Ok(r) => r,
        Err(e @ Error::NoConvergence { .. }) => return Ok(Run::failed(body, &e)),
        Err(e) => return Err(e),
    };
    let path = ctx.path("branch", "sweep.csv")?;
    let name = if grid.as_annulus().is_some() { "rho" } else { "c" };
    let mut csv = format!("{name},energy,energy_over_{name},grad_norm_sq,dual_norm,morse_index\n");
    let mut ratios = Vec::new();
    for (rho, cp) in res.rhos.iter().zip(&res.points) {
        let q = p.with_coupling(*rho)?;
        let idx = morse_index_seeded(&q, &cp.field, k, ctx.seed)?.morse_index;
        ratios.push(cp.energy.total / rho);
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            rho,
            cp.energy.total,
            cp.energy.total / rho,
            2.0 * cp.energy.dirichlet,
            cp.dual_norm,
            idx
        ));
    }
    fs::write(path, csv)?;
    let worst = ratios.windows(2).map(|w| (w[1] - w[0]) / w[0].abs().max(1e-300)).fold(f64::NEG_INFINITY, f64::max);
    let duals: Vec<f64> = res.points.iter().map(|c| c.dual_norm).collect();
    let ps = palais_smale_monitor(&continuation_trace(&res.dirichlet, &duals), cap);
    body.section("branch")
        .put("points", res.points.len())
        .put("complete", res.complete)
        .put("max_relative_increase_energy_over_coupling", if ratios.len() > 1 { num(worst) } else { "none".into() })
        .put("max_dirichlet", num(ps.max_dirichlet))
        .put("palais_smale_pass", ps.pass)
        .put("compactness_warning", ps.compactness_warning);
    if let Some(last) = res.points.last() {
        ctx.save_field(&grid, &last.field)?;
    }
    if !res.complete {
        body.section("failure").put("error", res.failure.as_deref().unwrap_or("incomplete"));
        return Ok(Run { body, code: EXIT_NO_CONVERGENCE, status: "no-convergence".into() });
    }
    Ok(Run::ok(body))
}

fn mt_check(ctx: &mut Ctx, a: &MtArgs) -> Result<Run> {
    let grid = ctx.grid(&a.common, "annulus")?;
    let d = SamplerConfig::default();
    let coefficient = ctx.settings.real("coefficient", a.coefficient, Some(d.coefficient))?;
    let which = ctx.settings.text("sweep", a.sweep.clone(), "all")?;
    let samples = ctx.settings.count("samples", a.samples, 8)?;
    let lambdas = ctx.settings.list("lambdas", a.lambdas.clone(), &d.lambdas)?;
    let scales = ctx.settings.list("scales", a.scales.clone(), &d.scales)?;
    let floor = ctx.settings.real("floor", a.floor, Some(d.floor))?;
    let (n, lambdas) = match which.as_str() {
        "bubbles" => (0, lambdas),
        "random" => (samples, Vec::new()),
        "all" => (samples, lambdas),
        other => return Err(Error::Config(format!("sweep must be bubbles, random or all (got `{other}`)"))),
    };
    if n == 0 && lambdas.is_empty() {
        return Err(Error::Config("mt-check needs at least one sample".into()));
    }
    let sampler = SamplerConfig { coefficient, lambdas, scales, seed: ctx.seed, floor, ..d };
    let rep = moser_trudinger_check(&grid, &sampler, n)?;
    let path = ctx.path("samples", "mt.csv")?;
    let mut csv = String::from("descriptor,value\n");
    for s in &rep.samples {
        csv.push_str(&format!("{},{:.16e}\n", s.descriptor, s.value));
    }
    fs::write(path, csv)?;
    let mut body = Report::new();
    body.section("moser_trudinger")
        .put("coefficient", num(rep.coefficient))
        .put("sample_count", rep.sample_count)
        .put("min_value", num(rep.min_value))
        .put("argmin", &rep.argmin)
        .put("floor", num(rep.floor))
        .put("violation", rep.violation);
    Ok(Run::ok(body))
}

fn diagnose(ctx: &mut Ctx, a: &DiagnoseArgs) -> Result<Run> {
    let path = ctx
        .settings
        .text_opt("field", a.field.as_ref().map(|p| p.display().to_string()))?
        .ok_or_else(|| Error::Config("diagnose needs --field".into()))?;
    let c = &a.common;
    let explicit = [
        c.domain.is_some(),
        c.nr.is_some(),
        c.ntheta.is_some(),
        c.nx.is_some(),
        c.ny.is_some(),
        c.r_inner.is_some(),
        c.r_outer.is_some(),
        c.lx.is_some(),
        c.ly.is_some(),
    ]
    .iter()
    .any(|&b| b)
        || ["domain", "nr", "ntheta", "nx", "ny", "r-inner", "r-outer", "lx", "ly"].iter().any(|k| ctx.settings.file_has(k));
    let (grid, u) = if explicit {
        let grid = ctx.grid(c, "annulus")?;
        let u = io::load_field(&grid, &path)?;
        (grid, u)
    } else {
        let (g, u) = io::load_field_any(&path)?;
        (Arc::new(g), u)
    };
    let coupling = ctx.coupling(&grid, a.rho)?;
    let k = ctx.eigen_count(c)?;
    let radius = ctx.settings.real_opt("radius", a.radius, None)?;
    let threshold = ctx.settings.real("threshold", a.threshold, Some(PEAK_THRESHOLD))?;
    let p = problem(&grid, coupling)?;
    let e = p.energy(&u)?;
    let g = p.gradient(&u)?;
    let mut body = Report::new();
    body.section("energy");
    for (key, v) in e.key_values() {
        body.put(key, num(v));
    }
    body.section("field").put("nodes", u.len()).put("max_u", num(u.max())).put("min_u", num(u.min()));
    body.put("residual_max", num(p.residual(&u)?.max_abs())).put("dual_norm", num(g.dual_norm));
    if let Some(tg) = grid.as_torus() {
        let ph = phase_center(&TorusProblem::new(tg.clone(), coupling)?, &u)?;
        let phase = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), num);
        body.put("osc", num(u.oscillation()))
            .put("phase_x", phase(ph.phi_x))
            .put("phase_y", phase(ph.phi_y))
            .put("mass", num(p.mass(&u)?.log_mass.exp()));
    }
    let conc = match radius {
        None => concentration_of_solution(&p, &u)?,
        Some(r) => detect_concentration(&grid, &normalized_density_log(&p, &u)?, r, threshold)?,
    };
    put_concentration(&mut body, &conc);
    ctx.save_peaks(&conc)?;
    match morse_index_seeded(&p, &u, k, ctx.seed) {
        Ok(m) => {
            body.section("spectrum")
                .put("morse_index", m.morse_index)
                .put("eigenvalues", list(&m.eigenvalues))
                .put("eigen_residuals", list(&m.residuals))
                .put("tol_eig", num(m.tol_eig));
            Ok(Run::ok(body))
        }
        Err(e @ Error::NoConvergence { .. }) => Ok(Run::failed(body, &e)),
        Err(e) => Err(e),
    }
}

/// Run a parsed command: resolve settings, execute, write `report.txt`.
pub fn execute(cmd: Command) -> Result<Outcome> {
    let (name, common) = match &cmd {
        Command::Solve(a) => ("solve", &a.common),
        Command::Radial(a) => ("radial", &a.common),
        Command::Minimax(a) => ("minimax", &a.common),
        Command::Torus(a) => ("torus", &a.common),
        Command::Sweep(a) => ("sweep", &a.common),
        Command::MtCheck(a) => ("mt-check", &a.common),
        Command::Diagnose(a) => ("diagnose", &a.common),
    };
    let mut ctx = Ctx::new(common)?;
    let run = match &cmd {
        Command::Solve(a) => solve(&mut ctx, a),
        Command::Radial(a) => radial(&mut ctx, a),
        Command::Minimax(a) => minimax(&mut ctx, a),
        Command::Torus(a) => torus(&mut ctx, a),
        Command::Sweep(a) => sweep(&mut ctx, a),
        Command::MtCheck(a) => mt_check(&mut ctx, a),
        Command::Diagnose(a) => diagnose(&mut ctx, a),
    }?;
    let effective = ctx.settings.finish()?;
    let mut report = Report::new();
    report.section("run").put("command", name).put("version", env!("CARGO_PKG_VERSION")).put("status", &run.status);
    report.section("config");
    for (k, v) in &effective {
        report.put(k, v);
    }
    if !ctx.sidecars.is_empty() {
        report.section("files");
        for (role, file) in &ctx.sidecars {
            report.put(role, file);
        }
    }
    let mut text = report.render(Some(now()));
    let body = run.body.render(None);
    if !body.is_empty() {
        text.push('\n');
        text.push_str(&body);
    }
    fs::create_dir_all(&ctx.out)?;
    fs::write(ctx.out.join("report.txt"), &text)?;
    Ok(Outcome { code: run.code, text, out_dir: ctx.out })
}
