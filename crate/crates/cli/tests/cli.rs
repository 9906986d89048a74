use std::fs;
use std::path::Path;

use meanfield_cli::{run, strip_timestamp, EXIT_CONFIG, EXIT_OK};
use tempfile::TempDir;

fn meanfield(args: &[&str], out: &Path) -> (i32, String) {
    let mut argv = vec!["meanfield".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.push("--out".into());
    argv.push(out.display().to_string());
    let code = run(argv);
    let report = fs::read_to_string(out.join("report.txt")).unwrap_or_default();
    (code, report)
}

fn value<'a>(report: &'a str, key: &str) -> Option<&'a str> {
    report.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix(" = "))
}

#[test]
fn minimax_at_twelve_pi_reports_a_saddle() {
    let dir = TempDir::new().unwrap();
    let args = ["minimax", "--domain", "annulus", "--r-inner", "1", "--r-outer", "2", "--nr", "64", "--ntheta", "128", "--rho", "37.699"];
    let (code, report) = meanfield(&args, dir.path());
    assert_eq!(code, EXIT_OK, "{report}");
    assert_eq!(value(&report, "status"), Some("ok"));
    assert!(value(&report, "morse_index").unwrap().parse::<usize>().unwrap() >= 1);
    for f in ["trace.csv", "solution.csv", "peaks.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("sweep,max_energy,max_grad_norm,dirichlet_bound\n"));
}

#[test]
fn mt_check_bubble_sweep_reports_a_finite_floor() {
    let dir = TempDir::new().unwrap();
    let (code, report) = meanfield(&["mt-check", "--coefficient", "25.1327", "--sweep", "bubbles", "--nr", "32", "--ntheta", "64"], dir.path());
    assert_eq!(code, EXIT_OK);
    assert!(value(&report, "min_value").unwrap().parse::<f64>().unwrap().is_finite());
    assert_eq!(value(&report, "violation"), Some("false"));
    let csv = fs::read_to_string(dir.path().join("mt.csv")).unwrap();
    assert!(csv.starts_with("descriptor,value\n") && csv.lines().count() > 2);
}

#[test]
fn subcritical_solve_from_zero_is_a_minimizer() {
    let dir = TempDir::new().unwrap();
    let (code, report) = meanfield(&["solve", "--start", "zero", "--rho", "12.566", "--nr", "32", "--ntheta", "64"], dir.path());
    assert_eq!(code, EXIT_OK);
    assert_eq!(value(&report, "method"), Some("minimize"));
    assert_eq!(value(&report, "morse_index"), Some("0"));
    for key in ["dirichlet", "log_mass", "linear", "total"] {
        assert!(value(&report, key).is_some(), "{key}");
    }
}

#[test]
fn saved_fields_can_be_diagnosed() {
    let dir = TempDir::new().unwrap();
    let (code, _) = meanfield(&["radial", "--rho", "12pi", "--nr", "32", "--ntheta", "64"], dir.path());
    assert_eq!(code, EXIT_OK);
    let field = dir.path().join("solution.csv");
    let second = TempDir::new().unwrap();
    let (code, report) = meanfield(&["diagnose", "--field", field.to_str().unwrap(), "--rho", "12pi"], second.path());
    assert_eq!(code, EXIT_OK, "{report}");
    assert_eq!(value(&report, "morse_index"), Some("0"));
    // Explicit geometry that disagrees with the file header.
    let (code, _) = meanfield(&["diagnose", "--field", field.to_str().unwrap(), "--rho", "12pi", "--nr", "64"], second.path());
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn usage_and_configuration_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(["meanfield", "solve", "--no-such-flag"]), EXIT_CONFIG);
    assert_eq!(run(["meanfield", "frobnicate"]), EXIT_CONFIG);
    let (code, _) = meanfield(&["solve", "--rho", "twelve"], dir.path());
    assert_eq!(code, EXIT_CONFIG);
    let (code, _) = meanfield(&["solve", "--rho", "5", "--domain", "sphere"], dir.path());
    assert_eq!(code, EXIT_CONFIG);
    let (code, _) = meanfield(&["solve", "--rho", "5", "--start", "missing.csv"], dir.path());
    assert_eq!(code, EXIT_CONFIG);

    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "rho = 5\nunknown_key = 1\n").unwrap();
    let (code, _) = meanfield(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, EXIT_CONFIG);
    fs::write(&cfg, "rho 5\n").unwrap();
    let (code, _) = meanfield(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn flags_override_the_config_file_and_pi_suffixes_parse() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# subcritical\nrho = 4pi\nnr = 16\nntheta = 32\n").unwrap();
    let (code, report) = meanfield(&["solve", "--config", cfg.to_str().unwrap(), "--ntheta", "48"], dir.path());
    assert_eq!(code, EXIT_OK, "{report}");
    assert_eq!(value(&report, "rho"), Some(format!("{}", 4.0 * std::f64::consts::PI).as_str()));
    assert_eq!(value(&report, "nr"), Some("16"));
    assert_eq!(value(&report, "ntheta"), Some("48"));
    assert_eq!(value(&report, "seed"), Some("0"));
}

#[test]
fn torus_reports_phase_and_oscillation() {
    let dir = TempDir::new().unwrap();
    let (code, report) = meanfield(&["torus", "--c", "30", "--nx", "32", "--ny", "32"], dir.path());
    assert_eq!(code, EXIT_OK, "{report}");
    for key in ["c", "osc", "phase_x", "phase_y", "mass"] {
        assert!(value(&report, key).is_some(), "{key}");
    }
    assert!(value(&report, "osc").unwrap().parse::<f64>().unwrap() > 0.1);
    let header = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert!(header.starts_with("# torus lx=1 ly=1 nx=32 ny=32"));
}

#[test]
fn sweep_writes_the_branch_table() {
    let dir = TempDir::new().unwrap();
    let (code, report) = meanfield(&["sweep", "--from", "10pi", "--to", "12pi", "--steps", "2", "--nr", "32", "--ntheta", "64"], dir.path());
    assert_eq!(code, EXIT_OK, "{report}");
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("rho,energy,energy_over_rho,grad_norm_sq,dual_norm,morse_index\n"));
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(value(&report, "palais_smale_pass"), Some("true"));
}

#[test]
fn repeated_runs_are_identical_apart_from_the_timestamp() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["minimax", "--rho", "12pi", "--nr", "32", "--ntheta", "64", "--seed", "7"];
    let (_, ra) = meanfield(&args, a.path());
    let (_, rb) = meanfield(&args, b.path());
    let norm = |r: &str, d: &TempDir| strip_timestamp(r).replace(&d.path().display().to_string(), "OUT");
    assert_eq!(norm(&ra, &a), norm(&rb, &b));
    assert!(ra.contains("timestamp = "));
    assert_eq!(fs::read(a.path().join("solution.csv")).unwrap(), fs::read(b.path().join("solution.csv")).unwrap());
}
