//! The `hdg` binary: artifacts and exit codes.

use std::path::Path;
use std::process::Command;

fn hdg(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_hdg"))
        .args(args)
        .env("HDG_OUTPUT_DIR", out)
        .output()
        .expect("hdg runs");
    let text = String::from_utf8_lossy(&o.stdout).to_string() + &String::from_utf8_lossy(&o.stderr);
    (o.status.code().unwrap_or(-1), text)
}

fn tempdir(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("hdg-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn run_writes_fields_and_summary() {
    let d = tempdir("run");
    let (code, text) = hdg(&["run", "--case", "wang", "--regime", "stokes", "--elem", "tri", "--nx", "4", "-k", "2"], &d);
    assert_eq!(code, 0, "{text}");
    let vtk = std::fs::read_to_string(d.join("fields.vtk")).unwrap();
    for key in ["UNSTRUCTURED_GRID", "VECTORS u double", "VECTORS ustar double", "SCALARS p", "SCALARS L_11", "SCALARS L_12"] {
        assert!(vtk.contains(key), "{key}");
    }
    let summary = std::fs::read_to_string(d.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 2);
    let head: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    let col = |n: &str| row[head.iter().position(|h| *h == n).unwrap()];
    assert!(col("err_u").parse::<f64>().unwrap().is_finite());
    assert_eq!(col("case"), "wang");
}

#[test]
fn poiseuille_outflow_is_exact() {
    let d = tempdir("pois");
    let (code, text) = hdg(
        &["run", "--case", "poiseuille", "--regime", "navier_stokes", "--outflow", "outflow", "--elem", "quad", "--nx", "10", "--ny", "10", "-k", "2", "--no-vtk"],
        &d,
    );
    assert_eq!(code, 0, "{text}");
    let summary = std::fs::read_to_string(d.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    let i = lines[0].split(',').position(|h| h == "linf_u").unwrap();
    let linf: f64 = lines[1].split(',').nth(i).unwrap().parse().unwrap();
    assert!(linf <= 1e-9, "{linf:e}");
}

#[test]
fn usage_errors_exit_with_one() {
    let d = tempdir("usage");
    assert_eq!(hdg(&["run", "--regime", "stokes"], &d).0, 1);
    assert_eq!(hdg(&["run", "--case", "nope", "--regime", "stokes"], &d).0, 1);
    assert_eq!(hdg(&["frobnicate"], &d).0, 1);
    let (code, text) = hdg(&["converge", "--case", "wang", "--regime", "stokes", "--nx-list", "4"], &d);
    assert_eq!(code, 1);
    assert!(text.contains("at least 3 meshes"), "{text}");
    assert_eq!(hdg(&["run", "--case", "wang", "--regime", "stokes", "--mesh", "m.txt", "--nx", "4"], &d).0, 1);
}

#[test]
fn config_file_with_flag_override() {
    let d = tempdir("config");
    let cfg = d.join("run.cfg");
    std::fs::write(&cfg, "case = shear\nregime = stokes\nelement = quad\ndegree = 2\nnx = 2\nkappa = 5\n").unwrap();
    let (code, text) = hdg(&["run", "--config", cfg.to_str().unwrap(), "--elem", "tri", "--no-vtk"], &d);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("triangle"), "{text}");
    std::fs::write(&cfg, "case = shear\nregime = stokes\nbogus = 1\n").unwrap();
    assert_eq!(hdg(&["run", "--config", cfg.to_str().unwrap()], &d).0, 1);
}

#[test]
fn check_reports_structure() {
    let d = tempdir("check");
    let (code, text) = hdg(&["check", "--case", "wang", "--regime", "stokes", "--nx", "2", "-k", "1", "--layout", "all_dirichlet"], &d);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("H = G") && text.contains("symmetry"));
    // Oseen: symmetry is not applicable.
    let (code, text) = hdg(&["check", "--case", "shear", "--regime", "oseen", "--nx", "2", "-k", "2"], &d);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("n/a"));
    // Almost no stabilization against a strong convection field.
    let (code, text) = hdg(
        &["check", "--case", "kovasznay", "--regime", "oseen", "--nx", "4", "-k", "1", "--kappa", "1e-6", "--beta", "0"],
        &d,
    );
    assert_eq!(code, 3, "{text}");
}

#[test]
fn converge_and_sweep_are_reproducible() {
    let d = tempdir("conv");
    let args = ["converge", "--case", "wang", "--regime", "stokes", "--degrees", "1", "--nx-list", "2,4,8"];
    assert_eq!(hdg(&args, &d).0, 0);
    let first = std::fs::read(d.join("convergence.csv")).unwrap();
    assert_eq!(hdg(&args, &d).0, 0);
    assert_eq!(first, std::fs::read(d.join("convergence.csv")).unwrap());
    let svg = std::fs::read_to_string(d.join("convergence.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    let (code, text) = hdg(
        &["sweep", "--case", "wang", "--regime", "stokes", "-k", "1", "--nx", "4", "--parameter", "kappa", "--values", "1,10"],
        &d,
    );
    assert_eq!(code, 0, "{text}");
    let csv = std::fs::read_to_string(d.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("kappa,"));
}

#[test]
fn dump_matrix_writes_coordinates() {
    let d = tempdir("dump");
    let (code, text) = hdg(&["run", "--case", "shear", "--regime", "stokes", "--nx", "2", "-k", "1", "--dump-matrix", "--no-vtk", "--no-csv"], &d);
    assert_eq!(code, 0, "{text}");
    let coo = std::fs::read_to_string(d.join("matrix.coo")).unwrap();
    let mut lines = coo.lines();
    let head: Vec<usize> = lines.next().unwrap().trim_start_matches('%').split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(lines.count(), head[2]);
}
