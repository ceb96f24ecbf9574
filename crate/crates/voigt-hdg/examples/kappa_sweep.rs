//! Sensitivity of the Wang Stokes errors to the diffusive stabilization.
//!
//! cargo run --release --example kappa_sweep [out_dir]

use voigt_hdg::flow_solvers::{Regime, SolverOptions};
use voigt_hdg::output::{sweep_csv, sweep_svg};
use voigt_hdg::refelem::ElementType;
use voigt_hdg::verification::{sensitivity_sweep, sweep_argmin, AnalyticCase, SweepParameter};

fn main() -> voigt_hdg::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let case = AnalyticCase::wang();
    let kappas = [1e-2, 1e-1, 1.0, 3.0, 10.0, 1e2, 1e3];
    for (k, nx) in [(1, 16), (2, 8)] {
        let mesh = case.mesh(ElementType::Triangle, k, nx, nx, case.default_layout())?;
        let rows = sensitivity_sweep(&case, Regime::Stokes, &mesh, SweepParameter::Kappa, &kappas, SolverOptions::default());
        println!("k = {k}, {nx} x {nx} cells");
        for r in &rows {
            if let Some(e) = &r.errors {
                println!("  kappa {:>7}  u {:.3e}  L {:.3e}  p {:.3e}", r.value, e.u, e.l, e.p);
            }
        }
        if let Some((v, e)) = sweep_argmin(&rows, |e| e.u) {
            println!("  smallest u error {e:.3e} at kappa = {v}");
        }
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("kappa_k{k}.csv")), sweep_csv(SweepParameter::Kappa, &rows))?;
            std::fs::write(
                dir.join(format!("kappa_k{k}.svg")),
                sweep_svg(SweepParameter::Kappa, &rows, &format!("Wang, k = {k}")),
            )?;
        }
    }
    Ok(())
}
