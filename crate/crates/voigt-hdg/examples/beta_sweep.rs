//! Sensitivity of the Oseen Kovasznay errors to the convective
//! stabilization. Large beta mostly hurts the pressure.
//!
//! cargo run --release --example beta_sweep

use voigt_hdg::flow_solvers::{Regime, SolverOptions};
use voigt_hdg::refelem::ElementType;
use voigt_hdg::verification::{sensitivity_sweep, sweep_argmin, AnalyticCase, SweepParameter};

fn main() -> voigt_hdg::Result<()> {
    let case = AnalyticCase::kovasznay(100.0);
    let betas = [1e-4, 1e-3, 1e-2, 2e-2, 5e-2, 1e-1, 1.0, 10.0];
    let mut options = SolverOptions {
        stabilization: case.default_stabilization(Regime::Oseen),
        force: true,
        ..Default::default()
    };
    options.stabilization.kappa = 10.0;
    for (k, nx) in [(1, 16), (2, 8)] {
        let mesh = case.mesh(ElementType::Triangle, k, nx, nx, case.default_layout())?;
        let rows = sensitivity_sweep(&case, Regime::Oseen, &mesh, SweepParameter::Beta, &betas, options);
        println!("k = {k}, {nx} x {nx} cells");
        for r in &rows {
            match &r.errors {
                Some(e) => println!("  beta {:>7}  u {:.3e}  L {:.3e}  p {:.3e}", r.value, e.u, e.l, e.p),
                None => println!("  beta {:>7}  {}", r.value, r.status),
            }
        }
        let (bu, _) = sweep_argmin(&rows, |e| e.u).unwrap_or((f64::NAN, f64::NAN));
        let (_, pmin) = sweep_argmin(&rows, |e| e.p).unwrap_or((f64::NAN, f64::NAN));
        let p_big = rows.last().and_then(|r| r.errors.as_ref()).map_or(f64::NAN, |e| e.p);
        println!("  u argmin at beta = {bu}; p error at beta = 10 is {:.1}x its minimum", p_big / pmin);
    }
    Ok(())
}
