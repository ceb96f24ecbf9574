//! Channel flow with three treatments of the outlet.
//!
//! cargo run --release --example poiseuille_outflow
//!
//! Only the outflow condition (zero tangential velocity, zero normal
//! stress) is satisfied by the parabolic profile, so it is the only one
//! that reproduces it to round-off on biquadratic elements.

use voigt_hdg::flow_solvers::{OutflowMode, Regime, SolverOptions};
use voigt_hdg::refelem::ElementType;
use voigt_hdg::verification::{solve_case, AnalyticCase};

fn main() -> voigt_hdg::Result<()> {
    let case = AnalyticCase::poiseuille(1.0, 1.0);
    let mesh = case.mesh(ElementType::Quadrilateral, 2, 10, 10, case.default_layout())?;
    for mode in [OutflowMode::Outflow, OutflowMode::HomogeneousNeumann, OutflowMode::TractionFree] {
        let options = SolverOptions {
            stabilization: case.default_stabilization(Regime::NavierStokes),
            outflow: mode,
            ..Default::default()
        };
        let (sol, err) = solve_case(&case, Regime::NavierStokes, &mesh, options)?;
        println!(
            "{:<20} Linf(u) {:.3e}  L2(u) {:.3e}  newton {} converged {}",
            mode.name(),
            err.linf_u,
            err.u,
            sol.report.newton.len(),
            sol.report.converged
        );
    }
    Ok(())
}
