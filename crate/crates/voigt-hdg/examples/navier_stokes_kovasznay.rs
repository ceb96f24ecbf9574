//! Newton-Raphson on the Kovasznay flow.
//!
//! cargo run --release --example navier_stokes_kovasznay [re] [k] [nx]
//!
//! Each mesh is solved twice: from the Stokes solution, and from the
//! interpolated closed form. The second start shows the quadratic phase of
//! the iteration even where the first one stalls.

use voigt_hdg::flow_solvers::{solve_navier_stokes, solve_navier_stokes_from, FlowProblem, Regime, Solution, SolverOptions};
use voigt_hdg::refelem::ElementType;
use voigt_hdg::verification::{compute_errors, AnalyticCase};

fn history(label: &str, sol: &Solution) {
    println!("{label}:");
    for (i, s) in sol.report.newton.iter().enumerate() {
        println!("  {:>2}  increment {:.3e}  residual {:.3e}  tau_a {:.3e}", i + 1, s.increment, s.residual, s.tau_a);
    }
    match &sol.report.failure {
        Some(f) => println!("  stopped: {f}"),
        None => println!("  converged: {}", sol.report.converged),
    }
}

fn main() -> voigt_hdg::Result<()> {
    let mut args = std::env::args().skip(1);
    let re: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let k: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let nx: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    let case = AnalyticCase::kovasznay(re);
    let mesh = case.mesh(ElementType::Triangle, k, nx, nx, case.default_layout())?;
    let data = case.data(Regime::NavierStokes);
    let problem = FlowProblem {
        mesh: &mesh,
        data: &data,
        regime: Regime::NavierStokes,
        convection: None,
    };
    let options = SolverOptions {
        stabilization: case.default_stabilization(Regime::NavierStokes),
        force: true,
        ..Default::default()
    };
    println!("Re = {re}, nu = {}, k = {k}, {nx} x {nx} cells", case.nu());

    let from_stokes = solve_navier_stokes(&problem, options)?;
    history("from Stokes", &from_stokes);
    if from_stokes.report.converged {
        let e = compute_errors(&from_stokes, &mesh, &case, false)?;
        println!("  errors: u {:.3e}  u* {:.3e}  L {:.3e}  p {:.3e}", e.u, e.ustar, e.l, e.p);
    }

    let guess = Solution::interpolate(&mesh, &|x| case.velocity(x), &|x| case.mixed(x), &|x| case.pressure(x))?;
    let from_exact = solve_navier_stokes_from(&problem, options, &guess)?;
    history("from the interpolated solution", &from_exact);
    if from_exact.report.converged {
        let e = compute_errors(&from_exact, &mesh, &case, false)?;
        println!("  errors: u {:.3e}  u* {:.3e}  L {:.3e}  p {:.3e}", e.u, e.ustar, e.l, e.p);
    }
    Ok(())
}
