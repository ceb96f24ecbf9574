//! Structure of the condensed global system: H = G on every element,
//! symmetry for Stokes, and the one-dimensional kernel of the pure
//! Dirichlet problem before the pressure level is fixed.
//!
//! cargo run --release --example structure_checks

use voigt_hdg::dense::rank_estimate;
use voigt_hdg::flow_solvers::{assemble_linear_system, FlowProblem, Regime, SolverOptions};
use voigt_hdg::global_system::structure_checks;
use voigt_hdg::refelem::ElementType;
use voigt_hdg::verification::{AnalyticCase, BoundaryLayout};

fn main() -> voigt_hdg::Result<()> {
    let wang = AnalyticCase::wang();
    let kov = AnalyticCase::kovasznay(100.0);
    for (case, regime) in [(wang, Regime::Stokes), (kov, Regime::Oseen)] {
        let mesh = case.mesh(ElementType::Triangle, 2, 4, 4, case.default_layout())?;
        let data = case.data(regime);
        let conv = |x: [f64; 2]| case.velocity(x);
        let problem = FlowProblem {
            mesh: &mesh,
            data: &data,
            regime,
            convection: if regime == Regime::Oseen { Some(&conv) } else { None },
        };
        let options = SolverOptions {
            stabilization: case.default_stabilization(regime),
            force: true,
            ..Default::default()
        };
        let (sys, condensed) = assemble_linear_system(&problem, options)?;
        let s = structure_checks(&sys, &condensed);
        println!(
            "{} {}: size {}, nnz {}, max |H - G| / |G| {:.2e}, asymmetry {:.2e}",
            case.name(),
            regime.name(),
            sys.n,
            s.nnz,
            s.max_hg_relative,
            s.asymmetry
        );
    }

    // Eight triangles, Dirichlet everywhere.
    let mesh = wang.mesh(ElementType::Triangle, 1, 2, 2, BoundaryLayout::AllDirichlet)?;
    let data = wang.data(Regime::Stokes);
    let problem = FlowProblem {
        mesh: &mesh,
        data: &data,
        regime: Regime::Stokes,
        convection: None,
    };
    for regularize in [false, true] {
        let options = SolverOptions {
            stabilization: wang.default_stabilization(Regime::Stokes),
            regularize,
            ..Default::default()
        };
        let (sys, _) = assemble_linear_system(&problem, options)?;
        let a = sys.to_dense();
        let tol = 1e-10 * a.amax();
        println!(
            "all-Dirichlet, pressure level fixed: {regularize}: size {}, rank {}",
            sys.n,
            rank_estimate(&a, tol)
        );
    }
    Ok(())
}
