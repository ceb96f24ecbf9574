//! Oseen convergence on the Kovasznay flow at Re = 100, convected by the
//! exact velocity.
//!
//! cargo run --release --example oseen_kovasznay [max_degree]
//!
//! With kappa = 10 and beta = 0.02 the admissibility condition is violated
//! near the inflow corner, so the solve is forced.

use voigt_hdg::flow_solvers::{Regime, SolverOptions};
use voigt_hdg::refelem::ElementType;
use voigt_hdg::verification::{convergence_study, AnalyticCase, Series};

fn main() -> voigt_hdg::Result<()> {
    let kmax: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let case = AnalyticCase::kovasznay(100.0);
    let series = Series {
        case,
        regime: Regime::Oseen,
        elem: ElementType::Triangle,
        layout: case.default_layout(),
        degrees: (1..=kmax).collect(),
        nx: vec![4, 8, 16, 32],
        options: SolverOptions {
            stabilization: case.default_stabilization(Regime::Oseen),
            force: true,
            ..Default::default()
        },
    };
    let table = convergence_study(&series)?;
    print!("{}", table.summary());
    Ok(())
}
