//! Stokes convergence on the Wang flow with triangles and quadrilaterals.
//!
//! cargo run --release --example stokes_wang [max_degree]

use voigt_hdg::flow_solvers::{Regime, SolverOptions};
use voigt_hdg::refelem::ElementType;
use voigt_hdg::verification::{convergence_study, AnalyticCase, Series};

fn main() -> voigt_hdg::Result<()> {
    let kmax: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let case = AnalyticCase::wang();
    for elem in [ElementType::Triangle, ElementType::Quadrilateral] {
        let series = Series {
            case,
            regime: Regime::Stokes,
            elem,
            layout: case.default_layout(),
            degrees: (1..=kmax).collect(),
            nx: vec![4, 8, 16, 32],
            options: SolverOptions {
                stabilization: case.default_stabilization(Regime::Stokes),
                ..Default::default()
            },
        };
        let table = convergence_study(&series)?;
        println!("{}\n{}", elem.name(), table.summary());
    }
    Ok(())
}
