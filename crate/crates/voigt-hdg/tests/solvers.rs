//! End-to-end behaviour of the Stokes, Oseen and Navier-Stokes solvers.

use voigt_hdg::flow_solvers::{
    solve, solve_navier_stokes_from, FlowProblem, OutflowMode, Regime, Solution, SolverOptions,
};
use voigt_hdg::local_assembly::{local_system_dimension, Discretization, FlowData};
use voigt_hdg::postprocess::constraint_residuals;
use voigt_hdg::refelem::ElementType;
use voigt_hdg::verification::{compute_errors, solve_case, AnalyticCase, BoundaryLayout};

fn options(case: &AnalyticCase, regime: Regime) -> SolverOptions {
    SolverOptions {
        stabilization: case.default_stabilization(regime),
        force: true,
        ..Default::default()
    }
}

#[test]
fn local_dimensions_of_lagrange_elements() {
    let rows = [
        (ElementType::Triangle, 2, [19, 37, 61, 91, 127, 217, 331, 469]),
        (ElementType::Triangle, 3, [41, 101, 201, 351, 561, 1201, 2201, 3641]),
        (ElementType::Quadrilateral, 2, [25, 55, 97, 151, 217, 385, 601, 865]),
        (ElementType::Quadrilateral, 3, [81, 271, 641, 1251, 2161, 5121, 10001, 17281]),
    ];
    for (et, nsd, expect) in rows {
        for (k, want) in [1, 2, 3, 4, 5, 7, 9, 11].into_iter().zip(expect) {
            assert_eq!(local_system_dimension(et, nsd, k).unwrap(), want, "{et:?} {nsd}D k={k}");
        }
    }
}

#[test]
fn quadratic_shear_is_reproduced() {
    let case = AnalyticCase::by_name("shear").unwrap();
    for elem in [ElementType::Triangle, ElementType::Quadrilateral] {
        for regime in [Regime::Stokes, Regime::Oseen, Regime::NavierStokes] {
            for layout in [BoundaryLayout::NeumannBottom, BoundaryLayout::AllDirichlet] {
                let mesh = case.mesh(elem, 2, 3, 3, layout).unwrap();
                let (sol, e) = solve_case(&case, regime, &mesh, options(&case, regime)).unwrap();
                let tag = format!("{elem:?} {regime:?} {layout:?}: {e:?}");
                assert!(e.u < 1e-10 && e.l < 1e-10 && e.p < 1e-10 && e.ustar < 1e-10, "{tag}");
                assert!(sol.report.converged, "{tag}");
            }
        }
    }
}

#[test]
fn postprocess_meets_its_constraints() {
    for (case, regime) in [
        (AnalyticCase::wang(), Regime::Stokes),
        (AnalyticCase::kovasznay(100.0), Regime::Oseen),
    ] {
        for elem in [ElementType::Triangle, ElementType::Quadrilateral] {
            for k in 1..=3 {
                let mesh = case.mesh(elem, k, 4, 4, case.default_layout()).unwrap();
                let (sol, _) = solve_case(&case, regime, &mesh, options(&case, regime)).unwrap();
                let disc = Discretization::new(elem, k).unwrap();
                let data = case.data(regime);
                let (mean, curl) = constraint_residuals(&sol, sol.ustar.as_ref().unwrap(), &mesh, &disc, &data).unwrap();
                assert!(mean <= 1e-11 && curl <= 1e-11, "{} {elem:?} k={k}: {mean:e} {curl:e}", case.name());
            }
        }
    }
}

#[test]
fn element_compatibility_holds() {
    let cases = [
        (AnalyticCase::wang(), Regime::Stokes, BoundaryLayout::NeumannBottom),
        (AnalyticCase::wang(), Regime::Stokes, BoundaryLayout::AllDirichlet),
        (AnalyticCase::kovasznay(100.0), Regime::Oseen, BoundaryLayout::NeumannBottom),
        (AnalyticCase::kovasznay(10.0), Regime::NavierStokes, BoundaryLayout::NeumannBottom),
        (AnalyticCase::poiseuille(1.0, 1.0), Regime::NavierStokes, BoundaryLayout::OutflowRight),
    ];
    for (case, regime, layout) in cases {
        let mesh = case.mesh(ElementType::Triangle, 2, 4, 4, layout).unwrap();
        let (sol, _) = solve_case(&case, regime, &mesh, options(&case, regime)).unwrap();
        let r = sol.report.max_compatibility_residual;
        assert!(r <= 1e-10, "{} {regime:?} {layout:?}: {r:e}", case.name());
    }
}

/// Stokes data for an Oseen solve: the source omits the convective term.
struct StokesData(voigt_hdg::verification::CaseData);

impl FlowData for StokesData {
    fn nu(&self) -> f64 {
        self.0.nu()
    }
    fn source(&self, x: [f64; 2]) -> [f64; 2] {
        self.0.source(x)
    }
    fn dirichlet(&self, x: [f64; 2]) -> [f64; 2] {
        self.0.dirichlet(x)
    }
    fn traction(&self, x: [f64; 2], n: [f64; 2]) -> [f64; 2] {
        self.0.traction(x, n)
    }
}

#[test]
fn oseen_without_convection_is_stokes() {
    let case = AnalyticCase::wang();
    let mesh = case.mesh(ElementType::Quadrilateral, 2, 4, 4, case.default_layout()).unwrap();
    let data = StokesData(case.data(Regime::Stokes));
    let zero = |_: [f64; 2]| [0.0, 0.0];
    let mut opt = options(&case, Regime::Stokes);
    opt.stabilization.beta = 0.3;
    let stokes = solve(
        &FlowProblem { mesh: &mesh, data: &data, regime: Regime::Stokes, convection: None },
        opt,
    )
    .unwrap();
    let oseen = solve(
        &FlowProblem { mesh: &mesh, data: &data, regime: Regime::Oseen, convection: Some(&zero) },
        opt,
    )
    .unwrap();
    assert_eq!(oseen.report.tau_a, 0.0);
    let diff = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    assert!(diff(&stokes.u, &oseen.u) < 1e-12);
    assert!(diff(&stokes.l, &oseen.l) < 1e-12);
    assert!(diff(&stokes.p, &oseen.p) < 1e-12);
}

#[test]
fn repeated_and_threaded_solves_agree() {
    let case = AnalyticCase::kovasznay(10.0);
    let mesh = case.mesh(ElementType::Triangle, 2, 4, 4, case.default_layout()).unwrap();
    let opt = options(&case, Regime::NavierStokes);
    let (a, _) = solve_case(&case, Regime::NavierStokes, &mesh, opt).unwrap();
    let (b, _) = solve_case(&case, Regime::NavierStokes, &mesh, opt).unwrap();
    let mut threaded = opt;
    threaded.threads = 4;
    let (c, _) = solve_case(&case, Regime::NavierStokes, &mesh, threaded).unwrap();
    let bits = |s: &Solution| -> Vec<u64> {
        s.u.iter().chain(&s.l).chain(&s.p).flatten().chain(&s.rho).map(|v| v.to_bits()).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(bits(&a), bits(&c));
    assert_eq!(a.report.newton.len(), c.report.newton.len());
}

#[test]
fn newton_converges_quadratically_near_the_solution() {
    // At Re = 100 the Stokes start is outside the basin of attraction; the
    // interpolated closed form is close enough to show the local rate.
    let case = AnalyticCase::kovasznay(100.0);
    let mesh = case.mesh(ElementType::Triangle, 3, 8, 8, case.default_layout()).unwrap();
    let data = case.data(Regime::NavierStokes);
    let problem = FlowProblem { mesh: &mesh, data: &data, regime: Regime::NavierStokes, convection: None };
    let guess = Solution::interpolate(&mesh, &|x| case.velocity(x), &|x| case.mixed(x), &|x| case.pressure(x)).unwrap();
    let sol = solve_navier_stokes_from(&problem, options(&case, Regime::NavierStokes), &guess).unwrap();
    assert!(sol.report.converged, "{:?}", sol.report.newton);
    let inc: Vec<f64> = sol.report.newton.iter().map(|s| s.increment).collect();
    assert!(inc.len() <= 8, "{inc:?}");
    // Once the increment is small, each step squares it up to a constant.
    let mut checked = 0;
    for w in inc.windows(2) {
        if w[0] < 1e-2 && w[1] > 1e-13 {
            assert!(w[1] <= 50.0 * w[0] * w[0], "{inc:?}");
            checked += 1;
        }
    }
    assert!(checked >= 1, "{inc:?}");
}

#[test]
fn navier_stokes_errors_track_oseen() {
    let case = AnalyticCase::kovasznay(10.0);
    for k in 1..=2 {
        let mesh = case.mesh(ElementType::Triangle, k, 8, 8, case.default_layout()).unwrap();
        let (_, ns) = solve_case(&case, Regime::NavierStokes, &mesh, options(&case, Regime::NavierStokes)).unwrap();
        let mut o = options(&case, Regime::NavierStokes);
        o.stabilization.beta = case.default_stabilization(Regime::NavierStokes).beta;
        let (_, os) = solve_case(&case, Regime::Oseen, &mesh, o).unwrap();
        for (a, b) in [(ns.u, os.u), (ns.l, os.l), (ns.p, os.p)] {
            assert!(a / b < 2.0 && b / a < 2.0, "k={k}: {a:e} vs {b:e}");
        }
    }
}

struct Quiescent;

impl FlowData for Quiescent {
    fn nu(&self) -> f64 {
        0.1
    }
    fn source(&self, _: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }
    fn dirichlet(&self, _: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }
    fn traction(&self, _: [f64; 2], _: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }
}

#[test]
fn zero_data_gives_zero_flow() {
    let case = AnalyticCase::wang();
    for (layout, outflow) in [
        (BoundaryLayout::NeumannBottom, OutflowMode::Outflow),
        (BoundaryLayout::AllDirichlet, OutflowMode::Outflow),
        (BoundaryLayout::OutflowRight, OutflowMode::TractionFree),
    ] {
        let mesh = case.mesh(ElementType::Triangle, 2, 3, 3, layout).unwrap();
        let problem = FlowProblem { mesh: &mesh, data: &Quiescent, regime: Regime::NavierStokes, convection: None };
        let mut opt = SolverOptions::default();
        opt.outflow = outflow;
        opt.stabilization.beta = 0.1;
        let sol = solve(&problem, opt).unwrap();
        assert!(sol.report.converged);
        assert!(sol.report.newton.len() <= 1);
        let m = sol.u.iter().chain(&sol.l).chain(&sol.p).flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(m < 1e-14, "{layout:?}: {m:e}");
    }
}

#[test]
fn zero_field_has_unit_relative_error() {
    let case = AnalyticCase::kovasznay(100.0);
    let mesh = case.mesh(ElementType::Quadrilateral, 2, 4, 4, case.default_layout()).unwrap();
    let zero = Solution::interpolate(&mesh, &|_| [0.0; 2], &|_| [0.0; 3], &|_| 0.0).unwrap();
    let e = compute_errors(&zero, &mesh, &case, false).unwrap();
    for v in [e.u, e.l, e.p] {
        assert!((v - 1.0).abs() < 1e-14, "{e:?}");
    }
    assert!(e.ustar.is_nan());
    // The nodal interpolant converges at rate k + 1 = 3.
    let interp = |nx: usize| {
        let m = case.mesh(ElementType::Quadrilateral, 2, nx, nx, case.default_layout()).unwrap();
        let s = Solution::interpolate(&m, &|x| case.velocity(x), &|x| case.mixed(x), &|x| case.pressure(x)).unwrap();
        compute_errors(&s, &m, &case, false).unwrap()
    };
    let (c, f) = (interp(8), interp(16));
    assert!(c.u / f.u > 6.0 && c.p / f.p > 6.0, "{c:?} {f:?}");
}

#[test]
fn pure_dirichlet_pressure_matches_neumann_variant() {
    let case = AnalyticCase::wang();
    let opt = options(&case, Regime::Stokes);
    let m_d = case.mesh(ElementType::Triangle, 3, 8, 8, BoundaryLayout::AllDirichlet).unwrap();
    let m_n = case.mesh(ElementType::Triangle, 3, 8, 8, BoundaryLayout::NeumannBottom).unwrap();
    let (sd, ed) = solve_case(&case, Regime::Stokes, &m_d, opt).unwrap();
    let (sn, en) = solve_case(&case, Regime::Stokes, &m_n, opt).unwrap();
    assert!(sd.report.pure_dirichlet && !sn.report.pure_dirichlet);
    let rho_sum: f64 = sd.rho.iter().sum();
    assert!(rho_sum.abs() < 1e-10);
    assert!(ed.p < 3.0 * en.p && en.p < 3.0 * ed.p, "{ed:?} {en:?}");
}
