//! VTK, CSV and mesh file round trips.

use voigt_hdg::flow_solvers::{Regime, SolverOptions};
use voigt_hdg::mesh::Mesh;
use voigt_hdg::output::{convergence_csv, vtk_string};
use voigt_hdg::refelem::ElementType;
use voigt_hdg::verification::{convergence_study, solve_case, AnalyticCase, Series};

fn section_count(vtk: &str, key: &str) -> usize {
    let line = vtk.lines().find(|l| l.starts_with(key)).unwrap();
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[test]
fn vtk_sizes_are_consistent() {
    let case = AnalyticCase::wang();
    for (elem, k, sub, nv) in [(ElementType::Triangle, 3, 9, 3), (ElementType::Quadrilateral, 2, 4, 4)] {
        let mesh = case.mesh(elem, k, 3, 2, case.default_layout()).unwrap();
        let (sol, _) = solve_case(&case, Regime::Stokes, &mesh, SolverOptions::default()).unwrap();
        let vtk = vtk_string(&mesh, &sol).unwrap();
        let ne = mesh.num_elements();
        let nen = mesh.elements[0].len();
        assert_eq!(section_count(&vtk, "POINTS"), ne * nen);
        assert_eq!(section_count(&vtk, "CELLS"), ne * sub);
        assert_eq!(section_count(&vtk, "CELL_TYPES"), ne * sub);
        assert_eq!(section_count(&vtk, "POINT_DATA"), ne * nen);
        // Every cell line lists nv valid point indices.
        let cells: Vec<&str> = vtk.lines().skip_while(|l| !l.starts_with("CELLS")).skip(1).take(ne * sub).collect();
        for c in cells {
            let v: Vec<usize> = c.split_whitespace().map(|x| x.parse().unwrap()).collect();
            assert_eq!(v[0], nv);
            assert!(v[1..].iter().all(|&i| i < ne * nen));
        }
        // Vertex values of u match the solution.
        let u_line = vtk.lines().skip_while(|l| !l.starts_with("VECTORS u ")).nth(1).unwrap();
        let ux: f64 = u_line.split_whitespace().next().unwrap().parse().unwrap();
        assert_eq!(ux, sol.u[0][0]);
    }
}

#[test]
fn convergence_csv_has_one_row_per_solve() {
    let case = AnalyticCase::wang();
    let series = Series {
        case,
        regime: Regime::Stokes,
        elem: ElementType::Quadrilateral,
        layout: case.default_layout(),
        degrees: vec![1, 2],
        nx: vec![2, 4, 8],
        options: SolverOptions::default(),
    };
    let table = convergence_study(&series).unwrap();
    let csv = convergence_csv(&table);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("case,regime,k,h,n_dof_global,err_u,err_ustar,err_L,err_p"));
    let width = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == width));
    assert_eq!(csv, convergence_csv(&convergence_study(&series).unwrap()));
}

#[test]
fn mesh_file_round_trip_solves_identically() {
    let case = AnalyticCase::kovasznay(100.0);
    let mesh = case.mesh(ElementType::Triangle, 2, 3, 3, case.default_layout()).unwrap();
    let back = Mesh::from_text(&mesh.to_text()).unwrap();
    let opt = SolverOptions {
        stabilization: case.default_stabilization(Regime::Oseen),
        force: true,
        ..Default::default()
    };
    let (_, a) = solve_case(&case, Regime::Oseen, &mesh, opt).unwrap();
    let (_, b) = solve_case(&case, Regime::Oseen, &back, opt).unwrap();
    assert!((a.u - b.u).abs() < 1e-14 && (a.p - b.p).abs() < 1e-14);
}
