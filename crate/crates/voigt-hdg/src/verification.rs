//! Analytic benchmark flows, error norms, rate fitting and parameter sweeps.

use std::f64::consts::PI;

use crate::error::{HdgError, Result};
use crate::flow_solvers::{solve, FlowProblem, Regime, Solution, SolverOptions, Stabilization, TauMode};
use crate::geometry::{map_edge_point, map_point};
use crate::global_system::StructureReport;
use crate::local_assembly::{Discretization, FlowData};
use crate::mesh::{BoundaryTag, Mesh, TrianglePattern};
use crate::refelem::{ElementType, Quadrature};

/// Closed-form flows with a known velocity and pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticCase {
    /// Harmonic, divergence-free Stokes flow with zero pressure.
    Wang { a: f64, b: f64, lambda: f64, nu: f64 },
    /// Kovasznay flow on the unit square.
    Kovasznay { re: f64, nu: f64 },
    /// Channel flow on [0, 10] x [0, 1] with centerline speed `v`.
    Poiseuille { v: f64, nu: f64 },
    /// Quadratic shear flow u = (x2^2, 0), p = 2 nu x1 on the unit square.
    Shear { nu: f64 },
}

/// Boundary layouts used by the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryLayout {
    /// Neumann on x2 = y0, Dirichlet elsewhere.
    NeumannBottom,
    /// Dirichlet everywhere.
    AllDirichlet,
    /// Outflow on x1 = x_max, Dirichlet elsewhere.
    OutflowRight,
}

impl AnalyticCase {
    pub fn wang() -> Self {
        Self::Wang {
            a: 1.0,
            b: 1.0,
            lambda: 10.0,
            nu: 1.0,
        }
    }

    /// Kovasznay flow at Reynolds number `re`. Its closed form is a steady
    /// Navier-Stokes solution without body force for nu = 1 / (2 Re).
    pub fn kovasznay(re: f64) -> Self {
        Self::Kovasznay { re, nu: 0.5 / re }
    }

    pub fn poiseuille(v: f64, nu: f64) -> Self {
        Self::Poiseuille { v, nu }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "wang" => Ok(Self::wang()),
            "kovasznay" => Ok(Self::kovasznay(100.0)),
            "poiseuille" => Ok(Self::poiseuille(1.0, 1.0)),
            "shear" => Ok(Self::Shear { nu: 1.0 }),
            other => Err(HdgError::InvalidInput(format!("unknown case '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Wang { .. } => "wang",
            Self::Kovasznay { .. } => "kovasznay",
            Self::Poiseuille { .. } => "poiseuille",
            Self::Shear { .. } => "shear",
        }
    }

    pub fn nu(&self) -> f64 {
        match *self {
            Self::Wang { nu, .. } | Self::Kovasznay { nu, .. } | Self::Poiseuille { nu, .. } | Self::Shear { nu } => nu,
        }
    }

    pub fn with_nu(self, nu: f64) -> Self {
        match self {
            Self::Wang { a, b, lambda, .. } => Self::Wang { a, b, lambda, nu },
            Self::Kovasznay { re, .. } => Self::Kovasznay { re, nu },
            Self::Poiseuille { v, .. } => Self::Poiseuille { v, nu },
            Self::Shear { .. } => Self::Shear { nu },
        }
    }

    /// Kovasznay decay rate Re/2 - sqrt(Re^2/4 + 4 pi^2).
    pub fn kovasznay_lambda(re: f64) -> f64 {
        re / 2.0 - (re * re / 4.0 + 4.0 * PI * PI).sqrt()
    }

    /// Kovasznay pressure constant.
    pub fn kovasznay_c(re: f64) -> f64 {
        let l = Self::kovasznay_lambda(re);
        let e = (4.0 * l).exp();
        (1.0 + e - (1.0 - e) / (2.0 * l)) / 8.0
    }

    /// (x range, y range).
    pub fn domain(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Self::Poiseuille { .. } => ([0.0, 10.0], [0.0, 1.0]),
            _ => ([0.0, 1.0], [0.0, 1.0]),
        }
    }

    pub fn default_layout(&self) -> BoundaryLayout {
        match self {
            Self::Poiseuille { .. } => BoundaryLayout::OutflowRight,
            _ => BoundaryLayout::NeumannBottom,
        }
    }

    /// Stabilization used for this case in a regime.
    pub fn default_stabilization(&self, regime: Regime) -> Stabilization {
        let (kappa, beta) = match (self, regime) {
            (Self::Wang { .. }, _) => (3.0, 0.0),
            (Self::Kovasznay { .. }, Regime::NavierStokes) => (10.0, 0.1),
            (Self::Kovasznay { .. }, _) => (10.0, 0.02),
            (_, Regime::Stokes) => (10.0, 0.0),
            _ => (10.0, 0.1),
        };
        Stabilization {
            kappa,
            beta,
            ell: None,
            mode: TauMode::Global2,
        }
    }

    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            Self::Wang { a, b, lambda, .. } => {
                let e = (-lambda * x[1]).exp();
                [
                    2.0 * a * x[1] - b * lambda * (lambda * x[0]).cos() * e,
                    b * lambda * (lambda * x[0]).sin() * e,
                ]
            }
            Self::Kovasznay { re, .. } => {
                let l = Self::kovasznay_lambda(re);
                let e = (2.0 * l * x[0]).exp();
                let th = (4.0 * x[1] - 1.0) * PI;
                [1.0 - e * th.cos(), l / (2.0 * PI) * e * th.sin()]
            }
            Self::Poiseuille { v, .. } => [4.0 * v * x[1] * (1.0 - x[1]), 0.0],
            Self::Shear { .. } => [x[1] * x[1], 0.0],
        }
    }

    /// Velocity gradient g[i][j] = du_i/dx_j.
    pub fn gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        match *self {
            Self::Wang { a, b, lambda, .. } => {
                let e = (-lambda * x[1]).exp();
                let (s, c) = (lambda * x[0]).sin_cos();
                let l2 = lambda * lambda;
                [
                    [b * l2 * s * e, 2.0 * a + b * l2 * c * e],
                    [b * l2 * c * e, -b * l2 * s * e],
                ]
            }
            Self::Kovasznay { re, .. } => {
                let l = Self::kovasznay_lambda(re);
                let e = (2.0 * l * x[0]).exp();
                let th = (4.0 * x[1] - 1.0) * PI;
                let (s, c) = th.sin_cos();
                [
                    [-2.0 * l * e * c, 4.0 * PI * e * s],
                    [l * l / PI * e * s, 2.0 * l * e * c],
                ]
            }
            Self::Poiseuille { v, .. } => [[0.0, 4.0 * v * (1.0 - 2.0 * x[1])], [0.0, 0.0]],
            Self::Shear { .. } => [[0.0, 2.0 * x[1]], [0.0, 0.0]],
        }
    }

    /// Vector Laplacian of the velocity.
    pub fn laplacian(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            Self::Wang { .. } => [0.0, 0.0],
            Self::Kovasznay { re, .. } => {
                let l = Self::kovasznay_lambda(re);
                let e = (2.0 * l * x[0]).exp();
                let th = (4.0 * x[1] - 1.0) * PI;
                let f = 4.0 * l * l - 16.0 * PI * PI;
                [-e * th.cos() * f, l / (2.0 * PI) * e * th.sin() * f]
            }
            Self::Poiseuille { v, .. } => [-8.0 * v, 0.0],
            Self::Shear { .. } => [2.0, 0.0],
        }
    }

    pub fn pressure(&self, x: [f64; 2]) -> f64 {
        match *self {
            Self::Wang { .. } => 0.0,
            Self::Kovasznay { re, .. } => {
                let l = Self::kovasznay_lambda(re);
                -0.5 * (4.0 * l * x[0]).exp() + Self::kovasznay_c(re)
            }
            Self::Poiseuille { v, nu } => -8.0 * nu * v * x[0] + 80.0 * nu * v,
            Self::Shear { nu } => 2.0 * nu * x[0],
        }
    }

    pub fn pressure_gradient(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            Self::Wang { .. } => [0.0, 0.0],
            Self::Kovasznay { re, .. } => {
                let l = Self::kovasznay_lambda(re);
                [-2.0 * l * (4.0 * l * x[0]).exp(), 0.0]
            }
            Self::Poiseuille { v, nu } => [-8.0 * nu * v, 0.0],
            Self::Shear { nu } => [2.0 * nu, 0.0],
        }
    }

    /// Exact mixed variable -D^{1/2} grad_s u in Voigt order.
    pub fn mixed(&self, x: [f64; 2]) -> [f64; 3] {
        let g = self.gradient(x);
        let nu = self.nu();
        let s2 = (2.0 * nu).sqrt();
        [-s2 * g[0][0], -s2 * g[1][1], -nu.sqrt() * (g[0][1] + g[1][0])]
    }

    /// Body force making the closed form an exact solution in `regime`, with
    /// the convection equal to the velocity itself for Oseen and
    /// Navier-Stokes.
    pub fn source(&self, regime: Regime, x: [f64; 2]) -> [f64; 2] {
        let lap = self.laplacian(x);
        let gp = self.pressure_gradient(x);
        let nu = self.nu();
        let mut s = [-nu * lap[0] + gp[0], -nu * lap[1] + gp[1]];
        if regime != Regime::Stokes {
            let u = self.velocity(x);
            let g = self.gradient(x);
            for i in 0..2 {
                s[i] += g[i][0] * u[0] + g[i][1] * u[1];
            }
        }
        s
    }

    /// Cauchy stress.
    pub fn stress(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let g = self.gradient(x);
        let p = self.pressure(x);
        let nu = self.nu();
        [
            [-p + 2.0 * nu * g[0][0], nu * (g[0][1] + g[1][0])],
            [nu * (g[0][1] + g[1][0]), -p + 2.0 * nu * g[1][1]],
        ]
    }

    /// Structured mesh of the case domain with the boundary tagged. Triangle
    /// diagonals alternate in a checkerboard.
    pub fn mesh(&self, elem: ElementType, k: usize, nx: usize, ny: usize, layout: BoundaryLayout) -> Result<Mesh> {
        let (xr, yr) = self.domain();
        let mut m = Mesh::structured_pattern(elem, k, nx, ny, xr, yr, TrianglePattern::Alternating)?;
        tag_mesh(&mut m, xr, yr, layout)?;
        Ok(m)
    }

    pub fn data(&self, regime: Regime) -> CaseData {
        CaseData { case: *self, regime }
    }
}

/// Tag the boundary of a rectangle mesh according to `layout`.
pub fn tag_mesh(m: &mut Mesh, xr: [f64; 2], yr: [f64; 2], layout: BoundaryLayout) -> Result<()> {
    let tol = 1e-10 * (xr[1] - xr[0]).max(yr[1] - yr[0]);
    let bottom = move |p: [f64; 2]| (p[1] - yr[0]).abs() < tol;
    let right = move |p: [f64; 2]| (p[0] - xr[1]).abs() < tol;
    let not_bottom = move |p: [f64; 2]| !bottom(p);
    let not_right = move |p: [f64; 2]| !right(p);
    let all = |_: [f64; 2]| true;
    match layout {
        BoundaryLayout::NeumannBottom => m.classify_boundary(&[
            (BoundaryTag::Neumann, &bottom),
            (BoundaryTag::Dirichlet, &not_bottom),
        ]),
        BoundaryLayout::AllDirichlet => m.classify_boundary(&[(BoundaryTag::Dirichlet, &all)]),
        BoundaryLayout::OutflowRight => m.classify_boundary(&[
            (BoundaryTag::Outflow, &right),
            (BoundaryTag::Dirichlet, &not_right),
        ]),
    }
}

/// Problem data generated from an analytic case.
#[derive(Debug, Clone, Copy)]
pub struct CaseData {
    pub case: AnalyticCase,
    pub regime: Regime,
}

impl FlowData for CaseData {
    fn nu(&self) -> f64 {
        self.case.nu()
    }
    fn source(&self, x: [f64; 2]) -> [f64; 2] {
        self.case.source(self.regime, x)
    }
    fn dirichlet(&self, x: [f64; 2]) -> [f64; 2] {
        self.case.velocity(x)
    }
    fn traction(&self, x: [f64; 2], n: [f64; 2]) -> [f64; 2] {
        let s = self.case.stress(x);
        let mut t = [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]];
        if self.regime != Regime::Stokes {
            let u = self.case.velocity(x);
            let un = u[0] * n[0] + u[1] * n[1];
            t[0] -= u[0] * un;
            t[1] -= u[1] * un;
        }
        t
    }
}

/// Errors of a discrete solution against the closed form.
#[derive(Debug, Clone, Copy, Default)]
pub struct Errors {
    pub u: f64,
    pub ustar: f64,
    pub l: f64,
    pub p: f64,
    pub linf_u: f64,
    pub linf_ustar: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 1e-14 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

/// Relative L2 errors (absolute when the exact field vanishes) and sampled
/// maximum velocity errors. Pressures are compared modulo their means when
/// `mean_adjust` is set.
pub fn compute_errors(sol: &Solution, mesh: &Mesh, case: &AnalyticCase, mean_adjust: bool) -> Result<Errors> {
    let disc = Discretization::new(mesh.elem_type, mesh.degree)?;
    if sol.u.len() != mesh.num_elements() || sol.k != mesh.degree {
        return Err(HdgError::InvalidInput("solution does not belong to this mesh".into()));
    }
    let q = Quadrature::new(mesh.elem_type, 2 * (disc.k + 1) + 2);
    let nen = disc.nen();
    let ns = disc.re_star.num_nodes();
    // Pressure means.
    let (mut ph_int, mut pe_int, mut area) = (0.0, 0.0, 0.0);
    if mean_adjust {
        for e in 0..mesh.num_elements() {
            let coords = mesh.element_coords(e);
            for (xi, w) in q.points.iter().zip(&q.weights) {
                let mp = map_point(&coords, &disc.re, &disc.re, *xi)?;
                let dv = mp.det * w;
                let ph: f64 = (0..nen).map(|j| mp.n[j] * sol.p[e][j]).sum();
                ph_int += ph * dv;
                pe_int += case.pressure(mp.x) * dv;
                area += dv;
            }
        }
    }
    let (ph_mean, pe_mean) = if mean_adjust { (ph_int / area, pe_int / area) } else { (0.0, 0.0) };
    let mut acc = [0.0; 8];
    for e in 0..mesh.num_elements() {
        let coords = mesh.element_coords(e);
        for (xi, w) in q.points.iter().zip(&q.weights) {
            let mp = map_point(&coords, &disc.re, &disc.re, *xi)?;
            let dv = mp.det * w;
            let ue = case.velocity(mp.x);
            let le = case.mixed(mp.x);
            let pe = case.pressure(mp.x) - pe_mean;
            let mut uh = [0.0; 2];
            let mut lh = [0.0; 3];
            let mut ph = -ph_mean;
            for j in 0..nen {
                uh[0] += mp.n[j] * sol.u[e][2 * j];
                uh[1] += mp.n[j] * sol.u[e][2 * j + 1];
                for m in 0..3 {
                    lh[m] += mp.n[j] * sol.l[e][3 * j + m];
                }
                ph += mp.n[j] * sol.p[e][j];
            }
            acc[0] += ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2)) * dv;
            acc[1] += (ue[0] * ue[0] + ue[1] * ue[1]) * dv;
            acc[4] += (0..3).map(|m| (lh[m] - le[m]).powi(2)).sum::<f64>() * dv;
            acc[5] += (0..3).map(|m| le[m] * le[m]).sum::<f64>() * dv;
            acc[6] += (ph - pe).powi(2) * dv;
            acc[7] += pe * pe * dv;
            if let Some(us) = &sol.ustar {
                let (nsv, _) = disc.re_star.shape(*xi);
                let mut u2 = [0.0; 2];
                for j in 0..ns {
                    u2[0] += nsv[j] * us[e][2 * j];
                    u2[1] += nsv[j] * us[e][2 * j + 1];
                }
                acc[2] += ((u2[0] - ue[0]).powi(2) + (u2[1] - ue[1]).powi(2)) * dv;
            }
        }
    }
    let mut err = Errors {
        u: ratio(acc[0], acc[1]),
        ustar: if sol.ustar.is_some() { ratio(acc[2], acc[1]) } else { f64::NAN },
        l: ratio(acc[4], acc[5]),
        p: ratio(acc[6], acc[7]),
        linf_u: 0.0,
        linf_ustar: if sol.ustar.is_some() { 0.0 } else { f64::NAN },
    };
    let samples = disc.re.sample_points(disc.k + 3);
    for e in 0..mesh.num_elements() {
        let coords = mesh.element_coords(e);
        for xi in &samples {
            let mp = map_point(&coords, &disc.re, &disc.re, *xi)?;
            let ue = case.velocity(mp.x);
            let mut uh = [0.0; 2];
            for j in 0..nen {
                uh[0] += mp.n[j] * sol.u[e][2 * j];
                uh[1] += mp.n[j] * sol.u[e][2 * j + 1];
            }
            err.linf_u = err.linf_u.max(((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2)).sqrt());
            if let Some(us) = &sol.ustar {
                let (nsv, _) = disc.re_star.shape(*xi);
                let mut u2 = [0.0; 2];
                for j in 0..ns {
                    u2[0] += nsv[j] * us[e][2 * j];
                    u2[1] += nsv[j] * us[e][2 * j + 1];
                }
                err.linf_ustar = err.linf_ustar.max(((u2[0] - ue[0]).powi(2) + (u2[1] - ue[1]).powi(2)).sqrt());
            }
        }
    }
    Ok(err)
}

/// Least-squares slope of log(e) against log(h) over the last three points.
pub fn fit_rate(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len().min(e.len());
    let start = n.saturating_sub(3);
    let xs: Vec<f64> = h[start..n].iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e[start..n].iter().map(|v| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub case: String,
    pub regime: Regime,
    pub k: usize,
    pub nx: usize,
    pub h: f64,
    pub n_dof: usize,
    pub errors: Errors,
    pub newton_iterations: usize,
    pub converged: bool,
    pub seconds: f64,
    /// Structural diagnostics, the worst over all linear solves.
    pub structure: StructureReport,
    pub compatibility_residual: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Rates {
    pub u: f64,
    pub ustar: f64,
    pub l: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Fitted rates per degree.
    pub rates: Vec<(usize, Rates)>,
    /// Failures as (k, nx, message).
    pub failures: Vec<(usize, usize, String)>,
}

impl ConvergenceTable {
    pub fn rates_for(&self, k: usize) -> Option<Rates> {
        self.rates.iter().find(|(kk, _)| *kk == k).map(|(_, r)| *r)
    }

    pub fn rows_for(&self, k: usize) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.k == k).collect()
    }

    /// Plain-text table of errors followed by the fitted rates.
    pub fn summary(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>2} {:>4} {:>8} {:>10} {:>10} {:>10} {:>10} {:>6}",
            "k", "nx", "dofs", "u", "u*", "L", "p", "newton"
        );
        for r in &self.rows {
            let e = &r.errors;
            let _ = writeln!(
                s,
                "{:>2} {:>4} {:>8} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>6}",
                r.k, r.nx, r.n_dof, e.u, e.ustar, e.l, e.p, r.newton_iterations
            );
        }
        for (k, r) in &self.rates {
            let _ = writeln!(s, "k={k} rates: u {:.2}  u* {:.2}  L {:.2}  p {:.2}", r.u, r.ustar, r.l, r.p);
        }
        for (k, nx, msg) in &self.failures {
            let _ = writeln!(s, "k={k} nx={nx} failed: {msg}");
        }
        s
    }
}

/// Series description for [`convergence_study`].
#[derive(Debug, Clone)]
pub struct Series {
    pub case: AnalyticCase,
    pub regime: Regime,
    pub elem: ElementType,
    pub layout: BoundaryLayout,
    pub degrees: Vec<usize>,
    pub nx: Vec<usize>,
    pub options: SolverOptions,
}

/// Solve one case on one mesh and measure the errors.
pub fn solve_case(
    case: &AnalyticCase,
    regime: Regime,
    mesh: &Mesh,
    options: SolverOptions,
) -> Result<(Solution, Errors)> {
    let data = case.data(regime);
    let conv = |x: [f64; 2]| case.velocity(x);
    let problem = FlowProblem {
        mesh,
        data: &data,
        regime,
        convection: if regime == Regime::Oseen { Some(&conv) } else { None },
    };
    let sol = solve(&problem, options)?;
    let err = compute_errors(&sol, mesh, case, sol.report.pure_dirichlet)?;
    Ok((sol, err))
}

pub fn convergence_study(series: &Series) -> Result<ConvergenceTable> {
    if series.nx.len() < 3 {
        return Err(HdgError::InvalidInput("a convergence study needs at least 3 meshes".into()));
    }
    let (xr, _) = series.case.domain();
    let mut table = ConvergenceTable::default();
    for &k in &series.degrees {
        let mut hs = Vec::new();
        let mut es: [Vec<f64>; 4] = Default::default();
        for &nx in &series.nx {
            let mesh = series.case.mesh(series.elem, k, nx, nx, series.layout)?;
            match solve_case(&series.case, series.regime, &mesh, series.options) {
                Ok((sol, err)) => {
                    let h = (xr[1] - xr[0]) / nx as f64;
                    hs.push(h);
                    es[0].push(err.u);
                    es[1].push(err.ustar);
                    es[2].push(err.l);
                    es[3].push(err.p);
                    table.rows.push(ConvergenceRow {
                        case: series.case.name().to_string(),
                        regime: series.regime,
                        k,
                        nx,
                        h,
                        n_dof: sol.report.n_dof,
                        errors: err,
                        newton_iterations: sol.report.newton.len(),
                        converged: sol.report.converged,
                        seconds: sol.report.seconds,
                        structure: sol.report.structure.clone(),
                        compatibility_residual: sol.report.max_compatibility_residual,
                    });
                }
                Err(e) => {
                    table.failures.push((k, nx, e.to_string()));
                    break;
                }
            }
        }
        if hs.len() >= 3 {
            table.rates.push((
                k,
                Rates {
                    u: fit_rate(&hs, &es[0]),
                    ustar: fit_rate(&hs, &es[1]),
                    l: fit_rate(&hs, &es[2]),
                    p: fit_rate(&hs, &es[3]),
                },
            ));
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Kappa,
    Beta,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Kappa => "kappa",
            Self::Beta => "beta",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kappa" => Ok(Self::Kappa),
            "beta" => Ok(Self::Beta),
            other => Err(HdgError::InvalidInput(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub errors: Option<Errors>,
    pub status: String,
    pub structure: Option<StructureReport>,
}

/// Errors as a function of one stabilization parameter on a fixed mesh.
pub fn sensitivity_sweep(
    case: &AnalyticCase,
    regime: Regime,
    mesh: &Mesh,
    parameter: SweepParameter,
    values: &[f64],
    options: SolverOptions,
) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&v| {
            let mut opt = options;
            match parameter {
                SweepParameter::Kappa => opt.stabilization.kappa = v,
                SweepParameter::Beta => opt.stabilization.beta = v,
            }
            match solve_case(case, regime, mesh, opt) {
                Ok((sol, err)) => SweepRow {
                    value: v,
                    errors: Some(err),
                    status: "ok".into(),
                    structure: Some(sol.report.structure),
                },
                Err(e) => SweepRow {
                    value: v,
                    errors: None,
                    status: format!("failed: {e}"),
                    structure: None,
                },
            }
        })
        .collect()
}

/// Value in `rows` with the smallest error selected by `pick`.
pub fn sweep_argmin(rows: &[SweepRow], pick: fn(&Errors) -> f64) -> Option<(f64, f64)> {
    rows.iter()
        .filter_map(|r| r.errors.as_ref().map(|e| (r.value, pick(e))))
        .filter(|(_, e)| e.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn d1(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    (-f(-3.0 * h) + 9.0 * f(-2.0 * h) - 45.0 * f(-h) + 45.0 * f(h) - 9.0 * f(2.0 * h) + f(3.0 * h)) / (60.0 * h)
}

fn d2(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    (2.0 * f(-3.0 * h) - 27.0 * f(-2.0 * h) + 270.0 * f(-h) - 490.0 * f(0.0) + 270.0 * f(h) - 27.0 * f(2.0 * h)
        + 2.0 * f(3.0 * h))
        / (180.0 * h * h)
}

/// Momentum and mass residuals of the closed form, with derivatives taken by
/// sixth-order central differences of the velocity and pressure formulas on
/// a 50 x 50 grid. The momentum residual is relative to the largest term.
pub fn finite_difference_residuals(case: &AnalyticCase, regime: Regime) -> (f64, f64) {
    let (xr, yr) = case.domain();
    let len = (xr[1] - xr[0]).max(yr[1] - yr[0]);
    let h = 2e-3 * len;
    let nu = case.nu();
    let mut worst_mom: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    let n = 50;
    for j in 0..n {
        for i in 0..n {
            let x = [
                xr[0] + (xr[1] - xr[0]) * (i as f64 + 0.5) / n as f64,
                yr[0] + (yr[1] - yr[0]) * (j as f64 + 0.5) / n as f64,
            ];
            let u = |c: usize, p: [f64; 2]| case.velocity(p)[c];
            // First derivatives du_c/dx_d
            let du = |c: usize, d: usize, p: [f64; 2]| {
                d1(
                    &|t| {
                        let mut q = p;
                        q[d] += t;
                        u(c, q)
                    },
                    h,
                )
            };
            let dd = |c: usize, d: usize| {
                d2(
                    &|t| {
                        let mut q = x;
                        q[d] += t;
                        u(c, q)
                    },
                    h,
                )
            };
            let mixed = |c: usize| {
                d1(
                    &|t| {
                        let mut q = x;
                        q[1] += t;
                        du(c, 0, q)
                    },
                    h,
                )
            };
            let dp = |d: usize| {
                d1(
                    &|t| {
                        let mut q = x;
                        q[d] += t;
                        case.pressure(q)
                    },
                    h,
                )
            };
            let uv = case.velocity(x);
            let s = case.source(regime, x);
            let g = [[du(0, 0, x), du(0, 1, x)], [du(1, 0, x), du(1, 1, x)]];
            // div sigma_i = -dp/dx_i + nu sum_j (d_jj u_i + d_ij u_j)
            let div_sigma = [
                -dp(0) + nu * (dd(0, 0) + dd(0, 1) + dd(0, 0) + mixed(1)),
                -dp(1) + nu * (dd(1, 0) + dd(1, 1) + mixed(0) + dd(1, 1)),
            ];
            let conv = if regime == Regime::Stokes {
                [0.0, 0.0]
            } else {
                [g[0][0] * uv[0] + g[0][1] * uv[1], g[1][0] * uv[0] + g[1][1] * uv[1]]
            };
            let mut scale: f64 = 1.0;
            for c in 0..2 {
                scale = scale.max(nu * dd(c, 0).abs()).max(nu * dd(c, 1).abs()).max(dp(c).abs());
            }
            for c in 0..2 {
                scale = scale.max(div_sigma[c].abs()).max(conv[c].abs()).max(s[c].abs());
            }
            for c in 0..2 {
                let r = -div_sigma[c] + conv[c] - s[c];
                worst_mom = worst_mom.max(r.abs() / scale);
            }
            let gscale = 1.0f64.max(g[0][0].abs()).max(g[1][1].abs());
            worst_mass = worst_mass.max((g[0][0] + g[1][1]).abs() / gscale);
        }
    }
    (worst_mom, worst_mass)
}

/// Net boundary flux of the exact velocity around the mesh boundary.
pub fn boundary_compatibility(mesh: &Mesh, case: &AnalyticCase) -> Result<f64> {
    let disc = Discretization::new(mesh.elem_type, mesh.degree)?;
    let q = Quadrature::new(ElementType::Segment, 40);
    let mut flux = 0.0;
    for face in &mesh.faces {
        if face.elements.len() != 1 {
            continue;
        }
        let (e, l) = face.elements[0];
        let coords = mesh.element_coords(e);
        for (s, w) in q.points.iter().zip(&q.weights) {
            let (x, n, jac, _) = map_edge_point(&coords, &disc.re, l, s[0]);
            let u = case.velocity(x);
            flux += (u[0] * n[0] + u[1] * n[1]) * jac * w;
        }
    }
    Ok(flux)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_values() {
        let w = AnalyticCase::wang();
        assert_eq!(w.velocity([0.0, 0.0]), [-10.0, 0.0]);
        let l = AnalyticCase::kovasznay_lambda(100.0);
        assert!((l + 0.393238).abs() < 1e-5);
        assert!((AnalyticCase::kovasznay_c(100.0) - 0.27689).abs() < 1e-5);
        let p = AnalyticCase::poiseuille(1.0, 1.0);
        assert_eq!(p.velocity([3.0, 0.5]), [1.0, 0.0]);
        assert_eq!(p.pressure([0.0, 0.3]), 80.0);
    }

    #[test]
    fn sources_vanish_for_shipped_cases() {
        let xs = [[0.1, 0.2], [0.7, 0.4], [0.5, 0.9]];
        for x in xs {
            let s = AnalyticCase::wang().source(Regime::Stokes, x);
            assert!(s[0].abs() < 1e-9 && s[1].abs() < 1e-9);
            for r in [Regime::Oseen, Regime::NavierStokes] {
                let s = AnalyticCase::kovasznay(100.0).source(r, x);
                assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12, "{s:?}");
            }
            let s = AnalyticCase::poiseuille(1.0, 0.3).source(Regime::NavierStokes, [5.0 * x[0], x[1]]);
            assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
        }
    }

    #[test]
    fn closed_forms_pass_finite_difference_oracle() {
        let cases = [
            (AnalyticCase::wang(), Regime::Stokes),
            (AnalyticCase::kovasznay(100.0), Regime::Oseen),
            (AnalyticCase::kovasznay(100.0), Regime::NavierStokes),
            (AnalyticCase::kovasznay(100.0).with_nu(0.01), Regime::NavierStokes),
            (AnalyticCase::kovasznay(100.0), Regime::Stokes),
            (AnalyticCase::poiseuille(1.0, 1.0), Regime::NavierStokes),
            (AnalyticCase::Shear { nu: 0.4 }, Regime::Stokes),
        ];
        for (c, r) in cases {
            let (m, d) = finite_difference_residuals(&c, r);
            assert!(m <= 1e-8 && d <= 1e-8, "{c:?} {r:?}: {m:e} {d:e}");
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let h = 1e-5;
        for c in [AnalyticCase::wang(), AnalyticCase::kovasznay(100.0), AnalyticCase::poiseuille(2.0, 1.0)] {
            let x = [0.37, 0.61];
            let g = c.gradient(x);
            for d in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[d] += h;
                xm[d] -= h;
                for i in 0..2 {
                    let fd = (c.velocity(xp)[i] - c.velocity(xm)[i]) / (2.0 * h);
                    assert!((fd - g[i][d]).abs() < 1e-5 * (1.0 + g[i][d].abs()));
                }
            }
        }
    }

    #[test]
    fn rate_fit_recovers_power() {
        let h = [0.5, 0.25, 0.125, 0.0625];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powf(2.7)).collect();
        assert!((fit_rate(&h, &e) - 2.7).abs() < 1e-12);
    }

    #[test]
    fn compatibility_of_shipped_cases() {
        for c in [AnalyticCase::wang(), AnalyticCase::kovasznay(100.0), AnalyticCase::poiseuille(1.0, 1.0)] {
            let m = c.mesh(ElementType::Triangle, 3, 4, 4, BoundaryLayout::AllDirichlet).unwrap();
            assert!(boundary_compatibility(&m, &c).unwrap().abs() <= 1e-10);
        }
    }
}
