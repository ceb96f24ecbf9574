//! Stokes, Oseen and Navier-Stokes drivers.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{HdgError, Result};
use crate::geometry::map_edge_point;
use crate::global_system::{assemble_global, structure_checks, DofMap, GlobalSystem, StructureReport};
use crate::local_assembly::{
    assemble_local_blocks, condense, CondensedElement, Convection, Discretization, ElementSetup, FaceRole,
    FlowData, LocalBlocks, VectorField,
};
use crate::mesh::{BoundaryTag, FaceKind, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Stokes,
    Oseen,
    NavierStokes,
}

impl Regime {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "stokes" => Ok(Self::Stokes),
            "oseen" => Ok(Self::Oseen),
            "navier_stokes" | "ns" | "navierstokes" => Ok(Self::NavierStokes),
            other => Err(HdgError::InvalidInput(format!("unknown regime '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Stokes => "stokes",
            Self::Oseen => "oseen",
            Self::NavierStokes => "navier_stokes",
        }
    }
}

/// Treatment of faces tagged as outflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutflowMode {
    /// Zero tangential velocity and zero normal stress.
    Outflow,
    /// (sigma - u (u.n)) n = 0.
    HomogeneousNeumann,
    /// sigma n = 0.
    TractionFree,
}

impl OutflowMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "outflow" => Ok(Self::Outflow),
            "homogeneous_neumann" | "neumann" => Ok(Self::HomogeneousNeumann),
            "traction_free" => Ok(Self::TractionFree),
            other => Err(HdgError::InvalidInput(format!("unknown outflow mode '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Outflow => "outflow",
            Self::HomogeneousNeumann => "homogeneous_neumann",
            Self::TractionFree => "traction_free",
        }
    }
}

/// How the convective stabilization is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauMode {
    /// beta times the largest 2-norm of the convection over all mesh nodes.
    Global2,
    /// beta times the largest max-norm over all mesh nodes.
    GlobalInf,
    /// beta times the largest 2-norm over the nodes of each element.
    Element2,
    /// beta max(a.n, 0) per face, the largest over the face's points.
    FaceUpwind,
}

impl TauMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "global2" | "global_2" | "2" | "two" => Ok(Self::Global2),
            "globalinf" | "global_inf" | "inf" => Ok(Self::GlobalInf),
            "element2" | "element" => Ok(Self::Element2),
            "face" | "face_upwind" | "upwind" => Ok(Self::FaceUpwind),
            other => Err(HdgError::InvalidInput(format!("unknown tau_a mode '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Global2 => "global2",
            Self::GlobalInf => "global_inf",
            Self::Element2 => "element2",
            Self::FaceUpwind => "face_upwind",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Stabilization {
    pub kappa: f64,
    pub beta: f64,
    /// Characteristic length; the longest bounding-box side when unset.
    pub ell: Option<f64>,
    pub mode: TauMode,
}

impl Default for Stabilization {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            beta: 0.0,
            ell: None,
            mode: TauMode::Global2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    pub max_iters: usize,
    pub tol_increment: f64,
    pub tol_residual: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tol_increment: 1e-10,
            tol_residual: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub stabilization: Stabilization,
    pub outflow: OutflowMode,
    /// Lower bound for tau - a.n on every element face.
    pub gamma: f64,
    /// Proceed even when the admissibility condition fails.
    pub force: bool,
    pub threads: usize,
    pub newton: NewtonConfig,
    /// Apply the pressure-level fix on pure-Dirichlet problems.
    pub regularize: bool,
    pub postprocess: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            stabilization: Stabilization::default(),
            outflow: OutflowMode::Outflow,
            gamma: 1e-10,
            force: false,
            threads: 1,
            newton: NewtonConfig::default(),
            regularize: true,
            postprocess: true,
        }
    }
}

pub struct FlowProblem<'a> {
    pub mesh: &'a Mesh,
    pub data: &'a dyn FlowData,
    pub regime: Regime,
    /// Convection field for the Oseen regime.
    pub convection: Option<VectorField<'a>>,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonStep {
    pub increment: f64,
    pub residual: f64,
    pub tau_a: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub tau_d: f64,
    pub tau_a: f64,
    pub admissibility_margin: f64,
    pub worst_element: usize,
    pub worst_face: usize,
    pub admissible: bool,
    pub global_residual: f64,
    pub max_local_residual: f64,
    pub max_compatibility_residual: f64,
    /// Pure-Dirichlet problems: residual of the compatibility equation that
    /// the pressure-level constraint replaced. It measures how far the
    /// discrete boundary data is from zero net flux.
    pub dropped_compatibility: f64,
    /// Worst structural diagnostics over every solved linear system.
    pub structure: StructureReport,
    pub n_dof: usize,
    pub pure_dirichlet: bool,
    pub newton: Vec<NewtonStep>,
    pub converged: bool,
    /// Why the Newton iteration stopped early, if it did.
    pub failure: Option<String>,
    pub seconds: f64,
}

/// Discrete solution.
#[derive(Debug, Clone)]
pub struct Solution {
    pub k: usize,
    /// Per element: L node-major (3 values per node).
    pub l: Vec<Vec<f64>>,
    /// Per element: u node-major (2 values per node).
    pub u: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub zeta: Vec<f64>,
    /// Per face: trace values in face node order, 2 per node; Dirichlet faces
    /// carry none.
    pub u_hat: Vec<Option<Vec<f64>>>,
    /// Mean pressure on each element boundary.
    pub rho: Vec<f64>,
    /// Postprocessed velocity on the degree k+1 element, node-major.
    pub ustar: Option<Vec<Vec<f64>>>,
    pub report: SolveReport,
}

impl Solution {
    /// Nodal interpolant of given fields, with traces on every face and the
    /// boundary mean of `p` on each element.
    pub fn interpolate(
        mesh: &Mesh,
        u: &dyn Fn([f64; 2]) -> [f64; 2],
        l: &dyn Fn([f64; 2]) -> [f64; 3],
        p: &dyn Fn([f64; 2]) -> f64,
    ) -> Result<Self> {
        let disc = Discretization::new(mesh.elem_type, mesh.degree)?;
        let ne = mesh.num_elements();
        let mut sol = Solution {
            k: mesh.degree,
            l: Vec::with_capacity(ne),
            u: Vec::with_capacity(ne),
            p: Vec::with_capacity(ne),
            zeta: vec![0.0; ne],
            u_hat: mesh
                .faces
                .iter()
                .map(|f| Some(f.nodes.iter().flat_map(|&n| u(mesh.nodes[n])).collect()))
                .collect(),
            rho: Vec::with_capacity(ne),
            ustar: None,
            report: SolveReport::default(),
        };
        for e in 0..ne {
            let xs: Vec<[f64; 2]> = mesh.elements[e].iter().map(|&n| mesh.nodes[n]).collect();
            sol.u.push(xs.iter().flat_map(|&x| u(x)).collect());
            sol.l.push(xs.iter().flat_map(|&x| l(x)).collect());
            sol.p.push(xs.iter().map(|&x| p(x)).collect());
            let (mut int, mut len) = (0.0, 0.0);
            for f in 0..disc.nfa() {
                for (s, w) in disc.q_face.points.iter().zip(&disc.q_face.weights) {
                    let (x, _, jac, _) = map_edge_point(&xs, &disc.re, f, s[0]);
                    int += p(x) * jac * w;
                    len += jac * w;
                }
            }
            sol.rho.push(int / len);
        }
        Ok(sol)
    }
}

/// Discretization, roles and numbering shared by the solves on one mesh.
pub struct Setup<'a> {
    pub problem: &'a FlowProblem<'a>,
    pub disc: Discretization,
    pub roles: Vec<FaceRole>,
    pub dofmap: DofMap,
    pub pure_dirichlet: bool,
    pub options: SolverOptions,
}

fn face_role(kind: FaceKind, outflow: OutflowMode) -> Result<FaceRole> {
    Ok(match kind {
        FaceKind::Interior => FaceRole::Interior,
        FaceKind::Boundary(Some(BoundaryTag::Dirichlet)) => FaceRole::Dirichlet,
        FaceKind::Boundary(Some(BoundaryTag::Neumann)) => FaceRole::Neumann {
            convective: true,
            traction: true,
        },
        FaceKind::Boundary(Some(BoundaryTag::Outflow)) => match outflow {
            OutflowMode::Outflow => FaceRole::NormalOnly,
            OutflowMode::HomogeneousNeumann => FaceRole::Neumann {
                convective: true,
                traction: false,
            },
            OutflowMode::TractionFree => FaceRole::Neumann {
                convective: false,
                traction: false,
            },
        },
        FaceKind::Boundary(None) => return Err(HdgError::Mesh("untagged boundary face".into())),
    })
}

fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(threads: usize, n: usize, f: F) -> Vec<T> {
    if threads <= 1 {
        (0..n).map(f).collect()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            Err(_) => (0..n).map(f).collect(),
        }
    }
}

impl<'a> Setup<'a> {
    pub fn new(problem: &'a FlowProblem<'a>, options: SolverOptions) -> Result<Self> {
        let mesh = problem.mesh;
        mesh.check_tagged()?;
        if !(problem.data.nu() > 0.0) {
            return Err(HdgError::InvalidInput("viscosity must be positive".into()));
        }
        let st = options.stabilization;
        if !(st.kappa > 0.0) || st.beta < 0.0 || st.ell.is_some_and(|l| !(l > 0.0)) {
            return Err(HdgError::InvalidInput("need kappa > 0, beta >= 0 and ell > 0".into()));
        }
        if problem.regime == Regime::Oseen && problem.convection.is_none() {
            return Err(HdgError::InvalidInput("the Oseen regime needs a convection field".into()));
        }
        let disc = Discretization::new(mesh.elem_type, mesh.degree)?;
        let roles: Vec<FaceRole> = mesh
            .faces
            .iter()
            .map(|f| face_role(f.kind, options.outflow))
            .collect::<Result<_>>()?;
        let pure_dirichlet = mesh.faces.iter().all(|f| f.kind == FaceKind::Interior || f.is_dirichlet());
        let dofmap = DofMap::new(&roles, disc.nfn(), 2, mesh.num_elements());
        Ok(Self {
            problem,
            disc,
            roles,
            dofmap,
            pure_dirichlet,
            options,
        })
    }

    pub fn tau_d(&self) -> f64 {
        let st = self.options.stabilization;
        let ell = st.ell.unwrap_or_else(|| self.problem.mesh.bounding_box_length());
        st.kappa * self.problem.data.nu() / ell
    }

    /// Convection samples (a_hat, n) at the face quadrature points of local
    /// face `l` of element `e`.
    fn face_samples(&self, e: usize, l: usize, conv: &ConvState) -> Vec<([f64; 2], [f64; 2])> {
        let mesh = self.problem.mesh;
        let coords = mesh.element_coords(e);
        let f = mesh.elem_faces[e][l];
        let rev = mesh.elem_face_reversed[e][l];
        let nfn = self.disc.nfn();
        self.disc
            .q_face
            .points
            .iter()
            .map(|eta| {
                let s = if rev { -eta[0] } else { eta[0] };
                let (x, n, _, _) = map_edge_point(&coords, &self.disc.re, l, s);
                let a = match conv {
                    ConvState::None => [0.0, 0.0],
                    ConvState::Field(fa) => fa(x),
                    ConvState::Newton { u_hat, .. } => match &u_hat[f] {
                        Some(uh) => {
                            let (nh, _) = self.disc.seg.shape([eta[0], 0.0]);
                            let mut a = [0.0; 2];
                            for j in 0..nfn {
                                a[0] += nh[j] * uh[2 * j];
                                a[1] += nh[j] * uh[2 * j + 1];
                            }
                            a
                        }
                        None => self.problem.data.dirichlet(x),
                    },
                };
                (a, n)
            })
            .collect()
    }

    /// Stabilization per element face and the reported global tau^a.
    fn taus(&self, conv: &ConvState) -> (Vec<Vec<f64>>, f64) {
        let mesh = self.problem.mesh;
        let st = self.options.stabilization;
        let td = self.tau_d();
        let ne = mesh.num_elements();
        let nfa = self.disc.nfa();
        let node_norms = |e: usize, inf: bool| -> f64 {
            let vals: Vec<[f64; 2]> = match conv {
                ConvState::None => vec![],
                ConvState::Field(fa) => mesh.elements[e].iter().map(|&n| fa(mesh.nodes[n])).collect(),
                ConvState::Newton { u, .. } => (0..self.disc.nen()).map(|j| [u[e][2 * j], u[e][2 * j + 1]]).collect(),
            };
            vals.iter()
                .map(|a| if inf { a[0].abs().max(a[1].abs()) } else { (a[0] * a[0] + a[1] * a[1]).sqrt() })
                .fold(0.0, f64::max)
        };
        if matches!(conv, ConvState::None) || st.beta == 0.0 {
            return (vec![vec![td; nfa]; ne], 0.0);
        }
        match st.mode {
            TauMode::Global2 | TauMode::GlobalInf => {
                let inf = st.mode == TauMode::GlobalInf;
                let m = (0..ne).map(|e| node_norms(e, inf)).fold(0.0, f64::max);
                let ta = st.beta * m;
                (vec![vec![td + ta; nfa]; ne], ta)
            }
            TauMode::Element2 => {
                let mut maxta: f64 = 0.0;
                let t = (0..ne)
                    .map(|e| {
                        let ta = st.beta * node_norms(e, false);
                        maxta = maxta.max(ta);
                        vec![td + ta; nfa]
                    })
                    .collect();
                (t, maxta)
            }
            TauMode::FaceUpwind => {
                let mut maxta: f64 = 0.0;
                let t = (0..ne)
                    .map(|e| {
                        (0..nfa)
                            .map(|l| {
                                let m = self
                                    .face_samples(e, l, conv)
                                    .iter()
                                    .map(|(a, n)| (a[0] * n[0] + a[1] * n[1]).max(0.0))
                                    .fold(0.0, f64::max);
                                let ta = st.beta * m;
                                maxta = maxta.max(ta);
                                td + ta
                            })
                            .collect()
                    })
                    .collect();
                (t, maxta)
            }
        }
    }

    fn assemble_all(&self, conv: &ConvState, taus: &[Vec<f64>]) -> Result<Vec<LocalBlocks>> {
        let mesh = self.problem.mesh;
        let nfa = self.disc.nfa();
        let results = par_map(self.options.threads, mesh.num_elements(), |e| {
            let roles: Vec<FaceRole> = (0..nfa).map(|l| self.roles[mesh.elem_faces[e][l]]).collect();
            let local_hat: Vec<Option<Vec<f64>>>;
            let convection = match conv {
                ConvState::None => Convection::None,
                ConvState::Field(f) => Convection::Field(*f),
                ConvState::Newton { u, u_hat } => {
                    local_hat = (0..nfa).map(|l| u_hat[mesh.elem_faces[e][l]].clone()).collect();
                    return assemble_local_blocks(
                        &self.disc,
                        &ElementSetup {
                            coords: mesh.element_coords(e),
                            roles,
                            reversed: mesh.elem_face_reversed[e].clone(),
                            tau: taus[e].clone(),
                            data: self.problem.data,
                            convection: Convection::Newton {
                                u: &u[e],
                                u_hat: &local_hat,
                            },
                        },
                    );
                }
            };
            assemble_local_blocks(
                &self.disc,
                &ElementSetup {
                    coords: mesh.element_coords(e),
                    roles,
                    reversed: mesh.elem_face_reversed[e].clone(),
                    tau: taus[e].clone(),
                    data: self.problem.data,
                    convection,
                },
            )
        });
        results.into_iter().collect()
    }

    fn element_dofs(&self, blocks: &[LocalBlocks]) -> Vec<Vec<usize>> {
        blocks
            .iter()
            .enumerate()
            .map(|(e, b)| self.dofmap.element_dofs(self.problem.mesh, e, b))
            .collect()
    }
}

/// Convection state for one linear solve.
enum ConvState<'a> {
    None,
    Field(VectorField<'a>),
    Newton {
        u: &'a [Vec<f64>],
        u_hat: &'a [Option<Vec<f64>>],
    },
}

/// Everything produced by one linear solve.
pub struct LinearStep {
    pub blocks: Vec<LocalBlocks>,
    pub condensed: Vec<CondensedElement>,
    pub element_dofs: Vec<Vec<usize>>,
    pub system: GlobalSystem,
    pub x: Vec<f64>,
    pub residual: f64,
    pub structure: StructureReport,
    pub margin: (f64, usize, usize),
    pub tau_a: f64,
}

fn admissibility(blocks: &[LocalBlocks]) -> (f64, usize, usize) {
    let mut worst = (f64::INFINITY, 0, 0);
    for (e, b) in blocks.iter().enumerate() {
        if b.admissibility_margin < worst.0 {
            worst = (b.admissibility_margin, e, b.worst_face);
        }
    }
    worst
}

fn linear_step(setup: &Setup, conv: &ConvState) -> Result<LinearStep> {
    let (taus, tau_a) = setup.taus(conv);
    let blocks = setup.assemble_all(conv, &taus)?;
    let margin = admissibility(&blocks);
    if margin.0 < setup.options.gamma && !setup.options.force {
        return Err(HdgError::Inadmissible {
            element: margin.1,
            face: margin.2,
            min_margin: margin.0,
        });
    }
    let condensed: Vec<CondensedElement> = par_map(setup.options.threads, blocks.len(), |e| condense(&blocks[e], e))
        .into_iter()
        .collect::<Result<_>>()?;
    let element_dofs = setup.element_dofs(&blocks);
    let system = assemble_global(
        &setup.dofmap,
        &condensed,
        &element_dofs,
        setup.pure_dirichlet,
        setup.options.regularize,
    )?;
    let (x, residual) = system.solve().map_err(|e| {
        HdgError::GlobalSolve(format!("{e}; admissibility margin {:e} on element {}", margin.0, margin.1))
    })?;
    let structure = structure_checks(&system, &condensed);
    Ok(LinearStep {
        blocks,
        condensed,
        element_dofs,
        system,
        x,
        residual,
        structure,
        margin,
        tau_a,
    })
}

/// Expand global hybrid values to full traces per face.
fn face_traces(setup: &Setup, x: &[f64]) -> Vec<Option<Vec<f64>>> {
    let mesh = setup.problem.mesh;
    let nfn = setup.disc.nfn();
    (0..mesh.num_faces())
        .map(|f| {
            let off = setup.dofmap.face_offset[f]?;
            Some(match setup.roles[f] {
                FaceRole::NormalOnly => {
                    let (e, l) = mesh.faces[f].elements[0];
                    let coords = mesh.element_coords(e);
                    let (_, n, _, _) = map_edge_point(&coords, &setup.disc.re, l, 0.0);
                    (0..nfn).flat_map(|j| [x[off + j] * n[0], x[off + j] * n[1]]).collect()
                }
                _ => x[off..off + 2 * nfn].to_vec(),
            })
        })
        .collect()
}

fn element_hybrid(step: &LinearStep, e: usize, x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(step.element_dofs[e].len(), step.element_dofs[e].iter().map(|&d| x[d]))
}

fn recover(setup: &Setup, step: &LinearStep) -> Solution {
    let mesh = setup.problem.mesh;
    let nen = setup.disc.nen();
    let ne = mesh.num_elements();
    let mut sol = Solution {
        k: setup.disc.k,
        l: Vec::with_capacity(ne),
        u: Vec::with_capacity(ne),
        p: Vec::with_capacity(ne),
        zeta: Vec::with_capacity(ne),
        u_hat: face_traces(setup, &step.x),
        rho: Vec::with_capacity(ne),
        ustar: None,
        report: SolveReport::default(),
    };
    let mut max_local: f64 = 0.0;
    let mut max_compat: f64 = 0.0;
    for e in 0..ne {
        let uh = element_hybrid(step, e, &step.x);
        let rho = step.x[setup.dofmap.rho_index(e)];
        let ce = &step.condensed[e];
        let blk = &step.blocks[e];
        let xl = ce.recover(&uh, rho);
        let r = blk.local_residual(&xl, &uh, rho * blk.perimeter);
        let scale = blk.f.norm() + (&blk.b * &uh).norm() + (rho * blk.perimeter).abs();
        max_local = max_local.max(if scale > 0.0 { r.norm() / scale } else { r.norm() });
        let compat = if uh.is_empty() { 0.0 } else { blk.g.dot(&uh) } - blk.f_rho;
        if step.system.regularized && e == 0 {
            sol.report.dropped_compatibility = compat.abs();
        } else {
            max_compat = max_compat.max(compat.abs());
        }
        sol.l.push(xl.as_slice()[..3 * nen].to_vec());
        sol.u.push(xl.as_slice()[blk.u_offset()..blk.u_offset() + 2 * nen].to_vec());
        sol.p.push(xl.as_slice()[blk.p_offset()..blk.p_offset() + nen].to_vec());
        sol.zeta.push(xl[blk.zeta_index()]);
        sol.rho.push(rho);
    }
    sol.report.max_local_residual = max_local;
    sol.report.max_compatibility_residual = max_compat;
    sol.report.global_residual = step.residual;
    sol.report.n_dof = setup.dofmap.size();
    sol.report.pure_dirichlet = setup.pure_dirichlet;
    sol.report.admissibility_margin = step.margin.0;
    sol.report.worst_element = step.margin.1;
    sol.report.worst_face = step.margin.2;
    sol.report.admissible = step.margin.0 >= setup.options.gamma;
    sol.report.tau_d = setup.tau_d();
    sol.report.tau_a = step.tau_a;
    sol.report.structure = step.structure.clone();
    sol
}

fn merge_structure(acc: &mut StructureReport, s: &StructureReport) {
    acc.max_hg_relative = acc.max_hg_relative.max(s.max_hg_relative);
    acc.max_hg_absolute = acc.max_hg_absolute.max(s.max_hg_absolute);
    acc.asymmetry = acc.asymmetry.max(s.asymmetry);
    acc.nnz = s.nnz;
    acc.row_nnz_min = s.row_nnz_min;
    acc.row_nnz_max = s.row_nnz_max;
}

/// Solve a linear (Stokes or Oseen) problem.
pub fn solve_linear_flow(problem: &FlowProblem, options: SolverOptions) -> Result<Solution> {
    let t0 = Instant::now();
    let setup = Setup::new(problem, options)?;
    let conv = match problem.regime {
        Regime::Stokes => ConvState::None,
        Regime::Oseen => ConvState::Field(problem.convection.expect("checked in setup")),
        Regime::NavierStokes => {
            return Err(HdgError::InvalidInput("use solve_navier_stokes for the nonlinear regime".into()))
        }
    };
    let step = linear_step(&setup, &conv)?;
    let mut sol = recover(&setup, &step);
    sol.report.converged = true;
    if options.postprocess {
        sol.ustar = Some(crate::postprocess::postprocess_velocity(&sol, problem.mesh, &setup.disc, problem.data)?);
    }
    sol.report.seconds = t0.elapsed().as_secs_f64();
    Ok(sol)
}

/// Nonlinear residual of the Newton system assembled at the state it was
/// linearized about, relative to the size of the data.
/// Relative residual of the nonlinear problem at the state (`x`, `state`),
/// using blocks linearized about that same state.
fn newton_residual(setup: &Setup, blocks: &[LocalBlocks], element_dofs: &[Vec<usize>], x: &[f64], state: &Solution) -> f64 {
    let mut glob = vec![0.0; setup.dofmap.size()];
    let mut glob_f = vec![0.0; setup.dofmap.size()];
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, blk) in blocks.iter().enumerate() {
        let uh = DVector::from_iterator(element_dofs[e].len(), element_dofs[e].iter().map(|&d| x[d]));
        let rho = x[setup.dofmap.rho_index(e)];
        let mut xl = Vec::with_capacity(blk.dim());
        xl.extend_from_slice(&state.l[e]);
        xl.extend_from_slice(&state.u[e]);
        xl.extend_from_slice(&state.p[e]);
        xl.push(state.zeta[e]);
        let xl = DVector::from_vec(xl);
        let rl = blk.local_residual(&xl, &uh, rho * blk.perimeter);
        num += rl.norm_squared();
        den += blk.f.norm_squared();
        if !uh.is_empty() {
            let rg = blk.global_residual(&xl, &uh);
            for (a, &d) in element_dofs[e].iter().enumerate() {
                glob[d] += rg[a];
                glob_f[d] += blk.f_hat[a];
            }
        }
    }
    num += glob.iter().map(|v| v * v).sum::<f64>();
    den += glob_f.iter().map(|v| v * v).sum::<f64>();
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

/// Solve the steady Navier-Stokes problem by Newton-Raphson from a Stokes
/// initial guess, with tau^a lagged one iteration.
///
/// On non-convergence the last iterate is returned with `converged = false`.
pub fn solve_navier_stokes(problem: &FlowProblem, options: SolverOptions) -> Result<Solution> {
    let t0 = Instant::now();
    let setup = Setup::new(problem, options)?;
    let first = linear_step(&setup, &ConvState::None)?;
    let structure = first.structure.clone();
    let sol = recover(&setup, &first);
    newton_loop(&setup, sol, first.x, structure, first.margin.0, t0)
}

/// Newton-Raphson from a given state, such as an interpolated exact
/// solution. Only the velocity, its traces and the mean pressures of `guess`
/// enter the first linearization.
pub fn solve_navier_stokes_from(problem: &FlowProblem, options: SolverOptions, guess: &Solution) -> Result<Solution> {
    let t0 = Instant::now();
    let setup = Setup::new(problem, options)?;
    let mesh = problem.mesh;
    if guess.u.len() != mesh.num_elements() || guess.u_hat.len() != mesh.num_faces() || guess.k != setup.disc.k {
        return Err(HdgError::InvalidInput("initial guess does not match the mesh".into()));
    }
    let nfn = setup.disc.nfn();
    let mut x = vec![0.0; setup.dofmap.size()];
    for f in 0..mesh.num_faces() {
        let Some(off) = setup.dofmap.face_offset[f] else { continue };
        let Some(uh) = &guess.u_hat[f] else {
            return Err(HdgError::InvalidInput(format!("initial guess has no trace on face {f}")));
        };
        if setup.roles[f] == FaceRole::NormalOnly {
            let (e, l) = mesh.faces[f].elements[0];
            let (_, n, _, _) = map_edge_point(&mesh.element_coords(e), &setup.disc.re, l, 0.0);
            for j in 0..nfn {
                x[off + j] = uh[2 * j] * n[0] + uh[2 * j + 1] * n[1];
            }
        } else {
            x[off..off + 2 * nfn].copy_from_slice(&uh[..2 * nfn]);
        }
    }
    for e in 0..mesh.num_elements() {
        x[setup.dofmap.rho_index(e)] = guess.rho[e];
    }
    let mut sol = guess.clone();
    sol.u_hat = face_traces(&setup, &x);
    newton_loop(&setup, sol, x, StructureReport::default(), f64::INFINITY, t0)
}

fn newton_loop(
    setup: &Setup,
    mut sol: Solution,
    mut x: Vec<f64>,
    mut structure: StructureReport,
    mut last_margin: f64,
    t0: Instant,
) -> Result<Solution> {
    let options = setup.options;
    let problem = setup.problem;
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..options.newton.max_iters {
        let step = {
            let conv = ConvState::Newton {
                u: &sol.u,
                u_hat: &sol.u_hat,
            };
            match linear_step(setup, &conv) {
                Ok(step) => step,
                Err(e) => {
                    sol.report.failure = Some(e.to_string());
                    break;
                }
            }
        };
        let residual = newton_residual(setup, &step.blocks, &step.element_dofs, &x, &sol);
        let hat_norm: f64 = step.x[..setup.dofmap.n_hat].iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff: f64 = step.x[..setup.dofmap.n_hat]
            .iter()
            .zip(&x[..setup.dofmap.n_hat])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let increment = if hat_norm > 0.0 { diff / hat_norm } else { diff };
        merge_structure(&mut structure, &step.structure);
        history.push(NewtonStep {
            increment,
            residual,
            tau_a: step.tau_a,
        });
        last_margin = step.margin.0;
        sol = recover(setup, &step);
        x = step.x;
        if increment <= options.newton.tol_increment && residual <= options.newton.tol_residual {
            converged = true;
            break;
        }
        if !increment.is_finite() {
            break;
        }
    }
    let failure = sol.report.failure.take();
    sol.report.structure = structure;
    sol.report.newton = history;
    sol.report.failure = failure;
    sol.report.converged = converged;
    sol.report.admissibility_margin = last_margin;
    if options.postprocess {
        match crate::postprocess::postprocess_velocity(&sol, problem.mesh, &setup.disc, problem.data) {
            Ok(us) => sol.ustar = Some(us),
            Err(_) if !converged => sol.ustar = None,
            Err(e) => return Err(e),
        }
    }
    sol.report.seconds = t0.elapsed().as_secs_f64();
    Ok(sol)
}

/// Solve in the requested regime.
pub fn solve(problem: &FlowProblem, options: SolverOptions) -> Result<Solution> {
    match problem.regime {
        Regime::NavierStokes => solve_navier_stokes(problem, options),
        _ => solve_linear_flow(problem, options),
    }
}

/// Assemble the linear system of a Stokes or Oseen problem without solving
/// it, optionally skipping the pure-Dirichlet fix.
pub fn assemble_linear_system(problem: &FlowProblem, options: SolverOptions) -> Result<(GlobalSystem, Vec<CondensedElement>)> {
    let setup = Setup::new(problem, options)?;
    let conv = match problem.regime {
        Regime::Oseen => ConvState::Field(problem.convection.expect("checked in setup")),
        _ => ConvState::None,
    };
    let (taus, _) = setup.taus(&conv);
    let blocks = setup.assemble_all(&conv, &taus)?;
    let condensed: Vec<CondensedElement> = blocks
        .iter()
        .enumerate()
        .map(|(e, b)| condense(b, e))
        .collect::<Result<_>>()?;
    let dofs = setup.element_dofs(&blocks);
    let sys = assemble_global(&setup.dofmap, &condensed, &dofs, setup.pure_dirichlet, options.regularize)?;
    Ok((sys, condensed))
}

/// Smallest tau - a.n over all element faces for a prescribed convection
/// field, with the element and local face where it occurs.
pub fn admissibility_check(problem: &FlowProblem, options: SolverOptions) -> Result<(f64, usize, usize)> {
    let setup = Setup::new(problem, options)?;
    let conv = match (problem.regime, problem.convection) {
        (Regime::Stokes, _) | (_, None) => ConvState::None,
        (_, Some(f)) => ConvState::Field(f),
    };
    let (taus, _) = setup.taus(&conv);
    let mut worst = (f64::INFINITY, 0, 0);
    for e in 0..problem.mesh.num_elements() {
        for l in 0..setup.disc.nfa() {
            for (a, n) in setup.face_samples(e, l, &conv) {
                let m = taus[e][l] - (a[0] * n[0] + a[1] * n[1]);
                if m < worst.0 {
                    worst = (m, e, l);
                }
            }
        }
    }
    Ok(worst)
}

/// Stabilization values (tau^d, tau^a) for a prescribed convection field.
pub fn stabilization(problem: &FlowProblem, options: SolverOptions) -> Result<(f64, f64)> {
    let setup = Setup::new(problem, options)?;
    let conv = match problem.convection {
        Some(f) if problem.regime != Regime::Stokes => ConvState::Field(f),
        _ => ConvState::None,
    };
    let (_, ta) = setup.taus(&conv);
    Ok((setup.tau_d(), ta))
}
