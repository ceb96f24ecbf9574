//! Global saddle-point system over hybrid traces and element mean pressures.

use std::fmt::Write as _;
use std::path::Path;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};

use crate::error::{HdgError, Result};
use crate::local_assembly::{CondensedElement, FaceRole, LocalBlocks};
use crate::mesh::Mesh;

/// Global numbering of hybrid unknowns: face-major, node-major,
/// component-minor, followed by one mean pressure per element.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub face_offset: Vec<Option<usize>>,
    pub face_ndof: Vec<usize>,
    pub n_hat: usize,
    pub n_elem: usize,
}

impl DofMap {
    pub fn new(roles: &[FaceRole], nfn: usize, nsd: usize, n_elem: usize) -> Self {
        let mut face_offset = Vec::with_capacity(roles.len());
        let mut face_ndof = Vec::with_capacity(roles.len());
        let mut next = 0;
        for r in roles {
            let nd = match r {
                FaceRole::Dirichlet => 0,
                FaceRole::NormalOnly => nfn,
                _ => nfn * nsd,
            };
            face_offset.push(if nd > 0 { Some(next) } else { None });
            face_ndof.push(nd);
            next += nd;
        }
        Self {
            face_offset,
            face_ndof,
            n_hat: next,
            n_elem,
        }
    }

    pub fn size(&self) -> usize {
        self.n_hat + self.n_elem
    }

    pub fn rho_index(&self, e: usize) -> usize {
        self.n_hat + e
    }

    /// Global indices of an element's hybrid unknowns, in element order.
    pub fn element_dofs(&self, mesh: &Mesh, e: usize, blocks: &LocalBlocks) -> Vec<usize> {
        let mut out = Vec::with_capacity(blocks.n_hybrid());
        for &l in &blocks.hybrid_faces {
            let f = mesh.elem_faces[e][l];
            let off = self.face_offset[f].expect("hybrid face without DOFs");
            out.extend(off..off + self.face_ndof[f]);
        }
        out
    }
}

/// Assembled global matrix in coalesced coordinate form, sorted by
/// (row, column).
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub n: usize,
    pub n_hat: usize,
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    pub pure_dirichlet: bool,
    /// Whether the compatibility row of element 0 was replaced by the
    /// pressure-level constraint.
    pub regularized: bool,
}

fn coalesce(mut t: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    t.sort_by_key(|&(r, c, _)| (r, c));
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
    for (r, c, v) in t {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out
}

/// Scatter the condensed element contributions.
///
/// When `pure_dirichlet` and `regularize` are both set, the compatibility
/// row of element 0 becomes sum_e rho_e = 0.
pub fn assemble_global(
    dofmap: &DofMap,
    condensed: &[CondensedElement],
    element_dofs: &[Vec<usize>],
    pure_dirichlet: bool,
    regularize: bool,
) -> Result<GlobalSystem> {
    let n = dofmap.size();
    if n == 0 {
        return Err(HdgError::InvalidInput("empty global system".into()));
    }
    let mut t = Vec::new();
    let mut rhs = vec![0.0; n];
    let fix = pure_dirichlet && regularize;
    for (e, (ce, dofs)) in condensed.iter().zip(element_dofs).enumerate() {
        if dofs.len() != ce.khat.nrows() {
            return Err(HdgError::InvalidInput(format!("DOF count mismatch on element {e}")));
        }
        let re = dofmap.rho_index(e);
        for (a, &ra) in dofs.iter().enumerate() {
            for (b, &cb) in dofs.iter().enumerate() {
                let v = ce.khat[(a, b)];
                if v != 0.0 {
                    t.push((ra, cb, v));
                }
            }
            if ce.h[a] != 0.0 {
                t.push((ra, re, ce.h[a]));
            }
            if !(fix && e == 0) && ce.g[a] != 0.0 {
                t.push((re, ra, ce.g[a]));
            }
            rhs[ra] += ce.fhat[a];
        }
        if !(fix && e == 0) {
            rhs[re] += ce.f_rho;
        }
    }
    if fix {
        let r0 = dofmap.rho_index(0);
        for e in 0..dofmap.n_elem {
            t.push((r0, dofmap.rho_index(e), 1.0));
        }
        rhs[r0] = 0.0;
    }
    Ok(GlobalSystem {
        n,
        n_hat: dofmap.n_hat,
        entries: coalesce(t),
        rhs,
        pure_dirichlet,
        regularized: fix,
    })
}

impl GlobalSystem {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// Sparse LU solve; returns the solution and ||Ax - b|| / ||b||.
    pub fn solve(&self) -> Result<(Vec<f64>, f64)> {
        let trip: Vec<Triplet<usize, usize, f64>> =
            self.entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &trip)
            .map_err(|e| HdgError::GlobalSolve(format!("matrix construction: {e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| HdgError::GlobalSolve(format!("sparse LU: {e:?}")))?;
        let b = Mat::<f64>::from_fn(self.n, 1, |i, _| self.rhs[i]);
        let xm = lu.solve(&b);
        let x: Vec<f64> = (0..self.n).map(|i| xm[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(HdgError::GlobalSolve("non-finite solution (singular matrix?)".into()));
        }
        let r = self.relative_residual(&x);
        Ok((x, r))
    }

    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        let rn: f64 = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = self.rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        if bn > 0.0 {
            rn / bn
        } else {
            rn
        }
    }

    /// ||A - A^T||_F / ||A||_F. The row and column of the pressure-level
    /// constraint are left out of regularized systems, since replacing one
    /// row breaks the symmetry by construction.
    pub fn asymmetry(&self) -> f64 {
        let skip = if self.regularized { Some(self.n_hat) } else { None };
        let kept: Vec<(usize, usize, f64)> = self
            .entries
            .iter()
            .copied()
            .filter(|&(r, c, _)| Some(r) != skip && Some(c) != skip)
            .collect();
        let mut tr: Vec<(usize, usize, f64)> = kept.iter().map(|&(r, c, v)| (c, r, -v)).collect();
        tr.extend_from_slice(&kept);
        let d = coalesce(tr);
        let num: f64 = d.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
        let den: f64 = kept.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    pub fn rhs_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.rhs.clone())
    }

    /// Coordinate text dump, one `row col value` triple per line.
    pub fn write_coo(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "% {} {} {}", self.n, self.n, self.entries.len());
        for &(r, c, v) in &self.entries {
            let _ = writeln!(s, "{r} {c} {v:.17e}");
        }
        std::fs::write(path, s)?;
        Ok(())
    }

    /// Number of stored nonzeros per row statistics (min, max, mean).
    pub fn row_pattern_stats(&self) -> (usize, usize, f64) {
        let mut counts = vec![0usize; self.n];
        for &(r, _, _) in &self.entries {
            counts[r] += 1;
        }
        let min = counts.iter().copied().min().unwrap_or(0);
        let max = counts.iter().copied().max().unwrap_or(0);
        let mean = if self.n > 0 { self.entries.len() as f64 / self.n as f64 } else { 0.0 };
        (min, max, mean)
    }
}

/// Structural diagnostics of an assembled problem.
#[derive(Debug, Clone, Default)]
pub struct StructureReport {
    /// max_e |H_e - G_e|_inf / |G_e|_2
    pub max_hg_relative: f64,
    pub max_hg_absolute: f64,
    pub asymmetry: f64,
    pub nnz: usize,
    pub row_nnz_min: usize,
    pub row_nnz_max: usize,
}

pub fn structure_checks(system: &GlobalSystem, condensed: &[CondensedElement]) -> StructureReport {
    let mut rep = StructureReport::default();
    for ce in condensed {
        if ce.g.is_empty() {
            continue;
        }
        let d = (&ce.h - &ce.g).amax();
        let gn = ce.g.norm();
        rep.max_hg_absolute = rep.max_hg_absolute.max(d);
        if gn > 0.0 {
            rep.max_hg_relative = rep.max_hg_relative.max(d / gn);
        }
    }
    rep.asymmetry = system.asymmetry();
    rep.nnz = system.entries.len();
    let (a, b, _) = system.row_pattern_stats();
    rep.row_nnz_min = a;
    rep.row_nnz_max = b;
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_counts() {
        let roles = [FaceRole::Interior, FaceRole::Dirichlet, FaceRole::NormalOnly];
        let m = DofMap::new(&roles, 3, 2, 2);
        assert_eq!(m.face_offset, vec![Some(0), None, Some(6)]);
        assert_eq!(m.n_hat, 9);
        assert_eq!(m.size(), 11);
    }

    #[test]
    fn coalesce_sums_duplicates() {
        let c = coalesce(vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0)]);
        assert_eq!(c, vec![(0, 0, 2.0), (1, 0, 4.0)]);
    }

    #[test]
    fn sparse_solve_small() {
        let s = GlobalSystem {
            n: 3,
            n_hat: 2,
            entries: vec![(0, 0, 4.0), (0, 2, 2.0), (1, 1, 3.0), (1, 2, 1.0), (2, 0, 1.0), (2, 1, 1.0)],
            rhs: vec![1.0, 2.0, 0.5],
            pure_dirichlet: false,
            regularized: false,
        };
        let (x, r) = s.solve().unwrap();
        assert!(r < 1e-14);
        let dense = s.to_dense();
        let y = dense * DVector::from_vec(x);
        assert!((y - s.rhs_vector()).norm() < 1e-14);
        assert!(s.asymmetry() > 0.0);
    }
}
