//! Element-local HDG matrices, static condensation and back-substitution.
//!
//! Local unknowns are ordered (L, u, p, zeta). L is node-major with msd
//! components per node, u is node-major with nsd components, p has one value
//! per node and zeta is the multiplier of the constraint <p, 1> = rho_e on
//! the element boundary. Hybrid unknowns of the element are the traces on its
//! non-Dirichlet faces, stored face by face in the face's own node order.

use nalgebra::{DMatrix, DVector};

use crate::dense::DenseLu;
use crate::error::{HdgError, Result};
use crate::geometry::{map_edge_point, map_point};
use crate::refelem::{ElementType, Quadrature, ReferenceElement};
use crate::voigt::{self, VoigtOps};

/// How a face enters the element and global problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceRole {
    Interior,
    Dirichlet,
    /// Prescribed traction. `convective` keeps the (a.n) u face term in the
    /// transmission row; `traction` adds the user traction to the RHS.
    Neumann { convective: bool, traction: bool },
    /// Only the normal velocity is unknown; tangential velocity vanishes and
    /// the normal stress is zero.
    NormalOnly,
}

impl FaceRole {
    pub fn is_hybrid(self) -> bool {
        self != FaceRole::Dirichlet
    }
}

/// Problem data evaluated pointwise.
pub trait FlowData: Sync {
    fn nu(&self) -> f64;
    fn source(&self, x: [f64; 2]) -> [f64; 2];
    fn dirichlet(&self, x: [f64; 2]) -> [f64; 2];
    /// Traction (sigma - u (a.n)) n on Neumann faces.
    fn traction(&self, x: [f64; 2], n: [f64; 2]) -> [f64; 2];
}

pub type VectorField<'a> = &'a (dyn Fn([f64; 2]) -> [f64; 2] + Sync);

/// Convective velocity seen by one element.
#[derive(Clone, Copy)]
pub enum Convection<'a> {
    None,
    /// Prescribed field a(x); its trace is used on the faces.
    Field(VectorField<'a>),
    /// Linearization about the element velocity `u` (node-major) and the face
    /// traces `u_hat` (per local face, face node order, full components;
    /// `None` on Dirichlet faces where the boundary data is used).
    Newton {
        u: &'a [f64],
        u_hat: &'a [Option<Vec<f64>>],
    },
}

/// Reference data shared by all elements of one discretization.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub elem_type: ElementType,
    pub k: usize,
    pub re: ReferenceElement,
    pub seg: ReferenceElement,
    pub re_star: ReferenceElement,
    pub q_elem: Quadrature,
    pub q_face: Quadrature,
    pub q_post: Quadrature,
    pub voigt: VoigtOps,
}

impl Discretization {
    pub fn new(elem_type: ElementType, k: usize) -> Result<Self> {
        Ok(Self {
            elem_type,
            k,
            re: ReferenceElement::new(elem_type, k)?,
            seg: ReferenceElement::new(ElementType::Segment, k)?,
            re_star: ReferenceElement::new(elem_type, k + 1)?,
            q_elem: Quadrature::new(elem_type, 2 * k + 2),
            q_face: Quadrature::new(ElementType::Segment, 2 * k + 2),
            q_post: Quadrature::new(elem_type, 2 * (k + 1) + 2),
            voigt: VoigtOps::new(2)?,
        })
    }

    pub fn nen(&self) -> usize {
        self.re.num_nodes()
    }

    pub fn nfn(&self) -> usize {
        self.k + 1
    }

    pub fn nfa(&self) -> usize {
        self.elem_type.num_faces()
    }
}

/// Dimension of the local problem, (msd + nsd + 1) nen + 1.
pub fn local_system_dimension(elem_type: ElementType, nsd: usize, k: usize) -> Result<usize> {
    let nen = match (elem_type, nsd) {
        (ElementType::Triangle, 2) => (k + 1) * (k + 2) / 2,
        (ElementType::Triangle, 3) => (k + 1) * (k + 2) * (k + 3) / 6,
        (ElementType::Quadrilateral, 2) => (k + 1).pow(2),
        (ElementType::Quadrilateral, 3) => (k + 1).pow(3),
        _ => {
            return Err(HdgError::InvalidInput(format!(
                "no local system for {} in {nsd}D",
                elem_type.name()
            )))
        }
    };
    Ok((voigt::msd(nsd) + nsd + 1) * nen + 1)
}

/// Per-element matrices before condensation.
#[derive(Debug, Clone)]
pub struct LocalBlocks {
    pub nen: usize,
    pub msd: usize,
    pub nsd: usize,
    /// Full local matrix in (L, u, p, zeta) order.
    pub k: DMatrix<f64>,
    /// Data vector (f_L, f_u, f_p, 0).
    pub f: DVector<f64>,
    /// Local faces carrying hybrid unknowns, in element face order.
    pub hybrid_faces: Vec<usize>,
    /// Column offset of each hybrid face.
    pub hybrid_offsets: Vec<usize>,
    /// Outward unit normal of each hybrid face when only the normal component
    /// is kept.
    pub normal_only: Vec<Option<[f64; 2]>>,
    /// Coupling of hybrid unknowns into the local equations, [A_Lû; A_uû; A_pû; 0].
    pub b: DMatrix<f64>,
    /// Local unknowns in the global rows, [A_ûL, A_ûu, A_ûp, 0].
    pub c: DMatrix<f64>,
    /// Hybrid-hybrid block of the global rows.
    pub a_hh: DMatrix<f64>,
    /// RHS of the global rows.
    pub f_hat: DVector<f64>,
    /// Compatibility row, 1^T A_pû.
    pub g: DVector<f64>,
    /// RHS of the compatibility row, -1^T f_p.
    pub f_rho: f64,
    /// |∂Ω_e|.
    pub perimeter: f64,
    /// Smallest tau - a.n over the element's face quadrature points.
    pub admissibility_margin: f64,
    pub worst_face: usize,
}

impl LocalBlocks {
    pub fn l_offset(&self) -> usize {
        0
    }
    pub fn u_offset(&self) -> usize {
        self.msd * self.nen
    }
    pub fn p_offset(&self) -> usize {
        (self.msd + self.nsd) * self.nen
    }
    pub fn zeta_index(&self) -> usize {
        (self.msd + self.nsd + 1) * self.nen
    }
    pub fn dim(&self) -> usize {
        self.k.nrows()
    }
    pub fn n_hybrid(&self) -> usize {
        self.b.ncols()
    }

    /// Copy of a sub-block of the local matrix.
    pub fn block(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> DMatrix<f64> {
        self.k.view((r0, c0), (nr, nc)).into_owned()
    }

    pub fn a_ll(&self) -> DMatrix<f64> {
        let n = self.msd * self.nen;
        self.block(0, n, 0, n)
    }

    pub fn a_lu(&self) -> DMatrix<f64> {
        self.block(0, self.msd * self.nen, self.u_offset(), self.nsd * self.nen)
    }

    pub fn a_uu(&self) -> DMatrix<f64> {
        let n = self.nsd * self.nen;
        self.block(self.u_offset(), n, self.u_offset(), n)
    }

    pub fn a_pu(&self) -> DMatrix<f64> {
        self.block(self.p_offset(), self.nen, self.u_offset(), self.nsd * self.nen)
    }

    pub fn a_rho_p(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.nen,
            (0..self.nen).map(|i| self.k[(self.zeta_index(), self.p_offset() + i)]),
        )
    }

    /// Residual of the local system K x - f - B û - e_zeta rho_int.
    pub fn local_residual(&self, x: &DVector<f64>, u_hat: &DVector<f64>, rho_int: f64) -> DVector<f64> {
        let mut r = &self.k * x - &self.f - &self.b * u_hat;
        r[self.zeta_index()] -= rho_int;
        r
    }

    /// Residual of the element's contribution to the global rows.
    pub fn global_residual(&self, x: &DVector<f64>, u_hat: &DVector<f64>) -> DVector<f64> {
        &self.c * x + &self.a_hh * u_hat - &self.f_hat
    }

    /// Replace full-vector hybrid unknowns by normal components on the faces
    /// listed in `normal_only`.
    pub fn apply_normal_only(&mut self, nfn: usize) {
        if self.normal_only.iter().all(Option::is_none) {
            return;
        }
        let nsd = self.nsd;
        let full = self.n_hybrid();
        let mut offsets = Vec::with_capacity(self.hybrid_faces.len());
        let mut reduced = 0;
        for nn in &self.normal_only {
            offsets.push(reduced);
            reduced += if nn.is_some() { nfn } else { nfn * nsd };
        }
        let mut p = DMatrix::zeros(full, reduced);
        for (h, nn) in self.normal_only.iter().enumerate() {
            let (f0, r0) = (self.hybrid_offsets[h], offsets[h]);
            for j in 0..nfn {
                match nn {
                    Some(n) => {
                        for c in 0..nsd {
                            p[(f0 + j * nsd + c, r0 + j)] = n[c];
                        }
                    }
                    None => {
                        for c in 0..nsd {
                            p[(f0 + j * nsd + c, r0 + j * nsd + c)] = 1.0;
                        }
                    }
                }
            }
        }
        let pt = p.transpose();
        self.b = &self.b * &p;
        self.c = &pt * &self.c;
        self.a_hh = &pt * &self.a_hh * &p;
        self.f_hat = &pt * &self.f_hat;
        self.g = &pt * &self.g;
        self.hybrid_offsets = offsets;
    }

    /// Number of hybrid unknowns carried by hybrid face `h`.
    pub fn face_dofs(&self, h: usize, nfn: usize) -> usize {
        if self.normal_only[h].is_some() {
            nfn
        } else {
            nfn * self.nsd
        }
    }
}

/// Element description consumed by [`assemble_local_blocks`].
pub struct ElementSetup<'a> {
    pub coords: Vec<[f64; 2]>,
    pub roles: Vec<FaceRole>,
    pub reversed: Vec<bool>,
    pub tau: Vec<f64>,
    pub data: &'a dyn FlowData,
    pub convection: Convection<'a>,
}

/// Assemble the local matrices of one element.
pub fn assemble_local_blocks(disc: &Discretization, el: &ElementSetup) -> Result<LocalBlocks> {
    let nsd = 2;
    let msd = disc.voigt.msd;
    let nen = disc.nen();
    let nfn = disc.nfn();
    let nfa = disc.nfa();
    let re = &disc.re;
    let nu = el.data.nu();
    if !(nu > 0.0) {
        return Err(HdgError::InvalidInput(format!("viscosity must be positive, got {nu}")));
    }
    let dh = disc.voigt.d_half_diag(nu);
    let fk = &disc.voigt.fk;
    let newton = matches!(el.convection, Convection::Newton { .. });

    let u0 = msd * nen;
    let p0 = (msd + nsd) * nen;
    let z = (msd + nsd + 1) * nen;
    let n = z + 1;

    let hybrid_faces: Vec<usize> = (0..nfa).filter(|&l| el.roles[l].is_hybrid()).collect();
    let hybrid_offsets: Vec<usize> = (0..hybrid_faces.len()).map(|h| h * nfn * nsd).collect();
    let nh = hybrid_faces.len() * nfn * nsd;

    let mut k = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    let mut b = DMatrix::zeros(n, nh);
    let mut c = DMatrix::zeros(nh, n);
    let mut a_hh = DMatrix::zeros(nh, nh);
    let mut f_hat = DVector::zeros(nh);
    let mut g = DVector::zeros(nh);

    // sgrad[k][a][b] = (D^{1/2} F_k)_{ab}
    let mut dfk = vec![[[0.0; 2]; 3]; 2];
    for kk in 0..nsd {
        for a in 0..msd {
            for bb in 0..nsd {
                dfk[kk][a][bb] = dh[a] * fk[kk][(a, bb)];
            }
        }
    }

    for (xi, w) in disc.q_elem.points.iter().zip(&disc.q_elem.weights) {
        let mp = map_point(&el.coords, re, re, *xi)?;
        let dv = mp.det * w;
        let nv = &mp.n;
        let gr = &mp.grad;
        let a = match el.convection {
            Convection::None => [0.0, 0.0],
            Convection::Field(fa) => fa(mp.x),
            Convection::Newton { u, .. } => {
                let mut a = [0.0; 2];
                for j in 0..nen {
                    a[0] += nv[j] * u[j * nsd];
                    a[1] += nv[j] * u[j * nsd + 1];
                }
                a
            }
        };
        let s = el.data.source(mp.x);
        for i in 0..nen {
            let adg = a[0] * gr[i][0] + a[1] * gr[i][1];
            for bb in 0..nsd {
                f[u0 + i * nsd + bb] += nv[i] * s[bb] * dv;
                if newton {
                    f[u0 + i * nsd + bb] -= adg * a[bb] * dv;
                }
            }
            for j in 0..nen {
                let m = nv[i] * nv[j] * dv;
                for cc in 0..msd {
                    k[(i * msd + cc, j * msd + cc)] -= m;
                }
                for aa in 0..msd {
                    for bb in 0..nsd {
                        let v = (gr[i][0] * dfk[0][aa][bb] + gr[i][1] * dfk[1][aa][bb]) * nv[j] * dv;
                        if v != 0.0 {
                            k[(i * msd + aa, u0 + j * nsd + bb)] += v;
                            k[(u0 + j * nsd + bb, i * msd + aa)] += v;
                        }
                    }
                }
                for bb in 0..nsd {
                    let v = gr[i][bb] * nv[j] * dv;
                    k[(p0 + i, u0 + j * nsd + bb)] += v;
                    k[(u0 + j * nsd + bb, p0 + i)] += v;
                }
                if a != [0.0, 0.0] {
                    let v = adg * nv[j] * dv;
                    for bb in 0..nsd {
                        k[(u0 + i * nsd + bb, u0 + j * nsd + bb)] -= v;
                    }
                    if newton {
                        for bb in 0..nsd {
                            for cc in 0..nsd {
                                k[(u0 + i * nsd + bb, u0 + j * nsd + cc)] -= gr[i][cc] * a[bb] * nv[j] * dv;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut perimeter = 0.0;
    let mut margin = f64::INFINITY;
    let mut worst_face = 0;
    let mut normal_only = Vec::with_capacity(hybrid_faces.len());
    let mut f_rho = 0.0;
    for l in 0..nfa {
        let role = el.roles[l];
        let tau = el.tau[l];
        let h = hybrid_faces.iter().position(|&x| x == l);
        let h0 = h.map(|h| hybrid_offsets[h]).unwrap_or(0);
        let mut face_normal = [0.0; 2];
        for (eta, w) in disc.q_face.points.iter().zip(&disc.q_face.weights) {
            let eta = eta[0];
            let s = if el.reversed[l] { -eta } else { eta };
            let (x, nrm, jac, xi) = map_edge_point(&el.coords, re, l, s);
            face_normal = nrm;
            let (nv, _) = re.shape(xi);
            let (nh_v, _) = disc.seg.shape([eta, 0.0]);
            let ds = jac * w;
            perimeter += ds;
            let a_hat = match el.convection {
                Convection::None => [0.0, 0.0],
                Convection::Field(fa) => fa(x),
                Convection::Newton { u_hat, .. } => match &u_hat[l] {
                    Some(uh) => {
                        let mut a = [0.0; 2];
                        for jj in 0..nfn {
                            a[0] += nh_v[jj] * uh[jj * nsd];
                            a[1] += nh_v[jj] * uh[jj * nsd + 1];
                        }
                        a
                    }
                    None => el.data.dirichlet(x),
                },
            };
            let an = a_hat[0] * nrm[0] + a_hat[1] * nrm[1];
            if tau - an < margin {
                margin = tau - an;
                worst_face = l;
            }
            let nmat = [[nrm[0], 0.0], [0.0, nrm[1]], [nrm[1], nrm[0]]];
            for i in 0..nen {
                k[(p0 + i, z)] += nv[i] * ds;
                k[(z, p0 + i)] += nv[i] * ds;
                for j in 0..nen {
                    let m = tau * nv[i] * nv[j] * ds;
                    for bb in 0..nsd {
                        k[(u0 + i * nsd + bb, u0 + j * nsd + bb)] += m;
                    }
                }
            }
            if role == FaceRole::Dirichlet {
                let ud = el.data.dirichlet(x);
                let udn = ud[0] * nrm[0] + ud[1] * nrm[1];
                for i in 0..nen {
                    for aa in 0..msd {
                        let v = dh[aa] * (nmat[aa][0] * ud[0] + nmat[aa][1] * ud[1]);
                        f[i * msd + aa] += nv[i] * v * ds;
                    }
                    for bb in 0..nsd {
                        f[u0 + i * nsd + bb] += (tau - an) * nv[i] * ud[bb] * ds;
                    }
                    f[p0 + i] += nv[i] * udn * ds;
                    f_rho -= nv[i] * udn * ds;
                }
                continue;
            }
            for jj in 0..nfn {
                let nh_j = nh_v[jj];
                for i in 0..nen {
                    let ni = nv[i];
                    for bb in 0..nsd {
                        let col = h0 + jj * nsd + bb;
                        for aa in 0..msd {
                            let v = ni * dh[aa] * nmat[aa][bb] * nh_j * ds;
                            if v != 0.0 {
                                b[(i * msd + aa, col)] += v;
                                c[(col, i * msd + aa)] += v;
                            }
                        }
                        b[(u0 + i * nsd + bb, col)] += (tau - an) * ni * nh_j * ds;
                        let v = ni * nrm[bb] * nh_j * ds;
                        b[(p0 + i, col)] += v;
                        c[(col, p0 + i)] += v;
                        c[(col, u0 + i * nsd + bb)] += tau * nh_j * ni * ds;
                        if newton {
                            for cc in 0..nsd {
                                b[(u0 + i * nsd + bb, h0 + jj * nsd + cc)] -= ni * a_hat[bb] * nrm[cc] * nh_j * ds;
                            }
                        }
                    }
                }
                for bb in 0..nsd {
                    g[h0 + jj * nsd + bb] += nrm[bb] * nh_j * ds;
                }
            }
            if newton {
                for i in 0..nen {
                    for bb in 0..nsd {
                        f[u0 + i * nsd + bb] += an * a_hat[bb] * nv[i] * ds;
                    }
                }
            }
            let (conv_term, traction) = match role {
                FaceRole::Interior | FaceRole::NormalOnly => (false, false),
                FaceRole::Neumann { convective, traction } => (convective, traction),
                FaceRole::Dirichlet => unreachable!(),
            };
            let coeff = if conv_term { tau - an } else { tau };
            let t = if traction { el.data.traction(x, nrm) } else { [0.0, 0.0] };
            for ii in 0..nfn {
                for bb in 0..nsd {
                    let row = h0 + ii * nsd + bb;
                    for jj in 0..nfn {
                        a_hh[(row, h0 + jj * nsd + bb)] -= coeff * nh_v[ii] * nh_v[jj] * ds;
                        if conv_term && newton {
                            for cc in 0..nsd {
                                a_hh[(row, h0 + jj * nsd + cc)] += nh_v[ii] * a_hat[bb] * nrm[cc] * nh_v[jj] * ds;
                            }
                        }
                    }
                    f_hat[row] -= nh_v[ii] * t[bb] * ds;
                    if conv_term && newton {
                        f_hat[row] += an * a_hat[bb] * nh_v[ii] * ds;
                    }
                }
            }
        }
        if h.is_some() {
            normal_only.push(if role == FaceRole::NormalOnly { Some(face_normal) } else { None });
        }
    }

    let mut blocks = LocalBlocks {
        nen,
        msd,
        nsd,
        k,
        f,
        hybrid_faces,
        hybrid_offsets,
        normal_only,
        b,
        c,
        a_hh,
        f_hat,
        g,
        f_rho,
        perimeter,
        admissibility_margin: margin,
        worst_face,
    };
    blocks.apply_normal_only(nfn);
    Ok(blocks)
}

/// Condensed element contribution and the stored local solve operator.
pub struct CondensedElement {
    pub khat: DMatrix<f64>,
    /// Coupling to the element's mean boundary pressure, computed through the
    /// local inverse.
    pub h: DVector<f64>,
    /// Compatibility row 1^T A_pû.
    pub g: DVector<f64>,
    pub fhat: DVector<f64>,
    pub f_rho: f64,
    /// K^{-1} f
    pub x0: DVector<f64>,
    /// K^{-1} B
    pub xb: DMatrix<f64>,
    /// |∂Ω_e| K^{-1} e_zeta
    pub xz: DVector<f64>,
    pub lu_min_pivot: f64,
}

impl CondensedElement {
    /// Local fields for given element hybrid values and mean boundary
    /// pressure.
    pub fn recover(&self, u_hat: &DVector<f64>, rho_mean: f64) -> DVector<f64> {
        let mut x = self.x0.clone();
        if !u_hat.is_empty() {
            x += &self.xb * u_hat;
        }
        x += &self.xz * rho_mean;
        x
    }
}

/// Eliminate the local unknowns. The global unknown of the element is its
/// mean boundary pressure, so the local constraint reads
/// <p, 1> = |∂Ω_e| rho_mean.
pub fn condense(blocks: &LocalBlocks, element: usize) -> Result<CondensedElement> {
    let lu = DenseLu::new(blocks.k.clone()).map_err(|e| match e {
        HdgError::SingularLocal { pivot, .. } => HdgError::SingularLocal { element, pivot },
        other => other,
    })?;
    let n = blocks.dim();
    let x0 = DVector::from_vec(lu.solve_vec(blocks.f.as_slice()));
    let xb = if blocks.n_hybrid() > 0 {
        lu.solve(&blocks.b)
    } else {
        DMatrix::zeros(n, 0)
    };
    let mut ez = vec![0.0; n];
    ez[blocks.zeta_index()] = blocks.perimeter;
    let xz = DVector::from_vec(lu.solve_vec(&ez));
    let khat = &blocks.c * &xb + &blocks.a_hh;
    let h = &blocks.c * &xz;
    let fhat = &blocks.f_hat - &blocks.c * &x0;
    Ok(CondensedElement {
        khat,
        h,
        g: blocks.g.clone(),
        fhat,
        f_rho: blocks.f_rho,
        x0,
        xb,
        xz,
        lu_min_pivot: lu.min_pivot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Uniform {
        nu: f64,
        u: fn([f64; 2]) -> [f64; 2],
    }

    impl FlowData for Uniform {
        fn nu(&self) -> f64 {
            self.nu
        }
        fn source(&self, _: [f64; 2]) -> [f64; 2] {
            [0.0, 0.0]
        }
        fn dirichlet(&self, x: [f64; 2]) -> [f64; 2] {
            (self.u)(x)
        }
        fn traction(&self, _: [f64; 2], _: [f64; 2]) -> [f64; 2] {
            [0.0, 0.0]
        }
    }

    fn shear(x: [f64; 2]) -> [f64; 2] {
        [x[1], 0.0]
    }

    fn triangle() -> Vec<[f64; 2]> {
        vec![[0.1, 0.2], [1.3, 0.0], [0.4, 0.9]]
    }

    fn coords_for(re: &ReferenceElement, corners: &[[f64; 2]]) -> Vec<[f64; 2]> {
        re.nodes
            .iter()
            .map(|&[s, t]| {
                let l = [1.0 - s - t, s, t];
                [
                    l[0] * corners[0][0] + l[1] * corners[1][0] + l[2] * corners[2][0],
                    l[0] * corners[0][1] + l[1] * corners[1][1] + l[2] * corners[2][1],
                ]
            })
            .collect()
    }

    #[test]
    fn table_dimensions() {
        let cases = [
            (ElementType::Triangle, 2, [19, 37, 61, 91, 127, 217, 331, 469]),
            (ElementType::Triangle, 3, [41, 101, 201, 351, 561, 1201, 2201, 3641]),
            (ElementType::Quadrilateral, 2, [25, 55, 97, 151, 217, 385, 601, 865]),
            (ElementType::Quadrilateral, 3, [81, 271, 641, 1251, 2161, 5121, 10001, 17281]),
        ];
        for (et, nsd, expect) in cases {
            for (i, k) in [1, 2, 3, 4, 5, 7, 9, 11].into_iter().enumerate() {
                assert_eq!(local_system_dimension(et, nsd, k).unwrap(), expect[i]);
            }
        }
    }

    #[test]
    fn mass_block_matches_closed_form() {
        let disc = Discretization::new(ElementType::Triangle, 1).unwrap();
        let data = Uniform { nu: 1.0, u: shear };
        let corners = triangle();
        let el = ElementSetup {
            coords: corners.clone(),
            roles: vec![FaceRole::Dirichlet; 3],
            reversed: vec![false; 3],
            tau: vec![1.0; 3],
            data: &data,
            convection: Convection::None,
        };
        let blk = assemble_local_blocks(&disc, &el).unwrap();
        let (a, b, c) = (corners[0], corners[1], corners[2]);
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
        let all = blk.a_ll();
        for i in 0..3 {
            for j in 0..3 {
                let m = area * if i == j { 2.0 } else { 1.0 } / 12.0;
                for r in 0..3 {
                    for s in 0..3 {
                        let expect = if r == s { -m } else { 0.0 };
                        assert!((all[(i * 3 + r, j * 3 + s)] - expect).abs() < 1e-15);
                    }
                }
            }
        }
        assert_eq!(blk.n_hybrid(), 0);
        assert!(blk.f.norm() > 0.0);
    }

    #[test]
    fn reproduces_linear_shear() {
        for kdeg in 1..=3 {
            let disc = Discretization::new(ElementType::Triangle, kdeg).unwrap();
            let data = Uniform { nu: 1.0, u: shear };
            let coords = coords_for(&disc.re, &triangle());
            let el = ElementSetup {
                coords: coords.clone(),
                roles: vec![FaceRole::Interior; 3],
                reversed: vec![false, true, false],
                tau: vec![2.0; 3],
                data: &data,
                convection: Convection::None,
            };
            let blk = assemble_local_blocks(&disc, &el).unwrap();
            let ce = condense(&blk, 0).unwrap();
            // Trace of (x2, 0) at the face nodes, in face order.
            let mut uh = Vec::new();
            for l in 0..3 {
                let mut nodes = disc.re.edge_nodes(l);
                if el.reversed[l] {
                    nodes.swap(0, 1);
                    nodes[2..].reverse();
                }
                for &nidx in &nodes {
                    let v = shear(coords[nidx]);
                    uh.extend_from_slice(&v);
                }
            }
            let uh = DVector::from_vec(uh);
            for (rho, p_expect) in [(0.0, 0.0), (1.0, 1.0)] {
                let x = ce.recover(&uh, rho);
                let nen = blk.nen;
                for i in 0..nen {
                    let u = shear(coords[i]);
                    assert!((x[blk.u_offset() + 2 * i] - u[0]).abs() < 1e-10);
                    assert!((x[blk.u_offset() + 2 * i + 1] - u[1]).abs() < 1e-10);
                    assert!((x[3 * i] - 0.0).abs() < 1e-10);
                    assert!((x[3 * i + 1] - 0.0).abs() < 1e-10);
                    assert!((x[3 * i + 2] + 1.0).abs() < 1e-10);
                    assert!((x[blk.p_offset() + i] - p_expect).abs() < 1e-10);
                }
                assert!(x[blk.zeta_index()].abs() < 1e-10);
                let r = blk.local_residual(&x, &uh, rho * blk.perimeter);
                assert!(r.norm() <= 1e-11 * (blk.f.norm() + (&blk.b * &uh).norm() + blk.perimeter));
            }
        }
    }

    #[test]
    fn h_equals_g_and_stokes_symmetry() {
        let disc = Discretization::new(ElementType::Quadrilateral, 2).unwrap();
        let data = Uniform { nu: 0.7, u: shear };
        let corners = [[0.0, 0.0], [1.2, 0.1], [1.0, 1.1], [-0.1, 0.8]];
        let coords: Vec<[f64; 2]> = disc
            .re
            .nodes
            .iter()
            .map(|&[u, v]| {
                let w = [(1.0 - u) * (1.0 - v), (1.0 + u) * (1.0 - v), (1.0 + u) * (1.0 + v), (1.0 - u) * (1.0 + v)];
                let mut x = [0.0; 2];
                for a in 0..4 {
                    x[0] += 0.25 * w[a] * corners[a][0];
                    x[1] += 0.25 * w[a] * corners[a][1];
                }
                x
            })
            .collect();
        let field = |x: [f64; 2]| [0.3 + x[1], -0.2 * x[0]];
        for conv in [Convection::None, Convection::Field(&field)] {
            let el = ElementSetup {
                coords: coords.clone(),
                roles: vec![
                    FaceRole::Interior,
                    FaceRole::Dirichlet,
                    FaceRole::Neumann { convective: true, traction: true },
                    FaceRole::Interior,
                ],
                reversed: vec![false, false, false, true],
                tau: vec![3.0; 4],
                data: &data,
                convection: conv,
            };
            let blk = assemble_local_blocks(&disc, &el).unwrap();
            let ce = condense(&blk, 0).unwrap();
            let diff = (&ce.h - &ce.g).amax();
            assert!(diff <= 1e-11 * ce.g.norm(), "diff {diff}");
            let asym = (&ce.khat - ce.khat.transpose()).norm() / ce.khat.norm();
            if matches!(conv, Convection::None) {
                assert!(asym <= 1e-12, "asym {asym}");
            } else {
                assert!(asym > 1e-6);
            }
        }
    }
}
