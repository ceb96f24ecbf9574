//! Element-by-element reconstruction of a degree k+1 velocity from L and the
//! traces, constrained by the element mean of u and the boundary circulation.

use nalgebra::{DMatrix, DVector};

use crate::dense::DenseLu;
use crate::error::{HdgError, Result};
use crate::flow_solvers::Solution;
use crate::geometry::{map_edge_point, map_point};
use crate::local_assembly::{Discretization, FlowData};
use crate::mesh::Mesh;

/// Trace of the velocity on local face `l` of element `e` at the face
/// parameter `eta` (face orientation): the boundary data on Dirichlet faces,
/// the hybrid variable elsewhere.
pub fn face_trace(sol: &Solution, mesh: &Mesh, disc: &Discretization, data: &dyn FlowData, e: usize, l: usize, eta: f64, x: [f64; 2]) -> [f64; 2] {
    let f = mesh.elem_faces[e][l];
    match &sol.u_hat[f] {
        Some(uh) => {
            let (nh, _) = disc.seg.shape([eta, 0.0]);
            let mut v = [0.0; 2];
            for j in 0..disc.nfn() {
                v[0] += nh[j] * uh[2 * j];
                v[1] += nh[j] * uh[2 * j + 1];
            }
            v
        }
        None => data.dirichlet(x),
    }
}

/// Element mean and boundary circulation data: (int u, int_{∂Ω} T u_trace).
fn constraint_data(sol: &Solution, mesh: &Mesh, disc: &Discretization, data: &dyn FlowData, e: usize) -> Result<([f64; 2], f64)> {
    let coords = mesh.element_coords(e);
    let nen = disc.nen();
    let mut mean = [0.0; 2];
    for (xi, w) in disc.q_post.points.iter().zip(&disc.q_post.weights) {
        let mp = map_point(&coords, &disc.re, &disc.re, *xi)?;
        for j in 0..nen {
            mean[0] += mp.n[j] * sol.u[e][2 * j] * mp.det * w;
            mean[1] += mp.n[j] * sol.u[e][2 * j + 1] * mp.det * w;
        }
    }
    let mut circ = 0.0;
    for l in 0..disc.nfa() {
        let rev = mesh.elem_face_reversed[e][l];
        for (eta, w) in disc.q_face.points.iter().zip(&disc.q_face.weights) {
            let s = if rev { -eta[0] } else { eta[0] };
            let (x, n, jac, _) = map_edge_point(&coords, &disc.re, l, s);
            let v = face_trace(sol, mesh, disc, data, e, l, eta[0], x);
            circ += (-n[1] * v[0] + n[0] * v[1]) * jac * w;
        }
    }
    Ok((mean, circ))
}

/// Postprocessed velocity of one element, node-major on the degree k+1
/// reference element.
pub fn postprocess_element(sol: &Solution, mesh: &Mesh, disc: &Discretization, data: &dyn FlowData, e: usize) -> Result<Vec<f64>> {
    let coords = mesh.element_coords(e);
    let rs = &disc.re_star;
    let ns = rs.num_nodes();
    let nen = disc.nen();
    let nu = data.nu();
    let dh = disc.voigt.d_half_diag(nu);
    let fk = &disc.voigt.fk;
    let n = 2 * ns + 3;
    let mut a = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    let (mean, circ) = constraint_data(sol, mesh, disc, data, e)?;
    for (xi, w) in disc.q_post.points.iter().zip(&disc.q_post.weights) {
        let mp = map_point(&coords, &disc.re, rs, *xi)?;
        let dv = mp.det * w;
        let (nk, _) = disc.re.shape(*xi);
        let mut lh = [0.0; 3];
        for j in 0..nen {
            for m in 0..3 {
                lh[m] += nk[j] * sol.l[e][3 * j + m];
            }
        }
        // bmat[i][m][a]: Voigt component m of grad_s(N_i e_a)
        let bmat: Vec<[[f64; 2]; 3]> = mp
            .grad
            .iter()
            .map(|g| {
                let mut b = [[0.0; 2]; 3];
                for m in 0..3 {
                    for aa in 0..2 {
                        b[m][aa] = fk[0][(m, aa)] * g[0] + fk[1][(m, aa)] * g[1];
                    }
                }
                b
            })
            .collect();
        for i in 0..ns {
            for aa in 0..2 {
                let mut r = 0.0;
                for m in 0..3 {
                    r += bmat[i][m][aa] * lh[m];
                }
                rhs[2 * i + aa] -= r * dv;
                for j in 0..ns {
                    for bb in 0..2 {
                        let mut v = 0.0;
                        for m in 0..3 {
                            v += bmat[i][m][aa] * dh[m] * bmat[j][m][bb];
                        }
                        a[(2 * i + aa, 2 * j + bb)] += v * dv;
                    }
                }
            }
            let ni = mp.n[i] * dv;
            for c in 0..2 {
                a[(2 * ns + c, 2 * i + c)] += ni;
                a[(2 * i + c, 2 * ns + c)] += ni;
            }
            let cx = -mp.grad[i][1] * dv;
            let cy = mp.grad[i][0] * dv;
            a[(2 * ns + 2, 2 * i)] += cx;
            a[(2 * i, 2 * ns + 2)] += cx;
            a[(2 * ns + 2, 2 * i + 1)] += cy;
            a[(2 * i + 1, 2 * ns + 2)] += cy;
        }
    }
    rhs[2 * ns] = mean[0];
    rhs[2 * ns + 1] = mean[1];
    rhs[2 * ns + 2] = circ;
    let lu = DenseLu::new(a).map_err(|_| HdgError::InvalidInput(format!("singular postprocess system on element {e}")))?;
    let x = lu.solve_vec(rhs.as_slice());
    Ok(x[..2 * ns].to_vec())
}

pub fn postprocess_velocity(sol: &Solution, mesh: &Mesh, disc: &Discretization, data: &dyn FlowData) -> Result<Vec<Vec<f64>>> {
    (0..mesh.num_elements())
        .map(|e| postprocess_element(sol, mesh, disc, data, e))
        .collect()
}

/// Largest violations of the mean and circulation constraints by `ustar`.
pub fn constraint_residuals(sol: &Solution, ustar: &[Vec<f64>], mesh: &Mesh, disc: &Discretization, data: &dyn FlowData) -> Result<(f64, f64)> {
    let mut worst = (0.0f64, 0.0f64);
    for e in 0..mesh.num_elements() {
        let coords = mesh.element_coords(e);
        let (mean, circ) = constraint_data(sol, mesh, disc, data, e)?;
        let mut m = [0.0; 2];
        let mut c = 0.0;
        for (xi, w) in disc.q_post.points.iter().zip(&disc.q_post.weights) {
            let mp = map_point(&coords, &disc.re, &disc.re_star, *xi)?;
            let dv = mp.det * w;
            for j in 0..disc.re_star.num_nodes() {
                let (ux, uy) = (ustar[e][2 * j], ustar[e][2 * j + 1]);
                m[0] += mp.n[j] * ux * dv;
                m[1] += mp.n[j] * uy * dv;
                c += (-mp.grad[j][1] * ux + mp.grad[j][0] * uy) * dv;
            }
        }
        worst.0 = worst.0.max((m[0] - mean[0]).abs()).max((m[1] - mean[1]).abs());
        worst.1 = worst.1.max((c - circ).abs());
    }
    Ok(worst)
}
