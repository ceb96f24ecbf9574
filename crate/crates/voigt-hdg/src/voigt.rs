//! Voigt operators for symmetric second-order tensors.
//!
//! Components are ordered (11, 22, 12) in two dimensions and
//! (11, 22, 33, 12, 13, 23) in three. Off-diagonal strain entries carry the
//! engineering factor, so `e_12 = du1/dx2 + du2/dx1`.

use nalgebra::DMatrix;

use crate::error::{HdgError, Result};

/// Number of Voigt components for `nsd` spatial dimensions.
pub fn msd(nsd: usize) -> usize {
    nsd * (nsd + 1) / 2
}

/// Number of rigid rotations for `nsd` spatial dimensions.
pub fn nrr(nsd: usize) -> usize {
    nsd * (nsd - 1) / 2
}

/// Voigt index of the off-diagonal pair (i, j), i != j.
fn off_diag_index(nsd: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    match (nsd, a, b) {
        (2, 0, 1) => 2,
        (3, 0, 1) => 3,
        (3, 0, 2) => 4,
        (3, 1, 2) => 5,
        _ => unreachable!("invalid off-diagonal pair"),
    }
}

/// Voigt index of the tensor entry (i, j).
pub fn voigt_index(nsd: usize, i: usize, j: usize) -> usize {
    if i == j {
        i
    } else {
        off_diag_index(nsd, i, j)
    }
}

/// Precomputed Voigt operator tables for one spatial dimension.
#[derive(Debug, Clone)]
pub struct VoigtOps {
    pub nsd: usize,
    pub msd: usize,
    pub nrr: usize,
    /// `fk[k]` is the msd x nsd matrix multiplying the derivative along x_k.
    pub fk: Vec<DMatrix<f64>>,
}

impl VoigtOps {
    pub fn new(nsd: usize) -> Result<Self> {
        if nsd != 2 && nsd != 3 {
            return Err(HdgError::InvalidInput(format!(
                "spatial dimension must be 2 or 3, got {nsd}"
            )));
        }
        let m = msd(nsd);
        let mut fk = Vec::with_capacity(nsd);
        for k in 0..nsd {
            let mut f = DMatrix::zeros(m, nsd);
            // (grad_s u)_{ij} collects du_i/dx_j + du_j/dx_i.
            for i in 0..nsd {
                if i == k {
                    f[(voigt_index(nsd, i, i), i)] = 1.0;
                } else {
                    f[(voigt_index(nsd, i, k), i)] = 1.0;
                }
            }
            fk.push(f);
        }
        Ok(Self {
            nsd,
            msd: m,
            nrr: nrr(nsd),
            fk,
        })
    }

    /// Vector E with ones on the diagonal components.
    pub fn e_vector(&self) -> Vec<f64> {
        (0..self.msd)
            .map(|i| if i < self.nsd { 1.0 } else { 0.0 })
            .collect()
    }

    /// Diagonal of D for viscosity `nu`.
    pub fn d_diag(&self, nu: f64) -> Vec<f64> {
        (0..self.msd)
            .map(|i| if i < self.nsd { 2.0 * nu } else { nu })
            .collect()
    }

    /// Diagonal of the square root of D.
    pub fn d_half_diag(&self, nu: f64) -> Vec<f64> {
        self.d_diag(nu).into_iter().map(f64::sqrt).collect()
    }

    /// D as a dense matrix.
    pub fn d_matrix(&self, nu: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.d_diag(nu)))
    }

    /// Normal operator N = sum_k F_k n_k (msd x nsd).
    pub fn normal_matrix(&self, n: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.msd, self.nsd);
        for k in 0..self.nsd {
            out += &self.fk[k] * n[k];
        }
        out
    }

    /// Symmetric gradient operator applied to a scalar shape function with
    /// gradient `grad`, i.e. sum_k F_k dN/dx_k (msd x nsd).
    pub fn sym_grad_matrix(&self, grad: &[f64]) -> DMatrix<f64> {
        self.normal_matrix(grad)
    }

    /// Tangential operator T (nrr x nsd) such that T u is the rotational part
    /// of u relative to the normal n.
    pub fn tangent_matrix(&self, n: &[f64]) -> DMatrix<f64> {
        if self.nsd == 2 {
            DMatrix::from_row_slice(1, 2, &[-n[1], n[0]])
        } else {
            DMatrix::from_row_slice(
                3,
                3,
                &[0.0, -n[2], n[1], n[2], 0.0, -n[0], -n[1], n[0], 0.0],
            )
        }
    }

    /// Curl operator applied to a scalar shape function with gradient `grad`
    /// (nrr x nsd). Equal to the tangent operator with n replaced by grad.
    pub fn curl_matrix(&self, grad: &[f64]) -> DMatrix<f64> {
        self.tangent_matrix(grad)
    }

    /// Voigt strain from a velocity gradient `g[i][j] = du_i/dx_j`.
    pub fn strain_from_gradient(&self, g: &[Vec<f64>]) -> Vec<f64> {
        let mut e = vec![0.0; self.msd];
        for i in 0..self.nsd {
            e[i] = g[i][i];
            for j in (i + 1)..self.nsd {
                e[voigt_index(self.nsd, i, j)] = g[i][j] + g[j][i];
            }
        }
        e
    }

    /// Symmetric tensor from a Voigt strain vector (off-diagonals halved).
    pub fn strain_to_tensor(&self, e: &[f64]) -> Vec<Vec<f64>> {
        let mut t = vec![vec![0.0; self.nsd]; self.nsd];
        for i in 0..self.nsd {
            t[i][i] = e[i];
            for j in (i + 1)..self.nsd {
                let v = 0.5 * e[voigt_index(self.nsd, i, j)];
                t[i][j] = v;
                t[j][i] = v;
            }
        }
        t
    }

    /// Voigt vector of a symmetric stress-like tensor (no factor on
    /// off-diagonals).
    pub fn stress_to_voigt(&self, t: &[Vec<f64>]) -> Vec<f64> {
        let mut v = vec![0.0; self.msd];
        for i in 0..self.nsd {
            v[i] = t[i][i];
            for j in (i + 1)..self.nsd {
                v[voigt_index(self.nsd, i, j)] = t[i][j];
            }
        }
        v
    }

    /// Mixed variable L = -D^{1/2} grad_s u for a velocity gradient.
    pub fn mixed_variable(&self, g: &[Vec<f64>], nu: f64) -> Vec<f64> {
        let e = self.strain_from_gradient(g);
        let dh = self.d_half_diag(nu);
        e.iter().zip(dh).map(|(a, b)| -a * b).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!((msd(2), nrr(2)), (3, 1));
        assert_eq!((msd(3), nrr(3)), (6, 3));
    }

    #[test]
    fn fk_tables_2d() {
        let v = VoigtOps::new(2).unwrap();
        let f1t = v.fk[0].transpose();
        let f2t = v.fk[1].transpose();
        assert_eq!(f1t, DMatrix::from_row_slice(2, 3, &[1., 0., 0., 0., 0., 1.]));
        assert_eq!(f2t, DMatrix::from_row_slice(2, 3, &[0., 0., 1., 0., 1., 0.]));
    }

    #[test]
    fn fk_tables_3d() {
        let v = VoigtOps::new(3).unwrap();
        let f1t = DMatrix::from_row_slice(
            3,
            6,
            &[1., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 0., 1., 0.],
        );
        let f2t = DMatrix::from_row_slice(
            3,
            6,
            &[0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0., 0., 0., 0., 0., 0., 0., 1.],
        );
        let f3t = DMatrix::from_row_slice(
            3,
            6,
            &[0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0.],
        );
        assert_eq!(v.fk[0].transpose(), f1t);
        assert_eq!(v.fk[1].transpose(), f2t);
        assert_eq!(v.fk[2].transpose(), f3t);
    }

    #[test]
    fn normal_operator_2d() {
        let v = VoigtOps::new(2).unwrap();
        let n = v.normal_matrix(&[0.6, 0.8]).transpose();
        assert_eq!(n, DMatrix::from_row_slice(2, 3, &[0.6, 0., 0.8, 0., 0.8, 0.6]));
    }

    #[test]
    fn d_and_e() {
        let v = VoigtOps::new(2).unwrap();
        assert_eq!(v.d_diag(0.5), vec![1.0, 1.0, 0.5]);
        assert_eq!(v.e_vector(), vec![1.0, 1.0, 0.0]);
        let v3 = VoigtOps::new(3).unwrap();
        assert_eq!(v3.e_vector(), vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(VoigtOps::new(1).is_err());
    }

    #[test]
    fn strain_round_trip() {
        let v = VoigtOps::new(2).unwrap();
        let g = vec![vec![1.0, 2.0], vec![4.0, 3.0]];
        let e = v.strain_from_gradient(&g);
        assert_eq!(e, vec![1.0, 3.0, 6.0]);
        let t = v.strain_to_tensor(&e);
        assert_eq!(t, vec![vec![1.0, 3.0], vec![3.0, 3.0]]);
    }

    #[test]
    fn tangent_and_curl() {
        let v = VoigtOps::new(2).unwrap();
        assert_eq!(v.tangent_matrix(&[1.0, 0.0]), DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
        let v3 = VoigtOps::new(3).unwrap();
        let t = v3.tangent_matrix(&[0.0, 0.0, 1.0]);
        // T u = n x u for n = e3.
        let u = nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!((t * u).as_slice(), &[-2.0, 1.0, 0.0]);
    }
}
