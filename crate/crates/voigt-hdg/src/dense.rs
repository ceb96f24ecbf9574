//! Dense LU kernels for element-level systems.

use nalgebra::{DMatrix, Dyn, LU};

use crate::error::{HdgError, Result};

/// LU factorization with partial pivoting plus diagnostics.
pub struct DenseLu {
    lu: LU<f64, Dyn, Dyn>,
    /// Smallest |U_ii| relative to the largest |A_ij|.
    pub min_pivot: f64,
    /// Largest |U_ij| over the largest |A_ij|.
    pub pivot_growth: f64,
}

impl DenseLu {
    /// Factor `a`. Fails when a pivot falls below `1e-14` relative to the
    /// largest matrix entry.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(HdgError::InvalidInput(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let amax = a.amax();
        let lu = a.lu();
        let u = lu.u();
        let scale = if amax > 0.0 { amax } else { 1.0 };
        let min_pivot = (0..u.nrows()).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min) / scale;
        let pivot_growth = u.amax() / scale;
        if !(min_pivot > 1e-14) {
            return Err(HdgError::SingularLocal {
                element: usize::MAX,
                pivot: min_pivot,
            });
        }
        Ok(Self {
            lu,
            min_pivot,
            pivot_growth,
        })
    }

    pub fn dim(&self) -> usize {
        self.lu.l().nrows()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        // Factorization already checked for zero pivots.
        self.lu.solve_mut(&mut x);
        x
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut x = DMatrix::from_column_slice(b.len(), 1, b);
        self.lu.solve_mut(&mut x);
        x.as_slice().to_vec()
    }
}

/// Solve `a x = b`, returning the solution and the relative residual
/// ||a x - b|| / ||b||.
pub fn lu_factor_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let lu = DenseLu::new(a.clone())?;
    let x = lu.solve(b);
    let r = relative_residual(a, &x, b);
    Ok((x, r))
}

pub fn relative_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let bn = b.norm();
    let rn = (a * x - b).norm();
    if bn > 0.0 {
        rn / bn
    } else {
        rn
    }
}

/// Numerical rank from a fully pivoted LU: the number of diagonal entries of
/// U larger than `tol` times the first one.
pub fn rank_estimate(a: &DMatrix<f64>, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let f = a.clone().full_piv_lu();
    let u = f.u();
    let n = u.nrows().min(u.ncols());
    let first = u[(0, 0)].abs();
    if first == 0.0 {
        return 0;
    }
    (0..n).filter(|&i| u[(i, i)].abs() > tol * first).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn identity_solve() {
        let a = DMatrix::<f64>::identity(5, 5);
        let b = DMatrix::from_fn(5, 2, |i, j| (i + 3 * j) as f64);
        let (x, r) = lu_factor_solve(&a, &b).unwrap();
        assert_eq!(x, b);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn shifted_spd_known_solution() {
        let mut s = 7u64;
        let m = DMatrix::from_fn(19, 19, |_, _| lcg(&mut s));
        let a = &m * m.transpose() + DMatrix::identity(19, 19) * 19.0;
        let x = DMatrix::from_fn(19, 1, |i, _| i as f64 - 4.0);
        let b = &a * &x;
        let (xs, r) = lu_factor_solve(&a, &b).unwrap();
        assert!(r <= 1e-12);
        assert!((xs - x).amax() < 1e-12);
    }

    #[test]
    fn zero_diagonal_needs_pivoting() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[2.0, 3.0]);
        let (x, _) = lu_factor_solve(&a, &b).unwrap();
        assert_eq!(x.as_slice(), &[3.0, 2.0]);
    }

    #[test]
    fn singular_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(DenseLu::new(a).is_err());
    }

    #[test]
    fn ranks() {
        assert_eq!(rank_estimate(&DMatrix::identity(6, 6), 1e-12), 6);
        let u = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let v = DMatrix::from_column_slice(4, 1, &[0.5, -1.0, 2.0, 1.0]);
        assert_eq!(rank_estimate(&(&u * v.transpose()), 1e-12), 1);
    }

    #[test]
    fn random_round_trips() {
        let mut s = 11u64;
        for t in 0..100 {
            let n = 1 + (t * 6) % 600;
            let a = DMatrix::from_fn(n, n, |i, j| lcg(&mut s) + if i == j { n as f64 * 0.5 } else { 0.0 });
            let b = DMatrix::from_fn(n, 1, |_, _| lcg(&mut s));
            let (_, r) = lu_factor_solve(&a, &b).unwrap();
            assert!(r <= 1e-11, "n={n} r={r}");
        }
    }
}
