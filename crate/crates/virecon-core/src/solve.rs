//! Jacobi-preconditioned conjugate gradients, optionally restricted to a
//! free-dof subspace. Iteration order is fixed, so repeated solves of the
//! same system reproduce the same floating-point result.

use alloc::vec;
use alloc::vec::Vec;

use crate::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::math;

pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// Solve `A x = b` for SPD `A`. Residual criterion `||Ax - b|| <= rel_tol ||b||`,
/// iteration cap `10 * dim`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let free = vec![true; a.dim()];
    let x0 = vec![0.0; a.dim()];
    cg_masked(a, b, &free, &x0, rel_tol)
}

/// CG on the dofs flagged `free`; entries of `x0` at constrained dofs are
/// kept fixed and their couplings moved to the right-hand side implicitly
/// (the caller passes a matrix whose constrained rows/columns were
/// eliminated, or accepts the masked operator semantics).
pub(crate) fn cg_masked(
    a: &CsrMatrix,
    b: &[f64],
    free: &[bool],
    x0: &[f64],
    rel_tol: f64,
) -> Result<Vec<f64>> {
    let n = a.dim();
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(free.len(), n);
    let max_iter = 10 * n.max(1);

    let mut x = x0.to_vec();
    let diag = a.diagonal();
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            if free[i] && diag[i] != 0.0 {
                1.0 / diag[i]
            } else {
                0.0
            }
        })
        .collect();

    let mut ax = a.apply(&x);
    let mut r: Vec<f64> = (0..n)
        .map(|i| if free[i] { b[i] - ax[i] } else { 0.0 })
        .collect();
    let b_norm = norm2_masked(b, free);
    let mut res = norm2_masked(&r, free);
    // With a zero right-hand side the residual itself sets the scale
    // (nonzero fixed values can still drive the free dofs).
    let target = if b_norm > 0.0 {
        rel_tol * b_norm
    } else {
        rel_tol * res
    };
    if res <= target {
        return Ok(x);
    }

    let mut z: Vec<f64> = (0..n).map(|i| inv_diag[i] * r[i]).collect();
    let mut p = z.clone();
    let mut rz: f64 = dot(&r, &z);

    for iter in 0..max_iter {
        a.matvec(&p, &mut ax);
        for i in 0..n {
            if !free[i] {
                ax[i] = 0.0;
            }
        }
        let pap = dot(&p, &ax);
        if pap <= 0.0 {
            return Err(Error::ConvergenceFailure {
                iterations: iter,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            if free[i] {
                x[i] += alpha * p[i];
                r[i] -= alpha * ax[i];
            }
        }
        res = norm2_masked(&r, free);
        if res <= target {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            if free[i] {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        residual: res,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2_masked(v: &[f64], free: &[bool]) -> f64 {
    math::sqrt(
        v.iter()
            .zip(free)
            .filter(|(_, &f)| f)
            .map(|(x, _)| x * x)
            .sum(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Cholesky oracle, written independently of the CG path.
    fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    l[i][j] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k][i] * x[k];
            }
            x[i] = s / l[i][i];
        }
        x
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = solve_spd(&a, &[0.0, 0.0], 1e-12).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(4);
        let b = [1.0, -2.0, 3.5, 0.25];
        let x = solve_spd(&a, &b, 1e-12).unwrap();
        for i in 0..4 {
            assert!((x[i] - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn random_spd_matches_cholesky_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let n = 10;
            // A = B^T B + n I is SPD.
            let b_mat: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        a[i][j] += b_mat[k][i] * b_mat[k][j];
                    }
                }
                a[i][i] += n as f64;
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let expected = cholesky_solve(&a, &rhs);
            let x = solve_spd(&CsrMatrix::from_dense(&a), &rhs, 1e-14).unwrap();
            for i in 0..n {
                assert!((x[i] - expected[i]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn masked_solve_respects_fixed_values() {
        // 1D Laplacian with the ends pinned.
        let a = CsrMatrix::from_dense(&[
            vec![2.0, -1.0, 0.0, 0.0],
            vec![-1.0, 2.0, -1.0, 0.0],
            vec![0.0, -1.0, 2.0, -1.0],
            vec![0.0, 0.0, -1.0, 2.0],
        ]);
        let free = [false, true, true, false];
        let x0 = [1.0, 0.0, 0.0, 2.0];
        let b = [0.0, 0.0, 0.0, 0.0];
        let x = cg_masked(&a, &b, &free, &x0, 1e-14).unwrap();
        assert_eq!(x[0], 1.0);
        assert_eq!(x[3], 2.0);
        // Interior satisfies the pinned equations: 2x1 = x0 + x2, 2x2 = x1 + x3.
        assert!((2.0 * x[1] - x[0] - x[2]).abs() < 1e-12);
        assert!((2.0 * x[2] - x[1] - x[3]).abs() < 1e-12);
    }
}
