//! Dense and iterative linear algebra used by the solvers.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

/// Norm induced by a symmetric positive (semi)definite matrix.
pub fn energy_norm(m: &CsrMatrix, x: &[f64]) -> f64 {
    m.quad_form(x).max(0.0).sqrt()
}

/// Sparse Cholesky factorisation of a symmetric positive definite matrix.
pub struct SparseCholesky {
    llt: Llt<usize, f64>,
    n: usize,
}

impl SparseCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "cholesky of a non-square matrix");
        let llt = a
            .to_faer()
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::SolverFailure(format!("sparse cholesky: {e:?}")))?;
        Ok(Self { llt, n: a.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::<f64>::zeros(self.n, 1);
        for (i, v) in b.iter().enumerate() {
            rhs[(i, 0)] = *v;
        }
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solves for several right-hand sides at once.
    pub fn solve_many(&self, bs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if bs.is_empty() {
            return Vec::new();
        }
        let mut rhs = Mat::<f64>::zeros(self.n, bs.len());
        for (j, b) in bs.iter().enumerate() {
            for (i, v) in b.iter().enumerate() {
                rhs[(i, j)] = *v;
            }
        }
        let x = self.llt.solve(&rhs);
        (0..bs.len())
            .map(|j| (0..self.n).map(|i| x[(i, j)]).collect())
            .collect()
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for a symmetric positive semidefinite
/// operator and a consistent right-hand side.
///
/// `apply(x, y)` must overwrite `y` with `A x`. `inv_diag` is a Jacobi
/// preconditioner; zero entries are treated as identity.
pub fn pcg<F>(
    apply: F,
    inv_diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let precond = |r: &[f64]| -> Vec<f64> {
        r.iter()
            .zip(inv_diag)
            .map(|(ri, d)| if *d > 0.0 { ri * d } else { *ri })
            .collect()
    };
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut best = 1.0;
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Semidefinite breakdown: search direction inside the null space.
            let rel = norm(&r) / bnorm;
            if rel <= tol {
                return Ok(CgOutcome {
                    x,
                    iterations: it,
                    relative_residual: rel,
                });
            }
            return Err(Error::SolverFailure(format!(
                "cg breakdown at iteration {it} (relative residual {rel:.3e})"
            )));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm(&r) / bnorm;
        best = rel;
        if rel <= tol {
            // Recompute the true residual to guard against drift.
            apply(&x, &mut ap);
            let true_rel = norm(&sub(b, &ap)) / bnorm;
            if true_rel <= tol * 10.0 {
                return Ok(CgOutcome {
                    x,
                    iterations: it,
                    relative_residual: true_rel,
                });
            }
            r = sub(b, &ap);
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::SolverFailure(format!(
        "cg did not converge in {max_iter} iterations (relative residual {best:.3e})"
    )))
}

/// Eigen-decomposition of a dense symmetric matrix given as rows.
/// Eigenvalues ascend; eigenvectors are returned as columns.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::SolverFailure(format!("dense eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let vals = (0..n).map(|i| s[i]).collect();
    let vecs = (0..n).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Ok((vals, vecs))
}

/// Gram matrix `G_ij = v_iᵀ M v_j`.
pub fn gram(m: &CsrMatrix, vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mv: Vec<Vec<f64>> = vs.iter().map(|v| m.mul_vec(v)).collect();
    vs.iter()
        .map(|vi| mv.iter().map(|mvj| dot(vi, mvj)).collect())
        .collect()
}

/// M-orthonormal basis of `span(vs)`, discarding directions whose singular
/// value falls below `rel_cutoff * sigma_max`.
pub fn orthonormalize(m: &CsrMatrix, vs: &[Vec<f64>], rel_cutoff: f64) -> Result<Vec<Vec<f64>>> {
    if vs.is_empty() {
        return Ok(Vec::new());
    }
    let g = gram(m, vs);
    let sigma_max = symmetric_eigen(&g)?
        .0
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
        .max(0.0)
        .sqrt();
    if sigma_max == 0.0 {
        return Ok(Vec::new());
    }
    orthonormalize_above(m, vs, rel_cutoff * sigma_max)
}

/// M-orthonormal basis of `span(vs)`, discarding directions whose singular
/// value is at most `sigma_floor` (an absolute threshold).
pub fn orthonormalize_above(
    m: &CsrMatrix,
    vs: &[Vec<f64>],
    sigma_floor: f64,
) -> Result<Vec<Vec<f64>>> {
    if vs.is_empty() {
        return Ok(Vec::new());
    }
    let (vals, vecs) = symmetric_eigen(&gram(m, vs))?;
    let n = vs[0].len();
    let mut out = Vec::new();
    for (val, coeffs) in vals.iter().zip(&vecs).rev() {
        let sigma = val.max(0.0).sqrt();
        if sigma <= sigma_floor {
            continue;
        }
        let mut b = vec![0.0; n];
        for (c, v) in coeffs.iter().zip(vs) {
            axpy(c / sigma, v, &mut b);
        }
        out.push(b);
    }
    // One more modified Gram-Schmidt sweep to polish orthonormality.
    for i in 0..out.len() {
        for j in 0..i {
            let mj = m.mul_vec(&out[j]);
            let c = dot(&out[i], &mj);
            let (head, tail) = out.split_at_mut(i);
            axpy(-c, &head[j], &mut tail[0]);
        }
        let nrm = energy_norm(m, &out[i]);
        out[i].iter_mut().for_each(|v| *v /= nrm);
    }
    Ok(out)
}

/// Dense Cholesky factor (lower) of a small SPD matrix.
pub fn dense_cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::SolverFailure(format!(
                        "dense cholesky: pivot {i} is {s:.3e}"
                    )));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn cholesky_and_cg_agree() {
        let a = laplacian_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let x1 = SparseCholesky::new(&a).unwrap().solve(&b);
        let inv: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
        let x2 = pcg(|x, y| a.mul_vec_into(x, y), &inv, &b, 1e-13, 500).unwrap().x;
        assert!(norm(&sub(&x1, &x2)) < 1e-9 * norm(&x1));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(matches!(SparseCholesky::new(&a), Err(Error::SolverFailure(_))));
    }

    #[test]
    fn orthonormalize_drops_dependent_vectors() {
        let m = laplacian_1d(4);
        let v1 = vec![1.0, 0.0, 0.0, 1.0];
        let v2 = vec![0.0, 1.0, 1.0, 0.0];
        let v3 = add(&v1, &scaled(2.0, &v2));
        let basis = orthonormalize(&m, &[v1, v2, v3], 1e-10).unwrap();
        assert_eq!(basis.len(), 2);
        let g = gram(&m, &basis);
        assert!((g[0][0] - 1.0).abs() < 1e-12 && g[0][1].abs() < 1e-12);
    }

    #[test]
    fn symmetric_eigen_sorted() {
        let (vals, _) = symmetric_eigen(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
    }
}
