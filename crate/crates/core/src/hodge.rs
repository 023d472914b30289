//! Discrete Hodge-Morrey splitting of 1-cochains.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, pcg};
use crate::mesh::SimplicialComplex;
use crate::whitney::{Cochain, OperatorBundle};

/// `ω = exact + coexact + harmonic_remainder`.
#[derive(Debug, Clone)]
pub struct HodgeSplit {
    /// `D0·α` with `α` vanishing on boundary vertices.
    pub exact: Cochain,
    /// `M1⁻¹ D1ᵀ M2 β` with `β` vanishing on boundary faces.
    pub coexact: Cochain,
    pub harmonic_remainder: Cochain,
    /// Scalar potential `α` of the exact part (all vertices).
    pub potential: Cochain,
    /// `‖ω − exact − coexact − remainder‖ / ‖ω‖` in the M1 norm.
    pub reconstruction_residual: f64,
    /// Largest pairwise `|⟨x, y⟩_{M1}| / (‖x‖ ‖y‖)` among the three parts
    /// (pairs with a vanishing part count as orthogonal).
    pub orthogonality_residual: f64,
}

/// Relative residual of the normal-equation solves.
const SOLVE_TOL: f64 = 1e-12;
const MAX_ITER: usize = 20_000;

pub fn hodge_decompose(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    omega: &Cochain,
) -> Result<HodgeSplit> {
    omega.expect_degree(complex, 1)?;
    let w = omega.values();
    let ne = complex.n_edges();

    // Exact part: L_int α = D0_intᵀ M1 ω (sparse Cholesky).
    let grad = ops.grad_interior(complex)?;
    let (alpha, exact, rest) = grad.split(&ops.m1, w);
    let mut potential = vec![0.0; complex.n_vertices()];
    for (&v, a) in grad.vertices.iter().zip(&alpha) {
        potential[v] = *a;
    }

    // Coexact part: with G = D1ᵀ M2 E (E extends interior faces by zero),
    // solve Gᵀ M1⁻¹ G β = Gᵀ ω by PCG and set coexact = M1⁻¹ G β.
    let faces = &ops.interior(complex).faces;
    let edges: Vec<usize> = (0..ne).collect();
    let g = ops.d1(complex).1.matmul(&ops.m2).select(&edges, faces);
    let gt = g.transpose();
    let m1 = ops.m1_cholesky()?;
    let rhs = gt.mul_vec(&rest);
    // Jacobi preconditioner from a lumped M1.
    let lumped: Vec<f64> = (0..ne).map(|e| ops.m1.row(e).1.iter().map(|v| v.abs()).sum()).collect();
    let inv_diag: Vec<f64> = (0..faces.len())
        .map(|j| {
            let (cols, vals) = gt.row(j);
            let d: f64 = cols.iter().zip(vals).map(|(&e, v)| v * v / lumped[e]).sum();
            if d > 0.0 {
                1.0 / d
            } else {
                0.0
            }
        })
        .collect();
    // Convergence is measured against the load of the whole input, so an
    // input without coexact content (rhs at roundoff) is not chased.
    let scale = norm(&gt.mul_vec(w));
    let rhs_norm = norm(&rhs);
    let coexact = if faces.is_empty() || rhs_norm <= SOLVE_TOL * scale {
        vec![0.0; ne]
    } else {
        let tol = SOLVE_TOL * (scale / rhs_norm).max(1.0);
        let outcome = pcg(
            |x, y| {
                let t = m1.solve(&g.mul_vec(x));
                gt.mul_vec_into(&t, y);
            },
            &inv_diag,
            &rhs,
            tol,
            MAX_ITER,
        )
        .map_err(|e| Error::SolverFailure(format!("coexact projection: {e}")))?;
        m1.solve(&g.mul_vec(&outcome.x))
    };

    let remainder: Vec<f64> = (0..ne).map(|e| w[e] - exact[e] - coexact[e]).collect();
    let recon: Vec<f64> = (0..ne)
        .map(|e| w[e] - exact[e] - coexact[e] - remainder[e])
        .collect();
    let norm_w = ops.m1.quad_form(w).max(0.0).sqrt();
    let reconstruction_residual = if norm_w == 0.0 {
        0.0
    } else {
        ops.m1.quad_form(&recon).max(0.0).sqrt() / norm_w
    };
    let parts = [&exact, &coexact, &remainder];
    let m_parts: Vec<Vec<f64>> = parts.iter().map(|p| ops.m1.mul_vec(p)).collect();
    let norms: Vec<f64> = parts
        .iter()
        .zip(&m_parts)
        .map(|(p, mp)| dot(p, mp).max(0.0).sqrt())
        .collect();
    let mut orthogonality_residual = 0.0f64;
    for i in 0..3 {
        for j in i + 1..3 {
            // Parts below roundoff relative to ω carry no direction.
            if norms[i] <= 1e-14 * norm_w || norms[j] <= 1e-14 * norm_w {
                continue;
            }
            let c = dot(parts[i], &m_parts[j]).abs() / (norms[i] * norms[j]);
            orthogonality_residual = orthogonality_residual.max(c);
        }
    }
    Ok(HodgeSplit {
        exact: Cochain::new(complex, 1, exact)?,
        coexact: Cochain::new(complex, 1, coexact)?,
        harmonic_remainder: Cochain::new(complex, 1, remainder)?,
        potential: Cochain::new(complex, 0, potential)?,
        reconstruction_residual,
        orthogonality_residual,
    })
}
