//! The constrained curl `a ↦ D1·a` on potentials with zero tangential
//! trace, its minimal-norm inverse and the generalized eigenproblem
//! `K a = λ N a`.
//!
//! Both K and N vanish on the kernel of the constrained curl (interior
//! gradients plus Dirichlet fields). The solvers work on the cotree edges of
//! a tree-cotree splitting, where K is positive definite, and map results
//! back to the weakly divergence-free gauge afterwards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cache::Gauge;
use crate::error::{Error, Result, Sign};
use crate::linalg::{axpy, dense_cholesky, dot, norm, symmetric_eigen};
use crate::mesh::SimplicialComplex;
use crate::spaces;
use crate::whitney::{Cochain, OperatorBundle};

/// Tolerance on boundary-edge values of an admissible potential.
const TRACE_TOL: f64 = 1e-14;
/// Tolerance on boundary values and divergence of an admissible flux.
const FLUX_TOL: f64 = 1e-10;
/// Relative least-squares residual above which a flux is not a curl.
pub const RANGE_TOL: f64 = 1e-8;

/// Checks that a 1-cochain vanishes on boundary edges.
pub fn check_admissible_potential(complex: &SimplicialComplex, a: &Cochain) -> Result<()> {
    a.expect_degree(complex, 1)?;
    let scale = a.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (e, v) in a.values().iter().enumerate() {
        if complex.is_boundary_edge(e) && v.abs() > TRACE_TOL * scale {
            return Err(Error::ConstraintViolation(format!(
                "potential is {v:.3e} on boundary edge {e}"
            )));
        }
    }
    Ok(())
}

/// Checks that a 2-cochain vanishes on boundary faces and is divergence free.
pub fn check_admissible_flux(complex: &SimplicialComplex, b: &Cochain) -> Result<()> {
    b.expect_degree(complex, 2)?;
    let scale = norm(b.values());
    let boundary = complex
        .boundary_faces()
        .iter()
        .fold(0.0f64, |m, &f| m.max(b.values()[f].abs()));
    if boundary > FLUX_TOL * scale {
        return Err(Error::ConstraintViolation(format!(
            "flux is {boundary:.3e} on a boundary face (norm {scale:.3e})"
        )));
    }
    let div = norm(&complex.d2().to_real().mul_vec(b.values()));
    if div > FLUX_TOL * scale {
        return Err(Error::ConstraintViolation(format!(
            "flux divergence {div:.3e} exceeds tolerance (norm {scale:.3e})"
        )));
    }
    Ok(())
}

/// Constrained curl: the flux `D1·a` of an admissible potential.
pub fn curl_apply(complex: &SimplicialComplex, a: &Cochain) -> Result<Cochain> {
    check_admissible_potential(complex, a)?;
    let b = complex.d1().to_real().mul_vec(a.values());
    Cochain::new(complex, 2, b)
}

/// Removes from an interior-supported potential its M1-orthogonal
/// projection onto the kernel of the constrained curl.
pub(crate) fn divergence_free_gauge(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    a: &[f64],
) -> Result<Vec<f64>> {
    let (_, _, mut rest) = ops.grad_interior(complex)?.split(&ops.m1, a);
    for h in spaces::dirichlet_fields(complex, ops)? {
        let c = dot(h, &ops.m1.mul_vec(&rest));
        axpy(-c, h, &mut rest);
    }
    for (e, v) in rest.iter_mut().enumerate() {
        if complex.is_boundary_edge(e) {
            *v = 0.0;
        }
    }
    Ok(rest)
}

/// Largest relative violation of the divergence-free gauge: weak divergence
/// against interior vertices and M1-overlap with Dirichlet fields.
pub fn gauge_residual(complex: &SimplicialComplex, ops: &OperatorBundle, a: &Cochain) -> Result<f64> {
    let m1a = ops.m1.mul_vec(a.values());
    let scale = norm(&m1a);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let g = ops.grad_interior(complex)?;
    let mut worst = norm(&g.d0.mul_transpose_vec(&m1a)) / scale;
    let a_norm = dot(a.values(), &m1a).max(0.0).sqrt();
    for h in spaces::dirichlet_fields(complex, ops)? {
        worst = worst.max(dot(h, &m1a).abs() / a_norm);
    }
    Ok(worst)
}

/// Least-squares potential of a flux: the minimal-M1-norm admissible `a`
/// minimising `‖D1·a − b‖_{M2}`. Returns `a`, the residual flux and its
/// relative M2 norm.
pub fn least_squares_potential(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    b: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let (d1, d1t) = ops.d1(complex);
    let gauge = ops.gauge(complex)?;
    let b_norm = ops.m2.quad_form(b).max(0.0).sqrt();
    let a = if gauge.cotree.is_empty() {
        vec![0.0; complex.n_edges()]
    } else {
        let rhs = gauge.restrict(&d1t.mul_vec(&ops.m2.mul_vec(b)));
        gauge.extend(complex.n_edges(), &gauge.chol.solve(&rhs))
    };
    let a = divergence_free_gauge(complex, ops, &a)?;
    let curl = d1.mul_vec(&a);
    let residual: Vec<f64> = b.iter().zip(&curl).map(|(x, y)| x - y).collect();
    let rel = if b_norm == 0.0 {
        0.0
    } else {
        ops.m2.quad_form(&residual).max(0.0).sqrt() / b_norm
    };
    Ok((a, residual, rel))
}

/// Minimal-norm inverse of the constrained curl.
///
/// Returns the admissible potential of least M1 norm whose curl is `b`.
/// Fails with `NotInRange` when `b` has a component outside the range, such
/// as a harmonic flux on a domain with nontrivial first cohomology.
pub fn curl_inverse(complex: &SimplicialComplex, ops: &OperatorBundle, b: &Cochain) -> Result<Cochain> {
    check_admissible_flux(complex, b)?;
    let (a, _, rel) = least_squares_potential(complex, ops, b.values())?;
    if rel > RANGE_TOL {
        return Err(Error::NotInRange { residual: rel });
    }
    Cochain::new(complex, 1, a)
}

/// Curl eigenpairs with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    /// Potentials in the divergence-free gauge, normalised to `aᵀNa = ±1`.
    pub eigen_potentials: Vec<Cochain>,
    pub eigen_fluxes: Vec<Cochain>,
    /// `‖K a − λ N a‖ / ‖K a‖` over the non-boundary edges.
    pub residuals: Vec<f64>,
    pub lambda_plus: Option<f64>,
    pub lambda_minus: Option<f64>,
}

impl EigenResult {
    /// Index of the eigenpair at `lambda_plus` (`Positive`) or
    /// `lambda_minus` (`Negative`).
    pub fn extremal(&self, sign: Sign) -> Option<usize> {
        let target = match sign {
            Sign::Positive => self.lambda_plus?,
            Sign::Negative => self.lambda_minus?,
        };
        self.eigenvalues.iter().position(|&l| l == target)
    }
}

/// Knobs of the eigensolver.
#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Residual at which Ritz pairs are accepted early.
    pub target_residual: f64,
    /// Residual every returned pair must meet.
    pub required_residual: f64,
    /// Block size of the Krylov iteration (at least 4).
    pub block: usize,
    /// Largest Krylov basis before a restart.
    pub max_basis: usize,
    pub max_restarts: usize,
    /// Cotree sizes up to this use a dense solve.
    pub dense_limit: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            target_residual: 1e-13,
            required_residual: 1e-8,
            block: 6,
            max_basis: 360,
            max_restarts: 30,
            dense_limit: 600,
            seed: 0x5eed_c071,
        }
    }
}

/// Eigenpairs of `K a = λ N a` nearest to zero on each side: the
/// `count_pos` smallest positive and `count_neg` largest negative ones.
pub fn curl_eigs(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    count_pos: usize,
    count_neg: usize,
) -> Result<EigenResult> {
    curl_eigs_with(complex, ops, count_pos, count_neg, &EigenOptions::default())
}

pub fn curl_eigs_with(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    count_pos: usize,
    count_neg: usize,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let gauge = ops.gauge(complex)?;
    let n = gauge.cotree.len();
    // Ritz pairs of `N x = μ K x` with `μ = 1/λ`.
    let pairs = if n <= opts.dense_limit {
        dense_pencil(gauge)?
    } else {
        krylov_pencil(gauge, count_pos, count_neg, opts)?
    };
    let mut pos: Vec<&(f64, Vec<f64>)> = pairs.iter().filter(|p| p.0 > 0.0).collect();
    let mut neg: Vec<&(f64, Vec<f64>)> = pairs.iter().filter(|p| p.0 < 0.0).collect();
    pos.sort_by(|a, b| b.0.total_cmp(&a.0));
    neg.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pos.len() < count_pos {
        return Err(Error::InsufficientSpectrum {
            sign: Sign::Positive,
            requested: count_pos,
            found: pos.len(),
        });
    }
    if neg.len() < count_neg {
        return Err(Error::InsufficientSpectrum {
            sign: Sign::Negative,
            requested: count_neg,
            found: neg.len(),
        });
    }
    let chosen: Vec<&Vec<f64>> = pos[..count_pos]
        .iter()
        .chain(&neg[..count_neg])
        .map(|p| &p.1)
        .collect();
    let finished: Vec<(f64, Vec<f64>, f64)> = chosen
        .into_par_iter()
        .map(|x| finish_pair(complex, ops, gauge, x))
        .collect::<Result<_>>()?;
    let mut finished = finished;
    finished.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = EigenResult {
        eigenvalues: Vec::new(),
        eigen_potentials: Vec::new(),
        eigen_fluxes: Vec::new(),
        residuals: Vec::new(),
        lambda_plus: None,
        lambda_minus: None,
    };
    let d1 = ops.d1(complex).0;
    for (lambda, a, res) in finished {
        if res > opts.required_residual {
            return Err(Error::SolverFailure(format!(
                "eigenpair λ = {lambda} has residual {res:.3e}"
            )));
        }
        out.eigen_fluxes.push(Cochain::new(complex, 2, d1.mul_vec(&a))?);
        out.eigen_potentials.push(Cochain::new(complex, 1, a)?);
        out.eigenvalues.push(lambda);
        out.residuals.push(res);
    }
    out.lambda_plus = out.eigenvalues.iter().copied().filter(|&l| l > 0.0).reduce(f64::min);
    out.lambda_minus = out.eigenvalues.iter().copied().filter(|&l| l < 0.0).reduce(f64::max);
    Ok(out)
}

/// Every finite eigenvalue of the gauge-fixed pencil (dense; small meshes).
pub fn pencil_spectrum(complex: &SimplicialComplex, ops: &OperatorBundle) -> Result<Vec<f64>> {
    let gauge = ops.gauge(complex)?;
    let mut lambdas: Vec<f64> = dense_pencil(gauge)?.iter().map(|p| 1.0 / p.0).collect();
    lambdas.sort_by(f64::total_cmp);
    Ok(lambdas)
}

/// Relative residual `‖K a − λ N a‖ / ‖K a‖` on non-boundary edges.
pub fn eigen_residual(complex: &SimplicialComplex, ops: &OperatorBundle, lambda: f64, a: &[f64]) -> f64 {
    let ka = ops.k.mul_vec(a);
    let na = ops.n.mul_vec(a);
    let (mut num, mut den) = (0.0, 0.0);
    for e in 0..complex.n_edges() {
        if !complex.is_boundary_edge(e) {
            num += (ka[e] - lambda * na[e]).powi(2);
            den += ka[e] * ka[e];
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Gauge-fixes, normalises and measures one cotree eigenvector.
fn finish_pair(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    gauge: &Gauge,
    x: &[f64],
) -> Result<(f64, Vec<f64>, f64)> {
    let a = divergence_free_gauge(complex, ops, &gauge.extend(complex.n_edges(), x))?;
    let h = ops.n.quad_form(&a);
    if h == 0.0 || !h.is_finite() {
        return Err(Error::SolverFailure("eigenvector with zero helicity".into()));
    }
    let a: Vec<f64> = a.iter().map(|v| v / h.abs().sqrt()).collect();
    let lambda = ops.k.quad_form(&a) / ops.n.quad_form(&a);
    let res = eigen_residual(complex, ops, lambda, &a);
    Ok((lambda, a, res))
}

/// Dense solve of `N x = μ K x` on the cotree; returns pairs with `μ ≠ 0`.
fn dense_pencil(gauge: &Gauge) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = gauge.cotree.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let l = dense_cholesky(&gauge.k_cc.to_dense())?;
    let nd = gauge.n_cc.to_dense();
    // S = L⁻¹ N L⁻ᵀ, built column by column.
    let forward = |b: &[f64]| -> Vec<f64> {
        let mut y = b.to_vec();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
            y[i] = (y[i] - s) / l[i][i];
        }
        y
    };
    let backward = |b: &[f64]| -> Vec<f64> {
        let mut y = b.to_vec();
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[k][i] * y[k]).sum();
            y[i] = (y[i] - s) / l[i][i];
        }
        y
    };
    // Columns of L⁻¹ N (N symmetric, so its rows serve as columns).
    let linv_n: Vec<Vec<f64>> = nd.iter().map(|col| forward(col)).collect();
    // S = (L⁻¹ (L⁻¹ N)ᵀ)ᵀ; S is symmetric so rows equal columns.
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| linv_n[j][i]).collect();
        rows[i] = forward(&row);
    }
    let (theta, y) = symmetric_eigen(&rows)?;
    let scale = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    Ok(theta
        .iter()
        .zip(&y)
        .filter(|(t, _)| t.abs() > 1e-12 * scale && t.abs() > 0.0)
        .map(|(t, v)| (*t, backward(v)))
        .collect())
}

/// Block Krylov iteration for the extremal `μ` of `K⁻¹ N`, self-adjoint in
/// the K inner product, with full reorthogonalisation and restarts.
fn krylov_pencil(
    gauge: &Gauge,
    count_pos: usize,
    count_neg: usize,
    opts: &EigenOptions,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = gauge.cotree.len();
    let k = &gauge.k_cc;
    let nmat = &gauge.n_cc;
    let block = opts.block.max(4).max(count_pos.max(count_neg) + 2).min(n);
    let max_basis = opts.max_basis.max(4 * block).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    let mut best: Option<Vec<(f64, Vec<f64>)>> = None;
    for _restart in 0..=opts.max_restarts {
        let mut basis = Krylov::new(k, nmat);
        let mut fresh = basis.extend(start);
        let mut exhausted = false;
        let mut since_check = 0;
        loop {
            if fresh.is_empty() {
                exhausted = true;
            }
            let full = basis.len() + block > max_basis;
            since_check += 1;
            if exhausted || full || since_check >= 4 {
                since_check = 0;
                let ritz = basis.ritz(count_pos, count_neg, block)?;
                let wanted = ritz.wanted(count_pos, count_neg);
                let worst = wanted.iter().map(|p| p.residual).fold(0.0f64, f64::max);
                let enough = wanted.len() == count_pos + count_neg;
                if exhausted || (enough && worst <= opts.target_residual) {
                    return Ok(ritz.into_pairs());
                }
                if full {
                    if enough && worst <= opts.required_residual {
                        best = Some(ritz.pairs_clone());
                    }
                    start = ritz.restart_block(block);
                    break;
                }
            }
            let rhs: Vec<Vec<f64>> = fresh.iter().map(|&i| basis.nq[i].clone()).collect();
            let next = gauge.chol.solve_many(&rhs);
            fresh = basis.extend(next);
        }
    }
    best.ok_or_else(|| {
        Error::SolverFailure(format!(
            "krylov eigensolver did not converge after {} restarts",
            opts.max_restarts
        ))
    })
}

struct Krylov<'a> {
    k: &'a crate::sparse::CsrMatrix,
    nmat: &'a crate::sparse::CsrMatrix,
    q: Vec<Vec<f64>>,
    nq: Vec<Vec<f64>>,
    /// Projected pencil `H_ij = q_iᵀ N q_j`.
    h: Vec<Vec<f64>>,
}

struct RitzPair {
    mu: f64,
    x: Vec<f64>,
    residual: f64,
}

struct Ritz {
    pos: Vec<RitzPair>,
    neg: Vec<RitzPair>,
}

impl Ritz {
    fn wanted(&self, count_pos: usize, count_neg: usize) -> Vec<&RitzPair> {
        self.pos
            .iter()
            .take(count_pos)
            .chain(self.neg.iter().take(count_neg))
            .collect()
    }

    fn restart_block(&self, block: usize) -> Vec<Vec<f64>> {
        // Alternate sides so both ends keep their best approximations.
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while out.len() < block && (i < self.pos.len() || j < self.neg.len()) {
            if i < self.pos.len() {
                out.push(self.pos[i].x.clone());
                i += 1;
            }
            if out.len() < block && j < self.neg.len() {
                out.push(self.neg[j].x.clone());
                j += 1;
            }
        }
        out
    }

    fn pairs_clone(&self) -> Vec<(f64, Vec<f64>)> {
        self.pos
            .iter()
            .chain(&self.neg)
            .map(|p| (p.mu, p.x.clone()))
            .collect()
    }

    fn into_pairs(self) -> Vec<(f64, Vec<f64>)> {
        self.pos.into_iter().chain(self.neg).map(|p| (p.mu, p.x)).collect()
    }
}

impl<'a> Krylov<'a> {
    fn new(k: &'a crate::sparse::CsrMatrix, nmat: &'a crate::sparse::CsrMatrix) -> Self {
        Self {
            k,
            nmat,
            q: Vec::new(),
            nq: Vec::new(),
            h: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    /// K-orthonormalises the candidates against the basis (twice) and
    /// appends the survivors. Returns the indices of the new vectors.
    fn extend(&mut self, candidates: Vec<Vec<f64>>) -> Vec<usize> {
        let mut added = Vec::new();
        for mut w in candidates {
            let initial = dot(&w, &self.k.mul_vec(&w)).max(0.0).sqrt();
            if initial == 0.0 {
                continue;
            }
            for _ in 0..2 {
                let kw = self.k.mul_vec(&w);
                let coef: Vec<f64> = self.q.par_iter().map(|q| dot(q, &kw)).collect();
                for (c, q) in coef.iter().zip(&self.q) {
                    axpy(-c, q, &mut w);
                }
            }
            let nrm = dot(&w, &self.k.mul_vec(&w)).max(0.0).sqrt();
            if nrm <= 1e-10 * initial {
                continue;
            }
            w.iter_mut().for_each(|v| *v /= nrm);
            let nw = self.nmat.mul_vec(&w);
            let col: Vec<f64> = self.q.par_iter().map(|q| dot(q, &nw)).collect();
            for (row, v) in self.h.iter_mut().zip(&col) {
                row.push(*v);
            }
            let mut last = col;
            last.push(dot(&w, &nw));
            self.h.push(last);
            self.q.push(w);
            self.nq.push(nw);
            added.push(self.q.len() - 1);
        }
        added
    }

    fn ritz_vector(&self, y: &[f64]) -> Vec<f64> {
        let n = self.q[0].len();
        let mut x = vec![0.0; n];
        for (c, q) in y.iter().zip(&self.q) {
            axpy(*c, q, &mut x);
        }
        x
    }

    fn ritz(&self, count_pos: usize, count_neg: usize, block: usize) -> Result<Ritz> {
        let (theta, y) = symmetric_eigen(&self.h)?;
        let scale = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let keep = |t: f64| t.abs() > 1e-12 * scale && t != 0.0;
        let m = theta.len();
        let n_pos = count_pos.max(block);
        let n_neg = count_neg.max(block);
        let make = |idx: usize| -> RitzPair {
            let x = self.ritz_vector(&y[idx]);
            let mu = theta[idx];
            let kx = self.k.mul_vec(&x);
            let nx = self.nmat.mul_vec(&x);
            let r: Vec<f64> = kx.iter().zip(&nx).map(|(a, b)| a - b / mu).collect();
            RitzPair {
                mu,
                x,
                residual: norm(&r) / norm(&kx),
            }
        };
        let pos_idx: Vec<usize> = (0..m).rev().filter(|&i| theta[i] > 0.0 && keep(theta[i])).take(n_pos).collect();
        let neg_idx: Vec<usize> = (0..m).filter(|&i| theta[i] < 0.0 && keep(theta[i])).take(n_neg).collect();
        Ok(Ritz {
            pos: pos_idx.into_par_iter().map(make).collect(),
            neg: neg_idx.into_par_iter().map(make).collect(),
        })
    }
}
