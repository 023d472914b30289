//! Constrained spaces: potentials with zero tangential trace, the range of
//! the constrained curl, and the discrete harmonic Dirichlet and Neumann
//! fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::get_or_try;
use crate::curlops::{self, RANGE_TOL};
use crate::error::Result;
use crate::linalg::{norm, orthonormalize_above, pcg};
use crate::mesh::SimplicialComplex;
use crate::rank::rank;
use crate::whitney::{evaluate_in_tet, face_quadrature, Cochain, OperatorBundle};

/// Betti numbers `(b0, b1, b2)` from exact ranks of the incidence matrices.
pub fn betti_numbers(complex: &SimplicialComplex) -> (usize, usize, usize) {
    let r0 = rank(complex.d0());
    let r1 = rank(complex.d1());
    let r2 = rank(complex.d2());
    let b0 = complex.n_vertices() - r0;
    let b1 = complex.n_edges() - r1 - r0;
    let b2 = complex.n_faces() - r2 - r1;
    (b0, b1, b2)
}

/// Boundary condition of a harmonic field space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicKind {
    /// Closed and weakly co-closed on all edges (vanishing normal part).
    Neumann,
    /// Closed, supported on non-boundary edges, and weakly co-closed against
    /// interior vertices (vanishing tangential part).
    Dirichlet,
}

/// Singular values of probe projections below this fraction of the probe
/// norm are treated as zero. A genuine harmonic component of a random probe
/// is of order `1/sqrt(n_edges)` of it, while what the iterative closed
/// projection leaves behind is near 1e-10 of it; the cutoff sits in between.
const HARMONIC_CUTOFF: f64 = 1e-6;

fn compute_harmonic(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    kind: HarmonicKind,
) -> Result<Vec<Vec<f64>>> {
    let (_, b1, b2) = betti_numbers(complex);
    let (support, target, grad, seed) = match kind {
        HarmonicKind::Neumann => ((0..complex.n_edges()).collect::<Vec<_>>(), b1, ops.grad_all(complex)?, 11),
        HarmonicKind::Dirichlet => (ops.interior(complex).edges.clone(), b2, ops.grad_interior(complex)?, 13),
    };
    if support.is_empty() {
        return Ok(Vec::new());
    }
    if kind == HarmonicKind::Dirichlet {
        return dirichlet_from_components(complex, ops, grad);
    }
    let faces: Vec<usize> = (0..complex.n_faces()).collect();
    let d1s = ops.d1(complex).0.select(&faces, &support);
    let d1st = d1s.transpose();
    let normal = d1s.matmul(&d1st);
    let inv_diag: Vec<f64> = normal
        .diagonal()
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fields = Vec::new();
    let mut probe_scale = 0.0f64;
    // A few extra probes catch a dimension larger than expected.
    for _ in 0..target + 2 {
        let mut r: Vec<f64> = (0..support.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rn = norm(&r);
        r.iter_mut().for_each(|v| *v /= rn);
        // Euclidean projection onto closed cochains.
        let beta = pcg(
            |x, y| normal.mul_vec_into(x, y),
            &inv_diag,
            &d1s.mul_vec(&r),
            1e-13,
            50_000,
        )?
        .x;
        let corr = d1st.mul_vec(&beta);
        let mut full = vec![0.0; complex.n_edges()];
        for (i, &e) in support.iter().enumerate() {
            full[e] = r[i] - corr[i];
        }
        let mut probe = vec![0.0; complex.n_edges()];
        for (i, &e) in support.iter().enumerate() {
            probe[e] = r[i];
        }
        probe_scale = probe_scale.max(ops.m1.quad_form(&probe).sqrt());
        let (_, _, h) = grad.split(&ops.m1, &full);
        fields.push(h);
    }
    orthonormalize_above(&ops.m1, &fields, HARMONIC_CUTOFF * probe_scale)
}

/// Dirichlet fields as gradients of boundary-component indicators with
/// their interior-gradient part removed. These are closed exactly, where
/// projected probes carry the residual of an iterative solve. One indicator
/// per connected component is dependent and drops out.
fn dirichlet_from_components(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    grad: &crate::cache::GradientProjector,
) -> Result<Vec<Vec<f64>>> {
    let (n_components, labels) = complex.boundary_components();
    let d0 = complex.d0().to_real();
    let mut fields = Vec::new();
    let mut scale = 0.0f64;
    for l in 0..n_components {
        let u: Vec<f64> = labels.iter().map(|&x| if x == Some(l) { 1.0 } else { 0.0 }).collect();
        let z = d0.mul_vec(&u);
        scale = scale.max(ops.m1.quad_form(&z).max(0.0).sqrt());
        let (_, _, h) = grad.split(&ops.m1, &z);
        fields.push(h);
    }
    orthonormalize_above(&ops.m1, &fields, HARMONIC_CUTOFF * scale)
}

/// Cached Dirichlet fields as plain vectors.
pub(crate) fn dirichlet_fields<'a>(complex: &SimplicialComplex, ops: &'a OperatorBundle) -> Result<&'a Vec<Vec<f64>>> {
    get_or_try(&ops.cache.dirichlet, || compute_harmonic(complex, ops, HarmonicKind::Dirichlet))
}

pub(crate) fn neumann_fields<'a>(complex: &SimplicialComplex, ops: &'a OperatorBundle) -> Result<&'a Vec<Vec<f64>>> {
    get_or_try(&ops.cache.neumann, || compute_harmonic(complex, ops, HarmonicKind::Neumann))
}

/// M1-orthonormal basis of the discrete harmonic fields of the given kind.
pub fn harmonic_basis(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    kind: HarmonicKind,
) -> Result<Vec<Cochain>> {
    let fields = match kind {
        HarmonicKind::Neumann => neumann_fields(complex, ops)?,
        HarmonicKind::Dirichlet => dirichlet_fields(complex, ops)?,
    };
    fields.iter().map(|h| Cochain::new(complex, 1, h.clone())).collect()
}

/// Defining residuals of a harmonic field: `‖D1 h‖ / ‖h‖` and the weak
/// divergence `‖D0ᵀ M1 h‖ / ‖M1 h‖` against the relevant vertices.
pub fn harmonic_residuals(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    kind: HarmonicKind,
    h: &Cochain,
) -> Result<(f64, f64)> {
    let hn = norm(h.values());
    if hn == 0.0 {
        return Ok((0.0, 0.0));
    }
    let closed = norm(&ops.d1(complex).0.mul_vec(h.values())) / hn;
    let grad = match kind {
        HarmonicKind::Neumann => ops.grad_all(complex)?,
        HarmonicKind::Dirichlet => ops.grad_interior(complex)?,
    };
    let m1h = ops.m1.mul_vec(h.values());
    let coclosed = norm(&grad.d0.mul_transpose_vec(&m1h)) / norm(&m1h);
    Ok((closed, coclosed))
}

/// Outcome of a representability test.
#[derive(Debug, Clone)]
pub struct Representability {
    pub representable: bool,
    /// Relative M2 norm of the least-squares residual.
    pub residual: f64,
    /// The component of the flux outside the range of the constrained curl.
    pub witness: Option<Cochain>,
}

/// Decides whether an admissible flux is the curl of an admissible potential.
pub fn check_flux_representability(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    flux: &Cochain,
) -> Result<Representability> {
    curlops::check_admissible_flux(complex, flux)?;
    let (_, residual, rel) = curlops::least_squares_potential(complex, ops, flux.values())?;
    let representable = rel <= RANGE_TOL;
    Ok(Representability {
        representable,
        residual: rel,
        witness: if representable {
            None
        } else {
            Some(Cochain::new(complex, 2, residual)?)
        },
    })
}

/// Nearest admissible flux in the Euclidean norm: zero on boundary faces and
/// divergence free.
pub fn project_admissible_flux(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    flux: &[f64],
) -> Result<Cochain> {
    let p = ops.flux_projector(complex)?;
    Cochain::new(complex, 2, p.project(complex.n_faces(), flux))
}

/// Face fluxes of the Whitney field of a 1-cochain, made admissible.
pub fn harmonic_flux(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    h: &Cochain,
) -> Result<Cochain> {
    h.expect_degree(complex, 1)?;
    let mut flux = vec![0.0; complex.n_faces()];
    for (f, slot) in flux.iter_mut().enumerate() {
        let t = complex.face_tets(f)[0];
        for (x, na) in face_quadrature(complex, f) {
            let v = evaluate_in_tet(complex, h, t, complex.barycentric(t, x))?;
            *slot += crate::geometry::dot3(v, na);
        }
    }
    project_admissible_flux(complex, ops, &flux)
}

/// Random potential on the non-boundary edges with entries in [-1, 1].
pub fn random_admissible_potential<R: Rng>(complex: &SimplicialComplex, rng: &mut R) -> Cochain {
    let values = (0..complex.n_edges())
        .map(|e| {
            if complex.is_boundary_edge(e) {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    Cochain::from_parts(1, values)
}

/// Random admissible flux: random face values projected to admissibility.
pub fn random_admissible_flux<R: Rng>(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    rng: &mut R,
) -> Result<Cochain> {
    let raw: Vec<f64> = (0..complex.n_faces()).map(|_| rng.random_range(-1.0..1.0)).collect();
    project_admissible_flux(complex, ops, &raw)
}

/// The constrained spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Potentials vanishing on boundary edges.
    OmegaT,
    /// Fluxes in the range of the constrained curl.
    OmegaN,
    DirichletHarmonic,
    NeumannHarmonic,
}

/// A constrained space as a DOF selection or an explicit basis.
#[derive(Debug, Clone)]
pub struct ConstrainedSpace {
    pub kind: SpaceKind,
    /// Non-boundary edges carrying the free coefficients (potential spaces).
    pub interior_edges: Vec<usize>,
    /// M1-orthonormal basis (harmonic kinds only).
    pub basis: Vec<Cochain>,
    pub dimension: usize,
}

impl ConstrainedSpace {
    pub fn new(complex: &SimplicialComplex, ops: &OperatorBundle, kind: SpaceKind) -> Result<Self> {
        let interior_edges = ops.interior(complex).edges.clone();
        let (basis, dimension) = match kind {
            SpaceKind::OmegaT => (Vec::new(), interior_edges.len()),
            // Dimension of the range: interior edges minus the curl kernel.
            SpaceKind::OmegaN => (Vec::new(), ops.gauge(complex)?.cotree.len()),
            SpaceKind::DirichletHarmonic => {
                let b = harmonic_basis(complex, ops, HarmonicKind::Dirichlet)?;
                let d = b.len();
                (b, d)
            }
            SpaceKind::NeumannHarmonic => {
                let b = harmonic_basis(complex, ops, HarmonicKind::Neumann)?;
                let d = b.len();
                (b, d)
            }
        };
        Ok(Self {
            kind,
            interior_edges,
            basis,
            dimension,
        })
    }

    /// Membership test at the documented tolerances.
    pub fn contains(&self, complex: &SimplicialComplex, ops: &OperatorBundle, x: &Cochain) -> Result<bool> {
        Ok(match self.kind {
            SpaceKind::OmegaT => curlops::check_admissible_potential(complex, x).is_ok(),
            SpaceKind::OmegaN => {
                curlops::check_admissible_flux(complex, x).is_ok()
                    && check_flux_representability(complex, ops, x)?.representable
            }
            SpaceKind::DirichletHarmonic | SpaceKind::NeumannHarmonic => {
                let kind = if self.kind == SpaceKind::DirichletHarmonic {
                    if curlops::check_admissible_potential(complex, x).is_err() {
                        return Ok(false);
                    }
                    HarmonicKind::Dirichlet
                } else {
                    HarmonicKind::Neumann
                };
                let (a, b) = harmonic_residuals(complex, ops, kind, x)?;
                a <= 1e-10 && b <= 1e-10
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, Domain};
    use crate::whitney::assemble_operators;

    #[test]
    fn box_betti_numbers() {
        let c = generate_mesh(&Domain::Box { sides: [1.0; 3] }, 2).unwrap();
        assert_eq!(betti_numbers(&c), (1, 0, 0));
    }

    #[test]
    fn admissible_projection_is_admissible() {
        let c = generate_mesh(&Domain::Ball { radius: 1.0 }, 1).unwrap();
        let ops = assemble_operators(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_admissible_flux(&c, &ops, &mut rng).unwrap();
        curlops::check_admissible_flux(&c, &b).unwrap();
        assert!(check_flux_representability(&c, &ops, &b).unwrap().representable);
    }
}
