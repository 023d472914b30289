//! Lowest-order Whitney forms: metric operators, interpolation of analytic
//! fields onto cochains, and pointwise reconstruction of cochains.
//!
//! Vector proxies: a 1-form is identified with the vector field it pairs
//! with tangents; a 2-form with the flux vector field. On a tet with
//! barycentric coordinates `λ` and gradients `g`:
//!
//! * edge `(p, q)`: `w = λ_p g_q - λ_q g_p`, `curl w = 2 g_p × g_q`;
//! * face `(p, q, r)`: `w = 2 (λ_p g_q × g_r + λ_q g_r × g_p + λ_r g_p × g_q)`.
//!
//! Local vertices are ordered by global id, which realises the global
//! orientation of edges and faces.

use std::sync::Arc;

use rayon::prelude::*;

use crate::cache::Cache;
use crate::error::{Error, Result};
use crate::geometry::{
    add3, barycentric_gradients, cross, dot3, frobenius, inverse3, scale3, sub3, tet_jacobian,
    tet_points, Vec3,
};
use crate::mesh::{SimplicialComplex, TET_EDGES};
use crate::sparse::CsrMatrix;

/// A real coefficient per k-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    degree: usize,
    values: Vec<f64>,
}

impl Cochain {
    pub fn new(complex: &SimplicialComplex, degree: usize, values: Vec<f64>) -> Result<Self> {
        if degree > 3 {
            return Err(Error::InvalidParams(format!("no {degree}-cochains on a 3-complex")));
        }
        let n = complex.n_simplices(degree);
        if values.len() != n {
            return Err(Error::InvalidParams(format!(
                "{degree}-cochain needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(Self { degree, values })
    }

    pub fn zeros(complex: &SimplicialComplex, degree: usize) -> Self {
        Self {
            degree,
            values: vec![0.0; complex.n_simplices(degree)],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn from_parts(degree: usize, values: Vec<f64>) -> Self {
        Self { degree, values }
    }

    pub(crate) fn expect_degree(&self, complex: &SimplicialComplex, degree: usize) -> Result<()> {
        if self.degree != degree || self.values.len() != complex.n_simplices(degree) {
            return Err(Error::InvalidParams(format!(
                "expected a {degree}-cochain on this complex, got degree {} with {} values",
                self.degree,
                self.values.len()
            )));
        }
        Ok(())
    }
}

/// Galerkin metric operators of the Whitney complex.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    /// Vertex mass matrix.
    pub m0: CsrMatrix,
    /// Edge mass matrix.
    pub m1: CsrMatrix,
    /// Face mass matrix.
    pub m2: CsrMatrix,
    /// Tet mass matrix (diagonal, `1 / volume`).
    pub m3: CsrMatrix,
    /// Curl-curl stiffness `D1ᵀ M2 D1`.
    pub k: CsrMatrix,
    /// Helicity pairing `N_ij = ∫ w_i ∧ d w_j`.
    pub n: CsrMatrix,
    /// Factorisations derived from the matrices above, built on first use.
    /// A bundle must only be used with the complex it was assembled on.
    pub(crate) cache: Arc<Cache>,
}

/// Largest admissible condition number of a tet Jacobian.
const MAX_JACOBIAN_CONDITION: f64 = 1e12;

struct Element {
    vol: f64,
    grads: [Vec3; 4],
    /// Oriented local vertex pairs of the six edges, with global edge ids.
    edges: [([usize; 2], usize); 6],
    /// Oriented local vertex triples of the four faces, with global face ids.
    faces: [([usize; 3], usize); 4],
}

impl Element {
    fn new(complex: &SimplicialComplex, t: usize) -> Self {
        let tet = complex.tets()[t];
        let p = tet_points(complex.vertices(), tet);
        let grads = barycentric_gradients(&p);
        let te = complex.tet_edges(t);
        let edges = std::array::from_fn(|i| {
            let [a, b] = TET_EDGES[i];
            let pair = if tet[a] < tet[b] { [a, b] } else { [b, a] };
            (pair, te[i])
        });
        let tf = complex.tet_faces(t);
        let faces = std::array::from_fn(|i| {
            let mut local: Vec<usize> = (0..4).filter(|&j| j != i).collect();
            local.sort_by_key(|&j| tet[j]);
            ([local[0], local[1], local[2]], tf[i])
        });
        Self {
            vol: complex.volumes()[t],
            grads,
            edges,
            faces,
        }
    }

    /// `∫ λ_i λ_j` over the tet.
    fn mass(&self, i: usize, j: usize) -> f64 {
        self.vol * if i == j { 2.0 } else { 1.0 } / 20.0
    }

    fn edge_curl(&self, e: usize) -> Vec3 {
        let [p, q] = self.edges[e].0;
        scale3(2.0, cross(self.grads[p], self.grads[q]))
    }

    /// Coefficient vectors multiplying `λ_0..λ_3` in the Whitney 1-form of edge `e`.
    fn edge_terms(&self, e: usize) -> [Vec3; 4] {
        let [p, q] = self.edges[e].0;
        let mut terms = [[0.0; 3]; 4];
        terms[p] = self.grads[q];
        terms[q] = scale3(-1.0, self.grads[p]);
        terms
    }

    /// Coefficient vectors multiplying `λ_0..λ_3` in the Whitney 2-form of face `f`.
    fn face_terms(&self, f: usize) -> [Vec3; 4] {
        let [p, q, r] = self.faces[f].0;
        let g = &self.grads;
        let mut terms = [[0.0; 3]; 4];
        terms[p] = scale3(2.0, cross(g[q], g[r]));
        terms[q] = scale3(2.0, cross(g[r], g[p]));
        terms[r] = scale3(2.0, cross(g[p], g[q]));
        terms
    }

    /// `∫ (Σ λ_i a_i) · (Σ λ_j b_j)`.
    fn product(&self, a: &[Vec3; 4], b: &[Vec3; 4]) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += self.mass(i, j) * dot3(a[i], b[j]);
            }
        }
        s
    }
}

struct LocalMatrices {
    m0: [[f64; 4]; 4],
    m1: [[f64; 6]; 6],
    m2: [[f64; 4]; 4],
    n: [[f64; 6]; 6],
}

fn local_matrices(el: &Element) -> LocalMatrices {
    let m0 = std::array::from_fn(|i| std::array::from_fn(|j| el.mass(i, j)));
    let et: [[Vec3; 4]; 6] = std::array::from_fn(|e| el.edge_terms(e));
    let ft: [[Vec3; 4]; 4] = std::array::from_fn(|f| el.face_terms(f));
    let m1 = std::array::from_fn(|i| std::array::from_fn(|j| el.product(&et[i], &et[j])));
    let m2 = std::array::from_fn(|i| std::array::from_fn(|j| el.product(&ft[i], &ft[j])));
    // ∫ w_i · curl w_j, with curl w_j constant and ∫ λ_k = vol / 4.
    let n = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let curl = el.edge_curl(j);
            let mean = et[i].iter().fold([0.0; 3], |acc, v| add3(acc, *v));
            0.25 * el.vol * dot3(mean, curl)
        })
    });
    LocalMatrices { m0, m1, m2, n }
}

fn check_jacobians(complex: &SimplicialComplex) -> Result<()> {
    for (t, tet) in complex.tets().iter().enumerate() {
        let j = tet_jacobian(&tet_points(complex.vertices(), *tet));
        let cond = inverse3(&j).map(|inv| frobenius(&j) * frobenius(&inv));
        match cond {
            Some(c) if c.is_finite() && c <= MAX_JACOBIAN_CONDITION => {}
            _ => {
                return Err(Error::DegenerateTet {
                    tet: t,
                    msg: format!("jacobian condition number {cond:?} exceeds 1e12"),
                })
            }
        }
    }
    Ok(())
}

/// Assembles all metric operators of the complex.
///
/// Element integrals are exact (closed-form integrals of barycentric
/// products). Element contributions are computed in parallel and summed in
/// tet order, so the result is bitwise independent of the thread count.
pub fn assemble_operators(complex: &SimplicialComplex) -> Result<OperatorBundle> {
    check_jacobians(complex)?;
    let locals: Vec<(Element, LocalMatrices)> = (0..complex.n_tets())
        .into_par_iter()
        .map(|t| {
            let el = Element::new(complex, t);
            let lm = local_matrices(&el);
            (el, lm)
        })
        .collect();
    let (nv, ne, nf, nt) = (
        complex.n_vertices(),
        complex.n_edges(),
        complex.n_faces(),
        complex.n_tets(),
    );
    let mut t0 = Vec::with_capacity(16 * nt);
    let mut t1 = Vec::with_capacity(36 * nt);
    let mut t2 = Vec::with_capacity(16 * nt);
    let mut tn = Vec::with_capacity(36 * nt);
    for (t, (el, lm)) in locals.iter().enumerate() {
        let tet = complex.tets()[t];
        for i in 0..4 {
            for j in 0..4 {
                t0.push((tet[i], tet[j], lm.m0[i][j]));
                t2.push((el.faces[i].1, el.faces[j].1, lm.m2[i][j]));
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                t1.push((el.edges[i].1, el.edges[j].1, lm.m1[i][j]));
                tn.push((el.edges[i].1, el.edges[j].1, lm.n[i][j]));
            }
        }
    }
    let m3 = CsrMatrix::from_triplets(
        nt,
        nt,
        &complex
            .volumes()
            .iter()
            .enumerate()
            .map(|(t, v)| (t, t, 1.0 / v))
            .collect::<Vec<_>>(),
    );
    let m2 = CsrMatrix::from_triplets(nf, nf, &t2);
    let d1 = complex.d1().to_real();
    let k = d1.transpose().matmul(&m2).matmul(&d1);
    Ok(OperatorBundle {
        m0: CsrMatrix::from_triplets(nv, nv, &t0),
        m1: CsrMatrix::from_triplets(ne, ne, &t1),
        m2,
        m3,
        k,
        n: CsrMatrix::from_triplets(ne, ne, &tn),
        cache: Arc::default(),
    })
}

/// An analytic vector field.
pub trait VectorField: Sync {
    fn value(&self, x: Vec3) -> Result<Vec3>;
}

impl<F: Fn(Vec3) -> Vec3 + Sync> VectorField for F {
    fn value(&self, x: Vec3) -> Result<Vec3> {
        Ok(self(x))
    }
}

/// Adapter for evaluators that can fail.
pub struct FallibleField<F>(pub F);

impl<F: Fn(Vec3) -> Result<Vec3> + Sync> VectorField for FallibleField<F> {
    fn value(&self, x: Vec3) -> Result<Vec3> {
        (self.0)(x)
    }
}

/// Three-point Gauss-Legendre rule on [0, 1].
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Three-point triangle rule exact for quadratics. Its points are interior,
/// so a point on face `f` is only ever attributed to a tet adjacent to `f`.
const TRI_RULE: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

/// Quadrature points of a face as `(point, weight · oriented area vector)`.
pub(crate) fn face_quadrature(complex: &SimplicialComplex, f: usize) -> [(Vec3, Vec3); 3] {
    let [a, b, c] = complex.faces()[f].map(|v| complex.vertices()[v]);
    let area = scale3(0.5, cross(sub3(b, a), sub3(c, a)));
    TRI_RULE.map(|(l, w)| {
        let x = add3(add3(scale3(l[0], a), scale3(l[1], b)), scale3(l[2], c));
        (x, scale3(w, area))
    })
}

/// De Rham map of an analytic field: edge circulations (degree 1) or face
/// fluxes (degree 2).
pub fn interpolate_to_cochain(
    complex: &SimplicialComplex,
    field: &dyn VectorField,
    degree: usize,
) -> Result<Cochain> {
    let values: Result<Vec<f64>> = match degree {
        1 => complex
            .edges()
            .par_iter()
            .map(|&[a, b]| {
                let (xa, xb) = (complex.vertices()[a], complex.vertices()[b]);
                let t = sub3(xb, xa);
                GAUSS3.iter().try_fold(0.0, |acc, &(s, w)| {
                    let v = field.value(add3(xa, scale3(s, t)))?;
                    Ok(acc + w * dot3(v, t))
                })
            })
            .collect(),
        2 => (0..complex.n_faces())
            .into_par_iter()
            .map(|f| {
                face_quadrature(complex, f)
                    .iter()
                    .try_fold(0.0, |acc, (x, na)| Ok(acc + dot3(field.value(*x)?, *na)))
            })
            .collect(),
        _ => {
            return Err(Error::InvalidParams(format!(
                "interpolation supports degrees 1 and 2, not {degree}"
            )))
        }
    };
    Ok(Cochain::from_parts(degree, values?))
}

/// Whitney reconstruction of a 1- or 2-cochain inside tet `t` at the given
/// barycentric coordinates (which may lie slightly outside the tet).
pub fn evaluate_in_tet(
    complex: &SimplicialComplex,
    cochain: &Cochain,
    t: usize,
    bary: [f64; 4],
) -> Result<Vec3> {
    let el = Element::new(complex, t);
    let mut out = [0.0; 3];
    match cochain.degree() {
        1 => {
            for e in 0..6 {
                let coef = cochain.values()[el.edges[e].1];
                for (l, term) in bary.iter().zip(el.edge_terms(e)) {
                    out = add3(out, scale3(coef * l, term));
                }
            }
        }
        2 => {
            for f in 0..4 {
                let coef = cochain.values()[el.faces[f].1];
                for (l, term) in bary.iter().zip(el.face_terms(f)) {
                    out = add3(out, scale3(coef * l, term));
                }
            }
        }
        d => {
            return Err(Error::InvalidParams(format!(
                "pointwise evaluation supports degrees 1 and 2, not {d}"
            )))
        }
    }
    Ok(out)
}

/// Proxy vector of a 1- or 2-cochain at a point of the mesh.
pub fn evaluate_cochain(complex: &SimplicialComplex, cochain: &Cochain, point: Vec3) -> Result<Vec3> {
    let t = complex.locate(point).ok_or(Error::OutOfDomain { point })?;
    evaluate_in_tet(complex, cochain, t, complex.barycentric(t, point))
}

/// Curl of the Whitney 1-form of a cochain (constant on each tet).
pub fn curl_in_tet(complex: &SimplicialComplex, a: &Cochain, t: usize) -> Vec3 {
    let el = Element::new(complex, t);
    (0..6).fold([0.0; 3], |acc, e| {
        add3(acc, scale3(a.values()[el.edges[e].1], el.edge_curl(e)))
    })
}

/// Degree-3 tet rule: barycentric points and weights (relative to volume).
pub(crate) const TET_RULE: [([f64; 4], f64); 5] = [
    ([0.25, 0.25, 0.25, 0.25], -0.8),
    ([0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0], 0.45),
    ([1.0 / 6.0, 0.5, 1.0 / 6.0, 1.0 / 6.0], 0.45),
    ([1.0 / 6.0, 1.0 / 6.0, 0.5, 1.0 / 6.0], 0.45),
    ([1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5], 0.45),
];

/// Load vector `∫ X · w_e` of a per-tet field against every edge basis form.
///
/// `field(t, bary)` evaluates the field inside tet `t`; the integral uses a
/// degree-3 rule.
pub fn edge_load<F>(complex: &SimplicialComplex, field: F) -> Result<Vec<f64>>
where
    F: Fn(usize, [f64; 4]) -> Result<Vec3> + Sync,
{
    let contributions: Result<Vec<[(usize, f64); 6]>> = (0..complex.n_tets())
        .into_par_iter()
        .map(|t| {
            let el = Element::new(complex, t);
            let mut local = [0.0; 6];
            for (bary, w) in TET_RULE {
                let x = field(t, bary)?;
                for (e, slot) in local.iter_mut().enumerate() {
                    let terms = el.edge_terms(e);
                    let we = (0..4).fold([0.0; 3], |acc, k| add3(acc, scale3(bary[k], terms[k])));
                    *slot += w * el.vol * dot3(x, we);
                }
            }
            Ok(std::array::from_fn(|e| (el.edges[e].1, local[e])))
        })
        .collect();
    let mut load = vec![0.0; complex.n_edges()];
    for row in contributions? {
        for (e, v) in row {
            load[e] += v;
        }
    }
    Ok(load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, Domain};

    fn reference_tet() -> SimplicialComplex {
        SimplicialComplex::from_tets(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn reference_tet_vertex_mass() {
        let ops = assemble_operators(&reference_tet()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 / 60.0 } else { 1.0 / 120.0 };
                assert!((ops.m0.get(i, j) - want).abs() < 1e-16);
            }
        }
        assert!((ops.m3.get(0, 0) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn basis_forms_have_unit_degrees_of_freedom() {
        // Circulation of w_e along edge e' and flux of w_f through face f' are Kronecker deltas.
        let c = reference_tet();
        for e in 0..6 {
            let mut vals = vec![0.0; 6];
            vals[e] = 1.0;
            let a = Cochain::new(&c, 1, vals.clone()).unwrap();
            let field = |x: Vec3| evaluate_cochain(&c, &a, x).unwrap();
            let back = interpolate_to_cochain(&c, &field, 1).unwrap();
            for (got, want) in back.values().iter().zip(&vals) {
                assert!((got - want).abs() < 1e-13);
            }
        }
        for f in 0..4 {
            let mut vals = vec![0.0; 4];
            vals[f] = 1.0;
            let b = Cochain::new(&c, 2, vals.clone()).unwrap();
            let field = |x: Vec3| evaluate_cochain(&c, &b, x).unwrap();
            let back = interpolate_to_cochain(&c, &field, 2).unwrap();
            for (got, want) in back.values().iter().zip(&vals) {
                assert!((got - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn curl_of_edge_forms_matches_d1() {
        let c = generate_mesh(&Domain::Box { sides: [1.0, 0.8, 1.3] }, 1).unwrap();
        let a = Cochain::new(&c, 1, (0..c.n_edges()).map(|i| (i as f64).sin()).collect()).unwrap();
        let b = Cochain::new(&c, 2, c.d1().to_real().mul_vec(a.values())).unwrap();
        for t in 0..c.n_tets() {
            let direct = curl_in_tet(&c, &a, t);
            let via_faces = evaluate_in_tet(&c, &b, t, [0.1, 0.2, 0.3, 0.4]).unwrap();
            for k in 0..3 {
                assert!((direct[k] - via_faces[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn out_of_domain_point() {
        let c = reference_tet();
        let a = Cochain::zeros(&c, 1);
        assert!(matches!(
            evaluate_cochain(&c, &a, [2.0, 2.0, 2.0]),
            Err(Error::OutOfDomain { .. })
        ));
        assert_eq!(evaluate_cochain(&c, &a, [0.1, 0.1, 0.1]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn failing_evaluator_propagates() {
        let c = reference_tet();
        let field = FallibleField(|_x: Vec3| -> Result<Vec3> { Err(Error::Evaluation("nope".into())) });
        assert!(matches!(interpolate_to_cochain(&c, &field, 1), Err(Error::Evaluation(_))));
        assert!(matches!(
            interpolate_to_cochain(&c, &|x: Vec3| x, 3),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn sliver_is_rejected_at_assembly() {
        let c = SimplicialComplex::from_tets(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.3, 0.3, 3e-13]],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        assert!(matches!(assemble_operators(&c), Err(Error::DegenerateTet { .. })));
    }
}
