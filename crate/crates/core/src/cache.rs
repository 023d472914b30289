//! Lazily built factorisations shared by the solvers of one operator bundle.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::SparseCholesky;
use crate::mesh::{SimplicialComplex, UnionFind};
use crate::sparse::CsrMatrix;
use crate::whitney::OperatorBundle;

/// Initialises `cell` with a fallible constructor. A concurrent loser simply
/// drops its value.
pub(crate) fn get_or_try<T>(cell: &OnceLock<T>, f: impl FnOnce() -> Result<T>) -> Result<&T> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = f()?;
    Ok(cell.get_or_init(|| v))
}

/// Index maps between all simplices and the non-boundary ones.
pub(crate) struct Interior {
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
    pub faces: Vec<usize>,
}

impl Interior {
    fn new(c: &SimplicialComplex) -> Self {
        Self {
            edges: c.interior_edges(),
            vertices: c.interior_vertices(),
            faces: c.interior_faces(),
        }
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|&e| full[e]).collect()
    }

    pub fn extend(&self, n_edges: usize, part: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; n_edges];
        for (&e, v) in self.edges.iter().zip(part) {
            full[e] = *v;
        }
        full
    }
}

/// M1-orthogonal projection onto gradients of vertex functions supported on
/// a chosen vertex set.
pub(crate) struct GradientProjector {
    /// Columns of D0 for the chosen vertices (rows span all edges).
    pub d0: CsrMatrix,
    pub vertices: Vec<usize>,
    chol: Option<SparseCholesky>,
}

impl GradientProjector {
    fn new(c: &SimplicialComplex, m1: &CsrMatrix, vertices: Vec<usize>) -> Result<Self> {
        let all: Vec<usize> = (0..c.n_edges()).collect();
        let d0 = c.d0().to_real().select(&all, &vertices);
        let chol = if vertices.is_empty() {
            None
        } else {
            let lap = d0.transpose().matmul(m1).matmul(&d0);
            Some(SparseCholesky::new(&lap)?)
        };
        Ok(Self { d0, vertices, chol })
    }

    /// Potential `φ` minimising `‖a - D0 φ‖_{M1}`.
    pub fn potential(&self, m1: &CsrMatrix, a: &[f64]) -> Vec<f64> {
        match &self.chol {
            Some(chol) => chol.solve(&self.d0.mul_transpose_vec(&m1.mul_vec(a))),
            None => Vec::new(),
        }
    }

    /// Splits `a` into its gradient part and the M1-orthogonal remainder.
    pub fn split(&self, m1: &CsrMatrix, a: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let phi = self.potential(m1, a);
        let grad = if phi.is_empty() {
            vec![0.0; a.len()]
        } else {
            self.d0.mul_vec(&phi)
        };
        let rest = a.iter().zip(&grad).map(|(x, g)| x - g).collect();
        (phi, grad, rest)
    }
}

/// Tree-cotree gauge on the non-boundary edges.
///
/// The tree spans the graph whose nodes are the interior vertices plus one
/// node per boundary component; its edges carry exactly the kernel of the
/// constrained curl (interior gradients and Dirichlet fields). On the
/// complementary cotree edges the curl-curl matrix is positive definite.
pub(crate) struct Gauge {
    pub cotree: Vec<usize>,
    pub k_cc: CsrMatrix,
    pub n_cc: CsrMatrix,
    pub chol: SparseCholesky,
}

impl Gauge {
    fn new(c: &SimplicialComplex, ops: &OperatorBundle, interior: &Interior) -> Result<Self> {
        let (n_components, labels) = c.boundary_components();
        let mut node = vec![usize::MAX; c.n_vertices()];
        let mut next = n_components;
        for v in 0..c.n_vertices() {
            node[v] = match labels[v] {
                Some(l) => l,
                None => {
                    next += 1;
                    next - 1
                }
            };
        }
        let mut uf = UnionFind::new(next);
        let mut cotree = Vec::new();
        for &e in &interior.edges {
            let [a, b] = c.edges()[e];
            if !uf.union(node[a], node[b]) {
                cotree.push(e);
            }
        }
        let k_cc = ops.k.select(&cotree, &cotree);
        let n_cc = ops.n.select(&cotree, &cotree);
        let chol = if cotree.is_empty() {
            SparseCholesky::new(&CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]))?
        } else {
            SparseCholesky::new(&k_cc).map_err(|e| {
                Error::SolverFailure(format!("cotree curl-curl matrix is not definite: {e}"))
            })?
        };
        Ok(Self {
            cotree,
            k_cc,
            n_cc,
            chol,
        })
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.cotree.iter().map(|&e| full[e]).collect()
    }

    pub fn extend(&self, n_edges: usize, part: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; n_edges];
        for (&e, v) in self.cotree.iter().zip(part) {
            full[e] = *v;
        }
        full
    }
}

/// Euclidean projection of face values onto divergence-free fluxes that
/// vanish on the boundary.
pub(crate) struct FluxProjector {
    /// D2 restricted to interior-face columns, with one tet per connected
    /// component removed from the rows.
    pub d2: CsrMatrix,
    pub faces: Vec<usize>,
    chol: Option<SparseCholesky>,
}

impl FluxProjector {
    fn new(c: &SimplicialComplex, interior: &Interior) -> Result<Self> {
        // Tets adjacent through interior faces form the components.
        let mut uf = UnionFind::new(c.n_tets());
        for &f in &interior.faces {
            if let [t0, t1] = c.face_tets(f) {
                uf.union(*t0, *t1);
            }
        }
        let rows: Vec<usize> = (0..c.n_tets()).filter(|&t| uf.find(t) != t).collect();
        let d2 = c.d2().to_real().select(&rows, &interior.faces);
        let chol = if rows.is_empty() {
            None
        } else {
            Some(SparseCholesky::new(&d2.matmul(&d2.transpose()))?)
        };
        Ok(Self {
            d2,
            faces: interior.faces.clone(),
            chol,
        })
    }

    pub fn project(&self, n_faces: usize, flux: &[f64]) -> Vec<f64> {
        let mut part: Vec<f64> = self.faces.iter().map(|&f| flux[f]).collect();
        if let Some(chol) = &self.chol {
            let y = chol.solve(&self.d2.mul_vec(&part));
            let corr = self.d2.mul_transpose_vec(&y);
            for (p, c) in part.iter_mut().zip(corr) {
                *p -= c;
            }
        }
        let mut full = vec![0.0; n_faces];
        for (&f, v) in self.faces.iter().zip(part) {
            full[f] = v;
        }
        full
    }
}

#[derive(Default)]
pub(crate) struct Cache {
    d1: OnceLock<(CsrMatrix, CsrMatrix)>,
    interior: OnceLock<Interior>,
    grad_interior: OnceLock<GradientProjector>,
    grad_all: OnceLock<GradientProjector>,
    m1: OnceLock<SparseCholesky>,
    m1_interior: OnceLock<SparseCholesky>,
    gauge: OnceLock<Gauge>,
    flux: OnceLock<FluxProjector>,
    pub(crate) dirichlet: OnceLock<Vec<Vec<f64>>>,
    pub(crate) neumann: OnceLock<Vec<Vec<f64>>>,
}

impl fmt::Debug for Cache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cache")
            .field("gauge", &self.gauge.get().is_some())
            .finish_non_exhaustive()
    }
}

impl OperatorBundle {
    /// Real copies of D1 and its transpose.
    pub(crate) fn d1(&self, c: &SimplicialComplex) -> (&CsrMatrix, &CsrMatrix) {
        let (d, dt) = self.cache.d1.get_or_init(|| {
            let d = c.d1().to_real();
            let dt = d.transpose();
            (d, dt)
        });
        (d, dt)
    }

    pub(crate) fn interior(&self, c: &SimplicialComplex) -> &Interior {
        self.cache.interior.get_or_init(|| Interior::new(c))
    }

    /// Gradients of functions vanishing on the boundary.
    pub(crate) fn grad_interior(&self, c: &SimplicialComplex) -> Result<&GradientProjector> {
        get_or_try(&self.cache.grad_interior, || {
            GradientProjector::new(c, &self.m1, self.interior(c).vertices.clone())
        })
    }

    /// Gradients of arbitrary vertex functions (one vertex pinned per
    /// connected component).
    pub(crate) fn grad_all(&self, c: &SimplicialComplex) -> Result<&GradientProjector> {
        get_or_try(&self.cache.grad_all, || {
            let mut uf = UnionFind::new(c.n_vertices());
            for &[a, b] in c.edges() {
                uf.union(a, b);
            }
            let free = (0..c.n_vertices()).filter(|&v| uf.find(v) != v).collect();
            GradientProjector::new(c, &self.m1, free)
        })
    }

    pub(crate) fn m1_cholesky(&self) -> Result<&SparseCholesky> {
        get_or_try(&self.cache.m1, || SparseCholesky::new(&self.m1))
    }

    pub(crate) fn m1_interior_cholesky(&self, c: &SimplicialComplex) -> Result<&SparseCholesky> {
        get_or_try(&self.cache.m1_interior, || {
            let e = &self.interior(c).edges;
            if e.is_empty() {
                return SparseCholesky::new(&CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]));
            }
            SparseCholesky::new(&self.m1.select(e, e))
        })
    }

    pub(crate) fn gauge(&self, c: &SimplicialComplex) -> Result<&Gauge> {
        get_or_try(&self.cache.gauge, || Gauge::new(c, self, self.interior(c)))
    }

    pub(crate) fn flux_projector(&self, c: &SimplicialComplex) -> Result<&FluxProjector> {
        get_or_try(&self.cache.flux, || FluxProjector::new(c, self.interior(c)))
    }
}
