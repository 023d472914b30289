//! Oriented tetrahedral complexes with incidence structure and boundary flags.

mod generate;
mod io;
mod locate;

use std::collections::HashMap;
use std::sync::OnceLock;

pub use generate::{generate_mesh, Domain};
pub use io::{load_mesh, save_mesh, write_mesh};
pub use locate::Location;

use crate::error::{Error, Result};
use crate::geometry::{signed_volume, Vec3};
use crate::sparse::Incidence;

/// Local vertex pairs of the six tet edges.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// An oriented simplicial 3-complex.
///
/// Edges are stored with ascending vertex ids and faces with sorted vertex
/// ids; those orderings fix the global orientation of every simplex.
/// Tetrahedra are stored positively oriented.
#[derive(Debug)]
pub struct SimplicialComplex {
    vertices: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
    faces: Vec<[usize; 3]>,
    tet_edges: Vec<[usize; 6]>,
    tet_faces: Vec<[usize; 4]>,
    face_tets: Vec<Vec<usize>>,
    d0: Incidence,
    d1: Incidence,
    d2: Incidence,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
    boundary_face: Vec<bool>,
    volumes: Vec<f64>,
    locator: OnceLock<locate::Locator>,
}

/// Parity (+1 / -1) of the permutation sorting `v`.
fn sort_sign<const N: usize>(v: [usize; N]) -> i32 {
    let mut sign = 1;
    for i in 0..N {
        for j in i + 1..N {
            if v[i] > v[j] {
                sign = -sign;
            }
        }
    }
    sign
}

fn sorted<const N: usize>(mut v: [usize; N]) -> [usize; N] {
    v.sort_unstable();
    v
}

impl SimplicialComplex {
    /// Builds the complex from vertices and tetrahedra.
    ///
    /// Negatively oriented tets are repaired by swapping their last two
    /// vertices. A tet whose volume is below `1e-14 * scale^3` is rejected.
    pub fn from_tets(vertices: Vec<Vec3>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        if vertices.is_empty() || tets.is_empty() {
            return Err(Error::InvalidGeometry("mesh has no vertices or no tets".into()));
        }
        for (t, tet) in tets.iter().enumerate() {
            if tet.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidGeometry(format!(
                    "tet {t} references a vertex out of range"
                )));
            }
            if sorted(*tet).windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::DegenerateTet {
                    tet: t,
                    msg: "repeated vertex".into(),
                });
            }
        }
        let scale = bounding_scale(&vertices);
        let vol_floor = 1e-14 * scale.powi(3);
        let mut volumes = Vec::with_capacity(tets.len());
        for (t, tet) in tets.iter_mut().enumerate() {
            let mut vol = signed_volume(&vertices, *tet);
            if vol.abs() <= vol_floor {
                return Err(Error::DegenerateTet {
                    tet: t,
                    msg: format!("volume {vol:.3e} below {vol_floor:.3e}"),
                });
            }
            if vol < 0.0 {
                tet.swap(2, 3);
                vol = -vol;
            }
            volumes.push(vol);
        }

        // Sub-simplices in lexicographic order of their sorted vertex ids.
        let mut edges: Vec<[usize; 2]> = tets
            .iter()
            .flat_map(|t| TET_EDGES.map(|[a, b]| sorted([t[a], t[b]])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let mut faces: Vec<[usize; 3]> = tets
            .iter()
            .flat_map(|t| (0..4).map(move |i| opposite_face(t, i)).map(sorted))
            .collect();
        faces.sort_unstable();
        faces.dedup();
        let edge_id: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let face_id: HashMap<[usize; 3], usize> =
            faces.iter().enumerate().map(|(i, f)| (*f, i)).collect();

        let mut tet_edges = Vec::with_capacity(tets.len());
        let mut tet_faces = Vec::with_capacity(tets.len());
        let mut face_tets = vec![Vec::new(); faces.len()];
        let mut d2 = Vec::with_capacity(4 * tets.len());
        for (t, tet) in tets.iter().enumerate() {
            tet_edges.push(TET_EDGES.map(|[a, b]| edge_id[&sorted([tet[a], tet[b]])]));
            let mut tf = [0usize; 4];
            for (i, slot) in tf.iter_mut().enumerate() {
                let f = opposite_face(tet, i);
                let id = face_id[&sorted(f)];
                *slot = id;
                face_tets[id].push(t);
                let sign = if i % 2 == 0 { 1 } else { -1 } * sort_sign(f);
                d2.push((t, id, sign));
            }
            tet_faces.push(tf);
        }
        let mut d0 = Vec::with_capacity(2 * edges.len());
        for (e, &[a, b]) in edges.iter().enumerate() {
            d0.push((e, a, -1));
            d0.push((e, b, 1));
        }
        let mut d1 = Vec::with_capacity(3 * faces.len());
        for (f, &[a, b, c]) in faces.iter().enumerate() {
            d1.push((f, edge_id[&[b, c]], 1));
            d1.push((f, edge_id[&[a, c]], -1));
            d1.push((f, edge_id[&[a, b]], 1));
        }

        let mut boundary_face = vec![false; faces.len()];
        for (f, owners) in face_tets.iter().enumerate() {
            match owners.len() {
                1 => boundary_face[f] = true,
                2 => {}
                n => {
                    return Err(Error::InvalidGeometry(format!(
                        "face {f} is shared by {n} tets (non-manifold)"
                    )))
                }
            }
        }
        let mut boundary_edge = vec![false; edges.len()];
        let mut boundary_vertex = vec![false; vertices.len()];
        for (f, face) in faces.iter().enumerate() {
            if boundary_face[f] {
                let [a, b, c] = *face;
                for e in [[a, b], [a, c], [b, c]] {
                    boundary_edge[edge_id[&e]] = true;
                }
                for v in face {
                    boundary_vertex[*v] = true;
                }
            }
        }

        let complex = Self {
            d0: Incidence::from_triplets(edges.len(), vertices.len(), &d0),
            d1: Incidence::from_triplets(faces.len(), edges.len(), &d1),
            d2: Incidence::from_triplets(tets.len(), faces.len(), &d2),
            vertices,
            tets,
            edges,
            faces,
            tet_edges,
            tet_faces,
            face_tets,
            boundary_vertex,
            boundary_edge,
            boundary_face,
            volumes,
            locator: OnceLock::new(),
        };
        complex.check_interior_orientation()?;
        Ok(complex)
    }

    /// Interior faces must receive opposite induced orientations from their two tets.
    fn check_interior_orientation(&self) -> Result<()> {
        for (f, owners) in self.face_tets.iter().enumerate() {
            if let [t0, t1] = owners[..] {
                let s0 = self.d2.get(t0, f);
                let s1 = self.d2.get(t1, f);
                if s0 + s1 != 0 {
                    return Err(Error::InvalidGeometry(format!(
                        "interior face {f} has inconsistent orientation (tets {t0}, {t1})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }
    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }
    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }
    /// Global edge ids of a tet, in the order of [`TET_EDGES`].
    pub fn tet_edges(&self, t: usize) -> &[usize; 6] {
        &self.tet_edges[t]
    }
    /// Global face ids of a tet; entry `i` is the face opposite local vertex `i`.
    pub fn tet_faces(&self, t: usize) -> &[usize; 4] {
        &self.tet_faces[t]
    }
    /// Tets containing a face (one for boundary faces, two otherwise).
    pub fn face_tets(&self, f: usize) -> &[usize] {
        &self.face_tets[f]
    }
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }
    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }
    /// Number of k-simplices.
    pub fn n_simplices(&self, k: usize) -> usize {
        match k {
            0 => self.n_vertices(),
            1 => self.n_edges(),
            2 => self.n_faces(),
            3 => self.n_tets(),
            _ => panic!("no {k}-simplices in a 3-complex"),
        }
    }
    /// Edges x vertices coboundary.
    pub fn d0(&self) -> &Incidence {
        &self.d0
    }
    /// Faces x edges coboundary.
    pub fn d1(&self) -> &Incidence {
        &self.d1
    }
    /// Tets x faces coboundary.
    pub fn d2(&self) -> &Incidence {
        &self.d2
    }
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }
    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }
    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.boundary_face[f]
    }
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }
    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_faces() as i64
            - self.n_tets() as i64
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| !self.boundary_vertex[v]).collect()
    }
    pub fn interior_edges(&self) -> Vec<usize> {
        (0..self.n_edges()).filter(|&e| !self.boundary_edge[e]).collect()
    }
    pub fn interior_faces(&self) -> Vec<usize> {
        (0..self.n_faces()).filter(|&f| !self.boundary_face[f]).collect()
    }
    pub fn boundary_faces(&self) -> Vec<usize> {
        (0..self.n_faces()).filter(|&f| self.boundary_face[f]).collect()
    }

    /// Length scale of the mesh (largest bounding-box extent).
    pub fn scale(&self) -> f64 {
        bounding_scale(&self.vertices)
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| crate::geometry::dist(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Connected components of the boundary surface, as vertex labels
    /// (`None` for interior vertices). Labels are dense and ordered by the
    /// smallest vertex id of each component.
    pub fn boundary_components(&self) -> (usize, Vec<Option<usize>>) {
        let mut uf = UnionFind::new(self.n_vertices());
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if self.boundary_edge[e] {
                uf.union(a, b);
            }
        }
        let mut labels = vec![None; self.n_vertices()];
        let mut root_label = HashMap::new();
        for v in 0..self.n_vertices() {
            if self.boundary_vertex[v] {
                let r = uf.find(v);
                let next = root_label.len();
                labels[v] = Some(*root_label.entry(r).or_insert(next));
            }
        }
        (root_label.len(), labels)
    }

    /// Number of connected components of the vertex graph.
    pub fn connected_components(&self) -> usize {
        let mut uf = UnionFind::new(self.n_vertices());
        for &[a, b] in &self.edges {
            uf.union(a, b);
        }
        (0..self.n_vertices()).filter(|&v| uf.find(v) == v).count()
    }

    /// Barycentric coordinates of `p` in tet `t`.
    pub fn barycentric(&self, t: usize, p: Vec3) -> [f64; 4] {
        crate::geometry::barycentric(&self.vertices, self.tets[t], p)
    }

    /// Tet containing `p` (barycentric coordinates ≥ -1e-12).
    pub fn locate(&self, p: Vec3) -> Option<usize> {
        self.locator().locate(self, p, 1e-12)
    }

    /// Tet containing `p`, or the nearest tet if `p` lies outside the mesh
    /// by at most `tolerance` (absolute length).
    pub fn locate_near(&self, p: Vec3, tolerance: f64) -> Option<Location> {
        self.locator().locate_near(self, p, tolerance)
    }

    fn locator(&self) -> &locate::Locator {
        self.locator.get_or_init(|| locate::Locator::new(self))
    }
}

fn opposite_face(t: &[usize; 4], i: usize) -> [usize; 3] {
    match i {
        0 => [t[1], t[2], t[3]],
        1 => [t[0], t[2], t[3]],
        2 => [t[0], t[1], t[3]],
        _ => [t[0], t[1], t[2]],
    }
}

fn bounding_scale(vertices: &[Vec3]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in vertices {
        for k in 0..3 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max)
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }
    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Smaller root wins so that results do not depend on call order.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}
