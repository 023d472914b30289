//! Point location through a uniform bucket grid.

use super::SimplicialComplex;
use crate::geometry::{barycentric_gradients, norm3, tet_points, Vec3};

/// Result of locating a point.
#[derive(Debug, Clone, Copy)]
pub struct Location {
    pub tet: usize,
    pub barycentric: [f64; 4],
    /// Distance outside the tet (0 when the point lies inside).
    pub distance: f64,
}

#[derive(Debug)]
pub(super) struct Locator {
    lo: Vec3,
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    pub(super) fn new(c: &SimplicialComplex) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in c.vertices() {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let mean_vol = c.total_volume() / c.n_tets() as f64;
        let cell = (2.0 * mean_vol.cbrt()).max(1e-300);
        let dims: [usize; 3] =
            std::array::from_fn(|k| (((hi[k] - lo[k]) / cell).ceil() as usize).clamp(1, 512));
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for (t, tet) in c.tets().iter().enumerate() {
            let p = tet_points(c.vertices(), *tet);
            let mut tlo = [f64::INFINITY; 3];
            let mut thi = [f64::NEG_INFINITY; 3];
            for q in &p {
                for k in 0..3 {
                    tlo[k] = tlo[k].min(q[k]);
                    thi[k] = thi[k].max(q[k]);
                }
            }
            let a = Self::index_of(lo, cell, dims, tlo);
            let b = Self::index_of(lo, cell, dims, thi);
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for k in a[2]..=b[2] {
                        buckets[(i * dims[1] + j) * dims[2] + k].push(t);
                    }
                }
            }
        }
        Self {
            lo,
            cell,
            dims,
            buckets,
        }
    }

    fn index_of(lo: Vec3, cell: f64, dims: [usize; 3], p: Vec3) -> [usize; 3] {
        std::array::from_fn(|k| {
            let x = ((p[k] - lo[k]) / cell).floor();
            if x.is_nan() || x < 0.0 {
                0
            } else {
                (x as usize).min(dims[k] - 1)
            }
        })
    }

    fn bucket(&self, idx: [usize; 3]) -> &[usize] {
        &self.buckets[(idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]]
    }

    pub(super) fn locate(&self, c: &SimplicialComplex, p: Vec3, tol: f64) -> Option<usize> {
        let idx = Self::index_of(self.lo, self.cell, self.dims, p);
        self.bucket(idx)
            .iter()
            .copied()
            .find(|&t| c.barycentric(t, p).iter().all(|&l| l >= -tol))
    }

    pub(super) fn locate_near(
        &self,
        c: &SimplicialComplex,
        p: Vec3,
        tolerance: f64,
    ) -> Option<Location> {
        if let Some(tet) = self.locate(c, p, 1e-12) {
            return Some(Location {
                tet,
                barycentric: c.barycentric(tet, p),
                distance: 0.0,
            });
        }
        let reach = (tolerance / self.cell).ceil() as isize + 1;
        let centre = Self::index_of(self.lo, self.cell, self.dims, p);
        let mut best: Option<Location> = None;
        for di in -reach..=reach {
            for dj in -reach..=reach {
                for dk in -reach..=reach {
                    let idx = [
                        centre[0] as isize + di,
                        centre[1] as isize + dj,
                        centre[2] as isize + dk,
                    ];
                    if idx.iter().zip(self.dims).any(|(&i, d)| i < 0 || i >= d as isize) {
                        continue;
                    }
                    for &t in self.bucket(idx.map(|i| i as usize)) {
                        let bary = c.barycentric(t, p);
                        let g = barycentric_gradients(&tet_points(c.vertices(), c.tets()[t]));
                        let distance = (0..4)
                            .filter(|&i| bary[i] < 0.0)
                            .map(|i| -bary[i] / norm3(g[i]))
                            .fold(0.0, f64::max);
                        if best.is_none_or(|b| distance < b.distance) {
                            best = Some(Location {
                                tet: t,
                                barycentric: bary,
                                distance,
                            });
                        }
                    }
                }
            }
        }
        best.filter(|b| b.distance <= tolerance)
    }
}
