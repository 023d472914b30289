use std::f64::consts::PI;

use super::SimplicialComplex;
use crate::error::{Error, Result};
use crate::geometry::{norm3, scale3, Vec3};

/// The canonical domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Ball { radius: f64 },
    Box { sides: [f64; 3] },
    SolidTorus { major: f64, minor: f64 },
    Shell { inner: f64, outer: f64 },
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Ball { .. } => "ball",
            Domain::Box { .. } => "box",
            Domain::SolidTorus { .. } => "solid_torus",
            Domain::Shell { .. } => "shell",
        }
    }

    /// Exact volume of the smooth domain.
    pub fn volume(&self) -> f64 {
        match *self {
            Domain::Ball { radius } => 4.0 / 3.0 * PI * radius.powi(3),
            Domain::Box { sides } => sides.iter().product(),
            Domain::SolidTorus { major, minor } => 2.0 * PI * PI * major * minor * minor,
            Domain::Shell { inner, outer } => 4.0 / 3.0 * PI * (outer.powi(3) - inner.powi(3)),
        }
    }

    /// Euler characteristic of the smooth domain.
    pub fn euler_characteristic(&self) -> i64 {
        match self {
            Domain::Ball { .. } | Domain::Box { .. } => 1,
            Domain::SolidTorus { .. } => 0,
            Domain::Shell { .. } => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidGeometry(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            Domain::Ball { radius } => positive("radius", radius),
            Domain::Box { sides } => sides.iter().try_for_each(|&s| positive("side", s)),
            Domain::SolidTorus { major, minor } => {
                positive("major radius", major)?;
                positive("minor radius", minor)?;
                if minor >= major {
                    return Err(Error::InvalidGeometry(format!(
                        "tube radius {minor} must be below ring radius {major}"
                    )));
                }
                Ok(())
            }
            Domain::Shell { inner, outer } => {
                positive("inner radius", inner)?;
                positive("outer radius", outer)?;
                if inner >= outer {
                    return Err(Error::InvalidGeometry(format!(
                        "inner radius {inner} must be below outer radius {outer}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Vertex paths of the six tets in the Kuhn split of a unit cell.
const KUHN: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

struct Lattice {
    cells: [usize; 3],
    periodic_z: bool,
}

impl Lattice {
    fn vertex_dims(&self) -> [usize; 3] {
        let nz = if self.periodic_z { self.cells[2] } else { self.cells[2] + 1 };
        [self.cells[0] + 1, self.cells[1] + 1, nz]
    }

    fn vertex_index(&self, i: usize, j: usize, k: usize) -> usize {
        let d = self.vertex_dims();
        let k = if self.periodic_z { k % d[2] } else { k };
        (i * d[1] + j) * d[2] + k
    }

    /// Splits every kept cell into six tets and maps lattice vertices through
    /// `place`. Unused lattice vertices are dropped; ids stay in lattice order.
    fn build(
        &self,
        keep: impl Fn([usize; 3]) -> bool,
        place: impl Fn([usize; 3]) -> Vec3,
    ) -> Result<SimplicialComplex> {
        let d = self.vertex_dims();
        let mut tets = Vec::new();
        for i in 0..self.cells[0] {
            for j in 0..self.cells[1] {
                for k in 0..self.cells[2] {
                    if !keep([i, j, k]) {
                        continue;
                    }
                    for path in KUHN {
                        let mut c = [i, j, k];
                        let mut tet = [self.vertex_index(i, j, k), 0, 0, 0];
                        for (step, axis) in path.iter().enumerate() {
                            c[*axis] += 1;
                            tet[step + 1] = self.vertex_index(c[0], c[1], c[2]);
                        }
                        tets.push(tet);
                    }
                }
            }
        }
        let n_lattice = d[0] * d[1] * d[2];
        let mut used = vec![false; n_lattice];
        for t in &tets {
            for &v in t {
                used[v] = true;
            }
        }
        let mut new_id = vec![usize::MAX; n_lattice];
        let mut vertices = Vec::new();
        for i in 0..d[0] {
            for j in 0..d[1] {
                for k in 0..d[2] {
                    let idx = (i * d[1] + j) * d[2] + k;
                    if used[idx] {
                        new_id[idx] = vertices.len();
                        vertices.push(place([i, j, k]));
                    }
                }
            }
        }
        for t in &mut tets {
            for v in t.iter_mut() {
                *v = new_id[*v];
            }
        }
        SimplicialComplex::from_tets(vertices, tets)
    }
}

/// Maps the cube [-1, 1]^3 onto the unit ball, keeping the coordinate
/// permutation and reflection symmetries of the cube.
fn cube_to_ball(u: Vec3) -> Vec3 {
    let [x, y, z] = u;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    [
        x * (1.0 - y2 / 2.0 - z2 / 2.0 + y2 * z2 / 3.0).sqrt(),
        y * (1.0 - z2 / 2.0 - x2 / 2.0 + z2 * x2 / 3.0).sqrt(),
        z * (1.0 - x2 / 2.0 - y2 / 2.0 + x2 * y2 / 3.0).sqrt(),
    ]
}

fn square_to_disk(u: f64, v: f64) -> (f64, f64) {
    (u * (1.0 - v * v / 2.0).sqrt(), v * (1.0 - u * u / 2.0).sqrt())
}

fn centred(i: usize, n: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / n as f64
}

/// Deterministic template mesh of one of the canonical domains.
///
/// `resolution` controls the lattice density: the box gets `resolution`
/// cells per side, the ball and shell `4 * resolution` cells across the
/// bounding cube, the torus `2 * resolution` cells across its cross-section.
pub fn generate_mesh(domain: &Domain, resolution: usize) -> Result<SimplicialComplex> {
    if resolution == 0 {
        return Err(Error::InvalidGeometry("resolution must be at least 1".into()));
    }
    domain.validate()?;
    match *domain {
        Domain::Box { sides } => {
            let n = resolution;
            Lattice {
                cells: [n; 3],
                periodic_z: false,
            }
            .build(
                |_| true,
                |c| std::array::from_fn(|k| sides[k] * c[k] as f64 / n as f64),
            )
        }
        Domain::Ball { radius } => {
            let n = 4 * resolution;
            Lattice {
                cells: [n; 3],
                periodic_z: false,
            }
            .build(
                |_| true,
                |c| scale3(radius, cube_to_ball(c.map(|i| centred(i, n)))),
            )
        }
        Domain::Shell { inner, outer } => {
            let n = 4 * resolution;
            let hollow = |i: usize| i >= n / 4 && i < 3 * n / 4;
            Lattice {
                cells: [n; 3],
                periodic_z: false,
            }
            .build(
                |c| !c.iter().all(|&i| hollow(i)),
                |c| {
                    let u = c.map(|i| centred(i, n));
                    let s = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    let r = inner + (s - 0.5) * 2.0 * (outer - inner);
                    scale3(r / norm3(u), u)
                },
            )
        }
        Domain::SolidTorus { major, minor } => {
            let nc = 2 * resolution;
            let nphi = ((PI * major * nc as f64 / minor).ceil() as usize).max(6);
            Lattice {
                cells: [nc, nc, nphi],
                periodic_z: true,
            }
            .build(
                |_| true,
                |c| {
                    let (du, dv) = square_to_disk(centred(c[0], nc), centred(c[1], nc));
                    let phi = 2.0 * PI * c[2] as f64 / nphi as f64;
                    let rho = major + minor * du;
                    [rho * phi.cos(), rho * phi.sin(), minor * dv]
                },
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_template() {
        let c = generate_mesh(&Domain::Box { sides: [1.0; 3] }, 1).unwrap();
        assert_eq!((c.n_vertices(), c.n_tets()), (8, 6));
        assert_eq!(c.n_edges(), 19);
        assert_eq!(c.euler_characteristic(), 1);
        assert_eq!(c.interior_edges().len(), 1);
        assert!((c.total_volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_parameters() {
        let bad = [
            (Domain::Ball { radius: -1.0 }, 2),
            (Domain::Ball { radius: 1.0 }, 0),
            (Domain::SolidTorus { major: 1.0, minor: 1.0 }, 1),
            (Domain::Shell { inner: 2.0, outer: 1.0 }, 1),
            (Domain::Box { sides: [1.0, f64::NAN, 1.0] }, 1),
        ];
        for (d, res) in bad {
            assert!(matches!(generate_mesh(&d, res), Err(Error::InvalidGeometry(_))), "{d:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let d = Domain::SolidTorus { major: 2.0, minor: 0.5 };
        let a = generate_mesh(&d, 1).unwrap();
        let b = generate_mesh(&d, 1).unwrap();
        assert_eq!(a.tets(), b.tets());
        let bits = |c: &SimplicialComplex| -> Vec<u64> {
            c.vertices().iter().flatten().map(|x| x.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }
}
