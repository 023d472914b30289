//! Volume-preserving maps of the canonical domains, transport of fields,
//! and the stationary Euler residual.

use rayon::prelude::*;

use crate::curlops::{self, check_admissible_potential};
use crate::energetics::helicity;
use crate::error::{Error, Result};
use crate::geometry::{add3, cross, dot3, mat_vec, norm3, scale3, sub3, Mat3, Vec3};
use crate::linalg::{dot, max_abs, norm};
use crate::mesh::SimplicialComplex;
use crate::spaces::project_admissible_flux;
use crate::whitney::{curl_in_tet, edge_load, evaluate_in_tet, Cochain, OperatorBundle};

/// The supported maps. Rotations and twists act about an axis through the
/// origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffeoKind {
    Identity,
    RigidRotation { axis: Vec3, angle: f64 },
    /// Rotation about `axis` by `amplitude · |x|`: it fixes every sphere
    /// about the origin.
    RadialTwist { axis: Vec3, amplitude: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct DiffeoSpec {
    kind: DiffeoKind,
}

pub fn make_diffeo(kind: DiffeoKind) -> Result<DiffeoSpec> {
    let check_axis = |axis: Vec3| {
        if axis.iter().any(|v| !v.is_finite()) || (norm3(axis) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("axis {axis:?} is not a unit vector")));
        }
        Ok(())
    };
    match kind {
        DiffeoKind::Identity => {}
        DiffeoKind::RigidRotation { axis, angle } => {
            check_axis(axis)?;
            if !angle.is_finite() {
                return Err(Error::InvalidParams(format!("rotation angle {angle} is not finite")));
            }
        }
        DiffeoKind::RadialTwist { axis, amplitude } => {
            check_axis(axis)?;
            if !amplitude.is_finite() {
                return Err(Error::InvalidParams(format!("twist amplitude {amplitude} is not finite")));
            }
        }
    }
    Ok(DiffeoSpec { kind })
}

/// Rodrigues rotation of `v` about the unit vector `n`.
fn rotate(n: Vec3, theta: f64, v: Vec3) -> Vec3 {
    let (s, c) = theta.sin_cos();
    add3(
        add3(scale3(c, v), scale3(s, cross(n, v))),
        scale3(dot3(n, v) * (1.0 - c), n),
    )
}

fn rotation_matrix(n: Vec3, theta: f64) -> Mat3 {
    let cols = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].map(|e| rotate(n, theta, e));
    std::array::from_fn(|i| std::array::from_fn(|j| cols[j][i]))
}

impl DiffeoSpec {
    pub fn kind(&self) -> DiffeoKind {
        self.kind
    }

    pub fn forward(&self, x: Vec3) -> Vec3 {
        match self.kind {
            DiffeoKind::Identity => x,
            DiffeoKind::RigidRotation { axis, angle } => rotate(axis, angle, x),
            DiffeoKind::RadialTwist { axis, amplitude } => rotate(axis, amplitude * norm3(x), x),
        }
    }

    pub fn inverse(&self, y: Vec3) -> Vec3 {
        match self.kind {
            DiffeoKind::Identity => y,
            DiffeoKind::RigidRotation { axis, angle } => rotate(axis, -angle, y),
            DiffeoKind::RadialTwist { axis, amplitude } => rotate(axis, -amplitude * norm3(y), y),
        }
    }

    /// `Dψ(x)`.
    pub fn jacobian(&self, x: Vec3) -> Mat3 {
        match self.kind {
            DiffeoKind::Identity => rotation_matrix([0.0, 0.0, 1.0], 0.0),
            DiffeoKind::RigidRotation { axis, angle } => rotation_matrix(axis, angle),
            DiffeoKind::RadialTwist { axis, amplitude } => {
                let r = norm3(x);
                let theta = amplitude * r;
                let mut m = rotation_matrix(axis, theta);
                if r > 0.0 {
                    // d/dx [R(θ(x)) x] = R + (n × R x) ⊗ ∇θ with ∇θ = κ x / r.
                    let u = cross(axis, rotate(axis, theta, x));
                    for (i, row) in m.iter_mut().enumerate() {
                        for (j, v) in row.iter_mut().enumerate() {
                            *v += u[i] * amplitude * x[j] / r;
                        }
                    }
                }
                m
            }
        }
    }
}

/// Sub-triangles per face edge used for the transported fluxes.
const FACE_SUBDIVISION: usize = 2;

/// Quadrature `(point, weight · area vector)` on face `f`, refined into
/// `s²` sub-triangles carrying a three-point interior rule each.
fn refined_face_rule(complex: &SimplicialComplex, f: usize, s: usize) -> Vec<(Vec3, Vec3)> {
    const RULE: [[f64; 3]; 3] = [
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ];
    let [a, b, c] = complex.faces()[f].map(|v| complex.vertices()[v]);
    let area = scale3(0.5, cross(sub3(b, a), sub3(c, a)));
    let w = scale3(1.0 / (3 * s * s) as f64, area);
    let at = |i: f64, j: f64| {
        let (u, v) = (i / s as f64, j / s as f64);
        add3(a, add3(scale3(u, sub3(b, a)), scale3(v, sub3(c, a))))
    };
    let mut out = Vec::with_capacity(3 * s * s);
    for i in 0..s {
        for j in 0..s - i {
            let (fi, fj) = (i as f64, j as f64);
            let mut tris = vec![[at(fi, fj), at(fi + 1.0, fj), at(fi, fj + 1.0)]];
            if i + j + 1 < s {
                tris.push([at(fi + 1.0, fj), at(fi + 1.0, fj + 1.0), at(fi, fj + 1.0)]);
            }
            for [p, q, r] in tris {
                for l in RULE {
                    let x = add3(add3(scale3(l[0], p), scale3(l[1], q)), scale3(l[2], r));
                    out.push((x, w));
                }
            }
        }
    }
    out
}

/// How far outside the mesh a preimage may fall: roundoff plus the gap
/// between a polyhedral boundary and the curved surface it approximates.
fn location_tolerance(complex: &SimplicialComplex) -> f64 {
    let scale = complex.scale();
    let h = complex
        .edges()
        .iter()
        .enumerate()
        .filter(|&(e, _)| complex.is_boundary_edge(e))
        .map(|(_, &[a, b])| norm3(sub3(complex.vertices()[a], complex.vertices()[b])))
        .fold(0.0f64, f64::max);
    1e-9 * scale + h * h / scale
}

/// Face fluxes of `ψ_* B` where `B` is the flux field of the admissible
/// potential `a`: `(ψ_* B)(y) = Dψ(x) B(x)` with `x = ψ⁻¹(y)`.
pub fn pushforward_field(
    complex: &SimplicialComplex,
    _ops: &OperatorBundle,
    a: &Cochain,
    psi: &DiffeoSpec,
) -> Result<Cochain> {
    check_admissible_potential(complex, a)?;
    let curls: Vec<Vec3> = (0..complex.n_tets())
        .into_par_iter()
        .map(|t| curl_in_tet(complex, a, t))
        .collect();
    let tol = location_tolerance(complex);
    let flux: Result<Vec<f64>> = (0..complex.n_faces())
        .into_par_iter()
        .map(|f| {
            refined_face_rule(complex, f, FACE_SUBDIVISION)
                .into_iter()
                .try_fold(0.0, |acc, (y, na)| {
                    let x = psi.inverse(y);
                    let loc = complex
                        .locate_near(x, tol)
                        .ok_or(Error::OutOfDomain { point: x })?;
                    let v = mat_vec(&psi.jacobian(x), curls[loc.tet]);
                    Ok(acc + dot3(v, na))
                })
        })
        .collect();
    Cochain::new(complex, 2, flux?)
}

/// Largest boundary-face flux relative to the Euclidean norm of all fluxes.
pub fn tangency_residual(complex: &SimplicialComplex, b: &Cochain) -> Result<f64> {
    b.expect_degree(complex, 2)?;
    let boundary: Vec<f64> = complex
        .boundary_faces()
        .into_iter()
        .map(|f| b.values()[f])
        .collect();
    let total = norm(b.values());
    Ok(if total == 0.0 { 0.0 } else { max_abs(&boundary) / total })
}

/// Relative helicity change `|𝓗(ψ_*B) − 𝓗(B)| / |𝓗(B)|` (absolute when
/// `|𝓗(B)| < 1e-12`).
///
/// The transported fluxes are first projected onto admissible fluxes, which
/// removes the quadrature-level boundary flux and divergence, and then
/// inverted with the minimal-norm curl inverse.
pub fn helicity_drift(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    a: &Cochain,
    psi: &DiffeoSpec,
) -> Result<f64> {
    let h0 = helicity(complex, ops, a)?;
    let pushed = pushforward_field(complex, ops, a, psi)?;
    let admissible = project_admissible_flux(complex, ops, pushed.values())?;
    let a1 = curlops::curl_inverse(complex, ops, &admissible)?;
    let h1 = helicity(complex, ops, &a1)?;
    Ok(if h0.abs() < 1e-12 {
        (h1 - h0).abs()
    } else {
        (h1 - h0).abs() / h0.abs()
    })
}

/// Result of the stationary Euler test `B × curl B = grad f`.
#[derive(Debug, Clone)]
pub struct EulerResidual {
    /// `‖X − grad f‖ / ‖X‖` in the M1 norm, or 0 when `X` vanishes to
    /// roundoff.
    pub nongrad_fraction: f64,
    /// Best-fitting pressure `f` (one vertex per component pinned to 0).
    pub pressure: Cochain,
    /// `‖X‖` in the M1 norm.
    pub force_norm: f64,
}

/// Relative level below which the force `B × curl B` counts as zero.
const FORCE_ZERO: f64 = 1e-12;

/// Euler residual of the flux field of an admissible potential.
pub fn euler_residual(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    a: &Cochain,
) -> Result<EulerResidual> {
    check_admissible_potential(complex, a)?;
    let b = curlops::curl_apply(complex, a)?;
    euler_residual_flux(complex, ops, &b)
}

/// Euler residual of an arbitrary flux field.
///
/// `B` is represented by its Galerkin 1-form (the mass-weighted projection
/// of the flux field onto 1-forms with zero tangential trace) and `curl B`
/// by the weak curl `M1⁻¹ D1ᵀ M2 b` on the same space, so both factors of
/// `X = B × curl B` live in one discrete space. `X` is L²-projected onto
/// 1-cochains and split against gradients of vertex functions, which may
/// take any boundary values.
pub fn euler_residual_flux(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    b: &Cochain,
) -> Result<EulerResidual> {
    b.expect_degree(complex, 2)?;
    let ne = complex.n_edges();
    let interior = ops.interior(complex);
    let chol = ops.m1_interior_cholesky(complex)?;
    let solve_interior = |load: &[f64]| -> Vec<f64> {
        if interior.edges.is_empty() {
            return vec![0.0; ne];
        }
        interior.extend(ne, &chol.solve(&interior.restrict(load)))
    };
    let flux_load = edge_load(complex, |t, bary| evaluate_in_tet(complex, b, t, bary))?;
    let b1 = Cochain::new(complex, 1, solve_interior(&flux_load))?;
    let (_, d1t) = ops.d1(complex);
    let curl = Cochain::new(complex, 1, solve_interior(&d1t.mul_vec(&ops.m2.mul_vec(b.values()))))?;

    let force_load = edge_load(complex, |t, bary| {
        Ok(cross(
            evaluate_in_tet(complex, &b1, t, bary)?,
            evaluate_in_tet(complex, &curl, t, bary)?,
        ))
    })?;
    let x = ops.m1_cholesky()?.solve(&force_load);
    let grad = ops.grad_all(complex)?;
    let (phi, _, rest) = grad.split(&ops.m1, &x);
    let mut pressure = vec![0.0; complex.n_vertices()];
    for (&v, p) in grad.vertices.iter().zip(&phi) {
        pressure[v] = *p;
    }

    let m1_norm = |v: &[f64]| dot(v, &ops.m1.mul_vec(v)).max(0.0).sqrt();
    let force_norm = m1_norm(&x);
    let (nb, nc) = (m1_norm(b1.values()), m1_norm(curl.values()));
    let floor = FORCE_ZERO * nb * (nc + nb / complex.scale()) / complex.total_volume().sqrt();
    let nongrad_fraction = if force_norm <= floor {
        0.0
    } else {
        m1_norm(&rest) / force_norm
    };
    Ok(EulerResidual {
        nongrad_fraction,
        pressure: Cochain::new(complex, 0, pressure)?,
        force_norm,
    })
}

/// A divergence-free analytic field with a closed-form Jacobian
/// (`jacobian[i][j] = ∂_j F_i`).
pub trait AnalyticFlow {
    fn value(&self, x: Vec3) -> Vec3;
    fn jacobian(&self, x: Vec3) -> Mat3;
}

/// The Arnold-Beltrami-Childress flow.
#[derive(Debug, Clone, Copy)]
pub struct AbcFlow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AnalyticFlow for AbcFlow {
    fn value(&self, x: Vec3) -> Vec3 {
        let [u, v, w] = x;
        [
            self.a * w.sin() + self.c * v.cos(),
            self.b * u.sin() + self.a * w.cos(),
            self.c * v.sin() + self.b * u.cos(),
        ]
    }
    fn jacobian(&self, x: Vec3) -> Mat3 {
        let [u, v, w] = x;
        [
            [0.0, -self.c * v.sin(), self.a * w.cos()],
            [self.b * u.cos(), 0.0, -self.a * w.sin()],
            [-self.b * u.sin(), self.c * v.cos(), 0.0],
        ]
    }
}

/// Rigid rotation about z plus the quadratic shear `(yz, zx, xy)`.
#[derive(Debug, Clone, Copy)]
pub struct SwirlFlow;

impl AnalyticFlow for SwirlFlow {
    fn value(&self, x: Vec3) -> Vec3 {
        let [u, v, w] = x;
        [-v + v * w, u + w * u, u * v]
    }
    fn jacobian(&self, x: Vec3) -> Mat3 {
        let [u, v, w] = x;
        [[0.0, w - 1.0, v], [1.0 + w, 0.0, u], [v, u, 0.0]]
    }
}

fn curl_of(j: &Mat3) -> Vec3 {
    [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
}

fn div_of(j: &Mat3) -> f64 {
    j[0][0] + j[1][1] + j[2][2]
}

/// Largest relative mismatch over `points` of
/// `[B, Y] = curl(Y × B) − Y div B + B div Y`, with both sides built from
/// closed-form Jacobians.
pub fn bracket_identity_residual(b: &dyn AnalyticFlow, y: &dyn AnalyticFlow, points: &[Vec3]) -> f64 {
    points
        .iter()
        .map(|&x| {
            let (bv, yv) = (b.value(x), y.value(x));
            let (jb, jy) = (b.jacobian(x), y.jacobian(x));
            let col = |m: &Mat3, k: usize| [m[0][k], m[1][k], m[2][k]];
            // [B, Y] = (B·∇)Y − (Y·∇)B.
            let bracket = sub3(mat_vec(&jy, bv), mat_vec(&jb, yv));
            // Product rule: ∂_k (Y × B) = ∂_k Y × B + Y × ∂_k B.
            let cols: [Vec3; 3] =
                std::array::from_fn(|k| add3(cross(col(&jy, k), bv), cross(yv, col(&jb, k))));
            let jyb: Mat3 = std::array::from_fn(|i| std::array::from_fn(|k| cols[k][i]));
            let rhs = add3(
                sub3(curl_of(&jyb), scale3(div_of(&jb), yv)),
                scale3(div_of(&jy), bv),
            );
            let scale = norm3(bracket).max(norm3(rhs)).max(1e-300);
            norm3(sub3(bracket, rhs)) / scale
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::det3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn twist() -> DiffeoSpec {
        make_diffeo(DiffeoKind::RadialTwist {
            axis: [0.0, 0.0, 1.0],
            amplitude: 0.5,
        })
        .unwrap()
    }

    #[test]
    fn invalid_axes_and_amplitudes() {
        for kind in [
            DiffeoKind::RigidRotation { axis: [1.0, 1.0, 0.0], angle: 0.1 },
            DiffeoKind::RigidRotation { axis: [0.0, 0.0, 1.0], angle: f64::NAN },
            DiffeoKind::RadialTwist { axis: [0.0, 0.0, 1.0], amplitude: f64::INFINITY },
        ] {
            assert!(matches!(make_diffeo(kind), Err(Error::InvalidParams(_))));
        }
    }

    #[test]
    fn twist_preserves_volume_and_spheres() {
        let psi = twist();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: Vec3 = std::array::from_fn(|_| rng.random_range(-0.57..0.57));
            assert!((det3(&psi.jacobian(x)) - 1.0).abs() <= 1e-10);
            let back = psi.forward(psi.inverse(x));
            assert!(norm3(sub3(back, x)) <= 1e-12);
            assert!((norm3(psi.forward(x)) - norm3(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn twist_jacobian_matches_differences() {
        let psi = twist();
        let x = [0.3, -0.2, 0.5];
        let j = psi.jacobian(x);
        let h = 1e-6;
        for k in 0..3 {
            let mut p = x;
            let mut m = x;
            p[k] += h;
            m[k] -= h;
            let d = scale3(0.5 / h, sub3(psi.forward(p), psi.forward(m)));
            for i in 0..3 {
                assert!((d[i] - j[i][k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn refined_rule_integrates_linear_fields() {
        let c = crate::mesh::generate_mesh(&crate::mesh::Domain::Box { sides: [1.0; 3] }, 1).unwrap();
        for f in 0..c.n_faces() {
            let coarse = crate::whitney::face_quadrature(&c, f);
            let fine = refined_face_rule(&c, f, 3);
            let field = |x: Vec3| [1.0 + x[1], 2.0 * x[0] - x[2], 0.5 + x[2]];
            let a: f64 = coarse.iter().map(|(x, w)| dot3(field(*x), *w)).sum();
            let b: f64 = fine.iter().map(|(x, w)| dot3(field(*x), *w)).sum();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mesh_symmetry_rotation_transports_exactly() {
        // The cyclic coordinate permutation maps the lattice ball onto itself,
        // so transport involves no resampling.
        use crate::mesh::{generate_mesh, Domain};
        let c = generate_mesh(&Domain::Ball { radius: 1.0 }, 1).unwrap();
        let ops = crate::whitney::assemble_operators(&c).unwrap();
        let psi = make_diffeo(DiffeoKind::RigidRotation {
            axis: [1.0 / 3f64.sqrt(); 3],
            angle: 2.0 * std::f64::consts::PI / 3.0,
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = crate::spaces::random_admissible_potential(&c, &mut rng);
        let pushed = pushforward_field(&c, &ops, &a, &psi).unwrap();
        assert!(tangency_residual(&c, &pushed).unwrap() < 1e-13);
        let d2 = c.d2().to_real().mul_vec(pushed.values());
        assert!(norm(&d2) < 1e-12 * norm(pushed.values()));
        let drift = helicity_drift(&c, &ops, &a, &psi).unwrap();
        assert!(drift < 1e-11, "{drift}");
    }

    #[test]
    fn identity_transport_reproduces_fluxes() {
        use crate::mesh::{generate_mesh, Domain};
        let c = generate_mesh(&Domain::Ball { radius: 1.0 }, 1).unwrap();
        let ops = crate::whitney::assemble_operators(&c).unwrap();
        let psi = make_diffeo(DiffeoKind::Identity).unwrap();
        let a = crate::spaces::random_admissible_potential(&c, &mut ChaCha8Rng::seed_from_u64(2));
        let b = crate::curlops::curl_apply(&c, &a).unwrap();
        let pushed = pushforward_field(&c, &ops, &a, &psi).unwrap();
        let diff: Vec<f64> = pushed.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
        assert!(norm(&diff) <= 1e-12 * norm(b.values()));
    }

    #[test]
    fn euler_residual_of_a_random_field_is_finite() {
        use crate::mesh::{generate_mesh, Domain};
        let c = generate_mesh(&Domain::Box { sides: [1.0; 3] }, 2).unwrap();
        let ops = crate::whitney::assemble_operators(&c).unwrap();
        let a = crate::spaces::random_admissible_potential(&c, &mut ChaCha8Rng::seed_from_u64(4));
        let r = euler_residual(&c, &ops, &a).unwrap();
        assert!(r.nongrad_fraction.is_finite() && r.nongrad_fraction >= 0.0);
        assert!(r.force_norm > 0.0);
    }

    #[test]
    fn bracket_identity_holds_for_analytic_flows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec3> = (0..50)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let abc = AbcFlow { a: 1.0, b: 0.7, c: 0.4 };
        assert!(bracket_identity_residual(&abc, &SwirlFlow, &pts) <= 1e-8);
        assert!(div_of(&abc.jacobian(pts[0])).abs() < 1e-15);
        assert!(div_of(&SwirlFlow.jacobian(pts[0])).abs() < 1e-15);
    }
}
