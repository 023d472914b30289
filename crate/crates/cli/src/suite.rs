//! The invariant suite behind `verify`.

use std::collections::HashMap;

use beltrami::curlops::{self, EigenResult};
use beltrami::diffeo::{self, AbcFlow, DiffeoKind, SwirlFlow};
use beltrami::energetics::{self, GradientOptions};
use beltrami::geometry::{add3, cross, det3, dist, norm3, scale3, Vec3};
use beltrami::hodge::hodge_decompose;
use beltrami::linalg::{dot, norm};
use beltrami::spaces::{self, HarmonicKind};
use beltrami::whitney::evaluate_in_tet;
use beltrami::{interpolate_to_cochain, Cochain, OperatorBundle, Result, Sign, SimplicialComplex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    /// Passes when `value ≤ threshold` (NaN fails).
    fn at_most(&mut self, name: &str, value: f64, threshold: f64) {
        self.0.push(Check {
            name: name.to_string(),
            passed: value <= threshold,
            value,
            threshold,
        });
    }

    fn holds(&mut self, name: &str, ok: bool) {
        self.at_most(name, if ok { 0.0 } else { 1.0 }, 0.0);
    }

    /// Records a failed check for a step that raised an error.
    fn errored(&mut self, name: &str, err: &beltrami::Error) {
        eprintln!("{name}: {err}");
        self.at_most(name, f64::NAN, 0.0);
    }
}

fn rel(x: f64, y: f64) -> f64 {
    let s = x.abs().max(y.abs());
    if s == 0.0 {
        0.0
    } else {
        (x - y).abs() / s
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn interior_gradient(c: &SimplicialComplex, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let g: Vec<f64> = (0..c.n_vertices())
        .map(|v| if c.is_boundary_vertex(v) { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect();
    c.d0().to_real().mul_vec(&g)
}

/// A ball centred at the origin: every boundary vertex at one radius.
fn ball_radius(c: &SimplicialComplex) -> Option<f64> {
    let radii: Vec<f64> = (0..c.n_vertices())
        .filter(|&v| c.is_boundary_vertex(v))
        .map(|v| norm3(c.vertices()[v]))
        .collect();
    let r = *radii.first()?;
    radii.iter().all(|x| (x - r).abs() <= 1e-9 * r).then_some(r)
}

pub fn run(c: &SimplicialComplex, ops: &OperatorBundle, seed: u64) -> Vec<Check> {
    let mut ck = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mesh_checks(c, &mut ck);
    whitney_checks(c, ops, &mut ck, &mut rng);
    if let Err(e) = space_checks(c, ops, &mut ck, &mut rng) {
        ck.errored("spaces", &e);
    }
    if let Err(e) = hodge_checks(c, ops, &mut ck, &mut rng) {
        ck.errored("hodge", &e);
    }
    match curlops::curl_eigs(c, ops, 3, 3) {
        Ok(eig) => {
            if let Err(e) = curl_checks(c, ops, &eig, &mut ck, &mut rng) {
                ck.errored("curlops", &e);
            }
            if let Err(e) = energy_checks(c, ops, &eig, &mut ck, &mut rng) {
                ck.errored("energetics", &e);
            }
            if let Err(e) = diffeo_checks(c, ops, &eig, &mut ck, &mut rng) {
                ck.errored("diffeo", &e);
            }
        }
        Err(e) => ck.errored("curlops.spectrum", &e),
    }
    ck.0
}

fn mesh_checks(c: &SimplicialComplex, ck: &mut Checks) {
    ck.holds("mesh.d1_d0_zero", c.d1().matmul(c.d0()).is_zero());
    ck.holds("mesh.d2_d1_zero", c.d2().matmul(c.d1()).is_zero());
    ck.holds("mesh.positive_volumes", c.volumes().iter().all(|&v| v > 0.0));
    let boundary = c.boundary_faces();
    ck.holds("mesh.boundary_nonempty", !boundary.is_empty());
    let mut count: HashMap<[usize; 2], usize> = HashMap::new();
    for f in boundary {
        let [a, b, d] = c.faces()[f];
        for e in [[a, b], [a, d], [b, d]] {
            *count.entry(e).or_default() += 1;
        }
    }
    ck.holds("mesh.closed_boundary", count.values().all(|&n| n == 2));
}

fn whitney_checks(c: &SimplicialComplex, ops: &OperatorBundle, ck: &mut Checks, rng: &mut ChaCha8Rng) {
    let (d0, d1, d2) = (c.d0().to_real(), c.d1().to_real(), c.d2().to_real());
    let g = random_vec(rng, c.n_vertices());
    let a = random_vec(rng, c.n_edges());
    let s1 = norm(&d1.mul_vec(&d0.mul_vec(&g))) / norm(&g);
    let s2 = norm(&d2.mul_vec(&d1.mul_vec(&a))) / norm(&a);
    ck.at_most("whitney.stokes", s1.max(s2), 1e-14);

    let k = d1.transpose().matmul(&ops.m2).matmul(&d1);
    let diff = k.add_scaled(&ops.k, -1.0).max_abs() / ops.k.max_abs().max(f64::MIN_POSITIVE);
    ck.at_most("whitney.k_from_parts", diff, 1e-14);

    let mut worst = 0.0f64;
    for _ in 0..5 {
        let x = spaces::random_admissible_potential(c, rng).into_values();
        let y = spaces::random_admissible_potential(c, rng).into_values();
        let (p, q) = (ops.n.bilinear(&x, &y), ops.n.bilinear(&y, &x));
        let scale = ops.n.max_abs() * norm(&x) * norm(&y);
        worst = worst.max((p - q).abs() / scale.max(f64::MIN_POSITIVE));
    }
    ck.at_most("whitney.n_symmetry", worst, 1e-13);

    // Whitney 1-forms reproduce u + w × x and 2-forms u + s x exactly.
    let (u, w, s) = ([0.3, -1.2, 0.7], [0.5, 0.1, -0.4], 0.8);
    let one = move |x: Vec3| add3(u, cross(w, x));
    let two = move |x: Vec3| add3(u, scale3(s, x));
    let mut worst = 0.0f64;
    for (degree, f) in [(1usize, &one as &(dyn Fn(Vec3) -> Vec3 + Sync)), (2, &two)] {
        match interpolate_to_cochain(c, &f, degree) {
            Ok(cochain) => {
                for t in 0..c.n_tets() {
                    let centre = [0.25; 4];
                    let p = c.tets()[t].map(|v| c.vertices()[v]);
                    let x = p.iter().fold([0.0; 3], |acc, v| add3(acc, scale3(0.25, *v)));
                    if let Ok(v) = evaluate_in_tet(c, &cochain, t, centre) {
                        worst = worst.max(dist(v, f(x)) / norm3(f(x)).max(1.0));
                    }
                }
            }
            Err(e) => ck.errored("whitney.interpolation", &e),
        }
    }
    ck.at_most("whitney.interpolation_consistency", worst, 1e-10);
}

fn space_checks(
    c: &SimplicialComplex,
    ops: &OperatorBundle,
    ck: &mut Checks,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let (_, b1, b2) = spaces::betti_numbers(c);
    let neumann = spaces::harmonic_basis(c, ops, HarmonicKind::Neumann)?;
    let dirichlet = spaces::harmonic_basis(c, ops, HarmonicKind::Dirichlet)?;
    ck.at_most("spaces.neumann_dimension", neumann.len().abs_diff(b1) as f64, 0.0);
    ck.at_most("spaces.dirichlet_dimension", dirichlet.len().abs_diff(b2) as f64, 0.0);
    let mut worst = 0.0f64;
    for basis in [&neumann, &dirichlet] {
        for (i, x) in basis.iter().enumerate() {
            for (j, y) in basis.iter().enumerate() {
                let g = ops.m1.bilinear(x.values(), y.values());
                worst = worst.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    ck.at_most("spaces.orthonormal_bases", worst, 1e-10);

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let b = spaces::random_admissible_flux(c, ops, rng)?;
        let (_, _, r) = curlops::least_squares_potential(c, ops, b.values())?;
        worst = worst.max(r);
    }
    if b1 == 0 {
        ck.at_most("spaces.representability", worst, curlops::RANGE_TOL);
    } else {
        let mut all_fail = true;
        for h in &neumann {
            let flux = spaces::harmonic_flux(c, ops, h)?;
            all_fail &= !spaces::check_flux_representability(c, ops, &flux)?.representable;
        }
        ck.holds("spaces.harmonic_flux_not_representable", all_fail);
    }
    Ok(())
}

fn hodge_checks(
    c: &SimplicialComplex,
    ops: &OperatorBundle,
    ck: &mut Checks,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let (mut recon, mut orth, mut pyth) = (0.0f64, 0.0f64, 0.0f64);
    let mut first_exact = None;
    for _ in 0..10 {
        let w = Cochain::new(c, 1, random_vec(rng, c.n_edges()))?;
        let s = hodge_decompose(c, ops, &w)?;
        recon = recon.max(s.reconstruction_residual);
        orth = orth.max(s.orthogonality_residual);
        let q = |x: &Cochain| ops.m1.quad_form(x.values());
        pyth = pyth.max(rel(q(&w), q(&s.exact) + q(&s.coexact) + q(&s.harmonic_remainder)));
        first_exact.get_or_insert(s.exact);
    }
    ck.at_most("hodge.reconstruction", recon, 1e-8);
    ck.at_most("hodge.orthogonality", orth, 1e-8);
    ck.at_most("hodge.pythagoras", pyth, 1e-8);
    if let Some(exact) = first_exact {
        let again = hodge_decompose(c, ops, &exact)?;
        let d: Vec<f64> = again.exact.values().iter().zip(exact.values()).map(|(x, y)| x - y).collect();
        let n = ops.m1.quad_form(exact.values()).sqrt();
        let v = if n == 0.0 { 0.0 } else { ops.m1.quad_form(&d).max(0.0).sqrt() / n };
        ck.at_most("hodge.idempotence", v, 1e-10);
    }
    let b = spaces::random_admissible_flux(c, ops, rng)?;
    let (a, _, _) = curlops::least_squares_potential(c, ops, b.values())?;
    let s = hodge_decompose(c, ops, &Cochain::new(c, 1, a.clone())?)?;
    let n = ops.m1.quad_form(&a).sqrt();
    let v = if n == 0.0 { 0.0 } else { ops.m1.quad_form(s.exact.values()).max(0.0).sqrt() / n };
    ck.at_most("hodge.potential_has_no_exact_part", v, 1e-8);
    Ok(())
}

fn curl_checks(
    c: &SimplicialComplex,
    ops: &OperatorBundle,
    eig: &EigenResult,
    ck: &mut Checks,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut worst = 0.0f64;
    for (l, a) in eig.eigenvalues.iter().zip(&eig.eigen_potentials) {
        let e = ops.k.quad_form(a.values());
        worst = worst.max((e - l * ops.n.quad_form(a.values())).abs() / e.abs());
    }
    ck.at_most("curlops.eigen_identity", worst, 1e-10);
    let g = interior_gradient(c, rng);
    let v = norm(&ops.n.mul_vec(&g)) / (ops.n.max_abs() * norm(&g)).max(f64::MIN_POSITIVE);
    ck.at_most("curlops.shared_kernel", v, 1e-12);
    let lp = eig.lambda_plus.unwrap_or(f64::NAN);
    ck.holds(
        "curlops.lambda_plus_minimal",
        eig.eigenvalues.iter().filter(|&&l| l > 0.0).all(|&l| l >= lp),
    );

    let mut worst = 0.0f64;
    let mut minimal = 0.0f64;
    let dirichlet = spaces::harmonic_basis(c, ops, HarmonicKind::Dirichlet)?;
    for i in 0..20 {
        let a = spaces::random_admissible_potential(c, rng);
        let b = curlops::curl_apply(c, &a)?;
        let a_min = curlops::curl_inverse(c, ops, &b)?;
        let back = curlops::curl_apply(c, &a_min)?;
        let d: Vec<f64> = back.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
        worst = worst.max(ops.m2.quad_form(&d).max(0.0).sqrt() / ops.m2.quad_form(b.values()).sqrt());
        // Alternatives differ by interior gradients and Dirichlet fields.
        let mut alt = a_min.values().to_vec();
        for (x, y) in alt.iter_mut().zip(interior_gradient(c, rng)) {
            *x += 0.1 * (i + 1) as f64 * y;
        }
        for h in &dirichlet {
            for (x, y) in alt.iter_mut().zip(h.values()) {
                *x += 0.3 * y;
            }
        }
        let (n0, n1) = (ops.m1.quad_form(a_min.values()).sqrt(), ops.m1.quad_form(&alt).sqrt());
        minimal = minimal.max((n0 - n1) / n0);
    }
    ck.at_most("curlops.curl_of_inverse", worst, 1e-8);
    ck.at_most("curlops.inverse_is_minimal", minimal, 1e-12);
    Ok(())
}

fn energy_checks(
    c: &SimplicialComplex,
    ops: &OperatorBundle,
    eig: &EigenResult,
    ck: &mut Checks,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut scaling = 0.0f64;
    let mut gauge = 0.0f64;
    let mut arnold = true;
    for _ in 0..20 {
        let a = spaces::random_admissible_potential(c, rng);
        let s: f64 = rng.random_range(-3.0..3.0);
        let sa = Cochain::new(c, 1, a.values().iter().map(|v| s * v).collect())?;
        let (e, h) = (energetics::energy(c, ops, &a)?, energetics::helicity(c, ops, &a)?);
        scaling = scaling
            .max(rel(energetics::energy(c, ops, &sa)?, s * s * e))
            .max(rel(energetics::helicity(c, ops, &sa)?, s * s * h));
        let shifted: Vec<f64> = a.values().iter().zip(interior_gradient(c, rng)).map(|(x, g)| x + g).collect();
        let h1 = energetics::helicity(c, ops, &Cochain::new(c, 1, shifted)?)?;
        gauge = gauge.max((h1 - h).abs() / h.abs().max(f64::MIN_POSITIVE));
        arnold &= energetics::arnold_check(c, ops, eig, &a)?.all_ok();
    }
    ck.at_most("energetics.quadratic_scaling", scaling, 1e-12);
    ck.at_most("energetics.gauge_invariance", gauge, 1e-12);
    ck.holds("energetics.arnold_random", arnold);

    let a = spaces::random_admissible_potential(c, rng);
    let (ge, gh) = energetics::functional_gradients(c, ops, &a)?;
    let mut fd = 0.0f64;
    for _ in 0..5 {
        let d = spaces::random_admissible_potential(c, rng);
        let eps = 1e-4;
        let shift = |s: f64| Cochain::new(c, 1, a.values().iter().zip(d.values()).map(|(x, y)| x + s * y).collect());
        let (p, m) = (shift(eps)?, shift(-eps)?);
        let de = (energetics::energy(c, ops, &p)? - energetics::energy(c, ops, &m)?) / (2.0 * eps);
        let dh = (energetics::helicity(c, ops, &p)? - energetics::helicity(c, ops, &m)?) / (2.0 * eps);
        fd = fd.max(rel(de, dot(&ge, d.values()))).max(rel(dh, dot(&gh, d.values())));
    }
    ck.at_most("energetics.gradients", fd, 1e-6);

    let (lp, lm) = match (eig.lambda_plus, eig.lambda_minus) {
        (Some(p), Some(m)) => (p, m),
        _ => return Ok(()),
    };
    let ip = eig.extremal(Sign::Positive).expect("lambda_plus has an eigenpair");
    let ap = &eig.eigen_potentials[ip];
    let v = energetics::arnold_check(c, ops, eig, ap)?;
    ck.at_most("energetics.arnold_upper_attained", rel(v.energy, lp * v.helicity), 1e-10);
    let plus = energetics::minimize_spectral(c, ops, eig, 1.0)?;
    let minus = energetics::minimize_spectral(c, ops, eig, -1.0)?;
    ck.at_most(
        "energetics.sign_branches",
        rel(plus.energy, lp).max(rel(minus.energy, lm.abs())),
        1e-10,
    );
    let seven = energetics::minimize_spectral(c, ops, eig, 7.0)?;
    ck.at_most("energetics.lambda_sign_only", rel(plus.lambda_estimate, seven.lambda_estimate), 1e-8);
    let grad = energetics::minimize_gradient(c, ops, 1.0, &GradientOptions::default())?;
    ck.at_most("energetics.route_equivalence", rel(grad.energy, plus.energy), 1e-4);
    ck.holds(
        "energetics.monotone_descent",
        grad.trace.windows(2).all(|w| w[1].energy <= w[0].energy),
    );
    ck.holds(
        "energetics.minimizer_verified",
        energetics::verify_minimizer(c, ops, eig, &grad)?.passed(),
    );
    Ok(())
}

fn diffeo_checks(
    c: &SimplicialComplex,
    ops: &OperatorBundle,
    eig: &EigenResult,
    ck: &mut Checks,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let axis = [0.0, 0.0, 1.0];
    let maps = [
        diffeo::make_diffeo(DiffeoKind::RigidRotation { axis, angle: std::f64::consts::FRAC_PI_3 })?,
        diffeo::make_diffeo(DiffeoKind::RadialTwist { axis, amplitude: 0.5 })?,
    ];
    let half = 0.5 * c.scale();
    let (mut det, mut inv) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let x: Vec3 = std::array::from_fn(|_| rng.random_range(-half..half));
        for psi in &maps {
            det = det.max((det3(&psi.jacobian(x)) - 1.0).abs());
            inv = inv.max(dist(psi.forward(psi.inverse(x)), x));
        }
    }
    ck.at_most("diffeo.volume_preserving", det, 1e-10);
    ck.at_most("diffeo.inverse", inv / half.max(1.0), 1e-12);
    let pts: Vec<Vec3> = (0..50)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    let abc = AbcFlow { a: 1.0, b: 0.8, c: 0.5 };
    ck.at_most(
        "diffeo.bracket_identity",
        diffeo::bracket_identity_residual(&abc, &SwirlFlow, &pts),
        1e-8,
    );
    let constant = interpolate_to_cochain(c, &|_x: Vec3| [0.0, 0.0, 1.0], 2)?;
    ck.at_most(
        "diffeo.euler_constant_field",
        diffeo::euler_residual_flux(c, ops, &constant)?.nongrad_fraction,
        1e-10,
    );
    let Some(ip) = eig.extremal(Sign::Positive) else {
        return Ok(());
    };
    let a = &eig.eigen_potentials[ip];
    ck.at_most(
        "diffeo.euler_eigenfield",
        diffeo::euler_residual(c, ops, a)?.nongrad_fraction,
        1e-2,
    );

    // Transport checks need a domain the maps preserve.
    let Some(r) = ball_radius(c) else {
        return Ok(());
    };
    let mut on_sphere = 0.0f64;
    for v in (0..c.n_vertices()).filter(|&v| c.is_boundary_vertex(v)) {
        for psi in &maps {
            on_sphere = on_sphere.max((norm3(psi.forward(c.vertices()[v])) - r).abs());
        }
    }
    ck.at_most("diffeo.boundary_preserved", on_sphere / r, 1e-12);
    for (name, psi) in [("rotation", &maps[0]), ("twist", &maps[1])] {
        let pushed = diffeo::pushforward_field(c, ops, a, psi)?;
        ck.at_most(
            &format!("diffeo.{name}_tangency"),
            diffeo::tangency_residual(c, &pushed)?,
            1e-4,
        );
        let limit = if name == "rotation" { 1e-3 } else { 5e-2 };
        ck.at_most(
            &format!("diffeo.{name}_helicity_drift"),
            diffeo::helicity_drift(c, ops, a, psi)?,
            limit,
        );
    }
    Ok(())
}
