//! Energy and helicity of admissible potentials, Arnold bounds, and the two
//! routes to the helicity-constrained energy minimiser.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curlops::{self, check_admissible_potential, eigen_residual, EigenResult};
use crate::error::{Error, Result, Sign};
use crate::linalg::{dot, norm};
use crate::mesh::SimplicialComplex;
use crate::spaces::random_admissible_potential;
use crate::whitney::{Cochain, OperatorBundle};

/// Magnetic energy `aᵀ K a = ‖D1 a‖²_{M2}` of the field `B = curl A`.
pub fn energy(complex: &SimplicialComplex, ops: &OperatorBundle, a: &Cochain) -> Result<f64> {
    check_admissible_potential(complex, a)?;
    Ok(ops.k.quad_form(a.values()).max(0.0))
}

/// Helicity `aᵀ N a = ∫ A · B`.
pub fn helicity(complex: &SimplicialComplex, ops: &OperatorBundle, a: &Cochain) -> Result<f64> {
    check_admissible_potential(complex, a)?;
    Ok(ops.n.quad_form(a.values()))
}

/// Helicity recomputed through the minimal-norm potential of `D1 a`, which
/// differs from `a` by an element of the curl kernel.
pub fn helicity_via_curl_inverse(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    a: &Cochain,
) -> Result<f64> {
    let b = curlops::curl_apply(complex, a)?;
    let a_min = curlops::curl_inverse(complex, ops, &b)?;
    Ok(ops.n.bilinear(a_min.values(), a.values()))
}

fn zero_boundary(complex: &SimplicialComplex, mut v: Vec<f64>) -> Vec<f64> {
    for (e, x) in v.iter_mut().enumerate() {
        if complex.is_boundary_edge(e) {
            *x = 0.0;
        }
    }
    v
}

/// Gradients `(2 K a, 2 N a)` of energy and helicity with respect to the
/// non-boundary coefficients (boundary entries are zero).
pub fn functional_gradients(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    a: &Cochain,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_admissible_potential(complex, a)?;
    let ge = ops.k.mul_vec(a.values()).iter().map(|v| 2.0 * v).collect();
    let gh = ops.n.mul_vec(a.values()).iter().map(|v| 2.0 * v).collect();
    Ok((zero_boundary(complex, ge), zero_boundary(complex, gh)))
}

/// Outcome of the Arnold inequalities `E/λ₋ ≤ H ≤ E/λ₊` and `|H| ≤ E/λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArnoldVerdict {
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub modulus_ok: bool,
    pub energy: f64,
    pub helicity: f64,
    /// Smallest slack of the three inequalities (negative when violated).
    pub slack: f64,
}

impl ArnoldVerdict {
    pub fn all_ok(&self) -> bool {
        self.lower_ok && self.upper_ok && self.modulus_ok
    }
}

/// Checks the Arnold inequalities, allowing a slack of `-1e-10·energy`.
pub fn arnold_check(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    eig: &EigenResult,
    a: &Cochain,
) -> Result<ArnoldVerdict> {
    let lp = eig.lambda_plus.ok_or(Error::MissingEigenpair(Sign::Positive))?;
    let lm = eig.lambda_minus.ok_or(Error::MissingEigenpair(Sign::Negative))?;
    let e = energy(complex, ops, a)?;
    let h = helicity(complex, ops, a)?;
    let lam = lp.min(lm.abs());
    let tol = -1e-10 * e;
    let lower = h - e / lm;
    let upper = e / lp - h;
    let modulus = e / lam - h.abs();
    Ok(ArnoldVerdict {
        lower_ok: lower >= tol,
        upper_ok: upper >= tol,
        modulus_ok: modulus >= tol,
        energy: e,
        helicity: h,
        slack: lower.min(upper).min(modulus),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Spectral,
    Gradient,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::Gradient => "gradient",
        }
    }
}

/// One accepted iterate of the gradient route.
#[derive(Debug, Clone, Copy)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    /// `‖grad_E − λ̂ grad_H‖ / ‖grad_E‖`.
    pub residual: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeReport {
    pub h: f64,
    pub method: Method,
    pub potential: Cochain,
    pub flux: Cochain,
    pub energy: f64,
    /// Rayleigh quotient `aᵀKa / aᵀNa` (zero for the zero field).
    pub lambda_estimate: f64,
    pub beltrami_residual: f64,
    pub achieved_helicity: f64,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
}

fn zero_report(complex: &SimplicialComplex, method: Method) -> MinimizeReport {
    MinimizeReport {
        h: 0.0,
        method,
        potential: Cochain::zeros(complex, 1),
        flux: Cochain::zeros(complex, 2),
        energy: 0.0,
        lambda_estimate: 0.0,
        beltrami_residual: 0.0,
        achieved_helicity: 0.0,
        iterations: 0,
        trace: Vec::new(),
    }
}

fn report_for(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    h: f64,
    method: Method,
    a: Vec<f64>,
    iterations: usize,
    trace: Vec<TraceEntry>,
) -> Result<MinimizeReport> {
    let e = ops.k.quad_form(&a);
    let achieved = ops.n.quad_form(&a);
    let lambda = e / achieved;
    let beltrami_residual = eigen_residual(complex, ops, lambda, &a);
    let flux = Cochain::new(complex, 2, ops.d1(complex).0.mul_vec(&a))?;
    Ok(MinimizeReport {
        h,
        method,
        potential: Cochain::new(complex, 1, a)?,
        flux,
        energy: e,
        lambda_estimate: lambda,
        beltrami_residual,
        achieved_helicity: achieved,
        iterations,
        trace,
    })
}

fn sign_of(h: f64) -> Sign {
    if h > 0.0 {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

/// Minimiser from the extremal eigenfield of matching sign, rescaled to
/// helicity `h`.
pub fn minimize_spectral(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    eig: &EigenResult,
    h: f64,
) -> Result<MinimizeReport> {
    if !h.is_finite() {
        return Err(Error::InvalidParams(format!("helicity target {h} is not finite")));
    }
    if h == 0.0 {
        return Ok(zero_report(complex, Method::Spectral));
    }
    let sign = sign_of(h);
    let idx = eig.extremal(sign).ok_or(Error::MissingEigenpair(sign))?;
    let a = eig.eigen_potentials[idx].values();
    let c = (h / ops.n.quad_form(a)).sqrt();
    let scaled = a.iter().map(|v| c * v).collect();
    report_for(complex, ops, h, Method::Spectral, scaled, 0, Vec::new())
}

/// Options of the gradient route.
#[derive(Debug, Clone)]
pub struct GradientOptions {
    pub max_iterations: usize,
    /// Stop when `‖grad_E − λ̂ grad_H‖ ≤ tolerance · ‖grad_E‖`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-8,
            seed: 0x9e37_79b9,
        }
    }
}

/// Projected, curl-curl preconditioned gradient descent on the helicity
/// level set with multiplicative retraction and Armijo backtracking.
/// Relative size of the predicted decrease below which energy comparisons
/// are dominated by rounding.
const ROUNDOFF_SLOPE: f64 = 1e-13;

/// Gradient of `E − λ̂ H` at `a` (boundary entries zeroed) and its size
/// relative to the energy gradient.
fn constrained_gradient(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    a: &[f64],
) -> (Vec<f64>, f64) {
    let ka = ops.k.mul_vec(a);
    let na = ops.n.mul_vec(a);
    let lambda = dot(a, &ka) / dot(a, &na);
    let g: Vec<f64> = zero_boundary(
        complex,
        ka.iter().zip(&na).map(|(k, n)| 2.0 * (k - lambda * n)).collect(),
    );
    let ge_norm = 2.0 * norm(&zero_boundary(complex, ka));
    let residual = if ge_norm == 0.0 { 0.0 } else { norm(&g) / ge_norm };
    (g, residual)
}

fn gradient_ratio(complex: &SimplicialComplex, ops: &OperatorBundle, a: &[f64]) -> f64 {
    constrained_gradient(complex, ops, a).1
}

pub fn minimize_gradient(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    h: f64,
    opts: &GradientOptions,
) -> Result<MinimizeReport> {
    if !h.is_finite() {
        return Err(Error::InvalidParams(format!("helicity target {h} is not finite")));
    }
    if h == 0.0 {
        return Ok(zero_report(complex, Method::Gradient));
    }
    let gauge = ops.gauge(complex)?;
    if gauge.cotree.is_empty() {
        return Err(Error::MissingEigenpair(sign_of(h)));
    }
    let ne = complex.n_edges();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let retract = |a: &mut Vec<f64>| -> bool {
        let q = ops.n.quad_form(a);
        if q == 0.0 || q.signum() != h.signum() || !q.is_finite() {
            return false;
        }
        let c = (h / q).sqrt();
        a.iter_mut().for_each(|v| *v *= c);
        true
    };
    let mut a = Vec::new();
    for _ in 0..1000 {
        let mut trial = random_admissible_potential(complex, &mut rng).into_values();
        if retract(&mut trial) {
            a = trial;
            break;
        }
    }
    if a.is_empty() {
        return Err(Error::SignLoss { iteration: 0 });
    }

    let mut trace = Vec::new();
    let mut e = ops.k.quad_form(&a);
    for it in 0..=opts.max_iterations {
        let (g, residual) = constrained_gradient(complex, ops, &a);
        if residual <= opts.tolerance {
            return report_for(complex, ops, h, Method::Gradient, a, it, trace);
        }
        if it == opts.max_iterations {
            return Err(Error::MaxIterations {
                iterations: it,
                ratio: residual,
            });
        }
        // d = K⁻¹ g on the cotree; a step of 1 along −d/2 is a shifted
        // inverse iteration.
        let d = gauge.extend(ne, &gauge.chol.solve(&gauge.restrict(&g)));
        let slope = 0.5 * dot(&g, &d);
        let mut step = 1.0;
        let mut accepted = None;
        let mut sign_lost = false;
        while step >= 1e-12 {
            let mut trial: Vec<f64> = a.iter().zip(&d).map(|(x, di)| x - 0.5 * step * di).collect();
            if retract(&mut trial) {
                let e_trial = ops.k.quad_form(&trial);
                // Once the predicted decrease is below roundoff in the energy,
                // the residual is the merit function, among steps that do
                // not raise the energy.
                let sufficient = if slope > ROUNDOFF_SLOPE * e {
                    e_trial <= e - 1e-4 * step * slope
                } else {
                    e_trial <= e && gradient_ratio(complex, ops, &trial) < residual
                };
                if sufficient {
                    accepted = Some((trial, e_trial));
                    break;
                }
            } else {
                sign_lost = true;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, e_trial)) => {
                a = trial;
                e = e_trial;
                trace.push(TraceEntry {
                    iteration: it + 1,
                    energy: e,
                    residual,
                    step,
                });
            }
            None if sign_lost => return Err(Error::SignLoss { iteration: it }),
            None => {
                // No decrease is available at floating precision: the iterate
                // is stationary to roundoff.
                return report_for(complex, ops, h, Method::Gradient, a, it, trace);
            }
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// One named check of a verdict.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

/// Verification of a minimiser against the extremal-eigenfield
/// characterisation.
#[derive(Debug, Clone)]
pub struct MinimizerVerdict {
    pub checks: Vec<Check>,
}

impl MinimizerVerdict {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn verify_minimizer(
    complex: &SimplicialComplex,
    ops: &OperatorBundle,
    eig: &EigenResult,
    report: &MinimizeReport,
) -> Result<MinimizerVerdict> {
    let h = report.h;
    let mut checks = Vec::new();
    let mut push = |name, value: f64, threshold: f64| {
        checks.push(Check {
            name,
            passed: value <= threshold,
            value,
            threshold,
        })
    };
    push(
        "helicity",
        (report.achieved_helicity - h).abs() / h.abs().max(1.0),
        1e-10,
    );
    push("beltrami_residual", report.beltrami_residual, 1e-3);
    if h == 0.0 {
        push("zero_field", norm(report.potential.values()), 0.0);
    } else {
        let sign = sign_of(h);
        let target = match sign {
            Sign::Positive => eig.lambda_plus,
            Sign::Negative => eig.lambda_minus,
        }
        .ok_or(Error::MissingEigenpair(sign))?;
        push(
            "lambda_match",
            (report.lambda_estimate - target).abs() / target.abs(),
            1e-3,
        );
        push(
            "energy_identity",
            (report.energy - report.lambda_estimate * h).abs() / report.energy.abs(),
            1e-6,
        );
    }
    let arnold = arnold_check(complex, ops, eig, &report.potential)?;
    push(
        "arnold",
        if arnold.all_ok() { 0.0 } else { -arnold.slack },
        0.0,
    );
    Ok(MinimizerVerdict { checks })
}
