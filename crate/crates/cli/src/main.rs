//! `beltrami` command-line front end.

mod suite;
mod vtk;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use beltrami::curlops::{self, EigenOptions};
use beltrami::diffeo::{self, DiffeoKind};
use beltrami::energetics::{self, GradientOptions};
use beltrami::hodge::hodge_decompose;
use beltrami::spaces::{self, HarmonicKind};
use beltrami::{
    assemble_operators, generate_mesh, load_mesh, save_mesh, Cochain, Domain, Error, Sign,
    SimplicialComplex,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "beltrami", version, about = "Helicity-constrained magnetic energy minimisers on tetrahedral meshes")]
struct Cli {
    /// Worker threads for the numeric kernels (falls back to
    /// BELTRAMI_THREADS, then the hardware count).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh of a canonical domain and save it.
    Mesh {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extremal eigenpairs of the constrained curl.
    Eigs {
        #[command(flatten)]
        source: MeshSource,
        /// Eigenvalues requested on each side of zero.
        #[arg(long, default_value_t = 3)]
        count: usize,
        #[command(flatten)]
        eig: EigArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Energy minimiser at prescribed helicity.
    Minimize {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long, allow_negative_numbers = true)]
        helicity: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Spectral)]
        method: MethodArg,
        /// Stationarity tolerance of the gradient route.
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
        #[arg(long, default_value_t = 5000)]
        max_iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        eig: EigArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Hodge decomposition of a random 1-cochain.
    Decompose {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Transport the lowest positive eigenfield by a volume-preserving map.
    Pushforward {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long, value_enum, default_value_t = DiffeoArg::Twist)]
        diffeo: DiffeoArg,
        /// Unit rotation axis.
        #[arg(long, value_parser = parse_vec3, default_value = "0,0,1", allow_negative_numbers = true)]
        axis: [f64; 3],
        /// Rotation angle in radians.
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3, allow_negative_numbers = true)]
        angle: f64,
        /// Twist rate per unit distance from the origin.
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        amplitude: f64,
        #[command(flatten)]
        eig: EigArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Run the invariant suite; exits 1 if any check fails.
    Verify {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Betti numbers and harmonic field dimensions.
    Betti {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainKind {
    Ball,
    Box,
    #[value(alias = "solid_torus")]
    Torus,
    Shell,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Spectral,
    Gradient,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiffeoArg {
    Identity,
    Rotation,
    Twist,
}

/// Parses `x,y,z`.
fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{s}`"));
    }
    let mut v = [0.0; 3];
    for (out, p) in v.iter_mut().zip(parts) {
        *out = p.trim().parse().map_err(|e| format!("`{p}`: {e}"))?;
    }
    Ok(v)
}

/// Shape parameters of the canonical domains.
#[derive(Args, Clone)]
struct Shape {
    /// Ball radius.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Box side lengths.
    #[arg(long, value_parser = parse_vec3, default_value = "1,1,1")]
    sides: [f64; 3],
    /// Torus ring radius.
    #[arg(long, default_value_t = 2.0)]
    major: f64,
    /// Torus tube radius.
    #[arg(long, default_value_t = 0.5)]
    minor: f64,
    /// Shell inner radius.
    #[arg(long, default_value_t = 0.5)]
    inner: f64,
    /// Shell outer radius.
    #[arg(long, default_value_t = 1.0)]
    outer: f64,
}

impl Shape {
    fn domain(&self, kind: DomainKind) -> Domain {
        match kind {
            DomainKind::Ball => Domain::Ball { radius: self.radius },
            DomainKind::Box => Domain::Box {
                sides: self.sides,
            },
            DomainKind::Torus => Domain::SolidTorus {
                major: self.major,
                minor: self.minor,
            },
            DomainKind::Shell => Domain::Shell {
                inner: self.inner,
                outer: self.outer,
            },
        }
    }
}

#[derive(Args, Clone)]
struct DomainArgs {
    #[arg(long, value_enum)]
    domain: DomainKind,
    #[arg(long, default_value_t = 2)]
    res: usize,
    #[command(flatten)]
    shape: Shape,
}

/// A mesh file, or a domain generated in process.
#[derive(Args, Clone)]
struct MeshSource {
    #[arg(long, required_unless_present = "domain", conflicts_with = "domain")]
    mesh: Option<PathBuf>,
    #[arg(long, value_enum)]
    domain: Option<DomainKind>,
    #[arg(long, default_value_t = 2)]
    res: usize,
    #[command(flatten)]
    shape: Shape,
}

#[derive(Args, Clone)]
struct EigArgs {
    /// Residual at which eigenpairs are accepted early.
    #[arg(long, default_value_t = 1e-13)]
    target_residual: f64,
    /// Residual every eigenpair must meet.
    #[arg(long, default_value_t = 1e-8)]
    required_residual: f64,
}

impl EigArgs {
    fn options(&self) -> EigenOptions {
        EigenOptions {
            target_residual: self.target_residual,
            required_residual: self.required_residual,
            ..EigenOptions::default()
        }
    }

    fn settings(&self) -> Value {
        json!({"target_residual": self.target_residual, "required_residual": self.required_residual})
    }
}

#[derive(Args, Clone)]
struct Output {
    /// Report path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Field export in legacy VTK format.
    #[arg(long)]
    vtk: Option<PathBuf>,
}

/// A loaded mesh and its summary for reports.
struct Loaded {
    complex: SimplicialComplex,
    summary: Value,
}

fn domain_name(kind: DomainKind) -> &'static str {
    match kind {
        DomainKind::Ball => "ball",
        DomainKind::Box => "box",
        DomainKind::Torus => "solid_torus",
        DomainKind::Shell => "shell",
    }
}

fn mesh_summary(c: &SimplicialComplex, domain: &str, res: Option<usize>) -> Value {
    json!({"domain": domain, "res": res, "nv": c.n_vertices(), "nt": c.n_tets()})
}

fn load(source: &MeshSource) -> beltrami::Result<Loaded> {
    if let Some(path) = &source.mesh {
        let complex = load_mesh(path)?;
        let summary = mesh_summary(&complex, "file", None);
        return Ok(Loaded { complex, summary });
    }
    let kind = source.domain.expect("clap enforces a mesh source");
    let complex = generate_mesh(&source.shape.domain(kind), source.res)?;
    let summary = mesh_summary(&complex, domain_name(kind), Some(source.res));
    Ok(Loaded { complex, summary })
}

fn sign_name(s: Sign) -> &'static str {
    match s {
        Sign::Positive => "positive",
        Sign::Negative => "negative",
    }
}

/// Outcome of a subcommand: the report and whether it counts as success.
struct Outcome {
    report: Value,
    success: bool,
}

fn ok(report: Value) -> beltrami::Result<Outcome> {
    Ok(Outcome { report, success: true })
}

fn run_mesh(domain: &DomainArgs, out: &Path, start: Instant) -> beltrami::Result<Outcome> {
    let c = generate_mesh(&domain.shape.domain(domain.domain), domain.res)?;
    save_mesh(&c, out)?;
    ok(json!({
        "command": "mesh",
        "mesh": mesh_summary(&c, domain_name(domain.domain), Some(domain.res)),
        "ne": c.n_edges(),
        "nf": c.n_faces(),
        "euler_characteristic": c.euler_characteristic(),
        "volume": c.total_volume(),
        "out": out.display().to_string(),
        "elapsed_seconds": start.elapsed().as_secs_f64(),
        "version": VERSION,
    }))
}

fn run_eigs(source: &MeshSource, count: usize, eig: &EigArgs, output: &Output, start: Instant) -> beltrami::Result<Outcome> {
    let m = load(source)?;
    let c = &m.complex;
    let ops = assemble_operators(c)?;
    let r = curlops::curl_eigs_with(c, &ops, count, count, &eig.options())?;
    if let Some(path) = &output.vtk {
        let mut fields = Vec::new();
        let names = [(Sign::Positive, "B_plus"), (Sign::Negative, "B_minus")];
        for (sign, name) in names {
            if let Some(i) = r.extremal(sign) {
                fields.push((name, &r.eigen_fluxes[i]));
            }
        }
        vtk::write_fields(path, c, "beltrami eigs", &fields)?;
    }
    ok(json!({
        "command": "eigs",
        "mesh": m.summary,
        "count": count,
        "eigenvalues": r.eigenvalues,
        "residuals": r.residuals,
        "lambda_plus": r.lambda_plus,
        "lambda_minus": r.lambda_minus,
        "settings": eig.settings(),
        "elapsed_seconds": start.elapsed().as_secs_f64(),
        "version": VERSION,
    }))
}

#[allow(clippy::too_many_arguments)]
fn run_minimize(
    source: &MeshSource,
    h: f64,
    method: MethodArg,
    tolerance: f64,
    max_iterations: usize,
    seed: u64,
    eig: &EigArgs,
    output: &Output,
    start: Instant,
) -> beltrami::Result<Outcome> {
    let m = load(source)?;
    let c = &m.complex;
    let ops = assemble_operators(c)?;
    let (report, lp, lm) = match method {
        MethodArg::Spectral => {
            let e = curlops::curl_eigs_with(c, &ops, 1, 1, &eig.options())?;
            let r = energetics::minimize_spectral(c, &ops, &e, h)?;
            (r, e.lambda_plus, e.lambda_minus)
        }
        MethodArg::Gradient => {
            let opts = GradientOptions {
                max_iterations,
                tolerance,
                seed,
            };
            let r = energetics::minimize_gradient(c, &ops, h, &opts)?;
            // The gradient route does not need the spectrum; its bounds are
            // reported when available.
            let (lp, lm) = curlops::curl_eigs_with(c, &ops, 1, 1, &eig.options())
                .map(|e| (e.lambda_plus, e.lambda_minus))
                .unwrap_or((None, None));
            (r, lp, lm)
        }
    };
    if let Some(path) = &output.vtk {
        vtk::write_fields(path, c, "beltrami minimize", &[("B", &report.flux), ("A", &report.potential)])?;
    }
    ok(json!({
        "command": "minimize",
        "mesh": m.summary,
        "helicity_target": h,
        "method": report.method.name(),
        "lambda_plus": lp,
        "lambda_minus": lm,
        "energy": report.energy,
        "achieved_helicity": report.achieved_helicity,
        "beltrami_residual": report.beltrami_residual,
        "iterations": report.iterations,
        "elapsed_seconds": start.elapsed().as_secs_f64(),
        "version": VERSION,
    }))
}

fn run_decompose(source: &MeshSource, seed: u64, output: &Output, start: Instant) -> beltrami::Result<Outcome> {
    let m = load(source)?;
    let c = &m.complex;
    let ops = assemble_operators(c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = Cochain::new(c, 1, (0..c.n_edges()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let s = hodge_decompose(c, &ops, &omega)?;
    let sq = |x: &Cochain| ops.m1.quad_form(x.values()).max(0.0);
    let total = sq(&omega);
    let parts = sq(&s.exact) + sq(&s.coexact) + sq(&s.harmonic_remainder);
    if let Some(path) = &output.vtk {
        vtk::write_fields(
            path,
            c,
            "beltrami decompose",
            &[
                ("omega", &omega),
                ("exact", &s.exact),
                ("coexact", &s.coexact),
                ("harmonic", &s.harmonic_remainder),
            ],
        )?;
    }
    ok(json!({
        "command": "decompose",
        "mesh": m.summary,
        "seed": seed,
        "norms": {
            "input": total.sqrt(),
            "exact": sq(&s.exact).sqrt(),
            "coexact": sq(&s.coexact).sqrt(),
            "harmonic": sq(&s.harmonic_remainder).sqrt(),
        },
        "reconstruction_residual": s.reconstruction_residual,
        "orthogonality_residual": s.orthogonality_residual,
        "pythagoras_residual": if total == 0.0 { 0.0 } else { (total - parts).abs() / total },
        "elapsed_seconds": start.elapsed().as_secs_f64(),
        "version": VERSION,
    }))
}

#[allow(clippy::too_many_arguments)]
fn run_pushforward(
    source: &MeshSource,
    kind: DiffeoArg,
    axis: [f64; 3],
    angle: f64,
    amplitude: f64,
    eig: &EigArgs,
    output: &Output,
    start: Instant,
) -> beltrami::Result<Outcome> {
    let m = load(source)?;
    let c = &m.complex;
    let ops = assemble_operators(c)?;
    let (spec, kind_json) = match kind {
        DiffeoArg::Identity => (DiffeoKind::Identity, json!({"kind": "identity"})),
        DiffeoArg::Rotation => (
            DiffeoKind::RigidRotation { axis, angle },
            json!({"kind": "rigid_rotation", "axis": axis, "angle": angle}),
        ),
        DiffeoArg::Twist => (
            DiffeoKind::RadialTwist { axis, amplitude },
            json!({"kind": "radial_twist", "axis": axis, "amplitude": amplitude}),
        ),
    };
    let psi = diffeo::make_diffeo(spec)?;
    let r = curlops::curl_eigs_with(c, &ops, 1, 1, &eig.options())?;
    let i = r.extremal(Sign::Positive).ok_or(Error::MissingEigenpair(Sign::Positive))?;
    let a = &r.eigen_potentials[i];
    let before = curlops::curl_apply(c, a)?;
    let pushed = diffeo::pushforward_field(c, &ops, a, &psi)?;
    let divergence = c.d2().to_real().mul_vec(pushed.values());
    let norm = beltrami::linalg::norm;
    let drift = diffeo::helicity_drift(c, &ops, a, &psi)?;
    if let Some(path) = &output.vtk {
        vtk::write_fields(path, c, "beltrami pushforward", &[("B", &before), ("pushed", &pushed)])?;
    }
    ok(json!({
        "command": "pushforward",
        "mesh": m.summary,
        "diffeo": kind_json,
        "lambda_plus": r.lambda_plus,
        "tangency_residual": diffeo::tangency_residual(c, &pushed)?,
        "divergence_residual": norm(&divergence) / norm(pushed.values()).max(f64::MIN_POSITIVE),
        "energy_before": ops.m2.quad_form(before.values()),
        "energy_after": ops.m2.quad_form(pushed.values()),
        "helicity_before": energetics::helicity(c, &ops, a)?,
        "helicity_drift": drift,
        "settings": eig.settings(),
        "elapsed_seconds": start.elapsed().as_secs_f64(),
        "version": VERSION,
    }))
}

fn run_verify(source: &MeshSource, seed: u64, start: Instant) -> beltrami::Result<Outcome> {
    let m = load(source)?;
    let ops = assemble_operators(&m.complex)?;
    let checks = suite::run(&m.complex, &ops, seed);
    let passed = checks.iter().all(|c| c.passed);
    Ok(Outcome {
        report: json!({
            "command": "verify",
            "mesh": m.summary,
            "seed": seed,
            "checks": checks,
            "passed": passed,
            "elapsed_seconds": start.elapsed().as_secs_f64(),
            "version": VERSION,
        }),
        success: passed,
    })
}

fn run_betti(source: &MeshSource, start: Instant) -> beltrami::Result<Outcome> {
    let m = load(source)?;
    let c = &m.complex;
    let ops = assemble_operators(c)?;
    let (b0, b1, b2) = spaces::betti_numbers(c);
    let neumann = spaces::harmonic_basis(c, &ops, HarmonicKind::Neumann)?.len();
    let dirichlet = spaces::harmonic_basis(c, &ops, HarmonicKind::Dirichlet)?.len();
    ok(json!({
        "command": "betti",
        "mesh": m.summary,
        "betti": [b0, b1, b2],
        "euler_characteristic": c.euler_characteristic(),
        "harmonic_neumann": neumann,
        "harmonic_dirichlet": dirichlet,
        "elapsed_seconds": start.elapsed().as_secs_f64(),
        "version": VERSION,
    }))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Mesh { .. } => "mesh",
        Command::Eigs { .. } => "eigs",
        Command::Minimize { .. } => "minimize",
        Command::Decompose { .. } => "decompose",
        Command::Pushforward { .. } => "pushforward",
        Command::Verify { .. } => "verify",
        Command::Betti { .. } => "betti",
    }
}

fn report_path(c: &Command) -> Option<&Path> {
    match c {
        Command::Mesh { .. } => None,
        Command::Eigs { output, .. }
        | Command::Minimize { output, .. }
        | Command::Decompose { output, .. }
        | Command::Pushforward { output, .. } => output.out.as_deref(),
        Command::Verify { out, .. } | Command::Betti { out, .. } => out.as_deref(),
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), String> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("BELTRAMI_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("BELTRAMI_THREADS must be a positive integer, not `{v}`"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err("thread count must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn emit(report: &Value, path: Option<&Path>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("reports serialise") + "\n";
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    if let Err(msg) = configure_threads(cli.threads) {
        eprintln!("error: {msg}\n\nUsage: beltrami [--threads N] <COMMAND>");
        return ExitCode::from(2);
    }
    let start = Instant::now();
    let result = match &cli.command {
        Command::Mesh { domain, out } => run_mesh(domain, out, start),
        Command::Eigs { source, count, eig, output } => run_eigs(source, *count, eig, output, start),
        Command::Minimize {
            source,
            helicity,
            method,
            tolerance,
            max_iterations,
            seed,
            eig,
            output,
        } => run_minimize(source, *helicity, *method, *tolerance, *max_iterations, *seed, eig, output, start),
        Command::Decompose { source, seed, output } => run_decompose(source, *seed, output, start),
        Command::Pushforward {
            source,
            diffeo,
            axis,
            angle,
            amplitude,
            eig,
            output,
        } => run_pushforward(source, *diffeo, *axis, *angle, *amplitude, eig, output, start),
        Command::Verify { source, seed, .. } => run_verify(source, *seed, start),
        Command::Betti { source, .. } => run_betti(source, start),
    };
    let (report, success) = match result {
        Ok(o) => (o.report, o.success),
        Err(e) => {
            eprintln!("error: {e}");
            let mut report = json!({
                "command": command_name(&cli.command),
                "error": e.name(),
                "message": e.to_string(),
                "version": VERSION,
            });
            if let Error::InsufficientSpectrum { sign, .. } | Error::MissingEigenpair(sign) = &e {
                report["sign"] = json!(sign_name(*sign));
            }
            (report, false)
        }
    };
    let path = report_path(&cli.command);
    // The mesh command writes the mesh to --out, so its report goes to stdout.
    if let Err(e) = emit(&report, path) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(1);
    }
    if success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
