//! Command-line surface: every computation as a reproducible, scriptable
//! run emitting CSV or JSON with an embedded run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use encounter::conformal::{map_to_half_plane, map_to_triangle, HalfPlanePoint};
use encounter::elliptic;
use encounter::encounter::{
    self as enc, EncounterError, IntervalSpec, MeetingSet, PairState,
};
use encounter::mc::{self, EstimateOptions, SimConfig};
use encounter::pde;
use encounter::Complex64;

const EXIT_DOMAIN: i32 = 2;
const EXIT_IO: i32 = 3;
const EXIT_TRUNCATION: i32 = 4;
const EXIT_CONDITIONING: i32 = 5;

#[derive(Parser)]
#[command(
    name = "encounter",
    version,
    about = "Meeting probability of two Brownian particles on an interval: closed forms, PDE and Monte Carlo oracles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the constant omega and its Gamma-function cross-check
    Omega {
        /// Emit JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Closed-form meeting probability for one start state
    Prob {
        #[arg(long)]
        x1: f64,
        #[arg(long)]
        x2: f64,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long)]
        json: bool,
    },
    /// Probability-vs-x1 curve as CSV, optionally with Monte Carlo columns
    Curve {
        #[arg(long)]
        x2: f64,
        #[arg(long, default_value_t = 100)]
        n_points: usize,
        /// Output CSV path (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add Monte Carlo columns p_mc, std_error, n
        #[arg(long)]
        with_mc: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Realizations per Monte Carlo point
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        diffusion: f64,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long)]
        threads: Option<usize>,
        /// Disable Brownian-bridge crossing corrections
        #[arg(long)]
        no_bridge: bool,
    },
    /// Meeting-location density as CSV
    Density {
        #[arg(long)]
        x1: f64,
        #[arg(long)]
        x2: f64,
        #[arg(long, default_value_t = 2000)]
        n_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
    },
    /// Monte Carlo estimate of the meeting probability as JSON
    Simulate {
        #[arg(long)]
        x1: f64,
        #[arg(long)]
        x2: f64,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        diffusion: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Collect a meeting-position histogram
        #[arg(long)]
        histogram: bool,
        #[arg(long, default_value_t = 40)]
        bins: usize,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        no_bridge: bool,
    },
    /// Conditional mean meeting time via the finite-difference solver
    Meantime {
        #[arg(long)]
        x1: f64,
        #[arg(long)]
        x2: f64,
        #[arg(long, default_value_t = 1.0)]
        diffusion: f64,
        #[arg(long, default_value_t = 256)]
        grid_n: usize,
        /// Cross-check with a conditioned Monte Carlo mean
        #[arg(long)]
        with_mc: bool,
        #[arg(long, default_value_t = 20000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the built-in validation suite and print a pass/fail table
    Validate {
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
        /// Scale factor applied to every tolerance (0 forces failure)
        #[arg(long, default_value_t = 1.0)]
        tol: f64,
        /// Dump the finite-difference comparison grid as CSV
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Fast,
    Full,
}

/// Header block embedded in every output: command, parameters, seed,
/// version, timestamp. Reruns reproduce outputs byte-identically except
/// for the timestamp field.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    parameters: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    version: String,
    timestamp: String,
}

impl RunManifest {
    fn new(command: &str, parameters: BTreeMap<String, Value>, seed: Option<u64>) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_else(|_| "0".into());
        RunManifest {
            command: command.to_string(),
            parameters,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        }
    }

    fn comment_line(&self) -> String {
        format!("# manifest: {}", serde_json::to_string(self).unwrap())
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<EncounterError> for Failure {
    fn from(e: EncounterError) -> Self {
        let code = match e {
            EncounterError::Conditioning { .. } => EXIT_CONDITIONING,
            _ => EXIT_DOMAIN,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<mc::McError> for Failure {
    fn from(e: mc::McError) -> Self {
        let code = match e {
            mc::McError::Truncated { .. } | mc::McError::ExcessiveTruncation { .. } => {
                EXIT_TRUNCATION
            }
            mc::McError::BadConfig(_) => EXIT_DOMAIN,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_IO, e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            std::process::exit(f.code);
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .expect("thread pool")
            .install(f),
    }
}

/// Full round-trip formatting: 17 significant digits.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_out(path: &Option<PathBuf>, contents: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, contents)
                .map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", p.display())))?;
        }
        None => {
            print!("{contents}");
        }
    }
    Ok(())
}

fn interval(a: f64, b: f64) -> Result<IntervalSpec, Failure> {
    Ok(IntervalSpec::new(a, b)?)
}

fn pair(x1: f64, x2: f64, iv: &IntervalSpec) -> Result<PairState, Failure> {
    Ok(PairState::new(x1, x2, iv)?)
}

/// B(1/2, 1/4) by an independent Gamma-function route; the analytic value
/// of the defining integral.
fn omega_beta_reference() -> f64 {
    use statrs::function::gamma::ln_gamma;
    (ln_gamma(0.5) + ln_gamma(0.25) - ln_gamma(0.75)).exp()
}

fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Omega { json } => cmd_omega(json),
        Command::Prob { x1, x2, a, b, json } => cmd_prob(x1, x2, a, b, json),
        Command::Curve {
            x2,
            n_points,
            out,
            with_mc,
            seed,
            n,
            dt,
            diffusion,
            a,
            b,
            threads,
            no_bridge,
        } => with_threads(threads, move || {
            cmd_curve(x2, n_points, out, with_mc, seed, n, dt, diffusion, a, b, no_bridge)
        }),
        Command::Density {
            x1,
            x2,
            n_points,
            out,
            a,
            b,
        } => cmd_density(x1, x2, n_points, out, a, b),
        Command::Simulate {
            x1,
            x2,
            n,
            dt,
            diffusion,
            seed,
            histogram,
            bins,
            a,
            b,
            out,
            threads,
            no_bridge,
        } => with_threads(threads, move || {
            cmd_simulate(x1, x2, n, dt, diffusion, seed, histogram, bins, a, b, out, no_bridge)
        }),
        Command::Meantime {
            x1,
            x2,
            diffusion,
            grid_n,
            with_mc,
            n,
            seed,
            a,
            b,
            threads,
        } => with_threads(threads, move || {
            cmd_meantime(x1, x2, diffusion, grid_n, with_mc, n, seed, a, b)
        }),
        Command::Validate {
            level,
            tol,
            dump,
            threads,
        } => with_threads(threads, move || cmd_validate(level, tol, dump)),
    }
}

fn cmd_omega(json: bool) -> Result<i32, Failure> {
    let omega = elliptic::omega_constant();
    let delta = (omega - omega_beta_reference()).abs();
    if json {
        let manifest = RunManifest::new("omega", BTreeMap::new(), None);
        let envelope = json!({
            "manifest": manifest,
            "value": omega,
            "beta_check_delta": delta,
        });
        println!("{}", serde_json::to_string_pretty(&envelope).unwrap());
    } else {
        println!("omega = {omega:.12}");
        println!("beta_check_delta = {delta:.3e}");
    }
    Ok(0)
}

fn cmd_prob(x1: f64, x2: f64, a: f64, b: f64, json: bool) -> Result<i32, Failure> {
    let iv = interval(a, b)?;
    let s = pair(x1, x2, &iv)?;
    let p = enc::meet_probability(&s, &iv);
    let asym = enc::asymptotic_probability(&s, &iv);
    if json {
        let mut params = BTreeMap::new();
        for (k, v) in [("x1", x1), ("x2", x2), ("a", a), ("b", b)] {
            params.insert(k.to_string(), json!(v));
        }
        let manifest = RunManifest::new("prob", params, None);
        let envelope = json!({
            "manifest": manifest,
            "p": p,
            "asymptotic": asym,
            "degenerate_corner": s.is_degenerate_corner(&iv),
        });
        println!("{}", serde_json::to_string_pretty(&envelope).unwrap());
    } else {
        println!("P = {}", fmt_f64(p));
        println!("asymptotic = {}", fmt_f64(asym));
        if s.is_degenerate_corner(&iv) {
            println!("note: degenerate corner state; closed-diagonal limit reported");
        }
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_curve(
    x2: f64,
    n_points: usize,
    out: Option<PathBuf>,
    with_mc: bool,
    seed: u64,
    n: usize,
    dt: Option<f64>,
    diffusion: f64,
    a: f64,
    b: f64,
    no_bridge: bool,
) -> Result<i32, Failure> {
    let iv = interval(a, b)?;
    if !(x2 > iv.a() && x2 < iv.b()) {
        return Err(Failure::new(
            EXIT_DOMAIN,
            format!("x2 = {x2} must be interior to [{a}, {b}]"),
        ));
    }
    let mut params = BTreeMap::new();
    params.insert("x2".into(), json!(x2));
    params.insert("n_points".into(), json!(n_points));
    params.insert("with_mc".into(), json!(with_mc));
    params.insert("n".into(), json!(n));
    params.insert("diffusion".into(), json!(diffusion));
    params.insert("a".into(), json!(a));
    params.insert("b".into(), json!(b));
    params.insert("bridge_corrections".into(), json!(!no_bridge));
    let mut cfg = SimConfig::for_interval(&iv, diffusion, n, seed);
    if let Some(dt) = dt {
        cfg = cfg.with_dt(&iv, dt);
        params.insert("dt".into(), json!(dt));
    } else {
        params.insert("dt".into(), json!(cfg.dt));
    }
    cfg.bridge_corrections = !no_bridge;
    let manifest = RunManifest::new("curve", params, Some(seed));

    let mc_points = if with_mc {
        Some(mc::sweep_curve(x2, n_points, &iv, &cfg)?)
    } else {
        None
    };

    let mut csv = String::new();
    csv.push_str(&manifest.comment_line());
    csv.push('\n');
    if with_mc {
        csv.push_str("x1,x2,p_closed,p_mc,std_error,n\n");
    } else {
        csv.push_str("x1,x2,p_closed\n");
    }
    for k in 1..=n_points {
        let x1 = iv.a() + (x2 - iv.a()) * k as f64 / n_points as f64;
        let s = pair(x1.min(x2), x2, &iv)?;
        let p = enc::meet_probability(&s, &iv);
        match &mc_points {
            Some(points) => {
                let pt = &points[k - 1];
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_f64(x1),
                    fmt_f64(x2),
                    fmt_f64(p),
                    fmt_f64(pt.p_hat),
                    fmt_f64(pt.std_error),
                    pt.n
                ));
            }
            None => {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    fmt_f64(x1),
                    fmt_f64(x2),
                    fmt_f64(p)
                ));
            }
        }
    }
    write_out(&out, &csv)?;
    Ok(0)
}

fn cmd_density(
    x1: f64,
    x2: f64,
    n_points: usize,
    out: Option<PathBuf>,
    a: f64,
    b: f64,
) -> Result<i32, Failure> {
    let iv = interval(a, b)?;
    let s = pair(x1, x2, &iv)?;
    if n_points < 2 {
        return Err(Failure::new(EXIT_DOMAIN, "need at least 2 density points"));
    }
    let mut params = BTreeMap::new();
    for (k, v) in [("x1", x1), ("x2", x2), ("a", a), ("b", b)] {
        params.insert(k.to_string(), json!(v));
    }
    params.insert("n_points".into(), json!(n_points));
    let manifest = RunManifest::new("density", params, None);

    let l = iv.length();
    let h = l / (n_points + 1) as f64;
    let mut rows = Vec::with_capacity(n_points);
    for k in 1..=n_points {
        let m = iv.a() + k as f64 * h;
        let d = enc::meeting_density_at(&s, &iv, m)?;
        rows.push((m, d));
    }
    // sqrt(2)-weighted trapezoid mass; the density vanishes at both corners.
    let mut mass = 0.0;
    let mut prev = 0.0;
    for &(_, d) in &rows {
        mass += 0.5 * (prev + d) * h;
        prev = d;
    }
    mass += 0.5 * prev * h;
    mass *= 2f64.sqrt();
    let p = enc::meet_probability(&s, &iv);

    let mut csv = String::new();
    csv.push_str(&manifest.comment_line());
    csv.push('\n');
    csv.push_str(&format!(
        "# sqrt2_weighted_mass: {} closed_form_p: {}\n",
        fmt_f64(mass),
        fmt_f64(p)
    ));
    csv.push_str("m,density\n");
    for (m, d) in rows {
        csv.push_str(&format!("{},{}\n", fmt_f64(m), fmt_f64(d)));
    }
    write_out(&out, &csv)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    x1: f64,
    x2: f64,
    n: usize,
    dt: Option<f64>,
    diffusion: f64,
    seed: u64,
    histogram: bool,
    bins: usize,
    a: f64,
    b: f64,
    out: Option<PathBuf>,
    no_bridge: bool,
) -> Result<i32, Failure> {
    let iv = interval(a, b)?;
    let s = pair(x1, x2, &iv)?;
    let mut cfg = SimConfig::for_interval(&iv, diffusion, n, seed);
    if let Some(dt) = dt {
        cfg = cfg.with_dt(&iv, dt);
    }
    cfg.bridge_corrections = !no_bridge;
    if cfg.is_coarse(&iv) {
        eprintln!(
            "warning: dt*D = {:.3e} exceeds 1e-3 L^2; expect discretization bias",
            cfg.dt * cfg.diffusion
        );
    }
    let opts = EstimateOptions {
        histogram_bins: histogram.then_some(bins),
        conditional_times: true,
    };
    let result = mc::estimate(&s, &iv, &cfg, &opts)?;

    let mut params = BTreeMap::new();
    for (k, v) in [
        ("x1", x1),
        ("x2", x2),
        ("dt", cfg.dt),
        ("diffusion", diffusion),
        ("a", a),
        ("b", b),
    ] {
        params.insert(k.to_string(), json!(v));
    }
    params.insert("n".into(), json!(n));
    params.insert("bins".into(), json!(histogram.then_some(bins)));
    params.insert("bridge_corrections".into(), json!(!no_bridge));
    let manifest = RunManifest::new("simulate", params, Some(seed));
    let envelope = json!({
        "manifest": manifest,
        "result": result,
        "p_closed": enc::meet_probability(&s, &iv),
    });
    let text = format!("{}\n", serde_json::to_string_pretty(&envelope).unwrap());
    write_out(&out, &text)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_meantime(
    x1: f64,
    x2: f64,
    diffusion: f64,
    grid_n: usize,
    with_mc: bool,
    n: usize,
    seed: u64,
    a: f64,
    b: f64,
) -> Result<i32, Failure> {
    let iv = interval(a, b)?;
    let s = pair(x1, x2, &iv)?;
    let tau = enc::conditional_mean_time(&s, &iv, diffusion, grid_n)?;
    let tau_half = enc::conditional_mean_time(&s, &iv, diffusion, (grid_n / 2).max(64))?;
    let richardson = tau + (tau - tau_half) / 3.0;
    println!("tau_m(grid_n={grid_n}) = {}", fmt_f64(tau));
    println!("tau_m(grid_n={}) = {}", (grid_n / 2).max(64), fmt_f64(tau_half));
    println!("richardson_estimate = {}", fmt_f64(richardson));
    if with_mc {
        let cfg = SimConfig::for_interval(&iv, diffusion, n, seed);
        let opts = EstimateOptions {
            histogram_bins: None,
            conditional_times: true,
        };
        let r = mc::estimate(&s, &iv, &cfg, &opts)?;
        match r.conditional_mean_time {
            Some(ct) => {
                println!(
                    "mc_conditional_mean = {} (se {}, n_met {})",
                    fmt_f64(ct.mean),
                    fmt_f64(ct.std_error),
                    r.met
                );
                println!(
                    "deviation_in_se = {:.2}",
                    (ct.mean - tau).abs() / ct.std_error
                );
            }
            None => println!("mc_conditional_mean = n/a (no meetings observed)"),
        }
    }
    Ok(0)
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn cmd_validate(level: Level, tol_scale: f64, dump: Option<PathBuf>) -> Result<i32, Failure> {
    let started = Instant::now();
    let mut checks: Vec<Check> = Vec::new();
    let iv = IntervalSpec::unit();

    // omega against the printed reference and the Gamma route.
    let omega = elliptic::omega_constant();
    let d_ref = (omega - 5.244115106).abs();
    let d_beta = (omega - omega_beta_reference()).abs();
    checks.push(check(
        "omega_reference",
        d_ref <= 1e-8 * tol_scale,
        format!("|omega - 5.244115106| = {d_ref:.3e} (tol {:.1e})", 1e-8 * tol_scale),
    ));
    checks.push(check(
        "omega_beta_identity",
        d_beta <= 1e-9 * tol_scale,
        format!("|omega - B(1/2,1/4)| = {d_beta:.3e} (tol {:.1e})", 1e-9 * tol_scale),
    ));

    // Weierstrass engine: ODE residual, periodicity, parity on a
    // deterministic point cloud clear of lattice points.
    let w1 = elliptic::real_half_period();
    let mut worst_ode = 0.0f64;
    let mut worst_per = 0.0f64;
    let mut worst_par = 0.0f64;
    let mut k = 0u64;
    while worst_ode.is_finite() && k < 100 {
        let fx = (0.5 + (k as f64) * 0.6180339887498949) % 1.0;
        let fy = (0.25 + (k as f64) * 0.7548776662466927) % 1.0;
        k += 1;
        let z = Complex64::new((fx * 2.0 - 1.0) * w1, (fy * 2.0 - 1.0) * w1);
        let near_lattice = [
            Complex64::new(0.0, 0.0),
            Complex64::new(2.0 * w1, 0.0),
            Complex64::new(0.0, 2.0 * w1),
            Complex64::new(2.0 * w1, 2.0 * w1),
        ]
        .iter()
        .any(|l| (z - l).norm() < 0.05);
        if near_lattice {
            continue;
        }
        let (p, dp) = elliptic::wp_pair(z).unwrap();
        let ode = (dp * dp - (4.0 * p * p * p - p)).norm() / (1.0 + p.norm().powi(3));
        worst_ode = worst_ode.max(ode);
        let shifted = elliptic::wp(z + Complex64::new(2.0 * w1, 0.0)).value;
        worst_per = worst_per.max((shifted - p).norm() / p.norm().max(1.0));
        let mirrored = elliptic::wp(-z).value;
        worst_par = worst_par.max((mirrored - p).norm() / p.norm().max(1.0));
    }
    checks.push(check(
        "wp_ode_residual",
        worst_ode <= 1e-9 * tol_scale,
        format!("max residual/(1+|P|^3) = {worst_ode:.3e} (tol {:.1e})", 1e-9 * tol_scale),
    ));
    checks.push(check(
        "wp_periodicity",
        worst_per <= 1e-10 * tol_scale,
        format!("max rel deviation = {worst_per:.3e} (tol {:.1e})", 1e-10 * tol_scale),
    ));
    checks.push(check(
        "wp_parity",
        worst_par <= 1e-10 * tol_scale,
        format!("max rel deviation = {worst_par:.3e} (tol {:.1e})", 1e-10 * tol_scale),
    ));

    // Conformal roundtrip psi(F(zeta)) = zeta on a 5x5 interior grid.
    let mut worst_rt = 0.0f64;
    for i in 0..5 {
        for j in 0..5 {
            let zeta = Complex64::new(-2.0 + i as f64, 0.3 + 0.6 * j as f64);
            let f = map_to_triangle(&HalfPlanePoint::new(zeta).unwrap()).unwrap();
            let back = map_to_half_plane(&f).unwrap().value();
            worst_rt = worst_rt.max((back - zeta).norm());
        }
    }
    checks.push(check(
        "conformal_roundtrip",
        worst_rt <= 1e-7 * tol_scale,
        format!("max |psi(F(z)) - z| = {worst_rt:.3e} (tol {:.1e})", 1e-7 * tol_scale),
    ));

    // Finite differences vs closed form at n = 200 (O(h^2)-scaled bound
    // from the pinned n = 400 threshold), corner-excluded norm.
    let n_fd = 200;
    let report = pde::solve_laplace_triangle(&iv, n_fd, 1e-8).map_err(EncounterError::from)?;
    let grid = &report.values;
    let mut worst_fd = 0.0f64;
    let corners = [(0.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    for (i, j, x1, x2, v) in grid.rows() {
        if grid.tag(i, j) != pde::BoundaryTag::Interior {
            continue;
        }
        let d = corners
            .iter()
            .map(|&(cx, cy)| ((x1 - cx).powi(2) + (x2 - cy).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        if d <= 0.012 {
            continue;
        }
        worst_fd = worst_fd.max((v - enc::meet_probability_canonical(x1, x2)).abs());
    }
    let fd_tol = 5e-3 * (400.0 / n_fd as f64).powi(2) * tol_scale;
    checks.push(check(
        "fd_vs_closed_form",
        worst_fd <= fd_tol,
        format!("corner-excluded max error (n={n_fd}) = {worst_fd:.3e} (tol {fd_tol:.1e})"),
    ));
    if let Some(path) = &dump {
        dump_grid(path, grid)?;
    }

    // Density mass equals the probability.
    let s = PairState::new(0.3, 0.6, &iv).map_err(Failure::from)?;
    let mass = enc::meet_probability_in_set(&s, &MeetingSet::whole(&iv), &iv)?;
    let p = enc::meet_probability(&s, &iv);
    checks.push(check(
        "density_mass",
        (mass - p).abs() <= 1e-6 * tol_scale,
        format!("|mass - P| = {:.3e} (tol {:.1e})", (mass - p).abs(), 1e-6 * tol_scale),
    ));

    if level == Level::Full {
        // Monte Carlo three-sigma gates.
        let cfg = SimConfig::for_interval(&iv, 1.0, 2000, 17);
        let s55 = PairState::new(0.25, 0.5, &iv).map_err(Failure::from)?;
        let r = mc::estimate(&s55, &iv, &cfg, &EstimateOptions::default())?;
        let p55 = enc::meet_probability(&s55, &iv);
        checks.push(check(
            "mc_three_sigma",
            (r.p_hat - p55).abs() <= 3.0 * r.std_error * tol_scale.max(1e-300),
            format!(
                "|p_hat - P| = {:.3e} vs 3se = {:.3e}",
                (r.p_hat - p55).abs(),
                3.0 * r.std_error
            ),
        ));
        let cfg_d1 = SimConfig::for_interval(&iv, 1.0, 10_000, 23);
        let cfg_d2 = SimConfig::for_interval(&iv, 0.1, 10_000, 29);
        let r1 = mc::estimate(&s, &iv, &cfg_d1, &EstimateOptions::default())?;
        let r2 = mc::estimate(&s, &iv, &cfg_d2, &EstimateOptions::default())?;
        let combined = (r1.std_error.powi(2) + r2.std_error.powi(2)).sqrt();
        checks.push(check(
            "mc_diffusion_independence",
            (r1.p_hat - r2.p_hat).abs() <= 3.0 * combined * tol_scale.max(1e-300),
            format!(
                "|p(D=1) - p(D=0.1)| = {:.3e} vs 3 combined se = {:.3e}",
                (r1.p_hat - r2.p_hat).abs(),
                3.0 * combined
            ),
        ));
    }

    let mut all = true;
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:<28} {}", c.name, c.detail);
        all &= c.passed;
    }
    println!(
        "{}  ({} checks, {:.1} s)",
        if all { "ALL PASS" } else { "FAILED" },
        checks.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(if all { 0 } else { 1 })
}

fn dump_grid(path: &Path, grid: &pde::TriangleGrid) -> Result<(), Failure> {
    let mut params = BTreeMap::new();
    params.insert("n".into(), json!(grid.n()));
    let manifest = RunManifest::new("validate --dump", params, None);
    let mut f = std::fs::File::create(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))?;
    writeln!(f, "{}", manifest.comment_line())?;
    writeln!(f, "i,j,x1,x2,value")?;
    for (i, j, x1, x2, v) in grid.rows() {
        writeln!(f, "{i},{j},{},{},{}", fmt_f64(x1), fmt_f64(x2), fmt_f64(v))?;
    }
    Ok(())
}
