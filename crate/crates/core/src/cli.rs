//! Command-line front end. Every subcommand is a thin wrapper over library calls.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analytic::{Rational, Regime};
use crate::environment::SignalEnvironment;
use crate::error::{Error, Result};
use crate::geometry::{parse_boxes, UnitBox};
use crate::karlin_process::{simulate_path, top_locations, write_top_csv, ModelParams};
use crate::limit_measures::{
    sample_critical_limit_rsm, sample_is_rsm, sample_karlin_rsm, NoiseLimitSampler, SignalLimitSampler,
    RsmKind, SignalNoise, TruncatedRSM, TruncationPolicy,
};
use crate::poisson_karlin::simulate_marked_points;
use crate::rng::RngStream;
use crate::samplers::{ParetoParam, ZetaLabelLaw};
use crate::verify::{config_hash, run_suite, ExperimentConfig, Suite, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "karlin", version, about = "Perturbed Karlin model: simulation, limit laws and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one path (or a Poisson–Karlin point set with --lambda) and write it as CSV.
    Simulate(SimulateArgs),
    /// Run a verification suite and write its JSON report.
    Verify(VerifyArgs),
    /// Sample a limiting sup-measure and write its box values.
    Limits(LimitsArgs),
    /// Write a path plus top-k marker files for X, sigma and Z.
    Plotdata(PlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RegimeFlag {
    Noise,
    Signal,
    Critical,
    Auto,
}

#[derive(Args, Debug, Clone)]
struct ModelFlags {
    /// Signal tail index (number or fraction such as 1/2).
    #[arg(long)]
    alpha: Option<String>,
    /// Noise tail index.
    #[arg(long = "alpha-prime")]
    alpha_prime: Option<String>,
    /// Label exponent in (0,1).
    #[arg(long)]
    beta: Option<String>,
    /// Canonical parameters of a regime, used when alpha, alpha-prime and beta are all absent.
    #[arg(long, value_enum)]
    regime: Option<RegimeFlag>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    n: Option<u64>,
    /// Simulate the Poisson–Karlin model with this intensity instead of a path.
    #[arg(long)]
    lambda: Option<f64>,
    /// Dimension of the Poisson–Karlin locations.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Experiment config JSON; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    boxes: Option<String>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Report path; per-box CDF tables are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LimitsArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value = "0:1")]
    boxes: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Limits(a) => cmd_limits(&a),
        Command::Plotdata(a) => cmd_plotdata(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("karlin: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for an error that aborted a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Resource { .. } => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    }
}

fn parse_param(name: &str, s: &str) -> Result<(f64, Option<Rational>)> {
    if let Ok(r) = s.parse::<Rational>() {
        return Ok((r.to_f64(), Some(r)));
    }
    match s.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok((x, None)),
        _ => Err(Error::Config(format!("--{name}: not a number: {s:?}"))),
    }
}

/// `(α, α′, β)` from the flags, falling back to a regime's canonical triple.
fn resolve_triple(m: &ModelFlags, fallback: Option<(f64, f64, f64)>) -> Result<[(f64, Option<Rational>); 3]> {
    let given = [&m.alpha, &m.alpha_prime, &m.beta];
    let names = ["alpha", "alpha-prime", "beta"];
    let canonical = match m.regime {
        Some(RegimeFlag::Noise) => Some(ExperimentConfig::canonical_params(Regime::NoiseDominance)),
        Some(RegimeFlag::Signal) => Some(ExperimentConfig::canonical_params(Regime::SignalDominance)),
        Some(RegimeFlag::Critical) => Some(ExperimentConfig::canonical_params(Regime::Critical)),
        Some(RegimeFlag::Auto) | None => None,
    };
    let defaults = if given.iter().all(|g| g.is_none()) { canonical.or(fallback) } else { fallback };
    let mut out = [(0.0, None); 3];
    for i in 0..3 {
        out[i] = match (given[i], defaults) {
            (Some(s), _) => parse_param(names[i], s)?,
            (None, Some(d)) => {
                let v = [d.0, d.1, d.2][i];
                (v, format!("{v}").parse::<Rational>().ok())
            }
            (None, None) => return Err(Error::Config(format!("--{} is required (or use --regime)", names[i]))),
        };
    }
    Ok(out)
}

fn model_params(m: &ModelFlags) -> Result<ModelParams> {
    let [(a, ra), (ap, rap), (b, rb)] = resolve_triple(m, None)?;
    let p = match (ra, rap, rb) {
        (Some(x), Some(y), Some(z)) => ModelParams::pareto_exact(x, y, z),
        _ => ModelParams::pareto(a, ap, b),
    }
    .map_err(|e| Error::Config(e.to_string()))?;
    if m.regime.is_some_and(|r| r != RegimeFlag::Auto) {
        let want = match m.regime {
            Some(RegimeFlag::Noise) => Regime::NoiseDominance,
            Some(RegimeFlag::Signal) => Regime::SignalDominance,
            _ => Regime::Critical,
        };
        if p.regime() != want {
            return Err(Error::Config(format!("parameters are in the {} regime, not {want}", p.regime())));
        }
    }
    Ok(p)
}

fn header(hash: &str, seed: u64, config: &serde_json::Value) -> String {
    format!("# karlin {VERSION} config={hash} seed={seed}\n# {config}\n")
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t.max(1));
    }
    b.build().map_err(|e| Error::Internal(e.to_string()))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let params = model_params(&a.model)?;
    let config = json!({
        "command": "simulate", "alpha": params.alpha, "alpha_prime": params.alpha_prime, "beta": params.beta,
        "n": a.n, "lambda": a.lambda, "dim": a.dim, "seed": a.seed,
    });
    let hash = config_hash(&config);
    let mut rng = RngStream::new(a.seed, 0);
    let summary;
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(header(&hash, a.seed, &config).as_bytes());
    match (a.n, a.lambda) {
        (_, Some(lambda)) => {
            if a.dim == 0 {
                return Err(Error::Config("--dim must be at least 1".into()));
            }
            let pts = simulate_marked_points(&params, lambda, a.dim, &mut rng).map_err(usage)?;
            pts.write_csv(&mut buf)?;
            let max_x = (0..pts.count()).map(|i| pts.sigma(i) * pts.noise()[i]).fold(0.0, f64::max);
            let k = pts.signal_values().len();
            summary = format!("N={} K={} max_x={max_x} regime={}", pts.count(), k, params.regime());
        }
        (Some(n), None) => {
            if n == 0 {
                return Err(Error::Config("--n must be at least 1".into()));
            }
            let path = simulate_path(&params, n, &mut rng).map_err(usage)?;
            path.write_csv(&mut buf)?;
            let max_x = path.products().iter().copied().fold(0.0, f64::max);
            summary = format!("n={n} K_n={} max_x={max_x} regime={}", path.signal_values().len(), params.regime());
        }
        (None, None) => return Err(Error::Config("one of --n or --lambda is required".into())),
    }
    let mut w = open_out(a.out.as_deref())?;
    w.write_all(&buf)?;
    w.flush()?;
    if a.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(EXIT_OK)
}

/// Domain errors from flag values are usage errors; resource limits keep their code.
fn usage(e: Error) -> Error {
    match e {
        Error::Resource { .. } => e,
        other => Error::Config(other.to_string()),
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let mut cfg = match (&a.config, &a.suite) {
        (Some(p), _) => ExperimentConfig::from_path(p)?,
        (None, Some(s)) => ExperimentConfig::new(s.parse::<Suite>()?),
        (None, None) => return Err(Error::Config("--suite or --config is required".into())),
    };
    if let Some(s) = &a.suite {
        cfg.suite = s.parse()?;
    }
    let m = &a.model;
    for (slot, val) in [(&mut cfg.alpha, &m.alpha), (&mut cfg.alpha_prime, &m.alpha_prime), (&mut cfg.beta, &m.beta)] {
        if let Some(v) = val {
            parse_param("param", v)?;
            *slot = Some(crate::analytic::ParamValue::Exact(v.clone()));
        }
    }
    if let Some(r) = m.regime {
        cfg.regime = match r {
            RegimeFlag::Noise => Some(Regime::NoiseDominance),
            RegimeFlag::Signal => Some(Regime::SignalDominance),
            RegimeFlag::Critical => Some(Regime::Critical),
            RegimeFlag::Auto => None,
        };
    }
    cfg.n = a.n.or(cfg.n);
    cfg.lambda = a.lambda.or(cfg.lambda);
    cfg.reps = a.reps.or(cfg.reps);
    cfg.samples = a.samples.or(cfg.samples);
    if let Some(b) = &a.boxes {
        cfg.boxes = Some(b.clone());
    }
    if let Some(k) = &a.kind {
        cfg.kind = Some(k.parse()?);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    // Fail on a bad config before any simulation or output.
    cfg.resolved()?;
    let report = run_suite(&cfg, a.threads)?;
    let text = report.to_json()?;
    match &a.out {
        Some(p) => {
            std::fs::write(p, format!("{text}\n"))?;
            report.write_curves(p)?;
        }
        None => println!("{text}"),
    }
    let failed: Vec<&str> = report
        .records
        .iter()
        .filter(|r| !r.adjusted_passed)
        .map(|r| r.name.as_str())
        .collect();
    eprintln!(
        "suite {:?}: {} records, {}",
        report.suite,
        report.records.len(),
        if report.bonferroni_passed { "PASS".to_string() } else { format!("FAIL ({})", failed.join(", ")) }
    );
    Ok(if report.bonferroni_passed { EXIT_OK } else { EXIT_FAILED })
}

/// Per-kind defaults: the canonical triple of the matching regime.
fn limit_defaults(kind: RsmKind) -> (f64, f64, f64) {
    match kind {
        RsmKind::Is | RsmKind::Karlin => (1.0, 2.0, 0.5),
        RsmKind::Signal => ExperimentConfig::canonical_params(Regime::SignalDominance),
        RsmKind::Critical => ExperimentConfig::canonical_params(Regime::Critical),
        RsmKind::Noise => ExperimentConfig::canonical_params(Regime::NoiseDominance),
    }
}

fn cmd_limits(a: &LimitsArgs) -> Result<i32> {
    let kind: RsmKind = a.kind.parse()?;
    let [(alpha, _), (ap, _), (beta, _)] = resolve_triple(&a.model, Some(limit_defaults(kind)))?;
    if a.samples == 0 {
        return Err(Error::Config("--samples must be positive".into()));
    }
    let boxes: Vec<UnitBox> = parse_boxes(&a.boxes, a.dim).map_err(|e| Error::Config(e.to_string()))?;
    let m_min = boxes.iter().map(UnitBox::measure).fold(1.0, f64::min);
    let policy = TruncationPolicy::new(m_min, 1e-4, a.dim).map_err(usage)?;
    let env = match kind {
        RsmKind::Noise => {
            let labels = Arc::new(ZetaLabelLaw::new(beta).map_err(usage)?);
            let law = ParetoParam::standard(alpha).map_err(usage)?;
            Some(SignalEnvironment::pareto(law, labels, a.seed, u64::MAX))
        }
        _ => None,
    };
    let noise_sampler = match &env {
        Some(env) => Some(NoiseLimitSampler::new(ap, env, &policy).map_err(usage)?),
        None => None,
    };
    let signal_sampler = match kind {
        RsmKind::Signal => {
            let noise = ParetoParam::standard(ap).map_err(usage)?;
            Some(SignalLimitSampler::new(alpha, beta, SignalNoise::Pareto(noise), &policy).map_err(usage)?)
        }
        _ => None,
    };
    let draw = |rng: &mut RngStream| -> Result<TruncatedRSM> {
        match kind {
            RsmKind::Is => sample_is_rsm(alpha, &policy, rng),
            RsmKind::Karlin => sample_karlin_rsm(alpha, beta, &policy, rng),
            RsmKind::Signal => signal_sampler.as_ref().expect("signal sampler").sample(rng),
            RsmKind::Critical => sample_critical_limit_rsm(ap, beta, &policy, rng),
            RsmKind::Noise => Ok(noise_sampler.as_ref().expect("noise sampler").sample(rng)),
        }
    };
    // Fail fast on parameter errors before starting the pool.
    draw(&mut RngStream::new(a.seed, u64::MAX)).map_err(usage)?;
    let rows = pool(a.threads)?.install(|| {
        use rayon::prelude::*;
        (0..a.samples)
            .into_par_iter()
            .map(|r| draw(&mut RngStream::new(a.seed, r as u64))?.evaluate_values(&boxes))
            .collect::<Result<Vec<Vec<f64>>>>()
    })?;
    let config = json!({
        "command": "limits", "kind": kind, "alpha": alpha, "alpha_prime": ap, "beta": beta,
        "samples": a.samples, "boxes": a.boxes, "dim": a.dim, "seed": a.seed,
    });
    let hash = config_hash(&config);
    let mut w = open_out(a.out.as_deref())?;
    w.write_all(header(&hash, a.seed, &config).as_bytes())?;
    writeln!(w, "rep,box_id,value")?;
    for (r, vals) in rows.iter().enumerate() {
        for (j, v) in vals.iter().enumerate() {
            writeln!(w, "{r},{j},{v}")?;
        }
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn cmd_plotdata(a: &PlotArgs) -> Result<i32> {
    let params = model_params(&a.model)?;
    if a.n == 0 {
        return Err(Error::Config("--n must be at least 1".into()));
    }
    if a.top == 0 || a.top as u64 > a.n {
        return Err(Error::Config(format!("--top must lie in 1..={}", a.n)));
    }
    let path = simulate_path(&params, a.n, &mut RngStream::new(a.seed, 0)).map_err(usage)?;
    let top = top_locations(&path, a.top)?;
    let config = json!({
        "command": "plotdata", "alpha": params.alpha, "alpha_prime": params.alpha_prime, "beta": params.beta,
        "regime": params.regime().to_string(), "n": a.n, "top": a.top, "seed": a.seed,
    });
    let hash = config_hash(&config);
    let head = header(&hash, a.seed, &config);
    std::fs::create_dir_all(&a.out)?;
    let write = |name: &str, body: &dyn Fn(&mut dyn Write) -> io::Result<()>| -> Result<PathBuf> {
        let p = a.out.join(name);
        let mut w = BufWriter::new(File::create(&p)?);
        w.write_all(head.as_bytes())?;
        body(&mut w)?;
        w.flush()?;
        Ok(p)
    };
    let files = [
        write("path.csv", &|w| path.write_csv(w))?,
        write("top_x.csv", &|w| write_top_csv(&top.x, w))?,
        write("top_sigma.csv", &|w| write_top_csv(&top.sigma, w))?,
        write("top_z.csv", &|w| write_top_csv(&top.z, w))?,
    ];
    for f in &files {
        println!("{}", f.display());
    }
    Ok(EXIT_OK)
}
