//! `freemult` command line: densities of closed-form and infinitely divisible
//! laws, free and Boolean convolutions and powers, free entropy, and the
//! experiment harness.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 for numerical failures.

use clap::{Args, Parser, Subcommand, ValueEnum};
use freemult::brownian::{chi_density_grid, chi_measure, chi_nodes, lambda_density_grid, lambda_measure};
use freemult::config::Config;
use freemult::convolution::{
    boolean_convolve_circle_on, boolean_convolve_halfline_on, boolean_power_on, free_convolve_circle_on,
    free_convolve_halfline_on, free_power_on, halfline_grid, halfline_support, Convolved,
};
use freemult::entropy::{entropy_of_flow, free_entropy, free_entropy_quadrature, Entropy};
use freemult::experiments::{
    run_bercovici_pata, run_chi_superconvergence, run_entropy_convergence, run_haar_superconvergence,
    run_lambda_superconvergence, ExperimentOutput, LambdaFamily,
};
use freemult::levy::{infdiv_eta, LevyHinchinParams, SigmaMeasure};
use freemult::measure::{circle_grid, geometric_grid};
use freemult::recovery::recover_with;
use freemult::subordination::SubordinationSolution;
use freemult::{Atom, DensityProfile, Error, EtaEvaluator, Measure, Result, Space};
use serde::Serialize;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "freemult", version, about = "Multiplicative free and Boolean convolution on the circle and the positive half-line")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Config JSON; defaults to $FREEMULT_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output grid size.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Nodes used to discretize closed-form input laws.
    #[arg(long, global = true)]
    measure_nodes: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    j_min: Option<i32>,
    #[arg(long, global = true)]
    j_max: Option<i32>,
    /// Write subordination diagnostics JSON to this path.
    #[arg(long, global = true)]
    diagnostics: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Density profile of a law as CSV.
    Density(DensityArgs),
    /// Free or Boolean convolution of two measure files.
    Convolve(ConvolveArgs),
    /// k-fold free or Boolean power of a measure file.
    Power(PowerArgs),
    /// Free entropy of a circle law or of a λ_t flow.
    Entropy(EntropyArgs),
    /// Run an experiment and write its report directory.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    Chi,
    Lambda,
    Haar,
    Infdiv,
    File,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long, value_enum)]
    law: Law,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Lévy–Hinčin parameter JSON for `--law infdiv`.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Measure JSON for `--law file`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the law as measure JSON on `measure_nodes` nodes.
    #[arg(long)]
    measure_out: Option<PathBuf>,
}

#[derive(Args)]
#[group(id = "op", required = true, multiple = false, args = ["free", "boolean"])]
struct Op {
    #[arg(long)]
    free: bool,
    #[arg(long)]
    boolean: bool,
}

#[derive(Args)]
struct ConvolveArgs {
    #[command(flatten)]
    op: Op,
    a: PathBuf,
    b: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the recovered measure as JSON.
    #[arg(long)]
    measure_out: Option<PathBuf>,
}

#[derive(Args)]
struct PowerArgs {
    #[command(flatten)]
    op: Op,
    #[arg(long)]
    k: usize,
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    measure_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlowLaw {
    Lambda,
    Haar,
}

#[derive(Args)]
struct EntropyArgs {
    /// Circle measure JSON.
    input: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "input")]
    law: Option<FlowLaw>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Comma-separated times for a flow; writes `t,entropy` CSV.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Also evaluate the quadrature cross-check on this many nodes.
    #[arg(long)]
    quadrature: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Haar,
    Lambda,
    Chi,
    Bp,
    Entropy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    TwoAtom,
    Exact,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    experiment: Experiment,
    /// Mean of the two-atom law (p·δ₁ + (1 − p)·δ₋₁) for `haar`.
    #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
    mean: f64,
    /// Largest n; n runs over powers of two from 8.
    #[arg(long, default_value_t = 64)]
    nmax: usize,
    /// Explicit comma-separated list of n.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    t: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Family::TwoAtom)]
    family: Family,
    /// γ of the Boolean law for `bp`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    gamma: f64,
    /// Mass of σ = s·δ₁ for `bp`; defaults to t/2.
    #[arg(long)]
    sigma_mass: Option<f64>,
    /// Pass threshold on the final sup-distance; each experiment has a default.
    #[arg(long)]
    threshold: Option<f64>,
    /// Report directory; defaults to the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn invalid(field: &str, reason: &str) -> Error {
    Error::Validation {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

fn load_config(g: &Global) -> Result<Config> {
    let mut c = match &g.config {
        Some(p) => Config::from_file(p)?,
        None => Config::from_env()?,
    };
    if let Some(v) = g.grid {
        c.grid = v;
    }
    if let Some(v) = g.measure_nodes {
        c.measure_nodes = v;
    }
    if let Some(v) = g.threads {
        c.threads = v;
    }
    if let Some(v) = g.j_min {
        c.recovery_j_min = v;
    }
    if let Some(v) = g.j_max {
        c.recovery_j_max = v;
    }
    c.validate()?;
    Ok(c)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_measure(path: &Path) -> Result<Measure> {
    Measure::parse(&read(path)?)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

struct Ctx {
    config: Config,
    diagnostics: Option<PathBuf>,
}

impl Ctx {
    fn solution(&self, sol: Option<&SubordinationSolution>) -> Result<()> {
        if let Some(s) = sol {
            self.config.check_residual(s.residual_sup)?;
            if let Some(p) = &self.diagnostics {
                emit(Some(p), &s.diagnostics_json())?;
            }
        }
        Ok(())
    }
}

fn require_t(t: Option<f64>) -> Result<f64> {
    t.ok_or_else(|| invalid("t", "--t is required for this law"))
}

/// Recovery grid of a half-line law spanning [lo, hi].
fn span_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    halfline_grid(lo, hi, n)
}

fn cmd_density(ctx: &Ctx, a: &DensityArgs) -> Result<()> {
    let n = ctx.config.grid;
    let (profile, measure) = match a.law {
        Law::Chi => {
            let t = require_t(a.t)?;
            let nodes = chi_nodes(t, n)?;
            let values = chi_density_grid(t, &nodes)?;
            let p = DensityProfile::new(Space::Halfline, nodes, values).with_meta("law", "chi").with_meta("t", t);
            (p, a.measure_out.is_some().then(|| chi_measure(t, ctx.config.measure_nodes)).transpose()?)
        }
        Law::Lambda => {
            let t = require_t(a.t)?;
            let nodes = circle_grid(n);
            let values = lambda_density_grid(t, &nodes)?;
            let p = DensityProfile::new(Space::Circle, nodes, values).with_meta("law", "lambda").with_meta("t", t);
            (p, a.measure_out.is_some().then(|| lambda_measure(t, ctx.config.measure_nodes)).transpose()?)
        }
        Law::Haar => {
            let p = DensityProfile::new(Space::Circle, circle_grid(n), vec![1.0 / (2.0 * PI); n]).with_meta("law", "haar");
            (p, Some(Measure::haar(ctx.config.measure_nodes)))
        }
        Law::Infdiv => {
            let path = a.params.as_ref().ok_or_else(|| invalid("params", "--params is required for --law infdiv"))?;
            let p = LevyHinchinParams::parse(&read(path)?)?;
            let grid = match p.space {
                Space::Circle => circle_grid(n),
                Space::Halfline => geometric_grid(1.0 / 64.0, 64.0, n),
            };
            let (eta, sol) = infdiv_eta(&p)?;
            ctx.solution(sol.as_ref())?;
            let r = recover_with(&eta, &grid, &eta.label, &ctx.config.recovery()?)?;
            (r.profile.with_meta("law", "infdiv"), Some(r.measure))
        }
        Law::File => {
            let path = a.input.as_ref().ok_or_else(|| invalid("input", "--input is required for --law file"))?;
            let mu = read_measure(path)?;
            let grid = match mu.space {
                Space::Circle => circle_grid(n),
                Space::Halfline => {
                    let (lo, hi) = halfline_support(&mu);
                    span_grid(lo, hi, n)
                }
            };
            let eta = EtaEvaluator::from_measure(&mu);
            let r = recover_with(&eta, &grid, &mu.label, &ctx.config.recovery()?)?;
            (r.profile.with_meta("law", "file"), Some(r.measure))
        }
    };
    if let (Some(p), Some(m)) = (a.measure_out.as_deref(), measure) {
        emit(Some(p), &m.to_json())?;
    }
    emit(a.out.as_deref(), &profile.to_csv())
}

fn finish(ctx: &Ctx, c: Convolved, out: Option<&Path>, measure_out: Option<&Path>) -> Result<()> {
    ctx.solution(c.solution.as_ref())?;
    if let Some(p) = measure_out {
        emit(Some(p), &c.measure.to_json())?;
    }
    let mut profile = c.profile;
    if !c.measure.atoms.is_empty() {
        let list: Vec<String> = c.measure.atoms.iter().map(|a: &Atom| format!("{}@{}", a.mass, a.pos)).collect();
        profile = profile.with_meta("atoms", list.join(" "));
    }
    emit(out, &profile.to_csv())
}

fn cmd_convolve(ctx: &Ctx, a: &ConvolveArgs) -> Result<()> {
    let (mu, nu) = (read_measure(&a.a)?, read_measure(&a.b)?);
    if mu.space != nu.space {
        return Err(invalid("measure.space", "both measures must live on the same space"));
    }
    let n = ctx.config.grid;
    let c = match mu.space {
        Space::Circle => {
            let grid = circle_grid(n);
            if a.op.free {
                free_convolve_circle_on(&mu, &nu, &grid)?
            } else {
                boolean_convolve_circle_on(&mu, &nu, &grid)?
            }
        }
        Space::Halfline => {
            let ((p, q), (r, s)) = (halfline_support(&mu), halfline_support(&nu));
            if a.op.free {
                free_convolve_halfline_on(&mu, &nu, &span_grid(p * r, q * s, n))?
            } else {
                boolean_convolve_halfline_on(&mu, &nu, &span_grid(p * r / 4.0, 4.0 * q * s, n))?
            }
        }
    };
    finish(ctx, c, a.out.as_deref(), a.measure_out.as_deref())
}

fn cmd_power(ctx: &Ctx, a: &PowerArgs) -> Result<()> {
    let mu = read_measure(&a.input)?;
    if a.k == 0 {
        return Err(invalid("k", "power must be at least 1"));
    }
    let n = ctx.config.grid;
    let grid = match mu.space {
        Space::Circle => circle_grid(n),
        Space::Halfline => {
            let (lo, hi) = halfline_support(&mu);
            let k = a.k as i32;
            if a.op.free {
                span_grid(lo.powi(k), hi.powi(k), n)
            } else {
                span_grid(lo.powi(k) / 4.0, 4.0 * hi.powi(k), n)
            }
        }
    };
    let c = if a.op.free {
        free_power_on(&mu, a.k, &grid)?
    } else {
        boolean_power_on(&mu, a.k, &grid)?
    };
    finish(ctx, c, a.out.as_deref(), a.measure_out.as_deref())
}

#[derive(Serialize)]
struct EntropyOut {
    label: String,
    /// Number, or the string "-inf".
    entropy: serde_json::Value,
    terms: usize,
    tail_bound: f64,
    reduced_precision: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadrature: Option<serde_json::Value>,
}

fn ext(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!(if v < 0.0 { "-inf" } else { "inf" })
    }
}

fn cmd_entropy(ctx: &Ctx, a: &EntropyArgs) -> Result<()> {
    let n = ctx.config.measure_nodes;
    let family = |t: f64| -> Result<Measure> {
        match a.law {
            Some(FlowLaw::Lambda) => lambda_measure(t, n),
            _ => Ok(Measure::haar(n)),
        }
    };
    if let Some(times) = &a.times {
        if a.law.is_none() {
            return Err(invalid("law", "--times needs --law"));
        }
        let flow = entropy_of_flow(family, times)?;
        return emit(a.out.as_deref(), &flow.to_csv());
    }
    let mu = match (&a.input, a.law) {
        (Some(p), _) => read_measure(p)?,
        (None, Some(FlowLaw::Lambda)) => family(require_t(a.t)?)?,
        (None, Some(FlowLaw::Haar)) => Measure::haar(n),
        (None, None) => return Err(invalid("input", "give a measure file or --law")),
    };
    let e: Entropy = free_entropy(&mu)?;
    let quadrature = match a.quadrature {
        Some(m) => Some(ext(free_entropy_quadrature(&mu, m)?)),
        None => None,
    };
    let out = EntropyOut {
        label: mu.label.clone(),
        entropy: ext(e.value),
        terms: e.terms,
        tail_bound: e.tail_bound,
        reduced_precision: e.reduced_precision,
        quadrature,
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    emit(a.out.as_deref(), &text)
}

fn n_list(a: &ExperimentArgs) -> Result<Vec<usize>> {
    if let Some(ns) = &a.ns {
        let mut v = ns.clone();
        v.sort_unstable();
        v.dedup();
        return Ok(v);
    }
    if a.nmax == 0 {
        return Err(invalid("nmax", "must be at least 1"));
    }
    let mut v = vec![];
    let mut n = 8;
    while n <= a.nmax {
        v.push(n);
        n *= 2;
    }
    if v.is_empty() {
        v.push(a.nmax);
    }
    Ok(v)
}

fn cmd_experiment(ctx: &Ctx, a: &ExperimentArgs) -> Result<()> {
    let ns = n_list(a)?;
    let opts = |default: Option<f64>| ctx.config.experiment_options(a.threshold.or(default));
    let out: ExperimentOutput = match a.experiment {
        Experiment::Haar => {
            if a.mean.is_nan() || a.mean.abs() >= 1.0 {
                return Err(invalid("mean", "must lie in (-1, 1)"));
            }
            let p = 0.5 * (1.0 + a.mean);
            let mut atoms = vec![];
            if p > 0.0 {
                atoms.push(Atom { pos: 0.0, mass: p });
            }
            if p < 1.0 {
                atoms.push(Atom { pos: PI, mass: 1.0 - p });
            }
            let mu = Measure::atomic(Space::Circle, atoms, format!("two-atom(mean {})", a.mean))?;
            run_haar_superconvergence(&mu, &ns, &opts(Some(1e-2))?)?
        }
        Experiment::Lambda => {
            let (family, default) = match a.family {
                Family::TwoAtom => (LambdaFamily::TwoAtom, None),
                Family::Exact => (LambdaFamily::Exact, Some(5e-3)),
            };
            run_lambda_superconvergence(a.t, &ns, family, &opts(default)?)?
        }
        Experiment::Chi => run_chi_superconvergence(a.t, &ns, a.epsilon, &opts(Some(1e-3))?)?,
        Experiment::Bp => {
            let sigma = SigmaMeasure::atom(1.0, a.sigma_mass.unwrap_or(a.t / 2.0));
            run_bercovici_pata(a.gamma, &sigma, &ns, None, &opts(Some(1e-2))?)?
        }
        Experiment::Entropy => {
            let o = opts(None)?;
            let flow = run_lambda_superconvergence(a.t, &ns, LambdaFamily::TwoAtom, &o)?;
            let target = lambda_measure(a.t, ctx.config.measure_nodes)?;
            let mut e = run_entropy_convergence(&flow.measures, &target)?;
            e.profiles = flow.profiles;
            e
        }
    };
    let dir = a.out.clone().unwrap_or_else(|| ctx.config.output_dir.clone());
    out.write_to(&dir)?;
    let v = &out.report.verdict;
    println!(
        "{}: {} (final sup distance {:e}, {} records, report {})",
        out.report.name,
        v.verdict,
        v.final_sup_distance,
        out.report.records.len(),
        dir.join(format!("{}.json", out.report.name)).display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli.global)?;
    config.apply_threads();
    let ctx = Ctx {
        config,
        diagnostics: cli.global.diagnostics.clone(),
    };
    match &cli.command {
        Command::Density(a) => cmd_density(&ctx, a),
        Command::Convolve(a) => cmd_convolve(&ctx, a),
        Command::Power(a) => cmd_power(&ctx, a),
        Command::Entropy(a) => cmd_entropy(&ctx, a),
        Command::Experiment(a) => cmd_experiment(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
