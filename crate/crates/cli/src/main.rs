use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use conjopt_core::oracle::{brute_force_form_roots, brute_force_multilinear_roots, multistart_reference, ContinuousSet, Objective};
use conjopt_core::polarization::{polarization_residual, polarization_sample};
use conjopt_core::sampling::{sample_sphere, tail_bound_roots, tail_bound_sphere};
use conjopt_core::{
    generate_instance, run_experiment, solve_form, solve_lm, solve_ls, BaseCaseStrategy, CVector, Complex64, ExperimentConfig,
    FormMode, GSolveOptions, Instance, InstanceKind, RandomSource, RootOrder,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "conjopt", version, about = "Approximation algorithms for complex multilinear and conjugate forms")]
struct Cli {
    /// Worker threads (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo check of the tail bounds.
    VerifyBounds(VerifyBounds),
    /// Exact (finite m) or sampled (m = inf) check of the polarization identity.
    VerifyPolarization(VerifyPolarization),
    /// Randomized solver for multilinear forms.
    SolveMultilinear(SolveMultilinear),
    /// Solver for real-valued conjugate forms.
    SolveForm(SolveForm),
    /// Enumeration or multi-start reference optimum.
    Oracle(OracleCmd),
    /// Random instance generator.
    Gen(Gen),
    /// Seeded certification experiment from a JSON config.
    Bench(Bench),
}

#[derive(Clone, Copy, ValueEnum)]
enum Constraint {
    Roots,
    Circle,
    Sphere,
}

#[derive(Clone, Copy, ValueEnum)]
enum VectorKind {
    Ones,
    E1,
    Random,
}

#[derive(Args)]
struct Output {
    /// Write JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyBounds {
    /// Root order, `inf` for the circle; omit for the sphere bound.
    #[arg(long)]
    m: Option<RootOrder>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = VectorKind::Ones)]
    vector: VectorKind,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct VerifyPolarization {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    m: RootOrder,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples per instance when m = inf.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct SolveMultilinear {
    #[arg(long, value_enum)]
    model: Constraint,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long)]
    trials: Option<u64>,
    /// exact, alternating or power-svd.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct SolveForm {
    #[arg(long, value_enum)]
    constraint: Constraint,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value = "auto")]
    mode: FormMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct OracleCmd {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    constraint: Constraint,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, default_value_t = 10_000)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct Gen {
    /// tensor, form_squarefree, form_convex or form_general.
    #[arg(long)]
    kind: InstanceKind,
    #[arg(long, default_value_t = 0)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    d: usize,
    /// Comma-separated slot sizes for tensors.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Bench {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    out: Output,
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn finite_m(m: Option<u32>) -> Result<u32> {
    m.context("--m is required for the roots constraint")
}

fn order_of(constraint: Constraint, m: Option<u32>) -> Result<Option<RootOrder>> {
    Ok(match constraint {
        Constraint::Roots => Some(RootOrder::Finite(finite_m(m)?)),
        Constraint::Circle => Some(RootOrder::Infinite),
        Constraint::Sphere => None,
    })
}

fn verify_bounds(a: VerifyBounds) -> Result<()> {
    let src = RandomSource::new(a.seed);
    let vector: Vec<Complex64> = match a.vector {
        VectorKind::Ones => vec![Complex64::new(1.0, 0.0); a.n],
        VectorKind::E1 => CVector::basis(a.n, 1).0,
        VectorKind::Random => sample_sphere(a.n, &mut src.derive(0xa).substream(0)).0,
    };
    let report = match a.m {
        Some(order) => tail_bound_roots(&vector, order, a.delta, a.samples, &src)?,
        None => tail_bound_sphere(&vector, a.gamma, a.samples, &src)?,
    };
    emit(&report, a.out.output.as_deref())
}

#[derive(Serialize)]
struct PolarizationReport {
    n: usize,
    d: usize,
    m: RootOrder,
    instances: usize,
    seed: u64,
    /// Relative residuals (finite m) or standardized deviations (m = inf).
    values: Vec<f64>,
    max_value: f64,
    pass: bool,
}

fn verify_polarization(a: VerifyPolarization) -> Result<()> {
    let src = RandomSource::new(a.seed);
    let values = (0..a.instances)
        .map(|i| -> Result<f64> {
            let mut rng = src.substream(i as u64);
            let g = match generate_instance(InstanceKind::FormGeneral, &[], a.n, a.d, 1.0, &mut rng)? {
                Instance::Form(g) => g.to_tensor(),
                Instance::Tensor(_) => unreachable!("form kind"),
            };
            let xs: Vec<CVector> = (0..a.d).map(|_| sample_sphere(a.n, &mut rng)).collect();
            let ys: Vec<CVector> = (0..a.d).map(|_| sample_sphere(a.n, &mut rng)).collect();
            Ok(match a.m {
                RootOrder::Finite(m) => polarization_residual(&g, &xs, &ys, m)?,
                RootOrder::Infinite => polarization_sample(&g, &xs, &ys, a.m, a.samples, &mut rng)?,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_value = values.iter().copied().fold(0.0, f64::max);
    let limit = if a.m.is_infinite() { 4.0 } else { 1e-10 };
    let report = PolarizationReport {
        n: a.n,
        d: a.d,
        m: a.m,
        instances: a.instances,
        seed: a.seed,
        values,
        max_value,
        pass: max_value <= limit,
    };
    emit(&report, a.out.output.as_deref())
}

fn solve_multilinear(a: SolveMultilinear) -> Result<()> {
    let Instance::Tensor(f) = read_instance(&a.input)? else {
        bail!("{} does not hold a tensor", a.input.display());
    };
    let strategy = a.strategy.as_deref().map(BaseCaseStrategy::parse).transpose()?;
    let src = RandomSource::new(a.seed);
    let report = match order_of(a.model, a.m)? {
        Some(order) => solve_lm(&f, order, a.delta, a.epsilon, a.trials, strategy, &src)?,
        None => solve_ls(&f, a.gamma, a.epsilon, a.trials, &src)?,
    };
    emit(&report, a.out.output.as_deref())
}

fn solve_form_cmd(a: SolveForm) -> Result<()> {
    let Instance::Form(g) = read_instance(&a.input)? else {
        bail!("{} does not hold a form", a.input.display());
    };
    let opts = GSolveOptions {
        delta: a.delta,
        epsilon: a.epsilon,
        gamma: a.gamma,
        trials: a.trials,
        ..GSolveOptions::default()
    };
    let report = solve_form(&g, order_of(a.constraint, a.m)?, a.mode, &opts, &RandomSource::new(a.seed))?;
    emit(&report, a.out.output.as_deref())
}

fn oracle_cmd(a: OracleCmd) -> Result<()> {
    let instance = read_instance(&a.input)?;
    let src = RandomSource::new(a.seed);
    let set = match a.constraint {
        Constraint::Circle => ContinuousSet::Circle,
        _ => ContinuousSet::Sphere,
    };
    let result = match (&instance, a.constraint) {
        (Instance::Form(g), Constraint::Roots) => brute_force_form_roots(g, finite_m(a.m)?)?,
        (Instance::Tensor(f), Constraint::Roots) => brute_force_multilinear_roots(f, finite_m(a.m)?)?,
        (Instance::Form(g), _) => multistart_reference(Objective::Form(g), set, a.starts, &src)?,
        (Instance::Tensor(f), _) => multistart_reference(Objective::Multilinear(f), set, a.starts, &src)?,
    };
    emit(&result, a.out.output.as_deref())
}

fn gen(a: Gen) -> Result<()> {
    let mut rng = RandomSource::new(a.seed).substream(0);
    let instance = generate_instance(a.kind, &a.dims, a.n, a.d, a.density, &mut rng)?;
    emit(&instance, a.out.as_deref())
}

fn bench(a: Bench) -> Result<bool> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let config: ExperimentConfig = serde_json::from_str(&text).context("parsing experiment config")?;
    let result = run_experiment(&config)?;
    eprintln!(
        "{:?}: {} rows, {} certified, {} failures (allowed {}), mean quotient {:.4}",
        result.summary.model,
        result.summary.count,
        result.summary.certified,
        result.summary.failures,
        result.summary.allowed_failures,
        result.summary.mean_quotient
    );
    emit(&result, a.out.output.as_deref())?;
    Ok(result.summary.within_budget)
}

fn run(cli: Cli) -> Result<bool> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    match cli.command {
        Command::VerifyBounds(a) => verify_bounds(a)?,
        Command::VerifyPolarization(a) => verify_polarization(a)?,
        Command::SolveMultilinear(a) => solve_multilinear(a)?,
        Command::SolveForm(a) => solve_form_cmd(a)?,
        Command::Oracle(a) => oracle_cmd(a)?,
        Command::Gen(a) => gen(a)?,
        Command::Bench(a) => return bench(a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
