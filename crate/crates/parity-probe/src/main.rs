//! `parity-probe`: audits binary decision data for group-fairness violations
//! and quantifies how much a non-finding is worth.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use parity_probe::audit::{
    run_audit, AuditConfig, MetricSelection, MonteCarloSettings, Verdict,
};
use parity_probe::cohort::ColumnBindings;
use parity_probe::power::{
    analytic_beta, exact_beta, min_detectable_disparity, min_sample_size, monte_carlo_beta,
    sweep, McSettings, PowerMethod, PowerQuery, SweepAxis, SweepRow, SweepSpec,
};
use parity_probe::ztest::{Sidedness, TestConfig, VarianceEstimator};
use parity_probe::{Error, Probability, RandomSource};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "parity-probe",
    version,
    about = "Statistical bias audits with explicit type-2 error accounting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit a CSV of decisions and emit a JSON report with a verdict
    Audit(AuditArgs),
    /// Type-2 error of the z-test for hypothesized rates and sizes
    Power(PowerArgs),
    /// Minimum total sample size meeting a type-2 error target
    Samplesize(SampleSizeArgs),
    /// Minimum detectable disparity at given sizes and error budgets
    Mde(MdeArgs),
    /// Beta over a grid of sample sizes or protected rates, as CSV
    Sweep(SweepArgs),
    /// Generate a synthetic decision CSV with known true rates
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SidednessArg {
    #[value(name = "two-sided")]
    TwoSided,
    #[value(name = "one-sided-protected-lower")]
    ProtectedLower,
    #[value(name = "one-sided-protected-higher")]
    ProtectedHigher,
}

impl From<SidednessArg> for Sidedness {
    fn from(v: SidednessArg) -> Self {
        match v {
            SidednessArg::TwoSided => Sidedness::TwoSided,
            SidednessArg::ProtectedLower => Sidedness::ProtectedLower,
            SidednessArg::ProtectedHigher => Sidedness::ProtectedHigher,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VarianceArg {
    Pooled,
    Unpooled,
}

impl From<VarianceArg> for VarianceEstimator {
    fn from(v: VarianceArg) -> Self {
        match v {
            VarianceArg::Pooled => VarianceEstimator::Pooled,
            VarianceArg::Unpooled => VarianceEstimator::Unpooled,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    #[value(name = "dp-difference")]
    DpDifference,
    #[value(name = "dp-ratio")]
    DpRatio,
    #[value(name = "equalized-odds")]
    EqualizedOdds,
}

impl From<MetricArg> for MetricSelection {
    fn from(v: MetricArg) -> Self {
        match v {
            MetricArg::DpDifference => MetricSelection::DpDifference,
            MetricArg::DpRatio => MetricSelection::DpRatio,
            MetricArg::EqualizedOdds => MetricSelection::EqualizedOdds,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Analytic,
    #[value(name = "monte-carlo")]
    MonteCarlo,
    Exact,
}

#[derive(Args)]
struct TestArgs {
    /// Significance level (type-1 error budget); no default by design
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "two-sided")]
    sidedness: SidednessArg,
    #[arg(long, value_enum, default_value = "pooled")]
    variance: VarianceArg,
}

impl TestArgs {
    fn build(&self) -> Result<TestConfig, Error> {
        TestConfig::new(self.alpha, self.sidedness.into(), self.variance.into())
    }
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    group_col: String,
    #[arg(long)]
    outcome_col: String,
    #[arg(long)]
    truth_col: Option<String>,
    #[arg(long)]
    protected: String,
    #[arg(long)]
    reference: String,
    #[arg(long, value_enum)]
    metric: MetricArg,
    #[command(flatten)]
    test: TestArgs,
    /// Minimum disparity of concern (epsilon); no default by design
    #[arg(long)]
    epsilon: f64,
    /// Largest acceptable type-2 error for detecting epsilon; no default by design
    #[arg(long)]
    max_beta: f64,
    /// Also run a Monte Carlo power diagnostic
    #[arg(long)]
    monte_carlo: bool,
    #[arg(long, default_value_t = 100_000)]
    replicates: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long)]
    p_ref: f64,
    #[arg(long)]
    p_prot: f64,
    #[arg(long)]
    n_ref: u64,
    #[arg(long)]
    n_prot: u64,
    #[command(flatten)]
    test: TestArgs,
    #[arg(long, value_enum, default_value = "analytic")]
    method: MethodArg,
    #[arg(long, default_value_t = 100_000)]
    replicates: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleSizeArgs {
    #[arg(long)]
    p_ref: f64,
    #[arg(long)]
    p_prot: f64,
    #[arg(long)]
    target_beta: f64,
    /// n_ref : n_prot split of the total
    #[arg(long, default_value_t = 1.0)]
    allocation_ratio: f64,
    #[command(flatten)]
    test: TestArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MdeArgs {
    #[arg(long)]
    base_rate: f64,
    #[arg(long)]
    n_ref: u64,
    #[arg(long)]
    n_prot: u64,
    #[arg(long)]
    target_beta: f64,
    #[command(flatten)]
    test: TestArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    #[value(name = "total-n")]
    TotalN,
    #[value(name = "protected-rate")]
    ProtectedRate,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Grid as lo:hi:step or a comma-separated list
    #[arg(long)]
    grid: String,
    #[arg(long)]
    p_ref: f64,
    /// Fixed protected rate (total-n axis)
    #[arg(long)]
    p_prot: Option<f64>,
    /// Fixed group sizes (protected-rate axis)
    #[arg(long)]
    n_ref: Option<u64>,
    #[arg(long)]
    n_prot: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    allocation_ratio: f64,
    #[command(flatten)]
    test: TestArgs,
    #[arg(long, value_enum, default_value = "analytic")]
    method: MethodArg,
    #[arg(long, default_value_t = 100_000)]
    replicates: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    p_ref: f64,
    #[arg(long)]
    p_prot: f64,
    #[arg(long)]
    n_ref: u64,
    #[arg(long)]
    n_prot: u64,
    #[arg(long, default_value = "group")]
    group_col: String,
    #[arg(long, default_value = "outcome")]
    outcome_col: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap distinguishes help/version from real usage errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_USAGE);
            }
            print!("{e}");
            return ExitCode::from(EXIT_OK);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}

// Usage errors come from arguments; data errors from the input file.
fn classify(e: &Error) -> u8 {
    match e {
        Error::Csv(_)
        | Error::CsvRow { .. }
        | Error::MissingColumn(_)
        | Error::TooFewGroups
        | Error::UnknownGroup(_)
        | Error::InvalidCounts { .. }
        | Error::InconsistentStrata { .. }
        | Error::DuplicateGroup(_)
        | Error::MissingTruth(_)
        | Error::EmptyStratum { .. }
        | Error::UndefinedRatio
        | Error::DegenerateVariance => EXIT_DATA,
        _ => EXIT_USAGE,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Audit(args) => cmd_audit(args),
        Command::Power(args) => cmd_power(args),
        Command::Samplesize(args) => cmd_samplesize(args),
        Command::Mde(args) => cmd_mde(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("PARITY_PROBE_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(0)
}

fn prob(v: f64) -> Result<Probability, Error> {
    Probability::new(v)
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| Error::Csv(e.to_string())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Csv(e.to_string()))
        }
    }
}

fn cmd_audit(args: AuditArgs) -> Result<u8, Error> {
    let config = AuditConfig {
        columns: ColumnBindings {
            group: args.group_col,
            outcome: args.outcome_col,
            truth: args.truth_col,
        },
        reference: args.reference,
        protected: args.protected,
        metric: args.metric.into(),
        test: args.test.build()?,
        relevant_disparity: args.epsilon,
        max_type2_error: prob(args.max_beta)?,
        monte_carlo: args.monte_carlo.then(|| MonteCarloSettings {
            replicates: args.replicates,
            seed: resolve_seed(args.seed),
        }),
    };
    let report = run_audit(&args.input, &config)?;
    emit(&args.out, &(report.to_json_pretty() + "\n"))?;
    Ok(match report.verdict {
        Verdict::CompliantAdequatePower => EXIT_OK,
        Verdict::InconclusiveLowPower | Verdict::InconclusiveDegenerate => EXIT_INCONCLUSIVE,
        Verdict::ViolationDetected => EXIT_VIOLATION,
    })
}

fn cmd_power(args: PowerArgs) -> Result<u8, Error> {
    let query = PowerQuery::new(
        prob(args.p_ref)?,
        prob(args.p_prot)?,
        args.n_ref,
        args.n_prot,
        args.test.build()?,
    )?;
    let estimate = match args.method {
        MethodArg::Analytic => analytic_beta(&query)?,
        MethodArg::Exact => exact_beta(&query)?,
        MethodArg::MonteCarlo => {
            monte_carlo_beta(&query, args.replicates, &RandomSource::new(resolve_seed(args.seed)))?
        }
    };
    let body = serde_json::json!({
        "query": query,
        "beta": estimate.beta.value(),
        "power": estimate.power(),
        "estimate": estimate,
    });
    emit(&args.out, &(serde_json::to_string_pretty(&body).unwrap() + "\n"))?;
    Ok(EXIT_OK)
}

fn cmd_samplesize(args: SampleSizeArgs) -> Result<u8, Error> {
    let config = args.test.build()?;
    let total = min_sample_size(
        prob(args.p_ref)?,
        prob(args.p_prot)?,
        prob(args.target_beta)?,
        args.allocation_ratio,
        &config,
    )?;
    let r = args.allocation_ratio;
    let n_ref = ((total as f64) * r / (1.0 + r)).ceil() as u64;
    let n_prot = total - n_ref;
    let achieved = analytic_beta(&PowerQuery::new(
        prob(args.p_ref)?,
        prob(args.p_prot)?,
        n_ref.max(1),
        n_prot.max(1),
        config,
    )?)?;
    let body = serde_json::json!({
        "total_n": total,
        "n_ref": n_ref,
        "n_prot": n_prot,
        "target_beta": args.target_beta,
        "achieved_beta": achieved.beta.value(),
    });
    emit(&args.out, &(serde_json::to_string_pretty(&body).unwrap() + "\n"))?;
    Ok(EXIT_OK)
}

fn cmd_mde(args: MdeArgs) -> Result<u8, Error> {
    let config = args.test.build()?;
    let delta = min_detectable_disparity(
        prob(args.base_rate)?,
        args.n_ref,
        args.n_prot,
        prob(args.target_beta)?,
        &config,
    )?;
    let body = serde_json::json!({
        "base_rate": args.base_rate,
        "n_ref": args.n_ref,
        "n_prot": args.n_prot,
        "target_beta": args.target_beta,
        "min_detectable_disparity": delta,
    });
    emit(&args.out, &(serde_json::to_string_pretty(&body).unwrap() + "\n"))?;
    Ok(EXIT_OK)
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::InvalidGrid);
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let (lo, hi, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if !(step > 0.0 && hi >= lo) {
            return Err(Error::InvalidGrid);
        }
        let count = ((hi - lo) / step).round() as u64 + 1;
        return Ok((0..count).map(|i| lo + step * i as f64).collect());
    }
    spec.split(',').map(parse).collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, Error> {
    let grid = parse_grid(&args.grid)?;
    let config = args.test.build()?;
    let method = match args.method {
        MethodArg::Analytic => PowerMethod::Analytic,
        MethodArg::MonteCarlo => PowerMethod::MonteCarlo,
        MethodArg::Exact => PowerMethod::Exact,
    };
    let missing = |flag: &str| Error::Csv(format!("--{flag} is required for this axis"));
    let (axis, p_prot, n_ref, n_prot) = match args.axis {
        AxisArg::TotalN => (
            SweepAxis::TotalSampleSize,
            args.p_prot.ok_or_else(|| missing("p-prot"))?,
            1,
            1,
        ),
        AxisArg::ProtectedRate => (
            SweepAxis::ProtectedRate,
            args.p_prot.unwrap_or(0.5),
            args.n_ref.ok_or_else(|| missing("n-ref"))?,
            args.n_prot.ok_or_else(|| missing("n-prot"))?,
        ),
    };
    let spec = SweepSpec {
        axis,
        grid,
        p_ref: prob(args.p_ref)?,
        p_prot: prob(p_prot)?,
        n_ref,
        n_prot,
        allocation_ratio: args.allocation_ratio,
        config,
        method,
        monte_carlo: matches!(method, PowerMethod::MonteCarlo).then(|| McSettings {
            replicates: args.replicates,
            source: RandomSource::new(resolve_seed(args.seed)),
        }),
    };
    let rows = sweep(&spec)?;
    emit(&args.out, &render_sweep_csv(&rows))?;
    Ok(EXIT_OK)
}

fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("axis,axis_value,n_ref,n_prot,p_ref,p_prot,alpha,sidedness,variance,method,beta\n");
    for row in rows {
        let axis = match row.axis {
            SweepAxis::TotalSampleSize => "total-sample-size",
            SweepAxis::ProtectedRate => "protected-rate",
        };
        let sidedness = match row.sidedness {
            Sidedness::TwoSided => "two-sided",
            Sidedness::ProtectedLower => "one-sided-protected-lower",
            Sidedness::ProtectedHigher => "one-sided-protected-higher",
        };
        let variance = match row.variance {
            VarianceEstimator::Pooled => "pooled",
            VarianceEstimator::Unpooled => "unpooled",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            axis,
            sig6(row.axis_value),
            row.n_ref,
            row.n_prot,
            sig6(row.p_ref),
            sig6(row.p_prot),
            sig6(row.alpha),
            sidedness,
            variance,
            row.method.label(),
            sig6(row.beta),
        ));
    }
    out
}

// 6 significant digits, plain decimal notation
fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, Error> {
    use parity_probe::cohort::{write_csv, DecisionRecord};
    use parity_probe::power::generate_cohort;

    let table = generate_cohort(
        prob(args.p_ref)?,
        prob(args.p_prot)?,
        args.n_ref,
        args.n_prot,
        &RandomSource::new(resolve_seed(args.seed)),
    )?;
    let mut records = Vec::new();
    for group in table.groups() {
        for i in 0..group.n {
            records.push(DecisionRecord::new(group.group.clone(), i < group.k, None)?);
        }
    }
    let bindings = ColumnBindings {
        group: args.group_col,
        outcome: args.outcome_col,
        truth: None,
    };
    let mut buf = Vec::new();
    write_csv(&mut buf, &records, &bindings)?;
    emit(&args.out, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    Ok(EXIT_OK)
}
