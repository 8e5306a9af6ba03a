mod output;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use wfusion::cavity::{dispersive_error_with, magic_time, CavityParams, DEFAULT_STEPS_PER_PERIOD};
use wfusion::pipeline::{
    expected_resources, feasibility_report, simulate_pipeline, write_sweep_csv, StrategyConfig, SweepRow,
};
use wfusion::protocol::{fuse_three, fuse_two, BranchReport, Protocol};

use output::{CliError, Envelope, Payload};

/// W-state fusion in cavity QED: branch tables, dispersive checks and
/// resource estimates.
#[derive(Debug, Parser)]
#[command(name = "wfusion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse |W_n> and |W_m> through one cavity with an ancilla.
    Fuse2(Fuse2Args),
    /// Fuse |W_n>, |W_m> and |W_t> through one cavity.
    Fuse3(Fuse3Args),
    /// Compare the full atom-cavity dynamics with the effective propagator.
    Validate(ValidateArgs),
    /// Expected Bell-pair cost of growing a W state by repeated fusion.
    Pipeline(PipelineArgs),
    /// Exact and sampled costs for a range of target sizes, as CSV.
    Sweep(SweepArgs),
    /// Interaction time against decay times for given coupling.
    Feasibility(FeasibilityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Primitive {
    Two,
    Three,
}

impl From<Primitive> for Protocol {
    fn from(p: Primitive) -> Protocol {
        match p {
            Primitive::Two => Protocol::TwoFusion,
            Primitive::Three => Protocol::ThreeFusion,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct Fuse2Args {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Dimensionless interaction strength; decimal or `2pi/9`.
    #[arg(long, default_value = "2pi/9")]
    lambda_t: String,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct Fuse3Args {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    t: usize,
    #[arg(long, default_value = "2pi/9")]
    lambda_t: String,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct ValidateArgs {
    /// Comma-separated detuning ratios, each at least 1.
    #[arg(long, value_delimiter = ',', required = true)]
    delta_over_g: Vec<f64>,
    /// Photon number cutoff.
    #[arg(long, default_value_t = 3)]
    nmax: usize,
    /// RK4 steps per detuning period 2π/δ.
    #[arg(long, default_value_t = DEFAULT_STEPS_PER_PERIOD)]
    dt_divisor: usize,
    /// Coupling g/2π in kHz.
    #[arg(long, default_value_t = 24.0)]
    g_khz: f64,
    #[arg(long, default_value = "2pi/9")]
    lambda_t: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct StrategyArgs {
    #[arg(long, value_enum, default_value = "two")]
    primitive: Primitive,
    /// Keep smaller W states from failed attempts.
    #[arg(long)]
    recycle: bool,
    /// Abandon a run after this many attempts.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_rounds: Option<u32>,
}

#[derive(Debug, Args, Serialize)]
struct PipelineArgs {
    #[arg(long)]
    target: usize,
    #[command(flatten)]
    #[serde(flatten)]
    strategy: StrategyArgs,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solve the expectation exactly instead of sampling.
    #[arg(long)]
    exact: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    /// Comma-separated target sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    strategy: StrategyArgs,
    /// Sampled runs per target; 0 skips sampling.
    #[arg(long, default_value_t = 0)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct FeasibilityArgs {
    #[arg(long, default_value_t = 24.0)]
    g_khz: f64,
    #[arg(long, default_value_t = 10.0)]
    delta_over_g: f64,
    #[arg(long, default_value_t = 3e-2)]
    atomic_decay_s: f64,
    #[arg(long, default_value_t = 3e-2)]
    cavity_decay_s: f64,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

/// Accepts a decimal or the exact token `2pi/9`.
fn parse_lambda_t(s: &str) -> Result<f64, CliError> {
    let t = s.trim();
    let value = match t {
        "2pi/9" | "2π/9" => magic_time(),
        _ => t.parse::<f64>().map_err(|_| CliError::usage(format!("cannot parse λt {s:?}")))?,
    };
    if !(value.is_finite() && value >= 0.0) {
        return Err(CliError::usage(format!("λt must be finite and non-negative, got {s}")));
    }
    Ok(value)
}

fn g_from_khz(g_khz: f64) -> f64 {
    2.0 * PI * g_khz * 1e3
}

fn parameters<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn branch_payload(report: &BranchReport, format: Format) -> Payload {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf, true).expect("writing to memory");
            Payload::Text(String::from_utf8(buf).expect("utf-8 csv"))
        }
        Format::Json => {
            let mut results = serde_json::to_value(report).expect("report serializes");
            results["success_probability"] = json!(report.success_probability());
            results["total_probability"] = json!(report.total_probability());
            Payload::Json(results)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fuse2(args) => {
            if args.n < 2 || args.m < 2 {
                return Err(CliError::usage("--n and --m must be at least 2"));
            }
            let report = fuse_two(args.n, args.m, parse_lambda_t(&args.lambda_t)?)?;
            Envelope::new("fuse2", parameters(&args), None)
                .emit(branch_payload(&report, args.output.format), args.output.out.as_deref())
        }
        Command::Fuse3(args) => {
            if args.n < 2 || args.m < 2 || args.t < 2 {
                return Err(CliError::usage("--n, --m and --t must be at least 2"));
            }
            let report = fuse_three(args.n, args.m, args.t, parse_lambda_t(&args.lambda_t)?)?;
            Envelope::new("fuse3", parameters(&args), None)
                .emit(branch_payload(&report, args.output.format), args.output.out.as_deref())
        }
        Command::Validate(args) => {
            let lambda_t = parse_lambda_t(&args.lambda_t)?;
            if let Some(r) = args.delta_over_g.iter().find(|r| !(**r >= 1.0 && r.is_finite())) {
                return Err(CliError::usage(format!("--delta-over-g values must be at least 1, got {r}")));
            }
            let g = g_from_khz(args.g_khz);
            let rows = args
                .delta_over_g
                .iter()
                .map(|&r| {
                    let params = CavityParams::new(g, r * g, args.nmax)?;
                    dispersive_error_with(&params, lambda_t, args.dt_divisor)
                })
                .collect::<wfusion::Result<Vec<_>>>()?;
            let payload = match args.format {
                Format::Csv => {
                    let mut text = String::from("delta_over_g,atomic_fidelity,photon_leakage\n");
                    for r in &rows {
                        text.push_str(&format!(
                            "{},{},{}\n",
                            output::number(r.delta_over_g),
                            output::number(r.atomic_fidelity),
                            output::number(r.photon_leakage)
                        ));
                    }
                    Payload::Text(text)
                }
                Format::Json => Payload::Json(serde_json::to_value(&rows).expect("rows serialize")),
            };
            Envelope::new("validate", parameters(&args), None).emit(payload, args.out.as_deref())
        }
        Command::Pipeline(args) => {
            let strategy = StrategyConfig::new(args.strategy.primitive.into(), args.target, args.strategy.recycle)?
                .with_max_rounds(args.strategy.max_rounds);
            let seed = (!args.exact).then_some(args.seed);
            let payload = match (args.exact, args.output.format) {
                (true, Format::Json) => Payload::Json(json!({
                    "strategy": strategy,
                    "expected_cost": expected_resources(&strategy)?,
                })),
                (false, Format::Json) => {
                    if args.trials == 0 {
                        return Err(CliError::usage("--trials must be at least 1"));
                    }
                    Payload::Json(
                        serde_json::to_value(simulate_pipeline(&strategy, args.trials, args.seed)?)
                            .expect("stats serialize"),
                    )
                }
                (exact, Format::Csv) => {
                    let trials = if exact { 0 } else { args.trials };
                    let row = SweepRow::compute(&strategy, trials, args.seed)?;
                    let mut buf = Vec::new();
                    write_sweep_csv(&mut buf, &[row]).expect("writing to memory");
                    Payload::Text(String::from_utf8(buf).expect("utf-8 csv"))
                }
            };
            Envelope::new("pipeline", parameters(&args), seed).emit(payload, args.output.out.as_deref())
        }
        Command::Sweep(args) => {
            let rows = args
                .targets
                .iter()
                .map(|&target| {
                    let s = StrategyConfig::new(args.strategy.primitive.into(), target, args.strategy.recycle)?
                        .with_max_rounds(args.strategy.max_rounds);
                    SweepRow::compute(&s, args.trials, args.seed)
                })
                .collect::<wfusion::Result<Vec<_>>>()?;
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &rows).expect("writing to memory");
            Envelope::new("sweep", parameters(&args), Some(args.seed))
                .emit(Payload::Text(String::from_utf8(buf).expect("utf-8 csv")), args.out.as_deref())
        }
        Command::Feasibility(args) => {
            let g = g_from_khz(args.g_khz);
            let report = feasibility_report(g, args.delta_over_g * g, args.atomic_decay_s, args.cavity_decay_s)?;
            let results = serde_json::to_value(report).expect("report serializes");
            Envelope::new("feasibility", parameters(&args), None).emit(Payload::Json(results), args.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
