use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use avgnet::graph::GraphSnapshot;
use avgnet::quantized::converse_scenario;
use avgnet::weights::WeightMatrix;
use avgnet_cli::config::{InitialCondition, Protocol, ScenarioConfig, TopologySpec};
use avgnet_cli::output::{report_json, resolve_output, write_execution, write_text, OUT_DIR_ENV};
use avgnet_cli::sweep::{sweep, sweep_csv, SweepAxis};
use avgnet_cli::verify::{verify_assumptions, verify_matrix, AssumptionsInput};
use avgnet_cli::{execute, CliError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "avgnet",
    version,
    about = "Distributed averaging simulations and assumption checks"
)]
struct Cli {
    /// Directory for relative output paths.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes a trajectory CSV and a JSON report beside it.
    Run(RunArgs),
    /// Run a scenario once per value of one parameter.
    Sweep(SweepArgs),
    /// Check a weight matrix or a sequence against the averaging assumptions.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Simulate the construction whose quantized consensus misses the
    /// average by one half.
    Converse(ConverseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    MatrixSequence,
    EqualNeighbor,
    Balancing,
    Circulant,
    Converse,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::MatrixSequence => Protocol::MatrixSequence,
            ProtocolArg::EqualNeighbor => Protocol::EqualNeighbor,
            ProtocolArg::Balancing => Protocol::Balancing,
            ProtocolArg::Circulant => Protocol::Circulant,
            ProtocolArg::Converse => Protocol::Converse,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (JSON). Flags below override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    /// Periodic graph sequence: {"window": B, "snapshots": [graph, ...]}.
    #[arg(long)]
    graph_seq: Option<PathBuf>,
    /// Initial values: a JSON array, a JSON file, or an integer seed for a
    /// uniform start.
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quantized: bool,
    #[arg(long)]
    q: Option<i64>,
    /// Trajectory CSV; the report goes beside it as `<stem>.report.json`.
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// One of n, window, eta, epsilon, q, seed, max_rounds, eps.
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated values; may be empty.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Vec<f64>,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Validate a matrix file {"n", "eta", "rows"}.
    Matrix { file: PathBuf },
    /// Audit {"window", "snapshots" | "matrices", "x"?} window by window.
    Assumptions { file: PathBuf },
}

#[derive(Args)]
struct ConverseArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    q: i64,
    /// Optional trajectory CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSequenceFile {
    window: usize,
    snapshots: Vec<GraphSnapshot>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn print_json(value: &impl serde::Serialize) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn build_config(args: &RunArgs) -> Result<ScenarioConfig, CliError> {
    let graph_seq: Option<GraphSequenceFile> = args.graph_seq.as_deref().map(read_json).transpose()?;
    let initial = match args.x0.as_deref() {
        None => None,
        Some(s) if s.parse::<u64>().is_ok() => Some((InitialCondition::Uniform, s.parse::<u64>().ok())),
        Some(s) => {
            let values: Vec<f64> = if s.trim_start().starts_with('[') {
                serde_json::from_str(s).map_err(|e| CliError::Input(format!("--x0: {e}")))?
            } else {
                read_json(Path::new(s))?
            };
            Some((InitialCondition::Explicit { values }, None))
        }
    };

    let mut cfg = match (&args.scenario, args.protocol) {
        (Some(path), _) => read_json::<ScenarioConfig>(path)?,
        (None, Some(p)) => {
            let inferred = graph_seq
                .as_ref()
                .and_then(|g| g.snapshots.first().map(GraphSnapshot::n))
                .or(match &initial {
                    Some((InitialCondition::Explicit { values }, _)) => Some(values.len()),
                    _ => None,
                });
            let n = args
                .n
                .or(inferred)
                .ok_or_else(|| CliError::Input("cannot infer n; pass --n, --graph-seq or an explicit --x0".into()))?;
            ScenarioConfig::new(p.into(), n)
        }
        (None, None) => return Err(CliError::Input("pass --scenario or --protocol".into())),
    };

    if let Some(p) = args.protocol {
        cfg.protocol = p.into();
    }
    if let Some(g) = graph_seq {
        cfg.window = g.window;
        cfg.topology = Some(TopologySpec::Periodic { snapshots: g.snapshots });
    }
    if let Some((init, seed)) = initial {
        cfg.initial = Some(init);
        if seed.is_some() {
            cfg.seed = seed;
        }
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        )*};
    }
    set!(n, window, epsilon, max_rounds, stride);
    if args.eta.is_some() {
        cfg.eta = args.eta;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.q.is_some() {
        cfg.q = args.q;
    }
    cfg.quantized |= args.quantized;
    Ok(cfg)
}

fn run_command(cli: Cli) -> Result<ExitCode, CliError> {
    let out_dir = cli.out_dir.as_deref();
    match cli.command {
        Command::Run(args) => {
            let cfg = build_config(&args)?;
            let exec = execute(&cfg)?;
            let csv_path = resolve_output(&args.out, out_dir);
            let json_path = write_execution(&exec, &csv_path)?;
            let report = report_json(&exec);
            print_json(&json!({
                "summary": report["summary"],
                "trajectory": csv_path,
                "report": json_path,
            }))?;
        }
        Command::Sweep(args) => {
            let base: ScenarioConfig = read_json(&args.scenario)?;
            let rows = sweep(&base, args.axis, &args.values);
            let csv_path = resolve_output(&args.out, out_dir);
            write_text(&csv_path, &sweep_csv(args.axis, &rows)?)?;
            let report = json!({ "base": base, "axis": args.axis, "rows": rows });
            write_text(
                &csv_path.with_extension("report.json"),
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )?;
            let failed = rows.iter().filter(|r| !r.ok).count();
            print_json(&json!({ "rows": rows.len(), "failed": failed, "summary": csv_path }))?;
        }
        Command::Verify(VerifyCommand::Matrix { file }) => {
            let a: WeightMatrix = read_json(&file)?;
            let report = verify_matrix(&a);
            print!("{report}");
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Verify(VerifyCommand::Assumptions { file }) => {
            let input: AssumptionsInput = read_json(&file)?;
            let report = verify_assumptions(&input)?;
            print_json(&report)?;
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Converse(args) => {
            let scenario = converse_scenario(args.n, args.q)?;
            let report = scenario.simulate()?;
            if let Some(out) = &args.out {
                let mut cfg = ScenarioConfig::new(Protocol::Converse, args.n);
                cfg.q = Some(args.q);
                write_execution(&execute(&cfg)?, &resolve_output(out, out_dir))?;
            }
            print_json(&json!({
                "n": args.n,
                "q": args.q,
                "initial_mean": report.initial_mean,
                "final_value": report.final_value(),
                "error": report.mean_drift,
                "termination_round": report.termination_round,
                "phase_clique_sizes": (0..args.n / 2).map(|p| args.n / 2 + p + 1).collect::<Vec<_>>(),
            }))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run_command(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
