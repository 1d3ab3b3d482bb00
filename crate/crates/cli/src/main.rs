use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use wrs_cli::bench::{run_bench, to_csv, BenchConfig};
use wrs_cli::ingest::{Format, Ingest};
use wrs_cli::sample::{format_sample, run_sample, Algo, BiasSpec, SampleConfig};
use wrs_cli::verify::{run_suite, Suite};
use wrs_cli::{CliError, Result};
use wrs_core::{Backend, RandomSource};

#[derive(Parser)]
#[command(
    name = "wrs",
    version,
    about = "Weighted random sampling over data streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a stream read from a file or standard input.
    Sample(SampleArgs),
    /// Run verification suites against exact laws.
    Verify(VerifyArgs),
    /// Time samplers on synthetic streams, as CSV.
    Bench(BenchArgs),
}

#[derive(clap::Args)]
struct SampleArgs {
    /// chao, es, chao-jumps, es-jumps, wrs-r or wrs-k.
    #[arg(long)]
    algo: Algo,
    #[arg(long)]
    size: usize,
    /// Integer seed, or "random".
    #[arg(long, default_value = "0")]
    seed: String,
    /// Per-item multiplicity cap (wrs-k only).
    #[arg(long)]
    k: Option<usize>,
    /// List entries by key, largest first (es only).
    #[arg(long)]
    ordered: bool,
    /// Input format; inferred from the first line when omitted.
    #[arg(long)]
    format: Option<Format>,
    /// pow:<base> or decay:<factor>.
    #[arg(long)]
    bias: Option<BiasSpec>,
    /// Size-1 backend for wrs-r and wrs-k (default chao).
    #[arg(long)]
    backend: Option<Backend>,
    /// Count and skip malformed lines instead of failing.
    #[arg(long)]
    skip_bad: bool,
    /// Input file; standard input when omitted or "-".
    input: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Kv,
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// examples, remark1, jumps, pipeline, order, replacement or all.
    #[arg(long, default_value = "all")]
    suite: Suite,
    /// Trials per check (default 200000, 500000 for remark1).
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "chao,chao-jumps,es,es-jumps"
    )]
    algos: Vec<Algo>,
    #[arg(long, value_delimiter = ',', default_value = "100000")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "200")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Multiplicity cap for wrs-k.
    #[arg(long)]
    k: Option<usize>,
}

fn resolve_seed(text: &str) -> Result<u64> {
    if text == "random" {
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        let seed = RandomSource::new(nanos as u64 ^ u64::from(std::process::id()))
            .derive("cli-seed")
            .seed();
        eprintln!("seed: {seed}");
        return Ok(seed);
    }
    text.parse().map_err(|_| {
        CliError::Usage(format!(
            "--seed must be an unsigned integer or \"random\", got {text:?}"
        ))
    })
}

fn open(input: Option<PathBuf>) -> Result<Box<dyn BufRead>> {
    Ok(match input {
        Some(path) if path.as_os_str() != "-" => Box::new(BufReader::new(File::open(path)?)),
        _ => Box::new(io::stdin().lock()),
    })
}

fn cmd_sample(args: SampleArgs) -> Result<ExitCode> {
    let mut config = SampleConfig::new(args.algo, args.size, resolve_seed(&args.seed)?);
    config.k = args.k;
    config.ordered = args.ordered;
    config.backend = args.backend;
    config.bias = args.bias;
    config.validate()?;
    let mut ingest = Ingest::new(open(args.input)?, args.format, args.skip_bad);
    let sample = run_sample(&config, ingest.by_ref())?;
    if args.skip_bad {
        eprintln!("skipped {} malformed line(s)", ingest.skipped());
    }
    io::stdout()
        .lock()
        .write_all(format_sample(&sample).as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let reports = run_suite(args.suite, args.trials, args.seed)?;
    let mut out = io::stdout().lock();
    for r in &reports {
        let text = match args.report {
            ReportFormat::Text => r.to_text(),
            ReportFormat::Kv => r.to_kv(),
        };
        out.write_all(text.as_bytes())?;
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    writeln!(io::stderr(), "{} check(s), {failed} failed", reports.len())?;
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    if args.algos.is_empty() || args.n.is_empty() || args.m.is_empty() {
        return Err(CliError::Usage(
            "--algos, --n and --m need at least one value".into(),
        ));
    }
    let config = BenchConfig {
        algos: args.algos,
        ns: args.n,
        ms: args.m,
        seed: args.seed,
        reps: args.reps,
        k: args.k,
    };
    let rows = run_bench(&config)?;
    io::stdout().lock().write_all(to_csv(&rows).as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("wrs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
