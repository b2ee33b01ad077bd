use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dialogic::framework::write_framework_csv;
use dialogic::ingest::{align_phases, parse_event_log};
use dialogic::oracle::{binomial_suite, mwu_suite, spm_suite};
use dialogic::pipeline::{analyze, AnalysisConfig, MinSupport};
use dialogic::report::{render, write_tree, Format, RenderOptions};
use dialogic::synth::{generate, to_csv, Profile, SynthSpec};

/// Dialogue analytics for coded collaborative problem solving sessions.
#[derive(Parser)]
#[command(name = "dialogic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis and write reports.
    Analyze(AnalyzeArgs),
    /// Generate a seeded synthetic session.
    Synth(SynthArgs),
    /// Compare production code against brute-force references.
    Oracle(OracleArgs),
    /// Print the indicator coding framework as CSV.
    Framework,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    #[arg(long)]
    utterances: PathBuf,
    #[arg(long)]
    phase_log: PathBuf,
    #[arg(long)]
    roster: PathBuf,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    /// A fraction in (0, 1], or "auto".
    #[arg(long, default_value = "auto")]
    min_support: MinSupport,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated subset of json, csv, dot.
    #[arg(long, value_delimiter = ',', default_value = "json,csv,dot")]
    emit: Vec<Format>,
    /// Keep non-significant network edges in DOT output, dashed.
    #[arg(long)]
    keep_all: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Balanced,
    PaperShape,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 39)]
    students_per_condition: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "balanced")]
    profile: ProfileArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Spm,
    Mwu,
    Binomial,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(a) if a > 0.0 && a < 1.0 => Ok(a),
        _ => Err(format!("alpha must lie strictly between 0 and 1, got {s:?}")),
    }
}

/// Failure classes map to exit codes: bad input is 1, I/O is 2.
enum Failure {
    Input(String),
    Io(String),
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Io(format!("cannot open {}: {e}", path.display())))
}

fn run_analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let dataset = parse_event_log(open(&args.utterances)?, open(&args.phase_log)?, open(&args.roster)?)
        .map_err(|e| if e.is_io() { Failure::Io(e.to_string()) } else { Failure::Input(e.to_string()) })?;
    let aligned = align_phases(&dataset).map_err(|e| Failure::Input(e.to_string()))?;
    let config = AnalysisConfig {
        alpha: args.alpha,
        min_support: args.min_support,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Io(format!("cannot start worker threads: {e}")))?;
    let analysis = pool
        .install(|| analyze(&aligned, &config))
        .map_err(|e| Failure::Input(e.to_string()))?;
    let opts = RenderOptions {
        emit: args.emit.into_iter().collect::<BTreeSet<_>>(),
        keep_all: args.keep_all,
    };
    let tree = render(&analysis, &opts);
    write_tree(&args.out, &tree)
        .map_err(|e| Failure::Io(format!("cannot write to {}: {e}", args.out.display())))
}

fn run_synth(args: SynthArgs) -> Result<(), Failure> {
    let profile = match args.profile {
        ProfileArg::Balanced => Profile::Balanced,
        ProfileArg::PaperShape => Profile::PaperShape,
    };
    let spec = SynthSpec::new(profile, args.seed, args.students_per_condition);
    let dataset = generate(&spec).map_err(|e| Failure::Input(e.to_string()))?;
    let files = to_csv(&dataset).map_err(|e| Failure::Io(e.to_string()))?;
    let write = || -> io::Result<()> {
        std::fs::create_dir_all(&args.out)?;
        std::fs::write(args.out.join("utterances.csv"), &files.utterances)?;
        std::fs::write(args.out.join("phase_log.csv"), &files.phase_log)?;
        std::fs::write(args.out.join("roster.csv"), &files.roster)
    };
    write().map_err(|e| Failure::Io(format!("cannot write to {}: {e}", args.out.display())))
}

fn run_oracle(args: OracleArgs) -> Result<(), Failure> {
    let report = match args.suite {
        Suite::Spm => spm_suite(args.trials.unwrap_or(1000), args.seed),
        Suite::Mwu => mwu_suite(args.trials.unwrap_or(450), args.seed),
        Suite::Binomial => binomial_suite(args.trials.unwrap_or(100), args.seed),
    };
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Input(format!("{} oracle mismatch", report.name)))
    }
}

fn run_framework() -> Result<(), Failure> {
    write_framework_csv(io::stdout().lock()).map_err(|e| Failure::Io(e.to_string()))
}

fn main() -> ExitCode {
    // clap would exit 2 on usage errors, which is reserved for I/O here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Synth(args) => run_synth(args),
        Command::Oracle(args) => run_oracle(args),
        Command::Framework => run_framework(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
