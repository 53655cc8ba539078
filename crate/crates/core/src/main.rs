use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use magdrift::cli;

/// Magnetic drift dynamics and eigenvalue-count experiments.
#[derive(Debug, Parser)]
#[command(name = "magdrift", version)]
struct Args {
    /// One of simulate, driftline, magline, guiding, billiard, action,
    /// classify, count, sweep, check.
    command: String,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to MAGDRIFT_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let threads = args.threads.or_else(|| std::env::var("MAGDRIFT_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("magdrift: cannot set up {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    if !cli::COMMANDS.contains(&args.command.as_str()) {
        eprintln!("magdrift: unknown command {:?}; expected one of {}", args.command, cli::COMMANDS.join(", "));
        return ExitCode::from(2);
    }
    ExitCode::from(cli::run(&args.command, &args.config, args.out.as_deref()) as u8)
}
