use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use steklov_cli::{run, CliError, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "steklov", version, about = "Steklov eigenfunction decay experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Nyström spectrum and densities.
    Spectrum(Common),
    /// Decay envelope ψ and Carleman weight tables.
    Envelope(Common),
    /// Restriction norms on the offset curves H_t.
    Profile(Common),
    /// Bound margins for the selected modes.
    Verify(Common),
    /// Annulus radial amplitude against the lower-bound curve.
    Figure1(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to STEKLOV_THREADS.
    #[arg(long, env = "STEKLOV_THREADS")]
    threads: Option<usize>,
}

fn execute(cmd: Command, args: &Common) -> Result<Vec<String>, CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = ExperimentConfig::load(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let files = run(&cfg, cmd, &out)?;
    Ok(files.into_iter().map(|f| out.join(f).display().to_string()).collect())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Spectrum(a) => (Command::Spectrum, a),
        Cmd::Envelope(a) => (Command::Envelope, a),
        Cmd::Profile(a) => (Command::Profile, a),
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Figure1(a) => (Command::Figure1, a),
    };
    match execute(cmd, args) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
