use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nongibbs_cli::{catalog, run, RunOptions, Scenario, CACHE_ENV, EXIT_INVALID, EXIT_RUNTIME};

#[derive(Parser)]
#[command(name = "nongibbs", version, about = "Run finite-volume non-Gibbsianness scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and execute a scenario file.
    Run {
        file: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory (default: results/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file without running it.
    Validate { file: PathBuf },
    /// Show scenario kinds and the shipped scenario files.
    List,
}

fn load(file: &PathBuf) -> Result<(String, Scenario), ExitCode> {
    let text = std::fs::read_to_string(file).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", file.display());
        ExitCode::from(EXIT_INVALID as u8)
    })?;
    match Scenario::parse(&text) {
        Ok(s) => Ok((text, s)),
        Err(errors) => {
            eprintln!("{}: invalid scenario", file.display());
            for e in errors {
                eprintln!("  {}", e.trim_end().replace('\n', "\n  "));
            }
            Err(ExitCode::from(EXIT_INVALID as u8))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match cli.command {
        Command::List => {
            print!("{}", catalog::render());
            ExitCode::SUCCESS
        }
        Command::Validate { file } => match load(&file) {
            Ok((_, s)) => {
                println!("{}: valid {} scenario '{}'", file.display(), s.kind, s.name);
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run { file, jobs, out } => {
            let (text, scenario) = match load(&file) {
                Ok(x) => x,
                Err(code) => return code,
            };
            let options = RunOptions {
                out: out.unwrap_or_else(|| PathBuf::from("results").join(&scenario.name)),
                jobs,
                cache: std::env::var_os(CACHE_ENV).map(PathBuf::from),
            };
            match run(&scenario, &text, &options) {
                Ok(m) if !m.failed() => {
                    println!("{}: {} cells ok, results in {}", scenario.name, m.cells.len(), options.out.display());
                    ExitCode::SUCCESS
                }
                Ok(m) => {
                    eprintln!("{}: {} of {} cells failed", scenario.name, m.failed_cells, m.cells.len());
                    for c in m.cells.iter().filter(|c| c.error.is_some()) {
                        eprintln!("  {}: {}", c.id, c.error.as_deref().unwrap_or(""));
                    }
                    ExitCode::from(EXIT_RUNTIME as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_RUNTIME as u8)
                }
            }
        }
    }
}
