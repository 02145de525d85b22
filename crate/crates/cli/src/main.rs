use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nijenhuis_cli::{run_command, Command, Flags, EXIT_INPUT};

/// Geodesically compatible metrics and commuting flows for companion operators.
#[derive(Debug, Parser)]
#[command(name = "nijenhuis", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Problem configuration (JSON).
    config: PathBuf,
    /// Write the artifact here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Grid CSV to plot instead of evolving the configuration.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated t-slice indices for `plot`; an empty list draws axes only.
    #[arg(long)]
    slices: Option<String>,
    /// Comma-separated resolutions for `residual` and `compare`.
    #[arg(long)]
    ladder: Option<String>,
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("bad {what} entry '{t}'")))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let parsed = (|| -> Result<Flags, String> {
        Ok(Flags {
            out: cli.out.clone(),
            input: cli.input.clone(),
            slices: cli
                .slices
                .as_deref()
                .map(|s| list(s, "slice"))
                .transpose()?,
            ladder: cli
                .ladder
                .as_deref()
                .map(|s| list(s, "ladder"))
                .transpose()?,
        })
    })();
    let flags = match parsed {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    ExitCode::from(run_command(cli.command, &cli.config, &flags) as u8)
}
