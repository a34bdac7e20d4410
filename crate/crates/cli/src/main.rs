use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use finslerkit_cli::commands::{run, Command, RunError};
use finslerkit_cli::report::{to_json, write_csv, Format};
use finslerkit_cli::scenario::load_scenario;

#[derive(Parser, Debug)]
#[command(name = "finslerkit", version, about = "Spray, Douglas and projective checks for (α, β)-metrics")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = load_scenario(&cli.config)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let report = run(cli.command, &cfg, seed).map_err(|RunError::Config(m)| anyhow::anyhow!("invalid scenario: {m}"))?;
    let mut sink: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    match cli.format {
        Format::Json => sink.write_all(to_json(&report)?.as_bytes())?,
        Format::Csv => write_csv(&report, &mut sink)?,
    }
    sink.flush()?;
    Ok(report.passed)
}
