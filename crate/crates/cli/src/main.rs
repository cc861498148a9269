use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use largesol_cli::{run_scenario, Kind, ScenarioConfig};

#[derive(Parser)]
#[command(name = "largesol", version, about = "Boundary blow-up solutions: scenarios and diagnostics")]
#[command(after_long_help = ScenarioConfig::help_text())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Paths {
    /// Scenario file of `key = value` lines
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the `out` key, then `out/<kind>`)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Keller-Osserman classification of g
    #[command(after_long_help = ScenarioConfig::help_text())]
    KoCheck(Paths),
    /// Radial large solution in a ball or annulus
    #[command(after_long_help = ScenarioConfig::help_text())]
    Radial(Paths),
    /// Continuation ladder on the disk
    #[command(after_long_help = ScenarioConfig::help_text())]
    Disk(Paths),
    /// Disk ladder plus symmetry diagnostics
    #[command(after_long_help = ScenarioConfig::help_text())]
    Symmetry(Paths),
    /// KO, decomposition, U_R, disk ladder, sandwich and symmetry
    #[command(after_long_help = ScenarioConfig::help_text())]
    FullVerify(Paths),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, paths) = match cli.command {
        Command::KoCheck(p) => (Kind::KoCheck, p),
        Command::Radial(p) => (Kind::Radial, p),
        Command::Disk(p) => (Kind::Disk, p),
        Command::Symmetry(p) => (Kind::Symmetry, p),
        Command::FullVerify(p) => (Kind::FullVerify, p),
    };
    let cfg = match ScenarioConfig::from_path(&paths.config, Some(kind)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {}: {e}", paths.config.display());
            return ExitCode::from(2);
        }
    };
    let out = paths
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(kind.as_str()));
    let report = run_scenario(&cfg, &out);
    for stage in &report.stages {
        if let Some(e) = &stage.error {
            println!("{:<14} error  {e}", stage.name);
        }
        for c in &stage.checks {
            println!(
                "{:<14} {:<5} {:<30} {}",
                stage.name,
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
    }
    println!("verdict: {:?} ({})", report.verdict, out.join("manifest.json").display());
    ExitCode::from(report.verdict.exit_code() as u8)
}
