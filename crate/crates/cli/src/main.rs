use std::path::PathBuf;
use std::process::ExitCode;

use bogoscope::pipeline::{exit_code, run_pipeline, Command, RunConfig, RunOptions};
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Scatter,
    Correlations,
    Predict,
    Ed,
    Renorm,
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Scatter => Command::Scatter,
            Cmd::Correlations => Command::Correlations,
            Cmd::Predict => Command::Predict,
            Cmd::Ed => Command::Ed,
            Cmd::Renorm => Command::Renorm,
            Cmd::Report => Command::Report,
        }
    }
}

/// Bogoliubov predictions for dilute Bose gases checked against exact diagonalization.
#[derive(Debug, Parser)]
#[command(name = "bogoscope", version)]
struct Cli {
    command: Cmd,
    /// JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run sweep points one after another.
    #[arg(long)]
    sequential: bool,
    /// Lift the default guards on κ, n_max and basis dimension.
    #[arg(long = "unsafe")]
    unsafe_override: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let opts = RunOptions {
        out: cli.out,
        cache_dir: std::env::var_os("BOGOSCOPE_CACHE").map(PathBuf::from),
        sequential: cli.sequential,
        unsafe_override: cli.unsafe_override,
    };
    let result = RunConfig::from_path(&cli.config).and_then(|cfg| run_pipeline(&cfg, cli.command.into(), &opts));
    match result {
        Ok(report) => {
            for s in &report.stages {
                let hit = if s.cache_hit { " (cached)" } else { "" };
                println!("{}: {} files{hit}", s.stage.name(), s.files.len());
                for (name, fit) in &s.fits {
                    println!("  {name}: slope {:.4} ± {:.4}", fit.slope, fit.slope_se);
                }
            }
            println!("output: {}", report.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
