use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "virecon", about = "Obstacle-problem estimator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: std::path::PathBuf },
    /// Run the built-in invariant suite.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(text) => text,
                Err(err) => {
                    eprintln!("error: cannot read {}: {err}", config.display());
                    return ExitCode::from(2);
                }
            };
            let cfg = match virecon::config::load_config(&text) {
                Ok(cfg) => cfg,
                Err(err) => {
                    eprintln!("error: {err}");
                    return ExitCode::from(2);
                }
            };
            match virecon::experiment::run_experiment(&cfg) {
                Ok(report) => {
                    print!("{}", report.render());
                    ExitCode::SUCCESS
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Selftest => match virecon::selftest::run(&mut std::io::stdout()) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(1)
            }
        },
    }
}
