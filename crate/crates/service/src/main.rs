use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use faircompass_core::Clock;
use faircompass_service::cli::{audit, exit_code, Cli, Command};
use faircompass_service::{serve, ServiceConfig, ServiceError};

fn run_serve(config: Option<std::path::PathBuf>) -> Result<(), ServiceError> {
    let config = match config {
        Some(path) => ServiceConfig::load(&path)?,
        None => ServiceConfig::default(),
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve(config))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match cli.command {
        Command::Serve { config } => match run_serve(config) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Audit(args) => {
            let result = audit(&args, Clock::System);
            match &result {
                Ok(outcome) => println!("{}", outcome.summary),
                Err(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&result))
        }
    }
}
