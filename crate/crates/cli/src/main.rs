use std::process::ExitCode;

use clap::Parser;
use reflex_cli::config::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let report = match reflex_cli::run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    for path in &report.files {
        println!("wrote {}", path.display());
    }
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", c.name, c.detail);
    }
    if cli.command.common().check && !report.passed() {
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
