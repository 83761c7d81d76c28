use std::process::ExitCode;

use clap::Parser;
use weyllab::{exit_code, run, write_outputs, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok((outcome, out)) => {
            if let Some(s) = &outcome.stdout {
                println!("{s}");
            }
            let dir = out.unwrap_or_else(|| "out".into());
            if let Err(e) = write_outputs(&outcome, &dir) {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            for c in outcome.summary.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAILED {}: {} (value {}, threshold {})", c.name, c.claim, c.value, c.threshold);
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
