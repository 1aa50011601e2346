use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use mrd_cli::args::Cli;
use mrd_cli::commands::run;
use mrd_cli::exit_code;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.stdout.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(74);
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("mrd: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
