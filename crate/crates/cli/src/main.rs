use std::process::ExitCode;

use clap::Parser;
use fishbone_cli::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command.run() {
        Ok(report) => {
            print!("{}", report.summary);
            for path in &report.files {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("fishbone: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
