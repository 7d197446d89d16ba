use std::process::ExitCode;

use clap::Parser;
use mris_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.command.common().threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli.command) {
        Ok(report) => {
            print!("{}", report.table());
            let out = &cli.command.common().out;
            println!("report: {}", out.join(report.file_name()).display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
