mod cli;
mod verify;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = cli::Cli::parse();
    if let Some(j) = args.jobs {
        if j == 0 {
            eprintln!("input error: --jobs must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().expect("thread pool is built once");
    }
    match cli::run(args) {
        Ok(cli::Outcome::Ok) => ExitCode::SUCCESS,
        Ok(cli::Outcome::NonGuaranteed) => ExitCode::from(4),
        Err(e) => {
            if !matches!(e, cli::CliError::VerifyFailed) {
                eprintln!("{}", e.message());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
