use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use fairsim_cli::{run, Cli, EXIT_OK, EXIT_USAGE};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FAIRSIM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            return ExitCode::from(code as u8);
        }
    };
    if let Some(t) = cli.config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("fairsim: cannot start {t} threads: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    match run(cli.command, &cli.config) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("fairsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
