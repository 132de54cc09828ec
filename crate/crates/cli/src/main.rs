use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use randresp_cli::commands::run;
use randresp_cli::Cli;

fn main() -> ExitCode {
    // clap's default exit code for usage errors is 2, which this tool
    // reserves for audit failures; route parsing manually so usage errors
    // exit 1 and --help/--version exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let benign = matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if benign {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
