//! `hypgrass`: batch CLI over the X_{p,q} geometry library.
//!
//! Every invocation prints one JSON result envelope on stdout. Exit codes:
//! 0 success, 2 input validation failure, 3 numerical non-convergence
//! (envelope still emitted), 64 unknown command / usage error.

mod emit;
mod files;
mod run;

use clap::error::ErrorKind;
use clap::Parser;

use run::Cli;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    std::process::exit(0);
                }
                _ => {
                    eprintln!("{e}");
                    std::process::exit(64);
                }
            }
        }
    };
    let code = run::dispatch(cli);
    std::process::exit(code);
}
