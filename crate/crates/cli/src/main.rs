use std::process::ExitCode;

use clap::Parser;
use needlet_cli::{run_cli, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = run_cli(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    ExitCode::from(code)
}
