use std::process::ExitCode;

use clap::Parser;

use chemobound::cli::{main_with, Cli};

fn main() -> ExitCode {
    ExitCode::from(main_with(Cli::parse()))
}
