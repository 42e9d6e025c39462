mod app;
mod args;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command, ModelArg};

fn main() -> ExitCode {
    let argv = match args::merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: config: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version are not failures; usage errors are.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Denoise(a) => app::run(ModelArg::Denoise, a),
        Command::Deblur(a) => app::run(ModelArg::Deblur, a),
        Command::Inpaint(a) => app::run(ModelArg::Inpaint, a),
        Command::DenoiseColor(a) => app::run(ModelArg::DenoiseColor, a),
        Command::Tvp(a) => app::run(ModelArg::Tvp, a),
        Command::Compare(a) => app::compare(a),
        Command::Fixture(a) => app::fixture(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(1)
        }
    }
}
