use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = flashdex_cli::Cli::parse();
    match flashdex_cli::init_threads().and_then(|()| flashdex_cli::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flashdex: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
