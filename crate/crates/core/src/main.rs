use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let code = std::panic::catch_unwind(|| {
        magnet::cli::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock())
    })
    .unwrap_or(magnet::cli::EXIT_INTERNAL);
    ExitCode::from(code as u8)
}
