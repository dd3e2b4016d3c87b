use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fifo_sim_cli::run(std::env::args_os()))
}
