use std::process::ExitCode;

use clap::Parser;
use mimalloc::MiMalloc;

// Training allocates and frees large tape buffers every batch; the system
// allocator returns them to the OS each time and pays page faults.
#[global_allocator]
static GLOBAL: MiMalloc = MiMalloc;

fn main() -> ExitCode {
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    let cli = ccbie_cli::Cli::parse();
    match ccbie_cli::run(cli, command_line) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ccbie_cli::exit_code(&e) as u8)
        }
    }
}
