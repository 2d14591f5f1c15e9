use std::io::{self, IsTerminal};
use std::process::ExitCode;

fn main() -> ExitCode {
    let styled = io::stdout().is_terminal() && std::env::var_os("AMPM_NO_COLOR").is_none();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let code = ampm::cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock(), styled);
    ExitCode::from(code as u8)
}
