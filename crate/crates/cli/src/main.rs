use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let out = negsound_cli::run_cli(std::env::args_os());
    print!("{}", out.stdout);
    std::io::stdout().flush().ok();
    for d in &out.diagnostics {
        eprintln!("{}", d.trim_end());
    }
    ExitCode::from(out.code as u8)
}
