use std::io::Write;
use std::process::ExitCode;

use bwl_cli::{run, EXIT_INVALID};

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("BWL_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or(format!("BWL_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_INVALID as u8);
    }
    let outcome = run(std::env::args_os());
    if let Some(msg) = &outcome.message {
        eprintln!("{}", msg.trim_end());
    }
    let written = match &outcome.out {
        Some(path) => std::fs::write(path, &outcome.report).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout().write_all(&outcome.report).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_INVALID as u8);
    }
    ExitCode::from(outcome.exit_code as u8)
}
