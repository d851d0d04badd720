use std::process::ExitCode;

fn main() -> ExitCode {
    // BWN_THREADS caps the worker pool; results do not depend on it.
    if let Ok(v) = std::env::var("BWN_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    eprintln!("bwn: cannot size the worker pool: {e}");
                    return ExitCode::from(70);
                }
            }
            _ => {
                eprintln!("bwn: BWN_THREADS must be a positive integer, got '{v}'");
                return ExitCode::from(64);
            }
        }
    }
    let code = bwn_core::cli::run(std::env::args_os());
    ExitCode::from(u8::try_from(code).unwrap_or(70))
}
