use std::io::Write;

use win_martingale::cli::{configure_threads, main_with_args};

fn main() {
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    if let Err(e) = configure_threads() {
        let _ = writeln!(stderr, "winmart: {e}");
        std::process::exit(2);
    }
    let code = main_with_args(std::env::args_os(), &mut stdout, &mut stderr);
    let _ = stdout.flush();
    std::process::exit(code);
}
