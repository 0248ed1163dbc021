use clap::Parser;

use ofbm::cli::{configure_threads, run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are validation failures; 2 is reserved for tolerance misses.
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
    std::process::exit(run(cli));
}
