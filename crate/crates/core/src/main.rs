use clap::Parser;

use latestop::cli::{self, Cli};

fn main() {
    // LATESTOP_THREADS caps internal parallelism (the evaluation passes are
    // row-parallel); results do not depend on the thread count.
    if let Ok(threads) = std::env::var("LATESTOP_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("ignoring invalid LATESTOP_THREADS value `{threads}`");
            }
        }
    }
    let args = Cli::parse();
    if let Err(err) = cli::dispatch(args) {
        eprintln!("{}", cli::error_json(&err));
        std::process::exit(err.exit_code());
    }
}
