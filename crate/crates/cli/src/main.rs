use clap::Parser;
use patchdyn_cli::{configure_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result = configure_threads().and_then(|()| run(&cli, &mut stdout));
    if let Err(e) = result {
        eprintln!("patchdyn: {e}");
        std::process::exit(e.exit_code());
    }
}
