use clap::Parser;
use ringwalk_cli::app::{run, Cli};

fn main() {
    // clap exits with status 2 on malformed arguments
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("ringwalk: {e}");
        std::process::exit(e.exit_code());
    }
}
