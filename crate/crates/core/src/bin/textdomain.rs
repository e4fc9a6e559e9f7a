use clap::Parser;
use textdomain::cli::{run, Cli};

fn main() {
    // clap exits with status 2 on flag errors
    let cli = Cli::parse();
    std::process::exit(run(cli));
}
