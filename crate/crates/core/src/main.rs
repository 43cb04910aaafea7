use clap::Parser;
use log::LevelFilter;

use sudonet::cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    if let Err(err) = run(cli) {
        eprintln!("sudonet: {err}");
        std::process::exit(exit_code(&err));
    }
}
