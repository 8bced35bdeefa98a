use clap::Parser;
use reflectjet::cli_io::{main_with, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REFLECTJET_LOG", "warn")).init();
    std::process::exit(main_with(Cli::parse()));
}
