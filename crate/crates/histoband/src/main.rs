use clap::Parser;

fn main() {
    std::process::exit(histoband::cli::run(histoband::cli::Cli::parse()));
}
