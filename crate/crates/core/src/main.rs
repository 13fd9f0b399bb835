use clap::Parser;

fn main() {
    let cli = linsim::cli::Cli::parse();
    std::process::exit(linsim::cli::run(cli));
}
