use clap::Parser;

fn main() {
    std::process::exit(entverify_cli::run(entverify_cli::Cli::parse()));
}
