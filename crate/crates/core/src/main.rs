use clap::Parser;

fn main() {
    let cli = wtree::cli::Cli::parse();
    std::process::exit(wtree::cli::execute(&cli));
}
