use clap::Parser;
use conetool::cli::Cli;

fn main() {
    std::process::exit(conetool::run::main_with(Cli::parse()));
}
