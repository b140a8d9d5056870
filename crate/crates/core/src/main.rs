use clap::Parser;

fn main() {
    let args = srdsa::cli::Args::parse();
    std::process::exit(srdsa::cli::main_with(args));
}
