use clap::Parser;

fn main() {
    let args = sbo_cli::Args::parse();
    std::process::exit(sbo_cli::main_with(&args));
}
