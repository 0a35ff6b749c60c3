use clap::Parser;

fn main() {
    let cli = nelsonlab_cli::Cli::parse();
    std::process::exit(nelsonlab_cli::run(&cli));
}
