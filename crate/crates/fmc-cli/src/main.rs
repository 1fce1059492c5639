use clap::Parser;

fn main() {
    let cli = fmc_cli::Cli::parse();
    if let Err(e) = fmc_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
