use clap::Parser;
use gmm_mpc::cli::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(err) = gmm_mpc::cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
