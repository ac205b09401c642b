use clap::Parser;

fn main() {
    let cli = envsteer::cli::Cli::parse();
    if let Err(e) = envsteer::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
