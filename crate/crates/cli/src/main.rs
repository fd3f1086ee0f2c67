use clap::Parser;

fn main() {
    let args = gravview_cli::cli::Cli::parse();
    if let Err(e) = gravview_cli::cli::run(&args) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
