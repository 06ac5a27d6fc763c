use clap::Parser;

use ltss::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    if let Err(err) = run(cli) {
        let code = err.exit_code();
        let msg = serde_json::json!({ "error": err.to_string(), "exit_code": code });
        eprintln!("{msg}");
        std::process::exit(code);
    }
}
