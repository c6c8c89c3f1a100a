use clap::Parser;

use perceptmap_service::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let verb = cli.verb.name();
    if let Err(e) = run(cli) {
        let chain: Vec<String> = e.chain().map(ToString::to_string).collect();
        eprintln!("{}", serde_json::json!({"error": chain.join(": "), "verb": verb}));
        std::process::exit(1);
    }
}
