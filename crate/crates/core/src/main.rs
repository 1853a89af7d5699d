use clap::Parser;
use eks::cli::{run, Cli, Exit};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        if let Exit::Parse(msg) = &e {
            eprintln!("error: {msg}");
        }
        std::process::exit(e.code());
    }
}
