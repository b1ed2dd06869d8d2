use clap::Parser;

use boostbif_cli::{error::CliError, run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help and version requests are not failures
            let code = if e.use_stderr() { CliError::EXIT_PARSE } else { 0 };
            e.print().ok();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.text);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
