use std::process::ExitCode;

use clap::Parser;

use ainfty_core::cli::{execute, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(o) => {
            match (&cli.command, &o.bundle) {
                (Command::Generate { out: Some(path), .. }, Some(b)) => {
                    if let Err(e) = std::fs::write(path, b) {
                        eprintln!("cannot write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                    print!("{}", o.text);
                }
                (_, Some(b)) => {
                    // The bundle owns stdout; the report goes to stderr.
                    print!("{b}");
                    eprint!("{}", o.text);
                }
                _ => print!("{}", o.text),
            }
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
