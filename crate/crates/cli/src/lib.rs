//! Command-line front end for `tl-bethe-core`: configuration, the identity
//! suite, the solver and scalar-product drivers, and their JSON and table
//! output.

pub mod checks;
pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;

use config::{Cli, Command, Format};
use output::{ConfigEcho, Envelope, SCHEMA};

/// Runs a parsed command line, writing the report to `--out` or `stdout`.
/// Returns the process exit status.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cfg = cli.command.config();
    let params = match cfg.params() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return commands::EXIT_USAGE;
        }
    };
    let result = match &cli.command {
        Command::Check(_) => commands::check(cfg, &params),
        Command::Solve(_) => commands::solve(cfg, &params),
        Command::Diagonalize(_) => commands::diagonalize(cfg, &params),
        Command::Slavnov(_) => commands::slavnov(cfg, &params),
        Command::Report(_) => commands::report(cfg, &params),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let text = match cfg.format {
        Format::Json => {
            let env = Envelope {
                schema: SCHEMA,
                command: cli.command.name(),
                config: ConfigEcho::new(cfg, &params),
                body: outcome.body,
            };
            let mut s = serde_json::to_string_pretty(&env).expect("envelope serializes");
            s.push('\n');
            s
        }
        Format::Table => outcome.table,
    };
    let written = match &cfg.out {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => stdout.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write output: {e}");
        return commands::EXIT_FAIL;
    }
    outcome.exit
}
