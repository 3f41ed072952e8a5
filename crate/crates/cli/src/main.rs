use clap::Parser;
use tl_bethe::config::Cli;

fn main() {
    let cli = Cli::parse();
    let code = tl_bethe::run(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
