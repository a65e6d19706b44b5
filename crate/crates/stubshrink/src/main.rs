use clap::Parser;
use stubshrink::cli::{execute, Cli, EXIT_USAGE};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let code = stubshrink::with_stack(move || {
        let (mut out, mut err) = (std::io::stdout(), std::io::stderr());
        execute(cli.command, &mut out, &mut err)
    });
    std::process::exit(code);
}
