use clap::Parser;
use dlqr_cli::Cli;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if let Err(e) = dlqr_cli::run(&cli, &mut out) {
        eprintln!("dlqr: {e}");
        std::process::exit(e.exit_code());
    }
}
