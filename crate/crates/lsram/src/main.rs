use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SLO_ALLOC_LOG")).init();
    let cli = lsram::cli::Cli::parse();
    if let Err(e) = lsram::cli::run(cli) {
        // A closed stdout (e.g. piping into head) is not a failure.
        if let lsram::cli::CliError::Io(io) = &e {
            if io.kind() == std::io::ErrorKind::BrokenPipe {
                return;
            }
        }
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}
