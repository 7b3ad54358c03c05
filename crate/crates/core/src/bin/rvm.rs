use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use rvm::io::{cmd_check, cmd_constants, cmd_run};

#[derive(Parser)]
#[command(name = "rvm", version, about = "Relativistic Vlasov-Maxwell simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a config, run the solver and write artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Dotted override `key.path=value`; repeatable, last one wins.
        #[arg(long = "set", value_name = "K=V")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Print the a-priori constants of a config as JSON.
    Constants {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "K=V")]
        set: Vec<String>,
    },
    /// Recompute the checks of a run directory from its files.
    Check { run_directory: PathBuf },
}

fn init_threads() {
    let n = std::env::var("RVM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            set,
            out,
            quiet,
        } => cmd_run(&config, &set, out.as_deref(), quiet),
        Command::Constants { config, set } => cmd_constants(&config, &set),
        Command::Check { run_directory } => cmd_check(&run_directory),
    };
    ExitCode::from(code as u8)
}
