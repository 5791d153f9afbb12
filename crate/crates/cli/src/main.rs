use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use warpcurv::commands::{self, CommandError, Outcome};
use warpcurv::config::RunConfig;

#[derive(Parser)]
#[command(name = "warpcurv", version, about = "Prescribed Weingarten curvature of radial graphs in warped products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overrides `output_dir`
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed, overrides `seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core), overrides `threads`
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Continue from the constant slice to the target equation and audit it
    Solve,
    /// Audit the field dump named by `audit_field`
    Audit,
    /// Recover a manufactured solution on one grid
    Mms,
    /// Symmetric-function lemma suites and the ε–δ search
    Lemmas,
    /// Counterexample search for the quadratic-form condition
    Conjecture,
    /// Convergence table over `sweep.points`
    Sweep,
}

fn run(cli: &Cli) -> Result<Outcome, CommandError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CommandError::Input("--config <path> is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global() {
        log::warn!("thread pool already configured: {e}");
    }
    let out = config.output_dir.clone();
    Ok(match cli.command {
        Command::Solve => commands::cmd_solve(&config, &out)?.0,
        Command::Audit => commands::cmd_audit(&config, &out)?.0,
        Command::Mms => commands::cmd_mms(&config, &out)?.0,
        Command::Lemmas => commands::cmd_lemmas(&config, &out)?.0,
        Command::Conjecture => commands::cmd_conjecture(&config, &out)?.0,
        Command::Sweep => commands::cmd_sweep(&config, &out)?.0,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
