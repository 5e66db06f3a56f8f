use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdm_toolkit::report::{cmd_estimate, cmd_gen_dataset, cmd_simulate, cmd_sweep, cmd_train, CommandOutput, Overrides};
use sdm_toolkit::Result;

/// MDG and optical SNR estimation for coupled SDM links.
///
/// Set SDM_TOOLKIT_THREADS to cap the worker threads.
#[derive(Parser)]
#[command(name = "sdm-toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled feature corpus (`[dataset]`).
    GenDataset(Common),
    /// Train the σ_mdg and SNR regressors (`[train]`).
    Train(Common),
    /// Run every estimator on dataset rows or a tap/trace capture (`[estimate]`).
    Estimate(Common),
    /// Simulate one transmission and extract its features (`[simulate]`).
    Simulate(Common),
    /// Emit a figure table: fig1, fig4_grid, fig6, fig7 or fig8 (`[sweep]`).
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Replace every seed of the selected section.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (replaces `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Receiver implementation penalty in dB.
    #[arg(long = "snr-imp-db", allow_negative_numbers = true)]
    snr_imp_db: Option<f64>,
}

fn init_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("SDM_TOOLKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SDM_TOOLKIT_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cmd: Command) -> Result<CommandOutput> {
    let (run, common): (fn(&std::path::Path, &Overrides) -> Result<CommandOutput>, Common) = match cmd {
        Command::GenDataset(c) => (cmd_gen_dataset, c),
        Command::Train(c) => (cmd_train, c),
        Command::Estimate(c) => (cmd_estimate, c),
        Command::Simulate(c) => (cmd_simulate, c),
        Command::Sweep(c) => (cmd_sweep, c),
    };
    let overrides = Overrides {
        seed: common.seed,
        out_dir: common.out,
        snr_imp_db: common.snr_imp_db,
    };
    run(&common.config, &overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
