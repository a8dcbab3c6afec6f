use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use photon_memory::pulses::EfficiencyBounds;
use pms_cli::scenarios;
use pms_cli::{CliError, Config, EXIT_CONFIG};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scenario {
    /// Store one photon with one pulse.
    Simulate,
    /// Efficiency against one parameter for several pulses.
    Sweep,
    /// GRAPE pulse optimisation.
    Optimize,
    /// Storage and re-emission through a chain of nodes.
    RetrieveChain,
    /// Minimum coherence time against the coupling g.
    Tcmin,
    /// Write a plotting script for the CSV files.
    PlotStub,
}

/// Single-photon storage in an atom–cavity node: simulations, sweeps and
/// pulse optimisation with CSV output.
#[derive(Debug, Parser)]
#[command(name = "photon-memory-sim", version)]
struct Cli {
    scenario: Scenario,

    /// TOML configuration; every key is optional.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,

    /// Output directory.
    #[arg(long, value_name = "DIR", env = "PMS_OUT", default_value = "out")]
    out: PathBuf,

    /// Print the fully resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn print_config(cfg: &Config) -> Result<(), CliError> {
    print!("{}", cfg.to_toml());
    let p = cfg.system(cfg.params.tc_us)?;
    println!();
    println!("# derived for tc_us = {}", cfg.params.tc_us);
    println!("# line_length_us = {}", p.line_length);
    println!("# window_us = [{}, {}]", p.t_start, p.t_end);
    if let Ok(b) = EfficiencyBounds::new(&p) {
        println!("# cooperativity = {:.6}", b.c);
        println!("# eta_max = {:.6}", b.eta_max);
        println!("# eta_prime_max = {:.6}", b.eta_prime_max);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if cli.scenario == Scenario::PlotStub && !cli.print_config {
        return scenarios::write_plot_stub(&cli.out);
    }
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None if cli.print_config => Config::default(),
        None => return Err(CliError::Config("--config FILE is required".into())),
    };
    if cli.print_config {
        print_config(&cfg)?;
        return Ok(Vec::new());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    pool.install(|| match cli.scenario {
        Scenario::Simulate => scenarios::run_simulate(&cfg, &cli.out),
        Scenario::Sweep => scenarios::run_sweep(&cfg, &cli.out),
        Scenario::Optimize => scenarios::run_optimize(&cfg, &cli.out),
        Scenario::RetrieveChain => scenarios::run_retrieve_chain(&cfg, &cli.out),
        Scenario::Tcmin => scenarios::run_tcmin(&cfg, &cli.out),
        Scenario::PlotStub => unreachable!(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("photon-memory-sim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
