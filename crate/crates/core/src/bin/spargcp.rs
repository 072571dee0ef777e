use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spargcp::harness::{
    generate_synthetic, parse_values, run_experiment, sweep, write_graph_files, write_results,
    write_summary_csv, ExperimentConfig, ExperimentResult, SweepParam, SyntheticSpec,
};
use spargcp::Result;

#[derive(Parser)]
#[command(version, about = "Conformal GNN experiments with learned graph sparsification")]
struct Cli {
    /// Overrides the base seed of the config or synthetic spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent train splits.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one experiment per value of a hyperparameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of gamma, lambda, k, p.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Generate a synthetic graph and write it as edge/feature/label files.
    GenSynth {
        #[arg(long)]
        spec: PathBuf,
    },
}

fn load_config(cli: &Cli, path: &PathBuf) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(cfg: &ExperimentConfig, results: &[ExperimentResult]) -> Result<()> {
    if let Some(dir) = &cfg.output {
        write_results(dir, results)?;
    }
    write_summary_csv(io::stdout().lock(), results.iter().map(|r| &r.summary))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(cli, config)?;
            let result = run_experiment(&cfg)?;
            report(&cfg, &[result])
        }
        Command::Sweep { config, param, values } => {
            let cfg = load_config(cli, config)?;
            let results = sweep(&cfg, *param, &parse_values(values)?)?;
            report(&cfg, &results)
        }
        Command::GenSynth { spec } => {
            let mut spec: SyntheticSpec = serde_json::from_str(&std::fs::read_to_string(spec)?)?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| spargcp::Error::Usage("gen-synth needs --out <dir>".into()))?;
            let graph = generate_synthetic(&spec)?;
            write_graph_files(&graph, out)?;
            println!(
                "{} nodes, {} directed edges, {} classes -> {}",
                graph.num_nodes(),
                graph.num_edges(),
                graph.num_classes(),
                out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
