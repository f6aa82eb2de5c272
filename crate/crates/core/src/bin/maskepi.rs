use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use maskepi::config::{self, ExperimentConfig, PAPER_NODES, PAPER_TRIALS};
use maskepi::experiment::run_experiment;
use maskepi::netgen::ContactNetwork;
use maskepi::rng::{substream, Purpose};
use maskepi::Error;

#[derive(Parser)]
#[command(name = "maskepi", version, about = "Mask-type epidemic model: analytic predictions and Monte Carlo sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Source {
    /// Experiment config file (TOML)
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name (see `maskepi presets`)
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(name)) => config::preset(name).ok_or_else(|| Error::Config(format!("unknown preset {name:?}"))),
            (None, None) => unreachable!("clap enforces one source"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write its CSV
    Run {
        #[command(flatten)]
        source: Source,
        /// Output CSV path (default: the config's `output`, else <name>.csv)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed for all Monte Carlo streams
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per seed policy and sweep point
        #[arg(long)]
        trials: Option<usize>,
        /// Nodes per generated network
        #[arg(long)]
        nodes: Option<usize>,
        /// Skip the simulation columns
        #[arg(long, conflicts_with = "sim_only")]
        analytic_only: bool,
        /// Skip the analytic columns
        #[arg(long)]
        sim_only: bool,
        /// Add solver diagnostics columns
        #[arg(long)]
        verbose: bool,
        /// 10^6 nodes and 5000 trials per point
        #[arg(long, conflicts_with_all = ["trials", "nodes"])]
        paper_scale: bool,
        /// Worker threads for Monte Carlo trials (0 = all cores)
        #[arg(long, env = "MASKEPI_THREADS", default_value_t = 0)]
        threads: usize,
    },
    /// List built-in presets
    Presets,
    /// Print a preset as a config file
    ShowPreset { name: String },
    /// Generate one network from a config's degree model and masks and dump it as text
    Network {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Presets => {
            for name in config::list_presets() {
                println!("{name}");
            }
        }
        Command::ShowPreset { name } => {
            let cfg = config::preset(&name).ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
            print!("{}", cfg.to_toml());
        }
        Command::Network { source, nodes, seed, out } => {
            let cfg = source.load()?;
            let first = cfg.sweep.points()?[0];
            let (model, ens) = cfg.point(first)?;
            let mut net = ContactNetwork::generate(&model, nodes, &mut substream(seed, 0, 0, Purpose::Network))?;
            net.assign_types(ens.prevalence(), &mut substream(seed, 0, 0, Purpose::Types))?;
            net.write_text(BufWriter::new(File::create(&out)?))?;
            let d = net.defects();
            eprintln!("wrote {} nodes, {} edges ({} self-loops, {} extra multi-edges) to {}", nodes, d.edges, d.self_loops, d.extra_multi_edges, out.display());
        }
        Command::Run { source, out, seed, trials, nodes, analytic_only, sim_only, verbose, paper_scale, threads } => {
            let mut cfg = source.load()?;
            let sim = &mut cfg.simulation;
            if paper_scale {
                sim.n_nodes = PAPER_NODES;
                sim.trials = PAPER_TRIALS;
            }
            sim.master_seed = seed.unwrap_or(sim.master_seed);
            sim.trials = trials.unwrap_or(sim.trials);
            sim.n_nodes = nodes.unwrap_or(sim.n_nodes);
            cfg.flags.analytic_only |= analytic_only;
            cfg.flags.sim_only |= sim_only;
            cfg.flags.verbose |= verbose;
            if analytic_only {
                cfg.flags.sim_only = false;
            }
            if sim_only {
                cfg.flags.analytic_only = false;
            }
            cfg.validate()?;
            let path = out.or_else(|| cfg.output.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.name)));
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            let mut writer = BufWriter::new(File::create(&path)?);
            println!("{}: {} sweep points -> {}", cfg.name, cfg.sweep.points()?.len(), path.display());
            let rows = pool.install(|| run_experiment(&cfg, &mut writer))?;
            writer.flush()?;
            for row in &rows {
                println!("  {}", maskepi::experiment::console_line(&cfg, row));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
