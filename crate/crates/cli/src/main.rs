use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ffward_core::bench::{report, run_matrix, BenchConfig};
use ffward_core::dmvf::{run_dmvf, CommGraph, DmvfConfig};
use ffward_core::features::{generate_scene, read_dataset, SynthConfig};
use ffward_core::ffagent::{train, PolicySet, RewardParams, Strategy, TrainConfig};
use ffward_core::mffnet::{
    run_mffnet, train_dqn_controller, ControllerConfig, ControllerTrainConfig, DqnControllerPolicy,
};
use ffward_core::netsim::{Channel, ChannelConfig, TransportKind};
use ffward_core::run::RunReport;
use ffward_core::simkernel::SimParams;

#[derive(Parser)]
#[command(name = "ffward", version, about = "Collaborative multi-view video fast-forwarding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Slow,
    Normal,
    Fast,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ControllerArg {
    Heuristic,
    Dqn,
}

#[derive(clap::Args)]
struct NetArgs {
    /// Drop probability for frame batches.
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    /// Seed of the loss process.
    #[arg(long, default_value_t = 0)]
    channel_seed: u64,
    /// direct | codec | socket
    #[arg(long, default_value = "codec")]
    transport: TransportKind,
}

impl NetArgs {
    fn channel(&self, n: usize) -> Result<Channel> {
        let cfg = ChannelConfig::with_loss(self.loss, self.channel_seed);
        Ok(Channel::with_transport(n, &cfg, self.transport.open()?)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic multi-view scene.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        views: usize,
        #[arg(long, default_value_t = 10_000)]
        length: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        /// Number of important events.
        #[arg(long, default_value_t = 40)]
        events: usize,
    },
    /// Train skip policies. With `--strategy all`, `--out` is a directory.
    Train {
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run the distributed coordinator and write a run report.
    RunDmvf {
        #[arg(long)]
        data: PathBuf,
        /// Edge-list file ("u v" per line), or complete | path | ring.
        #[arg(long, default_value = "complete")]
        graph: String,
        #[arg(long)]
        policies: PathBuf,
        /// Adaptation period in frames.
        #[arg(long, default_value_t = 100)]
        period: usize,
        #[arg(long, default_value_t = 0.6)]
        rho: f64,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the centralized controller and write a run report.
    RunMffnet {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        policies: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        rho: f64,
        #[arg(long, default_value_t = 0.4)]
        tau: f64,
        #[arg(long, default_value_t = 100)]
        period: usize,
        #[arg(long, value_enum, default_value = "heuristic")]
        controller: ControllerArg,
        /// Controller checkpoint, required with `--controller dqn`.
        #[arg(long)]
        controller_ckpt: Option<PathBuf>,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the learned strategy controller.
    TrainController {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        policies: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run the experiment matrix described by a TOML config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the comparison table for a bench output directory.
    Report { dir: PathBuf },
}

fn graph_for(spec: &str, n: usize) -> Result<CommGraph> {
    Ok(match spec {
        "complete" => CommGraph::complete(n)?,
        "path" => CommGraph::path(n)?,
        "ring" => CommGraph::ring(n)?,
        file => {
            let text = fs::read_to_string(file).with_context(|| format!("reading graph {file}"))?;
            CommGraph::parse_edgelist(&text, Some(n))?
        }
    })
}

fn write_report(report: &RunReport, out: &Path) -> Result<()> {
    fs::write(out, report.to_text(&[])).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{}: {} periods, processing rate {:.4}%, p2p {} B, central {} B -> {}",
        report.method,
        report.periods.len(),
        100.0 * report.processing_rate(),
        report.comm.p2p.attempted_bytes,
        report.comm.central.attempted_bytes,
        out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { out, seed, views, length, dim, events } => {
            let cfg = SynthConfig { seed, num_views: views, length, dim, num_events: events, ..SynthConfig::default() };
            let ds = generate_scene(&cfg)?;
            ds.write(&out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{} views x {} frames (dim {}), {} important -> {}",
                ds.num_views(),
                ds.len(),
                ds.dim(),
                ds.important_count(),
                out.display()
            );
        }
        Command::Train { strategy, data, out, seed, episodes } => {
            let ds = read_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            let mut cfg = TrainConfig { seed, ..TrainConfig::default() };
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            let one = |s: Strategy| train(ds.views(), s, &RewardParams::for_strategy(s), &cfg);
            match strategy {
                StrategyArg::All => {
                    let set = PolicySet::new(
                        one(Strategy::Slow)?,
                        one(Strategy::Normal)?,
                        one(Strategy::Fast)?,
                    )?;
                    set.save_dir(&out)?;
                }
                single => {
                    let s = match single {
                        StrategyArg::Slow => Strategy::Slow,
                        StrategyArg::Normal => Strategy::Normal,
                        _ => Strategy::Fast,
                    };
                    one(s)?.save(&out)?;
                }
            }
            println!("policies written to {}", out.display());
        }
        Command::RunDmvf { data, graph, policies, period, rho, net, out } => {
            let ds = read_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            let set = PolicySet::load_dir(&policies)
                .with_context(|| format!("loading policies from {}", policies.display()))?;
            let graph = graph_for(&graph, ds.num_views())?;
            let cfg = DmvfConfig { period, sim: SimParams { rho, ..SimParams::default() }, ..DmvfConfig::default() };
            let mut channel = net.channel(ds.num_views())?;
            let report = run_dmvf(&ds, &graph, &set, &cfg, &mut channel)?;
            write_report(&report, &out)?;
        }
        Command::RunMffnet { data, policies, rho, tau, period, controller, controller_ckpt, net, out } => {
            let ds = read_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            let set = PolicySet::load_dir(&policies)
                .with_context(|| format!("loading policies from {}", policies.display()))?;
            let dqn = match (controller, controller_ckpt) {
                (ControllerArg::Heuristic, _) => None,
                (ControllerArg::Dqn, Some(p)) => Some(DqnControllerPolicy::load(&p)?),
                (ControllerArg::Dqn, None) => bail!("--controller dqn needs --controller-ckpt"),
            };
            let cfg = ControllerConfig {
                sim: SimParams { rho, ..SimParams::default() },
                tau,
                period,
                ..ControllerConfig::default()
            };
            let mut channel = net.channel(ds.num_views())?;
            let report = run_mffnet(&ds, &set, &cfg, dqn.as_ref(), &mut channel)?;
            write_report(&report, &out)?;
        }
        Command::TrainController { data, policies, out, seed, episodes } => {
            let ds = read_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            let set = PolicySet::load_dir(&policies)?;
            let mut cfg = ControllerTrainConfig::default();
            cfg.train.seed = seed;
            if let Some(e) = episodes {
                cfg.train.episodes = e;
            }
            train_dqn_controller(&ds, &set, &cfg)?.save(&out)?;
            println!("controller written to {}", out.display());
        }
        Command::Bench { config, out } => {
            let cfg = BenchConfig::load(&config)?;
            let rows = run_matrix(&cfg, &out)?;
            println!("{} cells -> {}", rows.len(), out.display());
            print!("{}", report(&out)?);
        }
        Command::Report { dir } => print!("{}", report(&dir)?),
    }
    Ok(())
}
