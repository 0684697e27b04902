//! Command-line surface: train, test, shield-audit, and plot.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use drlsl::config::{merge_file_over, AgentKind, RunConfig};
use drlsl::run::{
    convergence_episode, moving_average, read_curve_columns, test_all, train_all, write_metrics,
};
use highway::shield::{run_audit, Shield};
use highway::types::Direction;

#[derive(Parser)]
#[command(name = "drlsl", about = "Shielded deep Q-learning for highway lane-change decisions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON run configuration; values in the file override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Agent variant: dqn or dqnsl.
    #[arg(long)]
    agent: Option<String>,
    /// Master seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Training episodes.
    #[arg(long)]
    episodes: Option<u64>,
    /// Ego travel direction: left_to_right or right_to_left.
    #[arg(long)]
    direction: Option<String>,
    /// Disable the shield during training (DQN baseline only).
    #[arg(long)]
    shield_off: bool,
    /// Replay a recorded track file instead of synthetic traffic.
    #[arg(long)]
    track_file: Option<PathBuf>,
    /// Ego spawn lane.
    #[arg(long)]
    spawn_lane: Option<u8>,
    /// Save an intermediate checkpoint every N episodes.
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Episodes for the test protocol.
    #[arg(long)]
    test_episodes: Option<u64>,
    /// Output directory (default: $DRLSL_OUT or ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write metrics plus checkpoints.
    Train(ConfigArgs),
    /// Evaluate a checkpoint greedily with the shield off.
    Test {
        #[command(flatten)]
        common: ConfigArgs,
        /// Checkpoint produced by train.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Cross-check the rule-based safe sets against the geometric reference
    /// on the exhaustive micro-scene grid.
    ShieldAudit {
        #[command(flatten)]
        common: ConfigArgs,
        /// Alternative rule file (defaults to the shipped rules).
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Emit plot-ready moving-average curves from a metrics file.
    Plot {
        /// Metrics file written by train.
        #[arg(long)]
        metrics: PathBuf,
        /// Moving-average window.
        #[arg(long, default_value_t = 50)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_direction(s: &str) -> Result<Direction> {
    match s {
        "left_to_right" => Ok(Direction::LeftToRight),
        "right_to_left" => Ok(Direction::RightToLeft),
        other => bail!("unknown direction '{other}'"),
    }
}

fn resolve_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(agent) = &args.agent {
        cfg.agent = agent.parse().map_err(|e: String| anyhow::anyhow!(e))?;
        if cfg.agent == AgentKind::Dqn {
            cfg.shield_on = false;
        }
    }
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(episodes) = args.episodes {
        cfg.episodes = episodes;
    }
    if let Some(direction) = &args.direction {
        cfg.direction = parse_direction(direction)?;
    }
    if args.shield_off {
        cfg.shield_on = false;
    }
    if let Some(track_file) = &args.track_file {
        cfg.track_file = Some(track_file.clone());
    }
    if let Some(lane) = args.spawn_lane {
        cfg.spawn_lane = Some(lane);
    }
    if let Some(every) = args.checkpoint_every {
        cfg.checkpoint_every = Some(every);
    }
    if let Some(n) = args.test_episodes {
        cfg.test_episodes = n;
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg = merge_file_over(&cfg, &file)?;
    }
    cfg.validate().map_err(|e| anyhow::anyhow!(e))?;
    Ok(cfg)
}

fn out_dir(args: &ConfigArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os("DRLSL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => {
            let cfg = resolve_config(&args)?;
            let out = out_dir(&args);
            let runs = train_all(&cfg, Some(&out))?;
            for run in &runs {
                let last = run.metrics.last().expect("at least one episode");
                let rewards: Vec<f64> = run.metrics.iter().map(|m| m.reward).collect();
                let collisions = run.metrics.iter().filter(|m| m.collision).count();
                let ego_caused =
                    run.metrics.iter().filter(|m| m.collision && m.ego_caused).count();
                let off_road = run.metrics.iter().filter(|m| m.off_road).count();
                println!(
                    "seed {}: {} episodes, final reward {:.2}, collisions {} (ego-caused {}), off-road {}, convergence episode {}",
                    run.seed,
                    run.metrics.len(),
                    last.reward,
                    collisions,
                    ego_caused,
                    off_road,
                    convergence_episode(&rewards, 50),
                );
            }
            println!("outputs in {}", out.display());
        }
        Command::Test { common, checkpoint } => {
            let cfg = resolve_config(&common)?;
            let cp = highway::checkpoint::load(&checkpoint)
                .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
            let (summary, per_seed) = test_all(&cfg, &cp)?;
            let out = out_dir(&common);
            std::fs::create_dir_all(&out)?;
            for (seed, _, rows) in &per_seed {
                write_metrics(&out.join(format!("test_metrics_seed_{seed}.csv")), rows)?;
            }
            std::fs::write(
                out.join("test_summary.csv"),
                format!(
                    "episodes,lane_changes,collisions,ego_caused_collisions,off_road,mean_steps\n{},{},{},{},{},{}\n",
                    summary.episodes,
                    summary.lane_changes,
                    summary.collisions,
                    summary.ego_caused_collisions,
                    summary.off_road,
                    summary.mean_steps,
                ),
            )?;
            println!("episodes        {}", summary.episodes);
            println!("lane changes    {}", summary.lane_changes);
            println!(
                "collisions      {} (ego-caused {})",
                summary.collisions, summary.ego_caused_collisions
            );
            println!("off road        {}", summary.off_road);
            println!("mean time steps {:.1}", summary.mean_steps);
        }
        Command::ShieldAudit { common, rules } => {
            let cfg = resolve_config(&common)?;
            let shield = match &rules {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading rules {}", path.display()))?;
                    Shield::new(cfg.shield, cfg.track.clone(), &text)?
                }
                None => Shield::with_default_rules(cfg.shield, cfg.track.clone())?,
            };
            let report = run_audit(&shield, &cfg.track)?;
            println!(
                "{} scenes, {} agree ({:.2}%)",
                report.scenes,
                report.agreements,
                100.0 * report.agreement_fraction()
            );
            for mismatch in report.mismatches.iter().take(20) {
                println!(
                    "MISMATCH ({:?}) {}: rules {:?} vs geometry {:?}",
                    mismatch.kind, mismatch.description, mismatch.from_rules, mismatch.from_geometry
                );
            }
            if !report.mismatches.is_empty() {
                std::process::exit(1);
            }
        }
        Command::Plot { metrics, window, out } => {
            let columns = read_curve_columns(&metrics)?;
            if columns.len() < window {
                bail!("{} episodes is fewer than the window {window}", columns.len());
            }
            let series: Vec<Vec<f64>> =
                (0..5).map(|c| columns.iter().map(|r| r[c]).collect()).collect();
            let averaged: Vec<Vec<f64>> =
                series.iter().map(|s| moving_average(s, window)).collect();
            let out_path = out.unwrap_or_else(|| metrics.with_file_name("curves.csv"));
            let mut text = String::from(
                "episode,reward_ma,lane_change_ma,velocity_ma,collision_ma,off_road_ma\n",
            );
            for (i, reward_ma) in averaged[0].iter().enumerate() {
                text.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    i + window - 1,
                    reward_ma,
                    averaged[1][i],
                    averaged[2][i],
                    averaged[3][i],
                    averaged[4][i],
                ));
            }
            std::fs::write(&out_path, text)?;
            let rewards: Vec<f64> = columns.iter().map(|r| r[0]).collect();
            println!("convergence episode: {}", convergence_episode(&rewards, window));
            println!("curves written to {}", out_path.display());
        }
    }
    Ok(())
}
