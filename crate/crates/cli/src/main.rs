//! Operator entry point for the coalition lab.

mod commands;
mod config;
mod runs;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "coalition",
    about = "UAV-UGV coalition lab: train policies, zone targets, run missions, compare methods",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one vehicle phase with MADDPG or MAPPO.
    Train {
        /// Which vehicle kind to train (the air phase needs a ground run).
        #[arg(long, value_parser = ["ugv", "uav"])]
        phase: String,
        /// Scenario preset: `desk` (small) or `table2` (full parameters).
        #[arg(long, default_value = "desk")]
        preset: String,
        /// Flat config file overriding the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["maddpg", "mappo"], default_value = "maddpg")]
        algo: String,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ground-phase run directory (required for --phase uav).
        #[arg(long)]
        ugv_run: Option<PathBuf>,
        /// Output directory (default `$COALITION_OUT/<phase>` or `out/<phase>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip SVG plot emission.
        #[arg(long)]
        no_plots: bool,
        /// Demo episodes recorded after ground-phase training.
        #[arg(long, default_value_t = 50)]
        demo_episodes: usize,
    },
    /// Roll a trained run's greedy policy and report the metrics.
    Evaluate {
        /// Training run directory.
        run: PathBuf,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster a points file into zones and emit the center table.
    Zone {
        /// CSV file with one `x,y` point per line.
        points: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Run full missions with trained models over randomized spawns.
    Mission {
        /// Ground-phase run directory.
        #[arg(long)]
        ugv_run: PathBuf,
        /// Air-phase run directory (omit for ground-only missions).
        #[arg(long)]
        uav_run: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Total targets per episode, split evenly between kinds.
        #[arg(long, default_value_t = 4)]
        targets: usize,
        /// Obstacles scattered over the field.
        #[arg(long, default_value_t = 2)]
        obstacles: usize,
        /// Coalition shape `GxA`: G coalitions of one UGV each, A UAVs total.
        #[arg(long, default_value = "1x2")]
        coalition: String,
        #[arg(long, value_parser = ["zoned", "no-zoning"], default_value = "zoned")]
        mode: String,
        /// Zone radius in arena units.
        #[arg(long, default_value_t = 0.5)]
        zone_radius: f64,
        /// Half extent of the global field the episode is spawned on.
        #[arg(long, default_value_t = 2.0)]
        field_half_extent: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Method label used in the metrics table.
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Merge metrics tables from several runs into one comparison table.
    Report {
        /// Run directories holding `metrics.csv`.
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Train {
            phase,
            preset,
            config,
            algo,
            episodes,
            seed,
            ugv_run,
            out,
            no_plots,
            demo_episodes,
        } => commands::train::run(commands::train::Args {
            phase,
            preset,
            config,
            algo,
            episodes,
            seed,
            ugv_run,
            out,
            no_plots,
            demo_episodes,
        }),
        Cmd::Evaluate {
            run,
            episodes,
            seed,
            out,
        } => commands::evaluate::run(&run, episodes, seed, out),
        Cmd::Zone {
            points,
            radius,
            out,
            no_plots,
        } => commands::zone::run(&points, radius, out, no_plots),
        Cmd::Mission {
            ugv_run,
            uav_run,
            episodes,
            targets,
            obstacles,
            coalition,
            mode,
            zone_radius,
            field_half_extent,
            seed,
            label,
            out,
            no_plots,
        } => commands::mission::run(commands::mission::Args {
            ugv_run,
            uav_run,
            episodes,
            targets,
            obstacles,
            coalition,
            mode,
            zone_radius,
            field_half_extent,
            seed,
            label,
            out,
            no_plots,
        }),
        Cmd::Report { runs, out } => commands::report::run(&runs, out),
    }
}
