//! `coalition train`: run one training phase and write checkpoints, the
//! learning curve, and (for the ground phase) demonstration tracks.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use coalition_core::artifacts;
use coalition_core::maddpg;
use coalition_core::mappo;
use coalition_core::train_env::{record_demo, TrainEnv};

use crate::config::{Algo, ExperimentConfig};
use crate::runs;

pub struct Args {
    pub phase: String,
    pub preset: String,
    pub config: Option<PathBuf>,
    pub algo: String,
    pub episodes: Option<usize>,
    pub seed: u64,
    pub ugv_run: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub no_plots: bool,
    pub demo_episodes: usize,
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("read {}", path.display()))?;
            ExperimentConfig::from_flat_str(&text)?
        }
        None => ExperimentConfig::preset(&args.preset)?,
    };
    cfg.algo = Algo::parse(&args.algo)?;
    if let Some(episodes) = args.episodes {
        cfg.episodes = episodes;
    }
    cfg.seed = args.seed;
    cfg.world.rng_seed = args.seed;

    let out = runs::resolve_out_dir(args.out, &args.phase);
    std::fs::create_dir_all(&out).with_context(|| format!("create {}", out.display()))?;

    let mut env = match args.phase.as_str() {
        "ugv" => TrainEnv::ugv_phase(cfg.world.clone(), cfg.reward.clone())
            .map_err(|e| anyhow::anyhow!(e))?,
        "uav" => {
            let ugv_run = args.ugv_run.as_ref().ok_or_else(|| {
                anyhow::anyhow!(
                    "--phase uav needs --ugv-run pointing at a trained ground-phase run \
                     (its demo.csv provides the scripted UGV tracks)"
                )
            })?;
            let demo = runs::load_demo(ugv_run)
                .with_context(|| format!("load demo tracks from {}", ugv_run.display()))?;
            TrainEnv::uav_phase(cfg.world.clone(), cfg.reward.clone(), demo)
                .map_err(|e| anyhow::anyhow!(e))?
        }
        other => bail!("unknown phase `{other}`"),
    };

    runs::write_manifest(&out, &cfg, &format!("train --phase {}", args.phase))?;

    let curve = match cfg.algo {
        Algo::Maddpg => {
            let train_cfg = cfg.maddpg_config(env.n_agents());
            let (models, curve) = maddpg::train(&mut env, &train_cfg, cfg.seed)?;
            runs::save_maddpg(&out, &models)?;
            if args.phase == "ugv" && args.demo_episodes > 0 {
                let policies: Vec<_> = (0..models.agents.len()).map(|i| models.policy(i)).collect();
                let refs: Vec<&dyn coalition_core::train_env::Controller> =
                    policies.iter().map(|p| p as _).collect();
                let demo = record_demo(
                    &cfg.world,
                    &cfg.reward,
                    &refs,
                    args.demo_episodes,
                    coalition_core::rng::derive_seed(cfg.seed, 0xde_30),
                )
                .map_err(|e| anyhow::anyhow!(e))?;
                runs::save_demo(&out, &demo)?;
            }
            curve
        }
        Algo::Mappo => {
            let train_cfg = cfg.mappo_config();
            let (models, curve) = mappo::train(&mut env, &train_cfg, cfg.seed)?;
            runs::save_mappo(&out, &models)?;
            if args.phase == "ugv" && args.demo_episodes > 0 {
                let policy = models.policy_controller();
                let refs: Vec<&dyn coalition_core::train_env::Controller> =
                    (0..models.n_agents).map(|_| &policy as _).collect();
                let demo = record_demo(
                    &cfg.world,
                    &cfg.reward,
                    &refs,
                    args.demo_episodes,
                    coalition_core::rng::derive_seed(cfg.seed, 0xde_30),
                )
                .map_err(|e| anyhow::anyhow!(e))?;
                runs::save_demo(&out, &demo)?;
            }
            curve
        }
    };

    artifacts::write_text(&out.join("curve.csv"), &artifacts::curve_to_csv(&curve))?;
    if !args.no_plots {
        artifacts::write_text(&out.join("curve.svg"), &artifacts::curve_to_svg(&curve))?;
    }

    let last = curve.iter().rev().take(100.min(curve.len()));
    let count = last.len().max(1);
    let mean: f64 = curve.iter().rev().take(100).map(|s| s.ret).sum::<f64>() / count as f64;
    println!(
        "trained {} episodes ({} phase, {}); last-100 mean return {mean:.2}; artifacts in {}",
        curve.len(),
        args.phase,
        cfg.algo.label(),
        out.display()
    );
    Ok(())
}
