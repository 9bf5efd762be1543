//! `coalition evaluate`: greedy rollouts of a trained run on its training
//! scenario, with per-episode records and the summary metrics.

use std::path::PathBuf;

use anyhow::{Context, Result};

use coalition_core::artifacts::{self, ComparisonTable};
use coalition_core::evaluation::{self, EpisodeGeometry, EpisodeRecord, VehiclePath};
use coalition_core::train_env::{TrainEnv, TrainPhase};
use coalition_core::world::Action;

use crate::runs;

pub fn run(run_dir: &PathBuf, episodes: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let cfg = runs::load_config(run_dir)
        .with_context(|| format!("load config from {}", run_dir.display()))?;
    let meta = runs::load_model_meta(run_dir)?;
    let controllers = runs::load_agent_controllers(run_dir)?;

    let mut env = match meta.phase {
        TrainPhase::Ugv => TrainEnv::ugv_phase(cfg.world.clone(), cfg.reward.clone())
            .map_err(|e| anyhow::anyhow!(e))?,
        TrainPhase::Uav => {
            let demo = runs::load_demo(run_dir).or_else(|_| {
                anyhow::bail!(
                    "evaluating an air-phase run needs demo.csv next to the checkpoints"
                )
            })?;
            TrainEnv::uav_phase(cfg.world.clone(), cfg.reward.clone(), demo)
                .map_err(|e| anyhow::anyhow!(e))?
        }
    };
    if controllers.len() != env.n_agents() {
        anyhow::bail!(
            "run holds {} controllers but the scenario has {} agents",
            controllers.len(),
            env.n_agents()
        );
    }
    if controllers[0].obs_dim() != env.obs_dim() {
        anyhow::bail!(
            "incompatible model/observation dimensions: model expects {}, scenario produces {}",
            controllers[0].obs_dim(),
            env.obs_dim()
        );
    }

    let out = runs::resolve_out_dir(out, "evaluate");
    std::fs::create_dir_all(&out).with_context(|| format!("create {}", out.display()))?;
    let mut eval_cfg = cfg.clone();
    eval_cfg.seed = seed;
    runs::write_manifest(&out, &eval_cfg, "evaluate")?;

    let kind = env.phase.agent_kind();
    let mut records = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut obs = env.reset(seed, ep);
        let mut paths: Vec<Vec<_>> = (0..env.n_agents())
            .map(|i| {
                let agents = match kind {
                    coalition_core::world::AgentKind::Ugv => &env.state().ugvs,
                    coalition_core::world::AgentKind::Uav => &env.state().uavs,
                };
                vec![agents[i].pos]
            })
            .collect();
        let (mut alpha, mut beta) = (0usize, 0usize);
        let mut steps = 0usize;
        let mut completed = false;
        let geometry = EpisodeGeometry {
            ground_targets: env.state().ground_targets.iter().map(|(p, _)| *p).collect(),
            aerial_targets: env.state().aerial_targets.iter().map(|(p, _)| *p).collect(),
            obstacles: env.state().obstacles.clone(),
            reach_threshold: cfg.world.reach_threshold,
            danger: cfg.world.danger,
        };
        for _ in 0..env.max_steps() {
            let actions: Vec<Action> = controllers
                .iter()
                .zip(&obs)
                .map(|(c, o)| c.act(o))
                .collect();
            let outcome = env.step(&actions).map_err(|e| anyhow::anyhow!(e))?;
            steps += 1;
            alpha += outcome.collisions.0;
            beta += outcome.collisions.1;
            let agents = match kind {
                coalition_core::world::AgentKind::Ugv => &env.state().ugvs,
                coalition_core::world::AgentKind::Uav => &env.state().uavs,
            };
            for (i, path) in paths.iter_mut().enumerate() {
                path.push(agents[i].pos);
            }
            obs = outcome.observations;
            if outcome.done {
                completed = true;
                break;
            }
            if outcome.truncated {
                break;
            }
        }
        let state = env.state();
        let reached = state.ground_targets.iter().filter(|(_, r)| *r).count()
            + state.aerial_targets.iter().filter(|(_, r)| *r).count();
        let total = state.ground_targets.len() + state.aerial_targets.len();
        records.push(EpisodeRecord {
            phi: steps,
            alpha,
            beta,
            completed,
            targets_total: total,
            targets_reached: reached,
            paths: paths
                .into_iter()
                .enumerate()
                .map(|(i, points)| VehiclePath {
                    kind,
                    id: i,
                    points,
                })
                .collect(),
            geometry,
        });
    }

    artifacts::write_text(&out.join("episodes.csv"), &artifacts::records_to_csv(&records))?;

    let label = format!("{}-{}", meta.algo.label(), meta.phase.label());
    let mut table = ComparisonTable::default();
    let config_desc = format!("episodes={episodes},seed={seed}");
    table.push(&label, &config_desc, "completion_rate", evaluation::completion_rate(&records)?);
    table.push(&label, &config_desc, "collisions_per_1k", evaluation::collisions_per_1k(&records)?);
    table.push(&label, &config_desc, "mean_steps", evaluation::mean_steps(&records)?);
    if let Some(v) = evaluation::mean_steps_completed(&records)? {
        table.push(&label, &config_desc, "mean_steps_completed", v);
    }
    table.push(&label, &config_desc, "accuracy", evaluation::accuracy(&records)?);
    table.push(&label, &config_desc, "completion_time", evaluation::completion_time(&records)?);
    artifacts::write_text(&out.join("metrics.csv"), &table.to_csv())?;

    for (_, _, metric, value) in &table.rows {
        println!("{metric} = {value:.4}");
    }
    println!("episode records in {}", out.display());
    Ok(())
}
