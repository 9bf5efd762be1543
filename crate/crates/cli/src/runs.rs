//! Run-directory layout: checkpoints, manifests, and model reloading.
//!
//! A training run directory holds `config.txt` (flat experiment config),
//! `manifest.txt` (enough to replay the run bit-identically), the learning
//! curve, per-net checkpoints, and for the ground phase a `demo.csv` with
//! recorded UGV tracks.

use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use coalition_core::artifacts;
use coalition_core::maddpg::{MaddpgModels, MaddpgPolicy};
use coalition_core::mappo::{MappoModels, MappoPolicy};
use coalition_core::neural::Mlp;
use coalition_core::train_env::{Controller, DemoLog, TrainPhase};

use crate::config::{Algo, ExperimentConfig};

/// Format version of the run-directory layout itself.
pub const RUN_FORMAT_VERSION: u32 = 1;

pub fn write_manifest(dir: &Path, cfg: &ExperimentConfig, command: &str) -> Result<()> {
    let flat = cfg.to_flat_string();
    let mut hasher = Sha256::new();
    hasher.update(flat.as_bytes());
    let hash = hasher.finalize();
    let hash_hex: String = hash.iter().take(8).map(|b| format!("{b:02x}")).collect();

    let describe = Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string());

    let manifest = format!(
        "command = {command}\nconfig_hash = {hash_hex}\nseed = {}\nrun_format_version = {RUN_FORMAT_VERSION}\ncode_version = {describe}\n",
        cfg.seed
    );
    artifacts::write_text(&dir.join("manifest.txt"), &manifest)?;
    artifacts::write_text(&dir.join("config.txt"), &flat)?;
    Ok(())
}

pub fn load_config(dir: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(dir.join("config.txt"))
        .with_context(|| format!("read {}", dir.join("config.txt").display()))?;
    ExperimentConfig::from_flat_str(&text)
}

pub fn save_maddpg(dir: &Path, models: &MaddpgModels) -> Result<()> {
    for (i, nets) in models.agents.iter().enumerate() {
        nets.actor.save(&dir.join(format!("actor_{i}.mlp")))?;
        nets.critic.save(&dir.join(format!("critic_{i}.mlp")))?;
    }
    let meta = format!(
        "algo = maddpg\nphase = {}\nn_agents = {}\nobs_dim = {}\naction_scale_bits = {:#018x}\n",
        models.phase.label(),
        models.agents.len(),
        models.obs_dim,
        models.action_scale.to_bits()
    );
    artifacts::write_text(&dir.join("model.txt"), &meta)?;
    Ok(())
}

pub fn save_mappo(dir: &Path, models: &MappoModels) -> Result<()> {
    models.policy.save(&dir.join("policy.mlp"))?;
    models.value.save(&dir.join("value.mlp"))?;
    let meta = format!(
        "algo = mappo\nphase = {}\nn_agents = {}\nobs_dim = {}\naction_scale_bits = {:#018x}\nlog_std_bits = {:#018x},{:#018x}\n",
        models.phase.label(),
        models.n_agents,
        models.obs_dim,
        models.action_scale.to_bits(),
        models.log_std[0].to_bits(),
        models.log_std[1].to_bits()
    );
    artifacts::write_text(&dir.join("model.txt"), &meta)?;
    Ok(())
}

/// Minimal model metadata parsed back from `model.txt`.
#[derive(Debug, Clone)]
pub struct ModelMeta {
    pub algo: Algo,
    pub phase: TrainPhase,
    pub n_agents: usize,
    pub action_scale: f64,
}

pub fn load_model_meta(dir: &Path) -> Result<ModelMeta> {
    let path = dir.join("model.txt");
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("read {}", path.display()))?;
    let mut algo = None;
    let mut phase = None;
    let mut n_agents = None;
    let mut action_scale = None;
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "algo" => algo = Some(Algo::parse(value)?),
            "phase" => {
                phase = Some(match value {
                    "ugv" => TrainPhase::Ugv,
                    "uav" => TrainPhase::Uav,
                    other => bail!("{}: unknown phase `{other}`", path.display()),
                })
            }
            "n_agents" => n_agents = Some(value.parse()?),
            "action_scale_bits" => {
                let bits = u64::from_str_radix(value.trim_start_matches("0x"), 16)?;
                action_scale = Some(f64::from_bits(bits));
            }
            _ => {}
        }
    }
    Ok(ModelMeta {
        algo: algo.context("model.txt missing algo")?,
        phase: phase.context("model.txt missing phase")?,
        n_agents: n_agents.context("model.txt missing n_agents")?,
        action_scale: action_scale.context("model.txt missing action_scale_bits")?,
    })
}

/// Load the execution controller (deterministic policy) from a run dir.
/// MADDPG runs expose agent 0's actor; homogeneous agents share behavior.
pub fn load_controller(dir: &Path) -> Result<Box<dyn Controller>> {
    let meta = load_model_meta(dir)?;
    match meta.algo {
        Algo::Maddpg => {
            let actor = Mlp::load(&dir.join("actor_0.mlp"))?;
            Ok(Box::new(MaddpgPolicy {
                actor,
                action_scale: meta.action_scale,
            }))
        }
        Algo::Mappo => {
            let mean_net = Mlp::load(&dir.join("policy.mlp"))?;
            Ok(Box::new(MappoPolicy {
                mean_net,
                action_scale: meta.action_scale,
            }))
        }
    }
}

/// Per-agent controllers for evaluation rollouts.
pub fn load_agent_controllers(dir: &Path) -> Result<Vec<Box<dyn Controller>>> {
    let meta = load_model_meta(dir)?;
    match meta.algo {
        Algo::Maddpg => (0..meta.n_agents)
            .map(|i| {
                let actor = Mlp::load(&dir.join(format!("actor_{i}.mlp")))?;
                Ok(Box::new(MaddpgPolicy {
                    actor,
                    action_scale: meta.action_scale,
                }) as Box<dyn Controller>)
            })
            .collect(),
        Algo::Mappo => {
            let mean_net = Mlp::load(&dir.join("policy.mlp"))?;
            Ok((0..meta.n_agents)
                .map(|_| {
                    Box::new(MappoPolicy {
                        mean_net: mean_net.clone(),
                        action_scale: meta.action_scale,
                    }) as Box<dyn Controller>
                })
                .collect())
        }
    }
}

pub fn save_demo(dir: &Path, demo: &DemoLog) -> Result<()> {
    artifacts::write_text(&dir.join("demo.csv"), &artifacts::demo_to_csv(demo))?;
    Ok(())
}

pub fn load_demo(dir: &Path) -> Result<DemoLog> {
    let path = dir.join("demo.csv");
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("read {}", path.display()))?;
    let demo = artifacts::demo_from_csv(&text, &path.display().to_string())?;
    demo.validate().map_err(|e| anyhow::anyhow!(e))?;
    Ok(demo)
}

/// Resolve the output directory: explicit flag, else `$COALITION_OUT/<name>`,
/// else `out/<name>`.
pub fn resolve_out_dir(explicit: Option<PathBuf>, name: &str) -> PathBuf {
    match explicit {
        Some(p) => p,
        None => {
            let root = std::env::var("COALITION_OUT").unwrap_or_else(|_| "out".to_string());
            Path::new(&root).join(name)
        }
    }
}
