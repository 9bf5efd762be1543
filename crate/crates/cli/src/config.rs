//! Experiment configuration: one flat `key = value` file tying together the
//! world, zoning, reward, and training settings of a run, plus the two
//! shipped presets.

use anyhow::{bail, Context, Result};

use coalition_core::maddpg::MaddpgConfig;
use coalition_core::mappo::MappoConfig;
use coalition_core::reward::RewardParams;
use coalition_core::world::WorldConfig;
use coalition_core::zoning::MeanShiftConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Maddpg,
    Mappo,
}

impl Algo {
    pub fn label(self) -> &'static str {
        match self {
            Algo::Maddpg => "maddpg",
            Algo::Mappo => "mappo",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "maddpg" => Ok(Algo::Maddpg),
            "mappo" => Ok(Algo::Mappo),
            other => bail!("unknown algorithm `{other}` (expected maddpg or mappo)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub zoning: MeanShiftConfig,
    pub reward: RewardParams,
    pub algo: Algo,
    /// Training episode budget.
    pub episodes: usize,
    pub k_per_zone: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldConfig::default(),
            zoning: MeanShiftConfig::with_radius(1.0),
            reward: RewardParams::default(),
            algo: Algo::Maddpg,
            episodes: 5000,
            k_per_zone: 1,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Small scenario sized for a single desktop core: one UGV clearing two
    /// ground targets around one obstacle, two UAVs in the air phase.
    pub fn desk() -> Self {
        ExperimentConfig {
            world: WorldConfig {
                n_ugv: 1,
                n_uav: 2,
                n_obstacle: 1,
                n_ground_target: 2,
                n_aerial_target: 2,
                max_speed: 0.08,
                max_steps: 70,
                ..WorldConfig::default()
            },
            zoning: MeanShiftConfig::with_radius(0.5),
            ..ExperimentConfig::default()
        }
    }

    /// Full simulation-parameter preset: metric quantities mapped through
    /// 25 m per arena unit (zone radius 25 m spans one unit, speed 1 m/s is
    /// 0.04 units per step).
    pub fn table2() -> Self {
        ExperimentConfig {
            world: WorldConfig {
                n_ugv: 2,
                n_uav: 8,
                n_obstacle: 3,
                n_ground_target: 5,
                n_aerial_target: 5,
                max_speed: 0.04,
                max_steps: 70,
                meters_per_unit: 25.0,
                ..WorldConfig::default()
            },
            zoning: MeanShiftConfig::with_radius(1.0),
            ..ExperimentConfig::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "table2" => Ok(Self::table2()),
            other => bail!("unknown preset `{other}` (expected desk or table2)"),
        }
    }

    /// Training-parameter preset for the configured scenario.
    pub fn maddpg_config(&self, n_agents: usize) -> MaddpgConfig {
        MaddpgConfig::preset(n_agents, self.episodes, self.world.max_steps)
    }

    pub fn mappo_config(&self) -> MappoConfig {
        MappoConfig::preset(self.episodes, self.world.max_steps)
    }

    pub fn to_flat_string(&self) -> String {
        let mut s = String::new();
        for line in self.world.to_flat_string().lines() {
            s.push_str("world.");
            s.push_str(line);
            s.push('\n');
        }
        s.push_str(&format!("zoning.radius = {}\n", self.zoning.radius));
        s.push_str(&format!("zoning.shift_tolerance = {}\n", self.zoning.shift_tolerance));
        s.push_str(&format!("zoning.max_iterations = {}\n", self.zoning.max_iterations));
        s.push_str(&format!("zoning.merge_tolerance = {}\n", self.zoning.merge_tolerance));
        s.push_str(&format!("reward.t1_scale = {}\n", self.reward.t1_scale));
        s.push_str(&format!("reward.max_pair_penalty = {}\n", self.reward.max_pair_penalty));
        s.push_str(&format!(
            "reward.max_obstacle_penalty = {}\n",
            self.reward.max_obstacle_penalty
        ));
        s.push_str(&format!("reward.r_t = {}\n", self.reward.r_t));
        s.push_str(&format!("algo = {}\n", self.algo.label()));
        s.push_str(&format!("episodes = {}\n", self.episodes));
        s.push_str(&format!("k_per_zone = {}\n", self.k_per_zone));
        s.push_str(&format!("seed = {}\n", self.seed));
        s
    }

    pub fn from_flat_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut world_lines = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            let parse_f = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .with_context(|| format!("line {}: {key}", lineno + 1))
            };
            if let Some(world_key) = key.strip_prefix("world.") {
                world_lines.push_str(world_key);
                world_lines.push_str(" = ");
                world_lines.push_str(value);
                world_lines.push('\n');
                continue;
            }
            match key {
                "zoning.radius" => cfg.zoning.radius = parse_f()?,
                "zoning.shift_tolerance" => cfg.zoning.shift_tolerance = parse_f()?,
                "zoning.max_iterations" => {
                    cfg.zoning.max_iterations = value
                        .parse()
                        .with_context(|| format!("line {}: {key}", lineno + 1))?
                }
                "zoning.merge_tolerance" => cfg.zoning.merge_tolerance = parse_f()?,
                "reward.t1_scale" => cfg.reward.t1_scale = parse_f()?,
                "reward.max_pair_penalty" => cfg.reward.max_pair_penalty = parse_f()?,
                "reward.max_obstacle_penalty" => cfg.reward.max_obstacle_penalty = parse_f()?,
                "reward.r_t" => cfg.reward.r_t = parse_f()?,
                "algo" => cfg.algo = Algo::parse(value)?,
                "episodes" => {
                    cfg.episodes = value
                        .parse()
                        .with_context(|| format!("line {}: episodes", lineno + 1))?
                }
                "k_per_zone" => {
                    cfg.k_per_zone = value
                        .parse()
                        .with_context(|| format!("line {}: k_per_zone", lineno + 1))?
                }
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .with_context(|| format!("line {}: seed", lineno + 1))?
                }
                other => bail!("line {}: unknown key `{other}`", lineno + 1),
            }
        }
        if !world_lines.is_empty() {
            cfg.world = WorldConfig::from_flat_str(&world_lines)
                .map_err(|e| anyhow::anyhow!("world config: {e}"))?;
        }
        // Danger-zone geometry is shared between the world and the reward.
        cfg.reward.danger = cfg.world.danger;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip_is_identity() {
        let mut cfg = ExperimentConfig::table2();
        cfg.seed = 99;
        cfg.episodes = 1234;
        cfg.algo = Algo::Mappo;
        let text = cfg.to_flat_string();
        let back = ExperimentConfig::from_flat_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_flat_str("bogus = 1\n").is_err());
    }

    #[test]
    fn presets_resolve_by_name() {
        assert!(ExperimentConfig::preset("desk").is_ok());
        assert!(ExperimentConfig::preset("table2").is_ok());
        assert!(ExperimentConfig::preset("nope").is_err());
    }
}
