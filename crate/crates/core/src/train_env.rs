//! Episode environment the trainers run against.
//!
//! Training is split into two phases. The ground phase trains UGVs alone
//! against ground targets and obstacles. The air phase trains UAVs against
//! aerial targets and obstacles while scripted UGVs replay demonstration
//! tracks recorded from the trained ground policy, giving the UAVs a moving
//! landing pad to home on.

use crate::geom::Vec2;
use crate::reward::{agent_reward, RewardBreakdown, RewardParams};
use crate::rng;
use crate::world::{self, Action, AgentKind, Observation, WorldConfig, WorldError, WorldState};

/// Anything that maps an observation to a velocity command. Implemented by
/// trained policies; used for demo recording and mission execution.
pub trait Controller {
    fn act(&self, obs: &[f64]) -> Action;
    /// Expected observation width, for compatibility checks.
    fn obs_dim(&self) -> usize;
}

/// Scripted UGV tracks for the air-phase environment: per episode, per UGV,
/// per step positions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemoLog {
    pub episodes: Vec<Vec<Vec<Vec2>>>,
}

impl DemoLog {
    pub fn n_ugvs(&self) -> usize {
        self.episodes.first().map(|e| e.len()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.episodes.is_empty() {
            return Err("demo log holds no episodes".into());
        }
        let n = self.n_ugvs();
        if n == 0 {
            return Err("demo episodes hold no UGV tracks".into());
        }
        for (e, ep) in self.episodes.iter().enumerate() {
            if ep.len() != n {
                return Err(format!("demo episode {e} has {} tracks, expected {n}", ep.len()));
            }
            if ep.iter().any(|track| track.is_empty()) {
                return Err(format!("demo episode {e} has an empty track"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainPhase {
    Ugv,
    Uav,
}

impl TrainPhase {
    pub fn agent_kind(self) -> AgentKind {
        match self {
            TrainPhase::Ugv => AgentKind::Ugv,
            TrainPhase::Uav => AgentKind::Uav,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TrainPhase::Ugv => "ugv",
            TrainPhase::Uav => "uav",
        }
    }
}

/// Step outcome handed back to the trainers.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    pub rewards: Vec<RewardBreakdown>,
    /// Task completion (all targets reached; air phase also needs all UAVs
    /// landed). Time-limit truncation is reported separately.
    pub done: bool,
    pub truncated: bool,
    /// Real collisions among the trained agents this step (agent-agent,
    /// agent-obstacle).
    pub collisions: (usize, usize),
}

/// A resettable scenario binding a world config, reward shaping, and phase.
#[derive(Debug, Clone)]
pub struct TrainEnv {
    pub world_cfg: WorldConfig,
    pub reward: RewardParams,
    pub phase: TrainPhase,
    demo: Option<DemoLog>,
    state: WorldState,
    episode_index: usize,
    demo_episode: usize,
}

impl TrainEnv {
    /// Ground-phase environment: UGVs, ground targets, obstacles.
    pub fn ugv_phase(world_cfg: WorldConfig, reward: RewardParams) -> Result<Self, String> {
        let mut cfg = world_cfg;
        cfg.n_uav = 0;
        cfg.n_aerial_target = 0;
        cfg.validate()?;
        reward.validate()?;
        if cfg.n_ugv == 0 {
            return Err("ground phase needs at least one UGV".into());
        }
        let state = world::spawn(&cfg, cfg.rng_seed).map_err(|e| e.to_string())?;
        Ok(TrainEnv {
            world_cfg: cfg,
            reward,
            phase: TrainPhase::Ugv,
            demo: None,
            state,
            episode_index: 0,
            demo_episode: 0,
        })
    }

    /// Air-phase environment: UAVs and aerial targets, with UGVs replayed
    /// from `demo` tracks.
    pub fn uav_phase(
        world_cfg: WorldConfig,
        reward: RewardParams,
        demo: DemoLog,
    ) -> Result<Self, String> {
        demo.validate()?;
        let mut cfg = world_cfg;
        cfg.n_ground_target = 0;
        cfg.n_ugv = demo.n_ugvs();
        cfg.validate()?;
        reward.validate()?;
        if cfg.n_uav == 0 {
            return Err("air phase needs at least one UAV".into());
        }
        if cfg.n_uav > cfg.n_aerial_target {
            return Err(format!(
                "air phase needs one target per UAV ({} UAVs vs {} targets): \
                 surplus UAVs could never reach and land",
                cfg.n_uav, cfg.n_aerial_target
            ));
        }
        let state = world::spawn(&cfg, cfg.rng_seed).map_err(|e| e.to_string())?;
        Ok(TrainEnv {
            world_cfg: cfg,
            reward,
            phase: TrainPhase::Uav,
            demo: Some(demo),
            state,
            episode_index: 0,
            demo_episode: 0,
        })
    }

    pub fn n_agents(&self) -> usize {
        match self.phase {
            TrainPhase::Ugv => self.world_cfg.n_ugv,
            TrainPhase::Uav => self.world_cfg.n_uav,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.state.observation_len(self.phase.agent_kind())
    }

    pub fn max_steps(&self) -> usize {
        self.world_cfg.max_steps
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    /// Start episode `episode` of run `seed` and return initial observations.
    pub fn reset(&mut self, seed: u64, episode: usize) -> Vec<Observation> {
        let spawn_seed = rng::derive_seed(seed, 0x0e50_0000 ^ episode as u64);
        self.state = world::spawn(&self.world_cfg, spawn_seed).expect("spawn within budget");
        self.episode_index = episode;
        if let Some(demo) = &self.demo {
            self.demo_episode = episode % demo.episodes.len();
            let tracks = &demo.episodes[self.demo_episode];
            for (g, track) in tracks.iter().enumerate() {
                self.state.ugvs[g].pos = track[0];
                self.state.ugvs[g].vel = Vec2::ZERO;
            }
        }
        self.state.reassign_targets_greedy();
        self.observations()
    }

    pub fn observations(&self) -> Vec<Observation> {
        let kind = self.phase.agent_kind();
        (0..self.n_agents()).map(|i| self.state.observe(i, kind)).collect()
    }

    /// Advance one step under the trained agents' actions; scripted UGVs in
    /// the air phase move along their demo track.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome, WorldError> {
        if actions.len() != self.n_agents() {
            return Err(WorldError::ActionCountMismatch {
                expected: self.n_agents(),
                got: actions.len(),
            });
        }
        let mut all_actions = Vec::with_capacity(self.state.n_agents());
        match self.phase {
            TrainPhase::Ugv => all_actions.extend_from_slice(actions),
            TrainPhase::Uav => {
                let demo = self.demo.as_ref().expect("air phase has a demo log");
                let tracks = &demo.episodes[self.demo_episode];
                let t = self.state.step_index;
                for track in tracks.iter() {
                    let here = track[t.min(track.len() - 1)];
                    let next = track[(t + 1).min(track.len() - 1)];
                    all_actions.push(Action::new(next.x - here.x, next.y - here.y));
                }
                all_actions.extend_from_slice(actions);
            }
        }

        let (mut next, report) = self.state.step(&all_actions)?;

        // Landing: a UAV that has finished its target docks once it touches a
        // UGV; docked UAVs ride their carrier from then on.
        if self.phase == TrainPhase::Uav {
            for i in 0..next.uavs.len() {
                if next.uavs[i].landed_on.is_none() && next.uavs[i].reached_target {
                    if let Some((g, d)) = next.nearest_ugv(next.uavs[i].pos) {
                        if d <= self.world_cfg.reach_threshold {
                            next.uavs[i].landed_on = Some(g);
                            next.uavs[i].pos = next.ugvs[g].pos;
                            next.uavs[i].vel = next.ugvs[g].vel;
                        }
                    }
                }
            }
        }
        next.reassign_targets_greedy();

        let kind = self.phase.agent_kind();
        let rewards: Vec<RewardBreakdown> = (0..self.n_agents())
            .map(|i| agent_reward(&next, kind, i, &self.reward))
            .collect();

        let mut agent_agent = 0;
        let mut agent_obstacle = 0;
        for event in &report.events {
            if event.severity != world::Proximity::Real {
                continue;
            }
            match event.pair {
                world::CollisionPair::AgentAgent { kind: k, .. } if k == kind => agent_agent += 1,
                world::CollisionPair::AgentObstacle { kind: k, .. } if k == kind => {
                    agent_obstacle += 1
                }
                _ => {}
            }
        }

        let done = match self.phase {
            TrainPhase::Ugv => next.ground_targets.iter().all(|(_, r)| *r),
            TrainPhase::Uav => {
                next.aerial_targets.iter().all(|(_, r)| *r) && next.all_uavs_landed()
            }
        };
        let truncated = !done && next.step_index >= self.world_cfg.max_steps;

        self.state = next;
        Ok(StepOutcome {
            observations: self.observations(),
            rewards,
            done,
            truncated,
            collisions: (agent_agent, agent_obstacle),
        })
    }
}

/// Roll frozen controllers through `episodes` ground-phase episodes and
/// record the UGV tracks as a demo log for air-phase training.
pub fn record_demo(
    env_cfg: &WorldConfig,
    reward: &RewardParams,
    controllers: &[&dyn Controller],
    episodes: usize,
    seed: u64,
) -> Result<DemoLog, String> {
    let mut env = TrainEnv::ugv_phase(env_cfg.clone(), reward.clone())?;
    if controllers.len() != env.n_agents() {
        return Err(format!(
            "need {} controllers, got {}",
            env.n_agents(),
            controllers.len()
        ));
    }
    let mut log = DemoLog::default();
    for ep in 0..episodes {
        let mut obs = env.reset(seed, ep);
        let mut tracks: Vec<Vec<Vec2>> = env.state().ugvs.iter().map(|a| vec![a.pos]).collect();
        for _ in 0..env.max_steps() {
            let actions: Vec<Action> = controllers
                .iter()
                .zip(&obs)
                .map(|(c, o)| c.act(o))
                .collect();
            let outcome = env.step(&actions).map_err(|e| e.to_string())?;
            for (g, track) in tracks.iter_mut().enumerate() {
                track.push(env.state().ugvs[g].pos);
            }
            obs = outcome.observations;
            if outcome.done || outcome.truncated {
                break;
            }
        }
        log.episodes.push(tracks);
    }
    Ok(log)
}
