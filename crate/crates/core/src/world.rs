//! Deterministic 2D particle world: entity state, velocity-command dynamics,
//! per-agent observation construction, danger-zone collision detection, and
//! post-hoc constraint checking over episode logs.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::EpisodeRecord;
use crate::geom::Vec2;
use crate::rng;

/// Total rejection-sampling budget for one spawn before giving up.
const SPAWN_ATTEMPT_BUDGET: usize = 10_000;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("could not place {failed} entities without overlap in {budget} attempts; arena overcrowded")]
    SpawnOvercrowded { failed: usize, budget: usize },
    #[error("expected {expected} actions (one per agent), got {got}")]
    ActionCountMismatch { expected: usize, got: usize },
}

/// Danger-zone geometry shared by collision detection and reward shaping.
///
/// Each entity has a hard collision radius `delta` and an annulus of width
/// `sigma` around it; overlap of the annuli without contact is a fake
/// collision, contact within `delta` is a real one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DangerZoneParams {
    /// Annulus width around agents.
    pub sigma_v: f64,
    /// Real-collision distance between agents.
    pub delta_v: f64,
    /// Annulus width around obstacles.
    pub sigma_o: f64,
    /// Real-collision distance between an agent and an obstacle.
    pub delta_o: f64,
}

impl Default for DangerZoneParams {
    fn default() -> Self {
        DangerZoneParams {
            sigma_v: 0.2,
            delta_v: 0.1,
            sigma_o: 0.2,
            delta_o: 0.1,
        }
    }
}

impl DangerZoneParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("sigma_v", self.sigma_v),
            ("delta_v", self.delta_v),
            ("sigma_o", self.sigma_o),
            ("delta_o", self.delta_o),
        ] {
            if !(v > 0.0) {
                return Err(format!("danger zone parameter {name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Static world layout and dynamics constants for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Half side of the square arena, in arena units.
    pub arena_half_extent: f64,
    pub n_ugv: usize,
    pub n_uav: usize,
    pub n_obstacle: usize,
    pub n_ground_target: usize,
    pub n_aerial_target: usize,
    /// Maximum displacement per step, arena units.
    pub max_speed: f64,
    /// Step budget per episode; doubles as the UAV battery proxy.
    pub max_steps: usize,
    /// Distance at which a target (or a landing pad) counts as reached.
    pub reach_threshold: f64,
    pub danger: DangerZoneParams,
    /// Global-plane mapping: meters represented by one arena unit.
    pub meters_per_unit: f64,
    pub rng_seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            arena_half_extent: 1.0,
            n_ugv: 1,
            n_uav: 0,
            n_obstacle: 1,
            n_ground_target: 2,
            n_aerial_target: 0,
            max_speed: 0.08,
            max_steps: 70,
            reach_threshold: 0.15,
            danger: DangerZoneParams::default(),
            meters_per_unit: 25.0,
            rng_seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.arena_half_extent > 0.0) {
            return Err("arena_half_extent must be > 0".into());
        }
        if !(self.max_speed > 0.0) {
            return Err("max_speed must be > 0".into());
        }
        if !(self.reach_threshold > 0.0) {
            return Err("reach_threshold must be > 0".into());
        }
        if self.max_steps < 1 {
            return Err("max_steps must be >= 1".into());
        }
        if !(self.meters_per_unit > 0.0) {
            return Err("meters_per_unit must be > 0".into());
        }
        self.danger.validate()
    }

    fn n_entities(&self) -> usize {
        self.n_ugv + self.n_uav + self.n_obstacle + self.n_ground_target + self.n_aerial_target
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentKind {
    Uav,
    Ugv,
}

impl AgentKind {
    pub fn label(self) -> &'static str {
        match self {
            AgentKind::Uav => "uav",
            AgentKind::Ugv => "ugv",
        }
    }
}

/// One vehicle's dynamic state.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub kind: AgentKind,
    pub pos: Vec2,
    pub vel: Vec2,
    /// Set once the agent's assigned target has been reached (the landing
    /// trigger for UAVs); never cleared within an episode.
    pub reached_target: bool,
    /// Battery proxy; decremented only while a UAV is airborne.
    pub steps_remaining: usize,
    /// Carrier UGV index while docked; always `None` for UGVs.
    pub landed_on: Option<usize>,
    /// Index into the same-kind target list.
    pub assigned_target: Option<usize>,
}

impl AgentState {
    fn new(kind: AgentKind, pos: Vec2, max_steps: usize) -> Self {
        AgentState {
            kind,
            pos,
            vel: Vec2::ZERO,
            reached_target: false,
            steps_remaining: max_steps,
            landed_on: None,
            assigned_target: None,
        }
    }

    pub fn is_airborne(&self) -> bool {
        self.kind == AgentKind::Uav && self.landed_on.is_none()
    }
}

/// Velocity command along both axes; clamped to `max_speed` on application.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action {
    pub u: f64,
    pub v: f64,
}

impl Action {
    pub fn new(u: f64, v: f64) -> Self {
        Action { u, v }
    }

    pub fn as_vec2(self) -> Vec2 {
        Vec2::new(self.u, self.v)
    }
}

/// Flat per-agent observation vector; layout is fixed by [`WorldState::observe`].
pub type Observation = Vec<f64>;

/// The single source of simulation truth.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub config: WorldConfig,
    pub ugvs: Vec<AgentState>,
    pub uavs: Vec<AgentState>,
    pub obstacles: Vec<Vec2>,
    /// (position, reached) pairs; reached flags are monotone within an episode.
    pub ground_targets: Vec<(Vec2, bool)>,
    pub aerial_targets: Vec<(Vec2, bool)>,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proximity {
    None,
    Fake,
    Real,
}

/// Classify a center distance against a collision radius `delta` and danger
/// annulus width `sigma`: real at contact, fake inside the annulus, none at
/// or beyond `delta + sigma`.
pub fn detect_pair(d: f64, delta: f64, sigma: f64) -> Proximity {
    debug_assert!(d >= 0.0 && delta >= 0.0 && sigma >= 0.0);
    if d <= delta {
        Proximity::Real
    } else if d < delta + sigma {
        Proximity::Fake
    } else {
        Proximity::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionPair {
    /// Two same-kind agents (UAV-UGV pairs never collide).
    AgentAgent { kind: AgentKind, i: usize, j: usize },
    AgentObstacle { kind: AgentKind, agent: usize, obstacle: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollisionEvent {
    pub pair: CollisionPair,
    pub severity: Proximity,
}

/// All fake and real collisions observed during one step.
#[derive(Debug, Clone, Default)]
pub struct CollisionReport {
    pub events: Vec<CollisionEvent>,
}

impl CollisionReport {
    /// Real agent-agent collision count this step.
    pub fn agent_agent_real(&self) -> usize {
        self.events
            .iter()
            .filter(|e| {
                e.severity == Proximity::Real
                    && matches!(e.pair, CollisionPair::AgentAgent { .. })
            })
            .count()
    }

    /// Real agent-obstacle collision count this step.
    pub fn agent_obstacle_real(&self) -> usize {
        self.events
            .iter()
            .filter(|e| {
                e.severity == Proximity::Real
                    && matches!(e.pair, CollisionPair::AgentObstacle { .. })
            })
            .count()
    }
}

/// Draw all entity positions i.i.d. uniform over the arena, rejecting any
/// placement closer than `delta_v` to an already placed entity.
pub fn spawn(config: &WorldConfig, seed: u64) -> Result<WorldState, WorldError> {
    debug_assert!(config.validate().is_ok(), "invalid world config");
    let mut gen = rng::stream(seed, 0x73_70_61_77_6e); // "spawn"
    let half = config.arena_half_extent;
    let min_sep = config.danger.delta_v;

    let mut placed: Vec<Vec2> = Vec::with_capacity(config.n_entities());
    let mut attempts = 0usize;
    while placed.len() < config.n_entities() {
        if attempts >= SPAWN_ATTEMPT_BUDGET {
            return Err(WorldError::SpawnOvercrowded {
                failed: config.n_entities() - placed.len(),
                budget: SPAWN_ATTEMPT_BUDGET,
            });
        }
        attempts += 1;
        let candidate = Vec2::new(gen.gen_range(-half..=half), gen.gen_range(-half..=half));
        if placed.iter().all(|p| p.dist(candidate) > min_sep) {
            placed.push(candidate);
        }
    }

    let mut it = placed.into_iter();
    let ugvs = (0..config.n_ugv)
        .map(|_| AgentState::new(AgentKind::Ugv, it.next().unwrap(), config.max_steps))
        .collect();
    let uavs = (0..config.n_uav)
        .map(|_| AgentState::new(AgentKind::Uav, it.next().unwrap(), config.max_steps))
        .collect();
    let obstacles = (0..config.n_obstacle).map(|_| it.next().unwrap()).collect();
    let ground_targets = (0..config.n_ground_target)
        .map(|_| (it.next().unwrap(), false))
        .collect();
    let aerial_targets = (0..config.n_aerial_target)
        .map(|_| (it.next().unwrap(), false))
        .collect();

    Ok(WorldState {
        config: config.clone(),
        ugvs,
        uavs,
        obstacles,
        ground_targets,
        aerial_targets,
        step_index: 0,
    })
}

impl WorldState {
    pub fn n_agents(&self) -> usize {
        self.ugvs.len() + self.uavs.len()
    }

    /// Greedy 1:1 target assignment, per kind: vehicles in index order claim
    /// their nearest unclaimed unreached target; leftovers get `None`.
    ///
    /// Assignments are re-derived on every call so the reach detector always
    /// tracks the target a vehicle is actually closing on. A UAV that has
    /// already reached its target keeps no assignment (its job switches to
    /// landing).
    pub fn reassign_targets_greedy(&mut self) {
        fn assign(agents: &mut [AgentState], targets: &[(Vec2, bool)], keep_reached_idle: bool) {
            let mut claimed = vec![false; targets.len()];
            for a in agents.iter_mut() {
                a.assigned_target = None;
                if keep_reached_idle && a.reached_target {
                    continue;
                }
                let mut best: Option<(usize, f64)> = None;
                for (t, (pos, reached)) in targets.iter().enumerate() {
                    if *reached || claimed[t] {
                        continue;
                    }
                    let d = a.pos.dist(*pos);
                    // Strict less-than keeps ties at the lowest index.
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((t, d));
                    }
                }
                if let Some((t, _)) = best {
                    a.assigned_target = Some(t);
                    claimed[t] = true;
                }
            }
        }
        assign(&mut self.ugvs, &self.ground_targets, false);
        assign(&mut self.uavs, &self.aerial_targets, true);
    }

    /// Index and distance of the UGV nearest to `pos`; ties at the lowest index.
    pub fn nearest_ugv(&self, pos: Vec2) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, g) in self.ugvs.iter().enumerate() {
            let d = g.pos.dist(pos);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    /// Advance one step under per-agent velocity commands.
    ///
    /// `actions` carries one entry per agent, UGVs first then UAVs; entries
    /// for docked UAVs are ignored (they ride their carrier). Displacements
    /// are clamped to `max_speed`, positions clipped to the arena, reach
    /// flags set for agents within `reach_threshold` of their assigned
    /// unreached target, and batteries decremented for airborne UAVs.
    pub fn step(&self, actions: &[Action]) -> Result<(WorldState, CollisionReport), WorldError> {
        if actions.len() != self.n_agents() {
            return Err(WorldError::ActionCountMismatch {
                expected: self.n_agents(),
                got: actions.len(),
            });
        }
        let cfg = &self.config;
        let mut next = self.clone();

        for (i, agent) in next.ugvs.iter_mut().enumerate() {
            let vel = actions[i].as_vec2().clamp_norm(cfg.max_speed);
            agent.vel = vel;
            agent.pos = (agent.pos + vel).clamp_square(cfg.arena_half_extent);
        }
        let n_ugv = next.ugvs.len();
        for (j, agent) in next.uavs.iter_mut().enumerate() {
            if let Some(carrier) = agent.landed_on {
                let carrier_state = &next.ugvs[carrier];
                agent.vel = carrier_state.vel;
                agent.pos = carrier_state.pos;
            } else {
                let vel = actions[n_ugv + j].as_vec2().clamp_norm(cfg.max_speed);
                agent.vel = vel;
                agent.pos = (agent.pos + vel).clamp_square(cfg.arena_half_extent);
                agent.steps_remaining = agent.steps_remaining.saturating_sub(1);
            }
        }
        next.step_index += 1;

        // Reach checks after movement; flags are monotone.
        for agent in next.ugvs.iter_mut() {
            if let Some(t) = agent.assigned_target {
                let (pos, reached) = next.ground_targets[t];
                if !reached && agent.pos.dist(pos) <= cfg.reach_threshold {
                    next.ground_targets[t].1 = true;
                    agent.reached_target = true;
                }
            }
        }
        for agent in next.uavs.iter_mut() {
            if let Some(t) = agent.assigned_target {
                let (pos, reached) = next.aerial_targets[t];
                if !reached && agent.pos.dist(pos) <= cfg.reach_threshold {
                    next.aerial_targets[t].1 = true;
                    agent.reached_target = true;
                }
            }
        }

        let report = next.detect_collisions();
        Ok((next, report))
    }

    /// Scan same-kind agent pairs and agent-obstacle pairs for danger-zone
    /// overlap. Docked UAVs are off the flight plane and excluded; UAV-UGV
    /// pairs never collide.
    pub fn detect_collisions(&self) -> CollisionReport {
        let danger = &self.config.danger;
        let mut events = Vec::new();

        let mut scan_pairs = |agents: &[AgentState], kind: AgentKind| {
            for i in 0..agents.len() {
                if !active(&agents[i]) {
                    continue;
                }
                for j in (i + 1)..agents.len() {
                    if !active(&agents[j]) {
                        continue;
                    }
                    let sev = detect_pair(
                        agents[i].pos.dist(agents[j].pos),
                        danger.delta_v,
                        danger.sigma_v,
                    );
                    if sev != Proximity::None {
                        events.push(CollisionEvent {
                            pair: CollisionPair::AgentAgent { kind, i, j },
                            severity: sev,
                        });
                    }
                }
                for (o, obst) in self.obstacles.iter().enumerate() {
                    let sev =
                        detect_pair(agents[i].pos.dist(*obst), danger.delta_o, danger.sigma_o);
                    if sev != Proximity::None {
                        events.push(CollisionEvent {
                            pair: CollisionPair::AgentObstacle {
                                kind,
                                agent: i,
                                obstacle: o,
                            },
                            severity: sev,
                        });
                    }
                }
            }
        };
        fn active(a: &AgentState) -> bool {
            a.kind == AgentKind::Ugv || a.landed_on.is_none()
        }
        scan_pairs(&self.ugvs, AgentKind::Ugv);
        scan_pairs(&self.uavs, AgentKind::Uav);
        CollisionReport { events }
    }

    /// Flat observation for one agent.
    ///
    /// Layout: own velocity (2), own position (2), relative position of each
    /// same-kind target (2 each, zeroed once reached), each obstacle (2 each),
    /// each same-kind peer (2 each); UAVs append the relative position of the
    /// nearest UGV (2) and their reached flag (1).
    pub fn observe(&self, agent: usize, kind: AgentKind) -> Observation {
        let (agents, targets) = match kind {
            AgentKind::Ugv => (&self.ugvs, &self.ground_targets),
            AgentKind::Uav => (&self.uavs, &self.aerial_targets),
        };
        let me = &agents[agent];
        let mut out = Vec::with_capacity(self.observation_len(kind));
        out.extend([me.vel.x, me.vel.y, me.pos.x, me.pos.y]);
        for (pos, reached) in targets.iter() {
            if *reached {
                out.extend([0.0, 0.0]);
            } else {
                let rel = *pos - me.pos;
                out.extend([rel.x, rel.y]);
            }
        }
        for obst in &self.obstacles {
            let rel = *obst - me.pos;
            out.extend([rel.x, rel.y]);
        }
        for (p, peer) in agents.iter().enumerate() {
            if p == agent {
                continue;
            }
            let rel = peer.pos - me.pos;
            out.extend([rel.x, rel.y]);
        }
        if kind == AgentKind::Uav {
            let rel = match self.nearest_ugv(me.pos) {
                Some((g, _)) => self.ugvs[g].pos - me.pos,
                None => Vec2::ZERO,
            };
            out.extend([rel.x, rel.y]);
            out.push(if me.reached_target { 1.0 } else { 0.0 });
        }
        debug_assert_eq!(out.len(), self.observation_len(kind));
        out
    }

    /// Observation length for one agent of `kind` in this world.
    pub fn observation_len(&self, kind: AgentKind) -> usize {
        match kind {
            AgentKind::Ugv => {
                4 + 2 * (self.ground_targets.len() + self.obstacles.len() + self.ugvs.len() - 1)
            }
            AgentKind::Uav => {
                4 + 2 * (self.aerial_targets.len() + self.obstacles.len() + self.uavs.len() - 1) + 3
            }
        }
    }

    pub fn all_targets_reached(&self) -> bool {
        self.ground_targets.iter().all(|(_, r)| *r)
            && self.aerial_targets.iter().all(|(_, r)| *r)
    }

    pub fn all_uavs_landed(&self) -> bool {
        self.uavs.iter().all(|a| a.landed_on.is_some())
    }
}

// ---------------------------------------------------------------------------
// Episode constraint checking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintId {
    /// Every aerial target is covered by some UAV path.
    AerialCoverage,
    /// Every ground target is covered by some UGV path.
    GroundCoverage,
    /// No UAV path point makes contact with an obstacle.
    UavObstacleFree,
    /// No UGV path point makes contact with an obstacle.
    UgvObstacleFree,
    /// No two UAVs share a position (within contact distance) at the same step.
    UavSeparation,
    /// No two UGVs share a position at the same step.
    UgvSeparation,
    /// Every UAV ends the episode coincident with some UGV.
    UavReturn,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 7] = [
        ConstraintId::AerialCoverage,
        ConstraintId::GroundCoverage,
        ConstraintId::UavObstacleFree,
        ConstraintId::UgvObstacleFree,
        ConstraintId::UavSeparation,
        ConstraintId::UgvSeparation,
        ConstraintId::UavReturn,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ConstraintId::AerialCoverage => "aerial_coverage",
            ConstraintId::GroundCoverage => "ground_coverage",
            ConstraintId::UavObstacleFree => "uav_obstacle_free",
            ConstraintId::UgvObstacleFree => "ugv_obstacle_free",
            ConstraintId::UavSeparation => "uav_separation",
            ConstraintId::UgvSeparation => "ugv_separation",
            ConstraintId::UavReturn => "uav_return",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintEntry {
    pub id: ConstraintId,
    pub satisfied: bool,
    /// First step at which the violation is observable (the final step for
    /// coverage/return constraints, which are judged on the whole episode).
    pub first_violation_step: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ConstraintReport {
    pub entries: Vec<ConstraintEntry>,
}

impl ConstraintReport {
    pub fn all_satisfied(&self) -> bool {
        self.entries.iter().all(|e| e.satisfied)
    }

    pub fn entry(&self, id: ConstraintId) -> &ConstraintEntry {
        self.entries.iter().find(|e| e.id == id).expect("all ids present")
    }
}

/// Validate a complete episode log against the mission constraints:
/// target coverage per vehicle kind, obstacle-free paths, pairwise vehicle
/// separation per step, and final UAV return to a UGV.
pub fn check_constraints(episode: &EpisodeRecord) -> ConstraintReport {
    let geo = &episode.geometry;
    let uav_paths: Vec<&Vec<Vec2>> = episode
        .paths
        .iter()
        .filter(|p| p.kind == AgentKind::Uav)
        .map(|p| &p.points)
        .collect();
    let ugv_paths: Vec<&Vec<Vec2>> = episode
        .paths
        .iter()
        .filter(|p| p.kind == AgentKind::Ugv)
        .map(|p| &p.points)
        .collect();
    let last_step = episode.phi;

    let coverage = |targets: &[Vec2], paths: &[&Vec<Vec2>]| -> ConstraintEntry {
        let ok = targets.iter().all(|t| {
            paths
                .iter()
                .any(|path| path.iter().any(|p| p.dist(*t) <= geo.reach_threshold))
        });
        ConstraintEntry {
            id: ConstraintId::AerialCoverage, // overwritten by caller
            satisfied: ok,
            first_violation_step: if ok { None } else { Some(last_step) },
        }
    };

    let obstacle_free = |paths: &[&Vec<Vec2>]| -> (bool, Option<usize>) {
        let horizon = paths.iter().map(|p| p.len()).max().unwrap_or(0);
        for step in 0..horizon {
            for path in paths {
                if let Some(p) = path.get(step) {
                    if geo.obstacles.iter().any(|o| o.dist(*p) <= geo.danger.delta_o) {
                        return (false, Some(step));
                    }
                }
            }
        }
        (true, None)
    };

    let separation = |paths: &[&Vec<Vec2>]| -> (bool, Option<usize>) {
        let horizon = paths.iter().map(|p| p.len()).max().unwrap_or(0);
        for step in 0..horizon {
            for i in 0..paths.len() {
                for j in (i + 1)..paths.len() {
                    if let (Some(a), Some(b)) = (paths[i].get(step), paths[j].get(step)) {
                        if a.dist(*b) <= geo.danger.delta_v {
                            return (false, Some(step));
                        }
                    }
                }
            }
        }
        (true, None)
    };

    let mut entries = Vec::with_capacity(7);

    let mut aerial = coverage(&geo.aerial_targets, &uav_paths);
    aerial.id = ConstraintId::AerialCoverage;
    entries.push(aerial);

    let mut ground = coverage(&geo.ground_targets, &ugv_paths);
    ground.id = ConstraintId::GroundCoverage;
    entries.push(ground);

    let (ok, step) = obstacle_free(&uav_paths);
    entries.push(ConstraintEntry {
        id: ConstraintId::UavObstacleFree,
        satisfied: ok,
        first_violation_step: step,
    });
    let (ok, step) = obstacle_free(&ugv_paths);
    entries.push(ConstraintEntry {
        id: ConstraintId::UgvObstacleFree,
        satisfied: ok,
        first_violation_step: step,
    });

    let (ok, step) = separation(&uav_paths);
    entries.push(ConstraintEntry {
        id: ConstraintId::UavSeparation,
        satisfied: ok,
        first_violation_step: step,
    });
    let (ok, step) = separation(&ugv_paths);
    entries.push(ConstraintEntry {
        id: ConstraintId::UgvSeparation,
        satisfied: ok,
        first_violation_step: step,
    });

    let returned = uav_paths.iter().all(|path| match path.last() {
        Some(end) => ugv_paths
            .iter()
            .any(|g| g.last().is_some_and(|ge| ge.dist(*end) <= geo.reach_threshold)),
        None => true,
    });
    entries.push(ConstraintEntry {
        id: ConstraintId::UavReturn,
        satisfied: returned,
        first_violation_step: if returned { None } else { Some(last_step) },
    });

    ConstraintReport { entries }
}

// ---------------------------------------------------------------------------
// Scenario file format: one `key = value` per line mirroring WorldConfig.
// ---------------------------------------------------------------------------

impl WorldConfig {
    pub fn to_flat_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("arena_half_extent", self.arena_half_extent.to_string());
        kv("n_ugv", self.n_ugv.to_string());
        kv("n_uav", self.n_uav.to_string());
        kv("n_obstacle", self.n_obstacle.to_string());
        kv("n_ground_target", self.n_ground_target.to_string());
        kv("n_aerial_target", self.n_aerial_target.to_string());
        kv("max_speed", self.max_speed.to_string());
        kv("max_steps", self.max_steps.to_string());
        kv("reach_threshold", self.reach_threshold.to_string());
        kv("sigma_v", self.danger.sigma_v.to_string());
        kv("delta_v", self.danger.delta_v.to_string());
        kv("sigma_o", self.danger.sigma_o.to_string());
        kv("delta_o", self.danger.delta_o.to_string());
        kv("meters_per_unit", self.meters_per_unit.to_string());
        kv("rng_seed", self.rng_seed.to_string());
        s
    }

    pub fn from_flat_str(text: &str) -> Result<Self, String> {
        let mut cfg = WorldConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            let parse_f = || -> Result<f64, String> {
                value
                    .parse::<f64>()
                    .map_err(|e| format!("line {}: {key}: {e}", lineno + 1))
            };
            let parse_u = || -> Result<usize, String> {
                value
                    .parse::<usize>()
                    .map_err(|e| format!("line {}: {key}: {e}", lineno + 1))
            };
            match key {
                "arena_half_extent" => cfg.arena_half_extent = parse_f()?,
                "n_ugv" => cfg.n_ugv = parse_u()?,
                "n_uav" => cfg.n_uav = parse_u()?,
                "n_obstacle" => cfg.n_obstacle = parse_u()?,
                "n_ground_target" => cfg.n_ground_target = parse_u()?,
                "n_aerial_target" => cfg.n_aerial_target = parse_u()?,
                "max_speed" => cfg.max_speed = parse_f()?,
                "max_steps" => cfg.max_steps = parse_u()?,
                "reach_threshold" => cfg.reach_threshold = parse_f()?,
                "sigma_v" => cfg.danger.sigma_v = parse_f()?,
                "delta_v" => cfg.danger.delta_v = parse_f()?,
                "sigma_o" => cfg.danger.sigma_o = parse_f()?,
                "delta_o" => cfg.danger.delta_o = parse_f()?,
                "meters_per_unit" => cfg.meters_per_unit = parse_f()?,
                "rng_seed" => {
                    cfg.rng_seed = value
                        .parse::<u64>()
                        .map_err(|e| format!("line {}: rng_seed: {e}", lineno + 1))?
                }
                other => return Err(format!("line {}: unknown key `{other}`", lineno + 1)),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
