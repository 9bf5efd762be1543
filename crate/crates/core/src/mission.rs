//! Mission orchestration: promote zones to execution arenas, dispatch
//! coalitions, run the frozen vehicle policies jointly with launch/landing
//! protocols and battery bookkeeping, and aggregate episode records.
//!
//! The global plane and the execution arenas share units; promoting a zone
//! just re-centers its contents on the origin. Vehicle counts inside a zone
//! run must match the dimensions the policies were trained with; target and
//! obstacle slots are padded (spent targets, far corner obstacles) or worked
//! through in waves when a zone holds more than one load.

use thiserror::Error;

use crate::evaluation::{EpisodeGeometry, EpisodeRecord, VehiclePath};
use crate::geom::Vec2;
use crate::train_env::Controller;
use crate::world::{self, Action, AgentKind, WorldConfig, WorldState};
use crate::zoning::{assign_zones, MeanShiftConfig, ZoneSet};

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("incompatible model/observation dimensions for {vehicle}: model expects {model_dim}, zone world produces {world_dim}")]
    IncompatibleDims {
        vehicle: &'static str,
        model_dim: usize,
        world_dim: usize,
    },
    #[error("mission setup: {0}")]
    Setup(String),
    #[error(transparent)]
    World(#[from] world::WorldError),
}

/// One UGV-led vehicle group; ids index the mission fleet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coalition {
    pub ugv_ids: Vec<usize>,
    pub uav_ids: Vec<usize>,
    pub status: CoalitionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoalitionStatus {
    Available,
    EnRoute,
    Clearing,
}

impl Coalition {
    pub fn new(ugv_ids: Vec<usize>, uav_ids: Vec<usize>) -> Self {
        Coalition {
            ugv_ids,
            uav_ids,
            status: CoalitionStatus::Available,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    Zoned,
    NoZoning,
}

/// Static mission inputs on the global plane.
#[derive(Debug, Clone, Default)]
pub struct MissionSpec {
    pub ground_targets: Vec<Vec2>,
    pub aerial_targets: Vec<Vec2>,
    pub obstacles: Vec<Vec2>,
}

impl MissionSpec {
    pub fn targets_total(&self) -> usize {
        self.ground_targets.len() + self.aerial_targets.len()
    }
}

/// Targets of one zone, split back by kind (indices into the mission spec).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZoneContents {
    pub center: Vec2,
    pub ground: Vec<usize>,
    pub aerial: Vec<usize>,
}

/// Zones in execution order (densest first) plus dispatch parameters.
#[derive(Debug, Clone)]
pub struct MissionPlan {
    pub zones: ZoneSet,
    pub contents: Vec<ZoneContents>,
    pub k_per_zone: usize,
    pub zone_order: Vec<usize>,
    pub mode: PlanMode,
}

impl MissionPlan {
    pub fn is_trivially_complete(&self) -> bool {
        self.contents.iter().all(|z| z.ground.is_empty() && z.aerial.is_empty())
    }
}

/// Group mission targets into zones. Zoned mode runs the mean-shift
/// assignment over all targets; NoZoning yields a single whole-arena zone
/// centered at the origin.
pub fn plan(spec: &MissionSpec, cfg: &MeanShiftConfig, k: usize, mode: PlanMode) -> MissionPlan {
    assert!(k >= 1, "k_per_zone must be >= 1");
    let n_ground = spec.ground_targets.len();
    let combined: Vec<Vec2> = spec
        .ground_targets
        .iter()
        .chain(spec.aerial_targets.iter())
        .copied()
        .collect();

    let (zones, contents) = match mode {
        PlanMode::Zoned => {
            let zones = assign_zones(&combined, cfg);
            let contents = zones
                .centers
                .iter()
                .zip(&zones.membership)
                .map(|(center, members)| {
                    let mut z = ZoneContents {
                        center: *center,
                        ..ZoneContents::default()
                    };
                    for &m in members {
                        if m < n_ground {
                            z.ground.push(m);
                        } else {
                            z.aerial.push(m - n_ground);
                        }
                    }
                    z
                })
                .collect();
            (zones, contents)
        }
        PlanMode::NoZoning => {
            let zones = ZoneSet {
                centers: vec![Vec2::ZERO],
                membership: vec![(0..combined.len()).collect()],
            };
            let contents = vec![ZoneContents {
                center: Vec2::ZERO,
                ground: (0..n_ground).collect(),
                aerial: (0..spec.aerial_targets.len()).collect(),
            }];
            (zones, contents)
        }
    };

    let zone_order = (0..contents.len()).collect();
    MissionPlan {
        zones,
        contents,
        k_per_zone: k,
        zone_order,
        mode,
    }
}

/// Frozen policies driving the two vehicle kinds.
pub struct MissionPolicies<'a> {
    pub ugv: &'a dyn Controller,
    pub uav: Option<&'a dyn Controller>,
}

/// Outcome of one mission: per-zone records plus the aggregate fold.
#[derive(Debug, Clone)]
pub struct MissionOutcome {
    pub zone_records: Vec<EpisodeRecord>,
    pub aggregate: EpisodeRecord,
    pub transit_steps: usize,
}

/// Safety factor on the return-flight estimate that triggers a forced
/// landing before the battery runs dry.
const BATTERY_RETURN_MARGIN: f64 = 1.2;

/// Result of one zone execution, in zone-local time.
struct ZoneRun {
    cleared: bool,
    steps: usize,
    alpha: usize,
    beta: usize,
    reached_ground: Vec<usize>,
    reached_aerial: Vec<usize>,
    /// Per participating vehicle (fleet id order as passed in): positions at
    /// every step, zone-local coordinates.
    ugv_tracks: Vec<Vec<Vec2>>,
    uav_tracks: Vec<Vec<Vec2>>,
    /// Whether every participating UAV ended docked.
    all_docked: bool,
}

fn corner(idx: usize, half: f64) -> Vec2 {
    match idx % 4 {
        0 => Vec2::new(half, half),
        1 => Vec2::new(-half, half),
        2 => Vec2::new(half, -half),
        _ => Vec2::new(-half, -half),
    }
}

/// Execute one zone with the given vehicles until cleared or out of steps.
///
/// `ground`/`aerial` are the zone's member targets in zone-local coordinates
/// (queue order); `obstacles` likewise. Targets beyond the slot capacity wait
/// in a queue and refill slots as earlier ones are reached; UAVs relaunch for
/// queued aerial targets after docking.
fn run_zone_local(
    template: &WorldConfig,
    policies: &MissionPolicies,
    ugv_starts: &[Vec2],
    uav_carriers: &[usize],
    ground: &[Vec2],
    aerial: &[Vec2],
    obstacles: &[Vec2],
) -> Result<ZoneRun, MissionError> {
    let n_ugv = ugv_starts.len();
    let n_uav = uav_carriers.len();
    let cfg = WorldConfig {
        n_ugv,
        n_uav,
        ..template.clone()
    };
    let half = cfg.arena_half_extent;

    // Assemble the slot world directly: no random spawn, everything placed.
    let mut state = WorldState {
        config: cfg.clone(),
        ugvs: Vec::new(),
        uavs: Vec::new(),
        obstacles: Vec::new(),
        ground_targets: Vec::new(),
        aerial_targets: Vec::new(),
        step_index: 0,
    };
    for &pos in ugv_starts {
        state.ugvs.push(world::AgentState {
            kind: AgentKind::Ugv,
            pos: pos.clamp_square(half),
            vel: Vec2::ZERO,
            reached_target: false,
            steps_remaining: cfg.max_steps,
            landed_on: None,
            assigned_target: None,
        });
    }
    for &carrier in uav_carriers {
        if carrier >= n_ugv {
            return Err(MissionError::Setup(format!(
                "UAV carrier index {carrier} out of range for {n_ugv} UGVs"
            )));
        }
        state.uavs.push(world::AgentState {
            kind: AgentKind::Uav,
            pos: state.ugvs[carrier].pos,
            vel: Vec2::ZERO,
            reached_target: false,
            steps_remaining: cfg.max_steps,
            landed_on: Some(carrier),
            assigned_target: None,
        });
    }

    // Obstacle slots: nearest real obstacles inside the arena first, then
    // far-corner fillers so observation widths match training.
    let mut in_range: Vec<Vec2> = obstacles
        .iter()
        .copied()
        .filter(|o| o.x.abs() <= half && o.y.abs() <= half)
        .collect();
    in_range.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).expect("finite"));
    for k in 0..cfg.n_obstacle {
        let pos = in_range.get(k).copied().unwrap_or_else(|| corner(k, half));
        state.obstacles.push(pos);
    }

    // Target slots plus overflow queues.
    let mut ground_queue: std::collections::VecDeque<(usize, Vec2)> =
        ground.iter().copied().enumerate().collect();
    let mut aerial_queue: std::collections::VecDeque<(usize, Vec2)> =
        aerial.iter().copied().enumerate().collect();
    // Slot index -> zone-member index currently in the slot.
    let mut ground_slot_member: Vec<Option<usize>> = vec![None; cfg.n_ground_target];
    let mut aerial_slot_member: Vec<Option<usize>> = vec![None; cfg.n_aerial_target];
    for slot in 0..cfg.n_ground_target {
        match ground_queue.pop_front() {
            Some((m, pos)) => {
                state.ground_targets.push((pos.clamp_square(half), false));
                ground_slot_member[slot] = Some(m);
            }
            None => state.ground_targets.push((Vec2::ZERO, true)),
        }
    }
    for slot in 0..cfg.n_aerial_target {
        match aerial_queue.pop_front() {
            Some((m, pos)) => {
                state.aerial_targets.push((pos.clamp_square(half), false));
                aerial_slot_member[slot] = Some(m);
            }
            None => state.aerial_targets.push((Vec2::ZERO, true)),
        }
    }

    if !ground.is_empty() && cfg.n_ground_target == 0 {
        return Err(MissionError::Setup(
            "zone holds ground targets but the template has no ground slots".into(),
        ));
    }
    if !aerial.is_empty() && cfg.n_aerial_target == 0 {
        return Err(MissionError::Setup(
            "zone holds aerial targets but the template has no aerial slots".into(),
        ));
    }

    // Model/observation compatibility.
    let ugv_obs = state.observation_len(AgentKind::Ugv);
    if policies.ugv.obs_dim() != ugv_obs {
        return Err(MissionError::IncompatibleDims {
            vehicle: "ugv",
            model_dim: policies.ugv.obs_dim(),
            world_dim: ugv_obs,
        });
    }
    if n_uav > 0 {
        let uav_policy = policies.uav.ok_or_else(|| {
            MissionError::Setup("coalition carries UAVs but no UAV policy was provided".into())
        })?;
        let uav_obs = state.observation_len(AgentKind::Uav);
        if uav_policy.obs_dim() != uav_obs {
            return Err(MissionError::IncompatibleDims {
                vehicle: "uav",
                model_dim: uav_policy.obs_dim(),
                world_dim: uav_obs,
            });
        }
    }

    let mut reached_ground: Vec<usize> = Vec::new();
    let mut reached_aerial: Vec<usize> = Vec::new();
    let mut ugv_tracks: Vec<Vec<Vec2>> = state.ugvs.iter().map(|a| vec![a.pos]).collect();
    let mut uav_tracks: Vec<Vec<Vec2>> = state.uavs.iter().map(|a| vec![a.pos]).collect();
    let mut returning = vec![false; n_uav];
    let (mut alpha, mut beta) = (0usize, 0usize);

    let zone_done = |state: &WorldState,
                     gq: &std::collections::VecDeque<(usize, Vec2)>,
                     aq: &std::collections::VecDeque<(usize, Vec2)>| {
        gq.is_empty()
            && aq.is_empty()
            && state.ground_targets.iter().all(|(_, r)| *r)
            && state.aerial_targets.iter().all(|(_, r)| *r)
            && state.all_uavs_landed()
    };

    let mut steps = 0usize;
    while !zone_done(&state, &ground_queue, &aerial_queue) && steps < cfg.max_steps {
        state.reassign_targets_greedy();

        // Launch protocol: one docked UAV per carrier per step, only while
        // open aerial targets outnumber airborne seekers, and only once the
        // previous launch has cleared the carrier's danger zone.
        let open_aerial = state.aerial_targets.iter().filter(|(_, r)| !*r).count();
        let mut seekers = state
            .uavs
            .iter()
            .filter(|u| u.landed_on.is_none() && !u.reached_target)
            .count();
        if open_aerial > seekers {
            let clearance = cfg.danger.delta_v + cfg.danger.sigma_v;
            for g in 0..n_ugv {
                if seekers >= open_aerial {
                    break;
                }
                let carrier_clear = state
                    .uavs
                    .iter()
                    .all(|u| u.landed_on.is_some() || u.pos.dist(state.ugvs[g].pos) > clearance);
                if !carrier_clear {
                    continue;
                }
                let docked_here = (0..n_uav).find(|&j| state.uavs[j].landed_on == Some(g));
                if let Some(j) = docked_here {
                    state.uavs[j].landed_on = None;
                    state.uavs[j].reached_target = false;
                    returning[j] = false;
                    // Battery equals the remaining zone budget.
                    state.uavs[j].steps_remaining = cfg.max_steps - steps;
                    seekers += 1;
                }
            }
            state.reassign_targets_greedy();
        }

        // Forced return once the battery only just covers the flight home.
        for j in 0..n_uav {
            let u = &state.uavs[j];
            if u.landed_on.is_some() || returning[j] || u.reached_target {
                continue;
            }
            if let Some((_, d)) = state.nearest_ugv(u.pos) {
                let steps_home = d / cfg.max_speed;
                if (u.steps_remaining as f64) <= BATTERY_RETURN_MARGIN * steps_home {
                    returning[j] = true;
                }
            }
        }

        // Landing signals freeze the receiving UGV until touchdown.
        let mut frozen = vec![false; n_ugv];
        for j in 0..n_uav {
            let u = &state.uavs[j];
            if u.landed_on.is_none() && (u.reached_target || returning[j]) {
                if let Some((g, _)) = state.nearest_ugv(u.pos) {
                    frozen[g] = true;
                }
            }
        }

        let mut actions = Vec::with_capacity(n_ugv + n_uav);
        for g in 0..n_ugv {
            if frozen[g] {
                actions.push(Action::default());
            } else {
                actions.push(policies.ugv.act(&state.observe(g, AgentKind::Ugv)));
            }
        }
        for j in 0..n_uav {
            let u = &state.uavs[j];
            if u.landed_on.is_some() {
                actions.push(Action::default());
            } else if returning[j] {
                let target = state
                    .nearest_ugv(u.pos)
                    .map(|(g, _)| state.ugvs[g].pos)
                    .unwrap_or(u.pos);
                let delta = target - u.pos;
                actions.push(Action::new(delta.x, delta.y));
            } else {
                let policy = policies.uav.expect("validated above");
                actions.push(policy.act(&state.observe(j, AgentKind::Uav)));
            }
        }

        let (mut next, report) = state.step(&actions)?;
        steps += 1;
        for event in &report.events {
            if event.severity != world::Proximity::Real {
                continue;
            }
            match event.pair {
                world::CollisionPair::AgentAgent { .. } => alpha += 1,
                world::CollisionPair::AgentObstacle { .. } => beta += 1,
            }
        }

        // Touchdown resolution.
        for j in 0..n_uav {
            let u = &next.uavs[j];
            if u.landed_on.is_none() && (u.reached_target || returning[j]) {
                if let Some((g, d)) = next.nearest_ugv(u.pos) {
                    if d <= cfg.reach_threshold {
                        next.uavs[j].landed_on = Some(g);
                        next.uavs[j].pos = next.ugvs[g].pos;
                        next.uavs[j].vel = next.ugvs[g].vel;
                        returning[j] = false;
                    }
                }
            }
        }

        // Record reached members and refill their slots from the queues.
        for slot in 0..next.ground_targets.len() {
            if next.ground_targets[slot].1 {
                if let Some(m) = ground_slot_member[slot].take() {
                    reached_ground.push(m);
                }
                if let Some((m, pos)) = ground_queue.pop_front() {
                    next.ground_targets[slot] = (pos.clamp_square(half), false);
                    ground_slot_member[slot] = Some(m);
                }
            }
        }
        for slot in 0..next.aerial_targets.len() {
            if next.aerial_targets[slot].1 {
                if let Some(m) = aerial_slot_member[slot].take() {
                    reached_aerial.push(m);
                }
                if let Some((m, pos)) = aerial_queue.pop_front() {
                    next.aerial_targets[slot] = (pos.clamp_square(half), false);
                    aerial_slot_member[slot] = Some(m);
                }
            }
        }

        for (g, track) in ugv_tracks.iter_mut().enumerate() {
            track.push(next.ugvs[g].pos);
        }
        for (j, track) in uav_tracks.iter_mut().enumerate() {
            track.push(next.uavs[j].pos);
        }
        state = next;
    }

    let cleared = zone_done(&state, &ground_queue, &aerial_queue);
    Ok(ZoneRun {
        cleared,
        steps,
        alpha,
        beta,
        reached_ground,
        reached_aerial,
        ugv_tracks,
        uav_tracks,
        all_docked: state.all_uavs_landed(),
    })
}

/// Arrival formation around a zone center: UGVs on a small ring, spacing at
/// least a danger-zone diameter.
fn formation_offsets(n: usize, template: &WorldConfig) -> Vec<Vec2> {
    if n == 1 {
        return vec![Vec2::ZERO];
    }
    let radius = (template.danger.delta_v + template.danger.sigma_v).max(0.25);
    (0..n)
        .map(|i| {
            let angle = std::f64::consts::TAU * i as f64 / n as f64;
            Vec2::new(radius * angle.cos(), radius * angle.sin())
        })
        .collect()
}

/// Run a full mission: zones in plan order, `k_per_zone` coalitions each,
/// straight-line transit between zones, aggregation over everything.
pub fn run_mission(
    plan: &MissionPlan,
    coalitions: &mut [Coalition],
    policies: &MissionPolicies,
    template: &WorldConfig,
    spec: &MissionSpec,
) -> Result<MissionOutcome, MissionError> {
    let n_ugv_total: usize = coalitions.iter().map(|c| c.ugv_ids.len()).sum();
    let n_uav_total: usize = coalitions.iter().map(|c| c.uav_ids.len()).sum();
    if coalitions.iter().any(|c| c.ugv_ids.is_empty()) {
        return Err(MissionError::Setup("every coalition needs at least one UGV".into()));
    }
    if plan.k_per_zone > coalitions.len() {
        return Err(MissionError::Setup(format!(
            "plan wants {} coalitions per zone but only {} exist",
            plan.k_per_zone,
            coalitions.len()
        )));
    }

    // Global fleet state: everyone starts at the staging point (origin).
    let mut ugv_pos = vec![Vec2::ZERO; n_ugv_total];
    let mut uav_pos = vec![Vec2::ZERO; n_uav_total];
    let mut ugv_paths: Vec<Vec<Vec2>> = ugv_pos.iter().map(|p| vec![*p]).collect();
    let mut uav_paths: Vec<Vec<Vec2>> = uav_pos.iter().map(|p| vec![*p]).collect();
    // Which fleet UGV carries each fleet UAV (round-robin within coalition).
    let mut uav_carrier: Vec<usize> = vec![0; n_uav_total];
    for c in coalitions.iter() {
        for (k, &uav) in c.uav_ids.iter().enumerate() {
            uav_carrier[uav] = c.ugv_ids[k % c.ugv_ids.len()];
        }
    }
    for (uav, &carrier) in uav_carrier.iter().enumerate() {
        uav_pos[uav] = ugv_pos[carrier];
    }

    let mut zone_records = Vec::new();
    let mut transit_steps_total = 0usize;
    let mut reached_ground_global: Vec<usize> = Vec::new();
    let mut reached_aerial_global: Vec<usize> = Vec::new();

    for &zone_idx in &plan.zone_order {
        let zone = &plan.contents[zone_idx];
        if zone.ground.is_empty() && zone.aerial.is_empty() {
            continue;
        }
        // First k available coalitions take the zone.
        let party: Vec<usize> = coalitions
            .iter()
            .enumerate()
            .filter(|(_, c)| c.status == CoalitionStatus::Available)
            .map(|(i, _)| i)
            .take(plan.k_per_zone)
            .collect();
        if party.len() < plan.k_per_zone {
            // A coalition got stuck clearing (UAV never docked); the
            // remaining zones cannot be served.
            break;
        }
        let party_ugvs: Vec<usize> = party
            .iter()
            .flat_map(|&c| coalitions[c].ugv_ids.iter().copied())
            .collect();
        let party_uavs: Vec<usize> = party
            .iter()
            .flat_map(|&c| coalitions[c].uav_ids.iter().copied())
            .collect();

        // Transit: straight line to the arrival formation, UAVs riding.
        for &c in &party {
            coalitions[c].status = CoalitionStatus::EnRoute;
        }
        let offsets = formation_offsets(party_ugvs.len(), template);
        let arrivals: Vec<Vec2> = offsets.iter().map(|o| zone.center + *o).collect();
        let max_dist = party_ugvs
            .iter()
            .zip(&arrivals)
            .map(|(&g, a)| ugv_pos[g].dist(*a))
            .fold(0.0f64, f64::max);
        let transit_steps = (max_dist / template.max_speed).ceil() as usize;
        for step in 1..=transit_steps {
            let t = step as f64 / transit_steps as f64;
            for (k, &g) in party_ugvs.iter().enumerate() {
                let start = ugv_pos[g];
                let goal = arrivals[k];
                let here = Vec2::new(
                    start.x + (goal.x - start.x) * t,
                    start.y + (goal.y - start.y) * t,
                );
                ugv_paths[g].push(here);
            }
            for &u in &party_uavs {
                uav_paths[u].push(*ugv_paths[uav_carrier[u]].last().unwrap());
            }
            // Idle vehicles hold position on the shared timeline.
            hold_idle(&mut ugv_paths, &mut uav_paths, &party_ugvs, &party_uavs);
        }
        for (k, &g) in party_ugvs.iter().enumerate() {
            ugv_pos[g] = arrivals[k];
        }
        for &u in &party_uavs {
            uav_pos[u] = ugv_pos[uav_carrier[u]];
        }
        transit_steps_total += transit_steps;

        // Zone execution in local coordinates.
        for &c in &party {
            coalitions[c].status = CoalitionStatus::Clearing;
        }
        let local_starts: Vec<Vec2> =
            party_ugvs.iter().map(|&g| ugv_pos[g] - zone.center).collect();
        let local_carriers: Vec<usize> = party_uavs
            .iter()
            .map(|&u| {
                party_ugvs
                    .iter()
                    .position(|&g| g == uav_carrier[u])
                    .expect("carrier travels with its coalition")
            })
            .collect();
        let ground_local: Vec<Vec2> = zone
            .ground
            .iter()
            .map(|&m| spec.ground_targets[m] - zone.center)
            .collect();
        let aerial_local: Vec<Vec2> = zone
            .aerial
            .iter()
            .map(|&m| spec.aerial_targets[m] - zone.center)
            .collect();
        let obstacles_local: Vec<Vec2> =
            spec.obstacles.iter().map(|&o| o - zone.center).collect();

        let run = run_zone_local(
            template,
            policies,
            &local_starts,
            &local_carriers,
            &ground_local,
            &aerial_local,
            &obstacles_local,
        )?;

        // Merge tracks back into the global timeline.
        for step in 1..run.ugv_tracks[0].len() {
            for (k, &g) in party_ugvs.iter().enumerate() {
                ugv_paths[g].push(run.ugv_tracks[k][step] + zone.center);
            }
            for (k, &u) in party_uavs.iter().enumerate() {
                uav_paths[u].push(run.uav_tracks[k][step] + zone.center);
            }
            hold_idle(&mut ugv_paths, &mut uav_paths, &party_ugvs, &party_uavs);
        }
        for &g in &party_ugvs {
            ugv_pos[g] = *ugv_paths[g].last().unwrap();
        }
        for &u in &party_uavs {
            uav_pos[u] = *uav_paths[u].last().unwrap();
        }

        reached_ground_global.extend(run.reached_ground.iter().map(|&m| zone.ground[m]));
        reached_aerial_global.extend(run.reached_aerial.iter().map(|&m| zone.aerial[m]));

        let record = EpisodeRecord {
            phi: run.steps,
            alpha: run.alpha,
            beta: run.beta,
            completed: run.cleared,
            targets_total: zone.ground.len() + zone.aerial.len(),
            targets_reached: run.reached_ground.len() + run.reached_aerial.len(),
            paths: party_ugvs
                .iter()
                .enumerate()
                .map(|(k, &g)| VehiclePath {
                    kind: AgentKind::Ugv,
                    id: g,
                    points: run.ugv_tracks[k].iter().map(|p| *p + zone.center).collect(),
                })
                .chain(party_uavs.iter().enumerate().map(|(k, &u)| VehiclePath {
                    kind: AgentKind::Uav,
                    id: u,
                    points: run.uav_tracks[k].iter().map(|p| *p + zone.center).collect(),
                }))
                .collect(),
            geometry: EpisodeGeometry {
                ground_targets: zone.ground.iter().map(|&m| spec.ground_targets[m]).collect(),
                aerial_targets: zone.aerial.iter().map(|&m| spec.aerial_targets[m]).collect(),
                obstacles: spec.obstacles.clone(),
                reach_threshold: template.reach_threshold,
                danger: template.danger,
            },
        };
        debug_assert!(record.validate().is_ok());
        zone_records.push(record);

        // A coalition frees up only when its UAVs are all back aboard.
        for &c in &party {
            coalitions[c].status = if run.all_docked {
                CoalitionStatus::Available
            } else {
                CoalitionStatus::Clearing
            };
        }
    }

    let targets_total = spec.targets_total();
    let targets_reached = reached_ground_global.len() + reached_aerial_global.len();
    let zone_steps: usize = zone_records.iter().map(|r| r.phi).sum();
    let all_landed = coalitions
        .iter()
        .all(|c| c.status == CoalitionStatus::Available);
    let completed = targets_reached == targets_total && all_landed;

    let aggregate = EpisodeRecord {
        phi: zone_steps + transit_steps_total,
        alpha: zone_records.iter().map(|r| r.alpha).sum(),
        beta: zone_records.iter().map(|r| r.beta).sum(),
        completed,
        targets_total,
        targets_reached,
        paths: ugv_paths
            .into_iter()
            .enumerate()
            .map(|(g, points)| VehiclePath {
                kind: AgentKind::Ugv,
                id: g,
                points,
            })
            .chain(uav_paths.into_iter().enumerate().map(|(u, points)| VehiclePath {
                kind: AgentKind::Uav,
                id: u,
                points,
            }))
            .collect(),
        geometry: EpisodeGeometry {
            ground_targets: spec.ground_targets.clone(),
            aerial_targets: spec.aerial_targets.clone(),
            obstacles: spec.obstacles.clone(),
            reach_threshold: template.reach_threshold,
            danger: template.danger,
        },
    };
    debug_assert!(aggregate.validate().is_ok());

    Ok(MissionOutcome {
        zone_records,
        aggregate,
        transit_steps: transit_steps_total,
    })
}

fn hold_idle(
    ugv_paths: &mut [Vec<Vec2>],
    uav_paths: &mut [Vec<Vec2>],
    party_ugvs: &[usize],
    party_uavs: &[usize],
) {
    for (g, path) in ugv_paths.iter_mut().enumerate() {
        if !party_ugvs.contains(&g) {
            let held = *path.last().expect("non-empty");
            path.push(held);
        }
    }
    for (u, path) in uav_paths.iter_mut().enumerate() {
        if !party_uavs.contains(&u) {
            let held = *path.last().expect("non-empty");
            path.push(held);
        }
    }
}
