//! Shaped penalty rewards for both vehicle kinds.
//!
//! Everything here is a penalty: target terms charge the team the summed
//! nearest-agent distance to each open target, collision terms charge each
//! agent for danger-zone overlap with peers and obstacles, and UAVs carry an
//! extra term that first pushes them to finish their target and then pulls
//! them back to the nearest UGV.

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::world::{AgentKind, DangerZoneParams, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Gain of the linear distance-to-reward map.
    pub t1_scale: f64,
    /// Saturation magnitude of the agent-agent overlap penalty.
    pub max_pair_penalty: f64,
    /// Saturation magnitude of the agent-obstacle overlap penalty.
    pub max_obstacle_penalty: f64,
    /// Constant penalty a UAV pays per step before reaching its target.
    pub r_t: f64,
    pub danger: DangerZoneParams,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            t1_scale: 1.0,
            max_pair_penalty: 1.0,
            max_obstacle_penalty: 1.0,
            r_t: 1.0,
            danger: DangerZoneParams::default(),
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("t1_scale", self.t1_scale),
            ("max_pair_penalty", self.max_pair_penalty),
            ("max_obstacle_penalty", self.max_obstacle_penalty),
            ("r_t", self.r_t),
        ] {
            if !(v > 0.0) {
                return Err(format!("reward parameter {name} must be > 0, got {v}"));
            }
        }
        self.danger.validate()
    }
}

/// The seven shaping terms; UGVs use the first three, UAVs the last four.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardComponent {
    GroundTargetDistance,
    UgvPairCollision,
    UgvObstacleCollision,
    AerialTargetDistance,
    UavPairCollision,
    UavObstacleCollision,
    UavReturn,
}

impl RewardComponent {
    pub const ALL: [RewardComponent; 7] = [
        RewardComponent::GroundTargetDistance,
        RewardComponent::UgvPairCollision,
        RewardComponent::UgvObstacleCollision,
        RewardComponent::AerialTargetDistance,
        RewardComponent::UavPairCollision,
        RewardComponent::UavObstacleCollision,
        RewardComponent::UavReturn,
    ];

    /// Short column label used in curve CSVs.
    pub fn label(self) -> &'static str {
        match self {
            RewardComponent::GroundTargetDistance => "r1",
            RewardComponent::UgvPairCollision => "r2",
            RewardComponent::UgvObstacleCollision => "r3",
            RewardComponent::AerialTargetDistance => "r4",
            RewardComponent::UavPairCollision => "r5",
            RewardComponent::UavObstacleCollision => "r6",
            RewardComponent::UavReturn => "r7",
        }
    }
}

/// One agent's shaped reward, split by component.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    pub components: Vec<(RewardComponent, f64)>,
    pub total: f64,
}

impl RewardBreakdown {
    fn from_components(components: Vec<(RewardComponent, f64)>) -> Self {
        let total = components.iter().map(|(_, v)| v).sum();
        RewardBreakdown { components, total }
    }

    pub fn component(&self, c: RewardComponent) -> f64 {
        self.components
            .iter()
            .find(|(id, _)| *id == c)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }
}

/// Team target-encouragement term: minus the summed nearest-agent distance
/// over unreached targets. Reached targets contribute nothing; with no agents
/// the term is zero.
pub fn target_distance_reward(
    targets: &[(Vec2, bool)],
    agents: &[Vec2],
    params: &RewardParams,
) -> f64 {
    if agents.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for (pos, reached) in targets {
        if *reached {
            continue;
        }
        let min_d = agents
            .iter()
            .map(|a| a.dist(*pos))
            .fold(f64::INFINITY, f64::min);
        sum += min_d;
    }
    -params.t1_scale * sum
}

/// Danger-zone overlap penalty for a center distance `d`: zero without
/// overlap, growing linearly with it, saturating at `-max_penalty` once the
/// pair is in real contact (`d <= delta`).
pub fn pair_penalty(d: f64, delta: f64, sigma: f64, max_penalty: f64) -> f64 {
    debug_assert!(d >= 0.0);
    let overlap = delta + sigma - d;
    if overlap <= 0.0 {
        0.0
    } else {
        -max_penalty * (overlap / sigma).min(1.0)
    }
}

/// UAV homing term: a flat `-r_t` until the agent reaches its target, then a
/// pull proportional to the distance `d_h` to its nearest UGV.
pub fn return_reward(reached: bool, d_h: f64, params: &RewardParams) -> f64 {
    debug_assert!(d_h >= 0.0);
    if !reached {
        -params.r_t
    } else {
        -params.t1_scale * d_h
    }
}

/// Shaped reward for one UGV: the shared ground-target term plus its own
/// peer and obstacle overlap penalties.
pub fn ugv_reward(state: &WorldState, agent: usize, params: &RewardParams) -> RewardBreakdown {
    debug_assert!(agent < state.ugvs.len());
    let positions: Vec<Vec2> = state.ugvs.iter().map(|a| a.pos).collect();
    let me = positions[agent];

    let r1 = target_distance_reward(&state.ground_targets, &positions, params);
    let r2: f64 = positions
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != agent)
        .map(|(_, p)| {
            pair_penalty(
                me.dist(*p),
                params.danger.delta_v,
                params.danger.sigma_v,
                params.max_pair_penalty,
            )
        })
        .sum();
    let r3: f64 = state
        .obstacles
        .iter()
        .map(|o| {
            pair_penalty(
                me.dist(*o),
                params.danger.delta_o,
                params.danger.sigma_o,
                params.max_obstacle_penalty,
            )
        })
        .sum();

    RewardBreakdown::from_components(vec![
        (RewardComponent::GroundTargetDistance, r1),
        (RewardComponent::UgvPairCollision, r2),
        (RewardComponent::UgvObstacleCollision, r3),
    ])
}

/// Shaped reward for one UAV: the aerial-target term (zero once this agent
/// has reached its own target), peer and obstacle overlap penalties, and the
/// return-to-UGV term.
pub fn uav_reward(state: &WorldState, agent: usize, params: &RewardParams) -> RewardBreakdown {
    debug_assert!(agent < state.uavs.len());
    let me_state = &state.uavs[agent];
    let positions: Vec<Vec2> = state.uavs.iter().map(|a| a.pos).collect();
    let me = positions[agent];

    let r4 = if me_state.reached_target {
        0.0
    } else {
        target_distance_reward(&state.aerial_targets, &positions, params)
    };
    let r5: f64 = state
        .uavs
        .iter()
        .enumerate()
        .filter(|(i, peer)| *i != agent && peer.landed_on.is_none() && me_state.landed_on.is_none())
        .map(|(_, peer)| {
            pair_penalty(
                me.dist(peer.pos),
                params.danger.delta_v,
                params.danger.sigma_v,
                params.max_pair_penalty,
            )
        })
        .sum();
    let r6: f64 = if me_state.landed_on.is_some() {
        0.0
    } else {
        state
            .obstacles
            .iter()
            .map(|o| {
                pair_penalty(
                    me.dist(*o),
                    params.danger.delta_o,
                    params.danger.sigma_o,
                    params.max_obstacle_penalty,
                )
            })
            .sum()
    };
    let d_h = state.nearest_ugv(me).map(|(_, d)| d).unwrap_or(0.0);
    let r7 = return_reward(me_state.reached_target, d_h, params);

    RewardBreakdown::from_components(vec![
        (RewardComponent::AerialTargetDistance, r4),
        (RewardComponent::UavPairCollision, r5),
        (RewardComponent::UavObstacleCollision, r6),
        (RewardComponent::UavReturn, r7),
    ])
}

/// Reward for an agent of either kind; thin dispatch used by the trainers.
pub fn agent_reward(
    state: &WorldState,
    kind: AgentKind,
    agent: usize,
    params: &RewardParams,
) -> RewardBreakdown {
    match kind {
        AgentKind::Ugv => ugv_reward(state, agent, params),
        AgentKind::Uav => uav_reward(state, agent, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{spawn, WorldConfig};

    fn params() -> RewardParams {
        RewardParams::default()
    }

    #[test]
    fn target_distance_examples() {
        let p = params();
        // Agent on the only target.
        let r = target_distance_reward(&[(Vec2::ZERO, false)], &[Vec2::ZERO], &p);
        assert_eq!(r, 0.0);
        // 3-4-5 triangle distance.
        let r = target_distance_reward(&[(Vec2::new(0.3, 0.4), false)], &[Vec2::ZERO], &p);
        assert!((r + 0.5).abs() < 1e-12);
        // Two covered targets plus one far pair at distance d: only d counts.
        let targets = vec![
            (Vec2::new(0.0, 0.0), false),
            (Vec2::new(1.0, 0.0), false),
            (Vec2::new(0.0, 2.0), false),
        ];
        let agents = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.3)];
        let r = target_distance_reward(&targets, &agents, &p);
        assert!((r + 0.7).abs() < 1e-12);
        // Reached targets contribute nothing.
        let r = target_distance_reward(&[(Vec2::new(5.0, 5.0), true)], &[Vec2::ZERO], &p);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn target_distance_is_permutation_invariant() {
        let p = params();
        let targets = vec![
            (Vec2::new(0.2, 0.1), false),
            (Vec2::new(-0.5, 0.4), false),
            (Vec2::new(0.9, -0.3), true),
        ];
        let agents = vec![Vec2::new(0.0, 0.0), Vec2::new(0.5, 0.5)];
        let base = target_distance_reward(&targets, &agents, &p);
        let mut t2 = targets.clone();
        t2.reverse();
        let mut a2 = agents.clone();
        a2.reverse();
        assert!((base - target_distance_reward(&t2, &a2, &p)).abs() < 1e-12);
    }

    #[test]
    fn pair_penalty_interval() {
        let (delta, sigma) = (0.1, 0.2);
        // Zero at the annulus rim, saturated at contact.
        assert_eq!(pair_penalty(delta + sigma, delta, sigma, 1.0), 0.0);
        assert!((pair_penalty(delta, delta, sigma, 1.0) + 1.0).abs() < 1e-12);
        assert!((pair_penalty(delta + sigma / 2.0, delta, sigma, 1.0) + 0.5).abs() < 1e-12);
        // Inside the contact radius it stays saturated.
        assert!((pair_penalty(0.0, delta, sigma, 1.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn return_reward_cases() {
        let p = params();
        assert_eq!(return_reward(false, 0.7, &p), -1.0);
        assert_eq!(return_reward(true, 0.0, &p), 0.0);
        assert!((return_reward(true, 0.3, &p) + 0.3).abs() < 1e-12);
    }

    fn ugv_world(n_ugv: usize, n_obstacle: usize, n_targets: usize) -> WorldState {
        let cfg = WorldConfig {
            n_ugv,
            n_uav: 0,
            n_obstacle,
            n_ground_target: n_targets,
            n_aerial_target: 0,
            ..WorldConfig::default()
        };
        spawn(&cfg, 17).unwrap()
    }

    #[test]
    fn ugv_on_its_only_target_scores_zero() {
        let mut state = ugv_world(1, 0, 1);
        state.ugvs[0].pos = Vec2::new(0.2, 0.2);
        state.ground_targets[0] = (Vec2::new(0.2, 0.2), false);
        let b = ugv_reward(&state, 0, &params());
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn touching_ugvs_take_saturated_pair_penalty() {
        let mut state = ugv_world(2, 0, 1);
        state.ugvs[0].pos = Vec2::new(0.0, 0.0);
        state.ugvs[1].pos = Vec2::new(0.1, 0.0); // exactly delta_v apart
        state.ground_targets[0].1 = true;
        for agent in 0..2 {
            let b = ugv_reward(&state, agent, &params());
            assert!((b.component(RewardComponent::UgvPairCollision) + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lone_ugv_far_from_hazards_pays_only_distance() {
        let mut state = ugv_world(1, 0, 1);
        state.ugvs[0].pos = Vec2::new(0.0, 0.0);
        state.ground_targets[0] = (Vec2::new(0.5, 0.0), false);
        let b = ugv_reward(&state, 0, &params());
        assert!((b.total + 0.5).abs() < 1e-12);
    }

    #[test]
    fn shared_ground_term_is_identical_across_ugvs() {
        let mut state = ugv_world(3, 1, 2);
        state.ground_targets[0].1 = false;
        state.ground_targets[1].1 = false;
        let values: Vec<f64> = (0..3)
            .map(|i| ugv_reward(&state, i, &params()).component(RewardComponent::GroundTargetDistance))
            .collect();
        assert!((values[0] - values[1]).abs() < 1e-12);
        assert!((values[1] - values[2]).abs() < 1e-12);
    }

    fn uav_world() -> WorldState {
        let cfg = WorldConfig {
            n_ugv: 1,
            n_uav: 2,
            n_obstacle: 1,
            n_ground_target: 0,
            n_aerial_target: 2,
            ..WorldConfig::default()
        };
        spawn(&cfg, 23).unwrap()
    }

    #[test]
    fn landed_uav_on_its_ugv_scores_zero() {
        let mut state = uav_world();
        state.ugvs[0].pos = Vec2::new(0.0, 0.0);
        state.uavs[0].pos = Vec2::new(0.0, 0.0);
        state.uavs[0].reached_target = true;
        state.uavs[0].landed_on = Some(0);
        state.uavs[1].pos = Vec2::new(0.9, 0.9);
        state.obstacles[0] = Vec2::new(-0.9, -0.9);
        state.aerial_targets[0].1 = true;
        state.aerial_targets[1].1 = true;
        let b = uav_reward(&state, 0, &params());
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn pre_reach_uav_on_target_still_pays_flat_return_penalty() {
        let mut state = uav_world();
        state.ugvs[0].pos = Vec2::new(0.9, 0.9);
        state.uavs[0].pos = Vec2::new(0.0, 0.0);
        state.uavs[1].pos = Vec2::new(-0.9, 0.9);
        state.obstacles[0] = Vec2::new(0.9, -0.9);
        state.aerial_targets[0] = (Vec2::new(0.0, 0.0), false);
        state.aerial_targets[1] = (Vec2::new(-0.9, 0.9), false);
        let b = uav_reward(&state, 0, &params());
        // Own target contributes zero distance; the flat pre-reach penalty stands.
        assert_eq!(b.component(RewardComponent::UavReturn), -1.0);
        assert!((b.component(RewardComponent::AerialTargetDistance) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn reached_uav_stops_paying_the_target_term() {
        let mut state = uav_world();
        state.uavs[0].reached_target = true;
        state.aerial_targets[0].1 = true;
        // Second target stays open; the reached agent still owes nothing for it.
        state.aerial_targets[1].1 = false;
        let reached = uav_reward(&state, 0, &params());
        assert_eq!(reached.component(RewardComponent::AerialTargetDistance), 0.0);
        let seeking = uav_reward(&state, 1, &params());
        assert!(seeking.component(RewardComponent::AerialTargetDistance) < 0.0);
    }

    #[test]
    fn coincident_uavs_take_saturated_peer_penalty() {
        let mut state = uav_world();
        state.uavs[0].pos = Vec2::new(0.3, 0.3);
        state.uavs[1].pos = Vec2::new(0.3, 0.3);
        for agent in 0..2 {
            let b = uav_reward(&state, agent, &params());
            assert!((b.component(RewardComponent::UavPairCollision) + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn totals_are_never_positive() {
        use rand::Rng;
        let mut gen = crate::rng::stream(5150, 0);
        let p = params();
        for seed in 0..50 {
            let cfg = WorldConfig {
                n_ugv: gen.gen_range(1..=3),
                n_uav: gen.gen_range(1..=3),
                n_obstacle: gen.gen_range(0..=3),
                n_ground_target: gen.gen_range(0..=3),
                n_aerial_target: gen.gen_range(1..=3),
                ..WorldConfig::default()
            };
            let state = spawn(&cfg, seed).unwrap();
            for i in 0..state.ugvs.len() {
                let b = ugv_reward(&state, i, &p);
                assert!(b.total <= 0.0);
                assert!(b.components.iter().all(|(_, v)| *v <= 0.0));
            }
            for i in 0..state.uavs.len() {
                let b = uav_reward(&state, i, &p);
                assert!(b.total <= 0.0);
                assert!(b.components.iter().all(|(_, v)| *v <= 0.0));
            }
        }
    }

    #[test]
    fn mirror_symmetry_of_ugv_reward() {
        let mut state = ugv_world(2, 1, 2);
        state.ugvs[0].pos = Vec2::new(0.2, -0.4);
        state.ugvs[1].pos = Vec2::new(-0.3, 0.1);
        state.obstacles[0] = Vec2::new(0.05, 0.05);
        state.ground_targets[0] = (Vec2::new(0.7, 0.3), false);
        state.ground_targets[1] = (Vec2::new(-0.6, -0.2), false);
        let base = ugv_reward(&state, 0, &params());

        let mut mirrored = state.clone();
        let flip = |v: Vec2| Vec2::new(-v.x, v.y);
        for a in &mut mirrored.ugvs {
            a.pos = flip(a.pos);
        }
        mirrored.obstacles[0] = flip(mirrored.obstacles[0]);
        for t in &mut mirrored.ground_targets {
            t.0 = flip(t.0);
        }
        let reflected = ugv_reward(&mirrored, 0, &params());
        assert!((base.total - reflected.total).abs() < 1e-12);
    }

    #[test]
    fn moving_toward_a_lone_target_improves_the_distance_term() {
        let p = params();
        let target = [(Vec2::new(0.8, 0.0), false)];
        let mut prev = target_distance_reward(&target, &[Vec2::new(-0.8, 0.0)], &p);
        for k in 1..=8 {
            let x = -0.8 + 0.15 * k as f64;
            if x >= 0.8 {
                break;
            }
            let cur = target_distance_reward(&target, &[Vec2::new(x, 0.0)], &p);
            assert!(cur > prev, "distance term must strictly improve");
            prev = cur;
        }
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pair_penalty_is_nonpositive_bounded_and_monotone(
            d in 0.0f64..2.0,
            step in 1e-6f64..0.5,
        ) {
            let (delta, sigma, max_p) = (0.1, 0.2, 1.0);
            let a = pair_penalty(d, delta, sigma, max_p);
            let b = pair_penalty(d + step, delta, sigma, max_p);
            prop_assert!(a <= 0.0 && a >= -max_p);
            // Non-decreasing in distance.
            prop_assert!(b >= a);
        }

        #[test]
        fn pair_penalty_is_continuous(d in 0.0f64..2.0) {
            let eps = 1e-9;
            let (delta, sigma, max_p) = (0.1, 0.2, 1.0);
            let here = pair_penalty(d, delta, sigma, max_p);
            let near = pair_penalty(d + eps, delta, sigma, max_p);
            prop_assert!((here - near).abs() < 1e-7);
        }
    }
}
