//! Shared-parameter MAPPO: a Gaussian policy over each agent's observation,
//! a centralized value function over the concatenated team observation,
//! generalized advantage estimation, reward-to-go targets with optional
//! PopArt normalization, and the clipped surrogate objective.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::maddpg::{EpisodeStats, LearningCurve, TrainError};
use crate::neural::{adam_step, Activation, AdamState, Gradients, Mlp, Workspace};
use crate::reward::RewardComponent;
use crate::rng;
use crate::train_env::{Controller, TrainEnv, TrainPhase};
use crate::world::Action;

#[derive(Debug, Clone, PartialEq)]
pub struct MappoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    /// Optimization epochs per collected batch.
    pub epochs_per_batch: usize,
    pub minibatch_count: usize,
    /// Episodes collected per batch.
    pub episodes_per_batch: usize,
    pub value_loss_coeff: f64,
    pub entropy_coeff: f64,
    pub popart_enabled: bool,
    pub popart_beta: f64,
    /// Kept for buffer chunking parity; feed-forward nets make it inert and
    /// it defaults to the episode horizon.
    pub chunk_length: usize,
    /// Total episode budget.
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub lr: f64,
    pub hidden: usize,
}

impl MappoConfig {
    pub fn preset(episodes: usize, steps_per_episode: usize) -> Self {
        MappoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs_per_batch: 10,
            minibatch_count: 1,
            episodes_per_batch: 25,
            value_loss_coeff: 0.5,
            entropy_coeff: 0.01,
            popart_enabled: true,
            popart_beta: 0.999,
            chunk_length: steps_per_episode,
            episodes,
            steps_per_episode,
            lr: 7e-4,
            hidden: 64,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return Err("gae_lambda must be in (0, 1]".into());
        }
        if !(self.clip_epsilon > 0.0) {
            return Err("clip_epsilon must be > 0".into());
        }
        if self.episodes_per_batch == 0 || self.epochs_per_batch == 0 || self.minibatch_count == 0
        {
            return Err("batch/epoch/minibatch counts must be >= 1".into());
        }
        Ok(())
    }
}

/// Generalized advantage estimates by the backward recursion
/// `A_t = delta_t + gamma*lambda*A_{t+1}` with
/// `delta_t = r_t + gamma*(1 - done_t)*V_{t+1} - V_t` and
/// `V_T = bootstrap_value`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap_value: f64,
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    assert_eq!(rewards.len(), values.len(), "rewards/values length mismatch");
    assert_eq!(rewards.len(), dones.len(), "rewards/dones length mismatch");
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let v_next = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * not_done * v_next - values[t];
        acc = delta + gamma * lambda * acc;
        advantages[t] = acc;
    }
    advantages
}

/// Discounted reward-to-go: `R_t = r_t + gamma*(1 - done_t)*R_{t+1}` with
/// `R` beyond the horizon equal to `bootstrap_value`.
pub fn reward_to_go(rewards: &[f64], bootstrap_value: f64, dones: &[bool], gamma: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), dones.len(), "rewards/dones length mismatch");
    let n = rewards.len();
    let mut returns = vec![0.0; n];
    let mut acc = bootstrap_value;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        acc = rewards[t] + gamma * not_done * acc;
        returns[t] = acc;
    }
    returns
}

/// Running mean/variance of return targets with exponential decay and
/// Adam-style debiasing; variance floored at 1e-8.
#[derive(Debug, Clone, PartialEq)]
pub struct PopArtState {
    first_moment: f64,
    second_moment: f64,
    debias: f64,
    pub beta: f64,
    pub enabled: bool,
}

impl PopArtState {
    pub fn new(beta: f64, enabled: bool) -> Self {
        PopArtState {
            first_moment: 0.0,
            second_moment: 0.0,
            debias: 0.0,
            beta,
            enabled,
        }
    }

    /// Current debiased statistics; identity (0, 1) before any update or
    /// when disabled.
    pub fn mean_std(&self) -> (f64, f64) {
        if !self.enabled || self.debias == 0.0 {
            return (0.0, 1.0);
        }
        let mean = self.first_moment / self.debias;
        let var = (self.second_moment / self.debias - mean * mean).max(1e-8);
        (mean, var.sqrt())
    }

    /// Fold `targets` into the running statistics, then return them
    /// normalized under the updated statistics. Identity when disabled.
    pub fn update_and_normalize(&mut self, targets: &[f64]) -> Vec<f64> {
        if !self.enabled {
            return targets.to_vec();
        }
        for &t in targets {
            debug_assert!(t.is_finite());
            self.first_moment = self.beta * self.first_moment + (1.0 - self.beta) * t;
            self.second_moment = self.beta * self.second_moment + (1.0 - self.beta) * t * t;
            self.debias = self.beta * self.debias + (1.0 - self.beta);
        }
        let (mean, std) = self.mean_std();
        targets.iter().map(|t| (t - mean) / std).collect()
    }

    /// Map a normalized value prediction back to the target scale.
    pub fn denormalize(&self, v: f64) -> f64 {
        let (mean, std) = self.mean_std();
        mean + std * v
    }
}

/// Pessimistic clipped surrogate for one sample:
/// `min(rho*adv, clamp(rho, 1-eps, 1+eps)*adv)` with `rho = exp(log_ratio)`.
pub fn clipped_objective(log_ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let rho = log_ratio.exp();
    let unclipped = rho * advantage;
    let clipped = rho.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    unclipped.min(clipped)
}

/// Gradient of [`clipped_objective`] with respect to the new log-probability.
fn clipped_objective_grad(log_ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let rho = log_ratio.exp();
    let unclipped = rho * advantage;
    let clipped = rho.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    if unclipped <= clipped {
        // d(rho*adv)/d(logp_new) = rho*adv.
        unclipped
    } else {
        0.0
    }
}

/// Per-dimension diagonal-Gaussian log density terms.
fn log_prob_terms(mean: &[f64], log_std: &[f64; 2], action: &[f64; 2]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for d in 0..2 {
        let std = log_std[d].exp();
        let z = (action[d] - mean[d]) / std;
        out[d] = -0.5 * z * z - log_std[d] - 0.5 * (std::f64::consts::TAU).ln();
    }
    out
}

fn log_prob(mean: &[f64], log_std: &[f64; 2], action: &[f64; 2]) -> f64 {
    let t = log_prob_terms(mean, log_std, action);
    t[0] + t[1]
}

/// Differential entropy of the diagonal Gaussian head.
pub fn entropy(log_std: &[f64; 2]) -> f64 {
    log_std
        .iter()
        .map(|ls| 0.5 + 0.5 * (std::f64::consts::TAU).ln() + ls)
        .sum()
}

/// Shared policy and centralized value function with optimizer state.
#[derive(Debug, Clone)]
pub struct MappoModels {
    /// Observation-to-action-mean net, shared by every agent.
    pub policy: Mlp,
    /// State-independent log standard deviation per action dimension.
    pub log_std: [f64; 2],
    /// Centralized value net over the concatenated team observation.
    pub value: Mlp,
    pub popart: PopArtState,
    pub obs_dim: usize,
    pub n_agents: usize,
    pub action_scale: f64,
    pub phase: TrainPhase,
    policy_opt: AdamState,
    value_opt: AdamState,
    log_std_opt: ScalarAdam,
}

impl MappoModels {
    pub fn new(cfg: &MappoConfig, obs_dim: usize, n_agents: usize, action_scale: f64, phase: TrainPhase, seed: u64) -> Self {
        let policy = Mlp::new(
            &[obs_dim, cfg.hidden, cfg.hidden, 2],
            Activation::Tanh,
            Activation::Tanh,
            0.01,
            rng::derive_seed(seed, 0x9010),
        );
        let value = Mlp::new(
            &[obs_dim * n_agents, cfg.hidden, cfg.hidden, 1],
            Activation::Tanh,
            Activation::Identity,
            1.0,
            rng::derive_seed(seed, 0x9011),
        );
        MappoModels {
            policy_opt: AdamState::new(&policy, cfg.lr),
            value_opt: AdamState::new(&value, cfg.lr),
            log_std_opt: ScalarAdam::new(cfg.lr),
            policy,
            log_std: [0.0; 2],
            value,
            popart: PopArtState::new(cfg.popart_beta, cfg.popart_enabled),
            obs_dim,
            n_agents,
            action_scale,
            phase,
        }
    }

    /// Deterministic (mean-action) execution policy.
    pub fn policy_controller(&self) -> MappoPolicy {
        MappoPolicy {
            mean_net: self.policy.clone(),
            action_scale: self.action_scale,
        }
    }
}

/// Frozen mean-action policy wrapped as a [`Controller`].
#[derive(Debug, Clone)]
pub struct MappoPolicy {
    pub mean_net: Mlp,
    pub action_scale: f64,
}

impl Controller for MappoPolicy {
    fn act(&self, obs: &[f64]) -> Action {
        let out = self.mean_net.forward(obs);
        Action::new(out[0] * self.action_scale, out[1] * self.action_scale)
    }

    fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }
}

/// Two-scalar Adam for the log-std head.
#[derive(Debug, Clone)]
struct ScalarAdam {
    m: [f64; 2],
    v: [f64; 2],
    t: u64,
    lr: f64,
}

impl ScalarAdam {
    fn new(lr: f64) -> Self {
        ScalarAdam {
            m: [0.0; 2],
            v: [0.0; 2],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64; 2], grads: &[f64; 2]) {
        let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        self.t += 1;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for d in 0..2 {
            self.m[d] = b1 * self.m[d] + (1.0 - b1) * grads[d];
            self.v[d] = b2 * self.v[d] + (1.0 - b2) * grads[d] * grads[d];
            params[d] -= self.lr * (self.m[d] / bc1) / ((self.v[d] / bc2).sqrt() + eps);
        }
    }
}

/// One rollout step: team-level state plus per-agent policy data.
#[derive(Debug, Clone)]
struct RolloutStep {
    global_obs: Vec<f64>,
    agent_obs: Vec<Vec<f64>>,
    actions: Vec<[f64; 2]>,
    log_probs: Vec<f64>,
    reward: f64,
    value: f64,
    done: bool,
}

/// Collected batch with advantage and return columns filled in per episode.
#[derive(Debug, Default)]
struct RolloutBuffer {
    steps: Vec<RolloutStep>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
}

fn gaussian(gen: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = gen.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = gen.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Full MAPPO loop: collect `episodes_per_batch` episodes with the shared
/// stochastic policy, compute advantages (GAE, then batch standardization)
/// and PopArt-normalized reward-to-go, then run `epochs_per_batch` epochs of
/// clipped-surrogate updates with an entropy bonus and value regression.
pub fn train(
    env: &mut TrainEnv,
    cfg: &MappoConfig,
    seed: u64,
) -> Result<(MappoModels, LearningCurve), TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    let n_agents = env.n_agents();
    let obs_dim = env.obs_dim();
    let mut models = MappoModels::new(
        cfg,
        obs_dim,
        n_agents,
        env.world_cfg.max_speed,
        env.phase,
        rng::derive_seed(seed, 0x0a90),
    );
    let mut action_rng = rng::stream(seed, 0x0ac7);
    let mut shuffle_rng = rng::stream(seed, 0x0b1e);
    let mut curve: LearningCurve = Vec::with_capacity(cfg.episodes);

    let iterations = cfg.episodes.div_ceil(cfg.episodes_per_batch);
    let mut episode_index = 0usize;

    for _ in 0..iterations {
        let mut buffer = RolloutBuffer::default();
        let mut ws_policy = Workspace::new(&models.policy);
        let mut ws_value = Workspace::new(&models.value);

        for _ in 0..cfg.episodes_per_batch {
            if episode_index >= cfg.episodes {
                break;
            }
            let mut obs = env.reset(seed, episode_index);
            let episode_start = buffer.steps.len();
            let mut ret = 0.0;
            let mut comp_sums = [0.0f64; 7];
            let mut comp_count = 0usize;
            let mut collisions = 0usize;
            let mut steps = 0usize;
            let mut completed = false;
            let mut bootstrap = 0.0;

            for _ in 0..cfg.steps_per_episode {
                let global_obs: Vec<f64> = obs.iter().flatten().copied().collect();
                let value = models
                    .popart
                    .denormalize(models.value.forward_trace(&global_obs, &mut ws_value)[0]);

                let mut actions = Vec::with_capacity(n_agents);
                let mut log_probs = Vec::with_capacity(n_agents);
                let mut env_actions = Vec::with_capacity(n_agents);
                for a in 0..n_agents {
                    let mean = models.policy.forward_trace(&obs[a], &mut ws_policy).to_vec();
                    let mut sample = [0.0f64; 2];
                    for d in 0..2 {
                        sample[d] = mean[d] + models.log_std[d].exp() * gaussian(&mut action_rng);
                    }
                    log_probs.push(log_prob(&mean, &models.log_std, &sample));
                    actions.push(sample);
                    env_actions.push(Action::new(
                        sample[0].clamp(-1.0, 1.0) * models.action_scale,
                        sample[1].clamp(-1.0, 1.0) * models.action_scale,
                    ));
                }

                let out = env.step(&env_actions)?;
                steps += 1;
                // Cooperative setting: agents share the mean shaped reward.
                let team_reward =
                    out.rewards.iter().map(|b| b.total).sum::<f64>() / n_agents as f64;
                ret += team_reward;
                for breakdown in &out.rewards {
                    for (k, comp) in RewardComponent::ALL.iter().enumerate() {
                        comp_sums[k] += breakdown.component(*comp);
                    }
                    comp_count += 1;
                }
                collisions += out.collisions.0 + out.collisions.1;

                buffer.steps.push(RolloutStep {
                    global_obs,
                    agent_obs: std::mem::take(&mut obs),
                    actions,
                    log_probs,
                    reward: team_reward,
                    value,
                    done: out.done,
                });
                obs = out.observations;

                if out.done {
                    completed = true;
                    break;
                }
                if out.truncated {
                    // Bootstrap through the time limit with the value of the
                    // final observation.
                    let global: Vec<f64> = obs.iter().flatten().copied().collect();
                    bootstrap = models
                        .popart
                        .denormalize(models.value.forward_trace(&global, &mut ws_value)[0]);
                    break;
                }
            }

            // Per-episode advantage and return columns.
            let slice = &buffer.steps[episode_start..];
            let rewards: Vec<f64> = slice.iter().map(|s| s.reward).collect();
            let values: Vec<f64> = slice.iter().map(|s| s.value).collect();
            let dones: Vec<bool> = slice.iter().map(|s| s.done).collect();
            buffer
                .advantages
                .extend(gae(&rewards, &values, bootstrap, &dones, cfg.gamma, cfg.gae_lambda));
            buffer
                .returns
                .extend(reward_to_go(&rewards, bootstrap, &dones, cfg.gamma));

            let denom = comp_count.max(1) as f64;
            let mut components = [0.0f64; 7];
            for k in 0..7 {
                components[k] = comp_sums[k] / denom;
            }
            curve.push(EpisodeStats {
                episode: episode_index,
                ret,
                components,
                collisions,
                steps,
                completed,
            });
            episode_index += 1;
        }

        if buffer.steps.is_empty() {
            break;
        }
        let normalized_returns = models.popart.update_and_normalize(&buffer.returns);
        let advantages = standardize(&buffer.advantages);

        optimize_batch(&mut models, cfg, &buffer, &advantages, &normalized_returns, &mut shuffle_rng)?;
    }
    Ok((models, curve))
}

/// Batch standardization to zero mean, unit variance.
fn standardize(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
    let std = var.sqrt().max(1e-8);
    xs.iter().map(|x| (x - mean) / std).collect()
}

fn optimize_batch(
    models: &mut MappoModels,
    cfg: &MappoConfig,
    buffer: &RolloutBuffer,
    advantages: &[f64],
    normalized_returns: &[f64],
    shuffle_rng: &mut ChaCha8Rng,
) -> Result<(), TrainError> {
    let n_steps = buffer.steps.len();
    let n_agents = models.n_agents;
    let mut ws_policy = Workspace::new(&models.policy);
    let mut ws_value = Workspace::new(&models.value);
    let mut policy_grads = Gradients::zeros_like(&models.policy);
    let mut value_grads = Gradients::zeros_like(&models.value);

    for _ in 0..cfg.epochs_per_batch {
        let order = rand::seq::index::sample(shuffle_rng, n_steps, n_steps).into_vec();
        for chunk in order.chunks(n_steps.div_ceil(cfg.minibatch_count)) {
            policy_grads.zero();
            value_grads.zero();
            let mut log_std_grad = [0.0f64; 2];
            let inv_policy = 1.0 / (chunk.len() * n_agents) as f64;
            let inv_value = 1.0 / chunk.len() as f64;

            for &idx in chunk {
                let step = &buffer.steps[idx];
                let adv = advantages[idx];

                for a in 0..n_agents {
                    let mean = models
                        .policy
                        .forward_trace(&step.agent_obs[a], &mut ws_policy)
                        .to_vec();
                    let action = &step.actions[a];
                    let logp_new = log_prob(&mean, &models.log_std, action);
                    let log_ratio = logp_new - step.log_probs[a];
                    // Ascent on clip objective plus entropy bonus.
                    let dlogp = clipped_objective_grad(log_ratio, adv, cfg.clip_epsilon);
                    let mut upstream = [0.0f64; 2];
                    for d in 0..2 {
                        let std = models.log_std[d].exp();
                        let z = (action[d] - mean[d]) / std;
                        // d logp / d mean = z / std.
                        upstream[d] = dlogp * (z / std) * inv_policy;
                        // d logp / d log_std = z^2 - 1; d entropy / d log_std = 1.
                        log_std_grad[d] +=
                            (dlogp * (z * z - 1.0) + cfg.entropy_coeff) * inv_policy;
                    }
                    models.policy.backward_trace(
                        &step.agent_obs[a],
                        &upstream,
                        &mut ws_policy,
                        &mut policy_grads,
                    );
                }

                let v = models.value.forward_trace(&step.global_obs, &mut ws_value)[0];
                let err = v - normalized_returns[idx];
                models.value.backward_trace(
                    &step.global_obs,
                    &[cfg.value_loss_coeff * 2.0 * err * inv_value],
                    &mut ws_value,
                    &mut value_grads,
                );
            }

            // Maximization: flip policy-side gradients for Adam.
            policy_grads.scale(-1.0);
            for g in &mut log_std_grad {
                *g = -*g;
            }
            adam_step(&mut models.policy, &policy_grads, &mut models.policy_opt)?;
            models.log_std_opt.step(&mut models.log_std, &log_std_grad);
            adam_step(&mut models.value, &value_grads, &mut models.value_opt)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardParams;
    use crate::world::WorldConfig;

    #[test]
    fn gae_lambda_zero_is_the_td_residual() {
        let rewards = [0.5, -1.0, 2.0];
        let values = [0.1, 0.2, 0.3];
        let dones = [false, false, true];
        let adv = gae(&rewards, &values, 0.7, &dones, 0.9, 0.0);
        for t in 0..3 {
            let v_next = if t + 1 < 3 { values[t + 1] } else { 0.7 };
            let not_done = if dones[t] { 0.0 } else { 1.0 };
            let delta = rewards[t] + 0.9 * not_done * v_next - values[t];
            assert!((adv[t] - delta).abs() < 1e-12);
        }
    }

    #[test]
    fn gae_gamma_zero_is_reward_minus_value() {
        let rewards = [1.0, 2.0, 3.0];
        let values = [0.5, 0.5, 0.5];
        let dones = [false, false, false];
        let adv = gae(&rewards, &values, 9.0, &dones, 0.0, 0.95);
        for t in 0..3 {
            assert!((adv[t] - (rewards[t] - values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn gae_two_step_hand_recursion() {
        let adv = gae(&[1.0, 1.0], &[0.0, 0.0], 0.0, &[false, false], 0.99, 0.95);
        assert!((adv[1] - 1.0).abs() < 1e-12);
        assert!((adv[0] - (1.0 + 0.99 * 0.95)).abs() < 1e-12);
    }

    #[test]
    fn gae_matches_brute_force_double_sum() {
        use rand::Rng;
        let mut gen = rng::stream(41, 0);
        for _ in 0..50 {
            let n = gen.gen_range(1..=6);
            let rewards: Vec<f64> = (0..n).map(|_| gen.gen_range(-2.0..2.0)).collect();
            let values: Vec<f64> = (0..n).map(|_| gen.gen_range(-2.0..2.0)).collect();
            let dones: Vec<bool> = (0..n).map(|_| gen.gen_bool(0.2)).collect();
            let bootstrap: f64 = gen.gen_range(-2.0..2.0);
            let (gamma, lambda) = (0.99, 0.95);
            let fast = gae(&rewards, &values, bootstrap, &dones, gamma, lambda);
            for t in 0..n {
                let mut brute = 0.0;
                for l in 0..(n - t) {
                    let s = t + l;
                    let v_next = if s + 1 < n { values[s + 1] } else { bootstrap };
                    let not_done = if dones[s] { 0.0 } else { 1.0 };
                    let delta = rewards[s] + gamma * not_done * v_next - values[s];
                    brute += (gamma * lambda).powi(l as i32) * delta;
                }
                assert!(
                    (fast[t] - brute).abs() < 1e-12,
                    "t={t}: {} vs {}",
                    fast[t],
                    brute
                );
            }
        }
    }

    #[test]
    fn reward_to_go_cases() {
        // Single terminal step.
        assert_eq!(reward_to_go(&[2.5], 9.0, &[true], 0.99), vec![2.5]);
        // Undiscounted running sums.
        assert_eq!(
            reward_to_go(&[1.0, 1.0, 1.0], 0.0, &[false, false, true], 1.0),
            vec![3.0, 2.0, 1.0]
        );
    }

    #[test]
    fn reward_to_go_equals_gae_plus_value_at_lambda_one() {
        use rand::Rng;
        let mut gen = rng::stream(43, 0);
        let n = 6;
        let rewards: Vec<f64> = (0..n).map(|_| gen.gen_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| gen.gen_range(-1.0..1.0)).collect();
        // No mid-sequence terminations; bootstrap closes the tail for both.
        let dones = vec![false; n];
        let bootstrap: f64 = gen.gen_range(-1.0..1.0);
        let gamma = 0.97;
        let adv = gae(&rewards, &values, bootstrap, &dones, gamma, 1.0);
        let rtg = reward_to_go(&rewards, bootstrap, &dones, gamma);
        for t in 0..n {
            assert!((adv[t] + values[t] - rtg[t]).abs() < 1e-10);
        }
    }

    #[test]
    fn popart_disabled_is_identity() {
        let mut st = PopArtState::new(0.999, false);
        let targets = [3.0, -1.0, 0.5];
        assert_eq!(st.update_and_normalize(&targets), targets.to_vec());
        assert_eq!(st.mean_std(), (0.0, 1.0));
        assert_eq!(st.denormalize(0.25), 0.25);
    }

    #[test]
    fn popart_constant_targets_normalize_toward_zero() {
        let mut st = PopArtState::new(0.99, true);
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            let normalized = st.update_and_normalize(&[5.0; 16]);
            last = normalized[15].abs();
        }
        // Statistics converge onto the constant; variance hits the floor.
        assert!(last < 1e-3, "normalized constant target was {last}");
        let (mean, std) = st.mean_std();
        assert!((mean - 5.0).abs() < 1e-3);
        assert!(std <= 1e-3);
    }

    #[test]
    fn popart_tracks_the_mean_of_noisy_targets() {
        let mut st = PopArtState::new(0.999, true);
        let mut gen = rng::stream(7, 3);
        for _ in 0..300 {
            let batch: Vec<f64> = (0..64).map(|_| 5.0 + gaussian(&mut gen)).collect();
            st.update_and_normalize(&batch);
        }
        let (mean, std) = st.mean_std();
        assert!((mean - 5.0).abs() < 0.1, "running mean {mean}");
        assert!((std - 1.0).abs() < 0.2, "running std {std}");
    }

    #[test]
    fn gaussian_entropy_grows_with_log_std() {
        assert!(entropy(&[0.0, 0.0]) < entropy(&[0.5, 0.0]));
        let expected = 2.0 * (0.5 + 0.5 * (std::f64::consts::TAU).ln());
        assert!((entropy(&[0.0, 0.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn clipped_objective_case_table() {
        // Ratio one returns the raw advantage.
        assert!((clipped_objective(0.0, 2.5, 0.2) - 2.5).abs() < 1e-12);
        // Upside clipped at 1+eps for positive advantage.
        assert!((clipped_objective(1.5f64.ln(), 1.0, 0.2) - 1.2).abs() < 1e-12);
        // Negative advantage: the clipped branch is the minimum.
        assert!((clipped_objective(0.5f64.ln(), -1.0, 0.2) + 0.8).abs() < 1e-12);
    }

    #[test]
    fn clipped_objective_is_a_lower_bound_on_the_raw_surrogate() {
        use rand::Rng;
        let mut gen = rng::stream(11, 0);
        for _ in 0..2000 {
            let log_ratio: f64 = gen.gen_range(-2.0..2.0);
            let adv: f64 = gen.gen_range(-3.0..3.0);
            let eps: f64 = gen.gen_range(0.05..0.5);
            let clipped = clipped_objective(log_ratio, adv, eps);
            let raw = log_ratio.exp() * adv;
            assert!(clipped <= raw + 1e-12);
        }
    }

    #[test]
    fn gaussian_log_prob_integrates_to_one_per_dimension() {
        let mean = [0.3, -0.2];
        let log_std: [f64; 2] = [0.1, -0.4];
        for d in 0..2 {
            let std = log_std[d].exp();
            let (lo, hi) = (mean[d] - 10.0 * std, mean[d] + 10.0 * std);
            let n = 20_000;
            let dx = (hi - lo) / n as f64;
            let mut integral = 0.0;
            for k in 0..n {
                let x = lo + (k as f64 + 0.5) * dx;
                let mut action = mean;
                action[d] = x;
                let terms = log_prob_terms(&mean, &log_std, &action);
                integral += terms[d].exp() * dx;
            }
            assert!((integral - 1.0).abs() < 1e-6, "dim {d} integral {integral}");
        }
    }

    #[test]
    fn value_gradient_matches_finite_differences() {
        let cfg = MappoConfig::preset(10, 10);
        let mut models = MappoModels::new(&cfg, 3, 2, 0.05, TrainPhase::Ugv, 5);
        models.popart.enabled = false;
        let global = vec![0.2, -0.4, 0.5, 0.0, 0.3, -0.1];
        let target = -1.3;
        let loss_of = |m: &MappoModels| {
            let v = m.value.forward(&global)[0];
            (v - target) * (v - target)
        };
        let mut ws = Workspace::new(&models.value);
        let mut grads = Gradients::zeros_like(&models.value);
        let v = models.value.forward_trace(&global, &mut ws)[0];
        models
            .value
            .backward_trace(&global, &[2.0 * (v - target)], &mut ws, &mut grads);

        let h = 1e-6;
        for (l, entry) in [(0usize, 2usize), (1, 33), (2, 12)] {
            let orig = models.value.layers[l].weights[entry];
            models.value.layers[l].weights[entry] = orig + h;
            let plus = loss_of(&models);
            models.value.layers[l].weights[entry] = orig - h;
            let minus = loss_of(&models);
            models.value.layers[l].weights[entry] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.layers[l].0[entry];
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            assert!(
                (numeric - analytic).abs() / denom < 1e-4,
                "layer {l} entry {entry}: {analytic} vs {numeric}"
            );
        }
    }

    fn tiny_env() -> TrainEnv {
        let cfg = WorldConfig {
            n_ugv: 1,
            n_obstacle: 1,
            n_ground_target: 2,
            ..WorldConfig::default()
        };
        TrainEnv::ugv_phase(cfg, RewardParams::default()).unwrap()
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let run = || {
            let mut env = tiny_env();
            let mut cfg = MappoConfig::preset(6, 20);
            cfg.episodes_per_batch = 3;
            cfg.epochs_per_batch = 2;
            let (_, curve) = train(&mut env, &cfg, 23).unwrap();
            curve
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn huge_epsilon_gradient_equals_vanilla_policy_gradient() {
        // With epsilon so large the clamp never binds, the surrogate gradient
        // at the first epoch must equal rho*adv = adv for ratio 1.
        use rand::Rng;
        let mut gen = rng::stream(3, 3);
        for _ in 0..500 {
            let adv: f64 = gen.gen_range(-2.0..2.0);
            let g_clip = clipped_objective_grad(0.0, adv, 1e6);
            assert!((g_clip - adv).abs() < 1e-12);
            let obj = clipped_objective(0.0, adv, 1e6);
            assert!((obj - adv).abs() < 1e-12);
        }
    }
}
