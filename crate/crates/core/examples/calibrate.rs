//! Scratch harness for sizing training runs: prints reward progress and wall
//! time for the desk-scale scenarios the test suite uses.

use std::time::Instant;

use coalition_core::maddpg::{self, MaddpgConfig};
use coalition_core::mappo::{self, MappoConfig};
use coalition_core::reward::RewardParams;
use coalition_core::train_env::{Controller, TrainEnv};
use coalition_core::world::{Action, WorldConfig};

fn window_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let algo = args.get(1).map(String::as_str).unwrap_or("maddpg");
    let episodes: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(7);

    let speed: f64 = std::env::var("CAL_SPEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0.08);
    let world = WorldConfig {
        n_ugv: 1,
        n_obstacle: 1,
        n_ground_target: 2,
        max_speed: speed,
        ..WorldConfig::default()
    };
    let mut env = TrainEnv::ugv_phase(world.clone(), RewardParams::default()).unwrap();

    if algo == "oracle" {
        // Scripted nearest-first tour as an upper-reference for returns.
        struct Tour;
        impl Controller for Tour {
            fn act(&self, obs: &[f64]) -> Action {
                let mut best: Option<(f64, f64, f64)> = None;
                for pair in obs[4..8].chunks(2) {
                    if pair[0] == 0.0 && pair[1] == 0.0 {
                        continue;
                    }
                    let d = (pair[0] * pair[0] + pair[1] * pair[1]).sqrt();
                    if best.map_or(true, |(bd, _, _)| d < bd) {
                        best = Some((d, pair[0], pair[1]));
                    }
                }
                match best {
                    Some((_, x, y)) => Action::new(x, y),
                    None => Action::default(),
                }
            }
            fn obs_dim(&self) -> usize {
                10
            }
        }
        let ctl = Tour;
        let mut returns = Vec::new();
        let mut done_count = 0;
        for ep in 0..episodes {
            let mut obs = env.reset(seed, ep);
            let mut ret = 0.0;
            for _ in 0..env.max_steps() {
                let actions: Vec<_> = obs.iter().map(|o| ctl.act(o)).collect();
                let out = env.step(&actions).unwrap();
                ret += out.rewards.iter().map(|b| b.total).sum::<f64>();
                obs = out.observations;
                if out.done {
                    done_count += 1;
                    break;
                }
                if out.truncated {
                    break;
                }
            }
            returns.push(ret);
        }
        println!(
            "oracle tour: mean return {:.2} over {} episodes, completion {:.2}",
            window_mean(&returns),
            episodes,
            done_count as f64 / episodes as f64
        );
        return;
    }

    let start = Instant::now();
    let (curve, policy): (Vec<maddpg::EpisodeStats>, Box<dyn Controller>) = match algo {
        "maddpg" => {
            let mut cfg = MaddpgConfig::preset(1, episodes, world.max_steps);
            if let Some(ue) = args.get(4).and_then(|s| s.parse().ok()) {
                cfg.update_every = ue;
            }
            if let Some(clip) = args.get(5).and_then(|s| s.parse().ok()) {
                cfg.grad_clip = if clip > 0.0 { Some(clip) } else { None };
            }
            if let Some(sigma) = args.get(6).and_then(|s| s.parse().ok()) {
                cfg.noise_sigma_start = sigma;
            }
            if args.get(7).map(String::as_str) == Some("tanh") {
                cfg.hidden_activation = coalition_core::neural::Activation::Tanh;
            }
            if let Some(se) = args.get(8).and_then(|s| s.parse().ok()) {
                cfg.noise_sigma_end = se;
            }
            let (models, curve) = maddpg::train(&mut env, &cfg, seed).unwrap();
            (curve, Box::new(models.policy(0)))
        }
        "mappo" => {
            let cfg = MappoConfig::preset(episodes, world.max_steps);
            let (models, curve) = mappo::train(&mut env, &cfg, seed).unwrap();
            (curve, Box::new(models.policy_controller()))
        }
        other => {
            eprintln!("unknown algo {other}");
            std::process::exit(1);
        }
    };
    let elapsed = start.elapsed();

    // Greedy evaluation of the frozen policy.
    let mut eval_env = TrainEnv::ugv_phase(world.clone(), RewardParams::default()).unwrap();
    let mut reached_hist = [0usize; 3];
    let mut eval_returns = Vec::new();
    for ep in 0..200 {
        let mut obs = eval_env.reset(seed ^ 0xeeee, ep);
        let mut ret = 0.0;
        for _ in 0..eval_env.max_steps() {
            let actions: Vec<_> = obs.iter().map(|o| policy.act(o)).collect();
            let out = eval_env.step(&actions).unwrap();
            ret += out.rewards.iter().map(|b| b.total).sum::<f64>();
            obs = out.observations;
            if out.done || out.truncated {
                break;
            }
        }
        let reached = eval_env
            .state()
            .ground_targets
            .iter()
            .filter(|(_, r)| *r)
            .count();
        reached_hist[reached] += 1;
        eval_returns.push(ret);
    }
    println!(
        "greedy eval: mean return {:.2}, reached 0/1/2 targets: {:?}",
        window_mean(&eval_returns),
        reached_hist
    );

    let returns: Vec<f64> = curve.iter().map(|s| s.ret).collect();
    let n = returns.len();
    let block = (n / 10).max(1);
    for k in (0..n).step_by(block) {
        let hi = (k + block).min(n);
        let done_frac = curve[k..hi].iter().filter(|s| s.completed).count() as f64
            / (hi - k) as f64;
        println!(
            "episodes {:>5}..{:<5} mean return {:>9.3}  completion {:>5.2}",
            k,
            hi,
            window_mean(&returns[k..hi]),
            done_frac
        );
    }
    let w = 500.min(n / 2).max(1);
    let first = window_mean(&returns[..w]);
    let last = window_mean(&returns[n - w..]);
    println!("first-{w} mean {first:.3}  last-{w} mean {last:.3}");
    println!(
        "improvement vs gap-to-zero: {:.1}% (need >= 50%)",
        100.0 * (last - first) / (0.0 - first)
    );
    println!("wall time {elapsed:?} for {n} episodes");
}
