//! Behavioral probe for a trained ground-phase checkpoint: where does the
//! greedy policy lose return against a scripted tour?

use coalition_core::maddpg::MaddpgPolicy;
use coalition_core::neural::Mlp;
use coalition_core::reward::{RewardComponent, RewardParams};
use coalition_core::train_env::{Controller, TrainEnv};
use coalition_core::world::{Action, WorldConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let run_dir = args.get(1).expect("usage: diagnose <run_dir> [episodes]");
    let episodes: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(500);

    let actor = Mlp::load(std::path::Path::new(&format!("{run_dir}/actor_0.mlp"))).unwrap();
    let policy = MaddpgPolicy {
        actor,
        action_scale: 0.08,
    };

    let world = WorldConfig {
        n_ugv: 1,
        n_obstacle: 1,
        n_ground_target: 2,
        ..WorldConfig::default()
    };
    let mut env = TrainEnv::ugv_phase(world.clone(), RewardParams::default()).unwrap();

    let mut comp_sums = [0.0f64; 7];
    let mut returns = Vec::new();
    let mut tour_steps_when_done = Vec::new();
    let mut fail_dist = Vec::new();
    let mut done_steps = Vec::new();
    let mut reached_counts = [0usize; 3];

    let mut speed_sum = 0.0f64;
    let mut speed_count = 0usize;
    for ep in 0..episodes {
        let mut obs = env.reset(4242, ep);
        let mut ret = 0.0;
        let mut steps = 0;
        let mut done = false;
        for _ in 0..env.max_steps() {
            let a = policy.act(&obs[0]);
            speed_sum += (a.u * a.u + a.v * a.v).sqrt() / 0.08;
            speed_count += 1;
            let out = env.step(&[a]).unwrap();
            steps += 1;
            ret += out.rewards[0].total;
            for (k, c) in RewardComponent::ALL.iter().enumerate() {
                comp_sums[k] += out.rewards[0].component(*c);
            }
            obs = out.observations;
            if out.done {
                done = true;
                break;
            }
            if out.truncated {
                break;
            }
        }
        returns.push(ret);
        let reached = env
            .state()
            .ground_targets
            .iter()
            .filter(|(_, r)| *r)
            .count();
        reached_counts[reached] += 1;
        if done {
            done_steps.push(steps as f64);
        } else {
            // Distance to the nearest unreached target at the end.
            let me = env.state().ugvs[0].pos;
            let d = env
                .state()
                .ground_targets
                .iter()
                .filter(|(_, r)| !*r)
                .map(|(p, _)| me.dist(*p))
                .fold(f64::INFINITY, f64::min);
            fail_dist.push(d);
        }

        // Scripted tour on the same spawn for a step-count reference.
        let mut tour_obs = env.reset(4242, ep);
        let mut tour_steps = 0;
        for _ in 0..env.max_steps() {
            let mut best: Option<(f64, f64, f64)> = None;
            for pair in tour_obs[0][4..8].chunks(2) {
                if pair[0] == 0.0 && pair[1] == 0.0 {
                    continue;
                }
                let d = (pair[0] * pair[0] + pair[1] * pair[1]).sqrt();
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, pair[0], pair[1]));
                }
            }
            let a = match best {
                Some((_, x, y)) => Action::new(x, y),
                None => Action::default(),
            };
            let out = env.step(&[a]).unwrap();
            tour_steps += 1;
            tour_obs = out.observations;
            if out.done {
                break;
            }
            if out.truncated {
                break;
            }
        }
        if done {
            tour_steps_when_done.push(tour_steps as f64);
        }
    }

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
    println!(
        "mean |action| as a fraction of max speed: {:.3}",
        speed_sum / speed_count.max(1) as f64
    );
    println!("episodes {episodes}, reached 0/1/2: {reached_counts:?}");
    println!("mean return {:.2}", mean(&returns));
    println!(
        "component means per episode: r1 {:.2}  r2 {:.2}  r3 {:.2}",
        comp_sums[0] / episodes as f64,
        comp_sums[1] / episodes as f64,
        comp_sums[2] / episodes as f64
    );
    println!(
        "completed: {} episodes, policy steps {:.1} vs tour steps {:.1}",
        done_steps.len(),
        mean(&done_steps),
        mean(&tour_steps_when_done)
    );
    if !fail_dist.is_empty() {
        let close = fail_dist.iter().filter(|d| **d < 0.3).count();
        println!(
            "failures: {}, mean end-distance to open target {:.3} ({} ended within 0.3)",
            fail_dist.len(),
            mean(&fail_dist),
            close
        );
    }
}
