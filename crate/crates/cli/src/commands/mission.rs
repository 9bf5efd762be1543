//! `coalition mission`: evaluate trained models over randomized full
//! missions and emit per-episode records plus the metric table.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rand::Rng;

use coalition_core::artifacts::{self, ComparisonTable};
use coalition_core::evaluation;
use coalition_core::geom::Vec2;
use coalition_core::mission::{
    plan, run_mission, Coalition, MissionPolicies, MissionSpec, PlanMode,
};
use coalition_core::rng;
use coalition_core::world::{self, WorldConfig};
use coalition_core::zoning::MeanShiftConfig;

use crate::runs;

pub struct Args {
    pub ugv_run: PathBuf,
    pub uav_run: Option<PathBuf>,
    pub episodes: usize,
    pub targets: usize,
    pub obstacles: usize,
    pub coalition: String,
    pub mode: String,
    pub zone_radius: f64,
    pub field_half_extent: f64,
    pub seed: u64,
    pub label: Option<String>,
    pub out: Option<PathBuf>,
    pub no_plots: bool,
}

fn parse_coalition(s: &str) -> Result<(usize, usize)> {
    let (g, a) = s
        .split_once('x')
        .with_context(|| format!("coalition shape `{s}` should look like `2x6`"))?;
    Ok((g.trim().parse()?, a.trim().parse()?))
}

pub fn run(args: Args) -> Result<()> {
    let (n_coalitions, n_uavs) = parse_coalition(&args.coalition)?;
    if n_coalitions == 0 {
        bail!("need at least one coalition");
    }
    let mode = match args.mode.as_str() {
        "zoned" => PlanMode::Zoned,
        "no-zoning" => PlanMode::NoZoning,
        other => bail!("unknown mode `{other}`"),
    };

    let ugv_cfg = runs::load_config(&args.ugv_run)
        .with_context(|| format!("load config from {}", args.ugv_run.display()))?;
    let ugv_controller = runs::load_controller(&args.ugv_run)?;
    let (uav_controller, uav_cfg) = match &args.uav_run {
        Some(dir) => {
            let cfg = runs::load_config(dir)
                .with_context(|| format!("load config from {}", dir.display()))?;
            (Some(runs::load_controller(dir)?), Some(cfg))
        }
        None => (None, None),
    };
    if n_uavs > 0 && uav_controller.is_none() {
        bail!("coalition shape {} carries UAVs; pass --uav-run", args.coalition);
    }

    // Zone-execution world template: vehicle and slot counts must match the
    // dimensions the policies were trained with.
    let mut template = WorldConfig {
        n_ugv: n_coalitions,
        n_uav: n_uavs,
        ..ugv_cfg.world.clone()
    };
    if let Some(ucfg) = &uav_cfg {
        template.n_aerial_target = ucfg.world.n_aerial_target;
        if ucfg.world.n_obstacle != template.n_obstacle {
            bail!(
                "ground run trained with {} obstacles but air run with {}; \
                 zone worlds cannot satisfy both observation layouts",
                template.n_obstacle,
                ucfg.world.n_obstacle
            );
        }
    } else {
        template.n_aerial_target = 0;
    }

    let out = runs::resolve_out_dir(args.out, "mission");
    std::fs::create_dir_all(&out).with_context(|| format!("create {}", out.display()))?;
    let mut manifest_cfg = ugv_cfg.clone();
    manifest_cfg.seed = args.seed;
    manifest_cfg.zoning.radius = args.zone_radius;
    runs::write_manifest(
        &out,
        &manifest_cfg,
        &format!(
            "mission --coalition {} --mode {} --targets {} --episodes {}",
            args.coalition, args.mode, args.targets, args.episodes
        ),
    )?;

    let zoning_cfg = MeanShiftConfig::with_radius(args.zone_radius);
    let policies = MissionPolicies {
        ugv: ugv_controller.as_ref(),
        uav: uav_controller.as_deref(),
    };

    let n_aerial = if uav_controller.is_some() {
        args.targets / 2
    } else {
        0
    };
    let n_ground = args.targets - n_aerial;

    let mut records = Vec::with_capacity(args.episodes);
    let mut first_trace: Option<String> = None;
    let mut first_constraints: Option<String> = None;
    for ep in 0..args.episodes {
        let mut gen = rng::stream(args.seed, 0x0415_0000 ^ ep as u64);
        let half = args.field_half_extent;
        let mut draw = |n: usize| -> Vec<Vec2> {
            (0..n)
                .map(|_| Vec2::new(gen.gen_range(-half..=half), gen.gen_range(-half..=half)))
                .collect()
        };
        let spec = MissionSpec {
            ground_targets: draw(n_ground),
            aerial_targets: draw(n_aerial),
            obstacles: draw(args.obstacles),
        };
        let mission_plan = plan(&spec, &zoning_cfg, n_coalitions, mode);

        let uavs_per = if n_coalitions > 0 { n_uavs / n_coalitions } else { 0 };
        let extra = n_uavs % n_coalitions;
        let mut next_uav = 0usize;
        let mut coalitions: Vec<Coalition> = (0..n_coalitions)
            .map(|c| {
                let count = uavs_per + usize::from(c < extra);
                let uav_ids: Vec<usize> = (next_uav..next_uav + count).collect();
                next_uav += count;
                Coalition::new(vec![c], uav_ids)
            })
            .collect();

        let outcome = run_mission(&mission_plan, &mut coalitions, &policies, &template, &spec)?;
        if first_trace.is_none() {
            first_trace = Some(artifacts::paths_to_svg(&outcome.aggregate));
            let report = world::check_constraints(&outcome.aggregate);
            first_constraints = Some(artifacts::constraints_to_csv(&report));
        }
        records.push(outcome.aggregate);
    }

    artifacts::write_text(&out.join("episodes.csv"), &artifacts::records_to_csv(&records))?;
    if let Some(csv) = first_constraints {
        artifacts::write_text(&out.join("constraints_episode0.csv"), &csv)?;
    }
    if !args.no_plots {
        if let Some(svg) = first_trace {
            artifacts::write_text(&out.join("trace_episode0.svg"), &svg)?;
        }
    }

    let label = args.label.unwrap_or_else(|| {
        format!(
            "{}-{}",
            if uav_controller.is_some() { "coalition" } else { "ugv-only" },
            args.mode
        )
    });
    let config_desc = format!(
        "targets={},coalition={},radius={},episodes={},seed={}",
        args.targets, args.coalition, args.zone_radius, args.episodes, args.seed
    );
    let mut table = ComparisonTable::default();
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
    println!("{} mission episodes in {}", records.len(), out.display());
    Ok(())
}
