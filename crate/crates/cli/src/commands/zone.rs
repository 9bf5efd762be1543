//! `coalition zone`: cluster a points file and emit the zone table, the
//! coverage check, and an optional scatter overlay.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use coalition_core::artifacts;
use coalition_core::zoning::{assign_zones, zone_count_lower_bound, MeanShiftConfig};

use crate::runs;

pub fn run(points_file: &Path, radius: f64, out: Option<PathBuf>, no_plots: bool) -> Result<()> {
    let text = std::fs::read_to_string(points_file)
        .with_context(|| format!("read {}", points_file.display()))?;
    let points = artifacts::points_from_csv(&text, &points_file.display().to_string())?;

    let cfg = MeanShiftConfig::with_radius(radius);
    cfg.validate().map_err(|e| anyhow::anyhow!(e))?;
    let zones = assign_zones(&points, &cfg);

    // Coverage assertion: every input point within the radius of its center.
    let mut covered = 0usize;
    for (z, members) in zones.membership.iter().enumerate() {
        for &m in members {
            if zones.centers[z].dist(points[m]) <= radius {
                covered += 1;
            }
        }
    }
    let coverage_ok = covered == points.len();

    let out = runs::resolve_out_dir(out, "zones");
    std::fs::create_dir_all(&out).with_context(|| format!("create {}", out.display()))?;
    artifacts::write_text(&out.join("zones.csv"), &artifacts::zones_to_csv(&zones))?;
    if !no_plots {
        artifacts::write_text(
            &out.join("zones.svg"),
            &artifacts::zones_to_svg(&points, &zones, radius),
        )?;
    }

    let lower_bound = zone_count_lower_bound(&points, radius);
    let summary = format!(
        "points = {}\nzones = {}\nradius = {radius}\ncoverage_ok = {coverage_ok}\ngreedy_cover_reference = {lower_bound}\n",
        points.len(),
        zones.len()
    );
    artifacts::write_text(&out.join("summary.txt"), &summary)?;
    print!("{summary}");

    if !coverage_ok {
        anyhow::bail!("coverage check failed: some points lie outside every zone");
    }
    Ok(())
}
