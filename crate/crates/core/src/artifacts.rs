//! Artifact emission and parsing: CSV tables, episode logs, demo tracks,
//! learning curves, and small standalone SVG plots. All writers go through
//! an atomic write-then-rename so partial files never appear.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::evaluation::EpisodeRecord;
use crate::geom::Vec2;
use crate::maddpg::LearningCurve;
use crate::reward::RewardComponent;
use crate::train_env::DemoLog;
use crate::world::ConstraintReport;
use crate::zoning::ZoneSet;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },
}

fn io_err(context: String, source: std::io::Error) -> ArtifactError {
    ArtifactError::Io { context, source }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ArtifactError> {
    crate::neural::write_atomic(path, text.as_bytes())
        .map_err(|e| io_err(format!("write {}", path.display()), e))
}

/// Learning curve CSV: `episode,return,r1..r7,collisions,steps,completed`.
pub fn curve_to_csv(curve: &LearningCurve) -> String {
    let mut out = String::from("episode,return");
    for c in RewardComponent::ALL {
        let _ = write!(out, ",{}", c.label());
    }
    out.push_str(",collisions,steps,completed\n");
    for s in curve {
        let _ = write!(out, "{},{}", s.episode, s.ret);
        for v in s.components {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            s.collisions,
            s.steps,
            if s.completed { 1 } else { 0 }
        );
    }
    out
}

/// Zone table CSV: `center_x,center_y,member_count`.
pub fn zones_to_csv(zones: &ZoneSet) -> String {
    let mut out = String::from("center_x,center_y,member_count\n");
    for (center, members) in zones.centers.iter().zip(&zones.membership) {
        let _ = writeln!(out, "{},{},{}", center.x, center.y, members.len());
    }
    out
}

/// Episode records CSV: one row per evaluation episode.
pub fn records_to_csv(records: &[EpisodeRecord]) -> String {
    let mut out =
        String::from("episode,phi,alpha,beta,completed,targets_total,targets_reached\n");
    for (e, r) in records.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e,
            r.phi,
            r.alpha,
            r.beta,
            if r.completed { 1 } else { 0 },
            r.targets_total,
            r.targets_reached
        );
    }
    out
}

/// Episode trajectory log CSV: `step,entity_kind,entity_id,x,y,event`.
/// Static entities appear once at step 0 with a `spawn` event.
pub fn episode_log_to_csv(record: &EpisodeRecord) -> String {
    let mut out = String::from("step,entity_kind,entity_id,x,y,event\n");
    for (i, o) in record.geometry.obstacles.iter().enumerate() {
        let _ = writeln!(out, "0,obstacle,{i},{},{},spawn", o.x, o.y);
    }
    for (i, t) in record.geometry.ground_targets.iter().enumerate() {
        let _ = writeln!(out, "0,ground_target,{i},{},{},spawn", t.x, t.y);
    }
    for (i, t) in record.geometry.aerial_targets.iter().enumerate() {
        let _ = writeln!(out, "0,aerial_target,{i},{},{},spawn", t.x, t.y);
    }
    for path in &record.paths {
        for (step, p) in path.points.iter().enumerate() {
            let event = if step == 0 { "spawn" } else { "" };
            let _ = writeln!(
                out,
                "{step},{},{},{},{},{event}",
                path.kind.label(),
                path.id,
                p.x,
                p.y
            );
        }
    }
    out
}

/// Constraint report CSV: `constraint,satisfied,first_violation_step`.
pub fn constraints_to_csv(report: &ConstraintReport) -> String {
    let mut out = String::from("constraint,satisfied,first_violation_step\n");
    for entry in &report.entries {
        let _ = writeln!(
            out,
            "{},{},{}",
            entry.id.label(),
            if entry.satisfied { 1 } else { 0 },
            entry
                .first_violation_step
                .map(|s| s.to_string())
                .unwrap_or_default()
        );
    }
    out
}

/// Metric comparison table CSV: `method,config,metric,value`.
#[derive(Debug, Clone, Default)]
pub struct ComparisonTable {
    pub rows: Vec<(String, String, String, f64)>,
}

impl ComparisonTable {
    pub fn push(&mut self, method: &str, config: &str, metric: &str, value: f64) {
        self.rows
            .push((method.to_string(), config.to_string(), metric.to_string(), value));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,config,metric,value\n");
        for (m, c, k, v) in &self.rows {
            let _ = writeln!(out, "{m},{c},{k},{v}");
        }
        out
    }
}

/// Demo track CSV: `episode,step,ugv_id,x,y`.
pub fn demo_to_csv(demo: &DemoLog) -> String {
    let mut out = String::from("episode,step,ugv_id,x,y\n");
    for (e, tracks) in demo.episodes.iter().enumerate() {
        for (g, track) in tracks.iter().enumerate() {
            for (step, p) in track.iter().enumerate() {
                let _ = writeln!(out, "{e},{step},{g},{},{}", p.x, p.y);
            }
        }
    }
    out
}

pub fn demo_from_csv(text: &str, path: &str) -> Result<DemoLog, ArtifactError> {
    let mut episodes: Vec<Vec<Vec<Vec2>>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        if lineno == 0 || raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 5 {
            return Err(ArtifactError::Parse {
                path: path.to_string(),
                line: lineno + 1,
                detail: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64, ArtifactError> {
            s.trim().parse::<f64>().map_err(|e| ArtifactError::Parse {
                path: path.to_string(),
                line: lineno + 1,
                detail: format!("{what}: {e}"),
            })
        };
        let episode = parse(fields[0], "episode")? as usize;
        let step = parse(fields[1], "step")? as usize;
        let ugv = parse(fields[2], "ugv_id")? as usize;
        let x = parse(fields[3], "x")?;
        let y = parse(fields[4], "y")?;
        while episodes.len() <= episode {
            episodes.push(Vec::new());
        }
        let tracks = &mut episodes[episode];
        while tracks.len() <= ugv {
            tracks.push(Vec::new());
        }
        let track = &mut tracks[ugv];
        if track.len() != step {
            return Err(ArtifactError::Parse {
                path: path.to_string(),
                line: lineno + 1,
                detail: format!("out-of-order step {step} for ugv {ugv} (expected {})", track.len()),
            });
        }
        track.push(Vec2::new(x, y));
    }
    Ok(DemoLog { episodes })
}

/// Points file: one `x,y` pair per line, `#` comments allowed.
pub fn points_from_csv(text: &str, path: &str) -> Result<Vec<Vec2>, ArtifactError> {
    let mut points = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || (lineno == 0 && line == "x,y") {
            continue;
        }
        let (x, y) = line.split_once(',').ok_or_else(|| ArtifactError::Parse {
            path: path.to_string(),
            line: lineno + 1,
            detail: "expected `x,y`".to_string(),
        })?;
        let parse = |s: &str| -> Result<f64, ArtifactError> {
            s.trim().parse::<f64>().map_err(|e| ArtifactError::Parse {
                path: path.to_string(),
                line: lineno + 1,
                detail: e.to_string(),
            })
        };
        points.push(Vec2::new(parse(x)?, parse(y)?));
    }
    Ok(points)
}

// ---------------------------------------------------------------------------
// Minimal standalone SVG plots.
// ---------------------------------------------------------------------------

const SVG_SIZE: f64 = 640.0;
const SVG_MARGIN: f64 = 40.0;

struct Frame {
    min: Vec2,
    max: Vec2,
}

impl Frame {
    fn around(points: impl Iterator<Item = Vec2>, pad: f64) -> Frame {
        let (mut min, mut max) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
        let mut any = false;
        for p in points {
            any = true;
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        if !any {
            return Frame {
                min: Vec2::new(-1.0, -1.0),
                max: Vec2::new(1.0, 1.0),
            };
        }
        Frame {
            min: Vec2::new(min.x - pad, min.y - pad),
            max: Vec2::new(max.x + pad, max.y + pad),
        }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        let w = (self.max.x - self.min.x).max(1e-9);
        let h = (self.max.y - self.min.y).max(1e-9);
        let scale = (SVG_SIZE - 2.0 * SVG_MARGIN) / w.max(h);
        let x = SVG_MARGIN + (p.x - self.min.x) * scale;
        // SVG y grows downward.
        let y = SVG_SIZE - SVG_MARGIN - (p.y - self.min.y) * scale;
        (x, y)
    }
}

fn svg_header(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_SIZE}\" height=\"{SVG_SIZE}\" viewBox=\"0 0 {SVG_SIZE} {SVG_SIZE}\">"
    );
    let _ = writeln!(
        out,
        "<rect width=\"{SVG_SIZE}\" height=\"{SVG_SIZE}\" fill=\"white\"/>"
    );
}

/// Scatter of targets with the zone circles overlaid.
pub fn zones_to_svg(points: &[Vec2], zones: &ZoneSet, radius: f64) -> String {
    let mut out = String::new();
    let frame = Frame::around(
        points.iter().copied().chain(zones.centers.iter().copied()),
        radius * 1.2,
    );
    svg_header(&mut out);
    let scale = {
        let w = (frame.max.x - frame.min.x).max(1e-9);
        let h = (frame.max.y - frame.min.y).max(1e-9);
        (SVG_SIZE - 2.0 * SVG_MARGIN) / w.max(h)
    };
    for center in &zones.centers {
        let (cx, cy) = frame.map(*center);
        let _ = writeln!(
            out,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>",
            radius * scale
        );
        let _ = writeln!(
            out,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"steelblue\"/>"
        );
    }
    for p in points {
        let (x, y) = frame.map(*p);
        let _ = writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"crimson\"/>");
    }
    out.push_str("</svg>\n");
    out
}

/// Vehicle traces of one episode record, with targets and obstacles.
pub fn paths_to_svg(record: &EpisodeRecord) -> String {
    let mut out = String::new();
    let geo = &record.geometry;
    let everything = record
        .paths
        .iter()
        .flat_map(|p| p.points.iter().copied())
        .chain(geo.ground_targets.iter().copied())
        .chain(geo.aerial_targets.iter().copied())
        .chain(geo.obstacles.iter().copied());
    let frame = Frame::around(everything, 0.1);
    svg_header(&mut out);
    for o in &geo.obstacles {
        let (x, y) = frame.map(*o);
        let _ = writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"6\" fill=\"dimgray\"/>");
    }
    for t in &geo.ground_targets {
        let (x, y) = frame.map(*t);
        let _ = writeln!(out, "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"8\" height=\"8\" fill=\"seagreen\"/>", x - 4.0, y - 4.0);
    }
    for t in &geo.aerial_targets {
        let (x, y) = frame.map(*t);
        let _ = writeln!(out, "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"8\" height=\"8\" fill=\"goldenrod\"/>", x - 4.0, y - 4.0);
    }
    for path in &record.paths {
        if path.points.is_empty() {
            continue;
        }
        let color = match path.kind {
            crate::world::AgentKind::Ugv => "seagreen",
            crate::world::AgentKind::Uav => "royalblue",
        };
        let mut d = String::new();
        for (i, p) in path.points.iter().enumerate() {
            let (x, y) = frame.map(*p);
            let _ = write!(d, "{}{x:.2} {y:.2} ", if i == 0 { "M" } else { "L" });
        }
        let _ = writeln!(
            out,
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" opacity=\"0.8\"/>",
            d.trim_end()
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Simple line chart of per-episode returns.
pub fn curve_to_svg(curve: &LearningCurve) -> String {
    let mut out = String::new();
    svg_header(&mut out);
    if curve.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for s in curve {
        lo = lo.min(s.ret);
        hi = hi.max(s.ret);
    }
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let n = curve.len() as f64;
    let map = |i: usize, v: f64| {
        let x = SVG_MARGIN + (i as f64 / (n - 1.0).max(1.0)) * (SVG_SIZE - 2.0 * SVG_MARGIN);
        let y = SVG_SIZE - SVG_MARGIN - ((v - lo) / (hi - lo)) * (SVG_SIZE - 2.0 * SVG_MARGIN);
        (x, y)
    };
    let mut d = String::new();
    for (i, s) in curve.iter().enumerate() {
        let (x, y) = map(i, s.ret);
        let _ = write!(d, "{}{x:.2} {y:.2} ", if i == 0 { "M" } else { "L" });
    }
    let _ = writeln!(
        out,
        "<path d=\"{}\" fill=\"none\" stroke=\"royalblue\" stroke-width=\"1\"/>",
        d.trim_end()
    );
    let _ = writeln!(
        out,
        "<text x=\"{SVG_MARGIN}\" y=\"20\" font-size=\"12\">return per episode (min {lo:.1}, max {hi:.1})</text>"
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::EpisodeGeometry;
    use crate::maddpg::EpisodeStats;

    #[test]
    fn curve_csv_has_header_and_rows() {
        let curve = vec![EpisodeStats {
            episode: 0,
            ret: -12.5,
            components: [-1.0, 0.0, -0.25, 0.0, 0.0, 0.0, 0.0],
            collisions: 2,
            steps: 70,
            completed: false,
        }];
        let csv = curve_to_csv(&curve);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "episode,return,r1,r2,r3,r4,r5,r6,r7,collisions,steps,completed"
        );
        assert_eq!(lines.next().unwrap(), "0,-12.5,-1,0,-0.25,0,0,0,0,2,70,0");
    }

    #[test]
    fn demo_round_trips_through_csv() {
        let demo = DemoLog {
            episodes: vec![
                vec![vec![Vec2::new(0.0, 0.0), Vec2::new(0.1, 0.2)]],
                vec![vec![Vec2::new(-0.5, 0.25), Vec2::new(-0.4, 0.2), Vec2::new(-0.3, 0.1)]],
            ],
        };
        let csv = demo_to_csv(&demo);
        let back = demo_from_csv(&csv, "demo.csv").unwrap();
        assert_eq!(demo, back);
    }

    #[test]
    fn points_parser_reports_line_numbers() {
        let ok = points_from_csv("0.1,0.2\n-0.3, 0.4\n", "p.csv").unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok[1], Vec2::new(-0.3, 0.4));
        let err = points_from_csv("0.1,0.2\na,b\n", "p.csv").unwrap_err();
        match err {
            ArtifactError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        // Empty file parses to no points.
        assert!(points_from_csv("", "p.csv").unwrap().is_empty());
    }

    #[test]
    fn zone_svg_contains_circles() {
        let points = vec![Vec2::new(0.0, 0.0), Vec2::new(0.4, 0.1)];
        let zones = crate::zoning::assign_zones(&points, &crate::zoning::MeanShiftConfig::with_radius(0.5));
        let svg = zones_to_svg(&points, &zones, 0.5);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("circle"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn episode_log_lists_entities_and_steps() {
        let record = EpisodeRecord {
            phi: 1,
            alpha: 0,
            beta: 0,
            completed: true,
            targets_total: 1,
            targets_reached: 1,
            paths: vec![crate::evaluation::VehiclePath {
                kind: crate::world::AgentKind::Ugv,
                id: 0,
                points: vec![Vec2::ZERO, Vec2::new(0.05, 0.0)],
            }],
            geometry: EpisodeGeometry {
                ground_targets: vec![Vec2::new(0.05, 0.0)],
                aerial_targets: vec![],
                obstacles: vec![Vec2::new(0.9, 0.9)],
                reach_threshold: 0.15,
                danger: crate::world::DangerZoneParams::default(),
            },
        };
        let csv = episode_log_to_csv(&record);
        assert!(csv.contains("0,obstacle,0,0.9,0.9,spawn"));
        assert!(csv.contains("0,ground_target,0,0.05,0,spawn"));
        assert!(csv.contains("1,ugv,0,0.05,0,"));
    }
}
