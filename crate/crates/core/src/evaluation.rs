//! Episode records and the comparison metrics computed over batches of them.

use thiserror::Error;

use crate::geom::Vec2;
use crate::world::{AgentKind, DangerZoneParams};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric requires at least one episode record")]
    EmptyInput,
}

/// Position sequence of one vehicle over an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct VehiclePath {
    pub kind: AgentKind,
    pub id: usize,
    pub points: Vec<Vec2>,
}

/// Static geometry the episode was played against; carried along so episode
/// logs can be constraint-checked without the originating world.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeGeometry {
    pub ground_targets: Vec<Vec2>,
    pub aerial_targets: Vec<Vec2>,
    pub obstacles: Vec<Vec2>,
    pub reach_threshold: f64,
    pub danger: DangerZoneParams,
}

impl EpisodeGeometry {
    pub fn empty() -> Self {
        EpisodeGeometry {
            ground_targets: Vec::new(),
            aerial_targets: Vec::new(),
            obstacles: Vec::new(),
            reach_threshold: 0.15,
            danger: DangerZoneParams::default(),
        }
    }
}

/// Per-episode outcome log: step count, collision counts, completion flag,
/// target tallies, and the vehicle paths.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// Steps taken by the episode.
    pub phi: usize,
    /// Agent-agent real collision count.
    pub alpha: usize,
    /// Agent-obstacle real collision count.
    pub beta: usize,
    /// Task completed: every target reached and every UAV landed.
    pub completed: bool,
    pub targets_total: usize,
    pub targets_reached: usize,
    pub paths: Vec<VehiclePath>,
    pub geometry: EpisodeGeometry,
}

impl EpisodeRecord {
    /// Record-level sanity: reached count bounded by total, and a completed
    /// episode implies every target was reached.
    pub fn validate(&self) -> Result<(), String> {
        if self.targets_reached > self.targets_total {
            return Err(format!(
                "targets_reached {} exceeds targets_total {}",
                self.targets_reached, self.targets_total
            ));
        }
        if self.completed && self.targets_reached != self.targets_total {
            return Err("completed episode must have all targets reached".into());
        }
        Ok(())
    }
}

/// Fraction of episodes that completed their task.
pub fn completion_rate(records: &[EpisodeRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let completed = records.iter().filter(|r| r.completed).count();
    Ok(completed as f64 / records.len() as f64)
}

/// Total collision count scaled to a 1000-episode basis.
pub fn collisions_per_1k(records: &[EpisodeRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let total: usize = records.iter().map(|r| r.alpha + r.beta).sum();
    Ok(1000.0 * total as f64 / records.len() as f64)
}

/// Mean step count over all episodes, including incomplete ones.
pub fn mean_steps(records: &[EpisodeRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let total: usize = records.iter().map(|r| r.phi).sum();
    Ok(total as f64 / records.len() as f64)
}

/// Mean step count over completed episodes only; `None` when nothing completed.
pub fn mean_steps_completed(records: &[EpisodeRecord]) -> Result<Option<f64>, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let completed: Vec<&EpisodeRecord> = records.iter().filter(|r| r.completed).collect();
    if completed.is_empty() {
        return Ok(None);
    }
    let total: usize = completed.iter().map(|r| r.phi).sum();
    Ok(Some(total as f64 / completed.len() as f64))
}

/// Percentage of targets reached, pooled over all episodes.
pub fn accuracy(records: &[EpisodeRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let reached: usize = records.iter().map(|r| r.targets_reached).sum();
    let total: usize = records.iter().map(|r| r.targets_total).sum();
    if total == 0 {
        return Ok(100.0);
    }
    Ok(100.0 * reached as f64 / total as f64)
}

/// Mean number of steps per evaluation episode (same average as
/// [`mean_steps`]; kept as its own entry point because reports list both).
pub fn completion_time(records: &[EpisodeRecord]) -> Result<f64, MetricError> {
    mean_steps(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(phi: usize, alpha: usize, beta: usize, completed: bool, reached: usize, total: usize) -> EpisodeRecord {
        EpisodeRecord {
            phi,
            alpha,
            beta,
            completed,
            targets_total: total,
            targets_reached: reached,
            paths: Vec::new(),
            geometry: EpisodeGeometry::empty(),
        }
    }

    #[test]
    fn completion_rate_basics() {
        let all = vec![record(1, 0, 0, true, 1, 1); 4];
        assert_eq!(completion_rate(&all).unwrap(), 1.0);
        let none = vec![record(1, 0, 0, false, 0, 1); 4];
        assert_eq!(completion_rate(&none).unwrap(), 0.0);
        let mut three_of_four = vec![record(1, 0, 0, true, 1, 1); 3];
        three_of_four.push(record(1, 0, 0, false, 0, 1));
        assert_eq!(completion_rate(&three_of_four).unwrap(), 0.75);
        assert!(completion_rate(&[]).is_err());
    }

    #[test]
    fn collisions_scale_to_1k_basis() {
        let zeros = vec![record(1, 0, 0, true, 1, 1); 10];
        assert_eq!(collisions_per_1k(&zeros).unwrap(), 0.0);

        // E = 1000, total 17 collisions -> 17.
        let mut records = vec![record(1, 0, 0, true, 1, 1); 1000];
        records[0].alpha = 9;
        records[1].beta = 8;
        assert_eq!(collisions_per_1k(&records).unwrap(), 17.0);

        // E = 500, total 10 -> 20.
        let mut records = vec![record(1, 0, 0, true, 1, 1); 500];
        records[0].alpha = 10;
        assert_eq!(collisions_per_1k(&records).unwrap(), 20.0);
    }

    #[test]
    fn step_means_and_accuracy() {
        let records = vec![record(70, 0, 0, false, 9, 10), record(30, 0, 0, true, 10, 10)];
        assert_eq!(mean_steps(&records).unwrap(), 50.0);
        assert_eq!(completion_time(&records).unwrap(), 50.0);
        assert_eq!(mean_steps_completed(&records).unwrap(), Some(30.0));
        // Pooled over targets: (9 + 10) / 20 = 95%.
        assert_eq!(accuracy(&records).unwrap(), 95.0);
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let a = record(70, 1, 2, false, 3, 4);
        let b = record(10, 0, 0, true, 4, 4);
        let c = record(40, 5, 0, true, 2, 2);
        let fwd = vec![a.clone(), b.clone(), c.clone()];
        let rev = vec![c, b, a];
        assert_eq!(completion_rate(&fwd).unwrap(), completion_rate(&rev).unwrap());
        assert_eq!(collisions_per_1k(&fwd).unwrap(), collisions_per_1k(&rev).unwrap());
        assert_eq!(mean_steps(&fwd).unwrap(), mean_steps(&rev).unwrap());
        assert_eq!(accuracy(&fwd).unwrap(), accuracy(&rev).unwrap());
    }

    #[test]
    fn completed_record_validates_full_accuracy() {
        let good = record(5, 0, 0, true, 3, 3);
        assert!(good.validate().is_ok());
        let bad = record(5, 0, 0, true, 2, 3);
        assert!(bad.validate().is_err());
        let overcount = record(5, 0, 0, false, 4, 3);
        assert!(overcount.validate().is_err());
    }
}
