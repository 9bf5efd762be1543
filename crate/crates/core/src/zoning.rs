//! Densest-first target zoning.
//!
//! [`mean_shift`] is the blurring variant of mean-shift: every point is
//! repeatedly replaced by the mean of the current points inside its sliding
//! window until the average displacement falls below tolerance.
//! [`assign_zones`] wraps it in an outer loop that keeps the discovered
//! centers and deletes every point already covered, so dense regions claim
//! their zones first.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{centroid, Vec2};

#[derive(Debug, Error)]
pub enum ZoningError {
    #[error("mean shift requires a non-empty point set")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig {
    /// Sliding-window radius; doubles as the zone radius.
    pub radius: f64,
    /// Stop once the mean per-point displacement falls to this value.
    pub shift_tolerance: f64,
    pub max_iterations: usize,
    /// Converged positions closer than this collapse into one center.
    pub merge_tolerance: f64,
}

impl MeanShiftConfig {
    pub fn with_radius(radius: f64) -> Self {
        MeanShiftConfig {
            radius,
            shift_tolerance: 1e-6,
            max_iterations: 100,
            merge_tolerance: 1e-4 * radius,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.radius > 0.0) {
            return Err("radius must be > 0".into());
        }
        if self.shift_tolerance < 0.0 || self.merge_tolerance < 0.0 {
            return Err("tolerances must be >= 0".into());
        }
        if self.max_iterations < 1 {
            return Err("max_iterations must be >= 1".into());
        }
        Ok(())
    }
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        MeanShiftConfig::with_radius(0.5)
    }
}

/// Zone centers with per-center target membership, in discovery order
/// (densest areas first).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZoneSet {
    pub centers: Vec<Vec2>,
    /// For each center, the indices of the input targets it claimed.
    pub membership: Vec<Vec<usize>>,
}

impl ZoneSet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Run blurring mean-shift and return the deduplicated converged centers.
///
/// Window membership uses `distance <= radius`, so points exactly on the rim
/// are inside.
pub fn mean_shift(points: &[Vec2], cfg: &MeanShiftConfig) -> Result<Vec<Vec2>, ZoningError> {
    if points.is_empty() {
        return Err(ZoningError::EmptyInput);
    }
    debug_assert!(cfg.validate().is_ok());
    let mut current: Vec<Vec2> = points.to_vec();
    for _ in 0..cfg.max_iterations {
        let mut shifted = Vec::with_capacity(current.len());
        for p in &current {
            let window: Vec<Vec2> = current
                .iter()
                .copied()
                .filter(|q| p.dist(*q) <= cfg.radius)
                .collect();
            // The window always holds at least `p` itself.
            shifted.push(centroid(&window).expect("non-empty window"));
        }
        let mean_shift_len: f64 = current
            .iter()
            .zip(&shifted)
            .map(|(a, b)| a.dist(*b))
            .sum::<f64>()
            / current.len() as f64;
        current = shifted;
        if mean_shift_len <= cfg.shift_tolerance {
            break;
        }
    }
    Ok(dedup_centers(&current, cfg.merge_tolerance))
}

/// Collapse positions within `tol` of an earlier one, keeping first-seen order.
fn dedup_centers(points: &[Vec2], tol: f64) -> Vec<Vec2> {
    let mut unique: Vec<Vec2> = Vec::new();
    for p in points {
        if unique.iter().all(|c| c.dist(*p) > tol) {
            unique.push(*p);
        }
    }
    unique
}

/// Assign every target to a circular zone, densest areas first.
///
/// Repeatedly runs [`mean_shift`] on the still-unassigned targets, appends
/// the resulting centers, and deletes every target within `radius` of any
/// accumulated center. Membership goes to the first claiming center in
/// discovery order.
pub fn assign_zones(targets: &[Vec2], cfg: &MeanShiftConfig) -> ZoneSet {
    let mut remaining: Vec<usize> = (0..targets.len()).collect();
    let mut centers: Vec<Vec2> = Vec::new();

    while !remaining.is_empty() {
        let pts: Vec<Vec2> = remaining.iter().map(|&i| targets[i]).collect();
        let new_centers = mean_shift(&pts, cfg).expect("remaining set is non-empty");
        let before = remaining.len();
        centers.extend(new_centers);
        remaining.retain(|&i| centers.iter().all(|c| c.dist(targets[i]) > cfg.radius));
        if remaining.len() == before {
            // The converged modes drifted out of range of every leftover
            // point (only possible on adversarial chains); claim the densest
            // leftover neighborhood directly so the loop always progresses.
            let densest = remaining
                .iter()
                .copied()
                .max_by_key(|&i| {
                    remaining
                        .iter()
                        .filter(|&&j| targets[i].dist(targets[j]) <= cfg.radius)
                        .count()
                })
                .expect("remaining is non-empty");
            centers.push(targets[densest]);
            remaining.retain(|&i| centers.iter().all(|c| c.dist(targets[i]) > cfg.radius));
        }
    }

    let mut membership = vec![Vec::new(); centers.len()];
    for (i, t) in targets.iter().enumerate() {
        let owner = centers
            .iter()
            .position(|c| c.dist(*t) <= cfg.radius)
            .expect("zone coverage: every target lies within radius of a center");
        membership[owner].push(i);
    }

    ZoneSet { centers, membership }
}

/// Greedy disk-cover count over the targets; a report-only comparison
/// statistic for the zone counts produced by [`assign_zones`].
pub fn zone_count_lower_bound(targets: &[Vec2], radius: f64) -> usize {
    debug_assert!(radius > 0.0);
    let mut remaining: Vec<usize> = (0..targets.len()).collect();
    let mut count = 0;
    while !remaining.is_empty() {
        let best = remaining
            .iter()
            .copied()
            .max_by_key(|&i| {
                remaining
                    .iter()
                    .filter(|&&j| targets[i].dist(targets[j]) <= radius)
                    .count()
            })
            .expect("non-empty");
        remaining.retain(|&j| targets[best].dist(targets[j]) > radius);
        count += 1;
    }
    count
}
