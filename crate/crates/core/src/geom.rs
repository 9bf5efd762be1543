//! Plane geometry primitives shared by every module.

use serde::{Deserialize, Serialize};

/// A point or displacement in the 2D arena, in arena units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2 ::new(self.x * s, self.y * s)
    }

    /// Rescale to magnitude `max` when longer; zero vectors stay zero.
    pub fn clamp_norm(self, max: f64) -> Vec2 {
        let n = self.norm();
        if n > max && n > 0.0 {
            self.scale(max / n)
        } else {
            self
        }
    }

    /// Clip both components to the square [-half_extent, half_extent].
    pub fn clamp_square(self, half_extent: f64) -> Vec2 {
        Vec2::new(
            self.x.clamp(-half_extent, half_extent),
            self.y.clamp(-half_extent, half_extent),
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

/// Mean of a non-empty point set; `None` when empty.
pub fn centroid(points: &[Vec2]) -> Option<Vec2> {
    if points.is_empty() {
        return None;
    }
    let mut sum = Vec2::ZERO;
    for p in points {
        sum += *p;
    }
    Some(sum.scale(1.0 / points.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_norm_scales_long_vectors() {
        let v = Vec2::new(10.0, 0.0).clamp_norm(1.0);
        assert!((v.x - 1.0).abs() < 1e-12);
        assert_eq!(v.y, 0.0);
        // Short vectors untouched.
        let w = Vec2::new(0.3, 0.4).clamp_norm(1.0);
        assert_eq!(w, Vec2::new(0.3, 0.4));
    }

    #[test]
    fn centroid_of_two_points() {
        let c = centroid(&[Vec2::new(0.0, 0.0), Vec2::new(0.1, 0.0)]).unwrap();
        assert!((c.x - 0.05).abs() < 1e-15);
        assert_eq!(c.y, 0.0);
        assert!(centroid(&[]).is_none());
    }
}
