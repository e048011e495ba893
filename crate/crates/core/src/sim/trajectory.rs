use alloc::vec::Vec;
use core::f64::consts::TAU;

use super::geometry::Point;
use crate::error::{Error, Result};
use crate::math;

/// Time-indexed 2-D pose.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// Archimedean spiral around `center`, counterclockwise for positive
    /// `turns`. The radius goes linearly from `start_radius` at step 0 to
    /// `end_radius` at step `duration`; later steps hold the final pose.
    Spiral {
        center: Point,
        start_radius: f64,
        end_radius: f64,
        start_angle: f64,
        turns: f64,
        duration: usize,
    },
    /// Pose at step `k` is `points[min(k, len - 1)]`.
    Waypoints(Vec<Point>),
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        match self {
            Trajectory::Spiral { start_radius, end_radius, duration, turns, .. } => {
                if !(*start_radius >= 0.0 && *end_radius >= 0.0 && turns.is_finite()) || *duration == 0 {
                    return Err(Error::InvalidParameter("spiral needs non-negative radii and a positive duration".into()));
                }
            }
            Trajectory::Waypoints(points) => {
                if points.is_empty() || points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("waypoint trajectory must be non-empty and finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn pose(&self, step: usize) -> Point {
        match self {
            Trajectory::Spiral { center, start_radius, end_radius, start_angle, turns, duration } => {
                let t = (step.min(*duration)) as f64 / *duration as f64;
                let r = start_radius + (end_radius - start_radius) * t;
                let a = start_angle + TAU * turns * t;
                [center[0] + r * math::cos(a), center[1] + r * math::sin(a)]
            }
            Trajectory::Waypoints(points) => points[step.min(points.len() - 1)],
        }
    }
}
