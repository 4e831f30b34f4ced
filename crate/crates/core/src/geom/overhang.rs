//! Wall-angle checks between consecutive layers.

use super::layer::Layer;
use super::point::{Point2, Point3};
use super::polygon;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_ANGLE_DEG: f64 = 30.0;

/// A contiguous stretch of a layer boundary leaning past the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverhangFlag {
    pub layer_index: usize,
    pub arc: Vec<Point3>,
    /// Steepest lean along the arc, degrees from vertical.
    pub angle_deg: f64,
}

fn nearest_boundary_distance(layer: &Layer, p: Point2) -> f64 {
    layer
        .contours
        .iter()
        .map(|c| polygon::boundary_distance(&c.vertices, p))
        .fold(f64::INFINITY, f64::min)
}

/// Flags boundary points of each layer whose horizontal distance to the
/// layer below, over the layer spacing, exceeds `max_angle_deg`.
pub fn overhang_flags(layers: &[Layer], max_angle_deg: f64) -> Vec<OverhangFlag> {
    let mut flags = Vec::new();
    for pair in layers.windows(2) {
        let (below, above) = (&pair[0], &pair[1]);
        let dz = above.z - below.z;
        if below.contours.is_empty() || dz <= 0.0 {
            continue;
        }
        for c in &above.contours {
            let angles: Vec<f64> = c
                .vertices
                .iter()
                .map(|&v| (nearest_boundary_distance(below, v) / dz).atan().to_degrees())
                .collect();
            let n = angles.len();
            let hot: Vec<bool> = angles.iter().map(|&a| a > max_angle_deg).collect();
            if !hot.iter().any(|&h| h) {
                continue;
            }
            let lift = |i: usize| c.vertices[i].at_z(c.z);
            if hot.iter().all(|&h| h) {
                let mut arc: Vec<Point3> = (0..n).map(lift).collect();
                arc.push(lift(0));
                let angle_deg = angles.iter().copied().fold(f64::MIN, f64::max);
                flags.push(OverhangFlag {
                    layer_index: above.index,
                    arc,
                    angle_deg,
                });
                continue;
            }
            // Start scanning just after a cold vertex so arcs never wrap mid-way.
            let cold = hot.iter().position(|&h| !h).unwrap_or(0);
            let mut current: Option<(Vec<Point3>, f64)> = None;
            for step in 1..=n {
                let i = (cold + step) % n;
                if hot[i] {
                    let entry = current.get_or_insert_with(|| (Vec::new(), f64::MIN));
                    entry.0.push(lift(i));
                    entry.1 = entry.1.max(angles[i]);
                } else if let Some((arc, angle_deg)) = current.take() {
                    flags.push(OverhangFlag {
                        layer_index: above.index,
                        arc,
                        angle_deg,
                    });
                }
            }
            if let Some((arc, angle_deg)) = current {
                flags.push(OverhangFlag {
                    layer_index: above.index,
                    arc,
                    angle_deg,
                });
            }
        }
    }
    flags
}
