//! Vase-mode spiralization of single-contour layers.

use super::error::{GeomError, Result};
use super::layer::{Contour, Layer};
use super::point::{Point2, Point3};
use super::toolpath::{Segment, SegmentKind, Toolpath};

/// Index of the vertex nearest `to`; ties go to the lowest index.
pub fn nearest_vertex(ring: &[Point2], to: Point2) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, v) in ring.iter().enumerate() {
        let d = v.dist(to);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Closed traversal of `ring` from `start`, rising linearly with arc length
/// from `z0` to `z1`. The start vertex is repeated at the end.
pub fn ramped_loop(ring: &[Point2], start: usize, z0: f64, z1: f64) -> Vec<Point3> {
    let n = ring.len();
    let xy: Vec<Point2> = (0..=n).map(|i| ring[(start + i) % n]).collect();
    let total: f64 = xy.windows(2).map(|w| w[0].dist(w[1])).sum();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(n + 1);
    for (i, &p) in xy.iter().enumerate() {
        if i > 0 {
            acc += xy[i - 1].dist(p);
        }
        let t = if i == n { 1.0 } else if total > 0.0 { acc / total } else { 0.0 };
        out.push(p.at_z(z0 + (z1 - z0) * t));
    }
    out
}

/// Joins one loop per layer into a single climbing extrusion. Each loop
/// rises to the next layer's height; the last loop stays flat.
pub fn spiralize(layers: &[Layer], layer_height: f64) -> Result<Toolpath> {
    if layers.is_empty() {
        return Err(GeomError::InvalidParameter("no layers to spiralize".into()));
    }
    let contours: Vec<&Contour> = layers
        .iter()
        .map(|l| match l.contours.as_slice() {
            [c] if c.is_outer() => Ok(c),
            _ => Err(GeomError::NotSpiralizable { layer: l.index }),
        })
        .collect::<Result<_>>()?;
    let mut points: Vec<Point3> = Vec::new();
    for (k, c) in contours.iter().enumerate() {
        let start = match points.last() {
            Some(p) => nearest_vertex(&c.vertices, p.xy()),
            None => 0,
        };
        let z1 = contours.get(k + 1).map_or(c.z, |n| n.z);
        let lp = ramped_loop(&c.vertices, start, c.z, z1);
        let skip = usize::from(points.last() == lp.first());
        points.extend_from_slice(&lp[skip..]);
    }
    Ok(Toolpath {
        layer_height,
        segments: vec![Segment {
            kind: SegmentKind::Extrude,
            layer: layers[0].index,
            points,
        }],
    })
}
