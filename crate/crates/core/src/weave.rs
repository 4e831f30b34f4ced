//! Braided toolpaths built straight from a ring of control points: each
//! pass connects point `i` to point `i + stride`, so a layer is one or more
//! star polygons and no mesh is sliced.

use crate::geom::polygon::{centroid, perimeter};
use crate::geom::{
    nearest_vertex, ramped_loop, GeomError, Point2, Point3, Result, Segment, SegmentKind, Toolpath,
    ToolpathBuilder,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseCurve {
    Circle { center: Point2, radius: f64 },
    /// Closed ring; the closing edge is implicit.
    Polyline { points: Vec<Point2> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeaveSpec {
    pub ring_points: usize,
    pub stride: usize,
    pub layers: usize,
    pub layer_height: f64,
    pub base_curve: BaseCurve,
    /// Per-layer ring rotation used by [`weave_path`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist_deg: Option<f64>,
}

impl WeaveSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: WeaveSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GeomError::InvalidParameter(m));
        if self.ring_points < 3 {
            return bad(format!("ring_points must be at least 3, got {}", self.ring_points));
        }
        if self.stride < 1 || self.stride >= self.ring_points {
            return bad(format!("stride must lie in 1..{}, got {}", self.ring_points, self.stride));
        }
        if self.layers < 1 {
            return bad("layers must be at least 1".into());
        }
        if !(self.layer_height > 0.0 && self.layer_height.is_finite()) {
            return bad(format!("layer_height must be positive, got {}", self.layer_height));
        }
        if let Some(t) = self.twist_deg {
            if !t.is_finite() {
                return bad("twist_deg must be finite".into());
            }
        }
        match &self.base_curve {
            BaseCurve::Circle { radius, .. } if !(*radius > 0.0 && radius.is_finite()) => {
                bad(format!("circle radius must be positive, got {radius}"))
            }
            BaseCurve::Polyline { points } if points.len() < 3 || perimeter(points) <= 0.0 => {
                bad("base polyline needs at least 3 distinct points".into())
            }
            _ => Ok(()),
        }
    }

    /// Number of disjoint loops per layer.
    pub fn loop_count(&self) -> usize {
        gcd(self.ring_points, self.stride)
    }

    pub fn layer_z(&self, layer: usize) -> f64 {
        self.layer_height * layer as f64
    }

    fn pivot(&self) -> Point2 {
        match &self.base_curve {
            BaseCurve::Circle { center, .. } => *center,
            BaseCurve::Polyline { points } => centroid(points),
        }
    }

    /// Control points of the unrotated ring in index order.
    pub fn base_points(&self) -> Vec<Point2> {
        let n = self.ring_points;
        match &self.base_curve {
            BaseCurve::Circle { center, radius } => (0..n)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / n as f64;
                    Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
                })
                .collect(),
            BaseCurve::Polyline { points } => sample_closed(points, n),
        }
    }

    /// Control points of `layer` after rotating by `rotation_deg * layer`
    /// about the base curve's centroid.
    pub fn ring(&self, layer: usize, rotation_deg: f64) -> Vec<Point2> {
        let pts = self.base_points();
        let theta = (rotation_deg * layer as f64).to_radians();
        if theta == 0.0 {
            return pts;
        }
        let c = self.pivot();
        let (s, co) = theta.sin_cos();
        pts.into_iter()
            .map(|p| {
                let d = p - c;
                Point2::new(c.x + d.x * co - d.y * s, c.y + d.x * s + d.y * co)
            })
            .collect()
    }
}

pub fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `n` points spaced evenly by arc length around a closed ring, starting at
/// its first vertex.
fn sample_closed(ring: &[Point2], n: usize) -> Vec<Point2> {
    let total = perimeter(ring);
    let m = ring.len();
    let mut out = Vec::with_capacity(n);
    let mut edge = 0;
    let mut edge_start = 0.0;
    for i in 0..n {
        let target = total * i as f64 / n as f64;
        loop {
            let len = ring[edge].dist(ring[(edge + 1) % m]);
            if target <= edge_start + len || edge == m - 1 {
                let t = if len > 0.0 { ((target - edge_start) / len).clamp(0.0, 1.0) } else { 0.0 };
                out.push(ring[edge].lerp(ring[(edge + 1) % m], t));
                break;
            }
            edge_start += len;
            edge += 1;
        }
    }
    out
}

/// Star loops of one layer: loop `c` visits `c, c+k, c+2k, …` (mod n).
pub fn star_loops(ring: &[Point2], stride: usize) -> Vec<Vec<Point2>> {
    let n = ring.len();
    let g = gcd(n, stride);
    (0..g)
        .map(|c| (0..n / g).map(|j| ring[(c + j * stride) % n]).collect())
        .collect()
}

pub fn weave_path(spec: &WeaveSpec) -> Result<Toolpath> {
    twist(spec, spec.twist_deg.unwrap_or(0.0))
}

/// Weave with the ring turned by `per_layer_rotation_deg` each layer.
///
/// A single-loop pattern becomes one climbing extrusion: each layer's loop
/// ramps to the next layer's height and the top loop is flat. Multi-loop
/// patterns print flat loops joined by travels.
pub fn twist(spec: &WeaveSpec, per_layer_rotation_deg: f64) -> Result<Toolpath> {
    spec.validate()?;
    if !per_layer_rotation_deg.is_finite() {
        return Err(GeomError::InvalidParameter("rotation must be finite".into()));
    }
    let layers: Vec<Vec<Vec<Point2>>> = (0..spec.layers)
        .map(|j| star_loops(&spec.ring(j, per_layer_rotation_deg), spec.stride))
        .collect();
    let tp = if spec.loop_count() == 1 {
        let mut points: Vec<Point3> = Vec::new();
        for (j, loops) in layers.iter().enumerate() {
            let ring = &loops[0];
            let start = points.last().map_or(0, |p| nearest_vertex(ring, p.xy()));
            let z1 = if j + 1 < spec.layers { spec.layer_z(j + 1) } else { spec.layer_z(j) };
            let lp = ramped_loop(ring, start, spec.layer_z(j), z1);
            let skip = usize::from(points.last() == lp.first());
            points.extend_from_slice(&lp[skip..]);
        }
        Toolpath {
            layer_height: spec.layer_height,
            segments: vec![Segment {
                kind: SegmentKind::Extrude,
                layer: 0,
                points,
            }],
        }
    } else {
        let mut b = ToolpathBuilder::new(spec.layer_height);
        for (j, loops) in layers.iter().enumerate() {
            let z = spec.layer_z(j);
            for ring in loops {
                let start = b.last_point().map_or(0, |p| nearest_vertex(ring, p.xy()));
                let n = ring.len();
                let lp: Vec<Point3> = (0..=n).map(|i| ring[(start + i) % n].at_z(z)).collect();
                b.extrude(&lp, j);
            }
        }
        b.finish()
    };
    tp.validate()?;
    Ok(tp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_spec(n: usize, k: usize, layers: usize) -> WeaveSpec {
        WeaveSpec {
            ring_points: n,
            stride: k,
            layers,
            layer_height: 2.0,
            base_curve: BaseCurve::Circle {
                center: Point2::new(0.0, 0.0),
                radius: 50.0,
            },
            twist_deg: None,
        }
    }

    #[test]
    fn pentagram_is_one_loop() {
        let tp = weave_path(&circle_spec(5, 2, 1)).unwrap();
        assert_eq!(tp.segments.len(), 1);
        assert_eq!(tp.segments[0].points.len(), 6);
    }

    #[test]
    fn hexagram_is_two_triangles() {
        let tp = weave_path(&circle_spec(6, 2, 1)).unwrap();
        assert_eq!(tp.extrude_segments().count(), 2);
        assert_eq!(tp.travel_count(), 1);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(weave_path(&circle_spec(2, 1, 1)).is_err());
        assert!(weave_path(&circle_spec(5, 5, 1)).is_err());
        assert!(weave_path(&circle_spec(5, 0, 1)).is_err());
        assert!(weave_path(&circle_spec(5, 1, 0)).is_err());
    }

    #[test]
    fn polyline_base_samples_by_arc_length() {
        let spec = WeaveSpec {
            base_curve: BaseCurve::Polyline {
                points: vec![
                    Point2::new(0.0, 0.0),
                    Point2::new(40.0, 0.0),
                    Point2::new(40.0, 40.0),
                    Point2::new(0.0, 40.0),
                ],
            },
            ..circle_spec(8, 1, 1)
        };
        let pts = spec.base_points();
        assert!(pts[1].dist(Point2::new(20.0, 0.0)) < 1e-12);
        assert!(pts[3].dist(Point2::new(40.0, 20.0)) < 1e-12);
        assert!(pts[7].dist(Point2::new(0.0, 20.0)) < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"ring_points":7,"stride":3,"layers":4,"layer_height":1.5,
            "base_curve":{"circle":{"center":[10,0],"radius":30}},"twist_deg":5}"#;
        let spec = WeaveSpec::from_json(text).unwrap();
        assert_eq!(spec.twist_deg, Some(5.0));
        let back = WeaveSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
