//! Ordered extrusion and travel polylines, and their JSON document form.

use super::error::{GeomError, Result};
use super::point::{polyline_length, Point3};
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Segment ends closer than this are joined without a travel.
pub const TRAVEL_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Extrude,
    Travel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub layer: usize,
    pub points: Vec<Point3>,
}

impl Segment {
    pub fn length(&self) -> f64 {
        polyline_length(&self.points)
    }

    pub fn start(&self) -> Point3 {
        self.points[0]
    }

    pub fn end(&self) -> Point3 {
        self.points[self.points.len() - 1]
    }

    /// Layer of each edge: the segment's layer plus the whole number of
    /// layer heights the edge start has risen above the segment start.
    pub fn edge_layers(&self, layer_height: f64) -> Vec<usize> {
        let z0 = self.start().z;
        self.points[..self.points.len() - 1]
            .iter()
            .map(|p| {
                let rise = if layer_height > 0.0 { ((p.z - z0) / layer_height + 1e-6).floor() } else { 0.0 };
                self.layer + rise.max(0.0) as usize
            })
            .collect()
    }
}

/// One extruded straight edge with the layer it belongs to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtrudeEdge {
    pub from: Point3,
    pub to: Point3,
    pub layer: usize,
}

impl ExtrudeEdge {
    pub fn length(&self) -> f64 {
        self.from.dist(self.to)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Toolpath {
    pub layer_height: f64,
    pub segments: Vec<Segment>,
}

impl Toolpath {
    pub fn new(layer_height: f64) -> Self {
        Toolpath {
            layer_height,
            segments: Vec::new(),
        }
    }

    pub fn extrude_length(&self) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Extrude)
            .map(Segment::length)
            .fold(0.0, |a, b| a + b)
    }

    pub fn travel_length(&self) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Travel)
            .map(Segment::length)
            .fold(0.0, |a, b| a + b)
    }

    pub fn extrude_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Extrude)
    }

    pub fn travel_count(&self) -> usize {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Travel).count()
    }

    /// Every extruded edge, tagged with its layer. A segment that climbs
    /// (spirals, continuous weaves) is split across layers by how far each
    /// edge's start has risen above the segment's start.
    pub fn extrude_edges(&self) -> Vec<ExtrudeEdge> {
        let mut out = Vec::new();
        for s in self.extrude_segments() {
            for (w, layer) in s.points.windows(2).zip(s.edge_layers(self.layer_height)) {
                out.push(ExtrudeEdge {
                    from: w[0],
                    to: w[1],
                    layer,
                });
            }
        }
        out
    }

    pub fn max_layer(&self) -> Option<usize> {
        self.extrude_edges().iter().map(|e| e.layer).max()
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GeomError::InvalidToolpath(m));
        if !(self.layer_height > 0.0) {
            return bad(format!("layer height {} is not positive", self.layer_height));
        }
        let mut last_layer = 0usize;
        let mut prev_end: Option<Point3> = None;
        let mut prev_kind: Option<SegmentKind> = None;
        for (i, s) in self.segments.iter().enumerate() {
            if s.points.len() < 2 {
                return bad(format!("segment {i} has fewer than 2 points"));
            }
            if s.points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
                return bad(format!("segment {i} has a non-finite coordinate"));
            }
            if s.layer < last_layer {
                return bad(format!("segment {i} layer {} decreases", s.layer));
            }
            if s.kind == SegmentKind::Travel && s.length() <= TRAVEL_THRESHOLD {
                return bad(format!("segment {i} is a zero-length travel"));
            }
            if let (Some(e), Some(SegmentKind::Travel)) = (prev_end, prev_kind) {
                if s.kind == SegmentKind::Travel && e.dist(s.start()) <= TRAVEL_THRESHOLD {
                    return bad(format!("segment {i} continues a travel with another travel"));
                }
            }
            last_layer = s.layer;
            prev_end = Some(s.end());
            prev_kind = Some(s.kind);
        }
        Ok(())
    }

    /// The JSON document form with coordinates at 6 decimals.
    pub fn to_json(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{{\"layer_height\": {:.6}, \"segments\":[", self.layer_height);
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let kind = match seg.kind {
                SegmentKind::Extrude => "extrude",
                SegmentKind::Travel => "travel",
            };
            let _ = write!(s, "\n{{\"kind\":\"{kind}\",\"layer\":{},\"points\":[", seg.layer);
            for (j, p) in seg.points.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "[{:.6},{:.6},{:.6}]", p.x, p.y, p.z);
            }
            s.push_str("]}");
        }
        s.push_str("\n]}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Toolpath> {
        let tp: Toolpath = serde_json::from_str(text)?;
        tp.validate()?;
        Ok(tp)
    }
}

/// Appends polylines to a toolpath, joining touching ends within a layer
/// and bridging gaps with travel segments.
#[derive(Debug)]
pub struct ToolpathBuilder {
    toolpath: Toolpath,
    threshold: f64,
}

impl ToolpathBuilder {
    pub fn new(layer_height: f64) -> Self {
        ToolpathBuilder {
            toolpath: Toolpath::new(layer_height),
            threshold: TRAVEL_THRESHOLD,
        }
    }

    pub fn last_point(&self) -> Option<Point3> {
        self.toolpath.segments.last().map(Segment::end)
    }

    /// Adds an extrusion. Polylines with fewer than 2 distinct points are
    /// ignored.
    pub fn extrude(&mut self, points: &[Point3], layer: usize) {
        let mut pts: Vec<Point3> = Vec::with_capacity(points.len());
        for &p in points {
            if pts.last().is_none_or(|q: &Point3| q.dist(p) > 0.0) {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return;
        }
        let layer = layer.max(self.toolpath.segments.last().map_or(0, |s| s.layer));
        let threshold = self.threshold;
        match self.toolpath.segments.last_mut() {
            Some(last)
                if last.kind == SegmentKind::Extrude
                    && last.layer == layer
                    && last.end().dist(pts[0]) <= threshold =>
            {
                let skip = usize::from(last.end() == pts[0]);
                last.points.extend_from_slice(&pts[skip..]);
                return;
            }
            Some(last) if last.end().dist(pts[0]) > threshold => {
                let from = last.end();
                self.toolpath.segments.push(Segment {
                    kind: SegmentKind::Travel,
                    layer,
                    points: vec![from, pts[0]],
                });
            }
            _ => {}
        }
        self.toolpath.segments.push(Segment {
            kind: SegmentKind::Extrude,
            layer,
            points: pts,
        });
    }

    pub fn finish(self) -> Toolpath {
        self.toolpath
    }
}
