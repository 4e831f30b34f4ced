//! Toolpath to motion program compilation.

use super::{Command, LayerMark, MotionError, MotionProgram, ProgramMeta};
use crate::geom::{Point3, Toolpath};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Moves shorter than this are dropped. At six decimals any two targets at
/// least this far apart still differ in some coordinate.
pub const MIN_MOVE: f64 = 2e-6;
/// Consecutive edges turning less than this are merged.
const COLLINEAR_ANGLE_DEG: f64 = 0.1;
/// Merged-away points stay this close to the merged edge.
const COLLINEAR_DEVIATION: f64 = 5e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileParams {
    /// mm/s
    pub extrude_speed: f64,
    /// mm/s
    pub travel_speed: f64,
    /// g/s
    pub flow: f64,
    /// mm
    pub max_segment: f64,
    /// Pause after EXT ON, s.
    pub ext_lead_dwell: f64,
    /// Lift above the higher travel end, mm.
    pub travel_hop: f64,
}

impl Default for CompileParams {
    fn default() -> Self {
        CompileParams {
            extrude_speed: 30.0,
            travel_speed: 60.0,
            flow: 2.0,
            max_segment: 12.0,
            ext_lead_dwell: 0.5,
            travel_hop: 2.0,
        }
    }
}

impl CompileParams {
    pub fn validate(&self) -> Result<(), MotionError> {
        let bad = |m: String| Err(MotionError::InvalidParameter(m));
        // Six-decimal emission must keep positive values positive.
        for (name, v) in [
            ("extrude_speed", self.extrude_speed),
            ("travel_speed", self.travel_speed),
            ("flow", self.flow),
        ] {
            if !(v >= 1e-6 && v.is_finite()) {
                return bad(format!("{name} must be at least 0.000001, got {v}"));
            }
        }
        if !(self.max_segment > 0.0 && self.max_segment.is_finite()) {
            return bad(format!("max_segment must be positive, got {}", self.max_segment));
        }
        for (name, v) in [("ext_lead_dwell", self.ext_lead_dwell), ("travel_hop", self.travel_hop)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

fn segment_distance3(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b - a;
    let l2 = ab.dot(ab);
    if l2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / l2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

fn turn_angle_deg(u: Point3, v: Point3) -> Option<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    let c = (u.dot(v) / (nu * nv)).clamp(-1.0, 1.0);
    Some(c.acos().to_degrees())
}

/// Drops interior points whose neighbouring edges are collinear and share a
/// layer. Returns kept points and one layer per kept edge.
fn merge_collinear(points: &[Point3], layers: &[usize]) -> (Vec<Point3>, Vec<usize>) {
    let n = points.len() - 1;
    let mut out = vec![points[0]];
    let mut out_layers = Vec::new();
    let mut anchor = 0;
    for i in 1..n {
        let (prev, cur, next) = (points[i - 1], points[i], points[i + 1]);
        let straight = match turn_angle_deg(cur - prev, next - cur) {
            Some(a) => a < COLLINEAR_ANGLE_DEG,
            None => true,
        };
        let mergeable = layers[i - 1] == layers[i]
            && straight
            && (anchor + 1..=i).all(|j| segment_distance3(points[j], points[anchor], next) < COLLINEAR_DEVIATION);
        if !mergeable {
            out.push(cur);
            out_layers.push(layers[i - 1]);
            anchor = i;
        }
    }
    out.push(points[n]);
    out_layers.push(layers[n - 1]);
    (out, out_layers)
}

struct Emitter<'a> {
    params: &'a CompileParams,
    commands: Vec<Command>,
    marks: Vec<LayerMark>,
    pos: Point3,
}

impl Emitter<'_> {
    fn mark(&mut self, layer: usize) {
        if self.marks.last().is_some_and(|m| m.layer == layer) {
            return;
        }
        let mark = LayerMark {
            command: self.commands.len(),
            layer,
        };
        match self.marks.last_mut() {
            Some(last) if last.command == mark.command => *last = mark,
            _ => self.marks.push(mark),
        }
    }

    /// Straight move split into equal steps no longer than `max_segment`.
    fn line(&mut self, to: Point3, speed: f64, extruding: bool) {
        let from = self.pos;
        let len = from.dist(to);
        if len < MIN_MOVE {
            return;
        }
        let steps = ((len / self.params.max_segment) - 1e-9).ceil().max(1.0) as usize;
        for j in 1..=steps {
            let target = if j == steps { to } else { from.lerp(to, j as f64 / steps as f64) };
            self.commands.push(Command::Move { target, speed, extruding });
        }
        self.pos = to;
    }

    /// Lift, cross, descend.
    fn travel(&mut self, to: Point3) {
        let from = self.pos;
        if from.dist(to) < MIN_MOVE {
            return;
        }
        let speed = self.params.travel_speed;
        let top = from.z.max(to.z) + self.params.travel_hop;
        self.line(Point3::new(from.x, from.y, top), speed, false);
        self.line(Point3::new(to.x, to.y, top), speed, false);
        self.line(to, speed, false);
    }
}

pub fn source_hash(toolpath: &Toolpath) -> String {
    let digest = Sha256::digest(toolpath.to_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Each extrude segment becomes `EXT ON`, an optional lead dwell, its
/// moves and `EXT OFF`. Gaps between segments become hop travels. The
/// machine starts at the origin.
pub fn compile(toolpath: &Toolpath, params: &CompileParams) -> Result<MotionProgram, MotionError> {
    params.validate()?;
    toolpath
        .validate()
        .map_err(|e| MotionError::InvalidToolpath(e.to_string()))?;
    if toolpath.extrude_segments().next().is_none() {
        return Err(MotionError::EmptyToolpath);
    }
    let mut em = Emitter {
        params,
        commands: Vec::new(),
        marks: Vec::new(),
        pos: Point3::default(),
    };
    for seg in toolpath.extrude_segments() {
        let layers = seg.edge_layers(toolpath.layer_height);
        let (points, layers) = merge_collinear(&seg.points, &layers);
        em.mark(layers[0]);
        em.travel(points[0]);
        em.commands.push(Command::ExtOn { flow: params.flow });
        if params.ext_lead_dwell > 0.0 {
            em.commands.push(Command::Dwell {
                seconds: params.ext_lead_dwell,
            });
        }
        for (&to, &layer) in points[1..].iter().zip(&layers) {
            em.mark(layer);
            em.line(to, params.extrude_speed, true);
        }
        em.commands.push(Command::ExtOff);
    }
    let program = MotionProgram {
        commands: em.commands,
        meta: ProgramMeta {
            source_hash: Some(source_hash(toolpath)),
            params: Some(*params),
            layer_marks: em.marks,
        },
    };
    debug_assert!(program.validate().is_ok());
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Segment, SegmentKind, ToolpathBuilder};

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    fn no_dwell(max_segment: f64) -> CompileParams {
        CompileParams {
            max_segment,
            ext_lead_dwell: 0.0,
            ..CompileParams::default()
        }
    }

    #[test]
    fn splits_long_edge_equally() {
        let mut b = ToolpathBuilder::new(1.0);
        b.extrude(&[p(0.0, 0.0, 0.0), p(100.0, 0.0, 0.0)], 0);
        let prog = compile(&b.finish(), &no_dwell(12.0)).unwrap();
        assert_eq!(prog.commands.len(), 11);
        assert!(matches!(prog.commands[0], Command::ExtOn { .. }));
        assert!(matches!(prog.commands[10], Command::ExtOff));
        let mut last = Point3::default();
        for c in &prog.commands[1..10] {
            let Command::Move { target, extruding: true, .. } = *c else { panic!("{c:?}") };
            assert!((target.dist(last) - 100.0 / 9.0).abs() < 1e-9);
            last = target;
        }
        assert_eq!(last, p(100.0, 0.0, 0.0));
    }

    #[test]
    fn gap_gets_one_pump_cycle() {
        let mut b = ToolpathBuilder::new(1.0);
        b.extrude(&[p(0.0, 0.0, 0.0), p(10.0, 0.0, 0.0)], 0);
        b.extrude(&[p(20.0, 0.0, 0.0), p(30.0, 0.0, 0.0)], 0);
        let prog = compile(&b.finish(), &CompileParams::default()).unwrap();
        assert_eq!(prog.ext_on_count(), 2);
        assert_eq!(prog.ext_off_count(), 2);
        let off = prog.commands.iter().position(|c| *c == Command::ExtOff).unwrap();
        let on2 = prog.commands.iter().rposition(|c| matches!(c, Command::ExtOn { .. })).unwrap();
        let between = &prog.commands[off + 1..on2];
        assert_eq!(between.len(), 3);
        assert!(between.iter().all(|c| matches!(c, Command::Move { extruding: false, .. })));
        let Command::Move { target, .. } = between[0] else { unreachable!() };
        assert_eq!(target, p(10.0, 0.0, 2.0));
    }

    #[test]
    fn approach_from_origin() {
        let mut b = ToolpathBuilder::new(1.0);
        b.extrude(&[p(5.0, 5.0, 1.0), p(10.0, 5.0, 1.0)], 0);
        let prog = compile(&b.finish(), &CompileParams::default()).unwrap();
        assert!(matches!(prog.commands[0], Command::Move { extruding: false, .. }));
        prog.validate().unwrap();
    }

    #[test]
    fn merges_collinear_points() {
        let mut b = ToolpathBuilder::new(1.0);
        let pts: Vec<Point3> = (0..=10).map(|i| p(i as f64, 0.0, 0.0)).chain([p(10.0, 5.0, 0.0)]).collect();
        b.extrude(&pts, 0);
        let prog = compile(&b.finish(), &no_dwell(100.0)).unwrap();
        assert_eq!(prog.move_count(), 2);
    }

    #[test]
    fn climbing_segment_gets_layer_marks() {
        let tp = Toolpath {
            layer_height: 2.0,
            segments: vec![Segment {
                kind: SegmentKind::Extrude,
                layer: 0,
                points: vec![p(0.0, 0.0, 0.0), p(10.0, 0.0, 1.0), p(10.0, 10.0, 2.0), p(0.0, 10.0, 3.0)],
            }],
        };
        let prog = compile(&tp, &no_dwell(100.0)).unwrap();
        let layers = prog.command_layers();
        assert_eq!(layers, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(compile(&Toolpath::new(1.0), &CompileParams::default()), Err(MotionError::EmptyToolpath));
        let mut b = ToolpathBuilder::new(1.0);
        b.extrude(&[p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)], 0);
        let tp = b.finish();
        let bad = CompileParams { flow: 0.0, ..CompileParams::default() };
        assert!(matches!(compile(&tp, &bad), Err(MotionError::InvalidParameter(_))));
    }
}
