//! Program timing and summary statistics.

use super::{Command, MotionProgram};
use crate::geom::Point3;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepKind {
    Move { from: Point3, to: Point3, extruding: bool },
    ExtOn { flow: f64 },
    ExtOff,
    Dwell,
}

/// One command placed on the program clock. Extruder switches take no time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub index: usize,
    pub layer: usize,
    pub t0: f64,
    pub dt: f64,
    pub kind: StepKind,
}

impl Step {
    pub fn t1(&self) -> f64 {
        self.t0 + self.dt
    }

    pub fn length(&self) -> f64 {
        match self.kind {
            StepKind::Move { from, to, .. } => from.dist(to),
            _ => 0.0,
        }
    }
}

/// Commands with start times, starting at the origin at t = 0. Clock values
/// are running sums of per-command durations.
pub fn timeline(program: &MotionProgram) -> Vec<Step> {
    let layers = program.command_layers();
    let mut pos = Point3::default();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(program.commands.len());
    for (index, c) in program.commands.iter().enumerate() {
        let (kind, dt) = match *c {
            Command::Move { target, speed, extruding } => {
                let from = pos;
                pos = target;
                (StepKind::Move { from, to: target, extruding }, from.dist(target) / speed)
            }
            Command::ExtOn { flow } => (StepKind::ExtOn { flow }, 0.0),
            Command::ExtOff => (StepKind::ExtOff, 0.0),
            Command::Dwell { seconds } => (StepKind::Dwell, seconds),
        };
        out.push(Step {
            index,
            layer: layers[index],
            t0: t,
            dt,
            kind,
        });
        t += dt;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProgramStats {
    pub move_count: usize,
    pub total_length: f64,
    pub extrude_length: f64,
    pub travel_length: f64,
    pub duration: f64,
    pub mean_segment: f64,
    pub mean_speed: f64,
    /// Seconds spent in each layer, indexed by layer number.
    pub layer_durations: Vec<f64>,
}

pub fn program_stats(program: &MotionProgram) -> ProgramStats {
    let steps = timeline(program);
    let mut move_count = 0;
    let (mut extrude_length, mut travel_length, mut duration) = (0.0, 0.0, 0.0);
    let n_layers = steps.iter().map(|s| s.layer + 1).max().unwrap_or(0);
    let mut layer_durations = vec![0.0; n_layers];
    for s in &steps {
        if let StepKind::Move { extruding, .. } = s.kind {
            move_count += 1;
            if extruding {
                extrude_length += s.length();
            } else {
                travel_length += s.length();
            }
        }
        duration += s.dt;
        layer_durations[s.layer] += s.dt;
    }
    let total_length = extrude_length + travel_length;
    ProgramStats {
        move_count,
        total_length,
        extrude_length,
        travel_length,
        duration,
        mean_segment: if move_count > 0 { total_length / move_count as f64 } else { 0.0 },
        mean_speed: if duration > 0.0 { total_length / duration } else { 0.0 },
        layer_durations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{LayerMark, ProgramMeta};

    #[test]
    fn single_move() {
        let p = MotionProgram {
            commands: vec![Command::Move {
                target: Point3::new(100.0, 0.0, 0.0),
                speed: 25.0,
                extruding: false,
            }],
            meta: ProgramMeta::default(),
        };
        let s = program_stats(&p);
        assert_eq!((s.move_count, s.duration), (1, 4.0));
        assert_eq!(s.mean_segment, 100.0);
        assert_eq!(s.layer_durations, vec![4.0]);
    }

    #[test]
    fn dwells_count_and_layers_split() {
        let p = MotionProgram {
            commands: vec![
                Command::ExtOn { flow: 1.0 },
                Command::Dwell { seconds: 0.5 },
                Command::Move { target: Point3::new(10.0, 0.0, 0.0), speed: 10.0, extruding: true },
                Command::Move { target: Point3::new(10.0, 20.0, 0.0), speed: 10.0, extruding: true },
                Command::ExtOff,
            ],
            meta: ProgramMeta {
                layer_marks: vec![LayerMark { command: 3, layer: 1 }],
                ..ProgramMeta::default()
            },
        };
        let s = program_stats(&p);
        assert_eq!(s.duration, 3.5);
        assert_eq!(s.layer_durations, vec![1.5, 2.0]);
        assert_eq!(s.extrude_length, 30.0);
        assert_eq!(s.mean_speed, 30.0 / 3.5);
    }
}
