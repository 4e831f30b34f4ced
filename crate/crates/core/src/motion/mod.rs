//! Motion programs: timed robot moves interleaved with extruder commands,
//! the compiler that produces them from toolpaths, their statistics and
//! the line-oriented CPL text form.

mod compile;
mod cpl;
mod stats;

pub use compile::{compile, source_hash, CompileParams, MIN_MOVE};
pub use cpl::{emit_cpl, format_command, parse_cpl, parse_command};
pub use stats::{program_stats, timeline, ProgramStats, Step, StepKind};

use crate::geom::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("empty toolpath")]
    EmptyToolpath,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid toolpath: {0}")]
    InvalidToolpath(String),
    #[error("{reason} at line {line}")]
    Parse { line: usize, reason: String },
    #[error("{reason} at command {index}")]
    InvalidProgram { index: usize, reason: String },
    #[error("empty program text")]
    EmptyText,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    Move { target: Point3, speed: f64, extruding: bool },
    ExtOn { flow: f64 },
    ExtOff,
    Dwell { seconds: f64 },
}

/// Marks `command` as the first command of `layer`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerMark {
    pub command: usize,
    pub layer: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgramMeta {
    /// Hex SHA-256 of the source toolpath document.
    pub source_hash: Option<String>,
    pub params: Option<CompileParams>,
    /// Strictly increasing in `command`.
    pub layer_marks: Vec<LayerMark>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionProgram {
    pub commands: Vec<Command>,
    pub meta: ProgramMeta,
}

/// Incremental invariant checker shared by validation and parsing.
#[derive(Debug)]
pub(crate) struct Checker {
    position: Point3,
    extruder_on: bool,
}

impl Checker {
    pub(crate) fn new() -> Self {
        Checker {
            position: Point3::default(),
            extruder_on: false,
        }
    }

    pub(crate) fn feed(&mut self, c: &Command) -> Result<(), String> {
        let finite = |v: f64| v.is_finite();
        match *c {
            Command::Move { target, speed, extruding } => {
                if !(finite(target.x) && finite(target.y) && finite(target.z)) {
                    return Err("non-finite move target".into());
                }
                if !(speed > 0.0 && finite(speed)) {
                    return Err("non-positive speed".into());
                }
                if extruding && !self.extruder_on {
                    return Err("extruding before EXT ON".into());
                }
                if target == self.position {
                    return Err("zero-length move".into());
                }
                self.position = target;
            }
            Command::ExtOn { flow } => {
                if !(flow > 0.0 && finite(flow)) {
                    return Err("non-positive flow".into());
                }
                self.extruder_on = true;
            }
            Command::ExtOff => self.extruder_on = false,
            Command::Dwell { seconds } => {
                if !(seconds >= 0.0 && finite(seconds)) {
                    return Err("negative dwell".into());
                }
            }
        }
        Ok(())
    }
}

impl MotionProgram {
    pub fn validate(&self) -> Result<(), MotionError> {
        let mut ch = Checker::new();
        for (index, c) in self.commands.iter().enumerate() {
            ch.feed(c).map_err(|reason| MotionError::InvalidProgram { index, reason })?;
        }
        let marks = &self.meta.layer_marks;
        if marks.windows(2).any(|w| w[0].command >= w[1].command)
            || marks.last().is_some_and(|m| m.command >= self.commands.len())
        {
            return Err(MotionError::InvalidProgram {
                index: self.commands.len(),
                reason: "layer marks out of order".into(),
            });
        }
        Ok(())
    }

    /// Layer of every command; commands before the first mark are layer 0.
    pub fn command_layers(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.commands.len());
        let mut marks = self.meta.layer_marks.iter().peekable();
        let mut layer = 0;
        for i in 0..self.commands.len() {
            while let Some(m) = marks.next_if(|m| m.command <= i) {
                layer = m.layer;
            }
            out.push(layer);
        }
        out
    }

    pub fn move_count(&self) -> usize {
        self.commands.iter().filter(|c| matches!(c, Command::Move { .. })).count()
    }

    pub fn ext_on_count(&self) -> usize {
        self.commands.iter().filter(|c| matches!(c, Command::ExtOn { .. })).count()
    }

    pub fn ext_off_count(&self) -> usize {
        self.commands.iter().filter(|c| matches!(c, Command::ExtOff)).count()
    }

    /// Extruding move paths: each run of consecutive extruding moves as a
    /// polyline starting at the position before the run.
    pub fn extrude_polylines(&self) -> Vec<Vec<Point3>> {
        let mut out: Vec<Vec<Point3>> = Vec::new();
        let mut pos = Point3::default();
        let mut open = false;
        for c in &self.commands {
            match *c {
                Command::Move { target, extruding: true, .. } => {
                    if !open {
                        out.push(vec![pos]);
                        open = true;
                    }
                    out.last_mut().expect("opened above").push(target);
                    pos = target;
                }
                Command::Move { target, .. } => {
                    pos = target;
                    open = false;
                }
                Command::ExtOff | Command::ExtOn { .. } => open = false,
                Command::Dwell { .. } => {}
            }
        }
        out
    }
}
