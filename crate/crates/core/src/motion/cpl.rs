//! CPL text form. One command per line, numbers at six decimals:
//!
//! ```text
//! MOVE <x> <y> <z> <speed> <E|T>
//! EXT ON <flow>
//! EXT OFF
//! DWELL <seconds>
//! ; comment
//! ```
//!
//! Program metadata rides in comments (`; source`, `; params`, `; layer`),
//! so other readers may skip them as ordinary comments.

use super::{Checker, Command, CompileParams, LayerMark, MotionError, MotionProgram, ProgramMeta};
use crate::geom::Point3;
use std::fmt::Write;

pub fn format_command(c: &Command) -> String {
    match *c {
        Command::Move { target, speed, extruding } => format!(
            "MOVE {:.6} {:.6} {:.6} {:.6} {}",
            target.x,
            target.y,
            target.z,
            speed,
            if extruding { 'E' } else { 'T' }
        ),
        Command::ExtOn { flow } => format!("EXT ON {flow:.6}"),
        Command::ExtOff => "EXT OFF".to_string(),
        Command::Dwell { seconds } => format!("DWELL {seconds:.6}"),
    }
}

fn format_params(p: &CompileParams) -> String {
    format!(
        "; params extrude_speed={:.6} travel_speed={:.6} flow={:.6} max_segment={:.6} ext_lead_dwell={:.6} travel_hop={:.6}",
        p.extrude_speed, p.travel_speed, p.flow, p.max_segment, p.ext_lead_dwell, p.travel_hop
    )
}

pub fn emit_cpl(program: &MotionProgram) -> String {
    let mut s = String::new();
    if let Some(h) = &program.meta.source_hash {
        let _ = writeln!(s, "; source sha256:{h}");
    }
    if let Some(p) = &program.meta.params {
        let _ = writeln!(s, "{}", format_params(p));
    }
    let mut marks = program.meta.layer_marks.iter().peekable();
    for (i, c) in program.commands.iter().enumerate() {
        while let Some(m) = marks.next_if(|m| m.command == i) {
            let _ = writeln!(s, "; layer {}", m.layer);
        }
        s.push_str(&format_command(c));
        s.push('\n');
    }
    s
}

fn number(field: &str) -> Result<f64, String> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("non-numeric field '{field}'"))
}

/// Parses one non-comment line.
pub fn parse_command(line: &str) -> Result<Command, String> {
    let f: Vec<&str> = line.split_whitespace().collect();
    let arity = |n: usize| {
        if f.len() == n {
            Ok(())
        } else {
            Err("arity mismatch".to_string())
        }
    };
    match f.first().copied() {
        Some("MOVE") => {
            arity(6)?;
            let target = Point3::new(number(f[1])?, number(f[2])?, number(f[3])?);
            let speed = number(f[4])?;
            let extruding = match f[5] {
                "E" => true,
                "T" => false,
                other => return Err(format!("unknown move mode '{other}'")),
            };
            Ok(Command::Move { target, speed, extruding })
        }
        Some("EXT") => match f.get(1).copied() {
            Some("ON") => {
                arity(3)?;
                Ok(Command::ExtOn { flow: number(f[2])? })
            }
            Some("OFF") => {
                arity(2)?;
                Ok(Command::ExtOff)
            }
            Some(other) => Err(format!("unknown opcode 'EXT {other}'")),
            None => Err("arity mismatch".to_string()),
        },
        Some("DWELL") => {
            arity(2)?;
            Ok(Command::Dwell { seconds: number(f[1])? })
        }
        Some(other) => Err(format!("unknown opcode '{other}'")),
        None => Err("empty command".to_string()),
    }
}

fn parse_params(body: &str) -> Option<CompileParams> {
    let mut p = CompileParams::default();
    let mut seen = 0u32;
    for kv in body.split_whitespace() {
        let (k, v) = kv.split_once('=')?;
        let v: f64 = v.parse().ok()?;
        let (slot, bit) = match k {
            "extrude_speed" => (&mut p.extrude_speed, 0),
            "travel_speed" => (&mut p.travel_speed, 1),
            "flow" => (&mut p.flow, 2),
            "max_segment" => (&mut p.max_segment, 3),
            "ext_lead_dwell" => (&mut p.ext_lead_dwell, 4),
            "travel_hop" => (&mut p.travel_hop, 5),
            _ => return None,
        };
        *slot = v;
        seen |= 1 << bit;
    }
    (seen == 0b11_1111).then_some(p)
}

/// Inverse of [`emit_cpl`]. Blank lines and comments are skipped; the
/// metadata comments `emit_cpl` writes are read back.
pub fn parse_cpl(text: &str) -> Result<MotionProgram, MotionError> {
    if text.trim().is_empty() {
        return Err(MotionError::EmptyText);
    }
    let mut commands = Vec::new();
    let mut meta = ProgramMeta::default();
    let mut checker = Checker::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(comment) = l.strip_prefix(';') {
            let comment = comment.trim();
            if let Some(h) = comment.strip_prefix("source sha256:") {
                meta.source_hash = Some(h.trim().to_string());
            } else if let Some(body) = comment.strip_prefix("params ") {
                meta.params = parse_params(body).or(meta.params);
            } else if let Some(k) = comment.strip_prefix("layer ").and_then(|k| k.trim().parse().ok()) {
                let mark = LayerMark { command: commands.len(), layer: k };
                match meta.layer_marks.last_mut() {
                    Some(last) if last.command == mark.command => *last = mark,
                    _ => meta.layer_marks.push(mark),
                }
            }
            continue;
        }
        let cmd = parse_command(l).map_err(|reason| MotionError::Parse { line, reason })?;
        checker.feed(&cmd).map_err(|reason| MotionError::Parse { line, reason })?;
        commands.push(cmd);
    }
    if meta.layer_marks.last().is_some_and(|m| m.command >= commands.len()) {
        meta.layer_marks.pop();
    }
    Ok(MotionProgram { commands, meta })
}
