//! Deterministic context-free L-systems: grammar scripts, parallel
//! rewriting, 3D turtle interpretation and vertical stacking of generations.

use crate::geom::{polyline_length, Point3, Toolpath, ToolpathBuilder};
use std::collections::BTreeMap;
use thiserror::Error;

pub const DEFAULT_EXPANSION_CAP: usize = 10_000_000;
pub const DEFAULT_ANGLE_DEG: f64 = 90.0;
pub const DEFAULT_STEP_MM: f64 = 10.0;
/// Rotations between frame re-orthonormalizations.
const REORTHO_INTERVAL: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum LsysError {
    #[error("empty grammar script")]
    EmptyScript,
    #[error("missing axiom line")]
    MissingAxiom,
    #[error("duplicate axiom at line {line}")]
    DuplicateAxiom { line: usize },
    #[error("duplicate rule {symbol}")]
    DuplicateRule { symbol: char },
    #[error("empty replacement for rule {symbol}")]
    EmptyReplacement { symbol: char },
    #[error("unknown directive '{directive}' at line {line}")]
    UnknownDirective { directive: String, line: usize },
    #[error("malformed {directive} at line {line}")]
    Malformed { directive: &'static str, line: usize },
    #[error("expansion limit: generation {generation} would hold {length} symbols (cap {cap})")]
    ExpansionLimit { generation: usize, length: u64, cap: usize },
    #[error("unbalanced ']' at symbol {position}")]
    EmptyStack { position: usize },
    #[error("unbalanced '[': {depth} pose(s) left on the stack")]
    UnclosedBranch { depth: usize },
    #[error("invalid turtle frame")]
    InvalidFrame,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grammar {
    pub axiom: String,
    pub rules: BTreeMap<char, String>,
    pub angle_deg: f64,
    pub step_mm: f64,
}

impl Grammar {
    pub fn new(axiom: &str, rules: &[(char, &str)]) -> Self {
        Grammar {
            axiom: axiom.to_string(),
            rules: rules.iter().map(|&(k, v)| (k, v.to_string())).collect(),
            angle_deg: DEFAULT_ANGLE_DEG,
            step_mm: DEFAULT_STEP_MM,
        }
    }
}

/// Parses the line-oriented grammar script:
///
/// ```text
/// # comment
/// axiom F
/// rule F -> F+F-F-F+F
/// angle 90
/// step 10
/// ```
pub fn parse_grammar(text: &str) -> Result<Grammar, LsysError> {
    if text.trim().is_empty() {
        return Err(LsysError::EmptyScript);
    }
    let mut axiom: Option<String> = None;
    let mut rules = BTreeMap::new();
    let mut angle_deg = DEFAULT_ANGLE_DEG;
    let mut step_mm = DEFAULT_STEP_MM;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let (directive, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        let rest = rest.trim();
        match directive {
            "axiom" => {
                if axiom.is_some() {
                    return Err(LsysError::DuplicateAxiom { line });
                }
                if rest.is_empty() {
                    return Err(LsysError::Malformed { directive: "axiom", line });
                }
                axiom = Some(rest.to_string());
            }
            "rule" => {
                let (lhs, rhs) = rest
                    .split_once("->")
                    .ok_or(LsysError::Malformed { directive: "rule", line })?;
                let mut chars = lhs.trim().chars();
                let (Some(symbol), None) = (chars.next(), chars.next()) else {
                    return Err(LsysError::Malformed { directive: "rule", line });
                };
                let rhs = rhs.trim();
                if rhs.is_empty() {
                    return Err(LsysError::EmptyReplacement { symbol });
                }
                if rules.insert(symbol, rhs.to_string()).is_some() {
                    return Err(LsysError::DuplicateRule { symbol });
                }
            }
            "angle" | "step" => {
                let name = if directive == "angle" { "angle" } else { "step" };
                let v: f64 = rest
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or(LsysError::Malformed { directive: name, line })?;
                if directive == "angle" {
                    angle_deg = v;
                } else {
                    step_mm = v;
                }
            }
            other => {
                return Err(LsysError::UnknownDirective {
                    directive: other.to_string(),
                    line,
                })
            }
        }
    }
    Ok(Grammar {
        axiom: axiom.ok_or(LsysError::MissingAxiom)?,
        rules,
        angle_deg,
        step_mm,
    })
}

pub fn expand(grammar: &Grammar, generations: usize) -> Result<String, LsysError> {
    expand_capped(grammar, generations, DEFAULT_EXPANSION_CAP)
}

/// Parallel rewriting: each generation replaces every symbol of the
/// previous one by its rule image (or itself when it has no rule).
pub fn expand_capped(grammar: &Grammar, generations: usize, cap: usize) -> Result<String, LsysError> {
    let mut word = grammar.axiom.clone();
    for generation in 1..=generations {
        let length: u64 = word
            .chars()
            .map(|c| grammar.rules.get(&c).map_or(c.len_utf8(), String::len) as u64)
            .sum();
        let symbols: u64 = word
            .chars()
            .map(|c| grammar.rules.get(&c).map_or(1, |r| r.chars().count()) as u64)
            .sum();
        if symbols > cap as u64 {
            return Err(LsysError::ExpansionLimit {
                generation,
                length: symbols,
                cap,
            });
        }
        let mut next = String::with_capacity(length as usize);
        for c in word.chars() {
            match grammar.rules.get(&c) {
                Some(img) => next.push_str(img),
                None => next.push(c),
            }
        }
        word = next;
    }
    Ok(word)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Point3,
    pub heading: Point3,
    pub left: Point3,
    pub up: Point3,
}

impl Default for Pose {
    fn default() -> Self {
        Pose {
            position: Point3::default(),
            heading: Point3::new(1.0, 0.0, 0.0),
            left: Point3::new(0.0, 1.0, 0.0),
            up: Point3::new(0.0, 0.0, 1.0),
        }
    }
}

impl Pose {
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let (h, l, u) = (self.heading, self.left, self.up);
        [h, l, u].iter().all(|v| (v.norm() - 1.0).abs() <= tol)
            && h.dot(l).abs() <= tol
            && h.dot(u).abs() <= tol
            && l.dot(u).abs() <= tol
    }

    fn reorthonormalize(&mut self) {
        let h = self.heading.normalized();
        let l = (self.left - h * self.left.dot(h)).normalized();
        self.heading = h;
        self.left = l;
        self.up = h.cross(l);
    }
}

/// Rotates `a` and `b` (the two frame axes orthogonal to the rotation axis)
/// by `theta` in their plane: `a → a cos θ + b sin θ`.
fn rotate_pair(a: Point3, b: Point3, theta: f64) -> (Point3, Point3) {
    let (s, c) = theta.sin_cos();
    (a * c + b * s, b * c - a * s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurtleConfig {
    pub start: Pose,
    pub angle_deg: f64,
    pub step_mm: f64,
}

impl TurtleConfig {
    pub fn for_grammar(g: &Grammar) -> Self {
        TurtleConfig {
            start: Pose::default(),
            angle_deg: g.angle_deg,
            step_mm: g.step_mm,
        }
    }

    pub fn validate(&self) -> Result<(), LsysError> {
        if !self.start.is_orthonormal(1e-9) {
            return Err(LsysError::InvalidFrame);
        }
        if !self.angle_deg.is_finite() || !self.step_mm.is_finite() {
            return Err(LsysError::InvalidParameter("angle and step must be finite".into()));
        }
        Ok(())
    }
}

/// Interprets a symbol string as turtle motion.
///
/// `F`/`G` draw forward, `f` moves without drawing, `+`/`-` yaw about up,
/// `&`/`^` pitch about left, `\`/`/` roll about heading, `[`/`]` push and pop
/// the pose. A branch draws into its own polyline; the enclosing polyline
/// resumes after `]`. Polylines are returned in the order they were begun.
pub fn turtle_path(symbols: &str, config: &TurtleConfig) -> Result<Vec<Vec<Point3>>, LsysError> {
    turtle_trace(symbols, config).map(|(lines, _)| lines)
}

/// [`turtle_path`] together with the pose the turtle ends in.
pub fn turtle_trace(symbols: &str, config: &TurtleConfig) -> Result<(Vec<Vec<Point3>>, Pose), LsysError> {
    config.validate()?;
    let theta = config.angle_deg.to_radians();
    let step = config.step_mm;
    let mut pose = config.start;
    let mut rotations = 0usize;
    // Slots hold polylines in begin order; `active` indexes the open one.
    let mut slots: Vec<Vec<Point3>> = Vec::new();
    let mut active: Option<usize> = None;
    let mut stack: Vec<(Pose, Option<usize>)> = Vec::new();
    for (position, c) in symbols.chars().enumerate() {
        match c {
            'F' | 'G' => {
                let slot = *active.get_or_insert_with(|| {
                    slots.push(vec![pose.position]);
                    slots.len() - 1
                });
                pose.position = pose.position + pose.heading * step;
                slots[slot].push(pose.position);
            }
            'f' => {
                pose.position = pose.position + pose.heading * step;
                active = None;
            }
            '+' | '-' | '&' | '^' | '\\' | '/' => {
                let t = if matches!(c, '+' | '&' | '\\') { theta } else { -theta };
                match c {
                    '+' | '-' => (pose.heading, pose.left) = rotate_pair(pose.heading, pose.left, t),
                    '&' | '^' => {
                        let (u, h) = rotate_pair(pose.up, pose.heading, t);
                        (pose.up, pose.heading) = (u, h);
                    }
                    _ => (pose.left, pose.up) = rotate_pair(pose.left, pose.up, t),
                }
                rotations += 1;
                if rotations % REORTHO_INTERVAL == 0 {
                    pose.reorthonormalize();
                }
            }
            '[' => {
                stack.push((pose, active));
                active = None;
            }
            ']' => {
                let (p, a) = stack.pop().ok_or(LsysError::EmptyStack { position })?;
                pose = p;
                active = a;
            }
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(LsysError::UnclosedBranch { depth: stack.len() });
    }
    Ok((slots.into_iter().filter(|s| s.len() >= 2).collect(), pose))
}

/// Interprets each listed generation and lays it at `z = i * z_step`,
/// bridging gaps between polylines with travels.
pub fn stack_generations(
    grammar: &Grammar,
    generations: &[usize],
    config: &TurtleConfig,
    z_step: f64,
) -> Result<Toolpath, LsysError> {
    if generations.is_empty() {
        return Err(LsysError::InvalidParameter("no generations listed".into()));
    }
    if !(z_step > 0.0) {
        return Err(LsysError::InvalidParameter(format!("z step must be positive, got {z_step}")));
    }
    let mut b = ToolpathBuilder::new(z_step);
    for (i, &g) in generations.iter().enumerate() {
        let word = expand(grammar, g)?;
        let lift = z_step * i as f64;
        for line in turtle_path(&word, config)? {
            let moved: Vec<Point3> = line.iter().map(|p| Point3::new(p.x, p.y, p.z + lift)).collect();
            b.extrude(&moved, i);
        }
    }
    Ok(b.finish())
}

/// Sum of drawn lengths; handy for checking stacked output.
pub fn path_length(lines: &[Vec<Point3>]) -> f64 {
    lines.iter().map(|l| polyline_length(l)).fold(0.0, |a, b| a + b)
}
