//! The session state machine. [`handle`] is the only mutator of
//! [`SessionState`]; transports feed it inputs and carry out its effects.

use crate::protocol::{Message, Phase};
use loadpath_core::motion::{format_command, parse_cpl, Command, MotionProgram};
use loadpath_core::printsim::{simulate, FaultSpec, PumpModel};
use std::collections::{BTreeMap, VecDeque};

pub const DEFAULT_WINDOW: usize = 100;
/// Span of the speed average behind the ETA, seconds.
pub const ETA_WINDOW_S: f64 = 60.0;
pub const MAX_FLOW_MULT: f64 = 2.0;

pub type OperatorId = u64;

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Control { from: OperatorId, msg: Message },
    /// Highest contiguous delivery index the endpoint has executed.
    EndpointAck { idx: u64 },
    Tick,
    OperatorJoined { id: OperatorId },
    OperatorLeft { id: OperatorId },
    /// An operator frame that did not decode.
    Malformed { from: OperatorId, reason: String },
    EndpointLost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Input {
    /// Session clock, seconds.
    pub now: f64,
    pub event: Event,
}

/// Where an endpoint line came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Program(usize),
    /// Inserted by the session for pump safety or resumption.
    Injected,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Effect {
    Endpoint { msg: Message, origin: Origin },
    Broadcast(Message),
    Reply { to: OperatorId, msg: Message },
}

/// Optional pump and fault model used to forecast defects for a loaded
/// program; forecast entries are announced as execution passes them.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectModel {
    pub pump: PumpModel,
    pub faults: FaultSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub window: usize,
    pub defects: Option<DefectModel>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            window: DEFAULT_WINDOW,
            defects: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Telemetry {
    pub progress: f64,
    pub layer: usize,
    pub elapsed: f64,
    pub eta: Option<f64>,
    pub defects: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Loaded {
    commands: Vec<Command>,
    layers: Vec<usize>,
    /// Path length still to run after each prefix: `remaining[i]` covers
    /// commands `i..`.
    remaining: Vec<f64>,
    /// Forecast defects keyed by the command that triggers them.
    defects: Vec<(usize, serde_json::Value)>,
}

impl Loaded {
    fn new(program: MotionProgram, model: Option<&DefectModel>) -> Result<Loaded, String> {
        let layers = program.command_layers();
        let mut lengths = Vec::with_capacity(program.commands.len());
        let mut pos = loadpath_core::geom::Point3::default();
        for c in &program.commands {
            match *c {
                Command::Move { target, .. } => {
                    lengths.push(pos.dist(target));
                    pos = target;
                }
                _ => lengths.push(0.0),
            }
        }
        let mut remaining = vec![0.0; lengths.len() + 1];
        for i in (0..lengths.len()).rev() {
            remaining[i] = remaining[i + 1] + lengths[i];
        }
        let mut defects = Vec::new();
        if let Some(m) = model {
            let report = simulate(&program, &m.pump, &m.faults).map_err(|e| e.to_string())?;
            for d in &report.excess_deposits {
                defects.push((d.command, tagged("excess", serde_json::to_value(d))));
            }
            for s in &report.underextruded_spans {
                defects.push((s.command, tagged("underextrusion", serde_json::to_value(s))));
            }
            defects.sort_by_key(|d| d.0);
        }
        Ok(Loaded {
            commands: program.commands,
            layers,
            remaining,
            defects,
        })
    }
}

fn tagged(kind: &str, v: Result<serde_json::Value, serde_json::Error>) -> serde_json::Value {
    let mut v = v.expect("defect entries serialize");
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("kind".into(), serde_json::Value::String(kind.into()));
    }
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionState {
    config: SessionConfig,
    phase: Phase,
    program: Option<Loaded>,
    /// Program commands acknowledged by the endpoint.
    cursor: usize,
    /// Next program command to dispatch.
    next_program: usize,
    /// Lines sent to the endpoint so far; also the next delivery index.
    delivered: u64,
    /// Delivery indices at or above this are unacknowledged.
    acked: u64,
    in_flight: VecDeque<(u64, Origin)>,
    injected: VecDeque<Command>,
    flow_override: f64,
    /// Extruder state implied by everything dispatched so far.
    extruder_on: bool,
    last_flow: f64,
    /// Flow to restore on resume, when the pause interrupted extrusion.
    resume_flow: Option<f64>,
    out_seq: u64,
    operator_seq: BTreeMap<OperatorId, u64>,
    started_at: Option<f64>,
    finished_at: Option<f64>,
    /// (time, path length acknowledged) samples for the ETA.
    speed_samples: VecDeque<(f64, f64)>,
    defects_sent: usize,
}

impl SessionState {
    pub fn new(config: SessionConfig) -> SessionState {
        SessionState {
            config,
            phase: Phase::Idle,
            program: None,
            cursor: 0,
            next_program: 0,
            delivered: 0,
            acked: 0,
            in_flight: VecDeque::new(),
            injected: VecDeque::new(),
            flow_override: 1.0,
            extruder_on: false,
            last_flow: 0.0,
            resume_flow: None,
            out_seq: 0,
            operator_seq: BTreeMap::new(),
            started_at: None,
            finished_at: None,
            speed_samples: VecDeque::new(),
            defects_sent: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn window(&self) -> usize {
        self.config.window
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn flow_override(&self) -> f64 {
        self.flow_override
    }

    pub fn program_len(&self) -> usize {
        self.program.as_ref().map_or(0, |p| p.commands.len())
    }

    pub fn telemetry(&self, now: f64) -> Telemetry {
        let n = self.program_len();
        let progress = if n == 0 { 0.0 } else { self.cursor as f64 / n as f64 };
        let layer = match &self.program {
            Some(p) if !p.layers.is_empty() => p.layers[self.cursor.min(p.layers.len() - 1)],
            _ => 0,
        };
        let elapsed = match self.started_at {
            Some(t0) => self.finished_at.unwrap_or(now) - t0,
            None => 0.0,
        };
        let eta = match (&self.program, self.phase) {
            (Some(_), Phase::Done) => Some(0.0),
            (Some(p), _) => {
                let left = p.remaining[self.cursor];
                match (self.speed_samples.front(), self.speed_samples.back()) {
                    (Some(a), Some(b)) if b.0 > a.0 && b.1 > a.1 => Some(left / ((b.1 - a.1) / (b.0 - a.0))),
                    _ if left == 0.0 => Some(0.0),
                    _ => None,
                }
            }
            _ => None,
        };
        Telemetry {
            progress,
            layer,
            elapsed,
            eta,
            defects: self.defects_sent,
        }
    }

    fn next_seq(&mut self) -> u64 {
        self.out_seq += 1;
        self.out_seq
    }

    fn status(&mut self, now: f64) -> Message {
        let t = self.telemetry(now);
        Message::Status {
            seq: self.next_seq(),
            progress: t.progress,
            layer: t.layer,
            elapsed: t.elapsed,
            eta: t.eta,
            defects: t.defects,
            phase: self.phase,
        }
    }

    fn error(&mut self, reason: String) -> Message {
        Message::Error {
            seq: self.next_seq(),
            reason,
        }
    }

    fn sample_speed(&mut self, now: f64) {
        let done = match &self.program {
            Some(p) => p.remaining[0] - p.remaining[self.cursor],
            None => return,
        };
        self.speed_samples.push_back((now, done));
        while self.speed_samples.len() > 2 && self.speed_samples[1].0 <= now - ETA_WINDOW_S {
            self.speed_samples.pop_front();
        }
    }

    fn send(&mut self, cmd: Command, origin: Origin, effects: &mut Vec<Effect>) {
        match cmd {
            Command::ExtOn { flow } => {
                self.extruder_on = true;
                if let Origin::Program(_) = origin {
                    self.last_flow = flow;
                }
            }
            Command::ExtOff => self.extruder_on = false,
            _ => {}
        }
        let line = match cmd {
            Command::ExtOn { flow } if origin != Origin::Injected => format_command(&Command::ExtOn {
                flow: flow * self.flow_override,
            }),
            _ => format_command(&cmd),
        };
        let idx = self.delivered;
        self.delivered += 1;
        self.in_flight.push_back((idx, origin));
        let seq = self.next_seq();
        effects.push(Effect::Endpoint {
            msg: Message::Cmd { seq, idx, line },
            origin,
        });
    }

    /// Fills the window: injected lines first, then program lines while
    /// printing.
    fn dispatch(&mut self, effects: &mut Vec<Effect>) {
        while self.in_flight.len() < self.config.window {
            if let Some(cmd) = self.injected.pop_front() {
                self.send(cmd, Origin::Injected, effects);
                continue;
            }
            if self.phase != Phase::Printing {
                break;
            }
            let Some(p) = &self.program else { break };
            if self.next_program >= p.commands.len() {
                break;
            }
            let i = self.next_program;
            let cmd = p.commands[i];
            self.next_program += 1;
            self.send(cmd, Origin::Program(i), effects);
            if self.next_program == self.program_len() && self.extruder_on {
                self.injected.push_back(Command::ExtOff);
            }
        }
    }

    /// Extruder state once every queued line has been dispatched.
    fn planned_extruder_on(&self) -> bool {
        self.injected
            .iter()
            .rev()
            .find_map(|c| match c {
                Command::ExtOn { .. } => Some(true),
                Command::ExtOff => Some(false),
                _ => None,
            })
            .unwrap_or(self.extruder_on)
    }

    fn drained(&self) -> bool {
        self.in_flight.is_empty() && self.injected.is_empty()
    }

    /// Moves to done once everything owed to the endpoint is acknowledged.
    fn maybe_finish(&mut self, now: f64, effects: &mut Vec<Effect>) {
        let complete = match self.phase {
            Phase::Printing => self.next_program == self.program_len(),
            Phase::Stopping => true,
            _ => false,
        };
        if complete && self.drained() {
            self.phase = Phase::Done;
            self.finished_at = Some(now);
            let seq = self.next_seq();
            effects.push(Effect::Broadcast(Message::Done { seq }));
            let st = self.status(now);
            effects.push(Effect::Broadcast(st));
        }
    }

    fn illegal(&mut self, what: &str, to: OperatorId, effects: &mut Vec<Effect>) {
        let msg = self.error(format!("illegal transition: {what} while {}", self.phase.name()));
        effects.push(Effect::Reply { to, msg });
    }

    fn control(&mut self, now: f64, from: OperatorId, msg: Message, effects: &mut Vec<Effect>) {
        if !msg.is_control() {
            let m = self.error(format!("unexpected {} from operator", msg.tag()));
            effects.push(Effect::Reply { to: from, msg: m });
            return;
        }
        let seq = msg.seq();
        if let Some(&last) = self.operator_seq.get(&from) {
            if seq <= last {
                let m = self.error(format!("seq {seq} not above {last}"));
                effects.push(Effect::Reply { to: from, msg: m });
                return;
            }
        }
        self.operator_seq.insert(from, seq);
        let before = self.phase;
        let is_load = matches!(msg, Message::Load { .. });
        match (msg, self.phase) {
            (Message::Load { program, .. }, Phase::Idle | Phase::Loaded | Phase::Done) => {
                let loaded = parse_cpl(&program)
                    .map_err(|e| e.to_string())
                    .and_then(|p| Loaded::new(p, self.config.defects.as_ref()));
                match loaded {
                    Ok(l) => {
                        let config = self.config.clone();
                        let out_seq = self.out_seq;
                        let operator_seq = std::mem::take(&mut self.operator_seq);
                        let (delivered, acked) = (self.delivered, self.acked);
                        *self = SessionState::new(config);
                        self.out_seq = out_seq;
                        self.operator_seq = operator_seq;
                        self.delivered = delivered;
                        self.acked = acked;
                        self.program = Some(l);
                        self.phase = Phase::Loaded;
                    }
                    Err(reason) => {
                        let m = self.error(format!("invalid program: {reason}"));
                        effects.push(Effect::Reply { to: from, msg: m });
                        return;
                    }
                }
            }
            (Message::Start { .. }, Phase::Loaded) => {
                self.phase = Phase::Printing;
                self.started_at = Some(now);
                self.sample_speed(now);
            }
            (Message::Pause { .. }, Phase::Printing) => {
                self.phase = Phase::Paused;
                self.resume_flow = self.planned_extruder_on().then_some(self.last_flow);
                self.injected.push_back(Command::ExtOff);
            }
            (Message::Resume { .. }, Phase::Paused) => {
                self.phase = Phase::Printing;
                if let Some(flow) = self.resume_flow.take() {
                    self.injected.push_back(Command::ExtOn {
                        flow: flow * self.flow_override,
                    });
                }
            }
            (Message::Stop { .. }, Phase::Printing | Phase::Paused) => {
                self.phase = Phase::Stopping;
                self.resume_flow = None;
                self.injected.push_back(Command::ExtOff);
            }
            (Message::SetFlow { mult, .. }, _) => {
                if !(mult > 0.0 && mult <= MAX_FLOW_MULT) {
                    let m = self.error(format!("flow multiplier {mult} outside (0, {MAX_FLOW_MULT}]"));
                    effects.push(Effect::Reply { to: from, msg: m });
                    return;
                }
                self.flow_override = mult;
            }
            (m, _) => {
                self.illegal(m.tag(), from, effects);
                return;
            }
        }
        if self.phase != before || is_load {
            let st = self.status(now);
            effects.push(Effect::Broadcast(st));
        }
    }

    fn ack(&mut self, now: f64, idx: u64, effects: &mut Vec<Effect>) {
        if idx >= self.delivered {
            let m = self.error(format!("ack {idx} beyond delivered {}", self.delivered));
            effects.push(Effect::Broadcast(m));
            return;
        }
        if idx < self.acked {
            return;
        }
        while let Some(&(i, origin)) = self.in_flight.front() {
            if i > idx {
                break;
            }
            self.in_flight.pop_front();
            if let Origin::Program(k) = origin {
                self.cursor = k + 1;
            }
        }
        self.acked = idx + 1;
        self.sample_speed(now);
        let cursor = self.cursor;
        let mut due = Vec::new();
        if let Some(p) = &self.program {
            while self.defects_sent < p.defects.len() && p.defects[self.defects_sent].0 < cursor {
                due.push(p.defects[self.defects_sent].1.clone());
                self.defects_sent += 1;
            }
        }
        for entry in due {
            let seq = self.next_seq();
            effects.push(Effect::Broadcast(Message::Defect { seq, entry }));
        }
    }
}

/// Applies one input. Illegal requests leave the state unchanged and
/// answer with an ERROR.
pub fn handle(mut state: SessionState, input: Input) -> (SessionState, Vec<Effect>) {
    let mut effects = Vec::new();
    let now = input.now;
    if state.phase == Phase::Faulted {
        match input.event {
            Event::Control { from, msg } => {
                let m = state.error(format!("illegal transition: {} while faulted", msg.tag()));
                effects.push(Effect::Reply { to: from, msg: m });
            }
            Event::OperatorJoined { id } => {
                let st = state.status(now);
                effects.push(Effect::Reply { to: id, msg: st });
            }
            _ => {}
        }
        return (state, effects);
    }
    match input.event {
        Event::Control { from, msg } => state.control(now, from, msg, &mut effects),
        Event::EndpointAck { idx } => state.ack(now, idx, &mut effects),
        Event::Tick => {
            if matches!(state.phase, Phase::Printing | Phase::Paused | Phase::Stopping) {
                let st = state.status(now);
                effects.push(Effect::Broadcast(st));
            }
        }
        Event::OperatorJoined { id } => {
            let st = state.status(now);
            effects.push(Effect::Reply { to: id, msg: st });
        }
        Event::OperatorLeft { id } => {
            state.operator_seq.remove(&id);
        }
        Event::Malformed { from, reason } => {
            let m = state.error(format!("malformed message: {reason}"));
            effects.push(Effect::Reply { to: from, msg: m });
        }
        Event::EndpointLost => {
            state.phase = Phase::Faulted;
            state.finished_at = state.started_at.map(|_| now);
            let m = state.error("endpoint disconnected".into());
            effects.push(Effect::Broadcast(m));
            let st = state.status(now);
            effects.push(Effect::Broadcast(st));
            return (state, effects);
        }
    }
    state.dispatch(&mut effects);
    state.maybe_finish(now, &mut effects);
    (state, effects)
}
