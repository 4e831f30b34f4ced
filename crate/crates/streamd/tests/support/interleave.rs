//! Randomized driver for the session machine with a model endpoint that
//! executes lines in order and acknowledges them in random batches.

use loadpath_core::geom::Point3;
use loadpath_core::motion::{format_command, parse_command, Command};
use loadpath_streamd::session::{handle, Effect, Event, Input, Origin, SessionConfig, SessionState};
use loadpath_streamd::{Message, Phase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Trial {
    pub commands: usize,
    pub delivered: usize,
    pub stopped: bool,
}

pub fn random_program(rng: &mut ChaCha8Rng) -> Vec<Command> {
    let mut cmds = Vec::new();
    let mut x = 0.0;
    let runs = rng.random_range(1..6);
    for r in 0..runs {
        x += 1.0;
        cmds.push(Command::Move {
            target: Point3::new(x, 0.0, r as f64),
            speed: 60.0,
            extruding: false,
        });
        cmds.push(Command::ExtOn {
            flow: rng.random_range(1..5) as f64 * 0.5,
        });
        if rng.random_bool(0.5) {
            cmds.push(Command::Dwell { seconds: 0.5 });
        }
        for _ in 0..rng.random_range(1..12) {
            x += rng.random_range(1..20) as f64 * 0.25;
            cmds.push(Command::Move {
                target: Point3::new(x, 1.0, r as f64),
                speed: 30.0,
                extruding: true,
            });
        }
        // The last run sometimes leaves the extruder on.
        if r + 1 < runs || rng.random_bool(0.7) {
            cmds.push(Command::ExtOff);
        }
    }
    cmds
}

fn cpl(cmds: &[Command]) -> String {
    cmds.iter().map(|c| format_command(c) + "\n").collect()
}

struct Model {
    state: Option<SessionState>,
    now: f64,
    seq: u64,
    /// (delivery idx, origin, line) as received by the endpoint.
    received: Vec<(u64, Origin, String)>,
    executed: usize,
    progress: Vec<f64>,
    expected_flow: Vec<f64>,
}

impl Model {
    fn step(&mut self, event: Event) -> Result<(), String> {
        self.now += 0.01;
        let st = self.state.take().expect("state");
        let (st, fx) = handle(st, Input { now: self.now, event });
        for e in fx {
            match e {
                Effect::Endpoint {
                    msg: Message::Cmd { idx, line, .. },
                    origin,
                } => {
                    if idx != self.received.len() as u64 {
                        return Err(format!("delivery index {idx} out of order"));
                    }
                    if let Origin::Program(i) = origin {
                        let expected = self.expected_flow.get(i).copied();
                        if let (Some(f), Ok(Command::ExtOn { flow })) = (expected, parse_command(&line)) {
                            let want = f * st.flow_override();
                            if (flow - want).abs() > 1e-6 {
                                return Err(format!("EXT ON {flow} expected {want}"));
                            }
                        }
                    }
                    self.received.push((idx, origin, line));
                }
                Effect::Broadcast(Message::Status { progress, .. }) | Effect::Reply { msg: Message::Status { progress, .. }, .. } => {
                    self.progress.push(progress);
                }
                Effect::Endpoint { msg, .. } => return Err(format!("unexpected endpoint message {}", msg.tag())),
                _ => {}
            }
        }
        let unacked = self.received.len() - self.executed;
        if unacked > st.window() || st.in_flight() > st.window() {
            return Err(format!("{unacked} unacknowledged lines exceed window {}", st.window()));
        }
        if matches!(st.phase(), Phase::Paused | Phase::Done) && unacked == 0 {
            let last = self
                .received
                .iter()
                .rev()
                .find(|(_, _, l)| l.starts_with("EXT"))
                .map(|(_, _, l)| l.as_str());
            if !matches!(last, None | Some("EXT OFF")) {
                return Err(format!("{:?} with extruder left at {last:?}", st.phase()));
            }
        }
        self.state = Some(st);
        Ok(())
    }

    fn control(&mut self, msg: impl FnOnce(u64) -> Message) -> Result<(), String> {
        self.seq += 1;
        let m = msg(self.seq);
        self.step(Event::Control { from: 7, msg: m })
    }

    fn ack(&mut self, count: usize) -> Result<(), String> {
        let pending = self.received.len() - self.executed;
        let k = count.min(pending);
        if k == 0 {
            return self.step(Event::Tick);
        }
        self.executed += k;
        self.step(Event::EndpointAck {
            idx: self.executed as u64 - 1,
        })
    }

    fn phase(&self) -> Phase {
        self.state.as_ref().expect("state").phase()
    }
}

/// Runs one randomized session to completion and checks delivery,
/// window and pump invariants along the way.
pub fn run_trial(seed: u64) -> Result<Trial, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let program = random_program(&mut rng);
    let window = rng.random_range(1..12);
    let expected_flow = program
        .iter()
        .map(|c| match c {
            Command::ExtOn { flow } => *flow,
            _ => f64::NAN,
        })
        .collect();
    let mut m = Model {
        state: Some(SessionState::new(SessionConfig { window, defects: None })),
        now: 0.0,
        seq: 0,
        received: Vec::new(),
        executed: 0,
        progress: Vec::new(),
        expected_flow,
    };
    let text = cpl(&program);
    m.control(|seq| Message::Load { seq, program: text })?;
    m.control(|seq| Message::Start { seq })?;
    let mut stopped = false;
    for _ in 0..2000 {
        if m.phase() == Phase::Done {
            break;
        }
        match rng.random_range(0..100) {
            0..=49 => {
                let k = rng.random_range(1..=window);
                m.ack(k)?;
            }
            50..=61 => m.control(|seq| Message::Pause { seq })?,
            62..=77 => m.control(|seq| Message::Resume { seq })?,
            78..=84 => {
                let mult = rng.random_range(0..25) as f64 * 0.1;
                m.control(|seq| Message::SetFlow { seq, mult })?;
            }
            85..=86 => {
                m.control(|seq| Message::Stop { seq })?;
                stopped |= m.phase() == Phase::Stopping;
            }
            87..=89 => m.control(|seq| Message::Start { seq })?,
            90..=92 => m.step(Event::OperatorJoined { id: 9 })?,
            _ => m.step(Event::Tick)?,
        }
    }
    // Drain: resume if paused, then acknowledge everything.
    for _ in 0..10_000 {
        match m.phase() {
            Phase::Done => break,
            Phase::Paused => m.control(|seq| Message::Resume { seq })?,
            _ => m.ack(usize::MAX)?,
        }
    }
    if m.phase() != Phase::Done {
        return Err(format!("session stuck in {:?}", m.phase()));
    }
    let program_lines: Vec<(usize, &str)> = m
        .received
        .iter()
        .filter_map(|(_, o, l)| match o {
            Origin::Program(i) => Some((*i, l.as_str())),
            Origin::Injected => None,
        })
        .collect();
    for (k, (i, line)) in program_lines.iter().enumerate() {
        if *i != k {
            return Err(format!("program command {i} delivered at position {k}"));
        }
        let expected = parse_command(&format_command(&program[*i])).map_err(|e| e.to_string())?;
        let got = parse_command(line)?;
        let same = match (expected, got) {
            (Command::ExtOn { .. }, Command::ExtOn { .. }) => true,
            (a, b) => a == b,
        };
        if !same {
            return Err(format!("command {i} changed: {line}"));
        }
    }
    if !stopped && program_lines.len() != program.len() {
        return Err(format!("done after {} of {} commands", program_lines.len(), program.len()));
    }
    if m.progress.windows(2).any(|w| w[1] < w[0]) {
        return Err("STATUS progress decreased".into());
    }
    Ok(Trial {
        commands: program.len(),
        delivered: program_lines.len(),
        stopped,
    })
}
