//! Virtual printer. Executes a motion program against a pump model with
//! optional flow disruptions and accounts for every gram dispensed.
//!
//! Pump output is piecewise constant, so the run is a sequence of pieces
//! cut at command boundaries, pump switching instants and disruption
//! edges; every quantity is a closed-form integral over the pieces.

use crate::geom::{Point3, Toolpath, ToolpathBuilder};
use crate::motion::{timeline, MotionProgram, StepKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HALT_REASON_OPERATOR: &str = "operator stop";

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid pump model: {0}")]
    Pump(String),
    #[error("invalid fault spec: {0}")]
    Faults(String),
    #[error("invalid program: {0}")]
    Program(String),
    #[error("halt time {at} outside [0, {duration}]")]
    HaltTime { at: f64, duration: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpMode {
    StopAndGo,
    /// Runs from the first EXT ON to the end and ignores EXT OFF.
    LegacyContinuous,
}

impl std::str::FromStr for PumpMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stop_and_go" | "stop-and-go" => Ok(PumpMode::StopAndGo),
            "legacy_continuous" | "legacy-continuous" | "legacy" => Ok(PumpMode::LegacyContinuous),
            other => Err(format!("unknown pump mode '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpModel {
    pub mode: PumpMode,
    /// g/s; when set it replaces the flow of every EXT ON.
    #[serde(default)]
    pub flow: Option<f64>,
    /// Delay from EXT ON to output, s.
    #[serde(default)]
    pub start_latency: f64,
    /// Output continuing after EXT OFF, s.
    #[serde(default)]
    pub stop_latency: f64,
}

impl PumpModel {
    pub fn ideal(mode: PumpMode) -> Self {
        PumpModel {
            mode,
            flow: None,
            start_latency: 0.0,
            stop_latency: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if let Some(f) = self.flow {
            if !(f > 0.0 && f.is_finite()) {
                return Err(SimError::Pump(format!("flow must be positive, got {f}")));
            }
        }
        for (n, v) in [("start_latency", self.start_latency), ("stop_latency", self.stop_latency)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::Pump(format!("{n} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disruption {
    pub start_s: f64,
    pub end_s: f64,
    /// Fraction of nominal output that still comes out.
    pub flow_multiplier: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    #[serde(default)]
    pub flow_disruption: Vec<Disruption>,
    #[serde(default)]
    pub seed: u64,
}

impl FaultSpec {
    pub fn none() -> Self {
        FaultSpec::default()
    }

    /// `count` disjoint disruptions placed uniformly in `[0, duration]`.
    pub fn random(seed: u64, duration: f64, count: usize) -> FaultSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cuts: Vec<f64> = (0..2 * count).map(|_| rng.random_range(0.0..=duration.max(0.0))).collect();
        cuts.sort_by(f64::total_cmp);
        let flow_disruption = cuts
            .chunks_exact(2)
            .filter(|c| c[1] > c[0])
            .map(|c| Disruption {
                start_s: c[0],
                end_s: c[1],
                flow_multiplier: rng.random_range(0.0..1.0),
            })
            .collect();
        FaultSpec { flow_disruption, seed }
    }

    pub fn validate(&self, duration: f64) -> Result<(), SimError> {
        let mut sorted = self.flow_disruption.clone();
        sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        for d in &sorted {
            if !(d.start_s >= 0.0 && d.start_s < d.end_s && d.end_s <= duration) {
                return Err(SimError::Faults(format!(
                    "interval [{}, {}] must be non-empty and inside [0, {duration}]",
                    d.start_s, d.end_s
                )));
            }
            if !(0.0..1.0).contains(&d.flow_multiplier) {
                return Err(SimError::Faults(format!(
                    "multiplier {} must lie in [0, 1)",
                    d.flow_multiplier
                )));
            }
        }
        if let Some(w) = sorted.windows(2).find(|w| w[1].start_s < w[0].end_s) {
            return Err(SimError::Faults(format!(
                "intervals starting at {} and {} overlap",
                w[0].start_s, w[1].start_s
            )));
        }
        Ok(())
    }

    fn multiplier_at(&self, t: f64) -> f64 {
        self.flow_disruption
            .iter()
            .find(|d| d.start_s <= t && t < d.end_s)
            .map_or(1.0, |d| d.flow_multiplier)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DepositedPiece {
    pub command: usize,
    pub layer: usize,
    pub from: Point3,
    pub to: Point3,
    pub t0: f64,
    pub t1: f64,
    /// Actual output rate, g/s.
    pub flow: f64,
    pub grams: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExcessDeposit {
    pub command: usize,
    /// Nozzle position at the middle of the interval.
    pub location: Point3,
    pub t0: f64,
    pub t1: f64,
    pub grams: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeficitCause {
    Disruption,
    PumpLatency,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UnderextrudedSpan {
    pub command: usize,
    pub t0: f64,
    pub t1: f64,
    /// Extruding path travelled during the span, mm.
    pub path_length: f64,
    pub deficit_g: f64,
    pub cause: DeficitCause,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MassTotals {
    pub deposited_g: f64,
    pub excess_g: f64,
    /// Withheld by disruptions while the pump was powered.
    pub disruption_deficit_g: f64,
    /// Missing from extruding moves before the pump came up to speed.
    pub latency_deficit_g: f64,
    pub powered_time_s: f64,
    /// Commanded flow integrated over powered time.
    pub nominal_g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrintReport {
    pub deposited: Vec<DepositedPiece>,
    pub excess_deposits: Vec<ExcessDeposit>,
    pub underextruded_spans: Vec<UnderextrudedSpan>,
    pub duration: f64,
    pub completed: bool,
    pub halt_reason: Option<String>,
    pub defect_count: usize,
    pub totals: MassTotals,
}

impl PrintReport {
    /// The deposited trace as extrusion polylines, one per run of touching
    /// pieces within a layer.
    pub fn deposited_toolpath(&self, layer_height: f64) -> Toolpath {
        let mut b = ToolpathBuilder::new(layer_height);
        for p in self.deposited.iter().filter(|p| p.from != p.to) {
            b.extrude(&[p.from, p.to], p.layer);
        }
        b.finish()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Half-open time intervals during which the pump is powered, with the
/// times of every EXT ON and its flow.
struct PumpSchedule {
    powered: Vec<(f64, f64)>,
    flows: Vec<(f64, f64)>,
}

impl PumpSchedule {
    fn powered_at(&self, t: f64) -> bool {
        self.powered.iter().any(|&(a, b)| a <= t && t < b)
    }

    fn flow_at(&self, t: f64) -> f64 {
        self.flows.iter().take_while(|(s, _)| *s <= t).last().map_or(0.0, |f| f.1)
    }
}

pub struct Simulation<'a> {
    program: &'a MotionProgram,
    pump: PumpModel,
    faults: FaultSpec,
    duration: f64,
}

impl<'a> Simulation<'a> {
    pub fn new(program: &'a MotionProgram, pump: &PumpModel, faults: &FaultSpec) -> Result<Self, SimError> {
        program.validate().map_err(|e| SimError::Program(e.to_string()))?;
        pump.validate()?;
        let steps = timeline(program);
        let duration = steps.last().map_or(0.0, |s| s.t1());
        faults.validate(duration)?;
        Ok(Simulation {
            program,
            pump: *pump,
            faults: faults.clone(),
            duration,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn run(&self) -> PrintReport {
        self.execute(self.duration)
    }

    /// Stops the print at `at_s`. A halt at or past the end changes nothing.
    pub fn halt(&self, at_s: f64) -> Result<PrintReport, SimError> {
        if !(at_s >= 0.0 && at_s <= self.duration) {
            return Err(SimError::HaltTime {
                at: at_s,
                duration: self.duration,
            });
        }
        Ok(self.execute(at_s))
    }

    fn schedule(&self) -> PumpSchedule {
        let steps = timeline(self.program);
        let mut flows = Vec::new();
        let mut on_spans: Vec<(f64, f64)> = Vec::new();
        let mut on_since: Option<f64> = None;
        for s in &steps {
            match s.kind {
                StepKind::ExtOn { flow } => {
                    flows.push((s.t0, self.pump.flow.unwrap_or(flow)));
                    on_since.get_or_insert(s.t0);
                }
                StepKind::ExtOff => {
                    if let Some(a) = on_since.take() {
                        on_spans.push((a, s.t0));
                    }
                }
                _ => {}
            }
        }
        if let Some(a) = on_since {
            on_spans.push((a, self.duration));
        }
        let (ls, lp) = (self.pump.start_latency, self.pump.stop_latency);
        let mut powered: Vec<(f64, f64)> = Vec::new();
        match self.pump.mode {
            PumpMode::LegacyContinuous => {
                if let Some(&(a, _)) = on_spans.first() {
                    powered.push((a + ls, f64::INFINITY));
                }
            }
            PumpMode::StopAndGo => {
                for &(a, b) in &on_spans {
                    let (a, b) = (a + ls, b + lp);
                    if a >= b {
                        continue;
                    }
                    match powered.last_mut() {
                        Some(last) if a <= last.1 => last.1 = last.1.max(b),
                        _ => powered.push((a, b)),
                    }
                }
            }
        }
        // Accounting stops at the program end.
        let end = self.duration;
        powered = powered
            .into_iter()
            .map(|(a, b)| (a, b.min(end)))
            .filter(|(a, b)| a < b)
            .collect();
        PumpSchedule { powered, flows }
    }

    fn execute(&self, horizon: f64) -> PrintReport {
        let steps = timeline(self.program);
        let sched = self.schedule();
        let mut cuts: Vec<f64> = sched.powered.iter().flat_map(|&(a, b)| [a, b]).collect();
        cuts.extend(sched.flows.iter().map(|f| f.0));
        cuts.extend(self.faults.flow_disruption.iter().flat_map(|d| [d.start_s, d.end_s]));
        cuts.push(horizon);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut deposited = Vec::new();
        let mut excess_deposits: Vec<ExcessDeposit> = Vec::new();
        let mut spans: Vec<UnderextrudedSpan> = Vec::new();
        let mut totals = MassTotals::default();
        let mut commanded_on = false;
        let mut commanded_flow = 0.0;
        let mut pos = Point3::default();

        for s in &steps {
            if s.t0 >= horizon {
                break;
            }
            match s.kind {
                StepKind::ExtOn { flow } => {
                    commanded_on = true;
                    commanded_flow = self.pump.flow.unwrap_or(flow);
                    continue;
                }
                StepKind::ExtOff => {
                    commanded_on = false;
                    continue;
                }
                _ => {}
            }
            let (from, to, extruding) = match s.kind {
                StepKind::Move { from, to, extruding } => (from, to, extruding),
                _ => (pos, pos, false),
            };
            let end = s.t1().min(horizon);
            let lo = cuts.partition_point(|&c| c <= s.t0);
            let hi = cuts.partition_point(|&c| c < end);
            let bounds: Vec<f64> = std::iter::once(s.t0)
                .chain(cuts[lo..hi].iter().copied())
                .chain(std::iter::once(end))
                .collect();
            // Position along the move at time t.
            let at = |t: f64| {
                if s.dt > 0.0 {
                    from.lerp(to, ((t - s.t0) / s.dt).clamp(0.0, 1.0))
                } else {
                    to
                }
            };
            for w in bounds.windows(2) {
                let (a, b) = (w[0], w[1]);
                let dt = b - a;
                if dt <= 0.0 {
                    continue;
                }
                let mid = 0.5 * (a + b);
                let powered = sched.powered_at(mid);
                let intended = commanded_on && (extruding || s.kind == StepKind::Dwell);
                let (pa, pb) = (at(a), at(b));
                let path = if extruding { pa.dist(pb) } else { 0.0 };
                if powered {
                    let f = sched.flow_at(mid);
                    let m = self.faults.multiplier_at(mid);
                    let nominal = f * dt;
                    let actual = m * nominal;
                    let deficit = nominal - actual;
                    totals.powered_time_s += dt;
                    totals.nominal_g += nominal;
                    if intended {
                        totals.deposited_g += actual;
                        if extruding || actual > 0.0 {
                            deposited.push(DepositedPiece {
                                command: s.index,
                                layer: s.layer,
                                from: pa,
                                to: pb,
                                t0: a,
                                t1: b,
                                flow: f * m,
                                grams: actual,
                            });
                        }
                    } else if actual > 0.0 {
                        totals.excess_g += actual;
                        excess_deposits.push(ExcessDeposit {
                            command: s.index,
                            location: at(mid),
                            t0: a,
                            t1: b,
                            grams: actual,
                        });
                    }
                    if deficit > 0.0 {
                        totals.disruption_deficit_g += deficit;
                        extend_span(&mut spans, s.index, a, b, path, deficit, DeficitCause::Disruption);
                    }
                } else if commanded_on && extruding {
                    let deficit = commanded_flow * dt;
                    totals.latency_deficit_g += deficit;
                    deposited.push(DepositedPiece {
                        command: s.index,
                        layer: s.layer,
                        from: pa,
                        to: pb,
                        t0: a,
                        t1: b,
                        flow: 0.0,
                        grams: 0.0,
                    });
                    extend_span(&mut spans, s.index, a, b, path, deficit, DeficitCause::PumpLatency);
                }
            }
            pos = to;
            if s.t1() > horizon {
                break;
            }
        }
        let completed = horizon >= self.duration;
        let defect_count = excess_deposits.len() + spans.len();
        PrintReport {
            deposited,
            excess_deposits,
            underextruded_spans: spans,
            duration: horizon,
            completed,
            halt_reason: (!completed).then(|| HALT_REASON_OPERATOR.to_string()),
            defect_count,
            totals,
        }
    }
}

/// Appends a deficit interval, merging it into the previous span when it
/// continues it in time with the same cause.
fn extend_span(
    spans: &mut Vec<UnderextrudedSpan>,
    command: usize,
    t0: f64,
    t1: f64,
    path: f64,
    deficit: f64,
    cause: DeficitCause,
) {
    match spans.last_mut() {
        Some(last) if last.cause == cause && last.t1 == t0 => {
            last.t1 = t1;
            last.path_length += path;
            last.deficit_g += deficit;
        }
        _ => spans.push(UnderextrudedSpan {
            command,
            t0,
            t1,
            path_length: path,
            deficit_g: deficit,
            cause,
        }),
    }
}

pub fn simulate(program: &MotionProgram, pump: &PumpModel, faults: &FaultSpec) -> Result<PrintReport, SimError> {
    Ok(Simulation::new(program, pump, faults)?.run())
}
