use loadpath_core::geom::Point3;
use loadpath_core::motion::{program_stats, Command, MotionProgram, ProgramMeta};
use loadpath_core::printsim::{simulate, Disruption, FaultSpec, PumpMode, PumpModel, Simulation};
use proptest::prelude::*;

fn mv(x: f64, y: f64, speed: f64, extruding: bool) -> Command {
    Command::Move { target: Point3::new(x, y, 0.0), speed, extruding }
}

fn program(commands: Vec<Command>) -> MotionProgram {
    MotionProgram { commands, meta: ProgramMeta::default() }
}

/// Extrude 50 s, travel 20 s in two legs, extrude again.
fn fixture() -> MotionProgram {
    program(vec![
        Command::ExtOn { flow: 2.0 },
        Command::Dwell { seconds: 0.5 },
        mv(500.0, 0.0, 10.0, true),
        Command::ExtOff,
        mv(500.0, 100.0, 10.0, false),
        mv(500.0, 200.0, 10.0, false),
        Command::ExtOn { flow: 2.0 },
        mv(0.0, 200.0, 10.0, true),
        Command::ExtOff,
    ])
}

#[test]
fn legacy_travel_excess_is_forty_grams() {
    let r = simulate(&fixture(), &PumpModel::ideal(PumpMode::LegacyContinuous), &FaultSpec::none()).unwrap();
    let excess: f64 = r.excess_deposits.iter().map(|e| e.grams).sum();
    assert_eq!(excess, 40.0);
    let ideal = simulate(&fixture(), &PumpModel::ideal(PumpMode::StopAndGo), &FaultSpec::none()).unwrap();
    assert!(ideal.excess_deposits.is_empty());
    assert_eq!(ideal.totals.excess_g, 0.0);
}

#[test]
fn ideal_pump_matches_program_clock() {
    let p = fixture();
    let r = simulate(&p, &PumpModel::ideal(PumpMode::StopAndGo), &FaultSpec::none()).unwrap();
    let s = program_stats(&p);
    assert_eq!(r.duration, s.duration);
    // 50 s + 50 s of extrusion plus the lead dwell.
    assert_eq!(r.totals.deposited_g, 2.0 * 100.5);
    assert_eq!(r.defect_count, 0);
}

/// Deficit by 1 ms midpoint stepping for a zero-latency stop-and-go pump.
fn stepped_deficit(p: &MotionProgram, faults: &FaultSpec, flow: f64) -> f64 {
    let steps = loadpath_core::motion::timeline(p);
    let end = steps.last().unwrap().t1();
    let mut on = Vec::new();
    let mut since = None;
    for s in &steps {
        match s.kind {
            loadpath_core::motion::StepKind::ExtOn { .. } => {
                since.get_or_insert(s.t0);
            }
            loadpath_core::motion::StepKind::ExtOff => {
                if let Some(a) = since.take() {
                    on.push((a, s.t0));
                }
            }
            _ => {}
        }
    }
    let dt = 1e-3;
    let n = (end / dt).round() as usize;
    let mut deficit = 0.0;
    for i in 0..n {
        let t = (i as f64 + 0.5) * dt;
        if on.iter().any(|&(a, b)| a <= t && t < b) {
            let m = faults
                .flow_disruption
                .iter()
                .find(|d| d.start_s <= t && t < d.end_s)
                .map_or(1.0, |d| d.flow_multiplier);
            deficit += (1.0 - m) * flow * dt;
        }
    }
    deficit
}

#[test]
fn disruption_deficit_matches_stepping_oracle() {
    let p = program(vec![Command::ExtOn { flow: 2.0 }, mv(3000.0, 0.0, 10.0, true), Command::ExtOff]);
    let faults = FaultSpec {
        flow_disruption: vec![Disruption { start_s: 100.0, end_s: 160.0, flow_multiplier: 0.3 }],
        seed: 1,
    };
    let r = simulate(&p, &PumpModel::ideal(PumpMode::StopAndGo), &faults).unwrap();
    assert_eq!(r.underextruded_spans.len(), 1);
    let span = r.underextruded_spans[0];
    assert_eq!(span.t1 - span.t0, 60.0);
    let oracle = stepped_deficit(&p, &faults, 2.0);
    assert!((span.deficit_g - oracle).abs() < 1e-6, "{} vs {oracle}", span.deficit_g);
    assert!((span.deficit_g - 0.7 * 2.0 * 60.0).abs() < 1e-9);
}

#[test]
fn random_faults_against_stepping_oracle() {
    let p = fixture();
    let duration = program_stats(&p).duration;
    for seed in 0..20 {
        let faults = FaultSpec::random(seed, duration, 3);
        let r = simulate(&p, &PumpModel::ideal(PumpMode::StopAndGo), &faults).unwrap();
        let oracle = stepped_deficit(&p, &faults, 2.0);
        // Each interval edge can misplace at most one 1 ms step.
        let tol = 2.0 * 1e-3 * (2 * faults.flow_disruption.len() + 4) as f64;
        assert!((r.totals.disruption_deficit_g - oracle).abs() <= tol, "seed {seed}");
    }
}

#[test]
fn halfway_halt_is_proportional() {
    let p = program(vec![Command::ExtOn { flow: 1.5 }, mv(100.0, 0.0, 4.0, true), Command::ExtOff]);
    let sim = Simulation::new(&p, &PumpModel::ideal(PumpMode::StopAndGo), &FaultSpec::none()).unwrap();
    let full = sim.run();
    let half = sim.halt(sim.duration() / 2.0).unwrap();
    assert!((half.totals.deposited_g - full.totals.deposited_g / 2.0).abs() < 1e-9);
    assert!(!half.completed && half.halt_reason.is_some());
    assert_eq!(sim.halt(sim.duration()).unwrap(), full);
    assert!(sim.halt(0.0).unwrap().deposited.is_empty());
}

fn random_program() -> impl Strategy<Value = MotionProgram> {
    prop::collection::vec((0u8..8, -300.0..300.0f64, -300.0..300.0f64, 1.0..60.0f64, any::<bool>()), 1..40).prop_map(
        |ops| {
            let mut commands = Vec::new();
            let mut on = false;
            let mut pos = Point3::default();
            for (op, x, y, v, flag) in ops {
                match op {
                    0 => {
                        commands.push(Command::ExtOn { flow: v / 20.0 });
                        on = true;
                    }
                    1 => {
                        commands.push(Command::ExtOff);
                        on = false;
                    }
                    2 => commands.push(Command::Dwell { seconds: v / 10.0 }),
                    _ => {
                        let target = Point3::new(x, y, 0.0);
                        if target.dist(pos) > 1e-3 {
                            commands.push(Command::Move { target, speed: v, extruding: on && flag });
                            pos = target;
                        }
                    }
                }
            }
            if commands.is_empty() {
                commands.push(Command::Dwell { seconds: 1.0 });
            }
            program(commands)
        },
    )
}

fn pump() -> impl Strategy<Value = PumpModel> {
    (any::<bool>(), prop::option::of(0.1..5.0f64), 0.0..3.0f64, 0.0..3.0f64).prop_map(|(legacy, flow, a, b)| PumpModel {
        mode: if legacy { PumpMode::LegacyContinuous } else { PumpMode::StopAndGo },
        flow,
        start_latency: a,
        stop_latency: b,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mass_is_conserved(p in random_program(), pump in pump(), seed in any::<u64>(), count in 0usize..5) {
        let duration = program_stats(&p).duration;
        let faults = FaultSpec::random(seed, duration, count);
        let r = simulate(&p, &pump, &faults).unwrap();
        let t = r.totals;
        let lhs = t.deposited_g + t.excess_g + t.disruption_deficit_g;
        prop_assert!((lhs - t.nominal_g).abs() <= 1e-9 * t.nominal_g.max(1.0), "{lhs} vs {}", t.nominal_g);
        prop_assert!(r.excess_deposits.iter().all(|e| e.grams >= 0.0));
        prop_assert!(r.underextruded_spans.iter().all(|s| s.deficit_g >= 0.0));
        prop_assert!(t.powered_time_s <= r.duration + 1e-9);
        prop_assert_eq!(r.defect_count, r.excess_deposits.len() + r.underextruded_spans.len());
        // Same inputs, same report.
        prop_assert_eq!(simulate(&p, &pump, &faults).unwrap(), r);
    }

    #[test]
    fn longer_disruption_never_lowers_deficit(p in random_program(), seed in any::<u64>(), grow in 0.0..1.0f64) {
        let duration = program_stats(&p).duration;
        let faults = FaultSpec::random(seed, duration, 1);
        prop_assume!(!faults.flow_disruption.is_empty());
        let mut wider = faults.clone();
        let d = &mut wider.flow_disruption[0];
        d.end_s += (duration - d.end_s) * grow;
        let pump = PumpModel::ideal(PumpMode::StopAndGo);
        let a = simulate(&p, &pump, &faults).unwrap().totals.disruption_deficit_g;
        let b = simulate(&p, &pump, &wider).unwrap().totals.disruption_deficit_g;
        prop_assert!(b >= a);
    }

    #[test]
    fn ideal_pump_keeps_program_timing(p in random_program()) {
        let r = simulate(&p, &PumpModel::ideal(PumpMode::StopAndGo), &FaultSpec::none()).unwrap();
        prop_assert_eq!(r.duration, program_stats(&p).duration);
        // Only travels made with the extruder on leave excess.
        let mut on = None;
        let mut expected = 0.0;
        for s in loadpath_core::motion::timeline(&p) {
            match s.kind {
                loadpath_core::motion::StepKind::ExtOn { flow } => on = Some(flow),
                loadpath_core::motion::StepKind::ExtOff => on = None,
                loadpath_core::motion::StepKind::Move { extruding: false, .. } => expected += on.unwrap_or(0.0) * s.dt,
                _ => {}
            }
        }
        prop_assert!((r.totals.excess_g - expected).abs() <= 1e-9 * expected.max(1.0));
    }
}
