use loadpath_core::geom::{Point3, Toolpath, ToolpathBuilder};
use loadpath_core::motion::{
    compile, emit_cpl, parse_cpl, program_stats, Command, CompileParams, LayerMark, MotionProgram, ProgramMeta,
};
use proptest::prelude::*;

fn segment_distance3(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b - a;
    let l2 = ab.dot(ab);
    if l2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / l2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

fn polyline_distance(p: Point3, line: &[Point3]) -> f64 {
    line.windows(2).map(|w| segment_distance3(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

fn coord() -> impl Strategy<Value = f64> {
    -200.0..200.0f64
}

fn toolpath() -> impl Strategy<Value = Toolpath> {
    let point = (coord(), coord(), 0.0..5.0f64);
    let polyline = prop::collection::vec(point, 2..12);
    prop::collection::vec((polyline, 0usize..3), 1..6).prop_map(|lines| {
        let mut b = ToolpathBuilder::new(1.0);
        let mut layer = 0;
        for (pts, bump) in lines {
            layer += bump;
            let z = layer as f64;
            let pts: Vec<Point3> = pts.into_iter().map(|(x, y, dz)| Point3::new(x, y, z + dz * 0.1)).collect();
            b.extrude(&pts, layer);
        }
        b.finish()
    })
}

fn params(max_segment: f64) -> CompileParams {
    CompileParams { max_segment, ..CompileParams::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn compile_preserves_extruded_geometry(tp in toolpath(), max_segment in 0.5..80.0f64) {
        let prog = compile(&tp, &params(max_segment)).unwrap();
        prog.validate().unwrap();
        let compiled = prog.extrude_polylines();
        let source: Vec<&[Point3]> = tp.extrude_segments().map(|s| s.points.as_slice()).collect();
        prop_assert_eq!(compiled.len(), source.len());
        for (c, s) in compiled.iter().zip(&source) {
            prop_assert!(c[0].dist(s[0]) < 1e-6);
            prop_assert!(c[c.len() - 1].dist(s[s.len() - 1]) < 1e-6);
            for &p in s.iter() {
                prop_assert!(polyline_distance(p, c) < 1e-6);
            }
            for &p in c {
                prop_assert!(polyline_distance(p, s) < 1e-6);
            }
            for w in c.windows(2) {
                prop_assert!(w[0].dist(w[1]) <= max_segment + 1e-9);
            }
        }
        prop_assert_eq!(prog.ext_on_count(), source.len());
        prop_assert_eq!(prog.ext_off_count(), source.len());
    }

    #[test]
    fn extrude_length_ignores_splitting(tp in toolpath(), a in 0.3..100.0f64, b in 0.3..100.0f64) {
        let la = program_stats(&compile(&tp, &params(a)).unwrap()).extrude_length;
        let lb = program_stats(&compile(&tp, &params(b)).unwrap()).extrude_length;
        prop_assert!((la - lb).abs() < 1e-6);
        prop_assert!((la - tp.extrude_length()).abs() < 1e-6);
    }

    #[test]
    fn stats_identities(tp in toolpath(), m in 1.0..50.0f64) {
        let prog = compile(&tp, &params(m)).unwrap();
        let s = program_stats(&prog);
        prop_assert!((s.total_length - (s.extrude_length + s.travel_length)).abs() < 1e-9);
        prop_assert!((s.mean_segment - s.total_length / s.move_count as f64).abs() < 1e-12);
        let layer_sum: f64 = s.layer_durations.iter().sum();
        prop_assert!((layer_sum - s.duration).abs() < 1e-9 * s.duration.max(1.0));
    }
}

/// Random valid program. With `quantized`, every number already sits on
/// the six-decimal grid.
fn program(quantized: bool) -> impl Strategy<Value = MotionProgram> {
    let q = move |v: f64| if quantized { (v * 1e6).round() / 1e6 } else { v };
    prop::collection::vec((0u8..10, coord(), coord(), coord(), 0.5..100.0f64, any::<bool>()), 1..60).prop_map(
        move |ops| {
            let mut commands = Vec::new();
            let mut on = false;
            let mut pos = Point3::default();
            let mut layer_marks = Vec::new();
            for (op, x, y, z, v, flag) in ops {
                match op {
                    0 => {
                        commands.push(Command::ExtOn { flow: q(v / 10.0) });
                        on = true;
                    }
                    1 => {
                        commands.push(Command::ExtOff);
                        on = false;
                    }
                    2 => commands.push(Command::Dwell { seconds: q(v / 20.0) }),
                    _ => {
                        let target = Point3::new(q(x), q(y), q(z));
                        if target.dist(pos) > 1e-3 {
                            commands.push(Command::Move { target, speed: q(v), extruding: on && flag });
                            pos = target;
                        }
                    }
                }
                if flag && op == 3 {
                    layer_marks.push(LayerMark { command: commands.len() - 1, layer: layer_marks.len() });
                }
            }
            layer_marks.dedup_by_key(|m| m.command);
            if layer_marks.last().is_some_and(|m| m.command >= commands.len()) {
                layer_marks.pop();
            }
            MotionProgram {
                commands,
                meta: ProgramMeta { source_hash: Some("00ff".into()), params: None, layer_marks },
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn cpl_emit_parse_emit_is_byte_identical(p in program(false)) {
        p.validate().unwrap();
        let once = emit_cpl(&p);
        let twice = emit_cpl(&parse_cpl(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn cpl_parse_inverts_emit_on_grid(p in program(true)) {
        prop_assert_eq!(parse_cpl(&emit_cpl(&p)).unwrap(), p);
    }
}

#[test]
fn balancing_tower_density_duration() {
    // A zig-zag wall whose moves average about 12.3 mm at the observed
    // 30.07 mm/s.
    let mut b = ToolpathBuilder::new(2.0);
    for layer in 0..40 {
        let z = 1.0 + 2.0 * layer as f64;
        let mut pts: Vec<Point3> = (0..=100).map(|i| Point3::new(12.3 * i as f64, if i % 2 == 0 { 0.0 } else { 1.0 }, z)).collect();
        if layer % 2 == 1 {
            pts.reverse();
        }
        b.extrude(&pts, layer);
    }
    let tp = b.finish();
    let p = CompileParams { extrude_speed: 30.07, travel_speed: 30.07, ext_lead_dwell: 0.0, max_segment: 20.0, ..CompileParams::default() };
    let s = program_stats(&compile(&tp, &p).unwrap());
    assert!((s.mean_segment - 12.3).abs() < 0.5, "{}", s.mean_segment);
    assert!((s.duration - s.total_length / 30.07).abs() / s.duration < 0.01);
}
