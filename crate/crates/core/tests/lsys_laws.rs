use loadpath_core::geom::polyline_length;
use loadpath_core::lsys::{
    expand, parse_grammar, stack_generations, turtle_path, turtle_trace, Grammar, Pose, TurtleConfig,
};
use proptest::prelude::*;
use std::collections::HashMap;

/// One parallel rewriting pass over `word`, written independently of the
/// library's expansion loop.
fn rewrite_once(rules: &HashMap<char, String>, word: &str) -> String {
    word.chars()
        .flat_map(|c| rules.get(&c).cloned().unwrap_or_else(|| c.to_string()).chars().collect::<Vec<_>>())
        .collect()
}

#[test]
fn algae_lengths_follow_fibonacci() {
    let g = parse_grammar("axiom A\nrule A -> AB\nrule B -> A").unwrap();
    let lengths: Vec<usize> = (0..=5).map(|n| expand(&g, n).unwrap().len()).collect();
    assert_eq!(lengths, vec![1, 2, 3, 5, 8, 13]);
    assert_eq!(expand(&g, 3).unwrap(), "ABAAB");
}

#[test]
fn branch_trace_by_hand() {
    let cfg = TurtleConfig { start: Pose::default(), angle_deg: 90.0, step_mm: 10.0 };
    let lines = turtle_path("F[+F]F", &cfg).unwrap();
    let lens: Vec<f64> = lines.iter().map(|l| polyline_length(l)).collect();
    assert_eq!(lens, vec![20.0, 10.0]);
}

#[test]
fn generation_zero_stack_has_no_travel() {
    let g = parse_grammar("axiom F+F+F+F\nrule F -> FF\nangle 90\nstep 5").unwrap();
    let tp = stack_generations(&g, &[0], &TurtleConfig::for_grammar(&g), 2.0).unwrap();
    assert_eq!(tp.travel_count(), 0);
    assert_eq!(tp.extrude_length(), 20.0);
    assert!(tp.segments[0].points.iter().all(|p| p.z == 0.0));
}

#[test]
fn stacked_length_is_sum_of_generations() {
    let g = parse_grammar("axiom F+F+F+F\nrule F -> F+F-F-F+F\nangle 90\nstep 3").unwrap();
    let cfg = TurtleConfig::for_grammar(&g);
    let gens = [0, 1, 2, 1];
    let tp = stack_generations(&g, &gens, &cfg, 1.5).unwrap();
    let expected: f64 = gens
        .iter()
        .map(|&n| turtle_path(&expand(&g, n).unwrap(), &cfg).unwrap().iter().map(|l| polyline_length(l)).sum::<f64>())
        .sum();
    assert!((tp.extrude_length() - expected).abs() <= 1e-9 * expected);
    tp.validate().unwrap();
}

fn grammar() -> impl Strategy<Value = Grammar> {
    let sym = prop::sample::select(vec!['A', 'B', 'C', 'F', 'G', 'f', '+', '-', '[', ']']);
    let lhs = prop::sample::select(vec!['A', 'B', 'C', 'F', 'G']);
    (
        prop::collection::vec(sym.clone(), 1..6),
        prop::collection::btree_map(lhs, prop::collection::vec(sym, 1..=6), 0..=4),
    )
        .prop_map(|(axiom, rules)| Grammar {
            axiom: axiom.into_iter().collect(),
            rules: rules.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect(),
            angle_deg: 90.0,
            step_mm: 10.0,
        })
}

fn orthonormal(p: &Pose) -> bool {
    p.is_orthonormal(1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expansion_is_repeated_parallel_rewrite(g in grammar(), n in 0usize..=6) {
        let rules: HashMap<char, String> = g.rules.iter().map(|(k, v)| (*k, v.clone())).collect();
        let here = expand(&g, n).unwrap();
        let next = expand(&g, n + 1).unwrap();
        prop_assert_eq!(next, rewrite_once(&rules, &here));
    }

    #[test]
    fn frame_stays_orthonormal(
        word in prop::collection::vec(prop::sample::select(vec!['+', '-', '&', '^', '\\', '/', 'F']), 1..4000),
        angle in 0.1..179.0f64,
    ) {
        let text: String = word.into_iter().collect();
        let cfg = TurtleConfig { start: Pose::default(), angle_deg: angle, step_mm: 1.0 };
        let (_, pose) = turtle_trace(&text, &cfg).unwrap();
        prop_assert!(orthonormal(&pose));
    }

    #[test]
    fn yaw_only_words_stay_planar(
        word in prop::collection::vec(prop::sample::select(vec!['+', '-', 'F', 'G', 'f', 'A']), 1..300),
        angle in 0.1..179.0f64,
        z in -100.0..100.0f64,
    ) {
        let text: String = word.into_iter().collect();
        let mut start = Pose::default();
        start.position.z = z;
        let cfg = TurtleConfig { start, angle_deg: angle, step_mm: 7.0 };
        for line in turtle_path(&text, &cfg).unwrap() {
            prop_assert!(line.iter().all(|p| p.z == z));
        }
    }

    #[test]
    fn balanced_brackets_never_error(depth in 1usize..30) {
        let text = format!("{}F{}", "[+F".repeat(depth), "]".repeat(depth));
        let cfg = TurtleConfig { start: Pose::default(), angle_deg: 30.0, step_mm: 1.0 };
        prop_assert!(turtle_path(&text, &cfg).is_ok());
        let over = format!("{}]", text);
        prop_assert!(turtle_path(&over, &cfg).is_err());
        let under = format!("[{}", text);
        prop_assert!(turtle_path(&under, &cfg).is_err());
    }
}

#[test]
fn long_rotation_runs_are_renormalized() {
    let text = "+&\\".repeat(100_000);
    let cfg = TurtleConfig { start: Pose::default(), angle_deg: 37.0, step_mm: 1.0 };
    let (_, pose) = turtle_trace(&text, &cfg).unwrap();
    assert!(orthonormal(&pose));
}
