mod support {
    pub mod interleave;
}

use support::interleave::run_trial;

#[test]
fn ten_thousand_interleavings_deliver_exactly_once() {
    let mut completed = 0;
    let mut stopped = 0;
    for seed in 0..10_000u64 {
        match run_trial(seed) {
            Ok(t) if t.stopped => stopped += 1,
            Ok(t) => {
                assert_eq!(t.delivered, t.commands);
                completed += 1;
            }
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    // Both terminal routes are exercised.
    assert!(completed > 1000 && stopped > 1000, "completed {completed}, stopped {stopped}");
}
