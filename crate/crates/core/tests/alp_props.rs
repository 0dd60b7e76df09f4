mod common;

use metaacl::{AlpHistory, EpisodeOutcome, RewardRange, TaskParams};
use proptest::prelude::*;

fn outcome(p: &[f64], r: f64) -> EpisodeOutcome {
    EpisodeOutcome::new(TaskParams::new(p.to_vec()).unwrap(), r)
}

#[test]
fn alp_matches_linear_scan_oracle() {
    common::check_alp_oracle(1000).unwrap();
}

#[test]
fn alp_uses_the_closer_of_two_entries() {
    let mut h = AlpHistory::new(2, 250, RewardRange::TOY);
    h.record(&outcome(&[0.6, 0.5], 80.0));
    h.record(&outcome(&[0.2, 0.5], 30.0));
    // distances 0.1 and 0.5 from the query
    assert_eq!(h.compute_alp(&outcome(&[0.1, 0.5], 50.0)), 0.2);
}

proptest! {
    #[test]
    fn window_replays_the_last_records(
        records in prop::collection::vec(((0.0f64..=1.0, 0.0f64..=1.0), 0.0f64..100.0), 1..400),
        capacity in 1usize..300,
    ) {
        let mut h = AlpHistory::new(2, capacity, RewardRange::TOY);
        let mut replay = Vec::new();
        for ((x, y), r) in &records {
            let alp = h.record(&outcome(&[*x, *y], *r));
            prop_assert!((0.0..=1.0).contains(&alp));
            replay.push((vec![*x, *y], alp));
        }
        let expected = &replay[replay.len().saturating_sub(capacity)..];
        let window: Vec<_> = h.window().map(|(p, a)| (p.coords().to_vec(), *a)).collect();
        prop_assert_eq!(window.as_slice(), expected);
        prop_assert_eq!(h.len(), records.len());
    }
}
