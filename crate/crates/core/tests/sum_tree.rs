use problem_replay::verify::chi_square_p_value;
use problem_replay::{ProblemId, SumTree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn draws_follow_tempered_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for exponent in [0.5, 1.0, 2.0] {
        let omegas: Vec<f64> = (0..25)
            .map(|i| {
                if i % 6 == 0 {
                    0.0
                } else {
                    rng.random::<f64>() * 0.25
                }
            })
            .collect();
        let mut tree = SumTree::new(8, exponent);
        for (i, &w) in omegas.iter().enumerate() {
            tree.update(ProblemId::from(i), w).unwrap();
        }
        let mass: Vec<f64> = omegas
            .iter()
            .map(|&w| if w == 0.0 { 0.0 } else { w.powf(exponent) })
            .collect();
        let total: f64 = mass.iter().sum();
        let probs: Vec<f64> = mass.iter().map(|m| m / total).collect();
        let mut counts = vec![0u64; omegas.len()];
        for _ in 0..100_000 {
            counts[tree.sample(&mut rng).unwrap().index()] += 1;
        }
        let p = chi_square_p_value(&counts, &probs);
        assert!(p > 1e-3, "exponent {exponent}: p = {p}");
    }
}

#[test]
fn root_does_not_drift_over_a_million_updates() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let n = 1000;
    let mut tree = SumTree::new(n, 1.0);
    for i in 0..n {
        tree.update(ProblemId::from(i), 0.2).unwrap();
    }
    for _ in 0..1_000_000 {
        let id = ProblemId(rng.random_range(0..n as u32));
        tree.update(id, rng.random::<f64>() * 0.25).unwrap();
    }
    let before = tree.total();
    let fresh: f64 = tree.leaves().iter().map(|l| l.1).sum();
    tree.rebuild();
    // ancestors are recomputed from children, so a rebuild changes nothing
    assert_eq!(tree.total(), before);
    assert!(
        (before - fresh).abs() <= 1e-9 * fresh,
        "{before} vs {fresh}"
    );
    tree.validate().unwrap();
}

#[test]
fn all_zero_mass_cannot_sample() {
    let mut tree = SumTree::new(4, 1.0);
    tree.update(ProblemId(0), 0.0).unwrap();
    tree.update(ProblemId(1), 0.0).unwrap();
    assert!(tree.sample(&mut ChaCha8Rng::seed_from_u64(0)).is_err());
    assert!(tree
        .sample_uniform(&mut ChaCha8Rng::seed_from_u64(0))
        .is_ok());
}

proptest! {
    #[test]
    fn total_tracks_live_leaves(ops in prop::collection::vec((0u32..40, prop::option::of(0.0f64..0.25)), 1..400)) {
        let mut tree = SumTree::new(2, 1.0);
        let mut model = std::collections::BTreeMap::new();
        for (id, w) in ops {
            let id = ProblemId(id);
            match w {
                Some(w) => {
                    tree.update(id, w).unwrap();
                    model.insert(id, w);
                }
                None => {
                    prop_assert_eq!(tree.remove(id).is_ok(), model.remove(&id).is_some());
                }
            }
            prop_assert!(tree.validate().is_ok());
            prop_assert_eq!(tree.len(), model.len());
            let want: f64 = model.values().sum();
            prop_assert!((tree.total() - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn update_is_idempotent(ws in prop::collection::vec(0.0f64..0.25, 1..50), pick in any::<usize>(), w in 0.0f64..0.25) {
        let mut tree = SumTree::new(4, 1.0);
        for (i, &x) in ws.iter().enumerate() {
            tree.update(ProblemId::from(i), x).unwrap();
        }
        let id = ProblemId::from(pick % ws.len());
        tree.update(id, w).unwrap();
        let once = tree.clone();
        tree.update(id, w).unwrap();
        prop_assert_eq!(tree.total().to_bits(), once.total().to_bits());
        prop_assert_eq!(tree.leaves(), once.leaves());
    }
}
