use problem_replay::verify::chi_square_p_value;
use problem_replay::{MaxHeap, Priority, ProblemId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
enum Op {
    Insert(Option<u8>),
    Extract,
    Delete(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        // None is +inf
        prop::option::weighted(0.9, 0u8..=16).prop_map(Op::Insert),
        Just(Op::Extract),
        any::<usize>().prop_map(Op::Delete),
    ]
}

fn key(k: Option<u8>) -> Priority {
    k.map_or(Priority::Infinite, |v| Priority::Finite(v as f64 / 64.0))
}

proptest! {
    #[test]
    fn matches_linear_scan_model(ops in prop::collection::vec(op(), 1..300)) {
        let mut heap = MaxHeap::new();
        let mut model: Vec<(ProblemId, Priority)> = vec![];
        for (n, op) in ops.into_iter().enumerate() {
            match op {
                Op::Insert(k) => {
                    let id = ProblemId(n as u32);
                    heap.insert(id, key(k)).unwrap();
                    model.push((id, key(k)));
                }
                Op::Extract => {
                    let want = model.iter().map(|e| e.1).max();
                    let got = heap.extract_max().ok();
                    prop_assert_eq!(got.map(|g| g.1), want);
                    if let Some((id, _)) = got {
                        model.retain(|e| e.0 != id);
                    }
                }
                Op::Delete(i) if !model.is_empty() => {
                    let (id, pri) = model.swap_remove(i % model.len());
                    prop_assert_eq!(heap.delete(id).unwrap(), pri);
                    prop_assert!(!heap.contains(id));
                }
                Op::Delete(_) => {}
            }
            prop_assert!(heap.validate().is_ok());
            prop_assert_eq!(heap.len(), model.len());
        }
    }

    #[test]
    fn heapify_drains_in_sorted_order(keys in prop::collection::vec(prop::option::weighted(0.95, 0u8..=16), 0..200)) {
        let mut heap = MaxHeap::heapify(keys.iter().enumerate().map(|(i, &k)| (ProblemId::from(i), key(k)))).unwrap();
        let mut want: Vec<Priority> = keys.iter().map(|&k| key(k)).collect();
        want.sort_by(|a, b| b.cmp(a));
        let got: Vec<Priority> = std::iter::from_fn(|| heap.extract_max().ok().map(|e| e.1)).collect();
        prop_assert_eq!(got, want);
    }
}

#[test]
fn heapify_hundred_thousand() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let keys: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>() * 0.25).collect();
    let mut heap = MaxHeap::heapify(
        keys.iter()
            .enumerate()
            .map(|(i, &k)| (ProblemId::from(i), Priority::Finite(k))),
    )
    .unwrap();
    heap.validate().unwrap();
    for i in (0..50_000).step_by(7) {
        heap.delete(ProblemId(i)).unwrap();
    }
    heap.validate().unwrap();
    let mut last = Priority::Infinite;
    while let Ok((_, p)) = heap.extract_max() {
        assert!(p <= last);
        last = p;
    }
}

#[test]
fn uniform_sampling_ignores_priority() {
    let heap = MaxHeap::heapify([
        (ProblemId(0), Priority::Infinite),
        (ProblemId(1), Priority::Finite(0.25)),
        (ProblemId(2), Priority::Finite(0.0)),
        (ProblemId(3), Priority::Finite(0.1)),
    ])
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts = [0u64; 4];
    for _ in 0..100_000 {
        counts[heap.sample_uniform(&mut rng).unwrap().index()] += 1;
    }
    assert!(chi_square_p_value(&counts, &[0.25; 4]) > 1e-3, "{counts:?}");
}

#[test]
fn empty_heap_errors() {
    let mut heap = MaxHeap::new();
    assert!(heap.extract_max().is_err());
    assert!(heap.delete(ProblemId(0)).is_err());
    assert!(heap
        .sample_uniform(&mut ChaCha8Rng::seed_from_u64(0))
        .is_err());
    heap.insert(ProblemId(0), Priority::Finite(0.1)).unwrap();
    assert!(heap.insert(ProblemId(0), Priority::Finite(0.2)).is_err());
}
