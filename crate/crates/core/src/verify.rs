//! Self-check suites run by `prioreplay verify`.
//!
//! Each suite compares the library against a brute-force oracle: exhaustive
//! reward enumeration for the advantage identities, sorting and linear scans
//! for the heap, and goodness-of-fit tests for the samplers.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::max_heap::MaxHeap;
use crate::pools::{PoolKind, RecencyPool};
use crate::priority::{group_advantages, mean_squared_advantage, priority_score, Priority};
use crate::sum_tree::SumTree;
use crate::types::ProblemId;

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

/// Upper-tail p-value of Pearson's chi-square statistic for `observed`
/// counts against `probs`. Cells with zero probability must be empty; they
/// contribute no degrees of freedom.
pub fn chi_square_p_value(observed: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            if o > 0 {
                return 0.0;
            }
            continue;
        }
        let e = p * total as f64;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    if cells < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

fn run(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> SuiteResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    SuiteResult {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

/// Zero-sum advantages and `mean square = p(1 − p)` over every reward vector
/// for `N = 1..=10`, using `msa` as the mean-squared-advantage routine.
pub fn advantage_identity_suite(msa: fn(&[u8]) -> f64) -> SuiteResult {
    run("advantage identities", || {
        let mut checked = 0usize;
        for n in 1..=10u32 {
            for bits in 0u32..(1 << n) {
                let rewards: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
                let k = bits.count_ones() as f64;
                let p = k / n as f64;
                let (gp, adv) = group_advantages(&rewards).map_err(|e| e.to_string())?;
                if gp != p {
                    return Err(format!("N={n} k={k}: p = {gp}, expected {p}"));
                }
                let sum: f64 = adv.iter().sum();
                if sum.abs() > 1e-12 {
                    return Err(format!("N={n} rewards={rewards:?}: Σ A = {sum}"));
                }
                let got = msa(&rewards);
                if (got - p * (1.0 - p)).abs() > 1e-12 {
                    return Err(format!(
                        "N={n} rewards={rewards:?}: mean square {got} != p(1-p) {}",
                        p * (1.0 - p)
                    ));
                }
                checked += 1;
            }
        }
        Ok(format!("{checked} reward vectors"))
    })
}

pub fn priority_suite() -> SuiteResult {
    run("priority formula", || {
        let score = |p: f64, b: f64| priority_score(p, b).map_err(|e| e.to_string());
        if score(0.75, 0.0)? != Priority::Finite(0.1875) {
            return Err("ω(0.75) != 0.1875".into());
        }
        let grid: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        let mut best = 0;
        for k in 0..=8 {
            if score(grid[k], 0.0)? > score(grid[best], 0.0)? {
                best = k;
            }
        }
        if best != 4 || score(0.5, 0.0)? != Priority::Finite(0.25) {
            return Err(format!("maximum at k={best}"));
        }
        if score(grid[6], 1e-4)? <= score(grid[2], 1e-4)? {
            return Err("bias does not favour k=6 over k=2".into());
        }
        for a in 0..=8usize {
            for b in 0..=8usize {
                if a + b == 8 || a == b {
                    continue;
                }
                let plain = score(grid[a], 0.0)?.cmp(&score(grid[b], 0.0)?);
                let biased = score(grid[a], 1e-4)?.cmp(&score(grid[b], 1e-4)?);
                if plain != biased {
                    return Err(format!("bias reorders k={a} vs k={b}"));
                }
            }
        }
        Ok("grid k/8 checked".into())
    })
}

/// Random insert / extract / delete sequences against a linear-scan model.
pub fn heap_model_suite(sequences: usize, length: usize, seed: u64) -> SuiteResult {
    run("max-heap model", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for seq in 0..sequences {
            let mut heap = MaxHeap::new();
            let mut model: Vec<(ProblemId, Priority)> = Vec::new();
            let mut next_id = 0u32;
            for op in 0..length {
                match rng.random_range(0..3) {
                    0 => {
                        let pri = if rng.random_bool(0.05) {
                            Priority::Infinite
                        } else {
                            // coarse grid so ties are common
                            Priority::Finite(rng.random_range(0..20) as f64 / 80.0)
                        };
                        let id = ProblemId(next_id);
                        next_id += 1;
                        heap.insert(id, pri).map_err(|e| e.to_string())?;
                        model.push((id, pri));
                    }
                    1 => {
                        let got = heap.extract_max().ok();
                        let want = model.iter().map(|e| e.1).max();
                        if got.map(|g| g.1) != want {
                            return Err(format!(
                                "seq {seq} op {op}: extract {got:?}, model max {want:?}"
                            ));
                        }
                        if let Some((id, _)) = got {
                            model.retain(|e| e.0 != id);
                        }
                    }
                    _ => {
                        if model.is_empty() {
                            continue;
                        }
                        let (id, pri) = model.swap_remove(rng.random_range(0..model.len()));
                        let got = heap.delete(id).map_err(|e| e.to_string())?;
                        if got != pri {
                            return Err(format!(
                                "seq {seq} op {op}: delete returned {got}, model {pri}"
                            ));
                        }
                    }
                }
                heap.validate()
                    .map_err(|e| format!("seq {seq} op {op}: {e}"))?;
                if heap.len() != model.len() {
                    return Err(format!("seq {seq} op {op}: size mismatch"));
                }
            }
        }
        Ok(format!("{sequences} sequences × {length} ops"))
    })
}

/// Heapify random keys and check the drain order against a sort.
pub fn heap_sort_suite(m: usize, seed: u64) -> SuiteResult {
    run("max-heap sort order", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<(ProblemId, Priority)> = (0..m)
            .map(|i| {
                (
                    ProblemId::from(i),
                    Priority::Finite(rng.random::<f64>() * 0.25),
                )
            })
            .collect();
        let mut sorted: Vec<Priority> = entries.iter().map(|e| e.1).collect();
        sorted.sort_by(|a, b| b.cmp(a));
        let mut heap = MaxHeap::heapify(entries).map_err(|e| e.to_string())?;
        for (i, want) in sorted.iter().enumerate() {
            let (_, got) = heap.extract_max().map_err(|e| e.to_string())?;
            if got != *want {
                return Err(format!("position {i}: got {got}, sorted {want}"));
            }
        }
        Ok(format!("{m} keys"))
    })
}

/// Empirical sum-tree frequencies against `ω_i / Σω` for random leaves.
pub fn sum_tree_suite(configs: usize, draws: usize, seed: u64) -> SuiteResult {
    run("sum-tree proportionality", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 1.0f64;
        for c in 0..configs {
            let leaves = rng.random_range(2..40usize);
            let mut tree = SumTree::new(leaves, 1.0);
            let mut w = Vec::with_capacity(leaves);
            for i in 0..leaves {
                let omega = if rng.random_bool(0.1) {
                    0.0
                } else {
                    rng.random::<f64>() * 0.25
                };
                tree.update(ProblemId::from(i), omega)
                    .map_err(|e| e.to_string())?;
                w.push(omega);
            }
            let total: f64 = w.iter().sum();
            if total == 0.0 {
                continue;
            }
            let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
            let mut counts = vec![0u64; leaves];
            for _ in 0..draws {
                counts[tree.sample(&mut rng).map_err(|e| e.to_string())?.index()] += 1;
            }
            let p = chi_square_p_value(&counts, &probs);
            worst = worst.min(p);
            if p < 1e-3 {
                return Err(format!("config {c}: chi-square p = {p:.2e}"));
            }
        }
        Ok(format!("{configs} configurations, min p = {worst:.3}"))
    })
}

pub fn pool_order_suite(seed: u64) -> SuiteResult {
    run("recency pools", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool = RecencyPool::new(PoolKind::Unsolved);
        let mut oracle: Vec<(u64, ProblemId)> = (0..1000)
            .map(|i| (rng.random_range(0..500u64), ProblemId(i)))
            .collect();
        for &(s, id) in &oracle {
            pool.push(id, s).map_err(|e| e.to_string())?;
        }
        oracle.sort();
        let popped = pool.pop_oldest(1000);
        let want: Vec<ProblemId> = oracle.iter().map(|e| e.1).collect();
        if popped != want {
            return Err("pop order differs from sorted steps".into());
        }
        Ok("1000 entries".into())
    })
}

fn default_msa(rewards: &[u8]) -> f64 {
    mean_squared_advantage(rewards).unwrap_or(f64::NAN)
}

/// Every suite with its default size.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    vec![
        advantage_identity_suite(default_msa),
        priority_suite(),
        heap_model_suite(1000, 200, seed),
        heap_sort_suite(100_000, seed),
        sum_tree_suite(10, 100_000, seed),
        pool_order_suite(seed),
    ]
}
