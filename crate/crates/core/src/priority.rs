//! Priority score, group advantages and success-rate smoothing.
//!
//! For a group of `N` binary rewards with success rate `p`, each response's
//! advantage is `r_i - p`. The advantages sum to zero and their mean square
//! is `p(1 - p)`, which is used directly as the problem's priority: it is
//! largest at `p = 1/2` and vanishes for groups that are all correct or all
//! wrong.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A priority key. `Infinite` compares above every finite value and equal to
/// itself.
#[derive(Clone, Copy, Debug)]
pub enum Priority {
    Finite(f64),
    Infinite,
}

impl Priority {
    /// Validated finite priority: rejects NaN, negative and infinite values.
    pub fn finite(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            // normalise -0.0 so equal keys are bit-identical
            Ok(Priority::Finite(value + 0.0))
        } else {
            Err(Error::OutOfRange {
                what: "priority",
                value,
            })
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Priority::Infinite)
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Priority::Finite(v) => Some(v),
            Priority::Infinite => None,
        }
    }

    /// `f64::INFINITY` for the infinite key.
    pub fn to_f64(self) -> f64 {
        self.as_finite().unwrap_or(f64::INFINITY)
    }
}

impl PartialEq for Priority {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Priority {}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Priority::Infinite, Priority::Infinite) => Ordering::Equal,
            (Priority::Infinite, Priority::Finite(_)) => Ordering::Greater,
            (Priority::Finite(_), Priority::Infinite) => Ordering::Less,
            (Priority::Finite(a), Priority::Finite(b)) => a.total_cmp(b),
        }
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Priority::Finite(v) => write!(f, "{v:?}"),
            Priority::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Priority {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinite" | "infinity" => Ok(Priority::Infinite),
            t => {
                let v: f64 = t.parse().map_err(|_| format!("invalid priority {s:?}"))?;
                Priority::finite(v).map_err(|e| e.to_string())
            }
        }
    }
}

fn check_rewards(rewards: &[u8]) -> Result<()> {
    if rewards.is_empty() {
        return Err(Error::EmptyRewards);
    }
    if let Some(&bad) = rewards.iter().find(|&&r| r > 1) {
        return Err(Error::InvalidReward(bad));
    }
    Ok(())
}

/// Group success rate and per-response advantages `r_i - p`.
pub fn group_advantages(rewards: &[u8]) -> Result<(f64, Vec<f64>)> {
    check_rewards(rewards)?;
    let k = rewards.iter().filter(|&&r| r == 1).count();
    // k/N as a single correctly rounded division
    let p = k as f64 / rewards.len() as f64;
    let advantages = rewards.iter().map(|&r| f64::from(r) - p).collect();
    Ok((p, advantages))
}

/// `(1/N) Σ A_i²`, which equals `p(1 - p)`.
pub fn mean_squared_advantage(rewards: &[u8]) -> Result<f64> {
    let (_, advantages) = group_advantages(rewards)?;
    let sum_sq: f64 = advantages.iter().map(|a| a * a).sum();
    Ok(sum_sq / advantages.len() as f64)
}

/// `p̄(1 - p̄)`, plus `bias` when `p̄ ≥ 1/2`.
///
/// The bias is meant to be smaller than the gap between adjacent distinct
/// scores on the `k/N` grid, so it only orders mirror pairs `k` and `N - k`
/// in favour of the higher success rate.
pub fn priority_score(p_bar: f64, bias: f64) -> Result<Priority> {
    if !(0.0..=1.0).contains(&p_bar) {
        return Err(Error::OutOfRange {
            what: "success rate",
            value: p_bar,
        });
    }
    if !(bias.is_finite() && bias >= 0.0) {
        return Err(Error::OutOfRange {
            what: "bias epsilon",
            value: bias,
        });
    }
    let base = p_bar * (1.0 - p_bar);
    let bias = if p_bar >= 0.5 { bias } else { 0.0 };
    Priority::finite(base + bias)
}

/// Exponential moving average of the success rate.
///
/// `alpha` weights the previous estimate: `p̄ ← α·p̄ + (1 − α)·p`, so larger
/// `alpha` smooths more. The first observation seeds the average.
pub fn ema_update(ema_p: Option<f64>, observed_p: f64, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::OutOfRange {
            what: "ema alpha",
            value: alpha,
        });
    }
    if !(0.0..=1.0).contains(&observed_p) {
        return Err(Error::OutOfRange {
            what: "success rate",
            value: observed_p,
        });
    }
    match ema_p {
        None => Ok(observed_p),
        Some(prev) => {
            let next = alpha * prev + (1.0 - alpha) * observed_p;
            // rounding can step just outside the hull of the two inputs
            Ok(next.clamp(prev.min(observed_p), prev.max(observed_p)))
        }
    }
}

/// Smallest positive gap between distinct values of `k(N−k)/N²` for
/// `k = 0..=N`, or `None` when every value is equal (`N = 1`).
pub fn min_priority_gap(group_size: u32) -> Option<f64> {
    let n = u64::from(group_size);
    // work in integer numerators over N² so the gap is exact
    let mut vals: Vec<u64> = (0..=n).map(|k| k * (n - k)).collect();
    vals.sort_unstable();
    vals.dedup();
    vals.windows(2)
        .map(|w| w[1] - w[0])
        .min()
        .map(|g| g as f64 / (n * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: u32) -> Vec<f64> {
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }

    #[test]
    fn advantages_all_correct() {
        let (p, adv) = group_advantages(&[1; 8]).unwrap();
        assert_eq!(p, 1.0);
        assert!(adv.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn advantages_one_of_four() {
        let rewards = [1u8, 0, 0, 0];
        // oracle: mean then subtract
        let mean = rewards.iter().map(|&r| r as f64).sum::<f64>() / 4.0;
        let expect: Vec<f64> = rewards.iter().map(|&r| r as f64 - mean).collect();
        let (p, adv) = group_advantages(&rewards).unwrap();
        assert_eq!(p, 0.25);
        assert_eq!(adv, vec![0.75, -0.25, -0.25, -0.25]);
        assert_eq!(adv, expect);
    }

    #[test]
    fn rejects_empty_and_non_binary() {
        assert!(matches!(group_advantages(&[]), Err(Error::EmptyRewards)));
        assert!(matches!(
            mean_squared_advantage(&[]),
            Err(Error::EmptyRewards)
        ));
        assert!(matches!(
            group_advantages(&[0, 2]),
            Err(Error::InvalidReward(2))
        ));
    }

    #[test]
    fn msa_examples() {
        assert_eq!(mean_squared_advantage(&[1, 1, 0, 0]).unwrap(), 0.25);
        assert_eq!(mean_squared_advantage(&[0; 8]).unwrap(), 0.0);
    }

    #[test]
    fn msa_matches_closed_form_exhaustive() {
        for n in 1..=10u32 {
            for bits in 0u32..(1 << n) {
                let rewards: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
                let (p, adv) = group_advantages(&rewards).unwrap();
                let msa = mean_squared_advantage(&rewards).unwrap();
                assert!((msa - p * (1.0 - p)).abs() < 1e-12, "n={n} bits={bits:b}");
                assert!(adv.iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn priority_examples() {
        assert_eq!(priority_score(0.75, 0.0).unwrap(), Priority::Finite(0.1875));
        assert_eq!(
            priority_score(0.25, 1e-4).unwrap(),
            Priority::Finite(0.1875)
        );
        let hi = priority_score(0.75, 1e-4).unwrap().to_f64();
        assert!((hi - 0.1876).abs() < 1e-15);
        let solved = priority_score(1.0, 1e-4).unwrap().to_f64();
        assert!((solved - 1e-4).abs() < 1e-18);
        // bias applies at exactly one half
        assert_eq!(
            priority_score(0.5, 1e-4).unwrap(),
            Priority::Finite(0.25 + 1e-4)
        );
    }

    #[test]
    fn priority_rejects_out_of_range() {
        assert!(priority_score(-0.1, 0.0).is_err());
        assert!(priority_score(1.1, 0.0).is_err());
        assert!(priority_score(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn symmetric_without_bias() {
        for p in grid(8) {
            assert_eq!(
                priority_score(p, 0.0).unwrap(),
                priority_score(1.0 - p, 0.0).unwrap()
            );
        }
    }

    #[test]
    fn bias_only_reorders_mirror_pairs() {
        let g = grid(8);
        let rank = |bias: f64| {
            let mut ks: Vec<usize> = (0..=8).collect();
            ks.sort_by(|&a, &b| {
                priority_score(g[a], bias)
                    .unwrap()
                    .cmp(&priority_score(g[b], bias).unwrap())
                    .then(a.cmp(&b))
            });
            ks
        };
        let plain = rank(0.0);
        let biased = rank(1e-4);
        // mirror class of k is min(k, 8-k)
        let class = |k: usize| k.min(8 - k);
        let plain_classes: Vec<usize> = plain.iter().map(|&k| class(k)).collect();
        let biased_classes: Vec<usize> = biased.iter().map(|&k| class(k)).collect();
        assert_eq!(plain_classes, biased_classes);
        let pos = |v: &[usize], k: usize| v.iter().position(|&x| x == k).unwrap();
        for k in 0..4 {
            assert!(pos(&biased, 8 - k) > pos(&biased, k), "k={k}");
        }
    }

    #[test]
    fn maximum_at_one_half() {
        for n in (2..=16u32).step_by(2) {
            for bias in [0.0, 1e-4] {
                let best = (0..=n)
                    .max_by(|&a, &b| {
                        priority_score(a as f64 / n as f64, bias)
                            .unwrap()
                            .cmp(&priority_score(b as f64 / n as f64, bias).unwrap())
                    })
                    .unwrap();
                assert_eq!(best, n / 2);
            }
        }
    }

    #[test]
    fn ema_examples() {
        assert_eq!(ema_update(None, 0.5, 0.8).unwrap(), 0.5);
        assert_eq!(ema_update(Some(0.5), 0.5, 0.8).unwrap(), 0.5);
        let oracle = |prev: f64, obs: f64| 0.8 * prev + 0.2 * obs;
        assert_eq!(ema_update(Some(1.0), 0.0, 0.8).unwrap(), oracle(1.0, 0.0));
        assert!((ema_update(Some(1.0), 0.0, 0.8).unwrap() - 0.8).abs() < 1e-15);
        assert!(ema_update(Some(0.5), 0.5, 1.0).is_err());
        assert!(ema_update(Some(0.5), 1.5, 0.5).is_err());
    }

    #[test]
    fn gap_for_common_group_sizes() {
        assert_eq!(min_priority_gap(8), Some(1.0 / 64.0));
        assert_eq!(min_priority_gap(2), Some(0.25));
        assert_eq!(min_priority_gap(1), None);
    }

    #[test]
    fn infinite_ordering() {
        assert!(Priority::Infinite > Priority::Finite(1e300));
        assert_eq!(Priority::Infinite, Priority::Infinite);
        assert_eq!("inf".parse::<Priority>().unwrap(), Priority::Infinite);
        assert_eq!("0.2".parse::<Priority>().unwrap(), Priority::Finite(0.2));
        assert!("-1".parse::<Priority>().is_err());
    }

    proptest! {
        #[test]
        fn ema_stays_in_hull(prev in 0.0f64..=1.0, obs in 0.0f64..=1.0, alpha in 0.0f64..0.999) {
            let next = ema_update(Some(prev), obs, alpha).unwrap();
            prop_assert!(next >= prev.min(obs) && next <= prev.max(obs));
        }

        #[test]
        fn priority_bounded(p in 0.0f64..=1.0, bias in 0.0f64..0.01) {
            let w = priority_score(p, bias).unwrap().to_f64();
            prop_assert!((0.0..=0.25 + bias).contains(&w));
        }
    }
}
