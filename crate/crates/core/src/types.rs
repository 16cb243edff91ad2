//! Shared domain vocabulary: problem identities, lifecycle states, rollout
//! groups and batch plans.

use std::fmt;
use std::str::FromStr;

use crate::error::Result;
use crate::priority::{group_advantages, Priority};

/// Dense problem index in `[0, M)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProblemId(pub u32);

impl ProblemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ProblemId {
    fn from(i: usize) -> Self {
        ProblemId(u32::try_from(i).expect("problem index exceeds u32"))
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Lifecycle state of a problem.
///
/// The allowed edges are `Unseen -> Active`, `Active -> SolvedPool`,
/// `Active -> UnsolvedPool` and `{SolvedPool, UnsolvedPool} -> Active`.
/// Every evaluation passes through `Active`; a problem whose group is
/// classified into a pool then takes the `Active -> pool` edge in the same
/// report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Unseen,
    Active,
    SolvedPool,
    UnsolvedPool,
}

impl Status {
    pub fn has_edge_to(self, next: Status) -> bool {
        use Status::*;
        matches!(
            (self, next),
            (Unseen, Active)
                | (Active, SolvedPool)
                | (Active, UnsolvedPool)
                | (SolvedPool, Active)
                | (UnsolvedPool, Active)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Unseen => "unseen",
            Status::Active => "active",
            Status::SolvedPool => "solved",
            Status::UnsolvedPool => "unsolved",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unseen" => Ok(Status::Unseen),
            "active" => Ok(Status::Active),
            "solved" => Ok(Status::SolvedPool),
            "unsolved" => Ok(Status::UnsolvedPool),
            _ => Err(format!("unknown status {s:?}")),
        }
    }
}

/// Why a problem was placed in a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reason {
    Prioritized,
    Exploration,
    RetestSolved,
    RetestUnsolved,
}

impl Reason {
    /// Prioritized and exploration entries make up the training batch proper.
    pub fn is_training(self) -> bool {
        matches!(self, Reason::Prioritized | Reason::Exploration)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Prioritized => "prioritized",
            Reason::Exploration => "exploration",
            Reason::RetestSolved => "retest-solved",
            Reason::RetestUnsolved => "retest-unsolved",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Reason {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "prioritized" => Ok(Reason::Prioritized),
            "exploration" => Ok(Reason::Exploration),
            "retest-solved" => Ok(Reason::RetestSolved),
            "retest-unsolved" => Ok(Reason::RetestUnsolved),
            _ => Err(format!("unknown reason {s:?}")),
        }
    }
}

/// Per-problem scheduler state.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemRecord {
    pub id: ProblemId,
    /// Smoothed success rate; `None` until the first evaluation.
    pub ema_p: Option<f64>,
    /// Empirical success rate of the most recent group.
    pub last_raw_p: Option<f64>,
    pub priority: Priority,
    pub status: Status,
    pub last_eval_step: Option<u64>,
    pub times_sampled: u64,
}

impl ProblemRecord {
    pub fn unseen(id: ProblemId, priority: Priority) -> Self {
        ProblemRecord {
            id,
            ema_p: None,
            last_raw_p: None,
            priority,
            status: Status::Unseen,
            last_eval_step: None,
            times_sampled: 0,
        }
    }
}

/// One problem's group of binary rewards with its derived statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutGroup {
    pub problem: ProblemId,
    pub rewards: Vec<u8>,
    pub p: f64,
    pub advantages: Vec<f64>,
}

impl RolloutGroup {
    pub fn new(problem: ProblemId, rewards: Vec<u8>) -> Result<Self> {
        let (p, advantages) = group_advantages(&rewards)?;
        Ok(RolloutGroup {
            problem,
            rewards,
            p,
            advantages,
        })
    }

    pub fn successes(&self) -> usize {
        self.rewards.iter().filter(|&&r| r == 1).count()
    }

    /// All rewards identical: every advantage is zero and the group carries
    /// no gradient signal.
    pub fn is_zero_signal(&self) -> bool {
        let k = self.successes();
        k == 0 || k == self.rewards.len()
    }
}

/// The entries selected for one scheduler step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchPlan {
    pub step: u64,
    pub entries: Vec<(ProblemId, Reason)>,
}

impl BatchPlan {
    pub fn ids(&self) -> impl Iterator<Item = ProblemId> + '_ {
        self.entries.iter().map(|&(id, _)| id)
    }

    pub fn count(&self, reason: Reason) -> usize {
        self.entries.iter().filter(|&&(_, r)| r == reason).count()
    }

    pub fn training_len(&self) -> usize {
        self.entries.iter().filter(|(_, r)| r.is_training()).count()
    }

    pub fn is_exploration(&self) -> bool {
        self.entries.iter().any(|&(_, r)| r == Reason::Exploration)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// What happened to one problem when its results were reported.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub id: ProblemId,
    pub reason: Reason,
    pub from: Status,
    pub to: Status,
    /// Raw group success rate.
    pub p: f64,
    /// Priority after the update.
    pub priority: Priority,
    /// The group carried zero advantage; callers should not apply a
    /// gradient update for it.
    pub skip_gradient: bool,
}
