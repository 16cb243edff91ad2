//! The problem scheduler.
//!
//! Each step alternates [`Scheduler::select_batch`] and
//! [`Scheduler::report_results`]:
//!
//! 1. take the `C` highest-priority problems out of the active structure
//!    (or draw them uniformly on exploration steps, or proportionally under
//!    the sum-tree strategy), plus oldest-first retests from the solved and
//!    unsolved pools every `retest_period` steps;
//! 2. the caller generates `N` rollouts per selected problem;
//! 3. each problem's smoothed success rate and priority are updated;
//! 4. problems whose group was all correct or all wrong go to the solved or
//!    unsolved pool, the rest are reinserted into the active structure.
//!
//! Every problem is at all times in exactly one of the active structure, a
//! pool, or the outstanding batch.

mod checkpoint;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{SchedulerConfig, Strategy};
use crate::error::{Error, Result};
use crate::max_heap::MaxHeap;
use crate::pools::{PoolKind, RecencyPool};
use crate::priority::{ema_update, priority_score, Priority};
use crate::sum_tree::SumTree;
use crate::telemetry::TelemetrySample;
use crate::types::{BatchPlan, ProblemId, ProblemRecord, Reason, RolloutGroup, Status, Transition};

/// Pool classification of a raw group success rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class {
    Solved,
    Unsolved,
    Active,
}

/// `Solved` iff `p ≥ 1 − tol`, `Unsolved` iff `p ≤ tol`, else `Active`.
/// Both band edges are inclusive.
pub fn classify(p_raw: f64, tol: f64) -> Class {
    if p_raw >= 1.0 - tol {
        Class::Solved
    } else if p_raw <= tol {
        Class::Unsolved
    } else {
        Class::Active
    }
}

/// The structure holding trainable problems.
#[derive(Clone, Debug)]
pub enum ActiveSet {
    Heap(MaxHeap),
    Tree(SumTree),
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        match self {
            ActiveSet::Heap(h) => h.len(),
            ActiveSet::Tree(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, id: ProblemId) -> bool {
        match self {
            ActiveSet::Heap(h) => h.contains(id),
            ActiveSet::Tree(t) => t.contains(id),
        }
    }

    fn insert(&mut self, id: ProblemId, priority: Priority) -> Result<()> {
        match self {
            ActiveSet::Heap(h) => h.insert(id, priority),
            ActiveSet::Tree(t) => {
                if t.contains(id) {
                    return Err(Error::DuplicateId(id));
                }
                t.update(id, priority.as_finite().ok_or(Error::InfinitePriority)?)
            }
        }
    }

    fn remove(&mut self, id: ProblemId) -> Result<()> {
        match self {
            ActiveSet::Heap(h) => h.delete(id).map(drop),
            ActiveSet::Tree(t) => t.remove(id).map(drop),
        }
    }

    fn sample_uniform(&self, rng: &mut ChaCha8Rng) -> Result<ProblemId> {
        match self {
            ActiveSet::Heap(h) => h.sample_uniform(rng),
            ActiveSet::Tree(t) => t.sample_uniform(rng),
        }
    }

    /// Next prioritized pick, removed from the structure. `None` once
    /// nothing selectable is left.
    fn take_prioritized(&mut self, rng: &mut ChaCha8Rng) -> Option<ProblemId> {
        match self {
            ActiveSet::Heap(h) => h.extract_max().ok().map(|(id, _)| id),
            ActiveSet::Tree(t) => {
                let id = t.sample(rng).ok()?;
                t.remove(id).expect("sampled id is present");
                Some(id)
            }
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        match self {
            ActiveSet::Heap(h) => h.validate(),
            ActiveSet::Tree(t) => t.validate(),
        }
    }
}

/// Independent generator streams derived from one seed, so toggling one
/// mechanism never shifts another's draws.
#[derive(Clone, Debug)]
struct RngStreams {
    explore: ChaCha8Rng,
    uniform: ChaCha8Rng,
    proportional: ChaCha8Rng,
}

impl RngStreams {
    const EXPLORE: u64 = 1;
    const UNIFORM: u64 = 2;
    const PROPORTIONAL: u64 = 3;

    fn new(seed: u64) -> Self {
        let stream = |s| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        RngStreams {
            explore: stream(Self::EXPLORE),
            uniform: stream(Self::UNIFORM),
            proportional: stream(Self::PROPORTIONAL),
        }
    }
}

/// Per-reason entry counts accumulated between snapshots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReasonCounts {
    pub prioritized: usize,
    pub exploration: usize,
    pub retest_solved: usize,
    pub retest_unsolved: usize,
}

impl ReasonCounts {
    fn add(&mut self, reason: Reason) {
        match reason {
            Reason::Prioritized => self.prioritized += 1,
            Reason::Exploration => self.exploration += 1,
            Reason::RetestSolved => self.retest_solved += 1,
            Reason::RetestUnsolved => self.retest_unsolved += 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scheduler {
    config: SchedulerConfig,
    records: Vec<ProblemRecord>,
    active: ActiveSet,
    solved: RecencyPool,
    unsolved: RecencyPool,
    step: u64,
    rng: RngStreams,
    outstanding: Option<BatchPlan>,
    counts: ReasonCounts,
}

impl Scheduler {
    /// All `num_problems` problems start unseen in the active structure at
    /// the configured initial priority.
    pub fn new(config: SchedulerConfig, num_problems: usize) -> Result<Self> {
        config.validate().map_err(Error::Config)?;
        if num_problems < config.batch_size as usize {
            return Err(Error::OutOfRange {
                what: "number of problems (must be at least the batch size)",
                value: num_problems as f64,
            });
        }
        if u32::try_from(num_problems).is_err() {
            return Err(Error::OutOfRange {
                what: "number of problems",
                value: num_problems as f64,
            });
        }
        let init = config.init_priority;
        let records: Vec<ProblemRecord> = (0..num_problems)
            .map(|i| ProblemRecord::unseen(ProblemId::from(i), init))
            .collect();
        let active = match config.strategy {
            Strategy::MaxHeap => {
                ActiveSet::Heap(MaxHeap::heapify(records.iter().map(|r| (r.id, init)))?)
            }
            Strategy::SumTree => {
                let mut t = SumTree::new(num_problems, config.priority_exponent);
                let w = init.as_finite().ok_or(Error::InfinitePriority)?;
                for r in &records {
                    t.update(r.id, w)?;
                }
                ActiveSet::Tree(t)
            }
        };
        Ok(Scheduler {
            rng: RngStreams::new(config.rng_seed),
            config,
            records,
            active,
            solved: RecencyPool::new(PoolKind::Solved),
            unsolved: RecencyPool::new(PoolKind::Unsolved),
            step: 0,
            outstanding: None,
            counts: ReasonCounts::default(),
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn num_problems(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[ProblemRecord] {
        &self.records
    }

    pub fn record(&self, id: ProblemId) -> Option<&ProblemRecord> {
        self.records.get(id.index())
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub fn solved_pool(&self) -> &RecencyPool {
        &self.solved
    }

    pub fn unsolved_pool(&self) -> &RecencyPool {
        &self.unsolved
    }

    pub fn outstanding(&self) -> Option<&BatchPlan> {
        self.outstanding.as_ref()
    }

    pub fn unseen_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.status == Status::Unseen)
            .count()
    }

    /// Select the next batch and remove its problems from their structures
    /// until [`Scheduler::report_results`] is called.
    ///
    /// Fails with [`Error::NoTrainableProblems`] without advancing the step
    /// when the active structure is empty; callers can fall back to
    /// [`Scheduler::select_retest_only`].
    pub fn select_batch(&mut self) -> Result<BatchPlan> {
        if self.outstanding.is_some() {
            return Err(Error::BatchOutstanding);
        }
        if self.active.is_empty() {
            return Err(Error::NoTrainableProblems);
        }
        self.step += 1;
        let explore = self.rng.explore.random::<f64>() < self.config.exploration_rate;
        let mut entries = Vec::with_capacity(self.plan_capacity());
        for _ in 0..self.config.batch_size {
            let picked = if explore {
                match self.active.sample_uniform(&mut self.rng.uniform) {
                    Ok(id) => {
                        self.active.remove(id)?;
                        Some((id, Reason::Exploration))
                    }
                    Err(_) => None,
                }
            } else {
                self.active
                    .take_prioritized(&mut self.rng.proportional)
                    .map(|id| (id, Reason::Prioritized))
            };
            match picked {
                Some(e) => entries.push(e),
                // short batch near exhaustion
                None => break,
            }
        }
        self.push_retests(&mut entries);
        Ok(self.open_plan(entries))
    }

    /// Advance one step selecting only the retest entries that are due (the
    /// plan may be empty). For runs whose active structure has emptied.
    pub fn select_retest_only(&mut self) -> Result<BatchPlan> {
        if self.outstanding.is_some() {
            return Err(Error::BatchOutstanding);
        }
        self.step += 1;
        let mut entries = Vec::new();
        self.push_retests(&mut entries);
        Ok(self.open_plan(entries))
    }

    fn plan_capacity(&self) -> usize {
        (self.config.batch_size
            + self.config.retest_solved_count
            + self.config.retest_unsolved_count) as usize
    }

    fn push_retests(&mut self, entries: &mut Vec<(ProblemId, Reason)>) {
        if self.step == 0 || !self.step.is_multiple_of(self.config.retest_period) {
            return;
        }
        let solved = self
            .solved
            .pop_oldest(self.config.retest_solved_count as usize);
        entries.extend(solved.into_iter().map(|id| (id, Reason::RetestSolved)));
        let unsolved = self
            .unsolved
            .pop_oldest(self.config.retest_unsolved_count as usize);
        entries.extend(unsolved.into_iter().map(|id| (id, Reason::RetestUnsolved)));
    }

    fn open_plan(&mut self, entries: Vec<(ProblemId, Reason)>) -> BatchPlan {
        for &(_, reason) in &entries {
            self.counts.add(reason);
        }
        let plan = BatchPlan {
            step: self.step,
            entries,
        };
        self.outstanding = Some(plan.clone());
        plan
    }

    /// Ingest the rollout groups for the outstanding batch, in any order.
    ///
    /// Nothing is modified when the results fail validation.
    pub fn report_results(&mut self, results: &[RolloutGroup]) -> Result<Vec<Transition>> {
        let plan = self.outstanding.as_ref().ok_or(Error::NoOutstandingBatch)?;
        if results.len() != plan.entries.len() {
            return Err(Error::ResultMismatch(format!(
                "expected {} groups, got {}",
                plan.entries.len(),
                results.len()
            )));
        }
        let n = self.config.group_size as usize;
        let mut order = Vec::with_capacity(plan.entries.len());
        for &(id, reason) in &plan.entries {
            let mut matching = results.iter().filter(|g| g.problem == id);
            let group = matching
                .next()
                .ok_or_else(|| Error::ResultMismatch(format!("no group for problem {id}")))?;
            if matching.next().is_some() {
                return Err(Error::ResultMismatch(format!(
                    "duplicate groups for problem {id}"
                )));
            }
            if group.rewards.len() != n {
                return Err(Error::RewardLength {
                    id,
                    expected: n,
                    got: group.rewards.len(),
                });
            }
            order.push((id, reason, group));
        }
        let step = self.step;
        let mut transitions = Vec::with_capacity(order.len());
        for (id, reason, group) in order {
            transitions.push(self.ingest(id, reason, group, step)?);
        }
        self.outstanding = None;
        Ok(transitions)
    }

    /// Fold an out-of-band evaluation of problems still in the active
    /// structure into their statistics before the first step, e.g. to warm
    /// start from an offline estimate.
    pub fn prime(&mut self, groups: &[RolloutGroup]) -> Result<Vec<Transition>> {
        if self.step != 0 || self.outstanding.is_some() {
            return Err(Error::BatchOutstanding);
        }
        let n = self.config.group_size as usize;
        for g in groups {
            if !self.active.contains(g.problem) {
                return Err(Error::MissingId(g.problem));
            }
            if g.rewards.len() != n {
                return Err(Error::RewardLength {
                    id: g.problem,
                    expected: n,
                    got: g.rewards.len(),
                });
            }
        }
        let mut out = Vec::with_capacity(groups.len());
        for g in groups {
            self.active.remove(g.problem)?;
            out.push(self.ingest(g.problem, Reason::Prioritized, g, 0)?);
        }
        Ok(out)
    }

    fn ingest(
        &mut self,
        id: ProblemId,
        reason: Reason,
        group: &RolloutGroup,
        step: u64,
    ) -> Result<Transition> {
        let cfg = &self.config;
        let rec = &mut self.records[id.index()];
        let from = rec.status;
        let p = group.p;
        let ema = ema_update(rec.ema_p, p, cfg.ema_alpha)?;
        let priority = priority_score(ema, cfg.bias_epsilon)?;
        rec.ema_p = Some(ema);
        rec.last_raw_p = Some(p);
        rec.times_sampled += 1;
        rec.last_eval_step = Some(step);
        rec.priority = priority;
        let to = match classify(p, cfg.tolerance) {
            Class::Solved => Status::SolvedPool,
            Class::Unsolved => Status::UnsolvedPool,
            Class::Active => Status::Active,
        };
        rec.status = to;
        match to {
            Status::SolvedPool => self.solved.push(id, step)?,
            Status::UnsolvedPool => self.unsolved.push(id, step)?,
            _ => self.active.insert(id, priority)?,
        }
        Ok(Transition {
            id,
            reason,
            from,
            to,
            p,
            priority,
            skip_gradient: group.is_zero_signal(),
        })
    }

    /// Current sizes and success-rate spread; resets the per-reason counts.
    pub fn snapshot(&mut self) -> TelemetrySample {
        let counts = std::mem::take(&mut self.counts);
        // Welford
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for p in self.records.iter().filter_map(|r| r.ema_p) {
            n += 1;
            let d = p - mean;
            mean += d / n as f64;
            m2 += d * (p - mean);
        }
        let success_std = if n == 0 {
            0.0
        } else {
            (m2 / n as f64).max(0.0).sqrt()
        };
        TelemetrySample {
            step: self.step,
            heap_size: self.active.len(),
            solved: self.solved.len(),
            unsolved: self.unsolved.len(),
            unseen: self.unseen_count(),
            success_std,
            n_prioritized: counts.prioritized,
            n_exploration: counts.exploration,
            n_retest_solved: counts.retest_solved,
            n_retest_unsolved: counts.retest_unsolved,
        }
    }

    /// Check the partition of problems across structures and that every
    /// record's status agrees with where the problem lives.
    pub fn audit(&self) -> std::result::Result<(), String> {
        self.active.validate()?;
        let in_flight: Vec<ProblemId> = self.outstanding.iter().flat_map(|p| p.ids()).collect();
        let total = self.active.len() + self.solved.len() + self.unsolved.len() + in_flight.len();
        if total != self.records.len() {
            return Err(format!(
                "partition broken: active {} + solved {} + unsolved {} + outstanding {} != {}",
                self.active.len(),
                self.solved.len(),
                self.unsolved.len(),
                in_flight.len(),
                self.records.len()
            ));
        }
        for rec in &self.records {
            let id = rec.id;
            let places = [
                self.active.contains(id),
                self.solved.contains(id),
                self.unsolved.contains(id),
                in_flight.contains(&id),
            ];
            if places.iter().filter(|&&b| b).count() != 1 {
                return Err(format!("problem {id} is in {places:?}"));
            }
            let ok = match rec.status {
                Status::Unseen | Status::Active => places[0] || places[3],
                Status::SolvedPool => places[1] || places[3],
                Status::UnsolvedPool => places[2] || places[3],
            };
            if !ok {
                return Err(format!(
                    "problem {id} has status {} but is in {places:?}",
                    rec.status
                ));
            }
            let unseen = rec.status == Status::Unseen;
            if unseen != rec.ema_p.is_none() || unseen != (rec.times_sampled == 0) {
                return Err(format!(
                    "problem {id}: unseen status disagrees with its statistics"
                ));
            }
            if let (Some(_), Priority::Finite(w)) = (rec.ema_p, rec.priority) {
                if w > 0.25 + self.config.bias_epsilon {
                    return Err(format!("problem {id}: priority {w} out of range"));
                }
            }
        }
        Ok(())
    }
}
