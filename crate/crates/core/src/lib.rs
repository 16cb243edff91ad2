//! Problem-level prioritized replay for RL post-training.
//!
//! Problems are scheduled by the variance of their rollout rewards,
//! `ω = p̄(1 − p̄)`, where `p̄` is a smoothed success rate. Training batches
//! come from a max-heap (or a sum-tree) over that score; problems that are
//! always solved or always failed move to recency pools and are retested
//! periodically. [`sim`] drives the scheduler with a synthetic learner.

pub mod config;
pub mod error;
pub mod max_heap;
pub mod pools;
pub mod priority;
pub mod scheduler;
pub mod sim;
pub mod sum_tree;
pub mod telemetry;
pub mod types;
pub mod verify;

pub use config::{ConfigError, SchedulerConfig, Strategy};
pub use error::{Error, Result};
pub use max_heap::MaxHeap;
pub use pools::{PoolKind, RecencyPool};
pub use priority::{
    ema_update, group_advantages, mean_squared_advantage, priority_score, Priority,
};
pub use scheduler::{classify, ActiveSet, Class, Scheduler};
pub use sim::{
    run_simulation, Environment, LatentProblem, LearnerConfig, PopulationSpec, Simulation,
};
pub use sum_tree::SumTree;
pub use telemetry::{emit_csv, load_csv, smooth, TelemetryLog, TelemetrySample};
pub use types::{BatchPlan, ProblemId, ProblemRecord, Reason, RolloutGroup, Status, Transition};
