//! Synthetic learner standing in for a policy model.
//!
//! Every problem has a latent solve probability `q`. A rollout group is `N`
//! independent Bernoulli(`q`) rewards. Training on a group moves `q` up by
//! `gain · p(1 − p)`, where `p` is the group's success rate: groups with a
//! mix of outcomes teach the most and all-correct or all-wrong groups teach
//! nothing. Problems in a `q = 0` population bin are unlearnable and never
//! move. There is no transfer between problems.
//!
//! This is a consistency check of the scheduler's dynamics, not a model of
//! how a language model learns.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{key_values, parse_value, SchedulerConfig};
use crate::error::{Error, Result};
use crate::scheduler::Scheduler;
use crate::telemetry::{TelemetryLog, TelemetrySample};
use crate::types::{BatchPlan, ProblemId, RolloutGroup, Transition};

/// Decay never takes `q` below this.
pub const FORGET_FLOOR: f64 = 0.05;

const ENV_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug, PartialEq)]
pub struct LatentProblem {
    pub id: ProblemId,
    pub q: f64,
    pub learnable: bool,
}

/// Histogram of initial solve probabilities as `(q, fraction)` bins.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationSpec {
    pub bins: Vec<(f64, f64)>,
}

impl Default for PopulationSpec {
    /// 62% unlearnable, the rest spread evenly over `q ∈ {0.1, …, 0.9}`.
    fn default() -> Self {
        let rest = 0.38 / 9.0;
        let mut bins = vec![(0.0, 0.62)];
        bins.extend((1..=9).map(|i| (i as f64 / 10.0, rest)));
        PopulationSpec { bins }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.bins.is_empty() {
            return Err("population needs at least one bin".into());
        }
        for &(q, frac) in &self.bins {
            if !(0.0..=1.0).contains(&q) {
                return Err(format!("bin q {q} outside [0, 1]"));
            }
            if !(frac.is_finite() && frac >= 0.0) {
                return Err(format!("bin fraction {frac} must be non-negative"));
            }
        }
        let total: f64 = self.bins.iter().map(|b| b.1).sum();
        if total.is_nan() || total <= 0.0 {
            return Err("population fractions sum to zero".into());
        }
        Ok(())
    }

    /// Whole problem counts per bin for `m` problems, by largest remainder.
    pub fn counts(&self, m: usize) -> Vec<usize> {
        let total: f64 = self.bins.iter().map(|b| b.1).sum();
        let exact: Vec<f64> = self.bins.iter().map(|b| b.1 / total * m as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut left = m - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }

    /// `m` problems with bin-proportional initial `q`, shuffled over ids.
    pub fn build<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<LatentProblem> {
        let mut qs: Vec<f64> = self
            .counts(m)
            .into_iter()
            .zip(&self.bins)
            .flat_map(|(c, &(q, _))| std::iter::repeat_n(q, c))
            .collect();
        qs.shuffle(rng);
        qs.into_iter()
            .enumerate()
            .map(|(i, q)| LatentProblem {
                id: ProblemId::from(i),
                q,
                learnable: q > 0.0,
            })
            .collect()
    }
}

impl FromStr for PopulationSpec {
    type Err = String;

    /// Comma-separated `q:fraction` list, e.g. `0:0.6,0.5:0.4`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bins = s
            .split(',')
            .map(|item| {
                let (q, f) = item
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| format!("expected q:fraction, got {item:?}"))?;
                let q: f64 = q.trim().parse().map_err(|_| format!("bad q {q:?}"))?;
                let f: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad fraction {f:?}"))?;
                Ok((q, f))
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let spec = PopulationSpec { bins };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for PopulationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (q, frac)) in self.bins.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{q:?}:{frac:?}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig {
    /// Scale of the competence gain per training group.
    pub gain: f64,
    /// Per-step multiplicative decay of unsampled learnable problems.
    pub forget: f64,
    pub num_problems: usize,
    pub population: PopulationSpec,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            gain: 0.1,
            forget: 0.0,
            num_problems: 1000,
            population: PopulationSpec::default(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            errs.push(format!(
                "gain must be finite and non-negative (got {})",
                self.gain
            ));
        }
        if !(0.0..1.0).contains(&self.forget) {
            errs.push(format!("forget must be in [0, 1) (got {})", self.forget));
        }
        if self.num_problems == 0 {
            errs.push("num_problems must be positive".into());
        }
        if let Err(e) = self.population.validate() {
            errs.push(e);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// `key = value` document with keys `gain`, `forget`, `num_problems` and
    /// `population`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = LearnerConfig::default();
        for (line, key, value) in key_values(text)? {
            let r = match key {
                "gain" => parse_value(key, value).map(|v| cfg.gain = v),
                "forget" => parse_value(key, value).map(|v| cfg.forget = v),
                "num_problems" => parse_value(key, value).map(|v| cfg.num_problems = v),
                "population" => value.parse().map(|v| cfg.population = v),
                _ => Err(format!("unknown key {key:?}")),
            };
            r.map_err(|msg| Error::Parse { line, msg })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        format!(
            "gain = {:?}\nforget = {:?}\nnum_problems = {}\npopulation = {}\n",
            self.gain, self.forget, self.num_problems, self.population
        )
    }
}

/// `n` Bernoulli(`q`) rewards for `prob`.
pub fn rollout<R: Rng + ?Sized>(prob: &LatentProblem, n: usize, rng: &mut R) -> RolloutGroup {
    let rewards: Vec<u8> = (0..n.max(1))
        .map(|_| u8::from(rng.random::<f64>() < prob.q))
        .collect();
    RolloutGroup::new(prob.id, rewards).expect("non-empty binary rewards")
}

/// `q += gain · p(1 − p)` for learnable problems, clamped to `[0, 1]`.
pub fn apply_learning(
    prob: &mut LatentProblem,
    group: &RolloutGroup,
    lc: &LearnerConfig,
) -> Result<()> {
    if group.problem != prob.id {
        return Err(Error::ResultMismatch(format!(
            "group for {} applied to problem {}",
            group.problem, prob.id
        )));
    }
    if prob.learnable {
        let signal = group.p * (1.0 - group.p);
        prob.q = (prob.q + lc.gain * signal).clamp(0.0, 1.0);
    }
    Ok(())
}

/// The latent problem population with one reward stream per problem, so a
/// problem's rollouts do not depend on what else was scheduled.
#[derive(Clone, Debug)]
pub struct Environment {
    problems: Vec<LatentProblem>,
    streams: Vec<ChaCha8Rng>,
}

impl Environment {
    pub fn new(lc: &LearnerConfig, seed: u64) -> Self {
        let key = seed ^ ENV_SEED_SALT;
        let mut shuffle = ChaCha8Rng::seed_from_u64(key);
        let problems = lc.population.build(lc.num_problems, &mut shuffle);
        Self::from_problems(problems, seed)
    }

    /// Explicit population; `problems[i].id` must be `i`.
    pub fn from_problems(problems: Vec<LatentProblem>, seed: u64) -> Self {
        let key = seed ^ ENV_SEED_SALT;
        let streams = (0..problems.len() as u64)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(key);
                r.set_stream(i + 1);
                r
            })
            .collect();
        Environment { problems, streams }
    }

    pub fn problems(&self) -> &[LatentProblem] {
        &self.problems
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn rollout(&mut self, id: ProblemId, n: usize) -> RolloutGroup {
        let i = id.index();
        rollout(&self.problems[i], n, &mut self.streams[i])
    }

    pub fn learn(&mut self, group: &RolloutGroup, lc: &LearnerConfig) -> Result<()> {
        let prob = self
            .problems
            .get_mut(group.problem.index())
            .ok_or(Error::MissingId(group.problem))?;
        apply_learning(prob, group, lc)
    }

    /// Decay learnable problems not in `sampled` toward [`FORGET_FLOOR`].
    pub fn forget(&mut self, sampled: &[ProblemId], rate: f64) {
        if rate == 0.0 {
            return;
        }
        for p in &mut self.problems {
            if p.learnable && p.q > FORGET_FLOOR && !sampled.contains(&p.id) {
                p.q = (p.q * (1.0 - rate)).max(FORGET_FLOOR);
            }
        }
    }
}

/// Outcome of one simulated step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub plan: BatchPlan,
    pub transitions: Vec<Transition>,
    pub sample: TelemetrySample,
}

/// Scheduler driving the synthetic learner.
#[derive(Clone, Debug)]
pub struct Simulation {
    scheduler: Scheduler,
    env: Environment,
    learner: LearnerConfig,
    log: TelemetryLog,
}

impl Simulation {
    /// All randomness derives from `scfg.rng_seed`.
    pub fn new(scfg: SchedulerConfig, learner: LearnerConfig) -> Result<Self> {
        learner.validate().map_err(|errs| Error::Parse {
            line: 0,
            msg: errs.join("; "),
        })?;
        let env = Environment::new(&learner, scfg.rng_seed);
        Self::with_environment(scfg, learner, env)
    }

    pub fn with_environment(
        scfg: SchedulerConfig,
        learner: LearnerConfig,
        env: Environment,
    ) -> Result<Self> {
        let scheduler = Scheduler::new(scfg, env.len())?;
        Ok(Simulation {
            scheduler,
            env,
            learner,
            log: TelemetryLog::new(),
        })
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn scheduler_mut(&mut self) -> &mut Scheduler {
        &mut self.scheduler
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn telemetry(&self) -> &TelemetryLog {
        &self.log
    }

    pub fn into_telemetry(self) -> TelemetryLog {
        self.log
    }

    /// select → rollouts → learning → report → snapshot.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let plan = match self.scheduler.select_batch() {
            Ok(plan) => plan,
            Err(Error::NoTrainableProblems) => self.scheduler.select_retest_only()?,
            Err(e) => return Err(e),
        };
        let n = self.scheduler.config().group_size as usize;
        let groups: Vec<RolloutGroup> = plan.ids().map(|id| self.env.rollout(id, n)).collect();
        for g in &groups {
            // zero-signal groups, including retests that stay in their pool,
            // get no update
            if !g.is_zero_signal() {
                self.env.learn(g, &self.learner)?;
            }
        }
        let sampled: Vec<ProblemId> = plan.ids().collect();
        self.env.forget(&sampled, self.learner.forget);
        let transitions = self.scheduler.report_results(&groups)?;
        let sample = self.scheduler.snapshot();
        self.log.push(sample.clone());
        Ok(StepOutcome {
            plan,
            transitions,
            sample,
        })
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Problems evaluated at least once.
    pub fn distinct_visited(&self) -> usize {
        self.scheduler.num_problems() - self.scheduler.unseen_count()
    }
}

/// Run `steps` simulated steps and return one telemetry sample per step.
pub fn run_simulation(
    scfg: SchedulerConfig,
    lcfg: LearnerConfig,
    steps: u64,
) -> Result<Vec<TelemetrySample>> {
    let mut sim = Simulation::new(scfg, lcfg)?;
    sim.run(steps)?;
    Ok(sim.into_telemetry().into_samples())
}
