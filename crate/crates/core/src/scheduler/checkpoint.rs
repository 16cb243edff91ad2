//! Text checkpoint of a [`Scheduler`].
//!
//! ```text
//! problem-replay-checkpoint
//! version 1
//! [config]
//! <key = value lines as read by SchedulerConfig::parse>
//! [state]
//! problems <M>
//! step <step>
//! rng <explore word pos> <uniform word pos> <proportional word pos>
//! counts <prioritized> <exploration> <retest solved> <retest unsolved>
//! [records]
//! <id> <ema|-> <raw p|-> <priority|inf> <status> <last eval step|-> <times sampled>
//! [active heap]                         # or: [active sum_tree <capacity>]
//! <id> <priority>                       # heap layout order; or <id> <mass> in leaf order
//! [solved]
//! <step> <id>
//! [unsolved]
//! <step> <id>
//! [outstanding <step>]                  # or: [outstanding none]
//! <id> <reason>
//! end
//! ```
//!
//! Floats are written in shortest round-trip form and the heap and sum-tree
//! layouts are stored verbatim, so a restored scheduler continues exactly as
//! the original would have.

use std::io::{BufRead, Write};

use super::{ActiveSet, ReasonCounts, RngStreams, Scheduler};
use crate::config::{SchedulerConfig, Strategy};
use crate::error::{Error, Result};
use crate::max_heap::MaxHeap;
use crate::pools::{PoolKind, RecencyPool};
use crate::priority::Priority;
use crate::sum_tree::SumTree;
use crate::types::{BatchPlan, ProblemId, ProblemRecord, Reason, Status};

pub const CHECKPOINT_MAGIC: &str = "problem-replay-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

fn opt<T: std::fmt::Debug>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:?}"))
}

impl Scheduler {
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "version {CHECKPOINT_VERSION}")?;
        writeln!(w, "[config]")?;
        w.write_all(self.config.to_text().as_bytes())?;
        writeln!(w, "[state]")?;
        writeln!(w, "problems {}", self.records.len())?;
        writeln!(w, "step {}", self.step)?;
        writeln!(
            w,
            "rng {} {} {}",
            self.rng.explore.get_word_pos(),
            self.rng.uniform.get_word_pos(),
            self.rng.proportional.get_word_pos()
        )?;
        let c = &self.counts;
        writeln!(
            w,
            "counts {} {} {} {}",
            c.prioritized, c.exploration, c.retest_solved, c.retest_unsolved
        )?;
        writeln!(w, "[records]")?;
        for r in &self.records {
            writeln!(
                w,
                "{} {} {} {} {} {} {}",
                r.id,
                opt(r.ema_p),
                opt(r.last_raw_p),
                r.priority,
                r.status,
                opt(r.last_eval_step),
                r.times_sampled
            )?;
        }
        match &self.active {
            ActiveSet::Heap(h) => {
                writeln!(w, "[active heap]")?;
                for (id, p) in h.entries() {
                    writeln!(w, "{id} {p}")?;
                }
            }
            ActiveSet::Tree(t) => {
                writeln!(w, "[active sum_tree {}]", t.capacity())?;
                for (id, mass) in t.leaves() {
                    writeln!(w, "{id} {mass:?}")?;
                }
            }
        }
        for (name, pool) in [("solved", &self.solved), ("unsolved", &self.unsolved)] {
            writeln!(w, "[{name}]")?;
            for (step, id) in pool.entries() {
                writeln!(w, "{step} {id}")?;
            }
        }
        match &self.outstanding {
            None => writeln!(w, "[outstanding none]")?,
            Some(plan) => {
                writeln!(w, "[outstanding {}]", plan.step)?;
                for (id, reason) in &plan.entries {
                    writeln!(w, "{id} {reason}")?;
                }
            }
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn checkpoint_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("checkpoint is utf-8")
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Self> {
        let lines: Vec<String> = r
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Reader {
            lines: &lines,
            pos: 0,
        }
        .scheduler()
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        Self::read_checkpoint(text.as_bytes())
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Reader<'a> {
    lines: &'a [String],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| bad("unexpected end of checkpoint"))?;
        self.pos += 1;
        Ok(line.trim_end())
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|s| s.trim_end())
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let got = self.next()?;
        if got != want {
            return Err(bad(format!(
                "line {}: expected {want:?}, got {got:?}",
                self.pos
            )));
        }
        Ok(())
    }

    /// Lines up to the next section header.
    fn body(&mut self) -> Vec<&'a str> {
        let mut out = Vec::new();
        while let Some(l) = self.peek() {
            if l.starts_with('[') || l == "end" {
                break;
            }
            out.push(l);
            self.pos += 1;
        }
        out
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(bad(format!("expected `{key}` line, got {line:?}")));
        }
        parts
            .map(|p| {
                p.parse()
                    .map_err(|_| bad(format!("bad value {p:?} in {key} line")))
            })
            .collect()
    }

    fn scheduler(mut self) -> Result<Scheduler> {
        self.expect(CHECKPOINT_MAGIC)?;
        let version: Vec<u32> = self.keyed("version")?;
        if version != [CHECKPOINT_VERSION] {
            return Err(bad(format!("unsupported version {version:?}")));
        }
        self.expect("[config]")?;
        let config = SchedulerConfig::parse(&self.body().join("\n"))?;
        config.validate().map_err(Error::Config)?;

        self.expect("[state]")?;
        let m: usize = one(self.keyed("problems")?)?;
        let step: u64 = one(self.keyed("step")?)?;
        let rng: Vec<u128> = self.keyed("rng")?;
        let counts: Vec<usize> = self.keyed("counts")?;
        if rng.len() != 3 || counts.len() != 4 {
            return Err(bad("malformed rng or counts line"));
        }

        self.expect("[records]")?;
        let records = self
            .body()
            .into_iter()
            .enumerate()
            .map(|(i, l)| parse_record(i, l))
            .collect::<Result<Vec<_>>>()?;
        if records.len() != m {
            return Err(bad(format!("expected {m} records, got {}", records.len())));
        }

        let header = self.next()?;
        let active = match header
            .trim_start_matches('[')
            .trim_end_matches(']')
            .split_whitespace()
            .collect::<Vec<_>>()[..]
        {
            ["active", "heap"] => {
                let entries = self
                    .body()
                    .into_iter()
                    .map(|l| {
                        let (id, p) = pair(l)?;
                        Ok((id, p.parse::<Priority>().map_err(bad)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ActiveSet::Heap(MaxHeap::from_layout(entries)?)
            }
            ["active", "sum_tree", cap] => {
                let cap: usize = cap.parse().map_err(|_| bad("bad sum-tree capacity"))?;
                let leaves = self
                    .body()
                    .into_iter()
                    .map(|l| {
                        let (id, m) = pair(l)?;
                        Ok((id, m.parse::<f64>().map_err(|_| bad("bad mass"))?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ActiveSet::Tree(SumTree::from_leaves(
                    cap,
                    config.priority_exponent,
                    &leaves,
                )?)
            }
            _ => return Err(bad(format!("bad active header {header:?}"))),
        };
        let strategy_matches = matches!(
            (&active, config.strategy),
            (ActiveSet::Heap(_), Strategy::MaxHeap) | (ActiveSet::Tree(_), Strategy::SumTree)
        );
        if !strategy_matches {
            return Err(bad("active structure does not match configured strategy"));
        }

        let solved = self.pool("[solved]", PoolKind::Solved)?;
        let unsolved = self.pool("[unsolved]", PoolKind::Unsolved)?;

        let header = self.next()?;
        let outstanding = match header {
            "[outstanding none]" => None,
            h if h.starts_with("[outstanding ") => {
                let s: u64 = h["[outstanding ".len()..h.len() - 1]
                    .parse()
                    .map_err(|_| bad("bad outstanding step"))?;
                let entries = self
                    .body()
                    .into_iter()
                    .map(|l| {
                        let (id, r) = pair(l)?;
                        Ok((id, r.parse::<Reason>().map_err(bad)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(BatchPlan { step: s, entries })
            }
            _ => return Err(bad(format!("bad outstanding header {header:?}"))),
        };
        self.expect("end")?;

        let mut streams = RngStreams::new(config.rng_seed);
        for (r, pos) in [
            (&mut streams.explore, rng[0]),
            (&mut streams.uniform, rng[1]),
            (&mut streams.proportional, rng[2]),
        ] {
            r.set_word_pos(pos);
        }

        let sched = Scheduler {
            config,
            records,
            active,
            solved,
            unsolved,
            step,
            rng: streams,
            outstanding,
            counts: ReasonCounts {
                prioritized: counts[0],
                exploration: counts[1],
                retest_solved: counts[2],
                retest_unsolved: counts[3],
            },
        };
        sched
            .audit()
            .map_err(|e| bad(format!("inconsistent state: {e}")))?;
        Ok(sched)
    }

    fn pool(&mut self, header: &str, kind: PoolKind) -> Result<RecencyPool> {
        self.expect(header)?;
        let mut pool = RecencyPool::new(kind);
        for l in self.body() {
            let (step, id) = l
                .split_once(' ')
                .ok_or_else(|| bad(format!("bad pool line {l:?}")))?;
            let step: u64 = step.parse().map_err(|_| bad("bad pool step"))?;
            let id: u32 = id.parse().map_err(|_| bad("bad pool id"))?;
            pool.push(ProblemId(id), step)?;
        }
        Ok(pool)
    }
}

fn one<T>(v: Vec<T>) -> Result<T> {
    let mut it = v.into_iter();
    match (it.next(), it.next()) {
        (Some(x), None) => Ok(x),
        _ => Err(bad("expected a single value")),
    }
}

fn pair(line: &str) -> Result<(ProblemId, &str)> {
    let (id, rest) = line
        .split_once(' ')
        .ok_or_else(|| bad(format!("bad line {line:?}")))?;
    let id: u32 = id.parse().map_err(|_| bad(format!("bad id in {line:?}")))?;
    Ok((ProblemId(id), rest))
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>> {
    if s == "-" {
        Ok(None)
    } else {
        s.parse()
            .map(Some)
            .map_err(|_| bad(format!("bad value {s:?}")))
    }
}

fn parse_record(index: usize, line: &str) -> Result<ProblemRecord> {
    let f: Vec<&str> = line.split_whitespace().collect();
    let [id, ema, raw, pri, status, last, times] = f[..] else {
        return Err(bad(format!("bad record line {line:?}")));
    };
    let id: u32 = id.parse().map_err(|_| bad("bad record id"))?;
    if id as usize != index {
        return Err(bad(format!("record {index} has id {id}")));
    }
    Ok(ProblemRecord {
        id: ProblemId(id),
        ema_p: parse_opt(ema)?,
        last_raw_p: parse_opt(raw)?,
        priority: pri.parse().map_err(bad)?,
        status: status.parse::<Status>().map_err(bad)?,
        last_eval_step: parse_opt(last)?,
        times_sampled: times.parse().map_err(|_| bad("bad times_sampled"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RolloutGroup;

    fn drive(s: &mut Scheduler, steps: u64) -> Vec<BatchPlan> {
        let mut plans = Vec::new();
        for _ in 0..steps {
            let plan = s.select_batch().unwrap();
            let results: Vec<RolloutGroup> = plan
                .ids()
                .map(|id| {
                    let k = ((id.0 as u64 * 7 + plan.step * 3) % 9) as usize;
                    RolloutGroup::new(id, (0..8).map(|i| u8::from(i < k)).collect()).unwrap()
                })
                .collect();
            s.report_results(&results).unwrap();
            plans.push(plan);
        }
        plans
    }

    fn resume_matches(cfg: SchedulerConfig) {
        let mut a = Scheduler::new(cfg, 60).unwrap();
        drive(&mut a, 37);
        let text = a.checkpoint_string();
        let mut b = Scheduler::from_checkpoint_str(&text).unwrap();
        assert_eq!(b.checkpoint_string(), text);
        let pa = drive(&mut a, 50);
        let pb = drive(&mut b, 50);
        assert_eq!(pa, pb);
        assert_eq!(a.checkpoint_string(), b.checkpoint_string());
    }

    #[test]
    fn resume_heap_bit_identical() {
        resume_matches(SchedulerConfig {
            rng_seed: 9,
            ..Default::default()
        });
    }

    #[test]
    fn resume_sum_tree_bit_identical() {
        resume_matches(SchedulerConfig {
            rng_seed: 9,
            strategy: Strategy::SumTree,
            exploration_rate: 0.3,
            ..Default::default()
        });
    }

    #[test]
    fn resume_with_outstanding_batch() {
        let mut a = Scheduler::new(SchedulerConfig::default(), 20).unwrap();
        drive(&mut a, 5);
        a.select_batch().unwrap();
        let b = Scheduler::from_checkpoint_str(&a.checkpoint_string()).unwrap();
        assert_eq!(a.outstanding(), b.outstanding());
    }

    #[test]
    fn rejects_bad_header_and_version() {
        let s = Scheduler::new(SchedulerConfig::default(), 8).unwrap();
        let text = s.checkpoint_string();
        assert!(
            Scheduler::from_checkpoint_str(&text.replacen(CHECKPOINT_MAGIC, "nope", 1)).is_err()
        );
        assert!(
            Scheduler::from_checkpoint_str(&text.replacen("version 1", "version 2", 1)).is_err()
        );
        assert!(Scheduler::from_checkpoint_str(&text.replacen("\nend", "", 1)).is_err());
    }
}
