//! Solved and unsolved holding pools, ordered oldest evaluation first.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use crate::error::{Error, Result};
use crate::types::ProblemId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Solved,
    Unsolved,
}

/// Min-heap of `(last_eval_step, id)`. Equal steps pop in id order.
#[derive(Clone, Debug)]
pub struct RecencyPool {
    kind: PoolKind,
    heap: BinaryHeap<Reverse<(u64, ProblemId)>>,
    members: HashSet<ProblemId>,
}

impl RecencyPool {
    pub fn new(kind: PoolKind) -> Self {
        RecencyPool {
            kind,
            heap: BinaryHeap::new(),
            members: HashSet::new(),
        }
    }

    pub fn kind(&self) -> PoolKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn contains(&self, id: ProblemId) -> bool {
        self.members.contains(&id)
    }

    pub fn push(&mut self, id: ProblemId, step: u64) -> Result<()> {
        if !self.members.insert(id) {
            return Err(Error::DuplicateId(id));
        }
        self.heap.push(Reverse((step, id)));
        Ok(())
    }

    /// Remove and return up to `k` ids with the oldest evaluation steps.
    pub fn pop_oldest(&mut self, k: usize) -> Vec<ProblemId> {
        let mut out = Vec::with_capacity(k.min(self.len()));
        while out.len() < k {
            let Some(Reverse((_, id))) = self.heap.pop() else {
                break;
            };
            self.members.remove(&id);
            out.push(id);
        }
        out
    }

    /// `(step, id)` entries sorted oldest first.
    pub fn entries(&self) -> Vec<(u64, ProblemId)> {
        let mut v: Vec<_> = self.heap.iter().map(|Reverse(e)| *e).collect();
        v.sort_unstable();
        v
    }
}
