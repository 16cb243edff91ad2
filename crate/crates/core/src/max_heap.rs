//! Array-based binary max-heap over problem ids.
//!
//! Children of index `i` live at `2i + 1` and `2i + 2`; the maximum is at
//! index 0. An id → position map is kept alongside the array so that any
//! member can be deleted in `O(log M)`, which uniform exploration needs.
//! Ties between equal priorities are broken by array layout only.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::priority::Priority;
use crate::types::ProblemId;

#[derive(Clone, Debug, Default)]
pub struct MaxHeap {
    entries: Vec<(ProblemId, Priority)>,
    position: Vec<Option<usize>>,
}

impl MaxHeap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bottom-up construction in `O(M)`.
    pub fn heapify<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ProblemId, Priority)>,
    {
        let mut heap = Self::from_unordered(entries)?;
        for i in (0..heap.entries.len() / 2).rev() {
            heap.sift_down(i);
        }
        Ok(heap)
    }

    /// Rebuild from an exact array layout, e.g. one previously returned by
    /// [`MaxHeap::entries`]. The layout must already satisfy the heap
    /// property.
    pub fn from_layout<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ProblemId, Priority)>,
    {
        let heap = Self::from_unordered(entries)?;
        heap.validate()
            .map_err(|e| Error::Checkpoint(format!("bad heap layout: {e}")))?;
        Ok(heap)
    }

    fn from_unordered<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ProblemId, Priority)>,
    {
        let mut heap = MaxHeap::new();
        for (id, priority) in entries {
            if heap.contains(id) {
                return Err(Error::DuplicateId(id));
            }
            let i = heap.entries.len();
            heap.entries.push((id, priority));
            heap.set_position(id, Some(i));
        }
        Ok(heap)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: ProblemId) -> bool {
        self.position_of(id).is_some()
    }

    pub fn position_of(&self, id: ProblemId) -> Option<usize> {
        self.position.get(id.index()).copied().flatten()
    }

    pub fn priority_of(&self, id: ProblemId) -> Option<Priority> {
        self.position_of(id).map(|i| self.entries[i].1)
    }

    /// Heap array in layout order.
    pub fn entries(&self) -> &[(ProblemId, Priority)] {
        &self.entries
    }

    pub fn peek_max(&self) -> Option<(ProblemId, Priority)> {
        self.entries.first().copied()
    }

    pub fn extract_max(&mut self) -> Result<(ProblemId, Priority)> {
        if self.entries.is_empty() {
            return Err(Error::EmptyHeap);
        }
        Ok(self.remove_at(0))
    }

    pub fn insert(&mut self, id: ProblemId, priority: Priority) -> Result<()> {
        if self.contains(id) {
            return Err(Error::DuplicateId(id));
        }
        let i = self.entries.len();
        self.entries.push((id, priority));
        self.set_position(id, Some(i));
        self.sift_up(i);
        Ok(())
    }

    /// Remove `id` wherever it sits and return its priority.
    pub fn delete(&mut self, id: ProblemId) -> Result<Priority> {
        let i = self.position_of(id).ok_or(Error::MissingId(id))?;
        Ok(self.remove_at(i).1)
    }

    /// An id drawn uniformly over the current members.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ProblemId> {
        if self.entries.is_empty() {
            return Err(Error::EmptyHeap);
        }
        let u = rng.random_range(0..self.entries.len());
        Ok(self.entries[u].0)
    }

    /// Full scan of the heap property and the position bijection.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (i, &(id, pri)) in self.entries.iter().enumerate() {
            if self.position_of(id) != Some(i) {
                return Err(format!("position map disagrees for id {id} at index {i}"));
            }
            for child in [2 * i + 1, 2 * i + 2] {
                if let Some(&(cid, cpri)) = self.entries.get(child) {
                    if cpri > pri {
                        return Err(format!(
                            "heap property violated: index {i} (id {id}, {pri}) < child {child} (id {cid}, {cpri})"
                        ));
                    }
                }
            }
        }
        let mapped = self.position.iter().filter(|p| p.is_some()).count();
        if mapped != self.entries.len() {
            return Err(format!(
                "position map has {mapped} entries for {} heap slots",
                self.entries.len()
            ));
        }
        Ok(())
    }

    /// `index id priority` per line, in layout order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, (id, pri)) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{i} {id} {pri}");
        }
        out
    }

    fn set_position(&mut self, id: ProblemId, pos: Option<usize>) {
        let idx = id.index();
        if idx >= self.position.len() {
            self.position.resize(idx + 1, None);
        }
        self.position[idx] = pos;
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.entries.swap(a, b);
        let (ida, idb) = (self.entries[a].0, self.entries[b].0);
        self.position[ida.index()] = Some(a);
        self.position[idb.index()] = Some(b);
    }

    fn remove_at(&mut self, i: usize) -> (ProblemId, Priority) {
        let last = self.entries.len() - 1;
        self.swap(i, last);
        let removed = self.entries.pop().expect("non-empty");
        self.set_position(removed.0, None);
        if i < self.entries.len() && !self.sift_up(i) {
            self.sift_down(i);
        }
        removed
    }

    /// Returns whether the element moved.
    fn sift_up(&mut self, mut i: usize) -> bool {
        let start = i;
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.entries[i].1 <= self.entries[parent].1 {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
        i != start
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.entries.len();
        loop {
            let left = 2 * i + 1;
            let right = left + 1;
            let mut largest = i;
            if left < n && self.entries[left].1 > self.entries[largest].1 {
                largest = left;
            }
            if right < n && self.entries[right].1 > self.entries[largest].1 {
                largest = right;
            }
            if largest == i {
                return;
            }
            self.swap(i, largest);
            i = largest;
        }
    }
}
