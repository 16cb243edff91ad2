//! Complete binary tree of partial sums for priority-proportional sampling.
//!
//! Occupied leaves are kept contiguous in `[0, len)`: removing a problem
//! moves the last occupied leaf into the hole. Each ancestor is recomputed
//! as the sum of its two children rather than adjusted by a delta, so the
//! internal nodes never drift from the leaves.

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::ProblemId;

#[derive(Clone, Debug)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
    len: usize,
    leaf_of: Vec<Option<usize>>,
    id_of: Vec<ProblemId>,
    exponent: f64,
}

impl SumTree {
    /// Empty tree with room for at least `capacity` problems before it
    /// grows. Leaf masses are `ω^exponent`.
    pub fn new(capacity: usize, exponent: f64) -> Self {
        let capacity = capacity.max(1).next_power_of_two();
        SumTree {
            capacity,
            nodes: vec![0.0; 2 * capacity - 1],
            len: 0,
            leaf_of: Vec::new(),
            id_of: Vec::with_capacity(capacity),
            exponent,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn total(&self) -> f64 {
        self.nodes[0]
    }

    pub fn contains(&self, id: ProblemId) -> bool {
        self.leaf(id).is_some()
    }

    pub fn mass_of(&self, id: ProblemId) -> Option<f64> {
        self.leaf(id).map(|l| self.nodes[self.capacity - 1 + l])
    }

    /// Occupied leaves as `(id, mass)` in leaf order.
    pub fn leaves(&self) -> Vec<(ProblemId, f64)> {
        (0..self.len)
            .map(|l| (self.id_of[l], self.nodes[self.capacity - 1 + l]))
            .collect()
    }

    /// Mass stored for priority `omega` under this tree's exponent.
    pub fn mass_for(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            0.0
        } else if self.exponent == 1.0 {
            omega
        } else {
            omega.powf(self.exponent)
        }
    }

    /// Set the priority of `id`, adding it if absent.
    pub fn update(&mut self, id: ProblemId, omega: f64) -> Result<()> {
        if omega.is_infinite() {
            return Err(Error::InfinitePriority);
        }
        if omega.is_nan() || omega < 0.0 {
            return Err(Error::OutOfRange {
                what: "priority",
                value: omega,
            });
        }
        let mass = self.mass_for(omega);
        self.set_mass(id, mass);
        Ok(())
    }

    /// Remove `id` and return the mass it held.
    pub fn remove(&mut self, id: ProblemId) -> Result<f64> {
        let leaf = self.leaf(id).ok_or(Error::MissingId(id))?;
        let base = self.capacity - 1;
        let mass = self.nodes[base + leaf];
        let last = self.len - 1;
        if leaf != last {
            let moved = self.id_of[last];
            self.id_of[leaf] = moved;
            self.leaf_of[moved.index()] = Some(leaf);
            self.write_leaf(leaf, self.nodes[base + last]);
        }
        self.write_leaf(last, 0.0);
        self.id_of.pop();
        self.leaf_of[id.index()] = None;
        self.len -= 1;
        Ok(mass)
    }

    /// Draw an id with probability proportional to its mass.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ProblemId> {
        let total = self.total();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::NoSampleableMass);
        }
        let mut u = rng.random::<f64>() * total;
        if u >= total {
            u = total.next_down();
        }
        Ok(self.find(u))
    }

    /// Leaf reached by descending with `u ∈ [0, total)`.
    pub fn find(&self, mut u: f64) -> ProblemId {
        let mut i = 0;
        while i < self.capacity - 1 {
            let left = 2 * i + 1;
            let right = left + 1;
            if u < self.nodes[left] {
                i = left;
            } else if self.nodes[right] > 0.0 {
                u -= self.nodes[left];
                i = right;
            } else {
                // u landed on the boundary through rounding
                i = left;
            }
        }
        self.id_of[i - (self.capacity - 1)]
    }

    /// An id drawn uniformly over the members, ignoring masses.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ProblemId> {
        if self.len == 0 {
            return Err(Error::EmptyHeap);
        }
        Ok(self.id_of[rng.random_range(0..self.len)])
    }

    /// Recompute every internal node from the leaves.
    pub fn rebuild(&mut self) {
        for i in (0..self.capacity - 1).rev() {
            self.nodes[i] = self.nodes[2 * i + 1] + self.nodes[2 * i + 2];
        }
    }

    /// Rebuild from leaves previously returned by [`SumTree::leaves`].
    pub fn from_leaves(
        capacity: usize,
        exponent: f64,
        leaves: &[(ProblemId, f64)],
    ) -> Result<Self> {
        if !capacity.is_power_of_two() || capacity < leaves.len() {
            return Err(Error::Checkpoint(format!(
                "sum-tree capacity {capacity} invalid for {} leaves",
                leaves.len()
            )));
        }
        let mut t = SumTree::new(capacity, exponent);
        for &(id, mass) in leaves {
            if t.contains(id) {
                return Err(Error::DuplicateId(id));
            }
            if !(mass.is_finite() && mass >= 0.0) {
                return Err(Error::Checkpoint(format!("bad mass {mass} for {id}")));
            }
            let leaf = t.len;
            t.push_leaf(id, leaf);
            t.nodes[capacity - 1 + leaf] = mass;
        }
        t.rebuild();
        Ok(t)
    }

    /// Check node sums, zero absent leaves and the id maps.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let base = self.capacity - 1;
        for i in 0..base {
            let sum = self.nodes[2 * i + 1] + self.nodes[2 * i + 2];
            let tol = 1e-9 * sum.abs().max(f64::MIN_POSITIVE);
            if (self.nodes[i] - sum).abs() > tol {
                return Err(format!(
                    "node {i} = {} but children sum to {sum}",
                    self.nodes[i]
                ));
            }
        }
        for l in self.len..self.capacity {
            if self.nodes[base + l] != 0.0 {
                return Err(format!("vacant leaf {l} holds {}", self.nodes[base + l]));
            }
        }
        for (l, &id) in self.id_of.iter().enumerate() {
            if self.leaf(id) != Some(l) {
                return Err(format!("leaf map disagrees for {id}"));
            }
        }
        let mapped = self.leaf_of.iter().filter(|l| l.is_some()).count();
        if mapped != self.len {
            return Err(format!("{mapped} ids mapped for {} leaves", self.len));
        }
        Ok(())
    }

    fn leaf(&self, id: ProblemId) -> Option<usize> {
        self.leaf_of.get(id.index()).copied().flatten()
    }

    fn set_mass(&mut self, id: ProblemId, mass: f64) {
        let leaf = match self.leaf(id) {
            Some(l) => l,
            None => {
                if self.len == self.capacity {
                    self.grow();
                }
                let l = self.len;
                self.push_leaf(id, l);
                l
            }
        };
        self.write_leaf(leaf, mass);
    }

    fn push_leaf(&mut self, id: ProblemId, leaf: usize) {
        if id.index() >= self.leaf_of.len() {
            self.leaf_of.resize(id.index() + 1, None);
        }
        self.leaf_of[id.index()] = Some(leaf);
        self.id_of.push(id);
        self.len += 1;
    }

    fn write_leaf(&mut self, leaf: usize, mass: f64) {
        let mut i = self.capacity - 1 + leaf;
        self.nodes[i] = mass;
        while i > 0 {
            i = (i - 1) / 2;
            self.nodes[i] = self.nodes[2 * i + 1] + self.nodes[2 * i + 2];
        }
    }

    fn grow(&mut self) {
        let old_base = self.capacity - 1;
        let capacity = self.capacity * 2;
        let mut nodes = vec![0.0; 2 * capacity - 1];
        let new_base = capacity - 1;
        nodes[new_base..new_base + self.len]
            .copy_from_slice(&self.nodes[old_base..old_base + self.len]);
        self.capacity = capacity;
        self.nodes = nodes;
        self.rebuild();
    }
}
