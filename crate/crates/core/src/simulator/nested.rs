//! Discrete-time state of a `k`-level nested repeater chain.
//!
//! The chain has `2^k` elementary links between nodes `0..=2^k`. End nodes
//! hold one memory, every inner node two (one per side). A level-`j`
//! segment spans links `[m 2^j, (m + 1) 2^j)`; it forms when its two
//! level-`(j - 1)` halves are both ready, after a swap at the middle node
//! that takes `2^(j - 1)` steps of classical signalling.
//!
//! One call to [`NestedChainState::step`] is one elementary step `tau`:
//!
//! 1. every link allowed to generate attempts once, succeeding with `p`;
//! 2. pending swaps count down, and finish when they reach zero;
//! 3. a ready end-to-end pair is delivered and its end memories freed;
//! 4. swaps start wherever two sibling segments are both ready.
//!
//! For `k = 1` this is exactly the two-link single-heralded chain with a
//! swap that always succeeds.

use rand::Rng;

/// Largest supported nesting level (`2^16` links).
pub const MAX_NESTED_LEVEL: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Absent,
    Ready,
    /// Swap in flight; steps remaining.
    Pending(u32),
}

impl Segment {
    fn is_live(self) -> bool {
        !matches!(self, Segment::Absent)
    }
}

/// When may an elementary link generate again after its pair was used in a swap?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegenerationPolicy {
    /// As soon as both of its memories are free. A swap frees the two
    /// memories of its middle node; a live pair holds the outer memory of
    /// each of its end nodes.
    #[default]
    FreeMemory,
    /// Only after the next end-to-end delivery.
    AfterDelivery,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedChainState {
    level_k: u32,
    policy: RegenerationPolicy,
    /// `levels[j][m]` is the level-`j` segment with index `m`.
    levels: Vec<Vec<Segment>>,
    /// Memory facing right (towards higher node indices), per node.
    right_held: Vec<bool>,
    /// Memory facing left, per node.
    left_held: Vec<bool>,
    /// Links that generated since the last delivery (`AfterDelivery` only).
    used: Vec<bool>,
}

impl NestedChainState {
    pub fn new(level_k: u32, policy: RegenerationPolicy) -> Self {
        assert!((1..=MAX_NESTED_LEVEL).contains(&level_k), "nesting level out of range");
        let links = 1usize << level_k;
        Self {
            level_k,
            policy,
            levels: (0..=level_k).map(|j| vec![Segment::Absent; links >> j]).collect(),
            right_held: vec![false; links + 1],
            left_held: vec![false; links + 1],
            used: vec![false; links],
        }
    }

    pub fn level_k(&self) -> u32 {
        self.level_k
    }

    pub fn links(&self) -> usize {
        1 << self.level_k
    }

    pub fn segments(&self, level: u32) -> &[Segment] {
        &self.levels[level as usize]
    }

    /// Live segments as `(first node, last node, state)`.
    pub fn live_spans(&self) -> Vec<(usize, usize, Segment)> {
        let mut out = Vec::new();
        for (j, level) in self.levels.iter().enumerate() {
            for (m, &s) in level.iter().enumerate() {
                if s.is_live() {
                    out.push((m << j, (m + 1) << j, s));
                }
            }
        }
        out
    }

    fn can_generate(&self, link: usize) -> bool {
        if self.levels[0][link].is_live() {
            return false;
        }
        match self.policy {
            RegenerationPolicy::FreeMemory => !self.right_held[link] && !self.left_held[link + 1],
            RegenerationPolicy::AfterDelivery => !self.used[link],
        }
    }

    /// Advances one step; returns true if an end-to-end pair was delivered.
    pub fn step<R: Rng + ?Sized>(&mut self, p: f64, rng: &mut R) -> bool {
        for link in 0..self.links() {
            if self.can_generate(link) && rng.random::<f64>() < p {
                self.levels[0][link] = Segment::Ready;
                self.right_held[link] = true;
                self.left_held[link + 1] = true;
                self.used[link] = true;
            }
        }

        for level in self.levels.iter_mut().skip(1) {
            for seg in level.iter_mut() {
                if let Segment::Pending(t) = *seg {
                    *seg = if t <= 1 { Segment::Ready } else { Segment::Pending(t - 1) };
                }
            }
        }

        let top = self.level_k as usize;
        let delivered = self.levels[top][0] == Segment::Ready;
        if delivered {
            self.levels[top][0] = Segment::Absent;
            self.right_held[0] = false;
            let last = self.links();
            self.left_held[last] = false;
            self.used.iter_mut().for_each(|u| *u = false);
        }

        for j in 1..=top {
            let duration = 1u32 << (j - 1);
            for m in 0..self.levels[j].len() {
                let (a, b) = (2 * m, 2 * m + 1);
                if self.levels[j][m] == Segment::Absent
                    && self.levels[j - 1][a] == Segment::Ready
                    && self.levels[j - 1][b] == Segment::Ready
                {
                    self.levels[j - 1][a] = Segment::Absent;
                    self.levels[j - 1][b] = Segment::Absent;
                    self.levels[j][m] = Segment::Pending(duration);
                    let middle = (2 * m + 1) << (j - 1);
                    self.left_held[middle] = false;
                    self.right_held[middle] = false;
                }
            }
        }
        delivered
    }

    /// Structural checks: swap timers, memory bookkeeping, and (under
    /// `AfterDelivery`) non-overlapping live spans.
    pub fn check_invariants(&self) -> Result<(), String> {
        let nodes = self.links() + 1;
        let mut right = vec![0u32; nodes];
        let mut left = vec![0u32; nodes];
        for (j, level) in self.levels.iter().enumerate() {
            for (m, &s) in level.iter().enumerate() {
                match s {
                    Segment::Absent => continue,
                    Segment::Pending(t) => {
                        if j == 0 || t == 0 || t > 1 << (j - 1) {
                            return Err(format!("bad timer {t} at level {j}, segment {m}"));
                        }
                        let children = &self.levels[j - 1][2 * m..2 * m + 2];
                        if children.iter().any(|c| c.is_live()) {
                            return Err(format!("pending segment {j}/{m} has a live half"));
                        }
                    }
                    Segment::Ready => {}
                }
                right[m << j] += 1;
                left[(m + 1) << j] += 1;
            }
        }
        for node in 0..nodes {
            if right[node] > 1 || left[node] > 1 {
                return Err(format!("memory of node {node} held twice"));
            }
            if (right[node] == 1) != self.right_held[node] || (left[node] == 1) != self.left_held[node] {
                return Err(format!("memory flags of node {node} out of sync"));
            }
        }
        if self.policy == RegenerationPolicy::AfterDelivery {
            let mut cover = vec![0u32; self.links()];
            for (a, b, _) in self.live_spans() {
                if !(b - a).is_power_of_two() {
                    return Err(format!("span {a}..{b} is not a power of two"));
                }
                for c in &mut cover[a..b] {
                    *c += 1;
                }
            }
            if cover.iter().any(|&c| c > 1) {
                return Err("live spans overlap".into());
            }
        }
        Ok(())
    }
}
