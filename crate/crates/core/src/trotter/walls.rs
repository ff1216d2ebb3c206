//! Spin sequences `s_0 = 1, s_1, …, s_{n-1}` grouped by the number of domain
//! walls on the `n-1` bonds between them.
//!
//! A wall at bond `p ∈ 1..n` means `s_p ≠ s_{p-1}`. Wall sets of a given size
//! are produced in colexicographic order, and any position in that order can
//! be reached directly by unranking, which lets the enumeration be split into
//! independent contiguous chunks.

use crate::numeric::binomial;

/// `k`-subsets of `{0, …, n_items-1}` in colex order.
#[derive(Debug, Clone)]
pub struct Colex {
    n_items: usize,
    current: Vec<usize>,
    remaining: u128,
    started: bool,
}

impl Colex {
    pub fn new(n_items: usize, k: usize) -> Self {
        Self::starting_at(n_items, k, 0)
    }

    /// Start at colex rank `rank`.
    pub fn starting_at(n_items: usize, k: usize, rank: u128) -> Self {
        let total = binomial(n_items as u64, k as u64);
        if rank >= total {
            return Colex {
                n_items,
                current: Vec::new(),
                remaining: 0,
                started: false,
            };
        }
        Colex {
            n_items,
            current: unrank_colex(rank, k),
            remaining: total - rank,
            started: false,
        }
    }

    /// Limit the iterator to at most `count` further subsets.
    pub fn take_count(mut self, count: u128) -> Self {
        self.remaining = self.remaining.min(count);
        self
    }

    /// Advance in place and hand out a borrowed view, avoiding an allocation
    /// per subset.
    pub fn next_ref(&mut self) -> Option<&[usize]> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        if self.started {
            advance(&mut self.current, self.n_items);
        }
        self.started = true;
        Some(&self.current)
    }
}

/// Subset with colex rank `rank`: `rank = Σ_i C(c_i, i+1)`.
pub fn unrank_colex(mut rank: u128, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for i in (1..=k).rev() {
        // largest c with C(c, i) <= rank
        let mut c = i - 1;
        while binomial(c as u64 + 1, i as u64) <= rank {
            c += 1;
        }
        out[i - 1] = c;
        rank -= binomial(c as u64, i as u64);
    }
    out
}

/// Next subset in colex order. Returns false after the last one.
fn advance(c: &mut [usize], n_items: usize) -> bool {
    let k = c.len();
    for i in 0..k {
        let limit = if i + 1 < k { c[i + 1] } else { n_items };
        if c[i] + 1 < limit {
            c[i] += 1;
            for (j, x) in c.iter_mut().enumerate().take(i) {
                *x = j;
            }
            return true;
        }
    }
    false
}

/// A spin sequence and its wall positions (bond indices in `1..n`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinSequence {
    pub walls: Vec<usize>,
    pub spins: Vec<i8>,
}

impl SpinSequence {
    pub fn from_walls(n: usize, walls: Vec<usize>) -> Self {
        let mut spins = vec![1i8; n];
        let mut s = 1i8;
        let mut it = walls.iter().peekable();
        for (p, x) in spins.iter_mut().enumerate() {
            while it.peek() == Some(&&p) {
                s = -s;
                it.next();
            }
            *x = s;
        }
        SpinSequence { walls, spins }
    }

    pub fn domain_walls(&self) -> usize {
        self.walls.len()
    }
}

/// Every sequence with at most `m_max` walls, grouped by wall count and in
/// colex order within a group. Yields `Σ_{m ≤ m_max} C(n-1, m)` sequences.
pub fn enumerate_by_domain_walls(n: usize, m_max: usize) -> impl Iterator<Item = SpinSequence> {
    assert!(n >= 1, "chain needs at least one site");
    let bonds = n - 1;
    (0..=m_max.min(bonds)).flat_map(move |m| {
        let mut it = Colex::new(bonds, m);
        std::iter::from_fn(move || {
            it.next_ref()
                .map(|c| SpinSequence::from_walls(n, c.iter().map(|&b| b + 1).collect()))
        })
    })
}
