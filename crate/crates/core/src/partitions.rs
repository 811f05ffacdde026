//! Set partitions of `{1..n}` and the noncrossing lattice NC(n).
//!
//! Enumeration walks restricted growth strings (the element-to-block map)
//! in lexicographic order and only ever extends a prefix by a block that is
//! still "visible", so every leaf of the search is a noncrossing partition.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Largest ground set accepted by the enumerators (C_18 is about 4.8e8).
pub const MAX_ENUMERATION_SIZE: usize = 18;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// Builds a partition from 1-based blocks. Blocks are sorted internally
    /// and reordered by least element; overlaps, gaps and out-of-range
    /// elements are rejected.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("ground set must be nonempty"));
        }
        let mut seen = vec![false; n + 1];
        let mut blocks = blocks;
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::validation("empty block"));
            }
            block.sort_unstable();
            for &e in block.iter() {
                if e == 0 || e > n {
                    return Err(Error::validation(format!("element {e} outside 1..={n}")));
                }
                if seen[e] {
                    return Err(Error::validation(format!(
                        "element {e} appears in two blocks"
                    )));
                }
                seen[e] = true;
            }
        }
        if let Some(missing) = (1..=n).find(|&e| !seen[e]) {
            return Err(Error::validation(format!("element {missing} not covered")));
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(SetPartition { n, blocks })
    }

    /// Builds a partition from a 0-based element-to-block map.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let n = labels.len();
        let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            by_label.entry(l).or_default().push(i + 1);
        }
        SetPartition::new(n, by_label.into_values().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Element-to-block-index map, 0-based on both sides.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &e in block {
                labels[e - 1] = b;
            }
        }
        labels
    }

    /// True iff there are no `a < b < c < d` with `a, c` in one block and
    /// `b, d` in another.
    pub fn is_noncrossing(&self) -> bool {
        let labels = self.labels();
        // For each element, the block it joins must be visible: every element
        // strictly between the block's previous element and this one must
        // belong to a block that opened after that previous element.
        let mut first = vec![usize::MAX; self.blocks.len()];
        let mut last = vec![usize::MAX; self.blocks.len()];
        for (i, &b) in labels.iter().enumerate() {
            if last[b] != usize::MAX {
                let prev = last[b];
                if ((prev + 1)..i).any(|j| first[labels[j]] < prev) {
                    return false;
                }
            } else {
                first[b] = i;
            }
            last[b] = i;
        }
        true
    }

    /// Block sizes in block order; they sum to `n`.
    pub fn block_profile(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_ENUMERATION_SIZE {
        return Err(Error::Size(format!(
            "noncrossing enumeration supports 1 <= n <= {MAX_ENUMERATION_SIZE}, got {n}"
        )));
    }
    Ok(())
}

/// Depth-first walk over NC(n). The visitor receives the label array and
/// the block sizes of each complete partition.
pub fn for_each_noncrossing<F>(n: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&[usize], &[usize]),
{
    check_size(n)?;
    let mut walker = Walker {
        n,
        labels: vec![0; n],
        first: Vec::with_capacity(n),
        last: Vec::with_capacity(n),
        sizes: Vec::with_capacity(n),
    };
    walker.descend(0, &mut visit);
    Ok(())
}

struct Walker {
    n: usize,
    labels: Vec<usize>,
    first: Vec<usize>,
    last: Vec<usize>,
    sizes: Vec<usize>,
}

impl Walker {
    fn visible(&self, block: usize, i: usize) -> bool {
        let prev = self.last[block];
        ((prev + 1)..i).all(|j| self.first[self.labels[j]] > prev)
    }

    fn descend<F: FnMut(&[usize], &[usize])>(&mut self, i: usize, visit: &mut F) {
        if i == self.n {
            visit(&self.labels, &self.sizes);
            return;
        }
        for b in 0..self.sizes.len() {
            if !self.visible(b, i) {
                continue;
            }
            let saved = self.last[b];
            self.labels[i] = b;
            self.last[b] = i;
            self.sizes[b] += 1;
            self.descend(i + 1, visit);
            self.sizes[b] -= 1;
            self.last[b] = saved;
        }
        let b = self.sizes.len();
        self.labels[i] = b;
        self.first.push(i);
        self.last.push(i);
        self.sizes.push(1);
        self.descend(i + 1, visit);
        self.sizes.pop();
        self.last.pop();
        self.first.pop();
    }
}

/// All noncrossing partitions of `{1..n}`, ordered lexicographically by
/// their element-to-block map.
pub fn enumerate_noncrossing(n: usize) -> Result<Vec<SetPartition>> {
    let mut out = Vec::new();
    for_each_noncrossing(n, |labels, _| {
        out.push(SetPartition::from_labels(labels).expect("walker emits valid labels"));
    })?;
    Ok(out)
}

pub fn count_noncrossing(n: usize) -> Result<u64> {
    let mut count = 0u64;
    for_each_noncrossing(n, |_, _| count += 1)?;
    Ok(count)
}

/// A block-size multiset (sorted descending) together with the number of
/// partitions in NC(n) that have it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileCount {
    pub sizes: Vec<usize>,
    pub count: u64,
}

/// Groups NC(n) by block profile. Every product over blocks that only
/// depends on block sizes can be summed over NC(n) through this table.
///
/// Multiplicities come from Kreweras' formula: the number of noncrossing
/// partitions of `{1..n}` with `m_i` blocks of size `i` and `b` blocks in
/// total is `n! / ((n - b + 1)! * prod m_i!)`. Tables are cached per `n`.
pub fn profile_counts(n: usize) -> Result<Arc<Vec<ProfileCount>>> {
    check_size(n)?;
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<ProfileCount>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("profile cache poisoned").get(&n) {
        return Ok(hit.clone());
    }
    let table = Arc::new(
        integer_partitions(n)
            .into_iter()
            .map(|sizes| {
                let count = kreweras_count(n, &sizes);
                ProfileCount { sizes, count }
            })
            .collect::<Vec<_>>(),
    );
    cache
        .lock()
        .expect("profile cache poisoned")
        .insert(n, table.clone());
    Ok(table)
}

/// Same table as [`profile_counts`], obtained by walking NC(n).
pub fn profile_counts_enumerated(n: usize) -> Result<Vec<ProfileCount>> {
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    for_each_noncrossing(n, |_, sizes| {
        let mut key = sizes.to_vec();
        key.sort_unstable_by(|a, b| b.cmp(a));
        *counts.entry(key).or_insert(0) += 1;
    })?;
    Ok(counts
        .into_iter()
        .map(|(sizes, count)| ProfileCount { sizes, count })
        .collect())
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn kreweras_count(n: usize, sizes: &[usize]) -> u64 {
    let blocks = sizes.len();
    let mut multiplicities: BTreeMap<usize, usize> = BTreeMap::new();
    for &s in sizes {
        *multiplicities.entry(s).or_insert(0) += 1;
    }
    let denom: u128 = factorial(n - blocks + 1)
        * multiplicities
            .values()
            .map(|&m| factorial(m))
            .product::<u128>();
    (factorial(n) / denom) as u64
}

/// Integer partitions of `n`, each sorted descending, in lexicographic order.
fn integer_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(rest: usize, max: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(current.clone());
            return;
        }
        for part in (1..=rest.min(max)).rev() {
            current.push(part);
            go(rest - part, part, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    go(n, n, &mut Vec::new(), &mut out);
    out.sort();
    out
}
