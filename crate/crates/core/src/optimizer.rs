//! Greedy maximization of the consensus score under a cardinality budget.
//!
//! [`saga`] is the accelerated (lazy) greedy: cached gains live in a
//! max-priority queue and stay valid upper bounds under submodularity, so
//! most candidates are never re-evaluated. [`eager_greedy`] rescans every
//! candidate each step and serves as the reference implementation;
//! [`exhaustive`] enumerates subsets and is only meant for verification at
//! toy sizes. All three share one tie rule: equal gains go to the lowest
//! item id, so results are fully deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::consensus::{GscoreState, SaturationSpec};
use crate::error::{Error, Result};
use crate::model::ItemId;

/// Outcome of one greedy run.
#[derive(Debug, Clone)]
pub struct RecommendationResult {
    /// Selected items in selection order.
    pub selected: Vec<ItemId>,
    /// Marginal gain realized at each step.
    pub gains: Vec<f64>,
    /// Final consensus score of the selection.
    pub objective: f64,
    /// `1 - (1 - 1/k)^k` over the performed steps: the guaranteed fraction
    /// of the optimal value for monotone submodular objectives.
    pub certificate: f64,
    /// Number of true gain evaluations performed.
    pub evaluations: usize,
}

fn certificate_factor(k: usize) -> f64 {
    let k = k as f64;
    1.0 - (1.0 - 1.0 / k).powf(k)
}

#[derive(Debug)]
struct QueueEntry {
    gain: f64,
    item: ItemId,
    stamp: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on gain; ties pop the lowest item id first
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.item.cmp(&self.item))
    }
}

/// Max-priority queue of cached marginal gains. Cached values are upper
/// bounds on the true current gains as long as the objective is submodular
/// and each stored gain was exact when computed.
#[derive(Debug, Default)]
pub struct LazyQueue {
    heap: BinaryHeap<QueueEntry>,
}

impl LazyQueue {
    pub fn with_capacity(n: usize) -> Self {
        LazyQueue {
            heap: BinaryHeap::with_capacity(n),
        }
    }

    pub fn push(&mut self, item: ItemId, gain: f64, stamp: usize) {
        self.heap.push(QueueEntry { gain, item, stamp });
    }

    pub fn pop(&mut self) -> Option<(ItemId, f64, usize)> {
        self.heap.pop().map(|e| (e.item, e.gain, e.stamp))
    }

    /// Largest cached gain among the remaining entries.
    pub fn peek_gain(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.gain)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

fn check_start(state: &GscoreState, k: usize) -> Result<Vec<ItemId>> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    if !state.selected().is_empty() {
        return Err(Error::StateNotEmpty);
    }
    let candidates = state.candidates();
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    Ok(candidates)
}

/// Accelerated greedy. Initializes the queue with every candidate's
/// singleton score, then repeatedly pops the largest cached gain,
/// recomputes it against the current selection, and either commits (the
/// fresh gain still beats every other cached bound) or re-inserts the
/// entry with its updated gain. An entry whose gain was computed at the
/// current selection size is already exact and commits without another
/// evaluation.
pub fn saga(state: &mut GscoreState, sat: &SaturationSpec, k: usize) -> Result<RecommendationResult> {
    let candidates = check_start(state, k)?;
    let budget = k.min(candidates.len());

    // the base score only changes on commit; gains are scored against it
    let mut base = state.gscore(sat)?;
    let mut evaluations = 0usize;
    let mut queue = LazyQueue::with_capacity(candidates.len());
    for &e in &candidates {
        let gain = state.score_with(sat, e)? - base;
        evaluations += 1;
        queue.push(e, gain, 0);
    }

    let mut gains = Vec::with_capacity(budget);
    while state.selected().len() < budget {
        let (item, cached, stamp) = queue.pop().expect("queue exhausted before budget");
        let step = state.selected().len();
        if stamp == step {
            // computed against the current selection: already exact
            state.commit(item)?;
            base = state.gscore(sat)?;
            gains.push(cached);
            continue;
        }
        let fresh = state.score_with(sat, item)? - base;
        evaluations += 1;
        match queue.peek_gain() {
            Some(best_rest) if fresh < best_rest => {
                queue.push(item, fresh, step);
            }
            _ => {
                state.commit(item)?;
                base = state.gscore(sat)?;
                gains.push(fresh);
            }
        }
    }

    let objective = state.gscore(sat)?;
    Ok(RecommendationResult {
        selected: state.selected().to_vec(),
        certificate: certificate_factor(gains.len()),
        gains,
        objective,
        evaluations,
    })
}

/// Plain greedy: every step re-evaluates every remaining candidate.
pub fn eager_greedy(
    state: &mut GscoreState,
    sat: &SaturationSpec,
    k: usize,
) -> Result<RecommendationResult> {
    let candidates = check_start(state, k)?;
    let budget = k.min(candidates.len());

    let mut evaluations = 0usize;
    let mut gains = Vec::with_capacity(budget);
    for _ in 0..budget {
        let base = state.gscore(sat)?;
        let mut best: Option<(ItemId, f64)> = None;
        for e in state.candidates() {
            let gain = state.score_with(sat, e)? - base;
            evaluations += 1;
            // candidates are ascending, so strict improvement keeps the
            // lowest id on ties
            match best {
                Some((_, g)) if gain <= g => {}
                _ => best = Some((e, gain)),
            }
        }
        let (item, gain) = best.expect("candidates exhausted before budget");
        state.commit(item)?;
        gains.push(gain);
    }

    let objective = state.gscore(sat)?;
    Ok(RecommendationResult {
        selected: state.selected().to_vec(),
        certificate: certificate_factor(gains.len()),
        gains,
        objective,
        evaluations,
    })
}

/// Default subset cap for [`exhaustive`].
pub const EXHAUSTIVE_CAP: u128 = 2_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    out
}

/// True optimum by enumerating every k-subset of the candidates. Ties go
/// to the lexicographically smallest subset. Verification only.
pub fn exhaustive(
    state: &GscoreState,
    sat: &SaturationSpec,
    k: usize,
) -> Result<(Vec<ItemId>, f64)> {
    exhaustive_with_cap(state, sat, k, EXHAUSTIVE_CAP)
}

pub fn exhaustive_with_cap(
    state: &GscoreState,
    sat: &SaturationSpec,
    k: usize,
    cap: u128,
) -> Result<(Vec<ItemId>, f64)> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let candidates = state.candidates();
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let k = k.min(candidates.len());
    let subsets = binomial(candidates.len(), k);
    if subsets > cap {
        return Err(Error::EnumerationCap { subsets, cap });
    }

    let mut idx: Vec<usize> = (0..k).collect();
    let n = candidates.len();
    let mut best_set: Option<Vec<ItemId>> = None;
    let mut best_value = f64::NEG_INFINITY;
    let mut subset = vec![ItemId(0); k];
    loop {
        for (slot, &i) in subset.iter_mut().zip(&idx) {
            *slot = candidates[i];
        }
        let value = state.gscore_of(sat, &subset)?;
        if value > best_value {
            best_value = value;
            best_set = Some(subset.clone());
        }

        // advance the combination
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok((best_set.unwrap(), best_value));
            }
            pos -= 1;
            if idx[pos] != pos + n - k {
                idx[pos] += 1;
                for j in (pos + 1)..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}
