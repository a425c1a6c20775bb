//! The sequential veto procedure. Every voter casts k vetoes; a veto lands on
//! the caster's least preferred candidate that is still eligible, eliminating
//! it first if its score has already been exhausted. Candidates surviving all
//! n*k vetoes win.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::election::{CandidateId, Election, ElectionError, VoterId};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum VetoError {
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error("veto order must list each of the {n} voters exactly {k} times")]
    InvalidOrder { n: usize, k: usize },
    #[error("{orders} distinct veto orders exceed the cap of {cap}")]
    BudgetExceeded { orders: String, cap: u128 },
}

/// A processing order for the n*k vetoes: each voter appears exactly k times.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VetoOrder {
    seq: Vec<VoterId>,
}

impl VetoOrder {
    pub fn new(seq: Vec<VoterId>, e: &Election, k: usize) -> Result<Self, VetoError> {
        e.check_k(k)?;
        let n = e.num_voters();
        let mut counts = vec![0usize; n];
        for v in &seq {
            if v.0 >= n {
                return Err(VetoError::InvalidOrder { n, k });
            }
            counts[v.0] += 1;
        }
        if counts.iter().any(|&c| c != k) {
            return Err(VetoError::InvalidOrder { n, k });
        }
        Ok(VetoOrder { seq })
    }

    /// All of voter 0's vetoes, then voter 1's, and so on.
    pub fn by_voter(e: &Election, k: usize) -> Result<Self, VetoError> {
        e.check_k(k)?;
        let seq = e.voters().flat_map(|v| std::iter::repeat(v).take(k)).collect();
        Ok(VetoOrder { seq })
    }

    /// Parses a single line of space-separated 1-based voter indices.
    pub fn parse_line(line: &str, e: &Election, k: usize) -> Result<Self, VetoError> {
        let n = e.num_voters();
        let mut seq = Vec::new();
        for token in line.split_whitespace() {
            let idx: usize = token
                .parse()
                .map_err(|_| VetoError::InvalidOrder { n, k })?;
            if idx < 1 {
                return Err(VetoError::InvalidOrder { n, k });
            }
            seq.push(VoterId(idx - 1));
        }
        VetoOrder::new(seq, e, k)
    }

    /// Writes the order as one line of 1-based voter indices.
    pub fn to_line(&self) -> String {
        let parts: Vec<String> = self.seq.iter().map(|v| (v.0 + 1).to_string()).collect();
        parts.join(" ")
    }

    pub fn seq(&self) -> &[VoterId] {
        &self.seq
    }
}

/// Eligible-candidate set plus the remaining score of every candidate.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct ScoreState {
    pub eligible: BTreeSet<CandidateId>,
    pub scores: Vec<u64>,
}

/// One step of a run. `veto` is the 0-based index into the order.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VetoEvent {
    Eliminate { candidate: CandidateId, veto: usize },
    Decrement { candidate: CandidateId, veto: usize },
}

/// Full log of a run: per veto, zero or more eliminations followed by exactly
/// one decrement. Total decrements equal n*k; eliminations are at most m-1.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct VetoTrace {
    pub events: Vec<VetoEvent>,
    pub final_state: ScoreState,
}

/// Runs the procedure for one veto order. Identical inputs produce identical
/// traces, byte for byte under serialization.
pub fn run_k_approval_veto(
    e: &Election,
    k: usize,
    order: &VetoOrder,
) -> Result<(BTreeSet<CandidateId>, VetoTrace), VetoError> {
    // Revalidate: the order may have been built against a different election.
    VetoOrder::new(order.seq.clone(), e, k)?;
    let mut scores = e.k_approval_scores(k)?;
    let mut eligible: BTreeSet<CandidateId> = e.candidates().collect();
    let mut events = Vec::with_capacity(order.seq.len());

    for (idx, &v) in order.seq.iter().enumerate() {
        loop {
            let bottom = e.bottom_of(v, &eligible).expect("eligible set never empties");
            if scores[bottom.0] == 0 {
                eligible.remove(&bottom);
                debug_assert!(!eligible.is_empty(), "a positive-score candidate remains");
                events.push(VetoEvent::Eliminate { candidate: bottom, veto: idx });
            } else {
                scores[bottom.0] -= 1;
                events.push(VetoEvent::Decrement { candidate: bottom, veto: idx });
                break;
            }
        }
    }

    let winners = eligible.clone();
    let trace = VetoTrace { events, final_state: ScoreState { eligible, scores } };
    Ok((winners, trace))
}

/// Search budget for `enumerate_possible_winners`.
///
/// Exhaustive mode refuses to start when the number of distinct orders,
/// (nk)! / (k!)^n, exceeds `order_cap` (`None` lifts the cap; the search
/// itself dedups orders by memoizing on reachable states, so it is routinely
/// far cheaper than the order count suggests). Sample mode unions the winners
/// of `count` seeded random orders and may miss winners, never invent them.
#[derive(Clone, Debug)]
pub enum WinnerBudget {
    Exhaustive { order_cap: Option<u128> },
    Sample { count: usize, seed: u64 },
}

/// Default cap used by callers that do not configure one.
pub const DEFAULT_BUDGET: u128 = 100_000;

impl Default for WinnerBudget {
    fn default() -> Self {
        WinnerBudget::Exhaustive { order_cap: Some(DEFAULT_BUDGET) }
    }
}

/// Number of distinct veto orders, (nk)! / (k!)^n; `None` on u128 overflow.
pub fn distinct_order_count(n: usize, k: usize) -> Option<u128> {
    // Product of binomials C(ik, k) for i = 1..n stays integral throughout.
    let mut total: u128 = 1;
    for i in 1..=n {
        let mut binom: u128 = 1;
        for j in 0..k {
            let top = (i as u128).checked_mul(k as u128)?.checked_sub(j as u128)?;
            binom = binom.checked_mul(top)?;
            binom /= (j as u128) + 1;
        }
        total = total.checked_mul(binom)?;
    }
    Some(total)
}

/// Union of winner sets over veto orders, either all of them or a sample.
pub fn enumerate_possible_winners(
    e: &Election,
    k: usize,
    budget: &WinnerBudget,
) -> Result<BTreeSet<CandidateId>, VetoError> {
    e.check_k(k)?;
    match budget {
        WinnerBudget::Exhaustive { order_cap } => {
            if let Some(cap) = order_cap {
                match distinct_order_count(e.num_voters(), k) {
                    Some(orders) if orders <= *cap => {}
                    Some(orders) => {
                        return Err(VetoError::BudgetExceeded { orders: orders.to_string(), cap: *cap })
                    }
                    None => {
                        return Err(VetoError::BudgetExceeded {
                            orders: "more than u128 can hold".into(),
                            cap: *cap,
                        })
                    }
                }
            }
            Ok(exhaustive_winners(e, k))
        }
        WinnerBudget::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut base: Vec<VoterId> = e
                .voters()
                .flat_map(|v| std::iter::repeat(v).take(k))
                .collect();
            let mut winners = BTreeSet::new();
            for _ in 0..*count {
                base.shuffle(&mut rng);
                let order = VetoOrder { seq: base.clone() };
                let (w, _) = run_k_approval_veto(e, k, &order)?;
                winners.extend(w);
            }
            Ok(winners)
        }
    }
}

/// Search state. Voters with identical rankings are interchangeable, so the
/// remaining-veto counts are kept per ranking type, as a histogram over how
/// many vetoes each voter of that type still holds.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
struct SearchKey {
    eligible: u32,
    scores: Vec<u64>,
    remaining: Vec<u32>,
}

struct Search<'a> {
    e: &'a Election,
    k: usize,
    type_rankings: Vec<VoterId>,
    memo: HashMap<SearchKey, u32>,
}

fn exhaustive_winners(e: &Election, k: usize) -> BTreeSet<CandidateId> {
    // Group voters by ranking.
    let mut type_of: HashMap<&[CandidateId], usize> = HashMap::new();
    let mut type_rankings: Vec<VoterId> = Vec::new();
    let mut type_sizes: Vec<u32> = Vec::new();
    for v in e.voters() {
        let key = e.ranking(v).order();
        let t = *type_of.entry(key).or_insert_with(|| {
            type_rankings.push(v);
            type_sizes.push(0);
            type_rankings.len() - 1
        });
        type_sizes[t] += 1;
    }

    let num_types = type_rankings.len();
    // remaining[t * (k + 1) + r] = number of type-t voters holding r vetoes.
    let mut remaining = vec![0u32; num_types * (k + 1)];
    for (t, &size) in type_sizes.iter().enumerate() {
        remaining[t * (k + 1) + k] = size;
    }

    let key = SearchKey {
        eligible: (1u32 << e.num_candidates()) - 1,
        scores: e.k_approval_scores(k).expect("k checked by caller"),
        remaining,
    };
    let mut search = Search { e, k, type_rankings, memo: HashMap::new() };
    let mask = search.winners(key);
    (0..e.num_candidates())
        .filter(|c| mask & (1 << c) != 0)
        .map(CandidateId)
        .collect()
}

impl<'a> Search<'a> {
    fn winners(&mut self, key: SearchKey) -> u32 {
        if let Some(&mask) = self.memo.get(&key) {
            return mask;
        }
        let k = self.k;
        let mut mask = 0u32;
        let mut terminal = true;
        for t in 0..self.type_rankings.len() {
            for r in 1..=k {
                if key.remaining[t * (k + 1) + r] == 0 {
                    continue;
                }
                terminal = false;
                let mut next = key.clone();
                next.remaining[t * (k + 1) + r] -= 1;
                next.remaining[t * (k + 1) + r - 1] += 1;
                self.apply_veto(&mut next, self.type_rankings[t]);
                mask |= self.winners(next);
            }
        }
        if terminal {
            mask = key.eligible;
        }
        self.memo.insert(key, mask);
        mask
    }

    fn apply_veto(&self, key: &mut SearchKey, v: VoterId) {
        let r = self.e.ranking(v);
        loop {
            let bottom = r
                .order()
                .iter()
                .rev()
                .find(|c| key.eligible & (1 << c.0) != 0)
                .expect("eligible set never empties");
            if key.scores[bottom.0] == 0 {
                key.eligible &= !(1 << bottom.0);
            } else {
                key.scores[bottom.0] -= 1;
                break;
            }
        }
    }
}
