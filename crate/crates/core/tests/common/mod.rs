//! Shared brute-force oracles and fixtures for the integration suites.
//!
//! Everything here recomputes results from first principles, independent
//! of the library's matching and flow machinery, so suite failures point
//! at real disagreements rather than shared bugs.

use std::collections::BTreeSet;

use vetocore::generators::gen_random;
use vetocore::{CandidateId, Election};

/// Possible winners by definition: w survives unless some coalition T and
/// witness set S, with every T-voter ranking all of S above w, control
/// more vetoes than the k-approval budget leaves standing.
pub fn no_blocking_core(e: &Election, k: usize) -> BTreeSet<CandidateId> {
    let scores = e.k_approval_scores(k).expect("valid k");
    let n = e.num_voters();
    let m = e.num_candidates();
    let budget = (n * k) as u64;
    e.candidates()
        .filter(|&w| {
            for t_mask in 1u32..(1 << n) {
                for s_mask in 1u32..(1 << m) {
                    let all_prefer = e.voters().all(|v| {
                        if t_mask & (1 << v.0) == 0 {
                            return true;
                        }
                        e.candidates().all(|c| {
                            s_mask & (1 << c.0) == 0 || e.prefers(v, c, w)
                        })
                    });
                    if !all_prefer {
                        continue;
                    }
                    let coalition = k as u64 * u64::from(t_mask.count_ones());
                    let witness_score: u64 = e
                        .candidates()
                        .filter(|c| s_mask & (1 << c.0) != 0)
                        .map(|c| scores[c.0])
                        .sum();
                    if coalition + witness_score > budget {
                        return false;
                    }
                }
            }
            true
        })
        .collect()
}

/// Deterministic election suite: sizes cycle through n in 1..=5 and
/// m in 2..=4, seeds derived from `base`.
pub fn seeded_suite(count: usize, base: u64) -> Vec<Election> {
    (0..count)
        .map(|i| {
            let n = 1 + i % 5;
            let m = 2 + i % 3;
            gen_random(n, m, base + i as u64).expect("positive sizes")
        })
        .collect()
}
