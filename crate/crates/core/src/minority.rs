//! Mutual minority protection: how decisively a group must agree before it
//! can keep a bloc of candidates from winning.
//!
//! A set of voters solidly vetoes a candidate set S when each of them ranks
//! all of S at the bottom. The protection level of a candidate measures the
//! weakest such veto that still covers it; possible winners under the
//! k-approval veto rule are exactly the candidates whose protection is high.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::election::{CandidateId, Election, ElectionError, VoterId};
use crate::veto_core::{compute_core_set, CoreError};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum MinorityError {
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("candidate {candidate} out of range for {num_candidates} candidates")]
    UnknownCandidate { candidate: usize, num_candidates: usize },
    #[error("level {level} outside 1..={max}")]
    BadLevel { level: usize, max: usize },
    #[error("{n} voters x {m} candidates exceeds the brute-force limit")]
    TooLarge { n: usize, m: usize },
}

/// A bloc of candidates together with every voter that ranks the bloc at
/// the bottom of its order.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct SolidVeto {
    pub bloc: BTreeSet<CandidateId>,
    pub supporters: BTreeSet<VoterId>,
}

/// All solidly vetoed blocs with their maximal supporter sets, sorted by
/// (bloc size, bloc). Only ranking suffixes can be solidly vetoed, so the
/// list has at most n * m entries.
pub fn enumerate_solid_vetoes(e: &Election) -> Vec<SolidVeto> {
    let mut out: Vec<SolidVeto> = Vec::new();
    for size in 1..=e.num_candidates() {
        let mut seen: Vec<SolidVeto> = Vec::new();
        for v in e.voters() {
            let bloc = e.ranking(v).suffix_set(size);
            match seen.iter_mut().find(|sv| sv.bloc == bloc) {
                Some(sv) => {
                    sv.supporters.insert(v);
                }
                None => seen.push(SolidVeto {
                    bloc,
                    supporters: BTreeSet::from([v]),
                }),
            }
        }
        seen.sort_by(|a, b| a.bloc.cmp(&b.bloc));
        out.extend(seen);
    }
    out
}

/// A solid veto knocks out its bloc at level `ell` when
/// `ell * |supporters| > n * |bloc|`. The largest level that still spares
/// the bloc is `floor(n |bloc| / |supporters|)`.
fn spared_level(e: &Election, veto: &SolidVeto) -> usize {
    e.num_voters() * veto.bloc.len() / veto.supporters.len()
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct ProtectionReport {
    pub candidate: CandidateId,
    /// Largest level at which no solid veto covering the candidate fires.
    pub protection: usize,
    /// The veto that fires first, at `protection + 1`.
    pub witness: SolidVeto,
}

/// Protection level of one candidate: the minimum spared level over all
/// solid vetoes whose bloc contains it. The whole-candidate-set veto always
/// applies, so the result lies in 1..=m.
pub fn minority_protection(
    e: &Election,
    candidate: CandidateId,
) -> Result<ProtectionReport, MinorityError> {
    if candidate.0 >= e.num_candidates() {
        return Err(MinorityError::UnknownCandidate {
            candidate: candidate.0,
            num_candidates: e.num_candidates(),
        });
    }
    let mut best: Option<(usize, SolidVeto)> = None;
    for veto in enumerate_solid_vetoes(e) {
        if !veto.bloc.contains(&candidate) {
            continue;
        }
        let level = spared_level(e, &veto);
        if best.as_ref().is_none_or(|(b, _)| level < *b) {
            best = Some((level, veto));
        }
    }
    let (protection, witness) = best.expect("the full candidate set covers everyone");
    Ok(ProtectionReport { candidate, protection, witness })
}

/// Does the k-approval veto rule respect level-`ell` mutual minority on
/// this election? True when every solid veto firing at `ell` excludes its
/// whole bloc from the possible-winner set. `ell` may run one past m to
/// probe the first failing level.
pub fn satisfies_mutual_minority(
    e: &Election,
    k: usize,
    ell: usize,
) -> Result<bool, MinorityError> {
    let max = e.num_candidates() + 1;
    if ell == 0 || ell > max {
        return Err(MinorityError::BadLevel { level: ell, max });
    }
    let core = compute_core_set(e, k)?;
    for veto in enumerate_solid_vetoes(e) {
        let fires = ell * veto.supporters.len() > e.num_voters() * veto.bloc.len();
        if fires && veto.bloc.iter().any(|c| core.contains(c)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Definition-direct protection: scan every voter subset against every
/// candidate subset without the suffix shortcut. Exponential, so refuses
/// more than 10 voters or 5 candidates.
pub fn brute_force_protection_oracle(
    e: &Election,
    candidate: CandidateId,
) -> Result<usize, MinorityError> {
    let (n, m) = (e.num_voters(), e.num_candidates());
    if n > 10 || m > 5 {
        return Err(MinorityError::TooLarge { n, m });
    }
    if candidate.0 >= m {
        return Err(MinorityError::UnknownCandidate {
            candidate: candidate.0,
            num_candidates: m,
        });
    }
    let mut best = usize::MAX;
    for smask in 1u32..(1 << m) {
        if smask & (1 << candidate.0) == 0 {
            continue;
        }
        let bloc: Vec<CandidateId> =
            (0..m).filter(|c| smask & (1 << c) != 0).map(CandidateId).collect();
        for tmask in 1u32..(1 << n) {
            let voters: Vec<VoterId> =
                (0..n).filter(|v| tmask & (1 << v) != 0).map(VoterId).collect();
            let solid = voters.iter().all(|&v| {
                let suffix = e.ranking(v).suffix_set(bloc.len());
                bloc.iter().all(|c| suffix.contains(c))
            });
            if solid {
                best = best.min(n * bloc.len() / voters.len());
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bloc() -> Election {
        Election::parse("12 3\n7: 1 2 3\n5: 2 1 3\n").unwrap()
    }

    fn cids(ids: &[usize]) -> BTreeSet<CandidateId> {
        ids.iter().copied().map(CandidateId).collect()
    }

    #[test]
    fn solid_veto_enumeration() {
        let e = bloc();
        let vetoes = enumerate_solid_vetoes(&e);
        let shape: Vec<(Vec<usize>, usize)> = vetoes
            .iter()
            .map(|sv| {
                (sv.bloc.iter().map(|c| c.0).collect(), sv.supporters.len())
            })
            .collect();
        assert_eq!(
            shape,
            vec![
                (vec![2], 12),
                (vec![0, 2], 5),
                (vec![1, 2], 7),
                (vec![0, 1, 2], 12),
            ]
        );
    }

    #[test]
    fn bloc_protection_levels() {
        let e = bloc();
        let reports: Vec<ProtectionReport> = e
            .candidates()
            .map(|c| minority_protection(&e, c).unwrap())
            .collect();
        assert_eq!(
            reports.iter().map(|r| r.protection).collect::<Vec<_>>(),
            vec![3, 3, 1]
        );
        // Witness for candidate 0 is the full set (spared level 3 beats the
        // {0, 2} veto's 4); for candidate 1 the {1, 2} veto fires first.
        assert_eq!(reports[0].witness.bloc, cids(&[0, 1, 2]));
        assert_eq!(reports[1].witness.bloc, cids(&[1, 2]));
        assert_eq!(reports[1].witness.supporters.len(), 7);
        assert_eq!(reports[2].witness.bloc, cids(&[2]));
    }

    #[test]
    fn oracle_agrees_on_small_bloc() {
        // Same two-bloc shape as `bloc`, shrunk under the oracle's limit.
        let e = Election::parse("5 3\n3: 1 2 3\n2: 2 1 3\n").unwrap();
        let levels: Vec<usize> = e
            .candidates()
            .map(|c| {
                let fast = minority_protection(&e, c).unwrap().protection;
                assert_eq!(brute_force_protection_oracle(&e, c).unwrap(), fast);
                fast
            })
            .collect();
        assert_eq!(levels, vec![3, 3, 1]);
    }

    #[test]
    fn oracle_agrees_on_opposed_pair() {
        let e = Election::parse("2 2\n1: 1 2\n1: 2 1\n").unwrap();
        for c in e.candidates() {
            let fast = minority_protection(&e, c).unwrap().protection;
            assert_eq!(brute_force_protection_oracle(&e, c).unwrap(), fast);
            // Each candidate is one voter's sole bottom: floor(2*1/1) = 2.
            assert_eq!(fast, 2);
        }
    }

    #[test]
    fn mutual_minority_levels_on_bloc() {
        let e = bloc();
        // Level 4 under full approval fails: 7 of 12 voters solidly veto
        // {1, 2} (4 * 7 > 12 * 2) yet candidate 1 can win.
        assert!(satisfies_mutual_minority(&e, 3, 3).unwrap());
        assert!(!satisfies_mutual_minority(&e, 3, 4).unwrap());
        for ell in 1..=3 {
            assert!(satisfies_mutual_minority(&e, 1, ell).unwrap(), "ell={ell}");
        }
        // One past m the whole-set veto fires and covers the entire core.
        assert!(!satisfies_mutual_minority(&e, 1, 4).unwrap());
    }

    #[test]
    fn bad_inputs() {
        let e = bloc();
        assert!(matches!(
            minority_protection(&e, CandidateId(5)),
            Err(MinorityError::UnknownCandidate { .. })
        ));
        assert!(matches!(
            satisfies_mutual_minority(&e, 1, 0),
            Err(MinorityError::BadLevel { .. })
        ));
        assert!(matches!(
            satisfies_mutual_minority(&e, 1, 5),
            Err(MinorityError::BadLevel { level: 5, max: 4 })
        ));
        let wide = Election::parse("1 6\n1 2 3 4 5 6\n").unwrap();
        assert!(matches!(
            brute_force_protection_oracle(&wide, CandidateId(0)),
            Err(MinorityError::TooLarge { n: 1, m: 6 })
        ));
    }
}
