//! Election model: a profile of strict rankings over a shared candidate set,
//! the plain-text exchange format, and the rank queries everything else builds on.
//!
//! Candidates and voters are dense indices starting at 0. The text format is
//! 1-based; conversion happens only at the parse/write boundary.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Candidate index, dense in `0..m`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateId(pub usize);

/// Voter index, dense in `0..n`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoterId(pub usize);

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl fmt::Display for VoterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ElectionError {
    #[error("line {line}: malformed header, expected \"<num_voters> <num_candidates>\"")]
    MalformedHeader { line: usize },
    #[error("line {line}: voter line is not a permutation of 1..={m}")]
    NotAPermutation { line: usize, m: usize },
    #[error("voter count mismatch: header says {expected}, file provides {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("an election needs at least one voter and one candidate")]
    EmptyElection,
    #[error("k = {k} is out of range 1..={m}")]
    KOutOfRange { k: usize, m: usize },
    #[error("bottom_of needs a non-empty candidate subset")]
    EmptySubset,
}

/// A strict total order over all m candidates, most preferred first.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Ranking {
    order: Vec<CandidateId>,
    position: Vec<usize>,
}

impl Ranking {
    /// Builds a ranking from a most-preferred-first listing. Returns `None`
    /// unless `order` is a permutation of `0..order.len()`.
    pub fn from_order(order: Vec<CandidateId>) -> Option<Self> {
        let m = order.len();
        let mut position = vec![usize::MAX; m];
        for (pos, c) in order.iter().enumerate() {
            if c.0 >= m || position[c.0] != usize::MAX {
                return None;
            }
            position[c.0] = pos;
        }
        Some(Ranking { order, position })
    }

    /// Candidates from most to least preferred.
    pub fn order(&self) -> &[CandidateId] {
        &self.order
    }

    pub fn num_candidates(&self) -> usize {
        self.order.len()
    }

    /// 0-based position of `c`; position 0 is the top choice.
    pub fn position(&self, c: CandidateId) -> usize {
        self.position[c.0]
    }

    pub fn top(&self) -> CandidateId {
        self.order[0]
    }

    /// The `k` most preferred candidates, in preference order.
    pub fn prefix(&self, k: usize) -> &[CandidateId] {
        &self.order[..k]
    }

    /// The set of the `s` least preferred candidates.
    pub fn suffix_set(&self, s: usize) -> BTreeSet<CandidateId> {
        self.order[self.order.len() - s..].iter().copied().collect()
    }
}

/// A profile of strict rankings; voter v's ranking is `rankings[v]`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Election {
    rankings: Vec<Ranking>,
    m: usize,
}

impl Election {
    /// Wraps a profile. All rankings must cover the same candidate set;
    /// an empty profile or an empty candidate set is rejected.
    pub fn new(rankings: Vec<Ranking>) -> Result<Self, ElectionError> {
        let m = match rankings.first() {
            None => return Err(ElectionError::EmptyElection),
            Some(r) => r.num_candidates(),
        };
        if m == 0 {
            return Err(ElectionError::EmptyElection);
        }
        assert!(
            rankings.iter().all(|r| r.num_candidates() == m),
            "all rankings must cover the same candidate set"
        );
        Ok(Election { rankings, m })
    }

    pub fn num_voters(&self) -> usize {
        self.rankings.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.m
    }

    pub fn voters(&self) -> impl Iterator<Item = VoterId> {
        (0..self.num_voters()).map(VoterId)
    }

    pub fn candidates(&self) -> impl Iterator<Item = CandidateId> {
        (0..self.m).map(CandidateId)
    }

    pub fn ranking(&self, v: VoterId) -> &Ranking {
        &self.rankings[v.0]
    }

    /// Reads the text format: optional `#` comment lines and blank lines, a
    /// `n m` header, then voter lines `i1 i2 ... im` (1-based, best first),
    /// optionally prefixed `c:` to stand for c identical voters.
    pub fn parse(input: &str) -> Result<Self, ElectionError> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (header_line, header) = lines.next().ok_or(ElectionError::MalformedHeader { line: 1 })?;
        let mut header_tokens = header.split_whitespace();
        let n: usize = header_tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(ElectionError::MalformedHeader { line: header_line })?;
        let m: usize = header_tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(ElectionError::MalformedHeader { line: header_line })?;
        if header_tokens.next().is_some() {
            return Err(ElectionError::MalformedHeader { line: header_line });
        }
        if n == 0 || m == 0 {
            return Err(ElectionError::EmptyElection);
        }

        let mut rankings: Vec<Ranking> = Vec::with_capacity(n);
        for (line, text) in lines {
            let bad = ElectionError::NotAPermutation { line, m };
            let (copies, body) = match text.split_once(':') {
                Some((count, rest)) => {
                    let copies: usize = count.trim().parse().map_err(|_| bad.clone())?;
                    if copies == 0 {
                        return Err(bad);
                    }
                    (copies, rest)
                }
                None => (1, text),
            };
            let mut order = Vec::with_capacity(m);
            for token in body.split_whitespace() {
                let idx: usize = token.parse().map_err(|_| bad.clone())?;
                if idx < 1 || idx > m {
                    return Err(bad);
                }
                order.push(CandidateId(idx - 1));
            }
            if order.len() != m {
                return Err(bad);
            }
            let ranking = Ranking::from_order(order).ok_or(bad)?;
            for _ in 0..copies {
                rankings.push(ranking.clone());
            }
        }

        if rankings.len() != n {
            return Err(ElectionError::CountMismatch { expected: n, found: rankings.len() });
        }
        Election::new(rankings)
    }

    /// Canonical text form: header plus one uncompressed line per voter.
    /// `parse` of the result reproduces the election exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.num_voters(), self.m);
        for r in &self.rankings {
            let line: Vec<String> = r.order().iter().map(|c| (c.0 + 1).to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// For each candidate, the number of voters ranking it among their top k.
    /// The scores always sum to n * k.
    pub fn k_approval_scores(&self, k: usize) -> Result<Vec<u64>, ElectionError> {
        self.check_k(k)?;
        let mut scores = vec![0u64; self.m];
        for r in &self.rankings {
            for c in r.prefix(k) {
                scores[c.0] += 1;
            }
        }
        Ok(scores)
    }

    /// Voter v's k most preferred candidates, best first.
    pub fn top_k(&self, v: VoterId, k: usize) -> Result<&[CandidateId], ElectionError> {
        self.check_k(k)?;
        Ok(self.ranking(v).prefix(k))
    }

    /// Voter v's least preferred candidate within `subset`.
    pub fn bottom_of(
        &self,
        v: VoterId,
        subset: &BTreeSet<CandidateId>,
    ) -> Result<CandidateId, ElectionError> {
        let r = self.ranking(v);
        subset
            .iter()
            .copied()
            .max_by_key(|c| r.position(*c))
            .ok_or(ElectionError::EmptySubset)
    }

    /// Strict preference: v ranks a above b. For a != b exactly one of
    /// `prefers(v, a, b)` and `prefers(v, b, a)` holds.
    pub fn prefers(&self, v: VoterId, a: CandidateId, b: CandidateId) -> bool {
        let r = self.ranking(v);
        r.position(a) < r.position(b)
    }

    /// Weak preference: a == b or v ranks a above b.
    pub fn prefers_weak(&self, v: VoterId, a: CandidateId, b: CandidateId) -> bool {
        a == b || self.prefers(v, a, b)
    }

    pub(crate) fn check_k(&self, k: usize) -> Result<(), ElectionError> {
        if k < 1 || k > self.m {
            return Err(ElectionError::KOutOfRange { k, m: self.m });
        }
        Ok(())
    }
}

/// Convenience for tests and generators: builds a ranking from raw indices.
pub fn ranking_of(indices: &[usize]) -> Ranking {
    Ranking::from_order(indices.iter().map(|&i| CandidateId(i)).collect())
        .expect("ranking_of needs a permutation of 0..len")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn remark() -> Election {
        let mut rankings = vec![ranking_of(&[0, 1, 2]); 7];
        rankings.extend(vec![ranking_of(&[1, 0, 2]); 5]);
        Election::new(rankings).unwrap()
    }

    #[test]
    fn parse_basic() {
        let e = Election::parse("3 2\n1 2\n2 1\n1 2\n").unwrap();
        assert_eq!(e.num_voters(), 3);
        assert_eq!(e.num_candidates(), 2);
        assert_eq!(e.ranking(VoterId(1)).order(), &[CandidateId(1), CandidateId(0)]);
    }

    #[test]
    fn parse_comments_blanks_and_copies() {
        let text = "# two blocs\n\n12 3\n7: 1 2 3\n\n5: 2 1 3\n";
        let e = Election::parse(text).unwrap();
        assert_eq!(e, remark());
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            Election::parse(""),
            Err(ElectionError::MalformedHeader { line: 1 })
        );
        assert_eq!(
            Election::parse("x 2\n1 2\n"),
            Err(ElectionError::MalformedHeader { line: 1 })
        );
        assert_eq!(
            Election::parse("# c\n2 2 9\n"),
            Err(ElectionError::MalformedHeader { line: 2 })
        );
        assert_eq!(Election::parse("0 3\n"), Err(ElectionError::EmptyElection));
        assert_eq!(Election::parse("1 0\n"), Err(ElectionError::EmptyElection));
        assert_eq!(
            Election::parse("2 2\n1 1\n2 1\n"),
            Err(ElectionError::NotAPermutation { line: 2, m: 2 })
        );
        assert_eq!(
            Election::parse("2 2\n1 2\n2 3\n"),
            Err(ElectionError::NotAPermutation { line: 3, m: 2 })
        );
        assert_eq!(
            Election::parse("2 2\n1 2\n2\n"),
            Err(ElectionError::NotAPermutation { line: 3, m: 2 })
        );
        assert_eq!(
            Election::parse("3 2\n1 2\n2 1\n"),
            Err(ElectionError::CountMismatch { expected: 3, found: 2 })
        );
        assert_eq!(
            Election::parse("1 2\n2: 1 2\n"),
            Err(ElectionError::CountMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn round_trip_remark() {
        let e = remark();
        let text = e.to_text();
        assert_eq!(Election::parse(&text).unwrap(), e);
        // Canonical text is a fixpoint of parse . write.
        assert_eq!(Election::parse(&text).unwrap().to_text(), text);
    }

    #[test]
    fn remark_scores() {
        let e = remark();
        assert_eq!(e.k_approval_scores(1).unwrap(), vec![7, 5, 0]);
        assert_eq!(e.k_approval_scores(2).unwrap(), vec![12, 12, 0]);
        assert_eq!(e.k_approval_scores(3).unwrap(), vec![12, 12, 12]);
        assert_eq!(
            e.k_approval_scores(0),
            Err(ElectionError::KOutOfRange { k: 0, m: 3 })
        );
        assert_eq!(
            e.k_approval_scores(4),
            Err(ElectionError::KOutOfRange { k: 4, m: 3 })
        );
    }

    #[test]
    fn rank_queries() {
        let e = remark();
        let v = VoterId(0);
        assert_eq!(e.top_k(v, 2).unwrap(), &[CandidateId(0), CandidateId(1)]);
        let sub: BTreeSet<_> = [CandidateId(0), CandidateId(1)].into_iter().collect();
        assert_eq!(e.bottom_of(v, &sub).unwrap(), CandidateId(1));
        assert_eq!(e.bottom_of(v, &BTreeSet::new()), Err(ElectionError::EmptySubset));
        assert!(e.prefers(v, CandidateId(0), CandidateId(1)));
        assert!(!e.prefers(v, CandidateId(1), CandidateId(0)));
        assert!(e.prefers_weak(v, CandidateId(1), CandidateId(1)));
        let u = VoterId(7);
        assert!(e.prefers(u, CandidateId(1), CandidateId(0)));
    }

    #[test]
    fn single_voter_single_candidate() {
        let e = Election::parse("1 1\n1\n").unwrap();
        assert_eq!(e.k_approval_scores(1).unwrap(), vec![1]);
        assert_eq!(e.ranking(VoterId(0)).suffix_set(1).len(), 1);
    }
}
