//! Membership certificates for the set of possible veto winners.
//!
//! A candidate w survives some veto order exactly when no coalition can
//! block it, and that in turn is equivalent to a perfect matching in the
//! copy-expanded domination graph of w. Both directions produce checkable
//! certificates: a matching for members, a coalition and preferred set for
//! non-members. The weighted generalization replaces integral copies with
//! voter budgets p and candidate capacities q and runs the same network
//! with fractional amounts.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use thiserror::Error;

use crate::election::{CandidateId, Election, ElectionError, VoterId};
use crate::maxflow::FlowGraph;
use crate::metric::{format_ratio, Rational};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum CoreError {
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error("candidate {candidate} out of range for {num_candidates} candidates")]
    UnknownCandidate { candidate: usize, num_candidates: usize },
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("certificate rejected: {0}")]
    CertificateInvalid(String),
}

fn rint(x: u64) -> Rational {
    Rational::from_integer(x.into())
}

fn check_candidate(e: &Election, w: CandidateId) -> Result<(), CoreError> {
    if w.0 >= e.num_candidates() {
        return Err(CoreError::UnknownCandidate {
            candidate: w.0,
            num_candidates: e.num_candidates(),
        });
    }
    Ok(())
}

/// The bipartite graph deciding whether w can survive: k copies of each
/// voter on the left, `score(c)` copies of each candidate on the right, and
/// every copy of v adjacent to every copy of c exactly when v weakly
/// prefers w to c.
pub struct DominationGraph {
    w: CandidateId,
    k: usize,
    adj: Vec<Vec<bool>>,
    copies: Vec<u64>,
}

impl DominationGraph {
    pub fn build(e: &Election, k: usize, w: CandidateId) -> Result<Self, CoreError> {
        check_candidate(e, w)?;
        let copies = e.k_approval_scores(k)?;
        let adj = e
            .voters()
            .map(|v| {
                e.candidates()
                    .map(|c| e.prefers_weak(v, w, c))
                    .collect()
            })
            .collect();
        Ok(DominationGraph { w, k, adj, copies })
    }

    pub fn candidate(&self) -> CandidateId {
        self.w
    }

    pub fn has_edge(&self, v: VoterId, c: CandidateId) -> bool {
        self.adj[v.0][c.0]
    }

    /// Copies of `c` on the right side.
    pub fn copies(&self, c: CandidateId) -> u64 {
        self.copies[c.0]
    }

    fn num_voters(&self) -> usize {
        self.adj.len()
    }

    fn num_candidates(&self) -> usize {
        self.copies.len()
    }

    fn total(&self) -> u64 {
        self.num_voters() as u64 * self.k as u64
    }
}

/// A perfect matching on copy-expanded nodes. Each entry is
/// `[voter, voter_copy, candidate, candidate_copy]`; entries are sorted.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(transparent)]
pub struct Matching {
    pairs: Vec<[usize; 4]>,
}

impl Matching {
    pub fn from_pairs(mut pairs: Vec<[usize; 4]>) -> Self {
        pairs.sort_unstable();
        Matching { pairs }
    }

    pub fn pairs(&self) -> &[[usize; 4]] {
        &self.pairs
    }

    pub fn size(&self) -> usize {
        self.pairs.len()
    }
}

/// Inclusion-minimal-side witness that no perfect matching exists: all
/// copies of `candidates` have strictly fewer neighbors than members.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HallViolator {
    pub candidates: BTreeSet<CandidateId>,
    pub copy_count: u64,
    pub neighborhood: BTreeSet<VoterId>,
    pub neighborhood_size: u64,
}

pub enum MatchingOutcome {
    Perfect(Matching),
    Deficient(HallViolator),
}

/// Maximum matching via max flow; the caps are integers so the flow is too.
pub fn maximum_bipartite_matching(g: &DominationGraph) -> MatchingOutcome {
    let (n, m) = (g.num_voters(), g.num_candidates());
    let (src, sink) = (0, n + m + 1);
    let mut net = FlowGraph::new(n + m + 2);
    for v in 0..n {
        net.add_edge(src, 1 + v, rint(g.k as u64));
    }
    // Middle caps exceed any cut so only the outer layers can bind.
    let wide = rint(g.total() + 1);
    let mut mid = vec![vec![None; m]; n];
    for v in 0..n {
        for c in 0..m {
            if g.adj[v][c] {
                mid[v][c] = Some(net.add_edge(1 + v, 1 + n + c, wide.clone()));
            }
        }
    }
    for c in 0..m {
        net.add_edge(1 + n + c, sink, rint(g.copies[c]));
    }
    let flow = net.max_flow(src, sink);
    if flow == rint(g.total()) {
        let mut pairs = Vec::with_capacity(g.total() as usize);
        let mut cand_copy = vec![0usize; m];
        for v in 0..n {
            let mut voter_copy = 0usize;
            for c in 0..m {
                let Some(id) = mid[v][c] else { continue };
                let units = u64::try_from(net.flow_on(id).to_integer())
                    .expect("matching flow is a small nonnegative integer");
                for _ in 0..units {
                    pairs.push([v, voter_copy, c, cand_copy[c]]);
                    voter_copy += 1;
                    cand_copy[c] += 1;
                }
            }
        }
        MatchingOutcome::Perfect(Matching { pairs })
    } else {
        // The candidates cut off from the sink side are collectively short
        // of neighbors; their joint neighborhood misses every voter that
        // stayed source-side reachable.
        let reach = net.residual_reachable(src);
        let candidates: BTreeSet<CandidateId> = (0..m)
            .filter(|c| !reach[1 + n + c])
            .map(CandidateId)
            .collect();
        let copy_count = candidates.iter().map(|c| g.copies[c.0]).sum();
        let neighborhood: BTreeSet<VoterId> = (0..n)
            .filter(|&v| candidates.iter().any(|c| g.adj[v][c.0]))
            .map(VoterId)
            .collect();
        let neighborhood_size = neighborhood.len() as u64 * g.k as u64;
        debug_assert!(neighborhood_size < copy_count);
        MatchingOutcome::Deficient(HallViolator {
            candidates,
            copy_count,
            neighborhood,
            neighborhood_size,
        })
    }
}

/// Proof of membership or non-membership of one candidate.
///
/// Serializes as `{"status":"member","matching":[[v,vc,c,cc],..]}` or
/// `{"status":"blocked","T":[..],"S":[..]}`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum CoreCertificate {
    Member {
        matching: Matching,
    },
    Blocked {
        coalition: BTreeSet<VoterId>,
        preferred: BTreeSet<CandidateId>,
    },
}

impl Serialize for CoreCertificate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            CoreCertificate::Member { matching } => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("status", "member")?;
                map.serialize_entry("matching", matching)?;
                map.end()
            }
            CoreCertificate::Blocked { coalition, preferred } => {
                let mut map = serializer.serialize_map(Some(3))?;
                map.serialize_entry("status", "blocked")?;
                map.serialize_entry("T", coalition)?;
                map.serialize_entry("S", preferred)?;
                map.end()
            }
        }
    }
}

impl CoreCertificate {
    pub fn is_member(&self) -> bool {
        matches!(self, CoreCertificate::Member { .. })
    }

    /// Re-checks the certificate against the election from scratch.
    pub fn verify(&self, e: &Election, k: usize, w: CandidateId) -> Result<(), CoreError> {
        check_candidate(e, w)?;
        let scores = e.k_approval_scores(k)?;
        let total = e.num_voters() as u64 * k as u64;
        match self {
            CoreCertificate::Member { matching } => {
                if matching.size() as u64 != total {
                    return Err(CoreError::CertificateInvalid(format!(
                        "matching has {} pairs, need {total}",
                        matching.size()
                    )));
                }
                let mut left = BTreeSet::new();
                let mut right = BTreeSet::new();
                for &[v, vc, c, cc] in matching.pairs() {
                    if v >= e.num_voters() || c >= e.num_candidates() {
                        return Err(CoreError::CertificateInvalid(
                            "pair out of range".into(),
                        ));
                    }
                    if vc >= k || cc as u64 >= scores[c] {
                        return Err(CoreError::CertificateInvalid(
                            "copy index out of range".into(),
                        ));
                    }
                    if !e.prefers_weak(VoterId(v), w, CandidateId(c)) {
                        return Err(CoreError::CertificateInvalid(format!(
                            "voter {v} strictly prefers candidate {c} to the winner"
                        )));
                    }
                    if !left.insert((v, vc)) || !right.insert((c, cc)) {
                        return Err(CoreError::CertificateInvalid(
                            "copy matched twice".into(),
                        ));
                    }
                }
                Ok(())
            }
            CoreCertificate::Blocked { coalition, preferred } => {
                verify_blocking(e, w, coalition, preferred, |s| {
                    let score: u64 = s.iter().map(|c| scores[c.0]).sum();
                    k as u64 * coalition.len() as u64 + score > total
                })
            }
        }
    }
}

fn verify_blocking(
    e: &Election,
    w: CandidateId,
    coalition: &BTreeSet<VoterId>,
    preferred: &BTreeSet<CandidateId>,
    weight_check: impl FnOnce(&BTreeSet<CandidateId>) -> bool,
) -> Result<(), CoreError> {
    if coalition.is_empty() || preferred.is_empty() {
        return Err(CoreError::CertificateInvalid("empty coalition or set".into()));
    }
    for &v in coalition {
        if v.0 >= e.num_voters() {
            return Err(CoreError::CertificateInvalid(format!("no voter {v}")));
        }
        for &c in preferred {
            if c.0 >= e.num_candidates() {
                return Err(CoreError::CertificateInvalid(format!("no candidate {c}")));
            }
            if !e.prefers(v, c, w) {
                return Err(CoreError::CertificateInvalid(format!(
                    "{v} does not strictly prefer {c} to the winner"
                )));
            }
        }
    }
    if !weight_check(preferred) {
        return Err(CoreError::CertificateInvalid(
            "coalition too light to block".into(),
        ));
    }
    Ok(())
}

/// Decides whether w is a possible winner and returns a proof either way.
pub fn core_membership(
    e: &Election,
    k: usize,
    w: CandidateId,
) -> Result<CoreCertificate, CoreError> {
    let graph = DominationGraph::build(e, k, w)?;
    Ok(match maximum_bipartite_matching(&graph) {
        MatchingOutcome::Perfect(matching) => CoreCertificate::Member { matching },
        MatchingOutcome::Deficient(violator) => {
            // Voters outside the violator's neighborhood form the blocking
            // coalition; they all rank every violator candidate above w.
            let coalition = e
                .voters()
                .filter(|v| !violator.neighborhood.contains(v))
                .collect();
            CoreCertificate::Blocked { coalition, preferred: violator.candidates }
        }
    })
}

/// All possible winners under the k-approval veto rule.
pub fn compute_core_set(e: &Election, k: usize) -> Result<BTreeSet<CandidateId>, CoreError> {
    let mut set = BTreeSet::new();
    for w in e.candidates() {
        if core_membership(e, k, w)?.is_member() {
            set.insert(w);
        }
    }
    Ok(set)
}

/// Veto budgets per voter and capacities per candidate, both summing to one.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WeightVectors {
    p: Vec<Rational>,
    q: Vec<Rational>,
}

impl WeightVectors {
    pub fn new(e: &Election, p: Vec<Rational>, q: Vec<Rational>) -> Result<Self, CoreError> {
        if p.len() != e.num_voters() {
            return Err(CoreError::BadWeights(format!(
                "{} voter weights for {} voters",
                p.len(),
                e.num_voters()
            )));
        }
        if q.len() != e.num_candidates() {
            return Err(CoreError::BadWeights(format!(
                "{} candidate weights for {} candidates",
                q.len(),
                e.num_candidates()
            )));
        }
        if p.iter().chain(q.iter()).any(|x| x.is_negative()) {
            return Err(CoreError::BadWeights("negative weight".into()));
        }
        let one: Rational = One::one();
        let psum: Rational = p.iter().sum();
        if psum != one {
            return Err(CoreError::BadWeights(format!(
                "voter weights sum to {}, not 1",
                format_ratio(&psum)
            )));
        }
        let qsum: Rational = q.iter().sum();
        if qsum != one {
            return Err(CoreError::BadWeights(format!(
                "candidate weights sum to {}, not 1",
                format_ratio(&qsum)
            )));
        }
        Ok(WeightVectors { p, q })
    }

    /// p uniform, q proportional to k-approval scores; the weighted core
    /// under these is exactly the possible-winner set.
    pub fn k_approval(e: &Election, k: usize) -> Result<Self, CoreError> {
        let scores = e.k_approval_scores(k)?;
        let total = rint(e.num_voters() as u64 * k as u64);
        let n = rint(e.num_voters() as u64);
        Ok(WeightVectors {
            p: vec![Rational::one() / n; e.num_voters()],
            q: scores.iter().map(|&s| rint(s) / total.clone()).collect(),
        })
    }

    /// Uniform budgets on both sides: each candidate absorbs 1/m.
    pub fn proportional(e: &Election) -> Self {
        let n = rint(e.num_voters() as u64);
        let m = rint(e.num_candidates() as u64);
        WeightVectors {
            p: vec![Rational::one() / n; e.num_voters()],
            q: vec![Rational::one() / m; e.num_candidates()],
        }
    }

    pub fn voter_weights(&self) -> &[Rational] {
        &self.p
    }

    pub fn candidate_weights(&self) -> &[Rational] {
        &self.q
    }
}

/// Weighted analogue of [`CoreCertificate`]. A member ships its entire
/// budget to weakly dispreferred candidates without overfilling any of
/// them; a blocked pair satisfies `p(T) + q(S) > 1`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum PqCertificate {
    Member {
        flow: Vec<(VoterId, CandidateId, Rational)>,
    },
    Blocked {
        coalition: BTreeSet<VoterId>,
        preferred: BTreeSet<CandidateId>,
    },
}

impl Serialize for PqCertificate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            PqCertificate::Member { flow } => {
                let rows: Vec<(usize, usize, String)> = flow
                    .iter()
                    .map(|(v, c, f)| (v.0, c.0, format_ratio(f)))
                    .collect();
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("status", "member")?;
                map.serialize_entry("flow", &rows)?;
                map.end()
            }
            PqCertificate::Blocked { coalition, preferred } => {
                let mut map = serializer.serialize_map(Some(3))?;
                map.serialize_entry("status", "blocked")?;
                map.serialize_entry("T", coalition)?;
                map.serialize_entry("S", preferred)?;
                map.end()
            }
        }
    }
}

impl PqCertificate {
    pub fn is_member(&self) -> bool {
        matches!(self, PqCertificate::Member { .. })
    }

    pub fn verify(
        &self,
        e: &Election,
        weights: &WeightVectors,
        w: CandidateId,
    ) -> Result<(), CoreError> {
        check_candidate(e, w)?;
        match self {
            PqCertificate::Member { flow } => {
                let mut shipped = vec![Rational::zero(); e.num_voters()];
                let mut absorbed = vec![Rational::zero(); e.num_candidates()];
                for (v, c, f) in flow {
                    if v.0 >= e.num_voters() || c.0 >= e.num_candidates() {
                        return Err(CoreError::CertificateInvalid(
                            "flow entry out of range".into(),
                        ));
                    }
                    if f.is_negative() {
                        return Err(CoreError::CertificateInvalid("negative flow".into()));
                    }
                    if !e.prefers_weak(*v, w, *c) {
                        return Err(CoreError::CertificateInvalid(format!(
                            "{v} strictly prefers {c} to the winner"
                        )));
                    }
                    shipped[v.0] += f;
                    absorbed[c.0] += f;
                }
                for v in e.voters() {
                    if shipped[v.0] != weights.p[v.0] {
                        return Err(CoreError::CertificateInvalid(format!(
                            "{v} ships {} instead of its budget",
                            format_ratio(&shipped[v.0])
                        )));
                    }
                }
                for c in e.candidates() {
                    if absorbed[c.0] > weights.q[c.0] {
                        return Err(CoreError::CertificateInvalid(format!(
                            "{c} absorbs more than its capacity"
                        )));
                    }
                }
                Ok(())
            }
            PqCertificate::Blocked { coalition, preferred } => {
                verify_blocking(e, w, coalition, preferred, |s| {
                    let pt: Rational = coalition.iter().map(|v| &weights.p[v.0]).sum();
                    let qs: Rational = s.iter().map(|c| &weights.q[c.0]).sum();
                    pt + qs > One::one()
                })
            }
        }
    }
}

/// Weighted core membership: can w's supporters absorb a full round of
/// vetoes aimed at it?
pub fn pq_core_membership(
    e: &Election,
    weights: &WeightVectors,
    w: CandidateId,
) -> Result<PqCertificate, CoreError> {
    check_candidate(e, w)?;
    let (n, m) = (e.num_voters(), e.num_candidates());
    let (src, sink) = (0, n + m + 1);
    let mut net = FlowGraph::new(n + m + 2);
    for v in 0..n {
        net.add_edge(src, 1 + v, weights.p[v].clone());
    }
    // Total flow is at most one; middle cap 2 can never bind.
    let wide = rint(2);
    let mut mid = vec![vec![None; m]; n];
    for v in e.voters() {
        for c in e.candidates() {
            if e.prefers_weak(v, w, c) {
                mid[v.0][c.0] = Some(net.add_edge(1 + v.0, 1 + n + c.0, wide.clone()));
            }
        }
    }
    for c in 0..m {
        net.add_edge(1 + n + c, sink, weights.q[c].clone());
    }
    let flow = net.max_flow(src, sink);
    if flow == One::one() {
        let mut entries = Vec::new();
        for v in 0..n {
            for c in 0..m {
                let Some(id) = mid[v][c] else { continue };
                let f = net.flow_on(id);
                if f.is_positive() {
                    entries.push((VoterId(v), CandidateId(c), f.clone()));
                }
            }
        }
        Ok(PqCertificate::Member { flow: entries })
    } else {
        let reach = net.residual_reachable(src);
        let coalition: BTreeSet<VoterId> =
            (0..n).filter(|v| reach[1 + v]).map(VoterId).collect();
        let preferred: BTreeSet<CandidateId> = (0..m)
            .filter(|c| !reach[1 + n + c])
            .map(CandidateId)
            .collect();
        Ok(PqCertificate::Blocked { coalition, preferred })
    }
}

/// Candidates whose weighted core test passes.
pub fn pq_core_set(
    e: &Election,
    weights: &WeightVectors,
) -> Result<BTreeSet<CandidateId>, CoreError> {
    let mut set = BTreeSet::new();
    for w in e.candidates() {
        if pq_core_membership(e, weights, w)?.is_member() {
            set.insert(w);
        }
    }
    Ok(set)
}
