//! Constructive certificates that a possible winner's utilitarian
//! distortion is at most 2k+1.
//!
//! The certificate is a circulation on the voter-candidate grid: node
//! (v, c) stands for voter v's distance to c, a preference edge
//! (v,c) -> (v,c') exists when v ranks c above c', and a sideways edge
//! links (v,c) with (v',c). One unit of flow starts at every (v, w) and is
//! absorbed at nodes (., c*). If such a flow exists with per-voter cost at
//! most lambda for every rival c*, then w's distortion is at most lambda.
//!
//! The construction decomposes the winner's perfect matching into k
//! voter-to-voter bijections, routes most flow along three-hop paths they
//! induce, and ships the remainder evenly to the voters who prefer w to
//! the rival. Verification re-checks conservation, edge validity, and the
//! cost formula from scratch.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use thiserror::Error;

use crate::election::{CandidateId, Election, ElectionError, VoterId};
use crate::maxflow::FlowGraph;
use crate::metric::{format_ratio, Rational};
use crate::veto_core::Matching;

/// One grid node.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Node {
    pub voter: VoterId,
    pub candidate: CandidateId,
}

impl std::fmt::Display for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.voter, self.candidate)
    }
}

pub fn node(v: VoterId, c: CandidateId) -> Node {
    Node { voter: v, candidate: c }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FlowError {
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error("candidate {candidate} out of range for {num_candidates} candidates")]
    UnknownCandidate { candidate: usize, num_candidates: usize },
    #[error("the rival must differ from the winner")]
    RivalEqualsWinner,
    #[error("matching is not perfect: {0}")]
    NotPerfect(String),
    #[error("matching decomposition failed: {0}")]
    DecompositionFailure(String),
    #[error("no edge from {from} to {to}")]
    MissingEdge { from: Node, to: Node },
    #[error("only {preferring} voters prefer the winner to a rival scoring {score}")]
    CoalitionBoundViolated { preferring: usize, score: u64 },
    #[error("flow not conserved at {node}")]
    ConservationViolated { node: Node },
    #[error("negative flow from {from} to {to}")]
    NegativeFlow { from: Node, to: Node },
    #[error("voter {voter} has cost {cost}, above the bound")]
    CostExceeded { voter: VoterId, cost: String },
}

/// The grid graph induced by an election's ballots.
pub struct FlowNetwork<'a> {
    e: &'a Election,
}

impl<'a> FlowNetwork<'a> {
    pub fn new(e: &'a Election) -> Self {
        FlowNetwork { e }
    }

    pub fn election(&self) -> &Election {
        self.e
    }

    /// Preference edges run down one voter's ranking; sideways edges join
    /// two voters at the same candidate in either direction.
    pub fn has_edge(&self, from: Node, to: Node) -> bool {
        if from.voter.0 >= self.e.num_voters()
            || to.voter.0 >= self.e.num_voters()
            || from.candidate.0 >= self.e.num_candidates()
            || to.candidate.0 >= self.e.num_candidates()
        {
            return false;
        }
        if from.voter == to.voter {
            from.candidate != to.candidate
                && self.e.prefers(from.voter, from.candidate, to.candidate)
        } else {
            from.candidate == to.candidate
        }
    }
}

/// A (w, c*)-flow: one unit originates at each (v, w) and is absorbed in
/// the rival's column.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Circulation {
    pub w: CandidateId,
    pub c_star: CandidateId,
    /// Positive flow per directed edge.
    pub flow: BTreeMap<(Node, Node), Rational>,
    /// Absorption per voter, all at (v, c*).
    pub absorbed: BTreeMap<VoterId, Rational>,
    /// Amount routed by the matching-path stage.
    pub stage1_total: Rational,
    /// Stage-2 allocation per receiving voter.
    pub stage2_receipts: BTreeMap<VoterId, Rational>,
}

impl Circulation {
    fn push(&mut self, from: Node, to: Node, amount: &Rational) {
        if from == to || amount.is_zero() {
            return;
        }
        *self.flow.entry((from, to)).or_insert_with(Rational::zero) += amount;
    }

    fn absorb(&mut self, v: VoterId, amount: &Rational) {
        *self.absorbed.entry(v).or_insert_with(Rational::zero) += amount;
    }
}

/// The k voter-to-voter bijections hiding inside a perfect matching,
/// re-labeled so that `matched[i][v]` lies in the top k of `maps[i][v]`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MatchingDecomposition {
    /// maps[i][v.0] = N_i(v).
    pub maps: Vec<Vec<VoterId>>,
    /// matched[i][v.0] = M_i(v), the label carried by v's i-th edge.
    pub matched: Vec<Vec<CandidateId>>,
}

fn validate_matching(e: &Election, k: usize, m: &Matching) -> Result<(), FlowError> {
    let scores = e.k_approval_scores(k)?;
    let total = e.num_voters() * k;
    if m.size() != total {
        return Err(FlowError::NotPerfect(format!(
            "{} pairs, need {total}",
            m.size()
        )));
    }
    let mut left = std::collections::BTreeSet::new();
    let mut right = std::collections::BTreeSet::new();
    for &[v, vc, c, cc] in m.pairs() {
        if v >= e.num_voters() || c >= e.num_candidates() {
            return Err(FlowError::NotPerfect("pair out of range".into()));
        }
        if vc >= k || cc as u64 >= scores[c] {
            return Err(FlowError::NotPerfect("copy index out of range".into()));
        }
        if !left.insert((v, vc)) || !right.insert((c, cc)) {
            return Err(FlowError::NotPerfect("copy matched twice".into()));
        }
    }
    Ok(())
}

/// Splits a perfect matching into k bijections N_i with matched candidates
/// in the top k of their targets.
///
/// Each matched copy of candidate c is paired with one of the voters who
/// approve c, giving a k-regular bipartite multigraph over voters; peeling
/// perfect matchings off it k times yields the bijections.
pub fn decompose_regular_matchings(
    e: &Election,
    k: usize,
    m: &Matching,
) -> Result<MatchingDecomposition, FlowError> {
    validate_matching(e, k, m)?;
    let n = e.num_voters();

    // owners[c] = voters approving c, in id order; the i-th matched copy of
    // c is paired with the i-th owner.
    let mut owners: Vec<Vec<VoterId>> = vec![Vec::new(); e.num_candidates()];
    for v in e.voters() {
        for &c in e.top_k(v, k)? {
            owners[c.0].push(v);
        }
    }
    let mut seen: Vec<usize> = vec![0; e.num_candidates()];
    // (from, to, label), to be partitioned into k bijections.
    let mut edges: Vec<(VoterId, VoterId, CandidateId)> = Vec::with_capacity(n * k);
    for &[v, _, c, _] in m.pairs() {
        let owner = owners[c][seen[c]];
        seen[c] += 1;
        edges.push((VoterId(v), owner, CandidateId(c)));
    }
    edges.sort_by_key(|&(v, u, c)| (v, u, c));
    let mut used = vec![false; edges.len()];

    let mut maps = Vec::with_capacity(k);
    let mut matched = Vec::with_capacity(k);
    for round in 0..k {
        let (src, sink) = (0, 2 * n + 1);
        let mut net = FlowGraph::new(2 * n + 2);
        let one = Rational::from_integer(1.into());
        for v in 0..n {
            net.add_edge(src, 1 + v, one.clone());
            net.add_edge(1 + n + v, sink, one.clone());
        }
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (i, &(v, u, _)) in edges.iter().enumerate() {
            if !used[i] {
                mid.entry((v.0, u.0))
                    .or_insert_with(|| net.add_edge(1 + v.0, 1 + n + u.0, one.clone()));
            }
        }
        if net.max_flow(src, sink) != Rational::from_integer((n as i64).into()) {
            return Err(FlowError::DecompositionFailure(format!(
                "round {round} found no perfect matching"
            )));
        }
        let mut map_i = vec![VoterId(0); n];
        let mut matched_i = vec![CandidateId(0); n];
        for (&(v, u), &id) in &mid {
            if net.flow_on(id).is_zero() {
                continue;
            }
            // Consume the lexicographically first unused parallel edge.
            let i = edges
                .iter()
                .enumerate()
                .position(|(i, &(ev, eu, _))| !used[i] && ev.0 == v && eu.0 == u)
                .expect("flow used an existing edge");
            used[i] = true;
            map_i[v] = edges[i].1;
            matched_i[v] = edges[i].2;
        }
        maps.push(map_i);
        matched.push(matched_i);
    }

    for i in 0..k {
        let mut hit = vec![false; n];
        for v in 0..n {
            let target = maps[i][v];
            if std::mem::replace(&mut hit[target.0], true) {
                return Err(FlowError::DecompositionFailure(format!(
                    "round {i} is not a bijection"
                )));
            }
            if !e.top_k(target, k)?.contains(&matched[i][v]) {
                return Err(FlowError::DecompositionFailure(format!(
                    "label {} of voter {v} not approved by its target {target}",
                    matched[i][v]
                )));
            }
        }
    }
    Ok(MatchingDecomposition { maps, matched })
}

fn check_candidate_veto(e: &Election, c: CandidateId) -> Result<(), FlowError> {
    if c.0 >= e.num_candidates() {
        return Err(FlowError::UnknownCandidate {
            candidate: c.0,
            num_candidates: e.num_candidates(),
        });
    }
    Ok(())
}

/// Builds the (w, c*)-flow whose cost certifies the 2k+1 bound, given a
/// perfect matching for w.
pub fn construct_distortion_flow(
    e: &Election,
    k: usize,
    w: CandidateId,
    c_star: CandidateId,
    m: &Matching,
) -> Result<Circulation, FlowError> {
    check_candidate_veto(e, w)?;
    check_candidate_veto(e, c_star)?;
    if w == c_star {
        return Err(FlowError::RivalEqualsWinner);
    }
    let scores = e.k_approval_scores(k)?;
    let net = FlowNetwork::new(e);
    let decomposition = decompose_regular_matchings(e, k, m)?;

    // The voters preferring w must be able to soak up the rival's score,
    // or they would be outnumbered into a block against w.
    let preferrers: Vec<VoterId> =
        e.voters().filter(|&v| e.prefers_weak(v, w, c_star)).collect();
    if ((k * preferrers.len()) as u64) < scores[c_star.0] {
        return Err(FlowError::CoalitionBoundViolated {
            preferring: preferrers.len(),
            score: scores[c_star.0],
        });
    }

    let mut f = Circulation {
        w,
        c_star,
        flow: BTreeMap::new(),
        absorbed: BTreeMap::new(),
        stage1_total: Rational::zero(),
        stage2_receipts: BTreeMap::new(),
    };
    let share = Rational::new(1.into(), (k as i64).into());

    // Stage 1: (v,w) -> (v,M_i(v)) -> (N_i(v),M_i(v)) -> (N_i(v),c*) for
    // the (v, i) pairs whose target ranks M_i(v) above c*.
    let mut leftover = vec![0usize; e.num_voters()];
    for i in 0..k {
        for v in e.voters() {
            let target = decomposition.maps[i][v.0];
            let label = decomposition.matched[i][v.0];
            let routed = label == e.ranking(target).top()
                || !e.top_k(target, k)?.contains(&c_star);
            if !routed {
                leftover[v.0] += 1;
                continue;
            }
            let hops =
                [node(v, w), node(v, label), node(target, label), node(target, c_star)];
            for pair in hops.windows(2) {
                if pair[0] != pair[1] && !net.has_edge(pair[0], pair[1]) {
                    return Err(FlowError::MissingEdge { from: pair[0], to: pair[1] });
                }
                f.push(pair[0], pair[1], &share);
            }
            f.absorb(target, &share);
            f.stage1_total += &share;
        }
    }
    debug_assert_eq!(
        f.stage1_total,
        Rational::from_integer((e.num_voters() as i64).into())
            - Rational::new(((k - 1) as i64).into(), (k as i64).into())
                * Rational::from_integer((scores[c_star.0] as i64).into())
    );

    // Stage 2: the leftover units move along w's sideways edges to the
    // preferrers, split evenly, then drop straight down to c*.
    let remaining: Rational =
        share.clone() * Rational::from_integer((leftover.iter().sum::<usize>() as i64).into());
    if remaining.is_positive() {
        let quota = &remaining / Rational::from_integer((preferrers.len() as i64).into());
        let mut demand: BTreeMap<VoterId, Rational> = BTreeMap::new();
        for &v in &preferrers {
            demand.insert(v, quota.clone());
            f.stage2_receipts.insert(v, quota.clone());
        }
        let mut supply: BTreeMap<VoterId, Rational> = BTreeMap::new();
        for v in e.voters() {
            if leftover[v.0] > 0 {
                supply.insert(
                    v,
                    share.clone()
                        * Rational::from_integer((leftover[v.0] as i64).into()),
                );
            }
        }
        // A supplier that is itself owed flow keeps as much as it can.
        for (&v, s) in supply.iter_mut() {
            if let Some(d) = demand.get_mut(&v) {
                let kept = s.clone().min(d.clone());
                *s -= &kept;
                *d -= &kept;
                if !net.has_edge(node(v, w), node(v, c_star)) {
                    return Err(FlowError::MissingEdge {
                        from: node(v, w),
                        to: node(v, c_star),
                    });
                }
                f.push(node(v, w), node(v, c_star), &kept);
                f.absorb(v, &kept);
            }
        }
        let mut senders: Vec<(VoterId, Rational)> =
            supply.into_iter().filter(|(_, s)| s.is_positive()).collect();
        let mut receivers: Vec<(VoterId, Rational)> =
            demand.into_iter().filter(|(_, d)| d.is_positive()).collect();
        let (mut si, mut ri) = (0, 0);
        while si < senders.len() && ri < receivers.len() {
            let amount = senders[si].1.clone().min(receivers[ri].1.clone());
            let (from, to) = (senders[si].0, receivers[ri].0);
            for (a, b) in [(node(from, w), node(to, w)), (node(to, w), node(to, c_star))]
            {
                if !net.has_edge(a, b) {
                    return Err(FlowError::MissingEdge { from: a, to: b });
                }
                f.push(a, b, &amount);
            }
            f.absorb(to, &amount);
            senders[si].1 -= &amount;
            receivers[ri].1 -= &amount;
            if senders[si].1.is_zero() {
                si += 1;
            }
            if receivers[ri].1.is_zero() {
                ri += 1;
            }
        }
        debug_assert!(si == senders.len() && ri == receivers.len());
    }
    Ok(f)
}

/// Per-voter certificate costs. Serializes as
/// `{"max_cost":"p/q","bound":"p/q","per_voter":["p/q",..]}`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FlowCostReport {
    pub per_voter: Vec<Rational>,
    pub max_cost: Rational,
    pub bound: Rational,
}

impl Serialize for FlowCostReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("max_cost", &format_ratio(&self.max_cost))?;
        map.serialize_entry("bound", &format_ratio(&self.bound))?;
        map.serialize_entry(
            "per_voter",
            &self.per_voter.iter().map(format_ratio).collect::<Vec<_>>(),
        )?;
        map.end()
    }
}

/// Checks a circulation from scratch: edges exist, flow is conserved with
/// one source unit per voter and absorption only at the rival's column,
/// and every voter's cost stays within 2k+1.
pub fn verify_flow(
    net: &FlowNetwork<'_>,
    f: &Circulation,
    k: usize,
) -> Result<FlowCostReport, FlowError> {
    let e = net.election();
    check_candidate_veto(e, f.w)?;
    check_candidate_veto(e, f.c_star)?;
    let zero = Rational::zero();
    for ((from, to), amount) in &f.flow {
        if amount.is_negative() {
            return Err(FlowError::NegativeFlow { from: *from, to: *to });
        }
        if !net.has_edge(*from, *to) {
            return Err(FlowError::MissingEdge { from: *from, to: *to });
        }
    }
    for (v, amount) in &f.absorbed {
        if v.0 >= e.num_voters() {
            return Err(FlowError::ConservationViolated {
                node: node(*v, f.c_star),
            });
        }
        if amount.is_negative() {
            return Err(FlowError::NegativeFlow {
                from: node(*v, f.c_star),
                to: node(*v, f.c_star),
            });
        }
    }
    let one = Rational::from_integer(1.into());
    for v in e.voters() {
        for c in e.candidates() {
            let here = node(v, c);
            let mut net_out = Rational::zero();
            for ((from, to), amount) in &f.flow {
                if *from == here {
                    net_out += amount;
                }
                if *to == here {
                    net_out -= amount;
                }
            }
            let origination = if c == f.w { one.clone() } else { zero.clone() };
            let absorption = if c == f.c_star {
                f.absorbed.get(&v).cloned().unwrap_or_else(Rational::zero)
            } else {
                zero.clone()
            };
            // inflow + origination = outflow + absorption
            if net_out != origination - absorption {
                return Err(FlowError::ConservationViolated { node: here });
            }
        }
    }

    let bound = Rational::from_integer(((2 * k + 1) as i64).into());
    let mut per_voter = Vec::with_capacity(e.num_voters());
    for v in e.voters() {
        let mut cost =
            f.absorbed.get(&v).cloned().unwrap_or_else(Rational::zero);
        for ((from, to), amount) in &f.flow {
            let sideways = from.voter != to.voter;
            if !sideways || from.candidate == f.c_star {
                continue;
            }
            if from.voter == v || to.voter == v {
                cost += amount;
            }
        }
        per_voter.push(cost);
    }
    let max_cost = per_voter.iter().cloned().max().unwrap_or_else(Rational::zero);
    if max_cost > bound {
        let voter = VoterId(
            per_voter.iter().position(|c| *c == max_cost).expect("max exists"),
        );
        return Err(FlowError::CostExceeded {
            voter,
            cost: format_ratio(&max_cost),
        });
    }
    Ok(FlowCostReport { per_voter, max_cost, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::ratio;
    use crate::veto_core::{core_membership, CoreCertificate};

    const BLOC_PROFILE: &str = "12 3\n7: 1 2 3\n5: 2 1 3\n";

    fn bloc() -> Election {
        Election::parse(BLOC_PROFILE).unwrap()
    }

    fn matching_for(e: &Election, k: usize, w: CandidateId) -> Matching {
        match core_membership(e, k, w).unwrap() {
            CoreCertificate::Member { matching } => matching,
            CoreCertificate::Blocked { .. } => panic!("{w} not a possible winner"),
        }
    }

    #[test]
    fn single_veto_routes_everything_in_stage_one() {
        let e = bloc();
        let m = matching_for(&e, 1, CandidateId(0));
        for rival in [CandidateId(1), CandidateId(2)] {
            let f =
                construct_distortion_flow(&e, 1, CandidateId(0), rival, &m).unwrap();
            assert_eq!(f.stage1_total, ratio(12, 1));
            assert!(f.stage2_receipts.is_empty());
            let report = verify_flow(&FlowNetwork::new(&e), &f, 1).unwrap();
            assert!(report.max_cost <= ratio(3, 1));
        }
    }

    #[test]
    fn full_approval_certificate_for_second_winner() {
        let e = bloc();
        let w = CandidateId(1);
        let m = matching_for(&e, 3, w);
        let f = construct_distortion_flow(&e, 3, w, CandidateId(0), &m).unwrap();
        // Stage 1 ships n - (k-1)/k * score(c*) = 12 - (2/3) * 12 = 4.
        assert_eq!(f.stage1_total, ratio(4, 1));
        let t: Rational = f.stage2_receipts.values().sum();
        assert_eq!(t, ratio(8, 1));
        for receipt in f.stage2_receipts.values() {
            assert!(*receipt <= ratio(2, 1), "receipt {receipt} above k-1");
        }
        let report = verify_flow(&FlowNetwork::new(&e), &f, 3).unwrap();
        assert!(report.max_cost <= ratio(7, 1));
    }

    #[test]
    fn sideways_traffic_bounded_per_voter() {
        let e = bloc();
        for k in 1..=3usize {
            for w in crate::veto_core::compute_core_set(&e, k).unwrap() {
                let m = matching_for(&e, k, w);
                for rival in e.candidates().filter(|&c| c != w) {
                    let f = construct_distortion_flow(&e, k, w, rival, &m).unwrap();
                    verify_flow(&FlowNetwork::new(&e), &f, k).unwrap();
                    for v in e.voters() {
                        let mut sent = Rational::zero();
                        let mut received = Rational::zero();
                        for ((from, to), amount) in &f.flow {
                            if from.voter == to.voter {
                                continue;
                            }
                            if from.voter == v {
                                sent += amount;
                            }
                            if to.voter == v {
                                received += amount;
                            }
                        }
                        assert!(sent <= ratio(1, 1), "k={k} {w} {rival} {v} sends {sent}");
                        assert!(
                            received <= ratio(k as i64, 1),
                            "k={k} {w} {rival} {v} receives {received}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn decomposition_invariants() {
        let e = bloc();
        for k in 1..=3usize {
            for w in crate::veto_core::compute_core_set(&e, k).unwrap() {
                let m = matching_for(&e, k, w);
                let d = decompose_regular_matchings(&e, k, &m).unwrap();
                assert_eq!(d.maps.len(), k);
                for i in 0..k {
                    let mut seen = vec![false; e.num_voters()];
                    for v in e.voters() {
                        let target = d.maps[i][v.0];
                        assert!(!seen[target.0], "N_{i} repeats {target}");
                        seen[target.0] = true;
                        assert!(e.top_k(target, k).unwrap().contains(&d.matched[i][v.0]));
                    }
                }
            }
        }
    }

    #[test]
    fn truncated_matching_rejected() {
        let e = bloc();
        let m = matching_for(&e, 1, CandidateId(0));
        let mut pairs = m.pairs().to_vec();
        pairs.pop();
        let broken = Matching::from_pairs(pairs);
        assert!(matches!(
            decompose_regular_matchings(&e, 1, &broken),
            Err(FlowError::NotPerfect(_))
        ));
    }

    #[test]
    fn unanimous_last_place_fails_coalition_bound() {
        // Every voter ranks candidate 2 dead last, so no matching-shaped
        // input can rescue it against rival 0 at k = 2.
        let e = Election::parse("3 3\n3: 1 2 3\n").unwrap();
        let pairs: Vec<[usize; 4]> = (0..3)
            .flat_map(|v| [[v, 0, 0, v], [v, 1, 1, v]])
            .collect();
        let fake = Matching::from_pairs(pairs);
        assert!(matches!(
            construct_distortion_flow(&e, 2, CandidateId(2), CandidateId(0), &fake),
            Err(FlowError::CoalitionBoundViolated { preferring: 0, score: 3 })
        ));
    }

    #[test]
    fn unabsorbed_sources_fail_conservation() {
        let e = bloc();
        let empty = Circulation {
            w: CandidateId(0),
            c_star: CandidateId(1),
            flow: BTreeMap::new(),
            absorbed: BTreeMap::new(),
            stage1_total: Rational::zero(),
            stage2_receipts: BTreeMap::new(),
        };
        assert!(matches!(
            verify_flow(&FlowNetwork::new(&e), &empty, 1),
            Err(FlowError::ConservationViolated { .. })
        ));
    }

    #[test]
    fn report_serialization() {
        let report = FlowCostReport {
            per_voter: vec![ratio(3, 2), ratio(1, 1)],
            max_cost: ratio(3, 2),
            bound: ratio(3, 1),
        };
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            r#"{"max_cost":"3/2","bound":"3/1","per_voter":["3/2","1/1"]}"#
        );
    }

    #[test]
    fn rival_must_differ() {
        let e = bloc();
        let m = matching_for(&e, 1, CandidateId(0));
        assert!(matches!(
            construct_distortion_flow(&e, 1, CandidateId(0), CandidateId(0), &m),
            Err(FlowError::RivalEqualsWinner)
        ));
    }
}
