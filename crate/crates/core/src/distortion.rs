//! Worst-case metric distortion of a fixed winner, computed exactly.
//!
//! For a winner w and a rival c the adversary picks voter-candidate
//! distances consistent with the ballots that inflate cost(w)/cost(c). With
//! the rival's cost normalized this is a linear program over the distances;
//! taking the maximum over rivals (and over order-statistic patterns for
//! percentile objectives) gives the distortion. Unbounded programs
//! correspond to infinite distortion.
//!
//! The quadruple inequalities that make distances metric-extendable number
//! n(n-1)m(m-1); most never bind, so they are generated lazily: solve,
//! add the violated ones, repeat. A reported unbounded direction is only
//! accepted after every missing inequality is checked against the ray, so
//! the final answer is always with respect to the full constraint set.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::election::{CandidateId, Election, ElectionError, VoterId};
use crate::lp::{LinearConstraint, LpEngine, LpError, LpOutcome, LpProblem};
use crate::metric::{DistanceAssignment, Rational};
use crate::veto::DEFAULT_BUDGET;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum DistortionError {
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("candidate {candidate} out of range for {num_candidates} candidates")]
    UnknownCandidate { candidate: usize, num_candidates: usize },
    #[error("alpha must lie in [0, 1), got {alpha}")]
    AlphaOutOfRange { alpha: String },
    #[error("{subproblems} percentile subproblems exceed the cap of {cap}")]
    SubsetBudgetExceeded { subproblems: u128, cap: u128 },
    #[error("solver anomaly: {0}")]
    Numerical(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct DistortionConfig {
    pub engine: LpEngine,
    /// Refuse percentile runs whose subset count exceeds this.
    pub subset_cap: Option<u128>,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        DistortionConfig {
            engine: LpEngine::Rational,
            subset_cap: Some(DEFAULT_BUDGET),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DistortionValue {
    Finite(Rational),
    Unbounded,
}

impl DistortionValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, DistortionValue::Finite(_))
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            DistortionValue::Finite(v) => Some(v),
            DistortionValue::Unbounded => None,
        }
    }
}

/// Which adversary subproblem a record refers to.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SubproblemChoice {
    Utilitarian {
        rival: CandidateId,
    },
    /// `close` voters are held near the rival, `far` voters far from the
    /// winner; their sizes encode the targeted order statistics.
    Percentile {
        rival: CandidateId,
        close: BTreeSet<VoterId>,
        far: BTreeSet<VoterId>,
    },
    Egalitarian {
        rival: CandidateId,
        victim: VoterId,
    },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SubproblemRecord {
    pub choice: SubproblemChoice,
    pub value: DistortionValue,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DistortionResult {
    pub value: DistortionValue,
    /// Distances achieving the value exactly (absent when unbounded).
    pub witness: Option<DistanceAssignment>,
    /// Rival attaining the maximum, lowest index on ties; the winner itself
    /// when there is no rival.
    pub optimal_candidate: CandidateId,
    pub subproblems: Vec<SubproblemRecord>,
}

fn check_candidate(e: &Election, w: CandidateId) -> Result<(), DistortionError> {
    if w.0 >= e.num_candidates() {
        return Err(DistortionError::UnknownCandidate {
            candidate: w.0,
            num_candidates: e.num_candidates(),
        });
    }
    Ok(())
}

fn idx(e: &Election, v: VoterId, c: CandidateId) -> usize {
    v.0 * e.num_candidates() + c.0
}

/// Adjacent-pair monotonicity along each ballot; transitivity covers the
/// remaining pairs.
fn consistency_rows(e: &Election) -> Vec<LinearConstraint> {
    let mut rows = Vec::new();
    for v in e.voters() {
        for pair in e.ranking(v).order().windows(2) {
            rows.push(LinearConstraint::le(
                vec![
                    (idx(e, v, pair[0]), Rational::one()),
                    (idx(e, v, pair[1]), -Rational::one()),
                ],
                Rational::zero(),
            ));
        }
    }
    rows
}

#[derive(Clone, Copy)]
struct Quad {
    v: VoterId,
    v2: VoterId,
    c: CandidateId,
    c2: CandidateId,
}

impl Quad {
    fn all(e: &Election) -> Vec<Quad> {
        let mut quads = Vec::new();
        for v in e.voters() {
            for v2 in e.voters() {
                if v == v2 {
                    continue;
                }
                for c in e.candidates() {
                    for c2 in e.candidates() {
                        if c != c2 {
                            quads.push(Quad { v, v2, c, c2 });
                        }
                    }
                }
            }
        }
        quads
    }

    fn row(&self, e: &Election) -> LinearConstraint {
        LinearConstraint::le(
            vec![
                (idx(e, self.v, self.c), Rational::one()),
                (idx(e, self.v, self.c2), -Rational::one()),
                (idx(e, self.v2, self.c2), -Rational::one()),
                (idx(e, self.v2, self.c), -Rational::one()),
            ],
            Rational::zero(),
        )
    }

    /// d(v,c) - d(v,c2) - d(v2,c2) - d(v2,c) evaluated on a vector that has
    /// the distance variables first.
    fn excess(&self, e: &Election, x: &[Rational]) -> Rational {
        &x[idx(e, self.v, self.c)]
            - &x[idx(e, self.v, self.c2)]
            - &x[idx(e, self.v2, self.c2)]
            - &x[idx(e, self.v2, self.c)]
    }
}

fn float_tolerance(engine: LpEngine) -> Rational {
    match engine {
        LpEngine::Rational => Rational::zero(),
        LpEngine::Float => Rational::from_float(1e-7).unwrap(),
    }
}

/// Solves one subproblem to optimality or certified unboundedness over the
/// full constraint set, with quadruple rows pulled in on demand.
fn solve_lazy(
    e: &Election,
    mut problem: LpProblem,
    engine: LpEngine,
) -> Result<LpOutcome, DistortionError> {
    let quads = Quad::all(e);
    let tol = float_tolerance(engine);
    let mut active = vec![false; quads.len()];
    // Each round activates at least one new row, so this terminates.
    loop {
        let outcome = crate::lp::solve_lp(&problem, engine)?;
        let (point, ray) = match &outcome {
            LpOutcome::Optimal { point, .. } => (point, None),
            LpOutcome::Unbounded { point, ray } => (point, Some(ray)),
            LpOutcome::Infeasible => {
                return Err(DistortionError::Numerical(
                    "subproblem reported infeasible despite a known feasible point"
                        .into(),
                ));
            }
        };
        let mut added = false;
        for (i, quad) in quads.iter().enumerate() {
            if active[i] {
                continue;
            }
            let cut = quad.excess(e, point) > tol
                || ray.is_some_and(|r| quad.excess(e, r) > tol);
            if cut {
                active[i] = true;
                problem.constraints.push(quad.row(e));
                added = true;
            }
        }
        if !added {
            return Ok(outcome);
        }
    }
}

fn witness_from(e: &Election, point: &[Rational]) -> DistanceAssignment {
    let m = e.num_candidates();
    let rows = e
        .voters()
        .map(|v| point[v.0 * m..(v.0 + 1) * m].to_vec())
        .collect();
    DistanceAssignment::from_rows(rows)
}

/// Folds one solved subproblem into the running maximum.
struct Best {
    value: Rational,
    witness: DistanceAssignment,
    rival: CandidateId,
}

struct Search<'a> {
    e: &'a Election,
    engine: LpEngine,
    best: Option<Best>,
    records: Vec<SubproblemRecord>,
}

enum Step {
    Continue,
    UnboundedAt(CandidateId),
}

impl<'a> Search<'a> {
    fn new(e: &'a Election, engine: LpEngine) -> Self {
        Search { e, engine, best: None, records: Vec::new() }
    }

    fn run(
        &mut self,
        rival: CandidateId,
        choice: SubproblemChoice,
        problem: LpProblem,
    ) -> Result<Step, DistortionError> {
        match solve_lazy(self.e, problem, self.engine)? {
            LpOutcome::Optimal { value, point } => {
                if self.best.as_ref().is_none_or(|b| value > b.value) {
                    self.best = Some(Best {
                        value: value.clone(),
                        witness: witness_from(self.e, &point),
                        rival,
                    });
                }
                self.records.push(SubproblemRecord {
                    choice,
                    value: DistortionValue::Finite(value),
                });
                Ok(Step::Continue)
            }
            LpOutcome::Unbounded { .. } => {
                self.records.push(SubproblemRecord {
                    choice,
                    value: DistortionValue::Unbounded,
                });
                Ok(Step::UnboundedAt(rival))
            }
            LpOutcome::Infeasible => unreachable!("solve_lazy filters infeasible"),
        }
    }

    fn finish(self, w: CandidateId) -> DistortionResult {
        match self.best {
            Some(best) => DistortionResult {
                value: DistortionValue::Finite(best.value),
                witness: Some(best.witness),
                optimal_candidate: best.rival,
                subproblems: self.records,
            },
            // No rival at all: the winner is trivially optimal.
            None => DistortionResult {
                value: DistortionValue::Finite(Rational::one()),
                witness: Some(DistanceAssignment::uniform_ones(
                    self.e.num_voters(),
                    self.e.num_candidates(),
                )),
                optimal_candidate: w,
                subproblems: Vec::new(),
            },
        }
    }

    fn finish_unbounded(self, rival: CandidateId) -> DistortionResult {
        DistortionResult {
            value: DistortionValue::Unbounded,
            witness: None,
            optimal_candidate: rival,
            subproblems: self.records,
        }
    }
}

/// Worst-case ratio of total distance to w over total distance to the best
/// candidate, across all ballot-consistent metrics.
pub fn distortion_utilitarian(
    e: &Election,
    w: CandidateId,
    config: &DistortionConfig,
) -> Result<DistortionResult, DistortionError> {
    check_candidate(e, w)?;
    let consistency = consistency_rows(e);
    let nm = e.num_voters() * e.num_candidates();
    let mut search = Search::new(e, config.engine);
    for rival in e.candidates().filter(|&c| c != w) {
        let mut constraints = consistency.clone();
        constraints.push(LinearConstraint::eq(
            e.voters().map(|v| (idx(e, v, rival), Rational::one())).collect(),
            Rational::one(),
        ));
        let problem = LpProblem {
            num_vars: nm,
            objective: e.voters().map(|v| (idx(e, v, w), Rational::one())).collect(),
            constraints,
        };
        match search.run(rival, SubproblemChoice::Utilitarian { rival }, problem)? {
            Step::Continue => {}
            Step::UnboundedAt(r) => return Ok(search.finish_unbounded(r)),
        }
    }
    Ok(search.finish(w))
}

fn binomial(n: usize, r: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..r.min(n - r) {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn subsets_of_size(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// Worst-case ratio of the alpha-percentile distance to w over the
/// alpha-percentile distance to the best candidate. The order statistics
/// are linearized over voter subsets, so the subproblem count is guarded.
pub fn distortion_percentile(
    e: &Election,
    w: CandidateId,
    alpha: &Rational,
    config: &DistortionConfig,
) -> Result<DistortionResult, DistortionError> {
    check_candidate(e, w)?;
    if alpha.is_negative() || *alpha >= Rational::one() {
        return Err(DistortionError::AlphaOutOfRange { alpha: alpha.to_string() });
    }
    let n = e.num_voters();
    let r = crate::metric::percentile_rank(alpha, n);
    if let Some(cap) = config.subset_cap {
        let count = binomial(n, r)
            .checked_mul(binomial(n, n - r + 1))
            .and_then(|x| x.checked_mul(e.num_candidates() as u128));
        match count {
            Some(c) if c <= cap => {}
            _ => {
                return Err(DistortionError::SubsetBudgetExceeded {
                    subproblems: count.unwrap_or(u128::MAX),
                    cap,
                });
            }
        }
    }
    let consistency = consistency_rows(e);
    let nm = n * e.num_candidates();
    let t = nm; // one extra variable: the winner's guaranteed distance
    let close_sets = subsets_of_size(n, r);
    let far_sets = subsets_of_size(n, n - r + 1);
    let mut search = Search::new(e, config.engine);
    for rival in e.candidates().filter(|&c| c != w) {
        for close in &close_sets {
            for far in &far_sets {
                let mut constraints = consistency.clone();
                for &v in close {
                    constraints.push(LinearConstraint::le(
                        vec![(idx(e, VoterId(v), rival), Rational::one())],
                        Rational::one(),
                    ));
                }
                for &v in far {
                    constraints.push(LinearConstraint::le(
                        vec![
                            (t, Rational::one()),
                            (idx(e, VoterId(v), w), -Rational::one()),
                        ],
                        Rational::zero(),
                    ));
                }
                let problem = LpProblem {
                    num_vars: nm + 1,
                    objective: vec![(t, Rational::one())],
                    constraints,
                };
                let choice = SubproblemChoice::Percentile {
                    rival,
                    close: close.iter().copied().map(VoterId).collect(),
                    far: far.iter().copied().map(VoterId).collect(),
                };
                match search.run(rival, choice, problem)? {
                    Step::Continue => {}
                    Step::UnboundedAt(c) => return Ok(search.finish_unbounded(c)),
                }
            }
        }
    }
    Ok(search.finish(w))
}

/// Worst-case ratio of the farthest voter's distance to w over the farthest
/// voter's distance to the best candidate.
pub fn distortion_egalitarian(
    e: &Election,
    w: CandidateId,
    config: &DistortionConfig,
) -> Result<DistortionResult, DistortionError> {
    check_candidate(e, w)?;
    let consistency = consistency_rows(e);
    let nm = e.num_voters() * e.num_candidates();
    let mut search = Search::new(e, config.engine);
    for rival in e.candidates().filter(|&c| c != w) {
        for victim in e.voters() {
            let mut constraints = consistency.clone();
            for v in e.voters() {
                constraints.push(LinearConstraint::le(
                    vec![(idx(e, v, rival), Rational::one())],
                    Rational::one(),
                ));
            }
            let problem = LpProblem {
                num_vars: nm,
                objective: vec![(idx(e, victim, w), Rational::one())],
                constraints,
            };
            let choice = SubproblemChoice::Egalitarian { rival, victim };
            match search.run(rival, choice, problem)? {
                Step::Continue => {}
                Step::UnboundedAt(c) => return Ok(search.finish_unbounded(c)),
            }
        }
    }
    Ok(search.finish(w))
}

/// Whether some candidate beats w on every single ballot.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParetoStatus {
    Efficient,
    Dominated { by: CandidateId },
}

pub fn pareto_status(e: &Election, w: CandidateId) -> Result<ParetoStatus, DistortionError> {
    check_candidate(e, w)?;
    for c in e.candidates().filter(|&c| c != w) {
        if e.voters().all(|v| e.prefers(v, c, w)) {
            return Ok(ParetoStatus::Dominated { by: c });
        }
    }
    Ok(ParetoStatus::Efficient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::election::ranking_of;
    use crate::metric::{check_assignment, ratio, social_cost, Objective};

    fn opposed() -> Election {
        Election::new(vec![ranking_of(&[0, 1]), ranking_of(&[1, 0])]).unwrap()
    }

    fn exact(result: &DistortionResult) -> &Rational {
        result.value.finite().expect("finite distortion")
    }

    #[test]
    fn utilitarian_two_voters_reaches_three() {
        // One voter against w, one for it: the classic ratio-3 profile.
        let e = Election::new(vec![ranking_of(&[1, 0]), ranking_of(&[0, 1])]).unwrap();
        let w = CandidateId(0);
        let out = distortion_utilitarian(&e, w, &DistortionConfig::default()).unwrap();
        assert_eq!(*exact(&out), ratio(3, 1));
        assert_eq!(out.optimal_candidate, CandidateId(1));
        let witness = out.witness.as_ref().unwrap();
        assert_eq!(check_assignment(&e, witness).unwrap(), vec![]);
        // The witness achieves the ratio exactly.
        let cost_w = social_cost(&e, witness, w, &Objective::Utilitarian);
        let cost_r =
            social_cost(&e, witness, CandidateId(1), &Objective::Utilitarian);
        assert_eq!(cost_w, &cost_r * ratio(3, 1));
        assert_eq!(out.subproblems.len(), 1);
    }

    #[test]
    fn utilitarian_single_candidate() {
        let e = Election::parse("2 1\n2: 1\n").unwrap();
        let out =
            distortion_utilitarian(&e, CandidateId(0), &DistortionConfig::default())
                .unwrap();
        assert_eq!(*exact(&out), ratio(1, 1));
        assert_eq!(out.optimal_candidate, CandidateId(0));
        assert!(out.subproblems.is_empty());
    }

    #[test]
    fn percentile_median_on_opposed_pair() {
        let e = opposed();
        let out = distortion_percentile(
            &e,
            CandidateId(0),
            &ratio(1, 2),
            &DistortionConfig::default(),
        )
        .unwrap();
        assert_eq!(*exact(&out), ratio(3, 1));
        let witness = out.witness.as_ref().unwrap();
        assert_eq!(check_assignment(&e, witness).unwrap(), vec![]);
        let obj = Objective::Percentile(ratio(1, 2));
        let cost_w = social_cost(&e, witness, CandidateId(0), &obj);
        let cost_r = social_cost(&e, witness, CandidateId(1), &obj);
        assert_eq!(cost_w, &cost_r * ratio(3, 1));
        // 2 rivals' worth of (close, far) patterns: 1 close set, 2 far sets.
        assert_eq!(out.subproblems.len(), 2);
    }

    #[test]
    fn percentile_unbounded_when_everyone_prefers_the_rival() {
        let e = Election::new(vec![ranking_of(&[1, 0]), ranking_of(&[1, 0])]).unwrap();
        let out = distortion_percentile(
            &e,
            CandidateId(0),
            &ratio(1, 2),
            &DistortionConfig::default(),
        )
        .unwrap();
        assert_eq!(out.value, DistortionValue::Unbounded);
        assert!(out.witness.is_none());
        assert_eq!(out.optimal_candidate, CandidateId(1));
        assert_eq!(
            out.subproblems.last().unwrap().value,
            DistortionValue::Unbounded
        );
    }

    #[test]
    fn percentile_budget_refusal() {
        let e = opposed();
        let config =
            DistortionConfig { subset_cap: Some(1), ..DistortionConfig::default() };
        assert!(matches!(
            distortion_percentile(&e, CandidateId(0), &ratio(1, 2), &config),
            Err(DistortionError::SubsetBudgetExceeded { cap: 1, .. })
        ));
    }

    #[test]
    fn alpha_range_checked() {
        let e = opposed();
        for alpha in [ratio(1, 1), ratio(3, 2), ratio(-1, 2)] {
            assert!(matches!(
                distortion_percentile(
                    &e,
                    CandidateId(0),
                    &alpha,
                    &DistortionConfig::default()
                ),
                Err(DistortionError::AlphaOutOfRange { .. })
            ));
        }
        // alpha = 0 targets the closest voter and is allowed.
        distortion_percentile(
            &e,
            CandidateId(0),
            &Rational::zero(),
            &DistortionConfig::default(),
        )
        .unwrap();
    }

    #[test]
    fn egalitarian_on_opposed_pair() {
        let e = opposed();
        let out =
            distortion_egalitarian(&e, CandidateId(0), &DistortionConfig::default())
                .unwrap();
        assert_eq!(*exact(&out), ratio(3, 1));
        let witness = out.witness.as_ref().unwrap();
        assert_eq!(check_assignment(&e, witness).unwrap(), vec![]);
        let cost_w = social_cost(&e, witness, CandidateId(0), &Objective::Egalitarian);
        let cost_r = social_cost(&e, witness, CandidateId(1), &Objective::Egalitarian);
        assert_eq!(cost_w, &cost_r * ratio(3, 1));
        assert_eq!(out.subproblems.len(), 2);
    }

    #[test]
    fn float_engine_close_to_exact() {
        let e = Election::new(vec![ranking_of(&[1, 0]), ranking_of(&[0, 1])]).unwrap();
        let config = DistortionConfig {
            engine: LpEngine::Float,
            ..DistortionConfig::default()
        };
        let out = distortion_utilitarian(&e, CandidateId(0), &config).unwrap();
        let err = (exact(&out) - ratio(3, 1)).abs();
        assert!(err < Rational::from_float(1e-7).unwrap(), "off by {err}");
    }

    #[test]
    fn pareto_classification() {
        let e = Election::new(vec![ranking_of(&[0, 1]), ranking_of(&[0, 1])]).unwrap();
        assert_eq!(
            pareto_status(&e, CandidateId(1)).unwrap(),
            ParetoStatus::Dominated { by: CandidateId(0) }
        );
        assert_eq!(pareto_status(&e, CandidateId(0)).unwrap(), ParetoStatus::Efficient);
        let opp = opposed();
        for c in opp.candidates() {
            assert_eq!(pareto_status(&opp, c).unwrap(), ParetoStatus::Efficient);
        }
    }

    #[test]
    fn unknown_candidate_rejected() {
        let e = opposed();
        assert!(matches!(
            distortion_utilitarian(&e, CandidateId(7), &DistortionConfig::default()),
            Err(DistortionError::UnknownCandidate { candidate: 7, .. })
        ));
    }
}
