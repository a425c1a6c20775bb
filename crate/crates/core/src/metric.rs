//! Voter-candidate distance assignments consistent with a ranking profile,
//! their extension to a full pseudo-metric, and social cost functions.
//!
//! All arithmetic is exact: distances are arbitrary-precision rationals.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::election::{CandidateId, Election, VoterId};

pub type Rational = num_rational::BigRational;

/// `p/q` as an exact rational.
pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(p.into(), q.into())
}

/// Canonical text form `p/q` with positive denominator and gcd(p, q) = 1.
pub fn format_ratio(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `p/q` or a bare integer `p`.
pub fn parse_ratio(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (p, q) = match text.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (text, "1"),
    };
    let p: num_bigint::BigInt = p.parse().ok()?;
    let q: num_bigint::BigInt = q.parse().ok()?;
    if q.is_zero() {
        return None;
    }
    Some(Rational::new(p, q))
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("distance matrix is {rows}x{cols}, election needs {n}x{m}")]
    DimensionMismatch { rows: usize, cols: usize, n: usize, m: usize },
    #[error("assignment violates {count} consistency constraints")]
    InvalidAssignment { count: usize },
}

/// A candidate distance per voter, the object the distortion programs search
/// over. Serializes as a matrix of `p/q` strings.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DistanceAssignment {
    rows: Vec<Vec<Rational>>,
}

impl DistanceAssignment {
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        DistanceAssignment { rows }
    }

    /// All distances one; consistent with every profile of matching shape.
    pub fn uniform_ones(n: usize, m: usize) -> Self {
        DistanceAssignment { rows: vec![vec![Rational::new(1.into(), 1.into()); m]; n] }
    }

    pub fn num_voters(&self) -> usize {
        self.rows.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn d(&self, v: VoterId, c: CandidateId) -> &Rational {
        &self.rows[v.0][c.0]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }
}

impl Serialize for DistanceAssignment {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let strings: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| row.iter().map(format_ratio).collect())
            .collect();
        strings.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DistanceAssignment {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let strings: Vec<Vec<String>> = Vec::deserialize(deserializer)?;
        let mut rows = Vec::with_capacity(strings.len());
        for row in strings {
            let mut out = Vec::with_capacity(row.len());
            for s in row {
                out.push(parse_ratio(&s).ok_or_else(|| D::Error::custom("bad rational"))?);
            }
            rows.push(out);
        }
        Ok(DistanceAssignment { rows })
    }
}

/// One violated constraint of an assignment.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum MetricViolation {
    /// d(v, c) < 0.
    Negative { voter: VoterId, candidate: CandidateId },
    /// v ranks `preferred` directly above `over` but sits strictly closer to `over`.
    Consistency { voter: VoterId, preferred: CandidateId, over: CandidateId },
    /// d(v,c) > d(v,c') + d(v',c') + d(v',c): no pseudo-metric extension exists.
    Quadruple { v: VoterId, v2: VoterId, c: CandidateId, c2: CandidateId },
}

/// Checks an assignment against a profile and reports every violated
/// constraint: non-negativity, consistency along each voter's ranking, and
/// the quadruple inequalities that make a pseudo-metric extension possible.
pub fn check_assignment(
    e: &Election,
    x: &DistanceAssignment,
) -> Result<Vec<MetricViolation>, MetricError> {
    let (n, m) = (e.num_voters(), e.num_candidates());
    if x.num_voters() != n || x.rows.iter().any(|r| r.len() != m) {
        return Err(MetricError::DimensionMismatch {
            rows: x.num_voters(),
            cols: x.rows.first().map_or(0, |r| r.len()),
            n,
            m,
        });
    }
    let mut violations = Vec::new();
    for v in e.voters() {
        for c in e.candidates() {
            if x.d(v, c).is_negative() {
                violations.push(MetricViolation::Negative { voter: v, candidate: c });
            }
        }
        let order = e.ranking(v).order();
        for pair in order.windows(2) {
            if x.d(v, pair[0]) > x.d(v, pair[1]) {
                violations.push(MetricViolation::Consistency {
                    voter: v,
                    preferred: pair[0],
                    over: pair[1],
                });
            }
        }
    }
    for v in e.voters() {
        for v2 in e.voters() {
            if v == v2 {
                continue;
            }
            for c in e.candidates() {
                for c2 in e.candidates() {
                    if c == c2 {
                        continue;
                    }
                    let bound = x.d(v, c2) + x.d(v2, c2) + x.d(v2, c);
                    if *x.d(v, c) > bound {
                        violations.push(MetricViolation::Quadruple { v, v2, c, c2 });
                    }
                }
            }
        }
    }
    Ok(violations)
}

/// A pseudo-metric over voters and candidates together. Point order: voters
/// `0..n`, then candidates `n..n+m`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExtendedMetric {
    n: usize,
    m: usize,
    d: Vec<Vec<Rational>>,
}

impl ExtendedMetric {
    pub fn voter_voter(&self, a: VoterId, b: VoterId) -> &Rational {
        &self.d[a.0][b.0]
    }

    pub fn voter_candidate(&self, v: VoterId, c: CandidateId) -> &Rational {
        &self.d[v.0][self.n + c.0]
    }

    pub fn candidate_candidate(&self, a: CandidateId, b: CandidateId) -> &Rational {
        &self.d[self.n + a.0][self.n + b.0]
    }
}

/// Extends a valid assignment to a pseudo-metric on V union C by shortest
/// paths through the bipartite distance graph. The restriction to voter to
/// candidate pairs reproduces the assignment exactly.
pub fn extend_assignment(
    e: &Election,
    x: &DistanceAssignment,
) -> Result<ExtendedMetric, MetricError> {
    let violations = check_assignment(e, x)?;
    if !violations.is_empty() {
        return Err(MetricError::InvalidAssignment { count: violations.len() });
    }
    let (n, m) = (e.num_voters(), e.num_candidates());
    let size = n + m;
    let mut d: Vec<Vec<Option<Rational>>> = vec![vec![None; size]; size];
    for i in 0..size {
        d[i][i] = Some(Rational::zero());
    }
    for v in 0..n {
        for c in 0..m {
            d[v][n + c] = Some(x.rows[v][c].clone());
            d[n + c][v] = Some(x.rows[v][c].clone());
        }
    }
    for mid in 0..size {
        for a in 0..size {
            let via_a = match &d[a][mid] {
                Some(w) => w.clone(),
                None => continue,
            };
            for b in 0..size {
                let through = match &d[mid][b] {
                    Some(w) => &via_a + w,
                    None => continue,
                };
                if d[a][b].as_ref().map_or(true, |cur| through < *cur) {
                    d[a][b] = Some(through);
                }
            }
        }
    }
    let d = d
        .into_iter()
        .map(|row| row.into_iter().map(|w| w.expect("bipartite graph is connected")).collect())
        .collect();
    Ok(ExtendedMetric { n, m, d })
}

/// How a candidate's cost aggregates over voter distances.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Objective {
    /// Sum over voters.
    Utilitarian,
    /// Distance of the floor(alpha*n + 1)-th closest voter; alpha in [0, 1).
    Percentile(Rational),
    /// Worst-off voter.
    Egalitarian,
}

/// 1-based order statistic selected by an alpha-percentile over n voters.
pub fn percentile_rank(alpha: &Rational, n: usize) -> usize {
    let scaled = alpha * Rational::from_integer(n.into());
    let floor: num_bigint::BigInt = scaled.floor().to_integer();
    let r: usize = usize::try_from(&floor).expect("alpha in [0,1) keeps the rank small");
    r + 1
}

/// Cost of candidate `c` under the objective, evaluated on an assignment.
pub fn social_cost(
    e: &Election,
    x: &DistanceAssignment,
    c: CandidateId,
    objective: &Objective,
) -> Rational {
    let column = || e.voters().map(|v| x.d(v, c).clone());
    match objective {
        Objective::Utilitarian => column().fold(Rational::zero(), |acc, d| acc + d),
        Objective::Percentile(alpha) => {
            let r = percentile_rank(alpha, e.num_voters());
            let mut distances: Vec<Rational> = column().collect();
            distances.sort();
            distances[r - 1].clone()
        }
        Objective::Egalitarian => column().max().expect("elections have voters"),
    }
}

/// Candidates whose suffix sets make up `sets`, used by tests; kept here to
/// avoid a dependency cycle.
#[doc(hidden)]
pub fn candidate_set(ids: &[usize]) -> BTreeSet<CandidateId> {
    ids.iter().map(|&i| CandidateId(i)).collect()
}
