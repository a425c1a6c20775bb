//! Families of elections with known distortion behavior, plus random
//! profiles for property suites.
//!
//! Each named family carries the distance assignment that realizes its
//! bound (when one exists) and a list of machine-checkable claims, so test
//! suites can re-derive every number instead of trusting the generator.

use std::collections::BTreeSet;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::election::{ranking_of, CandidateId, Election, Ranking};
use crate::metric::{check_assignment, format_ratio, ratio, DistanceAssignment, Rational};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("bad generator parameters: {0}")]
    BadParams(String),
}

fn ser_ratio<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_ratio(r))
}

/// A claim about a generated instance, checkable against the library.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expectation {
    /// These candidates are possible winners at budget k.
    CoreContains { k: usize, candidates: BTreeSet<CandidateId> },
    /// The possible winners at budget k are exactly this set.
    CoreEquals { k: usize, candidates: BTreeSet<CandidateId> },
    /// Every possible winner at budget k lies in this set.
    CoreWithin { k: usize, candidates: BTreeSet<CandidateId> },
    /// This candidate is not a possible winner at budget k.
    CoreExcludes { k: usize, candidate: CandidateId },
    UtilitarianDistortionAtLeast {
        candidate: CandidateId,
        #[serde(serialize_with = "ser_ratio")]
        bound: Rational,
    },
    PercentileDistortionAtLeast {
        candidate: CandidateId,
        #[serde(serialize_with = "ser_ratio")]
        alpha: Rational,
        #[serde(serialize_with = "ser_ratio")]
        bound: Rational,
    },
    /// Every possible winner at budget k has unbounded alpha-percentile
    /// distortion.
    PercentileUnboundedForCore {
        k: usize,
        #[serde(serialize_with = "ser_ratio")]
        alpha: Rational,
    },
    /// Per-candidate minority protection levels.
    ProtectionVector { protections: Vec<u64> },
}

/// An election bundled with an optional witness assignment and the claims
/// it was built to exhibit.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct NamedInstance {
    #[serde(skip)]
    pub election: Election,
    pub witness: Option<DistanceAssignment>,
    pub expectations: Vec<Expectation>,
}

fn validated(
    election: Election,
    witness: Option<DistanceAssignment>,
    expectations: Vec<Expectation>,
) -> Result<NamedInstance, GenError> {
    if let Some(x) = &witness {
        let violations = check_assignment(&election, x)
            .map_err(|e| GenError::BadParams(e.to_string()))?;
        if let Some(first) = violations.first() {
            return Err(GenError::BadParams(format!(
                "witness is not a consistent metric: {first:?}"
            )));
        }
    }
    Ok(NamedInstance { election, witness, expectations })
}

/// Two-group election on which every k-approval veto winner has
/// utilitarian distortion arbitrarily close to 2k+1.
///
/// k+1 voters rank the first k+1 candidates above the rest, voter i
/// placing candidate i last among them. The witness puts candidate k+1
/// within 2*delta of everyone except its one detractor, while every other
/// front candidate sits at distance about 2 from everyone.
pub fn gen_util_lower_bound(
    k: usize,
    m: usize,
    delta: &Rational,
) -> Result<NamedInstance, GenError> {
    if k < 1 || k >= m {
        return Err(GenError::BadParams(format!("need 1 <= k < m, got k={k} m={m}")));
    }
    if delta < &Rational::zero() {
        return Err(GenError::BadParams("delta must be non-negative".into()));
    }
    let n = k + 1;
    let tail: Vec<usize> = (n..m).collect();
    let mut rankings = Vec::with_capacity(n);
    for i in 0..n {
        let mut order: Vec<usize> = Vec::with_capacity(m);
        if i < k {
            // Closest first: candidate k, the indifferent block, own bottom.
            order.push(k);
            order.extend((0..k).filter(|&j| j != i));
            order.push(i);
        } else {
            order.extend(0..k);
            order.push(k);
        }
        order.extend(tail.iter().copied());
        rankings.push(ranking_of(&order));
    }
    let election =
        Election::new(rankings).map_err(|e| GenError::BadParams(e.to_string()))?;

    let one = ratio(1, 1);
    let two = ratio(2, 1);
    let mut rows = vec![vec![Rational::zero(); m]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = if j == k {
                if i == k { &one + delta } else { &two * delta }
            } else if j < k {
                if i == k {
                    one.clone()
                } else if i == j {
                    &two + delta
                } else {
                    two.clone()
                }
            } else {
                // Unranked-block filler: beyond every named distance, flat
                // across voters, increasing with position.
                &two + delta + ratio((j - k) as i64, 1)
            };
        }
    }
    let witness = DistanceAssignment::from_rows(rows);

    let bound = ratio((2 * k + 1) as i64, 1)
        / (&one + ratio(2 * n as i64, 1) * delta);
    let expectations = vec![
        Expectation::CoreContains {
            k,
            candidates: (0..n).map(CandidateId).collect(),
        },
        Expectation::UtilitarianDistortionAtLeast { candidate: CandidateId(0), bound },
    ];
    validated(election, Some(witness), expectations)
}

/// Election whose entire k-approval veto core has unbounded alpha-percentile
/// distortion, for any alpha in [1/2, k/(k+1)).
///
/// The smallest suitable odd electorate splits into a majority that ranks
/// the spoiler first and a minority that ranks it last; 0/1 distances make
/// the spoiler free for the percentile while every possible winner pays.
pub fn gen_percentile_unbounded(
    k: usize,
    alpha: &Rational,
) -> Result<NamedInstance, GenError> {
    if k < 2 {
        return Err(GenError::BadParams(format!("need k >= 2, got {k}")));
    }
    let half = ratio(1, 2);
    let threshold = ratio(k as i64, (k + 1) as i64);
    if alpha < &half || alpha >= &threshold {
        return Err(GenError::BadParams(format!(
            "alpha must lie in [1/2, {}/{}), got {}",
            k,
            k + 1,
            format_ratio(alpha)
        )));
    }

    const SEARCH_CAP: usize = 10_000;
    let mut found = None;
    let mut n = 1usize;
    while n <= SEARCH_CAP {
        let an = alpha * ratio(n as i64, 1);
        if !an.is_integer() {
            let ell = an.ceil().to_integer();
            let ell_usize = usize::try_from(&ell).expect("ceil(alpha n) fits");
            // ceil(alpha n) < nk/(k+1)
            if ratio(ell_usize as i64, 1) < ratio((n * k) as i64, (k + 1) as i64) {
                found = Some((n, ell_usize));
                break;
            }
        }
        n += 2;
    }
    let (n, ell) = found.ok_or_else(|| {
        GenError::BadParams(format!("no odd electorate below {SEARCH_CAP} works"))
    })?;

    let m = k + 1;
    let spoiler = CandidateId(k);
    let mut rankings = Vec::with_capacity(n);
    for _ in 0..n - ell {
        let mut order: Vec<usize> = (0..k).collect();
        order.push(k);
        rankings.push(ranking_of(&order));
    }
    for _ in 0..ell {
        let mut order = vec![k];
        order.extend(0..k);
        rankings.push(ranking_of(&order));
    }
    let election =
        Election::new(rankings).map_err(|e| GenError::BadParams(e.to_string()))?;

    let mut rows = vec![vec![Rational::zero(); m]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        let last_place = i < n - ell;
        for (j, cell) in row.iter_mut().enumerate() {
            let far = if last_place { j == k } else { j != k };
            *cell = if far { ratio(1, 1) } else { Rational::zero() };
        }
    }
    let witness = DistanceAssignment::from_rows(rows);

    let expectations = vec![
        Expectation::CoreExcludes { k, candidate: spoiler },
        Expectation::CoreWithin { k, candidates: (0..k).map(CandidateId).collect() },
        Expectation::PercentileUnboundedForCore { k, alpha: alpha.clone() },
    ];
    validated(election, Some(witness), expectations)
}

/// Cyclic-shift election showing no rule beats alpha-percentile distortion
/// 5 - epsilon: under the witness, the first candidate costs 5 at the deciding
/// percentile while the last costs barely more than 1.
pub fn gen_percentile_cyclic(
    alpha: &Rational,
    epsilon: &Rational,
) -> Result<NamedInstance, GenError> {
    let half = ratio(1, 2);
    let one = ratio(1, 1);
    if alpha < &half || alpha >= &one {
        return Err(GenError::BadParams(format!(
            "alpha must lie in [1/2, 1), got {}",
            format_ratio(alpha)
        )));
    }
    if epsilon <= &Rational::zero() {
        return Err(GenError::BadParams("epsilon must be positive".into()));
    }
    // Smallest m with m - floor(alpha m) = 2; exists since the left side
    // steps by at most 1.
    let mut m = 1usize;
    loop {
        let floor = (alpha * ratio(m as i64, 1)).floor().to_integer();
        let floor = usize::try_from(&floor).expect("floor(alpha m) fits");
        if m - floor == 2 {
            break;
        }
        m += 1;
    }
    let n = m;
    let delta = epsilon / ratio(5 * m as i64, 1);

    let rankings: Vec<Ranking> = (0..n)
        .map(|i| {
            let order: Vec<usize> = (0..m).map(|p| (i + p) % m).collect();
            ranking_of(&order)
        })
        .collect();
    let election =
        Election::new(rankings).map_err(|e| GenError::BadParams(e.to_string()))?;

    let mut rows = vec![vec![Rational::zero(); m]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let drift = ratio(j as i64, 1) * &delta;
            *cell = if i == 0 {
                ratio(10, 1) + drift
            } else if i == 1 && j == 0 {
                ratio(5, 1)
            } else if j >= i {
                &one + drift
            } else {
                ratio(3, 1) + drift
            };
        }
    }
    let witness = DistanceAssignment::from_rows(rows);

    let bound = ratio(5, 1) / (&one + ratio((m - 1) as i64, 1) * &delta);
    let expectations = vec![Expectation::PercentileDistortionAtLeast {
        candidate: CandidateId(0),
        alpha: alpha.clone(),
        bound,
    }];
    validated(election, Some(witness), expectations)
}

/// The 12-voter bloc election whose winner set grows from {0} to {0, 1}
/// as the approval budget reaches the full ballot.
pub fn gen_remark_example() -> NamedInstance {
    let election = Election::parse("12 3\n7: 1 2 3\n5: 2 1 3\n").expect("static profile");
    let first: BTreeSet<CandidateId> = [CandidateId(0)].into();
    let both: BTreeSet<CandidateId> = [CandidateId(0), CandidateId(1)].into();
    NamedInstance {
        election,
        witness: None,
        expectations: vec![
            Expectation::CoreEquals { k: 1, candidates: first.clone() },
            Expectation::CoreEquals { k: 2, candidates: first },
            Expectation::CoreEquals { k: 3, candidates: both },
            Expectation::ProtectionVector { protections: vec![3, 3, 1] },
        ],
    }
}

/// n independent uniform rankings from a seeded generator; the same
/// (n, m, seed) always yields the same election.
pub fn gen_random(n: usize, m: usize, seed: u64) -> Result<Election, GenError> {
    if n < 1 || m < 1 {
        return Err(GenError::BadParams(format!("need n, m >= 1, got n={n} m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rankings: Vec<Ranking> = (0..n)
        .map(|_| {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut rng);
            ranking_of(&order)
        })
        .collect();
    Election::new(rankings).map_err(|e| GenError::BadParams(e.to_string()))
}

/// All m! rankings of m candidates, in lexicographic order.
pub fn all_rankings(m: usize) -> Vec<Ranking> {
    fn extend(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Ranking>) {
        if rest.is_empty() {
            out.push(ranking_of(prefix));
            return;
        }
        for i in 0..rest.len() {
            let next = rest.remove(i);
            prefix.push(next);
            extend(prefix, rest, out);
            prefix.pop();
            rest.insert(i, next);
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), &mut (0..m).collect(), &mut out);
    out
}

/// Every election with n voters over m candidates, i.e. all (m!)^n
/// ranking tuples. Only sensible for desk-size n and m.
pub fn all_elections(n: usize, m: usize) -> Vec<Election> {
    let rankings = all_rankings(m);
    let mut out = Vec::new();
    let mut picks = vec![0usize; n];
    loop {
        let chosen: Vec<Ranking> = picks.iter().map(|&i| rankings[i].clone()).collect();
        out.push(Election::new(chosen).expect("well-formed by construction"));
        let mut pos = n;
        while pos > 0 {
            picks[pos - 1] += 1;
            if picks[pos - 1] < rankings.len() {
                break;
            }
            picks[pos - 1] = 0;
            pos -= 1;
        }
        if pos == 0 {
            return out;
        }
    }
}
