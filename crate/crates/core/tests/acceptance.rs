//! End-to-end checks of every guarantee the library advertises, one test
//! per claim, each printing a `criterion NN ...: pass` line on success.
//!
//! Small cases are swept exhaustively; larger ones use seeded random
//! profiles so failures reproduce. Oracles in `common` recompute results
//! from definitions rather than through the production code paths.

mod common;

use std::collections::BTreeSet;

use common::{no_blocking_core, seeded_suite};
use vetocore::distortion::{
    distortion_egalitarian, distortion_percentile, distortion_utilitarian, pareto_status,
    DistortionValue, ParetoStatus,
};
use vetocore::flow_verify::{construct_distortion_flow, verify_flow, FlowNetwork};
use vetocore::generators::{
    all_elections, gen_percentile_cyclic, gen_percentile_unbounded, gen_util_lower_bound,
};
use vetocore::metric::{check_assignment, ratio};
use vetocore::minority::{brute_force_protection_oracle, minority_protection};
use vetocore::veto::{distinct_order_count, enumerate_possible_winners};
use vetocore::veto_core::{
    compute_core_set, core_membership, pq_core_set, CoreCertificate, WeightVectors,
};
use vetocore::{CandidateId, DistortionConfig, Election, Rational, WinnerBudget};

const ORDER_CAP: u128 = 100_000;

fn exhaustive_family() -> Vec<Election> {
    let mut out = Vec::new();
    for m in 2..=3 {
        for n in 1..=4 {
            out.extend(all_elections(n, m));
        }
    }
    out
}

#[test]
fn criterion_01_three_way_equivalence() {
    for e in exhaustive_family() {
        for k in 1..=e.num_candidates() {
            let matched = compute_core_set(&e, k).unwrap();
            let blocked = no_blocking_core(&e, k);
            assert_eq!(
                matched,
                blocked,
                "matching vs blocking disagree, k={k}:\n{}",
                e.to_text()
            );
            if distinct_order_count(e.num_voters(), k).is_some_and(|c| c <= ORDER_CAP)
            {
                let enumerated = enumerate_possible_winners(
                    &e,
                    k,
                    &WinnerBudget::Exhaustive { order_cap: Some(ORDER_CAP) },
                )
                .unwrap();
                assert_eq!(
                    enumerated,
                    matched,
                    "order enumeration disagrees, k={k}:\n{}",
                    e.to_text()
                );
            }
        }
    }
    println!("criterion 01 (three-way equivalence): pass");
}

#[test]
fn criterion_02_winners_protect_minorities() {
    for e in exhaustive_family() {
        let protection: Vec<usize> = e
            .candidates()
            .map(|c| minority_protection(&e, c).unwrap().protection)
            .collect();
        for k in 1..=e.num_candidates() {
            for w in compute_core_set(&e, k).unwrap() {
                assert!(
                    protection[w.0] >= k,
                    "winner {w} at k={k} protects only {}:\n{}",
                    protection[w.0],
                    e.to_text()
                );
                if k == 1 {
                    assert!(
                        protection[w.0] >= 2,
                        "single-veto winner {w} protects only {}:\n{}",
                        protection[w.0],
                        e.to_text()
                    );
                }
            }
        }
    }
    println!("criterion 02 (core winners protect minorities): pass");
}

#[test]
fn criterion_03_protection_oracle_equivalence() {
    for m in 2..=3 {
        for n in 1..=3 {
            for e in all_elections(n, m) {
                for c in e.candidates() {
                    assert_eq!(
                        minority_protection(&e, c).unwrap().protection,
                        brute_force_protection_oracle(&e, c).unwrap(),
                        "protection mismatch for {c}:\n{}",
                        e.to_text()
                    );
                }
            }
        }
    }
    println!("criterion 03 (protection oracle equivalence): pass");
}

#[test]
fn criterion_04_utilitarian_upper_bound() {
    let config = DistortionConfig::default();
    for e in seeded_suite(200, 4000) {
        let m = e.num_candidates();
        let cores: Vec<BTreeSet<CandidateId>> =
            (1..=m).map(|k| compute_core_set(&e, k).unwrap()).collect();
        let union: BTreeSet<CandidateId> = cores.iter().flatten().copied().collect();
        for w in union {
            let result = distortion_utilitarian(&e, w, &config).unwrap();
            let value = result.value.finite().unwrap_or_else(|| {
                panic!("winner {w} unbounded:\n{}", e.to_text())
            });
            for (i, core) in cores.iter().enumerate() {
                let k = i + 1;
                if core.contains(&w) {
                    let bound = ratio(2 * (k + 1).min(m) as i64 - 1, 1);
                    assert!(
                        *value <= bound,
                        "winner {w} at k={k} has distortion {value}:\n{}",
                        e.to_text()
                    );
                }
            }
        }
    }
    println!("criterion 04 (utilitarian upper bound): pass");
}

#[test]
fn criterion_05_utilitarian_tightness() {
    let config = DistortionConfig::default();
    let delta = ratio(1, 1000);
    for (k, m) in [(1usize, 2usize), (1, 3), (2, 3), (2, 4), (3, 4)] {
        let inst = gen_util_lower_bound(k, m, &delta).unwrap();
        let result =
            distortion_utilitarian(&inst.election, CandidateId(0), &config).unwrap();
        let value = result.value.finite().expect("finite on the lower-bound family");
        let bound = ratio(2 * (k + 1).min(m) as i64 - 1, 1)
            / (ratio(1, 1) + ratio(2 * (k + 1) as i64, 1) * &delta);
        assert!(
            *value >= bound,
            "(k={k}, m={m}) reached only {value}, need {bound}"
        );
    }
    let inst = gen_util_lower_bound(1, 2, &Rational::from_integer(0.into())).unwrap();
    let result = distortion_utilitarian(&inst.election, CandidateId(0), &config).unwrap();
    assert_eq!(result.value, DistortionValue::Finite(ratio(3, 1)));
    println!("criterion 05 (utilitarian tightness): pass");
}

#[test]
fn criterion_06_percentile_upper_bound() {
    let config = DistortionConfig::default();
    let five = ratio(5, 1);
    for e in seeded_suite(50, 6000) {
        for k in 1..=e.num_candidates() {
            let alphas = [
                ratio(k as i64, k as i64 + 1),
                ratio(2 * k as i64 + 1, 2 * k as i64 + 2),
                ratio(9, 10),
            ];
            for w in compute_core_set(&e, k).unwrap() {
                for alpha in &alphas {
                    let result = distortion_percentile(&e, w, alpha, &config).unwrap();
                    let value = result.value.finite().unwrap_or_else(|| {
                        panic!(
                            "winner {w} unbounded at k={k}, alpha={alpha}:\n{}",
                            e.to_text()
                        )
                    });
                    assert!(
                        *value <= five,
                        "winner {w} at k={k}, alpha={alpha} has distortion {value}:\n{}",
                        e.to_text()
                    );
                }
            }
        }
    }
    println!("criterion 06 (percentile upper bound): pass");
}

#[test]
fn criterion_07_percentile_unbounded_below_threshold() {
    let config = DistortionConfig::default();
    for (k, alpha) in [(2usize, ratio(1, 2)), (3, ratio(2, 3))] {
        let inst = gen_percentile_unbounded(k, &alpha).unwrap();
        let e = &inst.election;
        let core = compute_core_set(e, k).unwrap();
        let spoiler = CandidateId(e.num_candidates() - 1);
        assert!(!core.contains(&spoiler), "spoiler won at k={k}");
        assert!(!core.is_empty());
        for w in core {
            let result = distortion_percentile(e, w, &alpha, &config).unwrap();
            assert_eq!(
                result.value,
                DistortionValue::Unbounded,
                "winner {w} bounded at k={k}, alpha={alpha}"
            );
        }
    }
    println!("criterion 07 (percentile unbounded below threshold): pass");
}

#[test]
fn criterion_08_percentile_lower_bound_instance() {
    let config = DistortionConfig::default();
    let alpha = ratio(1, 2);
    let inst = gen_percentile_cyclic(&alpha, &ratio(1, 10)).unwrap();
    let witness = inst.witness.as_ref().expect("family carries a witness");
    assert!(check_assignment(&inst.election, witness).unwrap().is_empty());
    let result =
        distortion_percentile(&inst.election, CandidateId(0), &alpha, &config).unwrap();
    let value = result.value.finite().expect("finite on the cyclic family");
    let delta = ratio(1, 150);
    let bound = ratio(5, 1) / (ratio(1, 1) + ratio(2, 1) * delta);
    assert!(*value >= bound, "cyclic instance reached only {value}, need {bound}");
    println!("criterion 08 (percentile lower-bound instance): pass");
}

#[test]
fn criterion_09_egalitarian_upper_bound() {
    let config = DistortionConfig::default();
    let three = ratio(3, 1);
    for e in seeded_suite(200, 9000) {
        let m = e.num_candidates();
        let mut check: BTreeSet<CandidateId> = (1..=m)
            .flat_map(|k| compute_core_set(&e, k).unwrap())
            .collect();
        check.extend(
            e.candidates()
                .filter(|&c| pareto_status(&e, c).unwrap() == ParetoStatus::Efficient),
        );
        for w in check {
            let result = distortion_egalitarian(&e, w, &config).unwrap();
            let value = result.value.finite().unwrap_or_else(|| {
                panic!("candidate {w} unbounded:\n{}", e.to_text())
            });
            assert!(
                *value <= three,
                "candidate {w} has egalitarian distortion {value}:\n{}",
                e.to_text()
            );
        }
    }
    println!("criterion 09 (egalitarian upper bound): pass");
}

#[test]
fn criterion_10_dominators_of_winners_score_zero() {
    for e in exhaustive_family() {
        for k in 1..=e.num_candidates() {
            let scores = e.k_approval_scores(k).unwrap();
            for w in compute_core_set(&e, k).unwrap() {
                for c in e.candidates() {
                    if c == w {
                        continue;
                    }
                    let dominates = e.voters().all(|v| e.prefers(v, c, w));
                    if dominates {
                        assert_eq!(
                            scores[c.0],
                            0,
                            "{c} dominates winner {w} at k={k} yet scores:\n{}",
                            e.to_text()
                        );
                    }
                }
            }
        }
    }
    println!("criterion 10 (dominators of winners score zero): pass");
}

#[test]
fn criterion_11_flow_certificates() {
    for e in seeded_suite(50, 11000) {
        let n = e.num_voters();
        let net = FlowNetwork::new(&e);
        for k in 1..=e.num_candidates() {
            let scores = e.k_approval_scores(k).unwrap();
            for w in compute_core_set(&e, k).unwrap() {
                let matching = match core_membership(&e, k, w).unwrap() {
                    CoreCertificate::Member { matching } => matching,
                    CoreCertificate::Blocked { .. } => {
                        panic!("core member {w} lacks a matching:\n{}", e.to_text())
                    }
                };
                for rival in e.candidates().filter(|&c| c != w) {
                    let f = construct_distortion_flow(&e, k, w, rival, &matching)
                        .unwrap_or_else(|err| {
                            panic!(
                                "k={k} w={w} rival={rival} construction failed ({err}):\n{}",
                                e.to_text()
                            )
                        });
                    let expected = ratio(n as i64, 1)
                        - ratio(k as i64 - 1, k as i64)
                            * ratio(scores[rival.0] as i64, 1);
                    assert_eq!(
                        f.stage1_total,
                        expected,
                        "k={k} w={w} rival={rival} stage-1 total:\n{}",
                        e.to_text()
                    );
                    let report = verify_flow(&net, &f, k).unwrap_or_else(|err| {
                        panic!(
                            "k={k} w={w} rival={rival} verification failed ({err}):\n{}",
                            e.to_text()
                        )
                    });
                    assert!(report.max_cost <= report.bound);
                }
            }
        }
    }
    println!("criterion 11 (flow certificates): pass");
}

#[test]
fn criterion_12_weighted_route_consistency() {
    for e in exhaustive_family() {
        let m = e.num_candidates();
        for k in 1..=m {
            let weights = WeightVectors::k_approval(&e, k).unwrap();
            assert_eq!(
                pq_core_set(&e, &weights).unwrap(),
                compute_core_set(&e, k).unwrap(),
                "weighted route disagrees at k={k}:\n{}",
                e.to_text()
            );
        }
        let full = compute_core_set(&e, m).unwrap();
        assert_eq!(
            pq_core_set(&e, &WeightVectors::proportional(&e)).unwrap(),
            full,
            "proportional weights disagree with the full budget:\n{}",
            e.to_text()
        );
        let under = compute_core_set(&e, m - 1).unwrap();
        assert!(
            under.is_subset(&full),
            "winner set shrank when the budget grew:\n{}",
            e.to_text()
        );
    }
    println!("criterion 12 (weighted route consistency): pass");
}
