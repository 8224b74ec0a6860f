//! Cross-module checks: the stochastic simulator against the deterministic
//! limit, and the pairing engine against brute-force matching enumeration.

use std::collections::BTreeMap;

use cmsir::ensemble::final_size_report;
use cmsir::limit::final_size;
use cmsir::model::{
    limit_profile_from_population, sample_population_counts, DegreeDist, EpidemicRates,
    PopulationSpec,
};
use cmsir::simulate::{detect_t_star, run_epidemic, RunOpts};

fn rates(beta: f64, rho: f64) -> EpidemicRates<f64> {
    EpidemicRates::new(beta, rho).unwrap()
}

fn spec(s: &[(usize, u64)], i: &[(usize, u64)], r: &[(usize, u64)]) -> PopulationSpec {
    PopulationSpec {
        counts_s: s.iter().copied().collect(),
        counts_i: i.iter().copied().collect(),
        counts_r: r.iter().copied().collect(),
    }
}

#[test]
fn mean_final_size_matches_the_limit_engine() {
    // 900 susceptible + 100 infective degree-3 vertices, beta = rho = 1:
    // mean S_inf/n over 200 replicas within 3 standard errors of v_s(theta_inf).
    let sp = spec(&[(3, 900)], &[(3, 100)], &[]);
    let r = rates(1.0, 1.0);
    let outcomes: Vec<_> = (0..200)
        .map(|seed| run_epidemic(&sp, &r, seed, &RunOpts::default()).unwrap())
        .collect();
    let profile = limit_profile_from_population(&sp).unwrap();
    let report = final_size_report(&outcomes, &profile, &r).unwrap();
    let expected = final_size(&profile, &r).unwrap();
    assert!((report.limit - expected).abs() < 1e-15);
    assert!(
        report.z.abs() <= 3.0,
        "final size mean {} vs limit {} (z = {})",
        report.mean,
        report.limit,
        report.z
    );
}

/// All perfect matchings of labelled half-edges, as canonical edge multisets.
fn enumerate_matchings(owners: &[u32]) -> BTreeMap<Vec<(u32, u32)>, usize> {
    fn rec(
        free: Vec<u32>,
        owners: &[u32],
        edges: &mut Vec<(u32, u32)>,
        out: &mut BTreeMap<Vec<(u32, u32)>, usize>,
    ) {
        if free.is_empty() {
            let mut key = edges.clone();
            key.sort_unstable();
            *out.entry(key).or_insert(0) += 1;
            return;
        }
        let a = free[0];
        for j in 1..free.len() {
            let b = free[j];
            let rest: Vec<u32> = free
                .iter()
                .copied()
                .filter(|&h| h != a && h != b)
                .collect();
            let (u, v) = (owners[a as usize], owners[b as usize]);
            edges.push((u.min(v), u.max(v)));
            rec(rest, owners, edges, out);
            edges.pop();
        }
    }
    let mut out = BTreeMap::new();
    rec((0..owners.len() as u32).collect(), owners, &mut Vec::new(), &mut out);
    out
}

fn canonical(edges: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let mut v: Vec<(u32, u32)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    v.sort_unstable();
    v
}

#[test]
fn residual_pairing_is_a_uniform_matching() {
    // Degrees (1, 1, 2) with inert dynamics: owners of the 4 half-edges are
    // (v0, v1, v2, v2). The enumeration oracle gives each of the 3 matchings
    // probability 1/3; two of them reveal the same multigraph.
    let owners = [0u32, 1, 2, 2];
    let oracle = enumerate_matchings(&owners);
    let total: usize = oracle.values().sum();
    assert_eq!(total, 3);

    let sp = spec(&[(1, 2), (2, 1)], &[], &[]);
    let opts = RunOpts {
        residual_pairing: true,
        ..RunOpts::default()
    };
    let runs = 20_000u64;
    let mut observed: BTreeMap<Vec<(u32, u32)>, usize> = BTreeMap::new();
    for seed in 0..runs {
        let out = run_epidemic(&sp, &rates(1.0, 0.0), seed, &opts).unwrap();
        *observed
            .entry(canonical(out.residual_edges.as_ref().unwrap()))
            .or_insert(0) += 1;
    }
    // Vertex ids in the simulator follow the BTreeMap construction order:
    // degree-1 susceptibles first (v0, v1), then the degree-2 vertex (v2),
    // matching the oracle's labelling.
    for (outcome, &count) in &oracle {
        let p = count as f64 / total as f64;
        let expect = runs as f64 * p;
        let sigma = (runs as f64 * p * (1.0 - p)).sqrt();
        let got = *observed.get(outcome).unwrap_or(&0) as f64;
        assert!(
            (got - expect).abs() <= 3.0 * sigma,
            "outcome {outcome:?}: observed {got}, expected {expect} +- {sigma}"
        );
    }
    assert_eq!(observed.len(), oracle.len());
}

#[test]
fn small_seed_outbreaks_happen_with_positive_frequency() {
    // One degree-3 infective in an otherwise susceptible regular-3 graph,
    // beta = 2, rho = 1: the fraction of replicas reaching s0 = 0.9 stays
    // bounded away from zero as n grows.
    let dist: DegreeDist<f64> = DegreeDist::Regular { d: 3 };
    let r = rates(2.0, 1.0);
    for (n, replicas) in [(500usize, 60u64), (5000, 60)] {
        let sp = sample_population_counts(&dist, n, 1, 0, 7).unwrap();
        let mut outbreaks = 0usize;
        for seed in 0..replicas {
            let out = run_epidemic(&sp, &r, seed, &RunOpts::default()).unwrap();
            if detect_t_star(&out.trajectory, 0.9).unwrap().is_some() {
                outbreaks += 1;
            }
        }
        let frac = outbreaks as f64 / replicas as f64;
        assert!(
            frac >= 0.2,
            "outbreak fraction {frac} at n = {n} is below the harness threshold"
        );
    }
}
