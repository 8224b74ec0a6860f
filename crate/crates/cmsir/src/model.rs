//! Epidemic configuration: rates, finite populations, degree distributions,
//! limit profiles and the basic reproductive ratio.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, POPULATION_STREAM};
use crate::scalar::Real;

/// Tolerance for the exact-by-construction profile identities.
pub const PROFILE_TOL: f64 = 1e-12;

/// Infection rate per free infective half-edge (`beta > 0`) and recovery rate
/// per infective vertex (`rho >= 0`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpidemicRates<R> {
    pub beta: R,
    pub rho: R,
}

impl<R: Real> EpidemicRates<R> {
    pub fn new(beta: R, rho: R) -> Result<Self> {
        if !(beta.is_finite() && beta > R::zero()) {
            return Err(Error::Config("beta must be > 0 and finite".into()));
        }
        if !(rho.is_finite() && rho >= R::zero()) {
            return Err(Error::Config("rho must be >= 0 and finite".into()));
        }
        Ok(Self { beta, rho })
    }

    /// Combined clock rate `beta + rho` of an infective half-edge.
    pub fn combined(&self) -> R {
        self.beta + self.rho
    }
}

/// Per-degree counts of susceptible, infective and recovered vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationSpec {
    #[serde(default)]
    pub counts_s: BTreeMap<usize, u64>,
    #[serde(default)]
    pub counts_i: BTreeMap<usize, u64>,
    #[serde(default)]
    pub counts_r: BTreeMap<usize, u64>,
}

fn map_total(m: &BTreeMap<usize, u64>) -> u64 {
    m.values().sum()
}

fn map_half_edges(m: &BTreeMap<usize, u64>) -> u64 {
    m.iter().map(|(&k, &c)| k as u64 * c).sum()
}

impl PopulationSpec {
    pub fn n_s(&self) -> u64 {
        map_total(&self.counts_s)
    }
    pub fn n_i(&self) -> u64 {
        map_total(&self.counts_i)
    }
    pub fn n_r(&self) -> u64 {
        map_total(&self.counts_r)
    }
    pub fn n(&self) -> u64 {
        self.n_s() + self.n_i() + self.n_r()
    }
    /// Total half-edge count over all compartments.
    pub fn half_edges(&self) -> u64 {
        map_half_edges(&self.counts_s) + map_half_edges(&self.counts_i) + map_half_edges(&self.counts_r)
    }
    pub fn max_infective_degree(&self) -> usize {
        self.counts_i
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&k, _)| k)
            .max()
            .unwrap_or(0)
    }
}

/// Degree law of the susceptible population.
#[derive(Clone, Debug, PartialEq)]
pub enum DegreeDist<R> {
    /// Explicit finite-support pmf `k -> p_k`.
    Explicit(BTreeMap<usize, R>),
    /// Every vertex has degree `d`.
    Regular { d: usize },
    /// Poisson(mean), truncated at the smallest k with tail mass below `tail`.
    Poisson { mean: R, tail: R },
}

/// A resolved, normalised pmf with dense support `0..=k_max`.
#[derive(Clone, Debug)]
pub struct Pmf<R> {
    pub p: Vec<R>,
    /// Upper bound on the dropped tail of `sum_k k(k-1) p_k` when the source
    /// law had infinite support; zero for finite-support laws.
    pub truncation_bound: R,
}

impl<R: Real> Pmf<R> {
    pub fn mean(&self) -> R {
        self.p
            .iter()
            .enumerate()
            .map(|(k, &pk)| R::of_usize(k) * pk)
            .sum()
    }

    pub fn k_max(&self) -> usize {
        self.p.len().saturating_sub(1)
    }
}

impl<R: Real> DegreeDist<R> {
    /// Resolve to a normalised dense pmf.
    pub fn pmf(&self) -> Result<Pmf<R>> {
        match self {
            DegreeDist::Explicit(map) => {
                let k_max = map.keys().copied().max().unwrap_or(0);
                let mut p = vec![R::zero(); k_max + 1];
                for (&k, &pk) in map {
                    if !(pk.is_finite() && pk >= R::zero()) {
                        return Err(Error::NotADistribution(format!(
                            "p_{k} must be finite and >= 0"
                        )));
                    }
                    p[k] = pk;
                }
                let total: R = p.iter().copied().sum();
                if (total - R::one()).abs() > R::of(1e-9) {
                    return Err(Error::NotADistribution(format!(
                        "probabilities sum to {total}, expected 1"
                    )));
                }
                for pk in &mut p {
                    *pk = *pk / total;
                }
                Ok(Pmf {
                    p,
                    truncation_bound: R::zero(),
                })
            }
            DegreeDist::Regular { d } => {
                let mut p = vec![R::zero(); d + 1];
                p[*d] = R::one();
                Ok(Pmf {
                    p,
                    truncation_bound: R::zero(),
                })
            }
            DegreeDist::Poisson { mean, tail } => {
                let mean = mean.to_f64().unwrap_or(f64::NAN);
                let tail = tail.to_f64().unwrap_or(1e-10);
                if !(mean.is_finite() && mean > 0.0) {
                    return Err(Error::NotADistribution("poisson mean must be > 0".into()));
                }
                if !(tail > 0.0 && tail < 1.0) {
                    return Err(Error::NotADistribution("poisson tail must be in (0,1)".into()));
                }
                // p_k by the stable recurrence; stop at the smallest k with
                // tail mass < tail.
                let mut terms = vec![(-mean).exp()];
                let mut cum = terms[0];
                let mut k = 0usize;
                while 1.0 - cum >= tail && k < 10_000 {
                    k += 1;
                    let next = terms[k - 1] * mean / k as f64;
                    terms.push(next);
                    cum += next;
                }
                // weighted tail sum_{j>k} j(j-1) p_j, for the report.
                let mut wtail = 0.0;
                let mut term = terms[k];
                let mut j = k;
                loop {
                    j += 1;
                    term *= mean / j as f64;
                    let w = term * (j as f64) * (j as f64 - 1.0);
                    wtail += w;
                    if w < 1e-18 * (1.0 + wtail) || j > k + 10_000 {
                        break;
                    }
                }
                let p = terms.iter().map(|&t| R::of(t / cum)).collect();
                Ok(Pmf {
                    p,
                    truncation_bound: R::of(wtail),
                })
            }
        }
    }
}

/// Asymptotic population profile: compartment fractions, susceptible degree
/// law, and per-compartment half-edge densities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitProfile<R> {
    pub alpha_s: R,
    pub alpha_i: R,
    pub alpha_r: R,
    /// Susceptible degree pmf, dense on `0..=k_max`.
    pub p: Vec<R>,
    /// Mean susceptible degree.
    pub lambda: R,
    /// Mean degree over all vertices.
    pub mu: R,
    pub mu_s: R,
    pub mu_i: R,
    pub mu_r: R,
    /// Dropped `k(k-1)`-weighted tail mass when the degree law was truncated.
    #[serde(default)]
    pub truncation_bound: R,
}

impl<R: Real> LimitProfile<R> {
    pub fn k_max(&self) -> usize {
        self.p.len().saturating_sub(1)
    }

    /// `sum_k k(k-1) p_k`.
    pub fn degree_second_factorial_moment(&self) -> R {
        self.p
            .iter()
            .enumerate()
            .map(|(k, &pk)| {
                let kf = R::of_usize(k);
                kf * (kf - R::one()) * pk
            })
            .sum()
    }

    /// Invariant violations of the profile itself, plus the analogue of the
    /// interior-root condition when `rates` is supplied: at least one of
    /// `p_1 > 0`, `rho > 0`, `mu_r > 0` must hold.
    pub fn check(&self, rates: Option<&EpidemicRates<R>>) -> Vec<String> {
        let tol = R::of(PROFILE_TOL).max(R::epsilon() * R::of(32.0));
        let mut out = Vec::new();
        if (self.alpha_s + self.alpha_i + self.alpha_r - R::one()).abs() > tol {
            out.push("(D1) alpha_s + alpha_i + alpha_r != 1".into());
        }
        if !(self.alpha_s > R::zero()) {
            out.push("(D1) alpha_s must be > 0".into());
        }
        let psum: R = self.p.iter().copied().sum();
        if (psum - R::one()).abs() > tol {
            out.push("(D2) degree probabilities do not sum to 1".into());
        }
        if !(self.lambda > R::zero() && self.lambda.is_finite()) {
            out.push("(D2) mean susceptible degree must be finite and positive".into());
        }
        if (self.mu_s + self.mu_i + self.mu_r - self.mu).abs() > tol * (R::one() + self.mu) {
            out.push("(D4) mu_s + mu_i + mu_r != mu".into());
        }
        if (self.mu_s - self.alpha_s * self.lambda).abs() > tol * (R::one() + self.mu) {
            out.push("(D4) mu_s != alpha_s * lambda".into());
        }
        if let Some(rates) = rates {
            let p1 = self.p.get(1).copied().unwrap_or_else(R::zero);
            if !(p1 > R::zero() || rates.rho > R::zero() || self.mu_r > R::zero()) {
                out.push("(D7) requires p_1 > 0 or rho > 0 or mu_r > 0".into());
            }
        }
        out
    }
}

/// Diagnostics for a finite population against the model assumptions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub message: String,
}

impl ValidationReport {
    fn push(&mut self, condition: &str, message: String) {
        self.violations.push(Violation {
            condition: condition.into(),
            message,
        });
        self.ok = false;
    }

    /// Violations that make the finite-n process itself ill-defined
    /// (as opposed to blocking only the limit solvers).
    pub fn blocks_simulation(&self) -> bool {
        self.violations
            .iter()
            .any(|v| v.condition == "parity" || v.condition == "empty")
    }
}

/// Thresholds for the warning-level proxy checks.
#[derive(Clone, Copy, Debug)]
pub struct ValidationOptions {
    /// Warn when `sum_k k^2 n_k / n` exceeds this (second-moment proxy).
    pub second_moment_threshold: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            second_moment_threshold: 1e3,
        }
    }
}

/// Inspect a finite population. Diagnostics only; never errors.
pub fn validate_population<R: Real>(
    spec: &PopulationSpec,
    rates: &EpidemicRates<R>,
    opts: &ValidationOptions,
) -> ValidationReport {
    let mut report = ValidationReport {
        ok: true,
        violations: Vec::new(),
        warnings: Vec::new(),
    };
    let n = spec.n();
    if n == 0 {
        report.push("empty", "population has no vertices".into());
        return report;
    }
    if !spec.half_edges().is_multiple_of(2) {
        report.push(
            "parity",
            format!("half-edge parity: total degree {} is odd", spec.half_edges()),
        );
    }
    let n_s = spec.n_s();
    if n_s == 0 {
        report.push("(D1)", "no susceptibles (alpha_s = 0)".into());
    } else if map_half_edges(&spec.counts_s) == 0 {
        report.push("(D2)", "susceptible mean degree is zero".into());
    }
    // Interior-root condition: p_1 > 0 or rho > 0 or recovered half-edges.
    let p1_pos = spec.counts_s.get(&1).copied().unwrap_or(0) > 0;
    let mu_r_pos = map_half_edges(&spec.counts_r) > 0;
    if !(p1_pos || rates.rho > R::zero() || mu_r_pos) {
        report.push(
            "(D7)",
            "requires p_1 > 0 or rho > 0 or recovered half-edges".into(),
        );
    }
    // Second-moment proxy.
    let second_moment: f64 = [&spec.counts_s, &spec.counts_i, &spec.counts_r]
        .iter()
        .flat_map(|m| m.iter())
        .map(|(&k, &c)| (k * k) as f64 * c as f64)
        .sum::<f64>()
        / n as f64;
    if second_moment > opts.second_moment_threshold {
        report.warnings.push(format!(
            "(G1) second-moment proxy sum k^2 n_k / n = {second_moment:.3} exceeds {}",
            opts.second_moment_threshold
        ));
    }
    // Max infective degree proxy.
    let max_i = spec.max_infective_degree();
    if max_i > 0 && (max_i as f64) > (n as f64).powf(2.0 / 3.0) {
        report.warnings.push(format!(
            "(D5) max infective degree {max_i} exceeds n^(2/3) = {:.1}",
            (n as f64).powf(2.0 / 3.0)
        ));
    }
    report
}

/// Empirical limit profile of a finite population.
pub fn limit_profile_from_population<R: Real>(spec: &PopulationSpec) -> Result<LimitProfile<R>> {
    let n = spec.n();
    let n_s = spec.n_s();
    if n == 0 || n_s == 0 {
        return Err(Error::NoSusceptibles);
    }
    let nf = R::of_u64(n);
    let nsf = R::of_u64(n_s);
    let k_max = spec
        .counts_s
        .keys()
        .chain(spec.counts_i.keys())
        .chain(spec.counts_r.keys())
        .copied()
        .max()
        .unwrap_or(0);
    let mut p = vec![R::zero(); k_max + 1];
    for (&k, &c) in &spec.counts_s {
        p[k] = R::of_u64(c) / nsf;
    }
    let lambda: R = p
        .iter()
        .enumerate()
        .map(|(k, &pk)| R::of_usize(k) * pk)
        .sum();
    let he = |m: &BTreeMap<usize, u64>| R::of_u64(map_half_edges(m)) / nf;
    let mu_s = he(&spec.counts_s);
    let mu_i = he(&spec.counts_i);
    let mu_r = he(&spec.counts_r);
    Ok(LimitProfile {
        alpha_s: nsf / nf,
        alpha_i: R::of_u64(spec.n_i()) / nf,
        alpha_r: R::of_u64(spec.n_r()) / nf,
        p,
        lambda,
        mu: mu_s + mu_i + mu_r,
        mu_s,
        mu_i,
        mu_r,
        truncation_bound: R::zero(),
    })
}

/// Asymptotic profile induced by seeding a `dist`-distributed population with
/// vertex fractions `frac_i` infective and `frac_r` recovered, independently
/// of degree. A fixed number of seeds (rather than a fraction) corresponds to
/// `frac_i = 0` here.
pub fn asymptotic_profile<R: Real>(
    dist: &DegreeDist<R>,
    frac_i: R,
    frac_r: R,
) -> Result<LimitProfile<R>> {
    if frac_i < R::zero() || frac_r < R::zero() || frac_i + frac_r > R::one() {
        return Err(Error::Config(
            "frac_i and frac_r must be >= 0 with frac_i + frac_r <= 1".into(),
        ));
    }
    let pmf = dist.pmf()?;
    let lambda = pmf.mean();
    let alpha_s = R::one() - frac_i - frac_r;
    if !(alpha_s > R::zero()) {
        return Err(Error::InvalidProfile("alpha_s must be > 0".into()));
    }
    Ok(LimitProfile {
        alpha_s,
        alpha_i: frac_i,
        alpha_r: frac_r,
        p: pmf.p,
        lambda,
        mu: lambda,
        mu_s: alpha_s * lambda,
        mu_i: frac_i * lambda,
        mu_r: frac_r * lambda,
        truncation_bound: pmf.truncation_bound,
    })
}

/// Draw a finite population: `n` i.i.d. degrees from `dist`, a parity fix when
/// the total degree is odd (one extra half-edge on a uniform vertex), and a
/// uniformly chosen set of `count_i` infective plus `count_r` recovered
/// vertices. Deterministic given `seed`.
pub fn sample_population_counts<R: Real>(
    dist: &DegreeDist<R>,
    n: usize,
    count_i: u64,
    count_r: u64,
    seed: u64,
) -> Result<PopulationSpec> {
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    if count_i + count_r > n as u64 {
        return Err(Error::Config("count_i + count_r exceeds n".into()));
    }
    let pmf = dist.pmf()?;
    let cdf: Vec<f64> = pmf
        .p
        .iter()
        .scan(0.0f64, |acc, &pk| {
            *acc += pk.to_f64().unwrap_or(0.0);
            Some(*acc)
        })
        .collect();
    let mut rng = stream_rng(seed, POPULATION_STREAM);
    let mut degrees: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            cdf.partition_point(|&c| c <= u).min(pmf.p.len() - 1)
        })
        .collect();
    let total: u64 = degrees.iter().map(|&d| d as u64).sum();
    if !total.is_multiple_of(2) {
        let lucky = rng.random_range(0..n);
        degrees[lucky] += 1;
    }
    // Partial Fisher-Yates to pick the seeded vertices uniformly.
    let mut idx: Vec<usize> = (0..n).collect();
    let picks = (count_i + count_r) as usize;
    for j in 0..picks.min(n.saturating_sub(1)) {
        let swap_with = rng.random_range(j..n);
        idx.swap(j, swap_with);
    }
    let mut spec = PopulationSpec::default();
    for (pos, &v) in idx.iter().enumerate() {
        let bucket = if pos < count_i as usize {
            &mut spec.counts_i
        } else if pos < picks {
            &mut spec.counts_r
        } else {
            &mut spec.counts_s
        };
        *bucket.entry(degrees[v]).or_insert(0) += 1;
    }
    Ok(spec)
}

/// Fraction-based wrapper: `round(n * frac)` seeds of each kind.
pub fn sample_population<R: Real>(
    dist: &DegreeDist<R>,
    n: usize,
    frac_i: R,
    frac_r: R,
    seed: u64,
) -> Result<PopulationSpec> {
    let frac_i = frac_i.to_f64().unwrap_or(f64::NAN);
    let frac_r = frac_r.to_f64().unwrap_or(f64::NAN);
    if !(frac_i >= 0.0 && frac_r >= 0.0 && frac_i + frac_r <= 1.0) {
        return Err(Error::Config(
            "frac_i and frac_r must be >= 0 with frac_i + frac_r <= 1".into(),
        ));
    }
    let count_i = (n as f64 * frac_i).round() as u64;
    let count_r = (n as f64 * frac_r).round() as u64;
    sample_population_counts(dist, n, count_i, count_r, seed)
}

/// Basic reproductive ratio
/// `R0 = beta/(rho+beta) * alpha_s/mu * sum_k (k-1) k p_k`.
pub fn basic_reproductive_ratio<R: Real>(
    profile: &LimitProfile<R>,
    rates: &EpidemicRates<R>,
) -> Result<R> {
    if !(profile.mu > R::zero()) {
        return Err(Error::DegenerateProfile);
    }
    Ok(rates.beta / (rates.rho + rates.beta) * (profile.alpha_s / profile.mu)
        * profile.degree_second_factorial_moment())
}
