//! JSON configuration: one flat document drives every subcommand.
//!
//! ```json
//! {
//!   "beta": 1.0, "rho": 1.0,
//!   "degree_dist": {"3": 1.0},
//!   "n": 1000, "frac_i": 0.1, "seed": 42
//! }
//! ```
//!
//! `degree_dist` also accepts `{"type": "regular", "d": 3}` and
//! `{"type": "poisson", "mean": 2.0, "tail": 1e-10}`; an explicit per-degree
//! `population` may be given instead of a distribution. Counting seeds
//! (`count_i`/`count_r`) replaces fractions in the small-seed regime.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::ensemble::{EnsembleConfig, Seeding, Thresholds};
use crate::error::{Error, Result};
use crate::limit::SolveControls;
use crate::model::{
    asymptotic_profile, limit_profile_from_population, DegreeDist, EpidemicRates, LimitProfile,
    PopulationSpec,
};
use crate::simulate::{RecordMode, RunOpts};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DistJson {
    Typed(TypedDist),
    Explicit(BTreeMap<String, f64>),
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum TypedDist {
    Regular { d: usize },
    Poisson {
        mean: f64,
        #[serde(default = "default_tail")]
        tail: f64,
    },
}

fn default_tail() -> f64 {
    1e-10
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PopulationJson {
    #[serde(default)]
    s: BTreeMap<String, u64>,
    #[serde(default)]
    i: BTreeMap<String, u64>,
    #[serde(default)]
    r: BTreeMap<String, u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdsJson {
    final_median_max: Option<f64>,
    align_median_max: Option<f64>,
    z_max: Option<f64>,
    t_star_min_frac: Option<f64>,
}

/// Raw JSON document; every field beyond the rates is optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    beta: f64,
    rho: f64,
    degree_dist: Option<DistJson>,
    n: Option<usize>,
    frac_i: Option<f64>,
    frac_r: Option<f64>,
    count_i: Option<u64>,
    count_r: Option<u64>,
    population: Option<PopulationJson>,
    seed: Option<u64>,
    s0: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    stop_eps: Option<f64>,
    tol: Option<f64>,
    verify_tol: Option<f64>,
    t_max: Option<f64>,
    max_iter: Option<usize>,
    sizes: Option<Vec<usize>>,
    replicas: Option<usize>,
    grid_points: Option<usize>,
    residual_pairing: Option<bool>,
    post_stop_decay: Option<bool>,
    record_grid_dt: Option<f64>,
    threads: Option<usize>,
    thresholds: Option<ThresholdsJson>,
}

/// Where the finite population comes from.
#[derive(Clone, Debug)]
pub enum PopulationSource {
    Explicit(PopulationSpec),
    Sampled {
        dist: DegreeDist<f64>,
        n: usize,
        seeding: Seeding<f64>,
    },
}

/// A validated configuration with all defaults filled in.
#[derive(Clone, Debug)]
pub struct Config {
    pub rates: EpidemicRates<f64>,
    pub source: PopulationSource,
    pub seed: u64,
    pub s0: Option<f64>,
    pub controls: SolveControls<f64>,
    /// Picard stopping tolerance.
    pub tol: f64,
    /// Residual tolerance for `verify`.
    pub verify_tol: f64,
    pub t_max: f64,
    pub max_iter: usize,
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub grid_points: usize,
    pub residual_pairing: bool,
    pub post_stop_decay: bool,
    pub record_grid_dt: Option<f64>,
    pub threads: Option<usize>,
    pub thresholds: Thresholds<f64>,
}

fn parse_degree_keys<V: Copy>(
    map: &BTreeMap<String, V>,
    what: &str,
) -> Result<BTreeMap<usize, V>> {
    map.iter()
        .map(|(k, &v)| {
            k.parse::<usize>()
                .map(|deg| (deg, v))
                .map_err(|_| Error::Config(format!("{what}: key {k:?} is not a degree")))
        })
        .collect()
}

impl Config {
    fn from_raw(raw: RawConfig) -> Result<Self> {
        if !(raw.beta.is_finite() && raw.beta > 0.0) {
            return Err(Error::Config("beta must be > 0".into()));
        }
        if !(raw.rho.is_finite() && raw.rho >= 0.0) {
            return Err(Error::Config("rho must be >= 0".into()));
        }
        let rates = EpidemicRates::new(raw.beta, raw.rho)?;

        let source = match (raw.population, raw.degree_dist) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "ambiguous population: give either population or degree_dist".into(),
                ))
            }
            (Some(pop), None) => {
                if raw.n.is_some()
                    || raw.frac_i.is_some()
                    || raw.frac_r.is_some()
                    || raw.count_i.is_some()
                    || raw.count_r.is_some()
                {
                    return Err(Error::Config(
                        "ambiguous population: explicit counts exclude n/frac_i/frac_r/count_i/count_r"
                            .into(),
                    ));
                }
                PopulationSource::Explicit(PopulationSpec {
                    counts_s: parse_degree_keys(&pop.s, "population.s")?,
                    counts_i: parse_degree_keys(&pop.i, "population.i")?,
                    counts_r: parse_degree_keys(&pop.r, "population.r")?,
                })
            }
            (None, Some(dist)) => {
                let dist = match dist {
                    DistJson::Typed(TypedDist::Regular { d }) => DegreeDist::Regular { d },
                    DistJson::Typed(TypedDist::Poisson { mean, tail }) => {
                        DegreeDist::Poisson { mean, tail }
                    }
                    DistJson::Explicit(map) => {
                        DegreeDist::Explicit(parse_degree_keys(&map, "degree_dist")?)
                    }
                };
                let n = raw
                    .n
                    .ok_or_else(|| Error::Config("degree_dist requires n".into()))?;
                if n == 0 {
                    return Err(Error::Config("n must be >= 1".into()));
                }
                let seeding = match (raw.frac_i, raw.count_i) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "ambiguous seeding: give frac_i or count_i, not both".into(),
                        ))
                    }
                    (None, Some(count_i)) => Seeding::Counts {
                        count_i,
                        count_r: raw.count_r.unwrap_or(0),
                    },
                    _ => {
                        if raw.count_r.is_some() {
                            return Err(Error::Config(
                                "count_r requires count_i (counted seeding)".into(),
                            ));
                        }
                        Seeding::Fractions {
                            frac_i: raw.frac_i.unwrap_or(0.0),
                            frac_r: raw.frac_r.unwrap_or(0.0),
                        }
                    }
                };
                if let Seeding::Fractions { frac_i, frac_r } = seeding {
                    if !(frac_i >= 0.0 && frac_r >= 0.0 && frac_i + frac_r <= 1.0) {
                        return Err(Error::Config(
                            "frac_i/frac_r must be >= 0 with frac_i + frac_r <= 1".into(),
                        ));
                    }
                }
                PopulationSource::Sampled { dist, n, seeding }
            }
            (None, None) => {
                return Err(Error::Config(
                    "missing population: give population or degree_dist".into(),
                ))
            }
        };

        if let Some(s0) = raw.s0 {
            if !(s0 > 0.0 && s0 < 1.0) {
                return Err(Error::Config("s0 must lie in (0, 1)".into()));
            }
        }

        let defaults = Thresholds::default();
        let tj = raw.thresholds.unwrap_or_default();
        Ok(Config {
            rates,
            source,
            seed: raw.seed.unwrap_or(0),
            s0: raw.s0,
            controls: SolveControls {
                rel_tol: raw.rel_tol.unwrap_or(1e-9),
                abs_tol: raw.abs_tol.unwrap_or(1e-12),
                stop_eps: raw.stop_eps.unwrap_or(1e-8),
                t_cap: 1e6,
            },
            tol: raw.tol.unwrap_or(1e-10),
            verify_tol: raw.verify_tol.unwrap_or(1e-6),
            t_max: raw.t_max.unwrap_or(15.0),
            max_iter: raw.max_iter.unwrap_or(400),
            sizes: raw.sizes.unwrap_or_else(|| vec![1000, 10_000, 100_000]),
            replicas: raw.replicas.unwrap_or(50),
            grid_points: raw.grid_points.unwrap_or(400),
            residual_pairing: raw.residual_pairing.unwrap_or(false),
            post_stop_decay: raw.post_stop_decay.unwrap_or(true),
            record_grid_dt: raw.record_grid_dt,
            threads: raw.threads,
            thresholds: Thresholds {
                final_median_max: tj.final_median_max.unwrap_or(defaults.final_median_max),
                align_median_max: tj.align_median_max.unwrap_or(defaults.align_median_max),
                z_max: tj.z_max.unwrap_or(defaults.z_max),
                t_star_min_frac: tj.t_star_min_frac.unwrap_or(defaults.t_star_min_frac),
            },
        })
    }

    /// The finite population this config describes (sampling when needed).
    pub fn population(&self) -> Result<PopulationSpec> {
        match &self.source {
            PopulationSource::Explicit(spec) => Ok(spec.clone()),
            PopulationSource::Sampled { dist, n, seeding } => match *seeding {
                Seeding::Fractions { frac_i, frac_r } => {
                    crate::model::sample_population(dist, *n, frac_i, frac_r, self.seed)
                }
                Seeding::Counts { count_i, count_r } => {
                    crate::model::sample_population_counts(dist, *n, count_i, count_r, self.seed)
                }
            },
        }
    }

    /// The limit profile: asymptotic for sampled sources, empirical for
    /// explicit populations.
    pub fn limit_profile(&self) -> Result<LimitProfile<f64>> {
        match &self.source {
            PopulationSource::Explicit(spec) => limit_profile_from_population(spec),
            PopulationSource::Sampled { dist, seeding, .. } => {
                let (frac_i, frac_r) = match *seeding {
                    Seeding::Fractions { frac_i, frac_r } => (frac_i, frac_r),
                    Seeding::Counts { .. } => (0.0, 0.0),
                };
                asymptotic_profile(dist, frac_i, frac_r)
            }
        }
    }

    pub fn run_opts(&self) -> RunOpts<f64> {
        RunOpts {
            record: match self.record_grid_dt {
                Some(dt) => RecordMode::Grid { dt },
                None => RecordMode::All,
            },
            residual_pairing: self.residual_pairing,
            post_stop_decay: self.post_stop_decay,
        }
    }

    /// Ensemble configuration; requires a sampled population source.
    pub fn ensemble(&self) -> Result<EnsembleConfig<f64>> {
        let PopulationSource::Sampled { dist, seeding, .. } = &self.source else {
            return Err(Error::Config(
                "converge requires degree_dist sampling, not an explicit population".into(),
            ));
        };
        Ok(EnsembleConfig {
            dist: dist.clone(),
            rates: self.rates,
            seeding: *seeding,
            sizes: self.sizes.clone(),
            replicas: self.replicas,
            seed: self.seed,
            s0: self.s0,
            grid_points: self.grid_points,
            controls: self.controls,
            thresholds: self.thresholds,
            threads: self.threads,
        })
    }
}

/// Parse and validate a configuration document.
pub fn parse_config_str(text: &str) -> Result<Config> {
    let raw: RawConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("schema error: {e}")))?;
    Config::from_raw(raw)
}

/// Parse and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_regular_config_fills_defaults() {
        let cfg = parse_config_str(
            r#"{"beta": 2.0, "rho": 1.0, "degree_dist": {"type": "regular", "d": 3}, "n": 100}"#,
        )
        .unwrap();
        assert_eq!(cfg.controls.rel_tol, 1e-9);
        assert_eq!(cfg.controls.stop_eps, 1e-8);
        assert_eq!(cfg.tol, 1e-10);
        assert_eq!(cfg.seed, 0);
        assert!(cfg.s0.is_none());
        assert_eq!(cfg.sizes, vec![1000, 10_000, 100_000]);
        let pop = cfg.population().unwrap();
        assert_eq!(pop.n(), 100);
    }

    #[test]
    fn explicit_pmf_keys_parse_as_degrees() {
        let cfg = parse_config_str(
            r#"{"beta": 1.0, "rho": 0.0, "degree_dist": {"1": 0.5, "3": 0.5}, "n": 10}"#,
        )
        .unwrap();
        let prof = cfg.limit_profile().unwrap();
        assert_eq!(prof.p[1], 0.5);
        assert_eq!(prof.p[3], 0.5);
    }

    #[test]
    fn beta_zero_is_rejected() {
        let err = parse_config_str(
            r#"{"beta": 0.0, "rho": 1.0, "degree_dist": {"type": "regular", "d": 3}, "n": 10}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("beta must be > 0"), "{err}");
    }

    #[test]
    fn both_population_and_distribution_is_ambiguous() {
        let err = parse_config_str(
            r#"{"beta": 1.0, "rho": 1.0, "degree_dist": {"3": 1.0}, "n": 10,
                "population": {"s": {"3": 9}, "i": {"3": 1}}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("ambiguous population"), "{err}");
    }

    #[test]
    fn unknown_fields_are_schema_errors() {
        let err = parse_config_str(
            r#"{"beta": 1.0, "rho": 1.0, "degree_dist": {"type": "regular", "d": 3}, "n": 10,
                "bogus": 1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("schema error"), "{err}");
    }

    #[test]
    fn explicit_population_round_trips() {
        let cfg = parse_config_str(
            r#"{"beta": 1.0, "rho": 1.0,
                "population": {"s": {"3": 900}, "i": {"3": 100}, "r": {}}}"#,
        )
        .unwrap();
        let pop = cfg.population().unwrap();
        assert_eq!(pop.n_s(), 900);
        assert_eq!(pop.n_i(), 100);
        let prof = cfg.limit_profile().unwrap();
        assert!((prof.alpha_s - 0.9).abs() < 1e-12);
    }

    #[test]
    fn counted_seeding_conflicts_with_fractions() {
        let err = parse_config_str(
            r#"{"beta": 2.0, "rho": 1.0, "degree_dist": {"type": "regular", "d": 3},
                "n": 100, "frac_i": 0.1, "count_i": 1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("ambiguous seeding"), "{err}");
    }
}
