//! Seeded Monte Carlo ensembles of the simulator compared against the
//! deterministic limit curves: per-replica sup-norm deviations of all seven
//! scaled counters, final-size concentration, and the shifted-mode alignment
//! at the empirical threshold-crossing time.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit::{
    solve_theta, solve_v_paths, LimitFunctions, Mode, SolveControls, ThetaCurve, ThetaPath, VPaths,
};
use crate::model::{
    asymptotic_profile, basic_reproductive_ratio, sample_population_counts, DegreeDist,
    EpidemicRates, LimitProfile, PopulationSpec,
};
use crate::rng::{replica_stream, stream_rng};
use crate::scalar::Real;
use crate::simulate::{
    detect_t_star, run_epidemic_with_rng, RecordMode, RunOpts, SimOutcome, Trajectory,
};

pub const QUANTITIES: [&str; 7] = ["S", "I", "R", "X_S", "X_I", "X_R", "X"];

/// How initial infectives/recovereds are assigned when sampling populations.
#[derive(Clone, Copy, Debug)]
pub enum Seeding<R> {
    /// `round(n * frac)` vertices of each kind.
    Fractions { frac_i: R, frac_r: R },
    /// A fixed number of vertices, independent of `n` (the small-seed regime).
    Counts { count_i: u64, count_r: u64 },
}

/// Pass/fail thresholds for the trend and concentration checks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Thresholds<R> {
    /// Largest allowed median sup-deviation at the largest size (major mode).
    pub final_median_max: R,
    /// Largest allowed aligned S/n median at the largest size (shifted mode).
    pub align_median_max: R,
    /// Final-size concentration: |mean - limit| <= z_max standard errors.
    pub z_max: R,
    /// Smallest allowed empirical outbreak fraction per size (shifted mode).
    pub t_star_min_frac: R,
}

impl<R: Real> Default for Thresholds<R> {
    fn default() -> Self {
        Self {
            final_median_max: R::of(0.02),
            align_median_max: R::of(0.03),
            z_max: R::of(4.0),
            t_star_min_frac: R::of(0.2),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnsembleConfig<R: Real> {
    pub dist: DegreeDist<R>,
    pub rates: EpidemicRates<R>,
    pub seeding: Seeding<R>,
    /// Strictly increasing population sizes.
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    /// Susceptible-fraction threshold pinning t = 0 in shifted mode.
    pub s0: Option<R>,
    /// Comparison grid resolution.
    pub grid_points: usize,
    pub controls: SolveControls<R>,
    pub thresholds: Thresholds<R>,
    /// Cap on worker threads (`None`: rayon default).
    pub threads: Option<usize>,
}

impl<R: Real> EnsembleConfig<R> {
    pub fn new(dist: DegreeDist<R>, rates: EpidemicRates<R>, seeding: Seeding<R>) -> Self {
        Self {
            dist,
            rates,
            seeding,
            sizes: vec![1000],
            replicas: 10,
            seed: 0,
            s0: None,
            grid_points: 400,
            controls: SolveControls::default(),
            thresholds: Thresholds::default(),
            threads: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.replicas == 0 {
            return Err(Error::Config("sizes and replicas must be non-empty".into()));
        }
        if !self.sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("sizes must be strictly increasing".into()));
        }
        Ok(())
    }

    fn asymptotic_profile(&self) -> Result<LimitProfile<R>> {
        let (frac_i, frac_r) = match self.seeding {
            Seeding::Fractions { frac_i, frac_r } => (frac_i, frac_r),
            Seeding::Counts { .. } => (R::zero(), R::zero()),
        };
        asymptotic_profile(&self.dist, frac_i, frac_r)
    }

    fn population(&self, n: usize) -> Result<PopulationSpec> {
        let (count_i, count_r) = match self.seeding {
            Seeding::Fractions { frac_i, frac_r } => (
                (R::of_usize(n) * frac_i)
                    .round()
                    .to_f64()
                    .unwrap_or(0.0) as u64,
                (R::of_usize(n) * frac_r)
                    .round()
                    .to_f64()
                    .unwrap_or(0.0) as u64,
            ),
            Seeding::Counts { count_i, count_r } => (count_i, count_r),
        };
        sample_population_counts(&self.dist, n, count_i, count_r, self.seed)
    }

    fn has_seeds(&self) -> bool {
        match self.seeding {
            Seeding::Fractions { frac_i, .. } => frac_i > R::zero(),
            Seeding::Counts { count_i, .. } => count_i > 0,
        }
    }
}

/// Solved limit curves bundled for comparisons.
pub struct LimitCurves<R: Real> {
    pub path: ThetaPath<R>,
    pub v: VPaths<R>,
    pub lf: LimitFunctions<R>,
}

impl<R: Real> LimitCurves<R> {
    pub fn solve(
        profile: &LimitProfile<R>,
        rates: &EpidemicRates<R>,
        mode: Mode,
        s0: Option<R>,
        controls: &SolveControls<R>,
    ) -> Result<Self> {
        let path = solve_theta(profile, rates, mode, s0, controls)?;
        let v = solve_v_paths(&path, profile, rates, controls)?;
        let lf = LimitFunctions::new(profile, rates)?;
        Ok(Self { path, v, lf })
    }

    /// The seven limit values (v_s, v_i, v_r, h_s, h_i, h_r, h_x) at `t`.
    fn values(&self, t: R) -> [R; 7] {
        let theta = self.path.theta(t);
        let v_s = self.v.v_s_at(t, &self.path, &self.lf);
        let v_i = self.v.v_i_at(t);
        [
            v_s,
            v_i,
            R::one() - v_s - v_i,
            self.lf.h_s(theta),
            self.lf.h_i(theta),
            self.lf.h_r(theta),
            self.lf.h_x(theta),
        ]
    }
}

fn scaled_counts<R: Real>(c: &crate::simulate::Counts, n: R) -> [R; 7] {
    [
        R::of_u64(c.s) / n,
        R::of_u64(c.i) / n,
        R::of_u64(c.r) / n,
        R::of_u64(c.x_s) / n,
        R::of_u64(c.x_i) / n,
        R::of_u64(c.x_r) / n,
        R::of_u64(c.x) / n,
    ]
}

/// Sup-norm deviation of the scaled trajectory from the limit curves over the
/// union of `grid` and the trajectory's own event times (both sides of each
/// jump). `align_s0`: compare on the shifted time axis anchored at the
/// empirical first crossing of susceptible fraction `align_s0`.
pub fn sup_deviation<R: Real>(
    traj: &Trajectory<R>,
    curves: &LimitCurves<R>,
    grid: &[R],
    align_s0: Option<R>,
) -> Result<[R; 7]> {
    let offset = match align_s0 {
        None => R::zero(),
        Some(s0) => detect_t_star(traj, s0)?.ok_or(Error::NoAlignmentPoint)?,
    };
    let n = R::of_u64(traj.n);
    let (t_lo, t_hi) = match (grid.first(), grid.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::Config("empty comparison grid".into())),
    };
    let mut sup = [R::zero(); 7];
    let mut record = |t_limit: R, counts: &crate::simulate::Counts| {
        let scaled = scaled_counts(counts, n);
        let limits = curves.values(t_limit);
        for (s, (a, b)) in sup.iter_mut().zip(scaled.iter().zip(limits.iter())) {
            *s = s.max((*a - *b).abs());
        }
    };
    for &t in grid {
        record(t, traj.at(t + offset));
    }
    for (j, &t_abs) in traj.times.iter().enumerate() {
        let t = t_abs - offset;
        if t < t_lo || t > t_hi {
            continue;
        }
        record(t, &traj.counts[j]);
        if j > 0 {
            record(t, &traj.counts[j - 1]);
        }
    }
    Ok(sup)
}

/// Mean, standard error and z-score of final sizes against the limit.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FinalSizeReport<R> {
    pub mean: R,
    pub stderr: R,
    pub limit: R,
    pub z: R,
}

pub fn final_size_stats<R: Real>(fracs: &[R], limit: R) -> Result<FinalSizeReport<R>> {
    if fracs.len() < 2 {
        return Err(Error::Config("need at least 2 outcomes".into()));
    }
    let m = R::of_usize(fracs.len());
    // Identical samples (e.g. nothing ever happens) get an exact zero spread.
    let (mean, stderr) = if fracs.windows(2).all(|w| w[0] == w[1]) {
        (fracs[0], R::zero())
    } else {
        let mean = fracs.iter().copied().sum::<R>() / m;
        let var = fracs
            .iter()
            .map(|&x| (x - mean) * (x - mean))
            .sum::<R>()
            / (m - R::one());
        (mean, (var / m).sqrt())
    };
    let z = if stderr > R::zero() {
        (mean - limit) / stderr
    } else if (mean - limit).abs() <= R::epsilon() * (R::one() + limit) {
        R::zero()
    } else {
        R::infinity() * (mean - limit).signum()
    };
    Ok(FinalSizeReport {
        mean,
        stderr,
        limit,
        z,
    })
}

/// Final-size concentration report from full outcomes.
pub fn final_size_report<R: Real>(
    outcomes: &[SimOutcome<R>],
    profile: &LimitProfile<R>,
    rates: &EpidemicRates<R>,
) -> Result<FinalSizeReport<R>> {
    let limit = crate::limit::final_size(profile, rates)?;
    let fracs: Vec<R> = outcomes
        .iter()
        .map(|o| R::of_u64(o.trajectory.s_inf) / R::of_u64(o.trajectory.n))
        .collect();
    final_size_stats(&fracs, limit)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuantityStats<R> {
    pub quantity: &'static str,
    pub mean: R,
    pub median: R,
    pub max: R,
}

#[derive(Clone, Debug, Serialize)]
pub struct SizeStats<R> {
    pub n: usize,
    pub replicas: usize,
    /// Replicas entering the deviation statistics (all of them in major mode;
    /// only outbreak replicas in shifted mode).
    pub included: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star_fraction: Option<R>,
    pub sup_deviation: Vec<QuantityStats<R>>,
    pub final_size: FinalSizeReport<R>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Per-replica measurements, for the CSV artifact.
#[derive(Clone, Debug)]
pub struct ReplicaRow<R> {
    pub n: usize,
    pub replica: usize,
    pub sup: Option<[R; 7]>,
    pub s_inf_frac: R,
    pub t_star: Option<R>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleReport<R: Real> {
    pub mode: Mode,
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub theta_inf: R,
    pub limit_final_size: R,
    pub r0: R,
    pub per_size: Vec<SizeStats<R>>,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
    #[serde(skip)]
    pub replica_rows: Vec<ReplicaRow<R>>,
}

fn median<R: Real>(xs: &[R]) -> R {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m == 0 {
        R::nan()
    } else if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]).half()
    }
}

struct ReplicaOutcome<R> {
    sup: Option<[R; 7]>,
    s_inf_frac: R,
    t_star: Option<R>,
}

/// Run the full ensemble described by `cfg`. Deterministic given `cfg`.
pub fn run_ensemble<R: Real>(cfg: &EnsembleConfig<R>) -> Result<EnsembleReport<R>> {
    cfg.validate()?;
    if !cfg.has_seeds() {
        return Err(Error::DegenerateConfig(
            "no initial infectives: every trajectory is empty".into(),
        ));
    }
    let profile = cfg.asymptotic_profile()?;
    let mode = if profile.mu_i > R::zero() {
        Mode::Major
    } else {
        Mode::Shifted
    };
    if mode == Mode::Shifted && cfg.s0.is_none() {
        return Err(Error::Config(
            "shifted-mode ensembles (mu_i = 0) require s0".into(),
        ));
    }
    let curves = LimitCurves::solve(&profile, &cfg.rates, mode, cfg.s0, &cfg.controls)?;
    let limit_final_size = curves.lf.v_s(curves.path.theta_inf);
    let r0 = basic_reproductive_ratio(&profile, &cfg.rates)?;

    // Comparison span: clip the flat tails where theta is within 1e-4 of its
    // limits; the grid plus event times give the sup norm.
    let t_hi = curves.path.time_to_level(curves.path.theta_inf + R::of(1e-4));
    let t_lo = match mode {
        Mode::Major => R::zero(),
        Mode::Shifted => curves.path.time_to_level(R::one() - R::of(1e-4)),
    };
    let grid: Vec<R> = (0..=cfg.grid_points)
        .map(|j| t_lo + (t_hi - t_lo) * R::of_usize(j) / R::of_usize(cfg.grid_points))
        .collect();

    let run_size = |size_idx: usize, n: usize| -> Result<Vec<ReplicaOutcome<R>>> {
        let spec = cfg.population(n)?;
        let align_s0 = match mode {
            Mode::Major => None,
            Mode::Shifted => cfg.s0,
        };
        (0..cfg.replicas)
            .into_par_iter()
            .map(|rep| {
                let stream = replica_stream(size_idx, rep);
                let mut rng = stream_rng(cfg.seed, stream);
                let opts = RunOpts {
                    record: if n <= 100_000 {
                        RecordMode::All
                    } else {
                        RecordMode::Grid {
                            dt: (t_hi - t_lo) / R::of_usize(4 * cfg.grid_points),
                        }
                    },
                    residual_pairing: false,
                    post_stop_decay: true,
                };
                let out = run_epidemic_with_rng(&spec, &cfg.rates, &mut rng, stream, &opts)?;
                let traj = &out.trajectory;
                let s_inf_frac = R::of_u64(traj.s_inf) / R::of_u64(traj.n);
                match align_s0 {
                    None => {
                        let sup = sup_deviation(traj, &curves, &grid, None)?;
                        Ok(ReplicaOutcome {
                            sup: Some(sup),
                            s_inf_frac,
                            t_star: None,
                        })
                    }
                    Some(s0) => match detect_t_star(traj, s0)? {
                        None => Ok(ReplicaOutcome {
                            sup: None,
                            s_inf_frac,
                            t_star: None,
                        }),
                        Some(t_star) => {
                            let sup = sup_deviation(traj, &curves, &grid, Some(s0))?;
                            Ok(ReplicaOutcome {
                                sup: Some(sup),
                                s_inf_frac,
                                t_star: Some(t_star),
                            })
                        }
                    },
                }
            })
            .collect()
    };

    let run_all = || -> Result<Vec<Vec<ReplicaOutcome<R>>>> {
        cfg.sizes
            .iter()
            .enumerate()
            .map(|(size_idx, &n)| run_size(size_idx, n))
            .collect()
    };
    let all = match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run_all),
        None => run_all(),
    }?;

    let mut per_size = Vec::with_capacity(cfg.sizes.len());
    let mut replica_rows = Vec::new();
    for (size_idx, outcomes) in all.iter().enumerate() {
        let n = cfg.sizes[size_idx];
        for (rep, o) in outcomes.iter().enumerate() {
            replica_rows.push(ReplicaRow {
                n,
                replica: rep,
                sup: o.sup,
                s_inf_frac: o.s_inf_frac,
                t_star: o.t_star,
            });
        }
        let included: Vec<&ReplicaOutcome<R>> =
            outcomes.iter().filter(|o| o.sup.is_some()).collect();
        if mode == Mode::Shifted && included.is_empty() {
            return Err(Error::NoOutbreaksObserved);
        }
        let sup_stats: Vec<QuantityStats<R>> = (0..7)
            .map(|q| {
                let vals: Vec<R> = included.iter().map(|o| o.sup.unwrap()[q]).collect();
                QuantityStats {
                    quantity: QUANTITIES[q],
                    mean: vals.iter().copied().sum::<R>() / R::of_usize(vals.len().max(1)),
                    median: median(&vals),
                    max: vals.iter().copied().fold(R::zero(), R::max),
                }
            })
            .collect();
        let fracs: Vec<R> = included.iter().map(|o| o.s_inf_frac).collect();
        let final_size = final_size_stats(&fracs, limit_final_size)?;
        let t_star_fraction = (mode == Mode::Shifted).then(|| {
            R::of_usize(outcomes.iter().filter(|o| o.t_star.is_some()).count())
                / R::of_usize(outcomes.len())
        });
        per_size.push(SizeStats {
            n,
            replicas: outcomes.len(),
            included: included.len(),
            t_star_fraction,
            sup_deviation: sup_stats,
            final_size,
        });
    }

    let mut checks = Vec::new();
    match mode {
        Mode::Major => {
            #[allow(clippy::needless_range_loop)]
            for q in 0..7 {
                let medians: Vec<R> = per_size
                    .iter()
                    .map(|s| s.sup_deviation[q].median)
                    .collect();
                if medians.len() >= 2 {
                    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
                    checks.push(CheckResult {
                        name: format!("median_sup_decreasing:{}", QUANTITIES[q]),
                        pass: decreasing,
                        detail: format!("{medians:?}"),
                    });
                }
                let last = *medians.last().unwrap();
                checks.push(CheckResult {
                    name: format!("median_sup_final:{}", QUANTITIES[q]),
                    pass: last <= cfg.thresholds.final_median_max,
                    detail: format!("{last} <= {}", cfg.thresholds.final_median_max),
                });
            }
        }
        Mode::Shifted => {
            for s in &per_size {
                let frac = s.t_star_fraction.unwrap_or_else(R::zero);
                checks.push(CheckResult {
                    name: format!("t_star_fraction:n={}", s.n),
                    pass: frac >= cfg.thresholds.t_star_min_frac,
                    detail: format!("{frac} >= {}", cfg.thresholds.t_star_min_frac),
                });
            }
            let last = per_size.last().unwrap();
            let s_median = last.sup_deviation[0].median;
            checks.push(CheckResult {
                name: "aligned_s_median".into(),
                pass: s_median <= cfg.thresholds.align_median_max,
                detail: format!("{s_median} <= {}", cfg.thresholds.align_median_max),
            });
        }
    }
    let last_z = per_size.last().unwrap().final_size.z;
    checks.push(CheckResult {
        name: "final_size_z".into(),
        pass: last_z.abs() <= cfg.thresholds.z_max,
        detail: format!("|{last_z}| <= {}", cfg.thresholds.z_max),
    });
    let pass = checks.iter().all(|c| c.pass);

    Ok(EnsembleReport {
        mode,
        sizes: cfg.sizes.clone(),
        replicas: cfg.replicas,
        seed: cfg.seed,
        theta_inf: curves.path.theta_inf,
        limit_final_size,
        r0,
        per_size,
        checks,
        pass,
        replica_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(beta: f64, rho: f64) -> EpidemicRates<f64> {
        EpidemicRates::new(beta, rho).unwrap()
    }

    fn small_major_cfg() -> EnsembleConfig<f64> {
        let mut cfg = EnsembleConfig::new(
            DegreeDist::Regular { d: 3 },
            rates(1.0, 1.0),
            Seeding::Fractions {
                frac_i: 0.1,
                frac_r: 0.0,
            },
        );
        cfg.sizes = vec![200, 2000];
        cfg.replicas = 8;
        cfg.seed = 5;
        cfg.grid_points = 120;
        cfg
    }

    #[test]
    fn ensemble_is_deterministic_and_deviations_shrink() {
        let cfg = small_major_cfg();
        let a = run_ensemble(&cfg).unwrap();
        let b = run_ensemble(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        for (q, name) in QUANTITIES.iter().enumerate() {
            let m0 = a.per_size[0].sup_deviation[q].median;
            let m1 = a.per_size[1].sup_deviation[q].median;
            assert!(m1 < m0, "{name}: median did not shrink ({m0} -> {m1})");
        }
        assert!(a.per_size[1].final_size.stderr > 0.0);
    }

    #[test]
    fn no_seeds_is_a_degenerate_config() {
        let mut cfg = small_major_cfg();
        cfg.seeding = Seeding::Fractions {
            frac_i: 0.0,
            frac_r: 0.0,
        };
        assert!(matches!(
            run_ensemble(&cfg),
            Err(Error::DegenerateConfig(_))
        ));
    }

    #[test]
    fn shifted_requires_s0() {
        let mut cfg = small_major_cfg();
        cfg.seeding = Seeding::Counts {
            count_i: 1,
            count_r: 0,
        };
        cfg.rates = rates(2.0, 1.0);
        assert!(matches!(run_ensemble(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn shifted_small_scale_smoke() {
        let mut cfg = small_major_cfg();
        cfg.seeding = Seeding::Counts {
            count_i: 1,
            count_r: 0,
        };
        cfg.rates = rates(2.0, 1.0);
        cfg.s0 = Some(0.9);
        cfg.sizes = vec![500, 4000];
        cfg.replicas = 24;
        let report = run_ensemble(&cfg).unwrap();
        assert_eq!(report.mode, Mode::Shifted);
        for s in &report.per_size {
            let frac = s.t_star_fraction.unwrap();
            assert!(frac > 0.0 && frac < 1.0, "outbreak fraction {frac}");
        }
        // aligned S/n at t = 0 is s0 up to 1/n by construction
        let last = report.per_size.last().unwrap();
        assert!(last.included >= 2);
    }

    #[test]
    fn final_size_stats_zero_spread() {
        // all-recovered style degenerate sample: identical outcomes
        let r = final_size_stats(&[0.4f64, 0.4, 0.4], 0.4).unwrap();
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.z, 0.0);
        let r2 = final_size_stats(&[0.4f64, 0.4], 0.3).unwrap();
        assert!(r2.z.is_infinite());
    }

    #[test]
    fn self_comparison_has_tiny_deviation() {
        // A fake trajectory that samples the limit exactly at a fine grid has
        // sup deviation bounded by rounding (1/n) plus inter-sample drift.
        let profile = asymptotic_profile(&DegreeDist::Regular { d: 3 }, 0.1, 0.0).unwrap();
        let r = rates(1.0, 1.0);
        let curves =
            LimitCurves::solve(&profile, &r, Mode::Major, None, &SolveControls::default())
                .unwrap();
        let n: u64 = 1_000_000;
        let t_hi = curves.path.time_to_level(curves.path.theta_inf + 1e-4);
        let m = 20_000;
        let mut traj = Trajectory {
            n,
            times: Vec::new(),
            kinds: Vec::new(),
            counts: Vec::new(),
            t_stop: t_hi,
            s_inf: 0,
        };
        for j in 0..=m {
            let t = t_hi * j as f64 / m as f64;
            let v = curves.values(t);
            let nf = n as f64;
            let c = crate::simulate::Counts {
                s: (v[0] * nf).round() as u64,
                i: (v[1] * nf).round() as u64,
                r: n - (v[0] * nf).round() as u64 - (v[1] * nf).round() as u64,
                x_s: (v[3] * nf).round() as u64,
                x_i: (v[4] * nf).round() as u64,
                x_r: (v[5] * nf).round() as u64,
                x: (v[3] * nf).round() as u64
                    + (v[4] * nf).round() as u64
                    + (v[5] * nf).round() as u64,
            };
            traj.times.push(t);
            traj.kinds.push(if j == 0 {
                crate::simulate::EventKind::Init
            } else {
                crate::simulate::EventKind::Sample
            });
            traj.counts.push(c);
        }
        let grid: Vec<f64> = (0..=200).map(|j| t_hi * j as f64 / 200.0).collect();
        let sup = sup_deviation(&traj, &curves, &grid, None).unwrap();
        for q in 0..7 {
            assert!(
                sup[q] < 2e-3,
                "{} deviation {} too large for a self-comparison",
                QUANTITIES[q],
                sup[q]
            );
        }
    }
}
