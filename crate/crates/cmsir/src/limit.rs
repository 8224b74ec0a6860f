//! Deterministic large-population limit: generating-function limit curves,
//! the theta differential equation, infective/recovered vertex fractions, the
//! final-size root and the outbreak threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{basic_reproductive_ratio, EpidemicRates, LimitProfile};
use crate::ode::{integrate, OdeControls, OdeSystem, SolvedSystem, StopRule};
use crate::scalar::Real;

/// Evaluators for the limit curves of a fixed profile and rate pair.
///
/// All functions of `theta` are polynomials or rational functions with
/// analytic derivatives:
///
/// * `v_s(theta) = alpha_s sum_k p_k theta^k` — susceptible vertex fraction,
/// * `h_s(theta) = alpha_s sum_k k p_k theta^k` — free susceptible half-edges,
/// * `h_x(theta) = mu theta^2` — all free half-edges,
/// * `h_r(theta) = mu_r theta + (mu rho / beta) theta (1 - theta)`,
/// * `h_i = h_x - h_s - h_r`, `p_i = h_i / h_x`.
#[derive(Clone, Debug)]
pub struct LimitFunctions<R> {
    pub alpha_s: R,
    pub alpha_i: R,
    pub alpha_r: R,
    pub p: Vec<R>,
    pub lambda: R,
    pub mu: R,
    pub mu_s: R,
    pub mu_i: R,
    pub mu_r: R,
    pub beta: R,
    pub rho: R,
}

impl<R: Real> LimitFunctions<R> {
    pub fn new(profile: &LimitProfile<R>, rates: &EpidemicRates<R>) -> Result<Self> {
        if !(profile.mu > R::zero()) {
            return Err(Error::DegenerateProfile);
        }
        let issues = profile.check(None);
        if !issues.is_empty() {
            return Err(Error::InvalidProfile(issues.join("; ")));
        }
        Ok(Self {
            alpha_s: profile.alpha_s,
            alpha_i: profile.alpha_i,
            alpha_r: profile.alpha_r,
            p: profile.p.clone(),
            lambda: profile.lambda,
            mu: profile.mu,
            mu_s: profile.mu_s,
            mu_i: profile.mu_i,
            mu_r: profile.mu_r,
            beta: rates.beta,
            rho: rates.rho,
        })
    }

    /// `sum_{k >= shift} w(k) p_k theta^(k - shift)` by Horner evaluation.
    fn power_sum(&self, theta: R, weight: impl Fn(usize) -> R, shift: usize) -> R {
        let mut acc = R::zero();
        for k in (shift..self.p.len()).rev() {
            acc = acc * theta + weight(k) * self.p[k];
        }
        acc
    }

    pub fn v_s(&self, theta: R) -> R {
        self.alpha_s * self.power_sum(theta, |_| R::one(), 0)
    }

    /// Term-wise derivative of `v_s`.
    pub fn v_s_prime(&self, theta: R) -> R {
        self.alpha_s * self.power_sum(theta, |k| R::of_usize(k), 1)
    }

    pub fn h_s(&self, theta: R) -> R {
        self.alpha_s * self.power_sum(theta, |k| R::of_usize(k), 0)
    }

    pub fn h_s_prime(&self, theta: R) -> R {
        self.alpha_s * self.power_sum(theta, |k| R::of_usize(k * k), 1)
    }

    pub fn h_x(&self, theta: R) -> R {
        self.mu * theta * theta
    }

    pub fn h_x_prime(&self, theta: R) -> R {
        (self.mu + self.mu) * theta
    }

    pub fn h_r(&self, theta: R) -> R {
        self.mu_r * theta + self.mu * self.rho / self.beta * theta * (R::one() - theta)
    }

    pub fn h_r_prime(&self, theta: R) -> R {
        self.mu_r + self.mu * self.rho / self.beta * (R::one() - (theta + theta))
    }

    pub fn h_i(&self, theta: R) -> R {
        self.h_x(theta) - self.h_s(theta) - self.h_r(theta)
    }

    pub fn h_i_prime(&self, theta: R) -> R {
        self.h_x_prime(theta) - self.h_s_prime(theta) - self.h_r_prime(theta)
    }

    /// Infective pressure `h_i / h_x`; undefined at `theta = 0`.
    pub fn p_i(&self, theta: R) -> Result<R> {
        if theta == R::zero() {
            return Err(Error::InfectivePressureAtZero);
        }
        Ok(self.h_i(theta) / self.h_x(theta))
    }

    /// Right-hand side of the theta equation,
    /// `f(theta) = -beta theta p_i(theta) = -beta h_i(theta) / (mu theta)`.
    pub fn theta_rhs(&self, theta: R) -> R {
        -self.beta * self.h_i(theta) / (self.mu * theta)
    }

    pub fn theta_rhs_prime(&self, theta: R) -> R {
        -self.beta * (self.h_i_prime(theta) * theta - self.h_i(theta))
            / (self.mu * theta * theta)
    }

    /// Infection flux `g(theta) = beta h_i h_s / h_x`, the rate at which the
    /// susceptible fraction drains (`dv_s(theta_t)/dt = -g(theta_t)`).
    pub fn flux(&self, theta: R) -> R {
        self.beta * self.h_i(theta) * self.h_s(theta) / self.h_x(theta)
    }

    pub fn flux_prime(&self, theta: R) -> R {
        let hi = self.h_i(theta);
        let hs = self.h_s(theta);
        let hx = self.h_x(theta);
        self.beta
            * ((self.h_i_prime(theta) * hs + hi * self.h_s_prime(theta)) * hx
                - hi * hs * self.h_x_prime(theta))
            / (hx * hx)
    }
}

/// Values of all limit curves at one `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitValues<R> {
    pub v_s: R,
    pub h_s: R,
    pub h_x: R,
    pub h_r: R,
    pub h_i: R,
    /// `None` exactly at `theta = 0`, where the ratio is undefined.
    pub p_i: Option<R>,
}

/// Evaluate every limit curve at `theta` in `[0, 1]`.
pub fn eval_limit_functions<R: Real>(
    profile: &LimitProfile<R>,
    rates: &EpidemicRates<R>,
    theta: R,
) -> Result<LimitValues<R>> {
    if !(theta >= R::zero() && theta <= R::one()) {
        return Err(Error::InvalidProfile(format!(
            "theta = {theta} outside [0, 1]"
        )));
    }
    let lf = LimitFunctions::new(profile, rates)?;
    let h_i = lf.h_i(theta);
    Ok(LimitValues {
        v_s: lf.v_s(theta),
        h_s: lf.h_s(theta),
        h_x: lf.h_x(theta),
        h_r: lf.h_r(theta),
        h_i,
        p_i: lf.p_i(theta).ok(),
    })
}

fn require_root_conditions<R: Real>(
    profile: &LimitProfile<R>,
    rates: &EpidemicRates<R>,
) -> Result<()> {
    let issues = profile.check(Some(rates));
    if !issues.is_empty() {
        return Err(Error::InvalidProfile(issues.join("; ")));
    }
    Ok(())
}

/// The unique interior zero of `h_i`: `h_i(theta_inf) = 0` with
/// `theta_inf in (0, 1)`.
pub fn find_theta_infinity<R: Real>(
    profile: &LimitProfile<R>,
    rates: &EpidemicRates<R>,
) -> Result<R> {
    require_root_conditions(profile, rates)?;
    let lf = LimitFunctions::new(profile, rates)?;
    let one = R::one();
    // Upper bracket: h_i(1) = mu_i when mu_i > 0; otherwise shrink from 1
    // (h_i(1) = 0 is itself a zero, interior root exists only when R0 > 1).
    let hi_end = if lf.mu_i > R::zero() {
        one
    } else {
        if basic_reproductive_ratio(profile, rates)? <= one {
            return Err(Error::NoMajorOutbreak);
        }
        let mut eps = R::of(1e-3);
        loop {
            let cand = one - eps;
            if lf.h_i(cand) > R::zero() {
                break cand;
            }
            eps = eps.half();
            if eps < R::epsilon() {
                return Err(Error::NoMajorOutbreak);
            }
        }
    };
    // Lower bracket: h_i < 0 near zero whenever the root condition holds.
    let mut lo = hi_end.half();
    let mut tries = 0;
    while !(lf.h_i(lo) < R::zero()) {
        lo = lo.half();
        tries += 1;
        if tries > 4000 {
            return Err(Error::NoMajorOutbreak);
        }
    }
    let mut hi = hi_end;
    for _ in 0..200 {
        let mid = (lo + hi).half();
        if mid <= lo || mid >= hi {
            break;
        }
        if lf.h_i(mid) < R::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = (lo + hi).half();
    let f_tol = R::of(1e-13).max(R::epsilon() * R::of(16.0)) * lf.mu;
    debug_assert!(lf.h_i(root).abs() <= f_tol);
    Ok(root)
}

/// Limiting fraction of susceptibles that escape infection, `v_s(theta_inf)`.
pub fn final_size<R: Real>(profile: &LimitProfile<R>, rates: &EpidemicRates<R>) -> Result<R> {
    let theta_inf = find_theta_infinity(profile, rates)?;
    Ok(LimitFunctions::new(profile, rates)?.v_s(theta_inf))
}

/// Invert `v_s` on `(theta_inf, 1)`: the starting point of the shifted-time
/// solution through susceptible fraction `s0`.
pub fn invert_v_s<R: Real>(
    profile: &LimitProfile<R>,
    rates: &EpidemicRates<R>,
    s0: R,
) -> Result<R> {
    let theta_inf = find_theta_infinity(profile, rates)?;
    let lf = LimitFunctions::new(profile, rates)?;
    let fs = lf.v_s(theta_inf);
    // Guard band keeps s0 away from the boundary values, where theta0 would
    // degenerate to theta_inf or 1.
    let guard = R::of(1e-12) * (R::one() + lf.alpha_s);
    if !(s0 > fs + guard && s0 < lf.alpha_s - guard) {
        return Err(Error::ThresholdOutsideRange {
            s0: s0.to_f64().unwrap_or(f64::NAN),
        });
    }
    let (mut lo, mut hi) = (theta_inf, R::one());
    let mut mid = (lo + hi).half();
    for _ in 0..200 {
        mid = (lo + hi).half();
        if mid <= lo || mid >= hi {
            break;
        }
        let v = lf.v_s(mid);
        if (v - s0).abs() <= R::of(1e-15) {
            break;
        }
        if v < s0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    debug_assert!((lf.v_s(mid) - s0).abs() <= R::of(1e-13).max(R::epsilon() * R::of(16.0)));
    Ok(mid)
}

/// Which limit regime the theta path describes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `mu_i > 0`: time starts at 0 with `theta_0 = 1`.
    Major,
    /// `mu_i = 0`, small seed: time 0 is pinned to susceptible fraction `s0`.
    Shifted,
}

/// Integration controls for the limit solvers.
#[derive(Clone, Copy, Debug)]
pub struct SolveControls<R> {
    pub rel_tol: R,
    pub abs_tol: R,
    /// Stop once `theta - theta_inf <= stop_eps` (and, backward in shifted
    /// mode, once `1 - theta <= stop_eps`).
    pub stop_eps: R,
    /// Hard horizon guard.
    pub t_cap: R,
}

impl<R: Real> Default for SolveControls<R> {
    fn default() -> Self {
        Self {
            rel_tol: R::of(1e-9),
            abs_tol: R::of(1e-12),
            stop_eps: R::of(1e-8),
            t_cap: R::of(1e6),
        }
    }
}

impl<R: Real> SolveControls<R> {
    fn ode(&self) -> OdeControls<R> {
        OdeControls {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            t_cap: self.t_cap,
            max_steps: 10_000_000,
        }
    }
}

struct ThetaOde<'a, R>(&'a LimitFunctions<R>);

impl<R: Real> OdeSystem<R> for ThetaOde<'_, R> {
    fn dim(&self) -> usize {
        1
    }
    fn rhs(&self, _t: R, y: &[R], dy: &mut [R]) {
        dy[0] = self.0.theta_rhs(y[0]);
    }
    fn rhs_dot(&self, _t: R, y: &[R], dy: &[R], ddy: &mut [R]) {
        ddy[0] = self.0.theta_rhs_prime(y[0]) * dy[0];
    }
}

/// A deterministic curve `t -> theta(t)`; the trait lets the renewal-equation
/// machinery consume either a differential solution or a fixed-point iterate.
pub trait ThetaCurve<R: Real> {
    fn t_start(&self) -> R;
    fn t_end(&self) -> R;
    fn theta(&self, t: R) -> R;
    fn theta_slope(&self, t: R) -> R;
}

/// Dense solution of the theta equation.
#[derive(Clone, Debug)]
pub struct ThetaPath<R> {
    pub mode: Mode,
    pub theta_inf: R,
    pub theta0: R,
    pub s0: Option<R>,
    pub curve: SolvedSystem<R>,
}

impl<R: Real> ThetaCurve<R> for ThetaPath<R> {
    fn t_start(&self) -> R {
        self.curve.t_start()
    }
    fn t_end(&self) -> R {
        self.curve.t_end()
    }
    fn theta(&self, t: R) -> R {
        self.curve.value(t, 0)
    }
    fn theta_slope(&self, t: R) -> R {
        self.curve.slope(t, 0)
    }
}

impl<R: Real> ThetaPath<R> {
    pub fn knots(&self) -> &[R] {
        &self.curve.ts
    }

    /// First time at which `theta(t) <= level` (monotone bisection); the path
    /// end if the level is below the stored range.
    pub fn time_to_level(&self, level: R) -> R {
        let (mut lo, mut hi) = (self.t_start(), self.t_end());
        if self.theta(lo) <= level {
            return lo;
        }
        if self.theta(hi) > level {
            return hi;
        }
        for _ in 0..200 {
            let mid = (lo + hi).half();
            if mid <= lo || mid >= hi {
                break;
            }
            if self.theta(mid) <= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Solve the theta equation for the requested mode.
pub fn solve_theta<R: Real>(
    profile: &LimitProfile<R>,
    rates: &EpidemicRates<R>,
    mode: Mode,
    s0: Option<R>,
    controls: &SolveControls<R>,
) -> Result<ThetaPath<R>> {
    let theta_inf = find_theta_infinity(profile, rates)?;
    let lf = LimitFunctions::new(profile, rates)?;
    let ode = ThetaOde(&lf);
    // The stop offset must stay resolvable above the integrator's own error
    // band, otherwise the solution can park within tolerance of the asymptote
    // without ever crossing the level.
    let eps_eff = controls
        .stop_eps
        .max(R::of(4.0) * (controls.abs_tol + controls.rel_tol * theta_inf));
    let level_down = theta_inf + eps_eff;
    match mode {
        Mode::Major => {
            if !(lf.mu_i > R::zero()) {
                return Err(Error::InvalidProfile(
                    "major mode requires mu_i > 0".into(),
                ));
            }
            let curve = integrate(
                &ode,
                R::zero(),
                &[R::one()],
                R::one(),
                StopRule::LevelDown {
                    comp: 0,
                    level: level_down,
                },
                &controls.ode(),
            )?;
            Ok(ThetaPath {
                mode,
                theta_inf,
                theta0: R::one(),
                s0: None,
                curve,
            })
        }
        Mode::Shifted => {
            if lf.mu_i != R::zero() || lf.alpha_i != R::zero() {
                return Err(Error::InvalidProfile(
                    "shifted mode requires alpha_i = mu_i = 0".into(),
                ));
            }
            let s0 = s0.ok_or_else(|| Error::Config("shifted mode requires s0".into()))?;
            let theta0 = invert_v_s(profile, rates, s0)?;
            let fwd = integrate(
                &ode,
                R::zero(),
                &[theta0],
                R::one(),
                StopRule::LevelDown {
                    comp: 0,
                    level: level_down,
                },
                &controls.ode(),
            )?;
            let mut curve = integrate(
                &ode,
                R::zero(),
                &[theta0],
                -R::one(),
                StopRule::LevelUp {
                    comp: 0,
                    level: R::one() - eps_eff,
                },
                &controls.ode(),
            )?;
            curve.reverse();
            curve.extend(fwd);
            Ok(ThetaPath {
                mode,
                theta_inf,
                theta0,
                s0: Some(s0),
                curve,
            })
        }
    }
}

struct VIOde<'a, R: Real> {
    lf: &'a LimitFunctions<R>,
    theta: &'a dyn ThetaCurve<R>,
}

impl<R: Real> OdeSystem<R> for VIOde<'_, R> {
    fn dim(&self) -> usize {
        1
    }
    fn rhs(&self, t: R, y: &[R], dy: &mut [R]) {
        dy[0] = self.lf.flux(self.theta.theta(t)) - self.lf.rho * y[0];
    }
    fn rhs_dot(&self, t: R, _y: &[R], dy: &[R], ddy: &mut [R]) {
        let th = self.theta.theta(t);
        ddy[0] = self.lf.flux_prime(th) * self.theta.theta_slope(t) - self.lf.rho * dy[0];
    }
}

/// Vertex-fraction curves aligned with a [`ThetaPath`]:
/// `v_s(theta_t)`, the solved `v_i`, and `v_r = 1 - v_s - v_i`.
#[derive(Clone, Debug)]
pub struct VPaths<R> {
    pub ts: Vec<R>,
    pub v_s: Vec<R>,
    pub v_i: Vec<R>,
    pub v_r: Vec<R>,
    v_i_curve: SolvedSystem<R>,
    v_s0: R,
    v_s_end: R,
}

impl<R: Real> VPaths<R> {
    pub fn v_i_at(&self, t: R) -> R {
        self.v_i_curve.value(t, 0)
    }

    /// `v_s(theta(t))` clamped to the path span.
    pub fn v_s_at(&self, t: R, path: &ThetaPath<R>, lf: &LimitFunctions<R>) -> R {
        if t <= path.t_start() {
            self.v_s0
        } else if t >= path.t_end() {
            self.v_s_end
        } else {
            lf.v_s(path.theta(t))
        }
    }
}

/// Integrate the infective-fraction equation along a solved theta path and
/// attach `v_s`/`v_r` on the same knots.
pub fn solve_v_paths<R: Real>(
    path: &ThetaPath<R>,
    profile: &LimitProfile<R>,
    rates: &EpidemicRates<R>,
    controls: &SolveControls<R>,
) -> Result<VPaths<R>> {
    let lf = LimitFunctions::new(profile, rates)?;
    let t0 = path.t_start();
    let t1 = path.t_end();
    let v0 = match path.mode {
        Mode::Major => lf.alpha_i,
        Mode::Shifted => {
            // Quasi-stationary balance at the backward tail; exact up to
            // O(stop_eps) of the t -> -infinity condition v_i -> 0.
            if lf.rho > R::zero() {
                lf.flux(path.theta(t0)) / lf.rho
            } else {
                R::zero()
            }
        }
    };
    let sys = VIOde {
        lf: &lf,
        theta: path,
    };
    let v_i_curve = if t1 > t0 {
        integrate(&sys, t0, &[v0], R::one(), StopRule::Time(t1), &controls.ode())?
    } else {
        let mut f = vec![R::zero()];
        sys.rhs(t0, &[v0], &mut f);
        let mut dd = vec![R::zero()];
        sys.rhs_dot(t0, &[v0], &f, &mut dd);
        SolvedSystem {
            ts: vec![t0],
            ys: vec![vec![v0]],
            d1: vec![f],
            d2: vec![dd],
        }
    };
    let ts = path.knots().to_vec();
    let mut v_s = Vec::with_capacity(ts.len());
    let mut v_i = Vec::with_capacity(ts.len());
    let mut v_r = Vec::with_capacity(ts.len());
    for &t in &ts {
        let vs = lf.v_s(path.theta(t));
        let vi = v_i_curve.value(t, 0);
        v_s.push(vs);
        v_i.push(vi);
        v_r.push(R::one() - vs - vi);
    }
    Ok(VPaths {
        v_s0: v_s[0],
        v_s_end: *v_s.last().unwrap(),
        ts,
        v_s,
        v_i,
        v_r,
        v_i_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{asymptotic_profile, DegreeDist};

    type P = LimitProfile<f64>;

    fn rates(beta: f64, rho: f64) -> EpidemicRates<f64> {
        EpidemicRates::new(beta, rho).unwrap()
    }

    /// Regular-3 graph, 10% infective, beta = rho = 1.
    fn profile_a() -> P {
        asymptotic_profile(&DegreeDist::Regular { d: 3 }, 0.1, 0.0).unwrap()
    }

    /// Regular-3 graph, all susceptible (small-seed regime), beta = 2, rho = 1.
    fn profile_b() -> P {
        asymptotic_profile(&DegreeDist::Regular { d: 3 }, 0.0, 0.0).unwrap()
    }

    #[test]
    fn boundary_values_at_theta_one() {
        let prof = profile_a();
        let r = rates(1.0, 1.0);
        let v = eval_limit_functions(&prof, &r, 1.0).unwrap();
        assert!((v.v_s - prof.alpha_s).abs() < 1e-12);
        assert!((v.h_s - prof.mu_s).abs() < 1e-12);
        assert!((v.h_x - prof.mu).abs() < 1e-12);
        assert!((v.h_r - prof.mu_r).abs() < 1e-12);
        assert!((v.h_i - prof.mu_i).abs() < 1e-12);
        assert!((v.p_i.unwrap() - prof.mu_i / prof.mu).abs() < 1e-12);
    }

    #[test]
    fn profile_a_h_i_hand_value() {
        // h_i(theta) = -2.7 theta^3 + 6 theta^2 - 3 theta; at 0.9: 0.1917
        let lf = LimitFunctions::new(&profile_a(), &rates(1.0, 1.0)).unwrap();
        assert!((lf.h_i(0.9) - 0.1917).abs() < 1e-12);
    }

    #[test]
    fn theta_zero_kills_every_half_edge_curve() {
        let prof = profile_a();
        let v = eval_limit_functions(&prof, &rates(1.0, 1.0), 0.0).unwrap();
        assert_eq!(v.v_s, prof.alpha_s * 0.0); // p_0 = 0 for the regular graph
        assert_eq!(v.h_s, 0.0);
        assert_eq!(v.h_x, 0.0);
        assert_eq!(v.h_r, 0.0);
        assert!(v.p_i.is_none());
        let lf = LimitFunctions::new(&prof, &rates(1.0, 1.0)).unwrap();
        assert!(matches!(lf.p_i(0.0), Err(Error::InfectivePressureAtZero)));
    }

    #[test]
    fn generating_function_identities_on_a_grid() {
        for (prof, r) in [
            (profile_a(), rates(1.0, 1.0)),
            (profile_b(), rates(2.0, 1.0)),
            (
                asymptotic_profile(
                    &DegreeDist::Poisson {
                        mean: 2.0,
                        tail: 1e-10,
                    },
                    0.05,
                    0.05,
                )
                .unwrap(),
                rates(1.5, 0.7),
            ),
        ] {
            let lf = LimitFunctions::new(&prof, &r).unwrap();
            for j in 0..=1000 {
                let theta = j as f64 / 1000.0;
                let gap = lf.h_x(theta) - lf.h_s(theta) - lf.h_i(theta) - lf.h_r(theta);
                assert!(gap.abs() <= 1e-12 * prof.mu, "gap {gap} at {theta}");
                let hs_alt = theta * lf.v_s_prime(theta);
                assert!((lf.h_s(theta) - hs_alt).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn theta_infinity_profile_b_is_exactly_half() {
        // h_i = -1.5 theta (2 theta - 1)(theta - 1): root 1/2
        let root = find_theta_infinity(&profile_b(), &rates(2.0, 1.0)).unwrap();
        assert!((root - 0.5).abs() < 1e-12, "root = {root}");
        let fs = final_size(&profile_b(), &rates(2.0, 1.0)).unwrap();
        assert!((fs - 0.125).abs() < 1e-12);
    }

    #[test]
    fn theta_infinity_profile_a_matches_quadratic_formula() {
        // interior root of -2.7 theta^2 + 6 theta - 3
        let oracle = (6.0 - 3.6f64.sqrt()) / 5.4;
        let root = find_theta_infinity(&profile_a(), &rates(1.0, 1.0)).unwrap();
        assert!((root - oracle).abs() < 1e-9, "root = {root}");
        let fs = final_size(&profile_a(), &rates(1.0, 1.0)).unwrap();
        assert!((fs - 0.9 * oracle.powi(3)).abs() < 1e-9);
    }

    #[test]
    fn degree_one_graph_has_no_major_outbreak() {
        let prof = asymptotic_profile(&DegreeDist::Regular { d: 1 }, 0.0, 0.0).unwrap();
        assert!(matches!(
            find_theta_infinity(&prof, &rates(1.0, 0.0)),
            Err(Error::NoMajorOutbreak)
        ));
    }

    #[test]
    fn root_sign_structure() {
        for (prof, r) in [(profile_a(), rates(1.0, 1.0)), (profile_b(), rates(2.0, 1.0))] {
            let lf = LimitFunctions::new(&prof, &r).unwrap();
            let root = find_theta_infinity(&prof, &r).unwrap();
            for j in 1..1000 {
                let theta = j as f64 / 1000.0;
                let h = lf.h_i(theta);
                if theta < root - 1e-9 {
                    assert!(h < 0.0, "h_i({theta}) = {h} below root {root}");
                } else if theta > root + 1e-9 && theta < 1.0 - 1e-12 {
                    assert!(h > 0.0, "h_i({theta}) = {h} above root {root}");
                }
            }
        }
    }

    #[test]
    fn invert_v_s_profile_b_closed_form() {
        let r = rates(2.0, 1.0);
        let theta = invert_v_s(&profile_b(), &r, 0.5).unwrap();
        assert!((theta - 0.5f64.cbrt()).abs() < 1e-12);
        // boundaries rejected
        assert!(matches!(
            invert_v_s(&profile_b(), &r, 1.0),
            Err(Error::ThresholdOutsideRange { .. })
        ));
        assert!(matches!(
            invert_v_s(&profile_b(), &r, 0.125),
            Err(Error::ThresholdOutsideRange { .. })
        ));
    }

    #[test]
    fn theta_path_profile_a_initial_slope_and_tail() {
        let prof = profile_a();
        let r = rates(1.0, 1.0);
        let controls = SolveControls::default();
        let path = solve_theta(&prof, &r, Mode::Major, None, &controls).unwrap();
        assert_eq!(path.theta(0.0), 1.0);
        // d theta/dt at 0 is -beta * mu_i / mu = -0.1
        assert!((path.theta_slope(0.0) + 0.1).abs() < 1e-10);
        // strictly decreasing knots, range (theta_inf, 1]
        assert!(path
            .curve
            .ts
            .windows(2)
            .all(|w| w[0] < w[1]));
        assert!(path
            .curve
            .ys
            .windows(2)
            .all(|w| w[1][0] < w[0][0]));
        let last = path.curve.ys.last().unwrap()[0];
        assert!(last > path.theta_inf);
        assert!(last - path.theta_inf <= controls.stop_eps * 1.001);
    }

    /// rho = 0, regular-3, alpha = (0.5, 0.3, 0.2): the theta equation is the
    /// Riccati equation d theta/dt = 0.5 theta^2 - theta + 0.2 with roots
    /// 1 +- sqrt(0.6), solvable in closed form.
    #[test]
    fn riccati_closed_form_oracle() {
        let prof = asymptotic_profile(&DegreeDist::Regular { d: 3 }, 0.3, 0.2).unwrap();
        let r = rates(1.0, 0.0);
        let s = 0.6f64.sqrt();
        let (r1, r2) = (1.0 + s, 1.0 - s);
        let exact = |t: f64| {
            let w = -(s * t).exp();
            (r1 - r2 * w) / (1.0 - w)
        };
        let root = find_theta_infinity(&prof, &r).unwrap();
        assert!((root - r2).abs() < 1e-12, "root {root} vs {r2}");
        let path = solve_theta(&prof, &r, Mode::Major, None, &SolveControls::default()).unwrap();
        let mut worst = 0.0f64;
        for j in 0..=400 {
            let t = path.t_end() * j as f64 / 400.0;
            worst = worst.max((path.theta(t) - exact(t)).abs());
        }
        assert!(worst < 1e-8, "sup |theta - exact| = {worst}");
        // v_i = alpha_i + (v_s(1) - v_s(theta_t)) when rho = 0, v_r constant.
        let v = solve_v_paths(&path, &prof, &r, &SolveControls::default()).unwrap();
        let lf = LimitFunctions::new(&prof, &r).unwrap();
        let mut worst_v = 0.0f64;
        for j in 0..=400 {
            let t = path.t_end() * j as f64 / 400.0;
            let vi_exact = 0.3 + 0.5 * (1.0 - exact(t).powi(3));
            worst_v = worst_v.max((v.v_i_at(t) - vi_exact).abs());
            let vr = 1.0 - lf.v_s(path.theta(t)) - v.v_i_at(t);
            assert!((vr - 0.2).abs() < 1e-7, "v_r drifted: {vr}");
        }
        assert!(worst_v < 1e-7, "sup |v_i - exact| = {worst_v}");
    }

    #[test]
    fn shifted_path_profile_b() {
        let prof = profile_b();
        let r = rates(2.0, 1.0);
        let controls = SolveControls::default();
        let path = solve_theta(&prof, &r, Mode::Shifted, Some(0.9), &controls).unwrap();
        assert!((path.theta0 - 0.9f64.cbrt()).abs() < 1e-12);
        assert!((path.theta(0.0) - path.theta0).abs() < 1e-12);
        // tails
        let start = path.t_start();
        let end = path.t_end();
        assert!(start < 0.0 && end > 0.0);
        assert!(1.0 - path.theta(start) <= controls.stop_eps * 1.001);
        assert!(path.theta(end) - 0.5 <= controls.stop_eps * 1.001);
        assert!((path.theta_inf - 0.5).abs() < 1e-12);
        // monotone through the join
        assert!(path.curve.ys.windows(2).all(|w| w[1][0] < w[0][0]));
    }

    #[test]
    fn v_paths_major_mode_initial_values_and_sum() {
        let prof = profile_a();
        let r = rates(1.0, 1.0);
        let controls = SolveControls::default();
        let path = solve_theta(&prof, &r, Mode::Major, None, &controls).unwrap();
        let v = solve_v_paths(&path, &prof, &r, &controls).unwrap();
        assert!((v.v_i[0] - prof.alpha_i).abs() < 1e-12);
        assert!((v.v_r[0] - prof.alpha_r).abs() < 1e-10);
        for j in 0..v.ts.len() {
            assert!((v.v_s[j] + v.v_i[j] + v.v_r[j] - 1.0).abs() < 1e-10);
            assert!(v.v_i[j] >= -1e-10);
            if j > 0 {
                // dv_r/dt = rho v_i >= 0
                assert!(v.v_r[j] >= v.v_r[j - 1] - 1e-10);
            }
        }
        // tail: v_i -> 0, v_s -> final size
        let fs = final_size(&prof, &r).unwrap();
        assert!(v.v_i.last().unwrap().abs() < 1e-3);
        assert!((v.v_s.last().unwrap() - fs).abs() < 1e-6);
    }

    #[test]
    fn shifted_v_paths_vanish_in_the_backward_tail() {
        let prof = profile_b();
        let r = rates(2.0, 1.0);
        let controls = SolveControls::default();
        let path = solve_theta(&prof, &r, Mode::Shifted, Some(0.9), &controls).unwrap();
        let v = solve_v_paths(&path, &prof, &r, &controls).unwrap();
        assert!(v.v_i[0].abs() < 1e-7, "v_i at backward tail: {}", v.v_i[0]);
        for j in 0..v.ts.len() {
            assert!((v.v_s[j] + v.v_i[j] + v.v_r[j] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ode_defect_is_within_tolerance_band() {
        let prof = profile_a();
        let r = rates(1.0, 1.0);
        let controls = SolveControls::default();
        let path = solve_theta(&prof, &r, Mode::Major, None, &controls).unwrap();
        let lf = LimitFunctions::new(&prof, &r).unwrap();
        let mut worst = 0.0f64;
        // sample between knots where the interpolant is weakest
        for w in path.curve.ts.windows(2) {
            for frac in [0.25, 0.5, 0.75] {
                let t = w[0] + (w[1] - w[0]) * frac;
                let defect = path.theta_slope(t) - lf.theta_rhs(path.theta(t));
                worst = worst.max(defect.abs());
            }
        }
        assert!(
            worst <= 10.0 * controls.rel_tol * r.beta,
            "defect {worst} > band {}",
            10.0 * controls.rel_tol * r.beta
        );
    }

    #[test]
    fn refinement_changes_theta_within_tolerance_scale() {
        let prof = profile_a();
        let r = rates(1.0, 1.0);
        let coarse = SolveControls {
            rel_tol: 1e-7,
            ..SolveControls::default()
        };
        let fine = SolveControls {
            rel_tol: 5e-8,
            ..SolveControls::default()
        };
        let pa = solve_theta(&prof, &r, Mode::Major, None, &coarse).unwrap();
        let pb = solve_theta(&prof, &r, Mode::Major, None, &fine).unwrap();
        let t_end = pa.t_end().min(pb.t_end());
        let mut worst = 0.0f64;
        for j in 0..=500 {
            let t = t_end * j as f64 / 500.0;
            worst = worst.max((pa.theta(t) - pb.theta(t)).abs());
        }
        assert!(worst <= 10.0 * coarse.rel_tol, "refinement gap {worst}");
    }

    #[test]
    fn the_whole_pipeline_instantiates_at_f32() {
        let prof = asymptotic_profile::<f32>(&DegreeDist::Regular { d: 3 }, 0.1, 0.0).unwrap();
        let r = EpidemicRates::new(1.0f32, 1.0).unwrap();
        let controls = SolveControls {
            rel_tol: 1e-5,
            abs_tol: 1e-6,
            stop_eps: 1e-4,
            t_cap: 1e6,
        };
        let root = find_theta_infinity(&prof, &r).unwrap();
        assert!((root - 0.759_746_9).abs() < 1e-4);
        let path = solve_theta(&prof, &r, Mode::Major, None, &controls).unwrap();
        let v = solve_v_paths(&path, &prof, &r, &controls).unwrap();
        assert!((v.v_i[0] - 0.1).abs() < 1e-5);
        assert!(path.curve.ys.windows(2).all(|w| w[1][0] < w[0][0]));
    }

    #[test]
    fn interpretation_bound_mu_r_over_mu() {
        let prof = asymptotic_profile(&DegreeDist::Regular { d: 3 }, 0.1, 0.2).unwrap();
        let r = rates(1.0, 0.5);
        let path = solve_theta(&prof, &r, Mode::Major, None, &SolveControls::default()).unwrap();
        let lower = prof.mu_r / prof.mu;
        for (j, &t) in path.curve.ts.iter().enumerate() {
            let th = path.theta(t);
            assert!(th <= 1.0 + 1e-12 && th >= lower - 1e-12, "knot {j}: {th}");
        }
    }
}
