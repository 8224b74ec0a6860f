//! Adaptive explicit integration: a Dormand-Prince 5(4) embedded pair with a
//! two-point quintic Hermite dense representation.
//!
//! Accepted knots store the state together with its exact first and second
//! time derivatives (the system supplies both analytically), so evaluation
//! between knots carries an interpolation error well below the step-control
//! tolerance and the interpolant's slope can be used for defect checks.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Right-hand side of a first-order system, with its time derivative along
/// solutions (used for the dense second-derivative data).
pub trait OdeSystem<R: Real> {
    fn dim(&self) -> usize;
    /// `dy = f(t, y)`.
    fn rhs(&self, t: R, y: &[R], dy: &mut [R]);
    /// `ddy = d/dt f(t, y(t))` given `dy = f(t, y)`.
    fn rhs_dot(&self, t: R, y: &[R], dy: &[R], ddy: &mut [R]);
}

/// Where integration ends.
#[derive(Clone, Copy, Debug)]
pub enum StopRule<R> {
    /// Integrate to exactly `t_end`.
    Time(R),
    /// Stop when component `comp` first falls to `level` (decreasing passage).
    LevelDown { comp: usize, level: R },
    /// Stop when component `comp` first rises to `level`.
    LevelUp { comp: usize, level: R },
}

#[derive(Clone, Copy, Debug)]
pub struct OdeControls<R> {
    pub rel_tol: R,
    pub abs_tol: R,
    /// Hard cap on `|t - t0|` for level-based stops.
    pub t_cap: R,
    pub max_steps: usize,
}

impl<R: Real> Default for OdeControls<R> {
    fn default() -> Self {
        Self {
            rel_tol: R::of(1e-9),
            abs_tol: R::of(1e-12),
            t_cap: R::of(1e6),
            max_steps: 10_000_000,
        }
    }
}

/// Dense solution: knots with state, first and second derivatives, quintic
/// Hermite in between, clamped outside the knot span.
#[derive(Clone, Debug)]
pub struct SolvedSystem<R> {
    pub ts: Vec<R>,
    pub ys: Vec<Vec<R>>,
    pub d1: Vec<Vec<R>>,
    pub d2: Vec<Vec<R>>,
}

fn hermite_weights<R: Real>(s: R) -> [R; 6] {
    let one = R::one();
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    [
        one - R::of(10.0) * s3 + R::of(15.0) * s4 - R::of(6.0) * s5,
        s - R::of(6.0) * s3 + R::of(8.0) * s4 - R::of(3.0) * s5,
        R::of(0.5) * s2 - R::of(1.5) * s3 + R::of(1.5) * s4 - R::of(0.5) * s5,
        R::of(10.0) * s3 - R::of(15.0) * s4 + R::of(6.0) * s5,
        -R::of(4.0) * s3 + R::of(7.0) * s4 - R::of(3.0) * s5,
        R::of(0.5) * s3 - s4 + R::of(0.5) * s5,
    ]
}

fn hermite_slope_weights<R: Real>(s: R) -> [R; 6] {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    [
        -R::of(30.0) * s2 + R::of(60.0) * s3 - R::of(30.0) * s4,
        R::one() - R::of(18.0) * s2 + R::of(32.0) * s3 - R::of(15.0) * s4,
        s - R::of(4.5) * s2 + R::of(6.0) * s3 - R::of(2.5) * s4,
        R::of(30.0) * s2 - R::of(60.0) * s3 + R::of(30.0) * s4,
        -R::of(12.0) * s2 + R::of(28.0) * s3 - R::of(15.0) * s4,
        R::of(1.5) * s2 - R::of(4.0) * s3 + R::of(2.5) * s4,
    ]
}

#[allow(clippy::too_many_arguments)]
fn segment_value<R: Real>(h: R, s: R, y0: R, m0: R, c0: R, y1: R, m1: R, c1: R) -> R {
    let w = hermite_weights(s);
    y0 * w[0] + h * m0 * w[1] + h * h * c0 * w[2] + y1 * w[3] + h * m1 * w[4] + h * h * c1 * w[5]
}

#[allow(clippy::too_many_arguments)]
fn segment_slope<R: Real>(h: R, s: R, y0: R, m0: R, c0: R, y1: R, m1: R, c1: R) -> R {
    let w = hermite_slope_weights(s);
    (y0 * w[0] + h * m0 * w[1] + h * h * c0 * w[2] + y1 * w[3] + h * m1 * w[4] + h * h * c1 * w[5])
        / h
}

impl<R: Real> SolvedSystem<R> {
    pub fn dim(&self) -> usize {
        self.ys.first().map_or(0, Vec::len)
    }

    pub fn t_start(&self) -> R {
        self.ts[0]
    }

    pub fn t_end(&self) -> R {
        *self.ts.last().unwrap()
    }

    /// Index of the segment containing `t` (clamped to the knot span).
    fn segment(&self, t: R) -> usize {
        let n = self.ts.len();
        if n < 2 {
            return 0;
        }
        let idx = self.ts.partition_point(|&tt| tt < t);
        idx.clamp(1, n - 1) - 1
    }

    pub fn value(&self, t: R, comp: usize) -> R {
        if self.ts.len() == 1 || t <= self.ts[0] {
            return self.ys[0][comp];
        }
        if t >= *self.ts.last().unwrap() {
            return self.ys.last().unwrap()[comp];
        }
        let i = self.segment(t);
        let h = self.ts[i + 1] - self.ts[i];
        let s = (t - self.ts[i]) / h;
        segment_value(
            h,
            s,
            self.ys[i][comp],
            self.d1[i][comp],
            self.d2[i][comp],
            self.ys[i + 1][comp],
            self.d1[i + 1][comp],
            self.d2[i + 1][comp],
        )
    }

    /// Interpolant slope; zero outside the knot span where the value clamps.
    pub fn slope(&self, t: R, comp: usize) -> R {
        if self.ts.len() == 1 || t < self.ts[0] || t > *self.ts.last().unwrap() {
            return R::zero();
        }
        let i = self.segment(t);
        let h = self.ts[i + 1] - self.ts[i];
        let s = (t - self.ts[i]) / h;
        segment_slope(
            h,
            s,
            self.ys[i][comp],
            self.d1[i][comp],
            self.d2[i][comp],
            self.ys[i + 1][comp],
            self.d1[i + 1][comp],
            self.d2[i + 1][comp],
        )
    }

    /// Reverse the knot order in place (a backward-time leg becomes a forward
    /// curve; derivative data stays valid since it is taken w.r.t. `t`).
    pub fn reverse(&mut self) {
        self.ts.reverse();
        self.ys.reverse();
        self.d1.reverse();
        self.d2.reverse();
    }

    /// Append `other`, dropping its first knot if it repeats our last time.
    pub fn extend(&mut self, other: SolvedSystem<R>) {
        let skip = usize::from(!self.ts.is_empty()
            && !other.ts.is_empty()
            && (other.ts[0] - *self.ts.last().unwrap()).abs()
                <= R::of(1e-14) * (R::one() + self.ts.last().unwrap().abs()));
        self.ts.extend(other.ts.into_iter().skip(skip));
        self.ys.extend(other.ys.into_iter().skip(skip));
        self.d1.extend(other.d1.into_iter().skip(skip));
        self.d2.extend(other.d2.into_iter().skip(skip));
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Tableau<R> {
    a: [[R; 6]; 6],
    c: [R; 6],
    e: [R; 7],
}

impl<R: Real> Tableau<R> {
    fn new() -> Self {
        let mut a = [[R::zero(); 6]; 6];
        for (i, row) in A.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                a[i][j] = R::of(v);
            }
        }
        let mut c = [R::zero(); 6];
        for (i, &v) in C.iter().enumerate() {
            c[i] = R::of(v);
        }
        let mut e = [R::zero(); 7];
        for (i, &v) in E.iter().enumerate() {
            e[i] = R::of(v);
        }
        Self { a, c, e }
    }
}

struct Stepper<'a, R: Real, S: OdeSystem<R>> {
    sys: &'a S,
    tb: Tableau<R>,
    rel_tol: R,
    abs_tol: R,
    k: [Vec<R>; 7],
    scratch: Vec<R>,
}

impl<'a, R: Real, S: OdeSystem<R>> Stepper<'a, R, S> {
    fn new(sys: &'a S, controls: &OdeControls<R>) -> Self {
        let dim = sys.dim();
        Self {
            sys,
            tb: Tableau::new(),
            rel_tol: controls.rel_tol,
            abs_tol: controls.abs_tol,
            k: std::array::from_fn(|_| vec![R::zero(); dim]),
            scratch: vec![R::zero(); dim],
        }
    }

    /// One trial step from `(t, y)` with `k[0] = f(t, y)` already loaded.
    /// Fills `y_new` and `k[6] = f(t + h, y_new)`; returns the error norm.
    fn step(&mut self, t: R, y: &[R], h: R, y_new: &mut [R]) -> R {
        let dim = y.len();
        for stage in 0..6 {
            for i in 0..dim {
                let mut acc = R::zero();
                for (j, kj) in self.k.iter().enumerate().take(stage + 1) {
                    acc = acc + self.tb.a[stage][j] * kj[i];
                }
                self.scratch[i] = y[i] + h * acc;
            }
            let ts = t + self.tb.c[stage] * h;
            if stage < 5 {
                let (head, tail) = self.k.split_at_mut(stage + 1);
                let _ = head;
                self.sys.rhs(ts, &self.scratch, &mut tail[0]);
            } else {
                y_new.copy_from_slice(&self.scratch);
                self.sys.rhs(ts, y_new, &mut self.k[6]);
            }
        }
        let mut err_sq = R::zero();
        for i in 0..dim {
            let mut e = R::zero();
            for (j, kj) in self.k.iter().enumerate() {
                e = e + self.tb.e[j] * kj[i];
            }
            e = e * h;
            let sc = self.abs_tol + self.rel_tol * y[i].abs().max(y_new[i].abs());
            err_sq = err_sq + (e / sc) * (e / sc);
        }
        (err_sq / R::of_usize(dim)).sqrt()
    }
}

/// Hairer-style starting step size.
fn initial_step<R: Real, S: OdeSystem<R>>(
    sys: &S,
    t0: R,
    y0: &[R],
    f0: &[R],
    dir: R,
    rel_tol: R,
    abs_tol: R,
) -> R {
    let dim = y0.len();
    let sc =
        |i: usize| -> R { abs_tol + rel_tol * y0[i].abs() };
    let rms = |v: &[R]| -> R {
        let s: R = (0..dim).map(|i| (v[i] / sc(i)) * (v[i] / sc(i))).sum();
        (s / R::of_usize(dim)).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < R::of(1e-5) || d1 < R::of(1e-5) {
        R::of(1e-6)
    } else {
        R::of(0.01) * d0 / d1
    };
    h0 = h0 * dir;
    let y1: Vec<R> = (0..dim).map(|i| y0[i] + h0 * f0[i]).collect();
    let mut f1 = vec![R::zero(); dim];
    sys.rhs(t0 + h0, &y1, &mut f1);
    let df: Vec<R> = (0..dim).map(|i| f1[i] - f0[i]).collect();
    let d2 = rms(&df) / h0.abs();
    let h1 = if d1.max(d2) <= R::of(1e-15) {
        (h0.abs() * R::of(1e-3)).max(R::of(1e-6))
    } else {
        (R::of(0.01) / d1.max(d2)).powf(R::of(0.2))
    };
    (h0.abs() * R::of(100.0)).min(h1) * dir
}

/// Integrate `sys` from `(t0, y0)` until `stop`, with `dir = +-1` selecting
/// the time direction for level-based stops.
pub fn integrate<R: Real, S: OdeSystem<R>>(
    sys: &S,
    t0: R,
    y0: &[R],
    dir: R,
    stop: StopRule<R>,
    controls: &OdeControls<R>,
) -> Result<SolvedSystem<R>> {
    let dim = sys.dim();
    assert_eq!(y0.len(), dim);
    let dir = if dir < R::zero() { -R::one() } else { R::one() };
    if let StopRule::Time(t_end) = stop {
        if (t_end - t0) * dir <= R::zero() {
            return Err(Error::SolverStalled("empty integration span".into()));
        }
    }

    let mut out = SolvedSystem {
        ts: Vec::new(),
        ys: Vec::new(),
        d1: Vec::new(),
        d2: Vec::new(),
    };
    let push_knot = |t: R, y: &[R], f: &[R], sys: &S, out: &mut SolvedSystem<R>| {
        let mut ddy = vec![R::zero(); dim];
        sys.rhs_dot(t, y, f, &mut ddy);
        out.ts.push(t);
        out.ys.push(y.to_vec());
        out.d1.push(f.to_vec());
        out.d2.push(ddy);
    };

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut stepper = Stepper::new(sys, controls);
    sys.rhs(t, &y, &mut stepper.k[0]);
    let f0 = stepper.k[0].clone();
    push_knot(t, &y, &f0, sys, &mut out);

    // Already at the stop level?
    match stop {
        StopRule::LevelDown { comp, level } if y[comp] <= level => return Ok(out),
        StopRule::LevelUp { comp, level } if y[comp] >= level => return Ok(out),
        _ => {}
    }

    let mut h = initial_step(
        sys,
        t,
        &y,
        &stepper.k[0].clone(),
        dir,
        controls.rel_tol,
        controls.abs_tol,
    );
    let mut y_new = vec![R::zero(); dim];
    let mut rejected = false;

    for _step in 0..controls.max_steps {
        if let StopRule::Time(t_end) = stop {
            if (t + h - t_end) * dir > R::zero() {
                h = t_end - t;
            }
        }
        let eps_floor = R::of(16.0) * R::epsilon() * t.abs().max(R::one());
        if h.abs() < eps_floor {
            return Err(Error::SolverStalled(format!(
                "step size underflow at t = {t}"
            )));
        }

        let err = stepper.step(t, &y, h, &mut y_new);
        if !err.is_finite() {
            return Err(Error::SolverStalled(format!(
                "non-finite error estimate at t = {t}"
            )));
        }
        if err <= R::one() {
            // Accept.
            let t_new = t + h;
            let k7 = stepper.k[6].clone();
            push_knot(t_new, &y_new, &k7, sys, &mut out);

            let done = match stop {
                StopRule::Time(t_end) => {
                    (t_new - t_end) * dir >= -R::of(1e-12) * t_end.abs().max(R::one())
                }
                StopRule::LevelDown { comp, level } => {
                    if y_new[comp] <= level {
                        cut_at_level(sys, &mut out, comp, level, true);
                        true
                    } else {
                        false
                    }
                }
                StopRule::LevelUp { comp, level } => {
                    if y_new[comp] >= level {
                        cut_at_level(sys, &mut out, comp, level, false);
                        true
                    } else {
                        false
                    }
                }
            };
            if done {
                return Ok(out);
            }
            if matches!(stop, StopRule::LevelDown { .. } | StopRule::LevelUp { .. })
                && (t_new - t0).abs() > controls.t_cap
            {
                return Err(Error::SolverStalled(format!(
                    "horizon {} exceeded before reaching stop level",
                    controls.t_cap
                )));
            }

            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            stepper.k.swap(0, 6); // FSAL
            let fac_max = if rejected { R::one() } else { R::of(10.0) };
            let fac = if err == R::zero() {
                fac_max
            } else {
                (R::of(0.9) * err.powf(-R::of(0.2))).min(fac_max).max(R::of(0.2))
            };
            h = h * fac;
            rejected = false;
        } else {
            rejected = true;
            let fac = (R::of(0.9) * err.powf(-R::of(0.2))).max(R::of(0.2)).min(R::one());
            h = h * fac;
        }
    }
    Err(Error::SolverStalled("max step count exceeded".into()))
}

/// Replace the final knot so the stop component lands on `level` (bisection on
/// the dense interpolant inside the last accepted step). Works for both time
/// directions by bisecting the segment parameter rather than absolute time.
fn cut_at_level<R: Real, S: OdeSystem<R>>(
    sys: &S,
    out: &mut SolvedSystem<R>,
    comp: usize,
    level: R,
    downward: bool,
) {
    let n = out.ts.len();
    debug_assert!(n >= 2);
    let h = out.ts[n - 1] - out.ts[n - 2];
    let seg = |s: R| -> R {
        segment_value(
            h,
            s,
            out.ys[n - 2][comp],
            out.d1[n - 2][comp],
            out.d2[n - 2][comp],
            out.ys[n - 1][comp],
            out.d1[n - 1][comp],
            out.d2[n - 1][comp],
        )
    };
    // s = 0 on the good side, s = 1 past the level.
    let (mut lo, mut hi) = (R::zero(), R::one());
    for _ in 0..80 {
        let mid = (lo + hi).half();
        if mid <= lo || mid >= hi {
            break;
        }
        let v = seg(mid);
        let past = if downward { v <= level } else { v >= level };
        if past {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t_cut = out.ts[n - 2] + h * hi;
    if t_cut == out.ts[n - 1] || hi == R::one() {
        return;
    }
    let dim = out.dim();
    let y_cut: Vec<R> = (0..dim)
        .map(|c| {
            segment_value(
                h,
                hi,
                out.ys[n - 2][c],
                out.d1[n - 2][c],
                out.d2[n - 2][c],
                out.ys[n - 1][c],
                out.d1[n - 1][c],
                out.d2[n - 1][c],
            )
        })
        .collect();
    let mut f_cut = vec![R::zero(); dim];
    sys.rhs(t_cut, &y_cut, &mut f_cut);
    let mut dd_cut = vec![R::zero(); dim];
    sys.rhs_dot(t_cut, &y_cut, &f_cut, &mut dd_cut);
    out.ts[n - 1] = t_cut;
    out.ys[n - 1] = y_cut;
    out.d1[n - 1] = f_cut;
    out.d2[n - 1] = dd_cut;
}
