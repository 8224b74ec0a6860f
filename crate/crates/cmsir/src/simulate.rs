//! Exact event-driven simulation of the SIR dynamics on the configuration
//! multigraph, revealing edges by dynamic half-edge pairing.
//!
//! Aggregate event rates (`beta * X_I` for pairings, `rho * I` for
//! recoveries) drive a Gillespie loop; free half-edges live in per-type
//! swap-remove pools so that uniform sampling and removal are O(1), the two
//! operations that dominate the O(m) event budget.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate_population, EpidemicRates, PopulationSpec, ValidationOptions};
use crate::rng::{stream_rng, SINGLE_RUN_STREAM};
use crate::scalar::Real;

const S: u8 = 0;
const I: u8 = 1;
const R_: u8 = 2;
const NONE: u32 = u32::MAX;

/// Free half-edges, bucketed by the owner's compartment. Each bucket is a
/// dense array supporting O(1) uniform sampling; `slot` is the exact inverse
/// (bucket, position) map, `NONE`-marked once a half-edge is paired.
#[derive(Clone, Debug)]
pub struct HalfEdgePool {
    free: [Vec<u32>; 3],
    slot_ty: Vec<u8>,
    slot_idx: Vec<u32>,
}

impl HalfEdgePool {
    pub fn with_capacity(half_edges: usize) -> Self {
        Self {
            free: [Vec::new(), Vec::new(), Vec::new()],
            slot_ty: vec![3; half_edges],
            slot_idx: vec![NONE; half_edges],
        }
    }

    pub fn insert(&mut self, he: u32, ty: u8) {
        debug_assert_eq!(self.slot_idx[he as usize], NONE);
        let bucket = &mut self.free[ty as usize];
        self.slot_ty[he as usize] = ty;
        self.slot_idx[he as usize] = bucket.len() as u32;
        bucket.push(he);
    }

    pub fn contains(&self, he: u32) -> bool {
        self.slot_idx[he as usize] != NONE
    }

    pub fn remove(&mut self, he: u32) {
        let ty = self.slot_ty[he as usize] as usize;
        let idx = self.slot_idx[he as usize];
        debug_assert_ne!(idx, NONE);
        let bucket = &mut self.free[ty];
        let last = *bucket.last().unwrap();
        bucket.swap_remove(idx as usize);
        if last != he {
            self.slot_idx[last as usize] = idx;
        }
        self.slot_idx[he as usize] = NONE;
        self.slot_ty[he as usize] = 3;
    }

    pub fn retype(&mut self, he: u32, to: u8) {
        self.remove(he);
        self.insert(he, to);
    }

    pub fn len(&self, ty: u8) -> usize {
        self.free[ty as usize].len()
    }

    pub fn total(&self) -> usize {
        self.free[0].len() + self.free[1].len() + self.free[2].len()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Uniform draw from one bucket.
    pub fn sample(&self, ty: u8, rng: &mut impl Rng) -> u32 {
        let bucket = &self.free[ty as usize];
        bucket[rng.random_range(0..bucket.len())]
    }

    /// Uniform draw over all free half-edges.
    pub fn sample_any(&self, rng: &mut impl Rng) -> u32 {
        let j = rng.random_range(0..self.total());
        let (l0, l1) = (self.free[0].len(), self.free[1].len());
        if j < l0 {
            self.free[0][j]
        } else if j < l0 + l1 {
            self.free[1][j - l0]
        } else {
            self.free[2][j - l0 - l1]
        }
    }

    /// All remaining free half-edges, in ascending id order.
    pub fn drain_sorted(&mut self) -> Vec<u32> {
        let mut all: Vec<u32> = self.free.iter().flatten().copied().collect();
        all.sort_unstable();
        for &he in &all {
            self.remove(he);
        }
        all
    }

    #[cfg(test)]
    fn check_consistency(&self) {
        for (ty, bucket) in self.free.iter().enumerate() {
            for (idx, &he) in bucket.iter().enumerate() {
                assert_eq!(self.slot_ty[he as usize], ty as u8);
                assert_eq!(self.slot_idx[he as usize], idx as u32);
            }
        }
        let marked = self.slot_idx.iter().filter(|&&s| s != NONE).count();
        assert_eq!(marked, self.total());
    }
}

/// Vertex states, degrees and half-edge ownership, plus a swap-remove pool of
/// infective vertices for O(1) uniform recovery draws.
#[derive(Clone, Debug)]
struct VertexTable {
    state: Vec<u8>,
    he_start: Vec<u32>,
    he_end: Vec<u32>,
    owner: Vec<u32>,
    s: u64,
    i: u64,
    r: u64,
    infective: Vec<u32>,
    infective_pos: Vec<u32>,
}

impl VertexTable {
    fn build(spec: &PopulationSpec) -> VertexTable {
        let n = spec.n() as usize;
        let m = spec.half_edges() as usize;
        let mut vt = VertexTable {
            state: Vec::with_capacity(n),
            he_start: Vec::with_capacity(n),
            he_end: Vec::with_capacity(n),
            owner: Vec::with_capacity(m),
            s: 0,
            i: 0,
            r: 0,
            infective: Vec::new(),
            infective_pos: vec![NONE; n],
        };
        let mut next_he = 0u32;
        for (ty, counts) in [
            (S, &spec.counts_s),
            (I, &spec.counts_i),
            (R_, &spec.counts_r),
        ] {
            for (&deg, &cnt) in counts {
                for _ in 0..cnt {
                    let v = vt.state.len() as u32;
                    vt.state.push(ty);
                    vt.he_start.push(next_he);
                    next_he += deg as u32;
                    vt.he_end.push(next_he);
                    for _ in 0..deg {
                        vt.owner.push(v);
                    }
                    match ty {
                        S => vt.s += 1,
                        I => {
                            vt.i += 1;
                            vt.infective_pos[v as usize] = vt.infective.len() as u32;
                            vt.infective.push(v);
                        }
                        _ => vt.r += 1,
                    }
                }
            }
        }
        vt
    }

    fn sample_infective(&self, rng: &mut impl Rng) -> u32 {
        self.infective[rng.random_range(0..self.infective.len())]
    }

    fn mark_infective(&mut self, v: u32) {
        debug_assert_eq!(self.state[v as usize], S);
        self.state[v as usize] = I;
        self.s -= 1;
        self.i += 1;
        self.infective_pos[v as usize] = self.infective.len() as u32;
        self.infective.push(v);
    }

    fn mark_recovered(&mut self, v: u32) {
        debug_assert_eq!(self.state[v as usize], I);
        self.state[v as usize] = R_;
        self.i -= 1;
        self.r += 1;
        let pos = self.infective_pos[v as usize];
        let last = *self.infective.last().unwrap();
        self.infective.swap_remove(pos as usize);
        if last != v {
            self.infective_pos[last as usize] = pos;
        }
        self.infective_pos[v as usize] = NONE;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Init,
    Pair,
    Recover,
    Stop,
    /// Grid-mode snapshot (no state change of its own).
    Sample,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Init => "init",
            EventKind::Pair => "pair",
            EventKind::Recover => "recover",
            EventKind::Stop => "stop",
            EventKind::Sample => "sample",
        }
    }
}

/// Vertex and free-half-edge counters after an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Counts {
    pub s: u64,
    pub i: u64,
    pub r: u64,
    pub x_s: u64,
    pub x_i: u64,
    pub x_r: u64,
    pub x: u64,
}

/// Time-stamped record of one run.
#[derive(Clone, Debug)]
pub struct Trajectory<R> {
    pub n: u64,
    pub times: Vec<R>,
    pub kinds: Vec<EventKind>,
    pub counts: Vec<Counts>,
    /// Time at which the last free infective half-edge disappeared.
    pub t_stop: R,
    /// Susceptibles that escape infection.
    pub s_inf: u64,
}

impl<R: Real> Trajectory<R> {
    pub fn initial(&self) -> &Counts {
        &self.counts[0]
    }

    /// Step-function value at time `t` (right-continuous, clamped).
    pub fn at(&self, t: R) -> &Counts {
        let idx = self.times.partition_point(|&tt| tt <= t);
        &self.counts[idx.saturating_sub(1)]
    }

    /// Number of recorded pairing/recovery events.
    pub fn event_count(&self) -> u64 {
        self.kinds
            .iter()
            .filter(|k| matches!(k, EventKind::Pair | EventKind::Recover))
            .count() as u64
    }
}

/// What to keep while running.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RecordMode<R> {
    /// Every event (default up to populations of 1e5 vertices).
    All,
    /// Counter snapshots on a fixed time grid, for memory control at scale.
    Grid { dt: R },
}

#[derive(Clone, Copy, Debug)]
pub struct RunOpts<R> {
    pub record: RecordMode<R>,
    /// Pair the leftover free half-edges at the end and report simplicity of
    /// the full revealed multigraph.
    pub residual_pairing: bool,
    /// Keep simulating pure recoveries after the epidemic stops, so infective
    /// counts remain comparable with the limit on long horizons.
    pub post_stop_decay: bool,
}

impl<R: Real> Default for RunOpts<R> {
    fn default() -> Self {
        Self {
            record: RecordMode::All,
            residual_pairing: false,
            post_stop_decay: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimOutcome<R> {
    pub trajectory: Trajectory<R>,
    /// Edges revealed by the final uniform pairing, as vertex pairs.
    pub residual_edges: Option<Vec<(u32, u32)>>,
    /// No self-loops and no repeated vertex pairs across all revealed edges.
    pub is_simple: Option<bool>,
    pub seed: u64,
}

fn exponential_step<R: Real>(rng: &mut impl Rng, rate: R) -> R {
    // Draw u in (0, 1); -ln(u)/rate is Exp(rate) and strictly positive.
    let mut u: f64 = rng.random();
    while u <= 0.0 {
        u = rng.random();
    }
    -R::of(u).ln() / rate
}

struct Recorder<R> {
    mode: RecordMode<R>,
    times: Vec<R>,
    kinds: Vec<EventKind>,
    counts: Vec<Counts>,
    next_grid: R,
}

impl<R: Real> Recorder<R> {
    fn new(mode: RecordMode<R>) -> Self {
        Self {
            mode,
            times: Vec::new(),
            kinds: Vec::new(),
            counts: Vec::new(),
            next_grid: R::zero(),
        }
    }

    fn push(&mut self, t: R, kind: EventKind, counts: Counts) {
        self.times.push(t);
        self.kinds.push(kind);
        self.counts.push(counts);
    }

    /// Record an event at time `t`; in grid mode, snapshot the pre-event state
    /// at every grid point passed since the previous event instead.
    fn event(&mut self, t: R, kind: EventKind, before: Counts, after: Counts) {
        match self.mode {
            RecordMode::All => self.push(t, kind, after),
            RecordMode::Grid { dt } => {
                while self.next_grid < t {
                    let g = self.next_grid;
                    self.push(g, EventKind::Sample, before);
                    self.next_grid = g + dt;
                }
            }
        }
    }
}

struct Sim<'a, R: Real> {
    rates: &'a EpidemicRates<R>,
    vt: VertexTable,
    pool: HalfEdgePool,
    dyn_edges: Option<Vec<(u32, u32)>>,
}

impl<R: Real> Sim<'_, R> {
    fn counts(&self) -> Counts {
        Counts {
            s: self.vt.s,
            i: self.vt.i,
            r: self.vt.r,
            x_s: self.pool.len(S) as u64,
            x_i: self.pool.len(I) as u64,
            x_r: self.pool.len(R_) as u64,
            x: self.pool.total() as u64,
        }
    }

    /// Move every still-free half-edge of `v` to bucket `to`.
    fn retype_free_half_edges(&mut self, v: u32, to: u8) {
        for he in self.vt.he_start[v as usize]..self.vt.he_end[v as usize] {
            if self.pool.contains(he) {
                self.pool.retype(he, to);
            }
        }
    }

    fn pair_event(&mut self, rng: &mut impl Rng) {
        let h = self.pool.sample(I, rng);
        self.pool.remove(h);
        // With h gone, a uniform draw over the pool is exactly a uniform draw
        // over the other free half-edges.
        let h2 = self.pool.sample_any(rng);
        let partner_ty = self.pool.slot_ty[h2 as usize];
        self.pool.remove(h2);
        if let Some(edges) = self.dyn_edges.as_mut() {
            edges.push((self.vt.owner[h as usize], self.vt.owner[h2 as usize]));
        }
        if partner_ty == S {
            let v = self.vt.owner[h2 as usize];
            self.vt.mark_infective(v);
            self.retype_free_half_edges(v, I);
        }
    }

    fn recover_event(&mut self, rng: &mut impl Rng) {
        let v = self.vt.sample_infective(rng);
        self.vt.mark_recovered(v);
        self.retype_free_half_edges(v, R_);
    }
}

/// Run one epidemic. Deterministic given `(spec, rates, seed, opts)`.
pub fn run_epidemic<R: Real>(
    spec: &PopulationSpec,
    rates: &EpidemicRates<R>,
    seed: u64,
    opts: &RunOpts<R>,
) -> Result<SimOutcome<R>> {
    let mut rng = stream_rng(seed, SINGLE_RUN_STREAM);
    run_epidemic_with_rng(spec, rates, &mut rng, seed, opts)
}

/// Run one epidemic with a caller-provided generator (ensemble replicas pass
/// their own substream); `label` is echoed into the outcome.
pub fn run_epidemic_with_rng<R: Real>(
    spec: &PopulationSpec,
    rates: &EpidemicRates<R>,
    rng: &mut impl Rng,
    label: u64,
    opts: &RunOpts<R>,
) -> Result<SimOutcome<R>> {
    let report = validate_population(spec, rates, &ValidationOptions::default());
    if report.blocks_simulation() {
        return Err(Error::Validation(
            report
                .violations
                .iter()
                .map(|v| format!("{}: {}", v.condition, v.message))
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    if spec.half_edges() >= u32::MAX as u64 {
        return Err(Error::Validation("too many half-edges".into()));
    }

    let vt = VertexTable::build(spec);
    let mut pool = HalfEdgePool::with_capacity(vt.owner.len());
    for (he, &v) in vt.owner.iter().enumerate() {
        pool.insert(he as u32, vt.state[v as usize]);
    }
    let mut sim = Sim {
        rates,
        vt,
        pool,
        dyn_edges: opts.residual_pairing.then(Vec::new),
    };

    let mut recorder = Recorder::new(opts.record);
    let mut t = R::zero();
    recorder.push(t, EventKind::Init, sim.counts());
    if let RecordMode::Grid { dt } = opts.record {
        recorder.next_grid = dt;
    }

    while sim.pool.len(I) > 0 {
        let x_i = R::of_usize(sim.pool.len(I));
        let rate_pair = sim.rates.beta * x_i;
        let rate_rec = sim.rates.rho * R::of_u64(sim.vt.i);
        let total_rate = rate_pair + rate_rec;
        let before = sim.counts();
        t = t + exponential_step(rng, total_rate);
        let pairing = if sim.rates.rho == R::zero() {
            true
        } else {
            let u: f64 = rng.random();
            R::of(u) * total_rate < rate_pair
        };
        let kind = if pairing {
            sim.pair_event(rng);
            EventKind::Pair
        } else {
            sim.recover_event(rng);
            EventKind::Recover
        };
        recorder.event(t, kind, before, sim.counts());
    }

    let t_stop = t;
    let s_inf = sim.vt.s;
    recorder.push(t_stop, EventKind::Stop, sim.counts());

    if opts.post_stop_decay && rates.rho > R::zero() {
        while sim.vt.i > 0 {
            let before = sim.counts();
            t = t + exponential_step(rng, sim.rates.rho * R::of_u64(sim.vt.i));
            sim.recover_event(rng);
            recorder.event(t, EventKind::Recover, before, sim.counts());
        }
    }

    let (residual_edges, is_simple) = if opts.residual_pairing {
        let residual = complete_residual_pairing(&mut sim.pool, &sim.vt.owner, rng);
        let mut all = sim.dyn_edges.take().unwrap();
        all.extend_from_slice(&residual);
        let simple = is_simple_multigraph(spec.n(), &all);
        (Some(residual), Some(simple))
    } else {
        (None, None)
    };

    Ok(SimOutcome {
        trajectory: Trajectory {
            n: spec.n(),
            times: recorder.times,
            kinds: recorder.kinds,
            counts: recorder.counts,
            t_stop,
            s_inf,
        },
        residual_edges,
        is_simple,
        seed: label,
    })
}

/// Pair off all remaining free half-edges uniformly, returning vertex pairs.
/// Requires that no free infective half-edge remains.
pub fn complete_residual_pairing(
    pool: &mut HalfEdgePool,
    owner: &[u32],
    rng: &mut impl Rng,
) -> Vec<(u32, u32)> {
    assert_eq!(pool.len(I), 0, "free infective half-edges remain");
    let mut rest = pool.drain_sorted();
    assert!(rest.len().is_multiple_of(2), "odd number of free half-edges");
    let mut edges = Vec::with_capacity(rest.len() / 2);
    while rest.len() > 1 {
        // Match the first half-edge with a uniform partner; sequentially this
        // yields a uniform perfect matching.
        let j = rng.random_range(1..rest.len());
        let a = rest[0];
        let b = rest[j];
        rest.swap_remove(j);
        rest.swap_remove(0);
        edges.push((owner[a as usize], owner[b as usize]));
    }
    edges
}

/// No self-loop and no repeated (unordered) vertex pair.
pub fn is_simple_multigraph(n: u64, edges: &[(u32, u32)]) -> bool {
    let mut seen = std::collections::HashSet::with_capacity(edges.len());
    for &(a, b) in edges {
        if a == b {
            return false;
        }
        let key = (a.min(b) as u64) * n + a.max(b) as u64;
        if !seen.insert(key) {
            return false;
        }
    }
    true
}

/// Empirical `T_*`: first recorded time at which the susceptible fraction has
/// fallen to `s0`, or `None` if it never does.
pub fn detect_t_star<R: Real>(trajectory: &Trajectory<R>, s0: R) -> Result<Option<R>> {
    let n = R::of_u64(trajectory.n);
    let alpha_s_hat = R::of_u64(trajectory.initial().s) / n;
    if !(s0 > R::zero() && s0 < alpha_s_hat) {
        return Err(Error::UnreachableThreshold {
            s0: s0.to_f64().unwrap_or(f64::NAN),
            alpha_s_hat: alpha_s_hat.to_f64().unwrap_or(f64::NAN),
        });
    }
    for (j, c) in trajectory.counts.iter().enumerate() {
        if R::of_u64(c.s) <= s0 * n {
            return Ok(Some(trajectory.times[j]));
        }
    }
    Ok(None)
}

/// Replay a trajectory checking every conservation and monotonicity rule;
/// returns the number of pairing/recovery events inspected.
pub fn check_trajectory_invariants<R: Real>(traj: &Trajectory<R>) -> Result<u64> {
    let fail = |msg: String| Err(Error::Validation(format!("trajectory invariant: {msg}")));
    if traj.counts.is_empty() || traj.kinds[0] != EventKind::Init {
        return fail("missing init record".into());
    }
    let mut events = 0u64;
    for (j, c) in traj.counts.iter().enumerate() {
        if c.s + c.i + c.r != traj.n {
            return fail(format!("S+I+R != n at row {j}"));
        }
        if c.x_s + c.x_i + c.x_r != c.x {
            return fail(format!("X_S+X_I+X_R != X at row {j}"));
        }
        if j == 0 {
            continue;
        }
        let p = &traj.counts[j - 1];
        let (t, tp) = (traj.times[j], traj.times[j - 1]);
        match traj.kinds[j] {
            EventKind::Pair | EventKind::Recover => {
                if !(t > tp) {
                    return fail(format!("event time did not increase at row {j}"));
                }
            }
            _ => {
                if t < tp {
                    return fail(format!("time decreased at row {j}"));
                }
            }
        }
        if c.s > p.s {
            return fail(format!("S increased at row {j}"));
        }
        if c.r < p.r {
            return fail(format!("R decreased at row {j}"));
        }
        if c.x_s > p.x_s {
            return fail(format!("X_S increased at row {j}"));
        }
        match traj.kinds[j] {
            EventKind::Pair => {
                events += 1;
                if p.x - c.x != 2 {
                    return fail(format!("pairing changed X by {} at row {j}", p.x - c.x));
                }
            }
            EventKind::Recover => {
                events += 1;
                if c.x != p.x {
                    return fail(format!("recovery changed X at row {j}"));
                }
                if p.i - c.i != 1 || c.r - p.r != 1 {
                    return fail(format!("recovery miscounted at row {j}"));
                }
            }
            _ => {
                if c != p {
                    return fail(format!("marker row changed counters at row {j}"));
                }
            }
        }
    }
    Ok(events)
}
