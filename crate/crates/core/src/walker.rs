//! Monte Carlo paths of the process with transition density `Z(x - y, t)`,
//! observed on a uniform time grid.
//!
//! Increments over one step are i.i.d. with radial density `Z(., dt)`, so
//! the grid walk is the process itself at grid times.
//!
//! Two modes are offered. [`WalkMode::Full`] adds digit vectors step by step.
//! [`WalkMode::NormsOnly`] tracks only the law of the position: either
//! uniform on a ball `B_b` (the origin is `b = -inf`) or uniform on a sphere
//! `S_a`. An increment below the current scale changes nothing, so the walk
//! jumps straight to the next step with an increment at or above it, a
//! geometric waiting time. When the increment lies on the same sphere as the
//! position the new norm depends on digits, and both are drawn in full and
//! added.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatkernel::HeatKernelModel;
use crate::padic::{self, PadicPoint, Radius, ShellIndex, DEFAULT_PRECISION};

/// Neglected increment mass on each side of the level range.
const SIDE_MASS: f64 = 1e-11;
const MIN_RETAINED: f64 = 1.0 - 1e-9;
const LEVEL_LIMIT: i32 = 2000;

/// Law of the norm of one increment over `dt`, on levels `lo..=hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementLaw {
    lo: i32,
    hi: i32,
    /// `suffix[i] = P(level >= lo + i)`, normalized; one trailing zero.
    suffix: Vec<f64>,
    retained: f64,
}

impl IncrementLaw {
    pub fn new(model: &HeatKernelModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let mut lo = 0;
        while model.radius_cdf(lo - 1, dt)? > SIDE_MASS {
            lo -= 1;
            if lo < -LEVEL_LIMIT {
                return Err(Error::TruncationMass { retained: 0.0 });
            }
        }
        let mut hi = 0;
        while model.radius_cdf_complement(hi, dt)? > SIDE_MASS {
            hi += 1;
            if hi > LEVEL_LIMIT {
                return Err(Error::TruncationMass { retained: 0.0 });
            }
        }
        let s = model.space();
        let z = model.z_profile(lo, hi, dt)?;
        let mass: Vec<f64> = (lo..=hi).zip(&z).map(|(m, z)| s.shell_volume(m) * z).collect();
        let mut suffix = vec![0.0; mass.len() + 1];
        for i in (0..mass.len()).rev() {
            suffix[i] = suffix[i + 1] + mass[i];
        }
        let retained = suffix[0];
        if !(retained >= MIN_RETAINED) {
            return Err(Error::TruncationMass { retained });
        }
        for v in &mut suffix {
            *v /= retained;
        }
        Ok(IncrementLaw { lo, hi, suffix, retained })
    }

    pub fn levels(&self) -> (i32, i32) {
        (self.lo, self.hi)
    }

    /// Mass of the level range before normalization.
    pub fn retained_mass(&self) -> f64 {
        self.retained
    }

    /// `P(level >= a)`.
    pub fn tail(&self, a: i32) -> f64 {
        if a <= self.lo {
            1.0
        } else if a > self.hi {
            0.0
        } else {
            self.suffix[(a - self.lo) as usize]
        }
    }

    /// `P(level <= m)`.
    pub fn cdf(&self, m: i32) -> f64 {
        1.0 - self.tail(m + 1)
    }

    pub fn sample_level<R: Rng + ?Sized>(&self, rng: &mut R) -> i32 {
        self.sample_level_at_least(self.lo, rng)
    }

    /// A level drawn from the law conditioned on `level >= a`; `a` must not
    /// exceed `hi`.
    pub fn sample_level_at_least<R: Rng + ?Sized>(&self, a: i32, rng: &mut R) -> i32 {
        let a = a.max(self.lo);
        let target = rng.random::<f64>() * self.tail(a);
        // largest m >= a with suffix(m) > target
        let (mut l, mut r) = (a, self.hi);
        while l < r {
            let mid = l + (r - l + 1) / 2;
            if self.tail(mid) > target {
                l = mid;
            } else {
                r = mid - 1;
            }
        }
        l
    }
}

/// One increment: a level from the law, then a Haar-uniform point on it.
pub fn sample_increment<R: Rng + ?Sized>(
    model: &HeatKernelModel,
    law: &IncrementLaw,
    precision: usize,
    rng: &mut R,
) -> PadicPoint {
    let m = law.sample_level(rng);
    padic::sample_uniform_on_shell(ShellIndex(m), model.space(), precision, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    Origin,
    /// Haar-uniform on Z_p^n.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkMode {
    Full,
    NormsOnly,
}

#[derive(Clone, Debug)]
pub struct WalkConfig {
    pub model: HeatKernelModel,
    pub dt: f64,
    /// Number of steps; the horizon is `steps * dt`.
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub precision: usize,
    pub start: Start,
    pub mode: WalkMode,
    /// Steps at which membership in Z_p^n is recorded.
    pub observe: Vec<usize>,
    pub trace: bool,
    pub workers: usize,
}

impl WalkConfig {
    /// Uniform start, norms-only mode, no observations.
    pub fn new(model: HeatKernelModel, dt: f64, horizon: f64, paths: usize, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let k = (horizon / dt).round();
        if !(k >= 1.0) || (k * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
            return Err(Error::InvalidParameter(format!(
                "horizon {horizon} is not a positive multiple of the time step {dt}"
            )));
        }
        let cfg = WalkConfig {
            model,
            dt,
            steps: k as usize,
            paths,
            seed,
            precision: DEFAULT_PRECISION,
            start: Start::Uniform,
            mode: WalkMode::NormsOnly,
            observe: Vec::new(),
            trace: false,
            workers: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || self.steps == 0 {
            return Err(Error::InvalidParameter("walk needs dt > 0 and at least one step".into()));
        }
        if self.paths == 0 {
            return Err(Error::InvalidParameter("walk needs at least one path".into()));
        }
        if self.precision == 0 {
            return Err(Error::InvalidParameter("precision must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("need at least one worker".into()));
        }
        if self.observe.windows(2).any(|w| w[0] >= w[1]) || self.observe.last().is_some_and(|&k| k > self.steps) {
            return Err(Error::InvalidParameter("observation steps must increase and lie within the horizon".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRecord {
    pub path_index: u64,
    /// First step with the position outside Z_p^n.
    pub exit_step: Option<usize>,
    /// First step after `exit_step` back in Z_p^n; `None` is censored.
    pub return_step: Option<usize>,
    /// Membership in Z_p^n at each observation step.
    pub occupancy: Vec<bool>,
    /// Additions whose digits cancelled across the whole window, leaving
    /// the norm unresolved. A carry off the low end of the window only
    /// drops digits far below the norm and is not counted.
    pub precision_events: u32,
    /// `(step, |X|)` at every change of norm, when requested.
    pub trace: Option<Vec<(usize, Radius)>>,
}

/// Norm-level knowledge of the position in norms-only mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    /// Uniform on the ball of level `b`; `None` is the origin.
    Ball(Option<i32>),
    /// Uniform on the sphere of level `a`.
    Sphere(i32),
}

impl State {
    fn inside(self) -> bool {
        match self {
            State::Ball(b) => b.is_none_or(|b| b <= 0),
            State::Sphere(a) => a <= 0,
        }
    }

    /// Increments at or above this level change the state.
    fn threshold(self) -> Option<i32> {
        match self {
            State::Ball(b) => b.map(|b| b + 1),
            State::Sphere(a) => Some(a),
        }
    }

    fn radius(self) -> Radius {
        match self {
            State::Ball(None) => Radius::Origin,
            State::Ball(Some(b)) => Radius::Level(b),
            State::Sphere(a) => Radius::Level(a),
        }
    }
}

/// Running bookkeeping shared by both modes.
struct Tracker {
    rec: PathRecord,
    next_obs: usize,
}

impl Tracker {
    fn new(path_index: u64, trace: bool, start: Radius) -> Self {
        Tracker {
            rec: PathRecord {
                path_index,
                exit_step: None,
                return_step: None,
                occupancy: Vec::new(),
                precision_events: 0,
                trace: trace.then(|| vec![(0, start)]),
            },
            next_obs: 0,
        }
    }

    /// Records observations for steps before `step` with the old membership.
    fn advance(&mut self, cfg: &WalkConfig, step: usize, inside_before: bool) {
        while self.next_obs < cfg.observe.len() && cfg.observe[self.next_obs] < step {
            self.rec.occupancy.push(inside_before);
            self.next_obs += 1;
        }
    }

    fn visit(&mut self, step: usize, inside: bool, r: Radius) {
        if let Some(t) = &mut self.rec.trace {
            if t.last().is_none_or(|&(_, last)| last != r) {
                t.push((step, r));
            }
        }
        match (self.rec.exit_step, inside) {
            (None, false) => self.rec.exit_step = Some(step),
            (Some(_), true) if self.rec.return_step.is_none() => self.rec.return_step = Some(step),
            _ => {}
        }
    }

    fn done(&self, cfg: &WalkConfig, step: usize) -> bool {
        self.rec.return_step.is_some() && self.rec.trace.is_none() && cfg.observe.last().is_none_or(|&k| k < step)
    }

    fn finish(mut self, cfg: &WalkConfig, inside: bool) -> PathRecord {
        self.advance(cfg, cfg.steps + 1, inside);
        self.rec
    }
}

/// A configured walk with its increment law.
#[derive(Clone, Debug)]
pub struct Walker {
    cfg: WalkConfig,
    law: IncrementLaw,
}

impl Walker {
    pub fn new(cfg: WalkConfig) -> Result<Self> {
        cfg.validate()?;
        let law = IncrementLaw::new(&cfg.model, cfg.dt)?;
        Ok(Walker { cfg, law })
    }

    pub fn config(&self) -> &WalkConfig {
        &self.cfg
    }

    pub fn law(&self) -> &IncrementLaw {
        &self.law
    }

    pub fn rng(&self, path_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(path_index);
        rng
    }

    /// The path with index `path_index`, fully determined by it and the seed.
    pub fn simulate_path(&self, path_index: u64) -> PathRecord {
        let mut rng = self.rng(path_index);
        match self.cfg.mode {
            WalkMode::Full => self.full_path(path_index, &mut rng),
            WalkMode::NormsOnly => self.norms_path(path_index, &mut rng),
        }
    }

    fn full_path(&self, path_index: u64, rng: &mut ChaCha8Rng) -> PathRecord {
        let cfg = &self.cfg;
        let space = cfg.model.space();
        let mut x = match cfg.start {
            Start::Origin => PadicPoint::zero(space, cfg.precision),
            Start::Uniform => padic::sample_uniform_in_ball(ShellIndex(0), space, cfg.precision, rng),
        };
        let mut tr = Tracker::new(path_index, cfg.trace, x.radius());
        for step in 1..=cfg.steps {
            let before = x.in_ball(0);
            tr.advance(cfg, step, before);
            let inc = sample_increment(&cfg.model, &self.law, cfg.precision, rng);
            let out = x.add(&inc).expect("operands share space and precision");
            if out.cancelled >= cfg.precision {
                tr.rec.precision_events += 1;
            }
            x = out.sum;
            tr.visit(step, x.in_ball(0), x.radius());
            if tr.done(cfg, step) {
                break;
            }
        }
        let inside = x.in_ball(0);
        tr.finish(cfg, inside)
    }

    /// Norm after adding a uniform increment on `S_a` to a uniform point on
    /// `S_a`, from materialized digits.
    fn tie(&self, a: i32, rng: &mut ChaCha8Rng, tr: &mut Tracker) -> State {
        let cfg = &self.cfg;
        let space = cfg.model.space();
        let x = padic::sample_uniform_on_shell(ShellIndex(a), space, cfg.precision, rng);
        let y = padic::sample_uniform_on_shell(ShellIndex(a), space, cfg.precision, rng);
        let out = x.add(&y).expect("operands share space and precision");
        if out.cancelled >= cfg.precision {
            tr.rec.precision_events += 1;
        }
        match out.sum.radius() {
            Radius::Origin => State::Ball(None),
            Radius::Level(l) => State::Sphere(l),
        }
    }

    fn norms_path(&self, path_index: u64, rng: &mut ChaCha8Rng) -> PathRecord {
        let cfg = &self.cfg;
        let mut state = match cfg.start {
            Start::Origin => State::Ball(None),
            Start::Uniform => State::Ball(Some(0)),
        };
        let mut tr = Tracker::new(path_index, cfg.trace, state.radius());
        let mut step = 0usize;
        loop {
            let q = state.threshold().map_or(1.0, |a| self.law.tail(a));
            if q <= 0.0 {
                break;
            }
            let skip = if q >= 1.0 {
                1
            } else {
                let u = 1.0 - rng.random::<f64>();
                ((u.ln() / (-q).ln_1p()).ceil() as usize).max(1)
            };
            step = step.saturating_add(skip);
            if step > cfg.steps {
                break;
            }
            tr.advance(cfg, step, state.inside());
            let m = match state.threshold() {
                Some(a) => self.law.sample_level_at_least(a, rng),
                None => self.law.sample_level(rng),
            };
            state = match state {
                State::Sphere(a) if m == a => self.tie(a, rng, &mut tr),
                _ => State::Sphere(m),
            };
            tr.visit(step, state.inside(), state.radius());
            if tr.done(cfg, step) {
                break;
            }
        }
        tr.finish(cfg, state.inside())
    }

    /// All paths, in index order, on `workers` threads.
    pub fn run(&self) -> Result<Vec<PathRecord>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        Ok(pool.install(|| (0..self.cfg.paths as u64).into_par_iter().map(|i| self.simulate_path(i)).collect()))
    }

    pub fn estimate_fpt(&self) -> Result<FptEstimate> {
        Ok(FptEstimate::from_records(&self.run()?, self.cfg.steps, self.cfg.dt))
    }

    pub fn estimate_return_probability(&self) -> Result<ReturnEstimate> {
        ReturnEstimate::from_records(&self.run()?)
    }
}

/// Empirical law of the return time on the step grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FptEstimate {
    pub dt: f64,
    pub paths: usize,
    /// `counts[k]`: paths with return step `k`.
    pub counts: Vec<u64>,
    pub censored: u64,
}

impl FptEstimate {
    pub fn from_records(records: &[PathRecord], steps: usize, dt: f64) -> Self {
        let mut counts = vec![0u64; steps + 1];
        let mut censored = 0;
        for r in records {
            match r.return_step {
                Some(k) => counts[k] += 1,
                None => censored += 1,
            }
        }
        FptEstimate { dt, paths: records.len(), counts, censored }
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.paths as f64
    }

    pub fn returned_fraction(&self) -> f64 {
        1.0 - self.censored_fraction()
    }

    /// `(bin start time, count)` for bins of `width` steps; the bin starting
    /// at `k dt` holds return steps `k + 1 ..= k + width`.
    pub fn histogram(&self, width: usize) -> Vec<(f64, u64)> {
        let width = width.max(1);
        let last = self.counts.len() - 1;
        (0..last.div_ceil(width))
            .map(|b| {
                let k0 = b * width;
                let c = self.counts[k0 + 1..=(k0 + width).min(last)].iter().sum();
                (k0 as f64 * self.dt, c)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnEstimate {
    pub estimate: f64,
    /// 95% normal-approximation interval.
    pub ci: (f64, f64),
    pub exited: u64,
    pub returned: u64,
}

impl ReturnEstimate {
    pub fn from_records(records: &[PathRecord]) -> Result<Self> {
        let exited = records.iter().filter(|r| r.exit_step.is_some()).count() as u64;
        let returned = records.iter().filter(|r| r.return_step.is_some()).count() as u64;
        if exited == 0 {
            return Err(Error::Degenerate("no path left Z_p^n; raise kappa or the horizon".into()));
        }
        let p = returned as f64 / exited as f64;
        let half = 1.96 * (p * (1.0 - p) / exited as f64).sqrt();
        Ok(ReturnEstimate { estimate: p, ci: (p - half, p + half), exited, returned })
    }
}
