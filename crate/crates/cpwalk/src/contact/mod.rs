//! Contact-process configurations evolved over an event log.
//!
//! A configuration assigns one bit per site of the window (1 = infected).
//! Evolution sweeps the log in time order: a cross heals an infected site,
//! an arrow across a bond with exactly one infected endpoint infects the
//! other. Because every initial configuration is driven by the same log,
//! evolution is monotone: `eta <= eta'` implies the evolved states stay
//! ordered at all times.

pub mod cluster;

use crate::events::EventLog;
use crate::model::Window;
use crate::rng::SubStream;
use rand::Rng;
use thiserror::Error;

const ARROW_BIT: u32 = 1 << 31;

#[derive(Debug, Error)]
pub enum ContactError {
    #[error("query time {t} exceeds the log horizon {horizon}")]
    OutOfRange { t: f64, horizon: f64 },
    #[error("configuration spans {conf} sites but the window spans {window}")]
    WindowMismatch { conf: usize, window: usize },
    #[error("bad configuration string: {0}")]
    Parse(String),
}

/// One bit per site of a window; bit set means infected.
#[derive(Clone, PartialEq, Eq)]
pub struct Configuration {
    x_min: i64,
    len: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Configuration({}..{}: ", self.x_min, self.x_max())?;
        for i in 0..self.len.min(80) {
            write!(f, "{}", u8::from(self.get(self.x_min + i as i64)))?;
        }
        if self.len > 80 {
            write!(f, "…")?;
        }
        write!(f, ")")
    }
}

impl Configuration {
    pub fn empty(window: &Window) -> Self {
        let len = window.width();
        Self {
            x_min: window.x_min,
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn full(window: &Window) -> Self {
        let mut c = Self::empty(window);
        for w in &mut c.words {
            *w = u64::MAX;
        }
        c.clear_tail();
        c
    }

    pub fn single(window: &Window, x: i64) -> Self {
        let mut c = Self::empty(window);
        c.set(x, true);
        c
    }

    pub fn bernoulli(window: &Window, p: f64, stream: &mut SubStream) -> Self {
        let mut c = Self::empty(window);
        for i in 0..c.len {
            if stream.rng.gen::<f64>() < p {
                c.set(window.x_min + i as i64, true);
            }
        }
        c
    }

    fn clear_tail(&mut self) {
        let used = self.len % 64;
        if used != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << used) - 1;
            }
        }
    }

    pub fn x_min(&self) -> i64 {
        self.x_min
    }

    pub fn x_max(&self) -> i64 {
        self.x_min + self.len as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn in_range(&self, x: i64) -> bool {
        x >= self.x_min && x <= self.x_max()
    }

    #[inline]
    pub fn get(&self, x: i64) -> bool {
        debug_assert!(self.in_range(x));
        let i = (x - self.x_min) as usize;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: i64, infected: bool) {
        debug_assert!(self.in_range(x));
        let i = (x - self.x_min) as usize;
        if infected {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn density(&self) -> f64 {
        self.count_ones() as f64 / self.len as f64
    }

    /// Pointwise `self(x) <= other(x)`.
    pub fn leq(&self, other: &Self) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = i64> + '_ {
        let x_min = self.x_min;
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(x_min + (wi * 64 + b) as i64)
                }
            })
        })
    }

    pub fn next_one_at_or_after(&self, x: i64) -> Option<i64> {
        if x > self.x_max() {
            return None;
        }
        let start = (x.max(self.x_min) - self.x_min) as usize;
        let mut wi = start / 64;
        let mut w = self.words[wi] & (u64::MAX << (start % 64));
        loop {
            if w != 0 {
                let i = wi * 64 + w.trailing_zeros() as usize;
                return (i < self.len).then(|| self.x_min + i as i64);
            }
            wi += 1;
            if wi == self.words.len() {
                return None;
            }
            w = self.words[wi];
        }
    }

    pub fn prev_one_at_or_before(&self, x: i64) -> Option<i64> {
        if x < self.x_min {
            return None;
        }
        let start = (x.min(self.x_max()) - self.x_min) as usize;
        let mut wi = start / 64;
        let shift = 63 - start % 64;
        let mut w = self.words[wi] << shift >> shift;
        loop {
            if w != 0 {
                let i = wi * 64 + 63 - w.leading_zeros() as usize;
                return Some(self.x_min + i as i64);
            }
            if wi == 0 {
                return None;
            }
            wi -= 1;
            w = self.words[wi];
        }
    }

    /// Copy with every site `>= z` set healthy.
    pub fn restricted_below(&self, z: i64) -> Self {
        let mut c = self.clone();
        let mut x = z.max(c.x_min);
        while let Some(y) = c.next_one_at_or_after(x) {
            c.set(y, false);
            x = y + 1;
        }
        c
    }

    /// ASCII form: `x_min x_max bits`, e.g. `-2 2 01100`.
    pub fn to_ascii(&self) -> String {
        let mut s = format!("{} {} ", self.x_min, self.x_max());
        for i in 0..self.len {
            s.push(if self.get(self.x_min + i as i64) { '1' } else { '0' });
        }
        s
    }

    pub fn from_ascii(s: &str) -> Result<Self, ContactError> {
        let bad = |m: &str| ContactError::Parse(m.to_string());
        let mut it = s.split_whitespace();
        let x_min: i64 = it
            .next()
            .ok_or_else(|| bad("missing x_min"))?
            .parse()
            .map_err(|_| bad("x_min not an integer"))?;
        let x_max: i64 = it
            .next()
            .ok_or_else(|| bad("missing x_max"))?
            .parse()
            .map_err(|_| bad("x_max not an integer"))?;
        let bits = it.next().ok_or_else(|| bad("missing bits"))?;
        if x_max < x_min || bits.len() != (x_max - x_min + 1) as usize {
            return Err(bad("bit string length does not match bounds"));
        }
        let len = bits.len();
        let mut c = Self {
            x_min,
            len,
            words: vec![0; len.div_ceil(64)],
        };
        for (i, ch) in bits.chars().enumerate() {
            match ch {
                '1' => c.set(x_min + i as i64, true),
                '0' => {}
                _ => return Err(bad("bits must be 0 or 1")),
            }
        }
        Ok(c)
    }
}

/// Apply one event to `state`; returns the flipped site and its new value,
/// if any.
#[inline]
pub(crate) fn apply_event(state: &mut Configuration, x_min: i64, code: u32) -> Option<(i64, bool)> {
    if code & ARROW_BIT == 0 {
        let x = x_min + code as i64;
        if state.get(x) {
            state.set(x, false);
            return Some((x, false));
        }
    } else {
        let x = x_min + (code & !ARROW_BIT) as i64;
        let a = state.get(x);
        let b = state.get(x + 1);
        if a != b {
            let target = if a { x + 1 } else { x };
            state.set(target, true);
            return Some((target, true));
        }
    }
    None
}

/// State at time `t` when started from `eta` at time 0, including the effect
/// of events at exactly `t`.
pub fn evolve(eta: &Configuration, log: &EventLog, t: f64) -> Result<Configuration, ContactError> {
    let window = log.window();
    if t > window.horizon {
        return Err(ContactError::OutOfRange {
            t,
            horizon: window.horizon,
        });
    }
    if eta.len() != window.width() {
        return Err(ContactError::WindowMismatch {
            conf: eta.len(),
            window: window.width(),
        });
    }
    let mut state = eta.clone();
    let end = log.first_after(t);
    for i in 0..end {
        let (_, code) = log.raw(i);
        apply_event(&mut state, window.x_min, code);
    }
    Ok(state)
}

/// A recorded flip of one site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChangePoint {
    pub time: f64,
    pub site: i64,
    pub infected: bool,
}

const CHECKPOINT_EVERY: usize = 4096;

/// Memoized evolution of one initial configuration over a full log,
/// queryable at any time in `[0, horizon]`.
pub struct ConfigTrajectory {
    initial: Configuration,
    changes: Vec<ChangePoint>,
    /// Snapshot after every `CHECKPOINT_EVERY` changes; entry 0 is `initial`.
    checkpoints: Vec<Configuration>,
    horizon: f64,
}

impl ConfigTrajectory {
    pub fn build(eta: &Configuration, log: &EventLog) -> Result<Self, ContactError> {
        let window = log.window();
        if eta.len() != window.width() {
            return Err(ContactError::WindowMismatch {
                conf: eta.len(),
                window: window.width(),
            });
        }
        let mut state = eta.clone();
        let mut changes = Vec::new();
        let mut checkpoints = vec![eta.clone()];
        for i in 0..log.len() {
            let (time, code) = log.raw(i);
            if let Some((site, infected)) = apply_event(&mut state, window.x_min, code) {
                changes.push(ChangePoint {
                    time,
                    site,
                    infected,
                });
                if changes.len() == checkpoints.len() * CHECKPOINT_EVERY {
                    checkpoints.push(state.clone());
                }
            }
        }
        Ok(Self {
            initial: eta.clone(),
            changes,
            checkpoints,
            horizon: window.horizon,
        })
    }

    pub fn constant(eta: Configuration, horizon: f64) -> Self {
        Self {
            initial: eta.clone(),
            changes: Vec::new(),
            checkpoints: vec![eta],
            horizon,
        }
    }

    pub fn initial(&self) -> &Configuration {
        &self.initial
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn changes(&self) -> &[ChangePoint] {
        &self.changes
    }

    /// State at the last change time `<= t`.
    pub fn query(&self, t: f64) -> Result<Configuration, ContactError> {
        if t > self.horizon {
            return Err(ContactError::OutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let applied = self.changes.partition_point(|c| c.time <= t);
        let base = applied / CHECKPOINT_EVERY;
        let mut state = self.checkpoints[base].clone();
        for c in &self.changes[base * CHECKPOINT_EVERY..applied] {
            state.set(c.site, c.infected);
        }
        Ok(state)
    }

    /// CSV rows `time,changed_site,new_state` (header included).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,changed_site,new_state")?;
        for c in &self.changes {
            writeln!(out, "{},{},{}", c.time, c.site, u8::from(c.infected))?;
        }
        Ok(())
    }

    /// Forward-only cursor over the trajectory.
    pub fn cursor(&self) -> TrajCursor<'_> {
        TrajCursor {
            traj: self,
            state: self.initial.clone(),
            applied: 0,
        }
    }
}

pub struct TrajCursor<'a> {
    traj: &'a ConfigTrajectory,
    state: Configuration,
    applied: usize,
}

impl TrajCursor<'_> {
    /// Apply all changes with time `<= t`; `t` must not decrease across calls.
    pub fn advance_to(&mut self, t: f64) {
        while let Some(c) = self.traj.changes.get(self.applied) {
            if c.time > t {
                break;
            }
            self.state.set(c.site, c.infected);
            self.applied += 1;
        }
    }

    pub fn state(&self) -> &Configuration {
        &self.state
    }

    pub fn get(&self, x: i64) -> bool {
        self.state.get(x)
    }
}

/// Approximate draw from the upper invariant measure: evolve the all-ones
/// configuration for `burn_in` time units on a dedicated log.
pub struct EquilibriumSample {
    pub config: Configuration,
    pub density: f64,
    /// Density standard error from 64-site block counts.
    pub density_se: f64,
    /// Densities at half and full burn-in agree within two block SEs.
    pub converged: bool,
    pub burn_in: f64,
}

pub fn sample_equilibrium(
    params: &crate::model::ModelParams,
    window: &Window,
    burn_in: f64,
    stream: SubStream,
) -> Result<EquilibriumSample, crate::events::EventLogError> {
    let ones = Configuration::full(window);
    if burn_in <= 0.0 {
        return Ok(EquilibriumSample {
            density: ones.density(),
            density_se: 0.0,
            converged: true,
            burn_in,
            config: ones,
        });
    }
    let burn_window = Window {
        x_min: window.x_min,
        x_max: window.x_max,
        horizon: burn_in,
    };
    let log = crate::events::sample_event_log(params, &burn_window, stream)?;
    let half = evolve(&ones, &log, burn_in / 2.0).expect("within horizon");
    let full = evolve(&half, &log_suffix_view(&log, burn_in / 2.0, burn_in), burn_in / 2.0)
        .expect("within horizon");
    let (d_half, _) = block_density(&half);
    let (density, density_se) = block_density(&full);
    let converged = (density - d_half).abs() <= 2.0 * density_se.max(1e-12);
    Ok(EquilibriumSample {
        config: full,
        density,
        density_se,
        converged,
        burn_in,
    })
}

fn log_suffix_view(log: &EventLog, t0: f64, horizon: f64) -> EventLog {
    log.shifted(0, t0, horizon - t0)
}

fn block_density(c: &Configuration) -> (f64, f64) {
    let block = 64usize;
    let n_blocks = (c.len() / block).max(1);
    let mut means = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let mut ones = 0usize;
        for i in 0..block.min(c.len() - b * block) {
            if c.get(c.x_min() + (b * block + i) as i64) {
                ones += 1;
            }
        }
        means.push(ones as f64 / block.min(c.len() - b * block) as f64);
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    if means.len() < 2 {
        return (mean, mean.max(1.0 - mean));
    }
    let var =
        means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    (mean, (var / means.len() as f64).sqrt())
}

impl EventLog {
    /// View of the events strictly after `t0`, shifted so that `(origin, t0)`
    /// becomes the space-time origin, truncated to `new_horizon`.
    pub fn shifted(&self, origin: i64, t0: f64, new_horizon: f64) -> EventLog {
        let window = self.window();
        let new_window = Window {
            x_min: window.x_min - origin,
            x_max: window.x_max - origin,
            horizon: new_horizon,
        };
        let start = self.first_after(t0);
        let mut times = Vec::new();
        let mut codes = Vec::new();
        for i in start..self.len() {
            let (t, code) = self.raw(i);
            if t - t0 > new_horizon {
                break;
            }
            times.push(t - t0);
            codes.push(code);
        }
        EventLog::rebuild(new_window, self.lambda(), self.stream_id(), times, codes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::sample_event_log;
    use crate::model::ModelParams;
    use crate::rng::{RngStreams, StreamKind};

    fn params(lambda: f64) -> ModelParams {
        ModelParams::new(lambda, 1.0, 0.3, 0.7, 0.8, 0.2).unwrap()
    }

    fn random_log(lambda: f64, window: Window, seed: u64) -> EventLog {
        sample_event_log(
            &params(lambda),
            &window,
            RngStreams::new(seed).substream(0, StreamKind::Env),
        )
        .unwrap()
    }

    /// The hand-built log of the worked single-infection picture: seven sites,
    /// the cluster of 0 at the top is {-2, -1, 1, 2} and the cluster of 2 dies.
    pub(crate) fn figure_log() -> EventLog {
        let w = Window::new(-3, 3, 11.0).unwrap();
        EventLog::from_parts(
            w,
            1.0,
            vec![
                vec![1.0, 9.0],  // -3
                vec![4.0],       // -2
                vec![],          // -1
                vec![6.0],       // 0
                vec![8.0],       // 1
                vec![3.0],       // 2
                vec![10.2],      // 3
            ],
            vec![
                vec![3.0, 8.5], // (-3,-2)
                vec![7.5],      // (-2,-1)
                vec![2.0],      // (-1,0)
                vec![5.0],      // (0,1)
                vec![6.0, 9.7], // (1,2)
                vec![7.0],      // (2,3)
            ],
        )
        .unwrap()
    }

    #[test]
    fn all_zeros_is_absorbing() {
        let w = Window::new(-10, 10, 20.0).unwrap();
        let log = random_log(2.0, w, 3);
        let zeros = Configuration::empty(&w);
        for t in [0.0, 1.5, 10.0, 20.0] {
            assert!(evolve(&zeros, &log, t).unwrap().is_empty());
        }
    }

    #[test]
    fn single_infection_spreads_as_in_figure() {
        let log = figure_log();
        let eta = Configuration::single(log.window(), 0);
        let top = evolve(&eta, &log, 11.0).unwrap();
        let infected: Vec<i64> = top.iter_ones().collect();
        assert_eq!(infected, vec![-2, -1, 1, 2]);
    }

    #[test]
    fn pure_death_matches_exponential_survival() {
        // lambda = 0 from all-ones: each site is still infected at time t
        // with probability e^{-t}, independently.
        let w = Window::new(0, 39, 1.0).unwrap();
        let t = 1.0;
        let reps = 2000u64;
        let mut survivors = 0usize;
        for r in 0..reps {
            let log = sample_event_log(
                &params(0.0),
                &w,
                RngStreams::new(77).substream(r, StreamKind::Env),
            )
            .unwrap();
            survivors += evolve(&Configuration::full(&w), &log, t).unwrap().count_ones();
        }
        let n = (reps as usize * 40) as f64;
        let p = (-t).exp();
        let se = (p * (1.0 - p) / n).sqrt();
        let freq = survivors as f64 / n;
        assert!((freq - p).abs() < 3.0 * se, "freq {freq} expected {p} se {se}");
    }

    #[test]
    fn trajectory_matches_fresh_evolution() {
        let w = Window::new(-15, 15, 12.0).unwrap();
        let log = random_log(1.8, w, 21);
        let mut stream = RngStreams::new(5).substream(0, StreamKind::Init);
        let eta = Configuration::bernoulli(&w, 0.4, &mut stream);
        let traj = ConfigTrajectory::build(&eta, &log).unwrap();
        assert_eq!(&traj.query(0.0).unwrap(), &eta);
        assert_eq!(
            traj.query(12.0).unwrap(),
            evolve(&eta, &log, 12.0).unwrap()
        );
        let mut check = RngStreams::new(6).substream(0, StreamKind::Aux);
        for _ in 0..100 {
            let t: f64 = check.rng.gen::<f64>() * 12.0;
            assert_eq!(traj.query(t).unwrap(), evolve(&eta, &log, t).unwrap());
        }
        // cursor agrees with random access along an increasing sequence
        let mut cursor = traj.cursor();
        for k in 0..30 {
            let t = 0.4 * k as f64;
            cursor.advance_to(t);
            assert_eq!(cursor.state(), &traj.query(t).unwrap());
        }
    }

    #[test]
    fn query_beyond_horizon_errors() {
        let w = Window::new(-3, 3, 2.0).unwrap();
        let log = random_log(1.0, w, 2);
        let eta = Configuration::full(&w);
        assert!(evolve(&eta, &log, 2.5).is_err());
        let traj = ConfigTrajectory::build(&eta, &log).unwrap();
        assert!(traj.query(2.5).is_err());
    }

    #[test]
    fn attractiveness_on_random_pairs() {
        let w = Window::new(-12, 12, 8.0).unwrap();
        for seed in 0..20 {
            let log = random_log(2.0, w, 100 + seed);
            let mut s = RngStreams::new(seed).substream(0, StreamKind::Init);
            let lower = Configuration::bernoulli(&w, 0.3, &mut s);
            let mut upper = lower.clone();
            let extra = Configuration::bernoulli(&w, 0.3, &mut s);
            for x in extra.iter_ones() {
                upper.set(x, true);
            }
            let lo_t = ConfigTrajectory::build(&lower, &log).unwrap();
            let hi_t = ConfigTrajectory::build(&upper, &log).unwrap();
            for e in log.events() {
                assert!(lo_t
                    .query(e.time)
                    .unwrap()
                    .leq(&hi_t.query(e.time).unwrap()));
            }
        }
    }

    #[test]
    fn equilibrium_zero_burn_in_is_all_ones() {
        let w = Window::new(-10, 10, 1.0).unwrap();
        let s = sample_equilibrium(
            &params(2.0),
            &w,
            0.0,
            RngStreams::new(1).substream(0, StreamKind::Burnin),
        )
        .unwrap();
        assert_eq!(s.config, Configuration::full(&w));
        assert_eq!(s.density, 1.0);
    }

    #[test]
    fn subcritical_density_dies_out() {
        let w = Window::new(-150, 150, 1.0).unwrap();
        let mut densities = Vec::new();
        for r in 0..200u64 {
            let s = sample_equilibrium(
                &params(0.5),
                &w,
                50.0,
                RngStreams::new(31).substream(r, StreamKind::Burnin),
            )
            .unwrap();
            densities.push(s.density);
        }
        let mean = densities.iter().sum::<f64>() / densities.len() as f64;
        assert!(mean < 0.02, "subcritical mean density {mean}");
    }

    #[test]
    fn equilibrium_density_nondecreasing_in_lambda() {
        let w = Window::new(-200, 200, 1.0).unwrap();
        let grid = [2.0, 2.5, 3.0, 4.0];
        let mut means = Vec::new();
        let mut ses = Vec::new();
        for (gi, &lambda) in grid.iter().enumerate() {
            let mut ds = Vec::new();
            for r in 0..60u64 {
                let s = sample_equilibrium(
                    &params(lambda),
                    &w,
                    40.0,
                    RngStreams::new(1000 + gi as u64).substream(r, StreamKind::Burnin),
                )
                .unwrap();
                ds.push(s.density);
            }
            let m = ds.iter().sum::<f64>() / ds.len() as f64;
            let var = ds.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (ds.len() - 1) as f64;
            means.push(m);
            ses.push((var / ds.len() as f64).sqrt());
        }
        for i in 1..grid.len() {
            assert!(
                means[i] + 2.0 * ses[i] + 2.0 * ses[i - 1] >= means[i - 1],
                "density decreased: {means:?}"
            );
        }
    }

    #[test]
    fn ascii_roundtrip() {
        let w = Window::new(-2, 2, 1.0).unwrap();
        let mut c = Configuration::empty(&w);
        c.set(-1, true);
        c.set(0, true);
        assert_eq!(c.to_ascii(), "-2 2 01100");
        assert_eq!(Configuration::from_ascii("-2 2 01100").unwrap(), c);
        assert!(Configuration::from_ascii("-2 2 011").is_err());
    }

    #[test]
    fn bit_scans() {
        let w = Window::new(-70, 70, 1.0).unwrap();
        let mut c = Configuration::empty(&w);
        for x in [-70, -3, 0, 64, 70] {
            c.set(x, true);
        }
        assert_eq!(c.next_one_at_or_after(-70), Some(-70));
        assert_eq!(c.next_one_at_or_after(-69), Some(-3));
        assert_eq!(c.next_one_at_or_after(1), Some(64));
        assert_eq!(c.next_one_at_or_after(65), Some(70));
        assert_eq!(c.prev_one_at_or_before(70), Some(70));
        assert_eq!(c.prev_one_at_or_before(69), Some(64));
        assert_eq!(c.prev_one_at_or_before(-4), Some(-70));
        assert_eq!(c.count_ones(), 5);
        let r = c.restricted_below(0);
        assert_eq!(r.iter_ones().collect::<Vec<_>>(), vec![-70, -3]);
    }
}
