//! Regeneration structure: wave hitting times, failure times, left-arrow
//! tracers, trial times and the regeneration time itself.
//!
//! A failure time after `t` is the first moment the walk leaves the interval
//! spanned by the cluster grown from its own position at `t` (death of the
//! cluster counts, the interval is then empty). A failure that never happens
//! traps the walk inside one cluster forever and decouples its future from
//! the past. "Never" is operationalized as "not within a confirmation
//! window": every censored quantity carries that window in its metadata.

use crate::contact::cluster::{SourceCluster, BOUNDARY_MARGIN};
use crate::contact::ConfigTrajectory;
use crate::events::EventLog;
use crate::walker::WalkPath;

/// Deterministic path that starts at `(x, t)` and follows each arrow on the
/// bond to its immediate left downward; the displacement is a rate-lambda
/// Poisson process.
#[derive(Clone, Debug)]
pub struct LeftTracerPath {
    pub start_site: i64,
    pub start_time: f64,
    /// `(time, site)` after each jump, starting with `(start_time, start_site)`.
    pub steps: Vec<(f64, i64)>,
    /// The tracer reached the left wall and stopped.
    pub contaminated: bool,
}

impl LeftTracerPath {
    pub fn position_at(&self, s: f64) -> i64 {
        let i = self.steps.partition_point(|&(t, _)| t <= s);
        self.steps[i.saturating_sub(1)].1
    }

    pub fn end_position(&self) -> i64 {
        self.steps.last().unwrap().1
    }
}

/// Follow the left arrows from `(x, t)` until `until`.
pub fn left_tracer(log: &EventLog, x: i64, t: f64, until: f64) -> LeftTracerPath {
    let window = log.window();
    assert!(window.contains(x));
    let mut y = x;
    let mut steps = vec![(t, x)];
    let mut contaminated = false;
    let mut from_index = log.first_after(t) as u32;
    loop {
        if y <= window.x_min {
            contaminated = true;
            break;
        }
        let stream = log.arrow_stream(window.index(y - 1));
        let pos = stream.partition_point(|&g| g < from_index);
        let Some(&g) = stream.get(pos) else { break };
        let time = log.time_of(g);
        if time > until {
            break;
        }
        y -= 1;
        steps.push((time, y));
        from_index = g + 1;
    }
    LeftTracerPath {
        start_site: x,
        start_time: t,
        steps,
        contaminated,
    }
}

/// Outcome of a wave-hitting search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WaveHit {
    Hit(f64),
    /// No infected site below the reference at the start time.
    NoSource,
    /// Not met before the horizon.
    CensoredAtHorizon,
    /// The wave edge or the walk reached the window boundary first.
    Contaminated,
}

impl WaveHit {
    pub fn time(&self) -> Option<f64> {
        match self {
            WaveHit::Hit(t) => Some(*t),
            _ => None,
        }
    }
}

/// First time `s > t` at which the walk meets the right edge of the
/// infection descending from the sites `< z` of the environment at time `t`.
pub fn wave_hitting(
    log: &EventLog,
    traj: &ConfigTrajectory,
    path: &WalkPath,
    t: f64,
    z: i64,
) -> WaveHit {
    let window = log.window();
    let horizon = window.horizon;
    let state_t = traj.query(t).expect("t within horizon");
    let mut state = state_t.restricted_below(z);
    if state.is_empty() {
        return WaveHit::NoSource;
    }
    let mut edge = state
        .prev_one_at_or_before(window.x_max)
        .expect("nonempty");
    let mut w = path.position_at(t);
    let mut jump = path.count_at(t);
    let mut ev = log.first_after(t);
    loop {
        let t_event = if ev < log.len() {
            log.raw(ev).0
        } else {
            f64::INFINITY
        };
        let t_jump = path
            .jump_times()
            .get(jump)
            .copied()
            .unwrap_or(f64::INFINITY);
        let s = t_event.min(t_jump);
        if s > horizon || s.is_infinite() {
            return if path.truncated {
                WaveHit::Contaminated
            } else {
                WaveHit::CensoredAtHorizon
            };
        }
        if t_event <= t_jump {
            let (_, code) = log.raw(ev);
            ev += 1;
            if let Some((site, infected)) =
                crate::contact::apply_event(&mut state, window.x_min, code)
            {
                let mut changed = false;
                if infected {
                    if site > edge {
                        edge = site;
                        changed = true;
                    }
                } else if site == edge {
                    edge = state.prev_one_at_or_before(site).unwrap_or(i64::MIN);
                    changed = true;
                }
                // only the edge is tracked; support activity at the wall is
                // outside the light cone of the meeting point
                if changed && edge != i64::MIN && window.near_boundary(edge, BOUNDARY_MARGIN) {
                    return WaveHit::Contaminated;
                }
            }
        } else {
            w = path.skeleton()[jump + 1];
            jump += 1;
            if window.near_boundary(w, BOUNDARY_MARGIN) {
                return WaveHit::Contaminated;
            }
        }
        if edge == w {
            return WaveHit::Hit(s);
        }
    }
}

/// Outcome of a failure-time search started at `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Failure {
    /// The walk left the cluster interval (or the cluster died) at this time.
    At(f64),
    /// No failure within the confirmation window; treated as "never".
    CensoredInfinite,
    /// The horizon ended before the confirmation window did, or the run was
    /// contaminated; the trial cannot be classified.
    Unconfirmable,
}

impl Failure {
    pub fn time(&self) -> Option<f64> {
        match self {
            Failure::At(t) => Some(*t),
            _ => None,
        }
    }

    pub fn is_censored_infinite(&self) -> bool {
        matches!(self, Failure::CensoredInfinite)
    }
}

/// First time after `t` at which the walk exits `[L, R]` of the cluster
/// grown from `(W_t, t)`, searched over `[t, t + confirm_window]`.
///
/// The cluster starts as the singleton `{W_t}` regardless of the state of
/// the site.
pub fn failure_time(
    log: &EventLog,
    path: &WalkPath,
    t: f64,
    confirm_window: f64,
) -> Failure {
    let window = log.window();
    let horizon = window.horizon;
    let limit = (t + confirm_window).min(horizon);
    let source = path.position_at(t);
    if !window.contains(source) {
        return Failure::Unconfirmable;
    }
    let mut cluster = SourceCluster::new(log, source, t, None);
    let mut w = source;
    let mut jump = path.count_at(t);
    loop {
        let t_jump = path
            .jump_times()
            .get(jump)
            .copied()
            .unwrap_or(f64::INFINITY);
        while let Some(change) = cluster.step_until(t_jump.min(limit)) {
            if cluster.is_dead() || w < cluster.left() || w > cluster.right() {
                return Failure::At(change.time);
            }
        }
        if t_jump > limit {
            break;
        }
        w = path.skeleton()[jump + 1];
        jump += 1;
        if w < cluster.left() || w > cluster.right() {
            return Failure::At(t_jump);
        }
    }
    if cluster.touched_boundary() || path.truncated {
        return Failure::Unconfirmable;
    }
    if t + confirm_window <= horizon {
        Failure::CensoredInfinite
    } else {
        Failure::Unconfirmable
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Trial {
    At(f64),
    /// The failure time was censored as infinite, so no further trial occurs.
    InfiniteCensored,
    /// Horizon or boundary prevented classification.
    Incomplete,
}

/// `T_t`: the wave-hitting time launched from the left tracer at the failure
/// time, or infinite-censored when the failure never happens.
pub fn trial_time(
    log: &EventLog,
    traj: &ConfigTrajectory,
    path: &WalkPath,
    t: f64,
    confirm_window: f64,
) -> Trial {
    match failure_time(log, path, t, confirm_window) {
        Failure::CensoredInfinite => Trial::InfiniteCensored,
        Failure::Unconfirmable => Trial::Incomplete,
        Failure::At(f) => {
            let tracer = left_tracer(log, path.position_at(t), t, f);
            if tracer.contaminated {
                return Trial::Incomplete;
            }
            let z = tracer.position_at(f);
            match wave_hitting(log, traj, path, f, z) {
                WaveHit::Hit(v) => Trial::At(v),
                _ => Trial::Incomplete,
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RegenConfig {
    pub confirm_window: f64,
}

impl RegenConfig {
    /// Default confirmation window `30 / min(1, gamma)`.
    pub fn for_params(params: &crate::model::ModelParams) -> Self {
        Self {
            confirm_window: 30.0 / params.gamma.min(1.0),
        }
    }
}

/// One attempted regeneration: the trial time and the outcome of the failure
/// search after it.
#[derive(Clone, Copy, Debug)]
pub struct TrialRecord {
    pub k: usize,
    pub trial_time: f64,
    pub failure: Failure,
}

/// The full scan: trial times, the index `K` of the first trial whose
/// failure is censored as infinite, and the regeneration time `tau`.
#[derive(Clone, Debug)]
pub struct RegenerationScan {
    pub trials: Vec<TrialRecord>,
    pub k: Option<usize>,
    pub tau: Option<f64>,
    pub w_tau: Option<i64>,
    /// Every quantity confirmed within the horizon.
    pub complete: bool,
    pub confirm_window: f64,
    pub horizon: f64,
}

/// Iterate trial times from `V_0(0)` until one is followed by a censored
/// failure. The walk is assumed to start at the origin at time zero.
pub fn regeneration_scan(
    log: &EventLog,
    traj: &ConfigTrajectory,
    path: &WalkPath,
    config: &RegenConfig,
) -> RegenerationScan {
    let horizon = log.window().horizon;
    let confirm = config.confirm_window;
    let mut scan = RegenerationScan {
        trials: Vec::new(),
        k: None,
        tau: None,
        w_tau: None,
        complete: false,
        confirm_window: confirm,
        horizon,
    };
    let mut t = match wave_hitting(log, traj, path, 0.0, 0) {
        WaveHit::Hit(v) => v,
        _ => return scan,
    };
    for k in 1.. {
        let failure = failure_time(log, path, t, confirm);
        scan.trials.push(TrialRecord {
            k,
            trial_time: t,
            failure,
        });
        match failure {
            Failure::CensoredInfinite => {
                scan.k = Some(k);
                scan.tau = Some(t);
                scan.w_tau = Some(path.position_at(t));
                scan.complete = true;
                return scan;
            }
            Failure::Unconfirmable => return scan,
            Failure::At(f) => {
                let tracer = left_tracer(log, path.position_at(t), t, f);
                if tracer.contaminated {
                    return scan;
                }
                let z = tracer.position_at(f);
                match wave_hitting(log, traj, path, f, z) {
                    WaveHit::Hit(v) => t = v,
                    _ => return scan,
                }
            }
        }
    }
    unreachable!()
}

/// Estimates around the event "the origin is infected and no failure ever
/// happens": its probability under equilibrium, the conditional probability
/// `kappa` given an infected origin, and the equilibrium density, together
/// with the product identity between them.
#[derive(Clone, Debug, serde::Serialize)]
pub struct GammaEventEstimate {
    pub kappa_hat: f64,
    pub kappa_se: f64,
    /// Fraction of conditional replicas, per doubling of the confirmation
    /// window (sensitivity of the censoring).
    pub kappa_by_window: Vec<(f64, f64)>,
    pub rho_hat: f64,
    pub rho_se: f64,
    pub p_gamma_hat: f64,
    pub p_gamma_se: f64,
    /// `|p_gamma - kappa * rho|` in combined standard errors.
    pub identity_gap_se: f64,
    pub conditional_replicas: u64,
    pub independent_replicas: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum GammaEventError {
    #[error("no infected origins among {replicas} equilibrium replicas (density too small)")]
    RejectionFailure { replicas: u64 },
    #[error(transparent)]
    Events(#[from] crate::events::EventLogError),
}

pub struct GammaConfig {
    pub horizon: f64,
    pub burn_in: f64,
    pub confirm_window: f64,
}

pub fn estimate_gamma_event(
    params: &crate::model::ModelParams,
    replicas: u64,
    config: &GammaConfig,
    streams: &crate::rng::RngStreams,
) -> Result<GammaEventEstimate, GammaEventError> {
    use crate::rng::StreamKind;
    let window = crate::model::Window::auto(params, config.horizon);
    let params = *params;
    let streams = *streams;
    let confirm = config.confirm_window;
    let burn_in = config.burn_in;
    // per replica: (origin infected, failure outcome at confirm, at 2 confirm)
    let run_one = move |r: u64| -> Result<(bool, Failure, Failure), GammaEventError> {
        let eq = crate::contact::sample_equilibrium(
            &params,
            &window,
            burn_in,
            streams.substream(r, StreamKind::Burnin),
        )?;
        let occupied = eq.config.get(0);
        let log = crate::events::sample_event_log(
            &params,
            &window,
            streams.substream(r, StreamKind::Env),
        )?;
        let traj = ConfigTrajectory::build(&eq.config, &log).expect("window match");
        let driver = crate::walker::WalkDriver::sample(
            &params,
            config.horizon,
            streams.substream(r, StreamKind::Walk),
        );
        let path = crate::walker::build_walk(&traj, &params, &driver);
        let wide = failure_time(&log, &path, 0.0, 2.0 * confirm);
        let narrow = match wide {
            Failure::At(f) if f <= confirm => Failure::At(f),
            Failure::At(_) => Failure::CensoredInfinite,
            Failure::CensoredInfinite => Failure::CensoredInfinite,
            Failure::Unconfirmable => failure_time(&log, &path, 0.0, confirm),
        };
        Ok((occupied, narrow, wide))
    };
    // batch A estimates rho and kappa; batch B estimates P(Gamma) on
    // independent replicas so the identity check is not circular
    let all: Vec<_> = crate::replicas::map_indexed(2 * replicas, run_one);
    let mut occupied_a = 0u64;
    let mut kappa_narrow = 0u64;
    let mut kappa_wide = 0u64;
    let mut valid_a = 0u64;
    let mut gamma_b = 0u64;
    let mut valid_b = 0u64;
    for (i, res) in all.into_iter().enumerate() {
        let (occ, narrow, wide) = res?;
        if (i as u64) < replicas {
            if narrow == Failure::Unconfirmable {
                continue;
            }
            valid_a += 1;
            if occ {
                occupied_a += 1;
                kappa_narrow += u64::from(narrow.is_censored_infinite());
                kappa_wide += u64::from(wide.is_censored_infinite());
            }
        } else {
            if narrow == Failure::Unconfirmable {
                continue;
            }
            valid_b += 1;
            gamma_b += u64::from(occ && narrow.is_censored_infinite());
        }
    }
    if occupied_a == 0 {
        return Err(GammaEventError::RejectionFailure { replicas });
    }
    let binom_se = |p: f64, n: f64| (p * (1.0 - p) / n).sqrt();
    let rho_hat = occupied_a as f64 / valid_a as f64;
    let rho_se = binom_se(rho_hat, valid_a as f64);
    let kappa_hat = kappa_narrow as f64 / occupied_a as f64;
    let kappa_se = binom_se(kappa_hat, occupied_a as f64);
    let p_gamma_hat = gamma_b as f64 / valid_b as f64;
    let p_gamma_se = binom_se(p_gamma_hat, valid_b as f64);
    let product = kappa_hat * rho_hat;
    let product_var =
        (rho_hat * kappa_se).powi(2) + (kappa_hat * rho_se).powi(2);
    let gap = (p_gamma_hat - product).abs();
    let combined_se = (p_gamma_se.powi(2) + product_var).sqrt();
    Ok(GammaEventEstimate {
        kappa_hat,
        kappa_se,
        kappa_by_window: vec![
            (confirm, kappa_hat),
            (2.0 * confirm, kappa_wide as f64 / occupied_a as f64),
        ],
        rho_hat,
        rho_se,
        p_gamma_hat,
        p_gamma_se,
        identity_gap_se: gap / combined_se.max(1e-12),
        conditional_replicas: occupied_a,
        independent_replicas: valid_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{ConfigTrajectory, Configuration};
    use crate::events::sample_event_log;
    use crate::model::{ModelParams, Window};
    use crate::rng::{RngStreams, StreamKind};
    use crate::walker::{build_walk, WalkDriver};

    fn params(lambda: f64) -> ModelParams {
        ModelParams::new(lambda, 1.0, 0.3, 0.7, 0.8, 0.2).unwrap()
    }

    fn frozen_path(horizon: f64) -> WalkPath {
        let w = Window::new(-5, 5, horizon).unwrap();
        let traj = ConfigTrajectory::constant(Configuration::empty(&w), horizon);
        let p = params(0.0);
        let d = WalkDriver::from_parts(p.gamma, horizon, vec![], vec![]);
        build_walk(&traj, &p, &d)
    }

    /// Left-tracer staircase on the hand-built arrow picture: start at site 2,
    /// steps at 2.5, 6.5, 8.5, 9.5 down to site -2.
    #[test]
    fn tracer_follows_figure_staircase() {
        let w = Window::new(-3, 3, 11.0).unwrap();
        let arrows = vec![
            vec![2.0, 7.0],  // (-3,-2)
            vec![3.5, 9.5],  // (-2,-1)
            vec![5.0, 8.5],  // (-1,0)
            vec![1.7, 6.5, 10.0], // (0,1)
            vec![2.5, 8.0],  // (1,2)
            vec![5.5],       // (2,3)
        ];
        let crosses = vec![
            vec![7.9], // -3
            vec![],
            vec![5.4], // -1
            vec![],
            vec![],
            vec![],
            vec![6.9], // 3
        ];
        let log = EventLog::from_parts(w, 1.0, crosses, arrows).unwrap();
        let tracer = left_tracer(&log, 2, 0.0, 11.0);
        assert_eq!(
            tracer.steps,
            vec![(0.0, 2), (2.5, 1), (6.5, 0), (8.5, -1), (9.5, -2)]
        );
        assert!(!tracer.contaminated);
        assert_eq!(tracer.position_at(7.0), 0);
    }

    #[test]
    fn tracer_constant_without_arrows() {
        let w = Window::new(-4, 4, 6.0).unwrap();
        let log = EventLog::from_parts(w, 0.0, vec![vec![]; 9], vec![vec![]; 8]).unwrap();
        let tracer = left_tracer(&log, 1, 0.0, 6.0);
        assert_eq!(tracer.steps, vec![(0.0, 1)]);
    }

    #[test]
    fn tracer_displacement_is_poisson_rate_lambda() {
        let p = params(2.0);
        let w = Window::new(-400, 20, 50.0).unwrap();
        let reps = 500u64;
        let s_len = 50.0;
        let mut total = 0i64;
        for r in 0..reps {
            let log = sample_event_log(&p, &w, RngStreams::new(40).substream(r, StreamKind::Env))
                .unwrap();
            let tr = left_tracer(&log, 10, 0.0, s_len);
            assert!(!tr.contaminated);
            total += 10 - tr.end_position();
        }
        let mean = total as f64 / reps as f64;
        let expect = p.lambda * s_len;
        let se = (expect / reps as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "mean {mean} expect {expect}");
    }

    #[test]
    fn wave_hitting_with_frozen_walk_matches_edge_crossing() {
        // walk frozen at 0, all sites < 0 infected, dense arrows: the hit is
        // the first time the wave edge reaches 0
        let p = params(4.0);
        for seed in 0..10 {
            let w = Window::new(-60, 20, 15.0).unwrap();
            let log = sample_event_log(&p, &w, RngStreams::new(600 + seed).substream(0, StreamKind::Env))
                .unwrap();
            let mut initial = Configuration::empty(&w);
            for x in -60..0 {
                initial.set(x, true);
            }
            let traj = ConfigTrajectory::build(&initial, &log).unwrap();
            let path = frozen_path(15.0);
            let hit = wave_hitting(&log, &traj, &path, 0.0, 0);
            // oracle: scan the recorded wave-edge trajectory for the first
            // time it reaches the walk's (constant) position
            let edge = crate::contact::cluster::wave(&log, 0, 0.0, &initial);
            let want = edge
                .steps
                .iter()
                .find(|&&(_, e)| e == 0)
                .map(|&(t, _)| t);
            match (hit, want) {
                (WaveHit::Hit(a), Some(b)) => assert_eq!(a, b, "seed {seed}"),
                (WaveHit::CensoredAtHorizon, None) => {}
                other => panic!("mismatch: {other:?}"),
            }
        }
    }

    #[test]
    fn wave_hitting_censors_without_sources() {
        let p = params(0.0);
        let w = Window::new(-10, 10, 5.0).unwrap();
        let log = sample_event_log(&p, &w, RngStreams::new(9).substream(0, StreamKind::Env))
            .unwrap();
        let traj = ConfigTrajectory::build(&Configuration::empty(&w), &log).unwrap();
        let path = frozen_path(5.0);
        assert_eq!(wave_hitting(&log, &traj, &path, 0.0, 0), WaveHit::NoSource);
    }

    #[test]
    fn wave_hitting_rarely_censored_at_high_lambda() {
        let p = params(4.0);
        let horizon = 100.0;
        let w = Window::auto(&p, horizon);
        let reps = 60u64;
        let mut censored = 0;
        for r in 0..reps {
            let streams = RngStreams::new(123);
            let eq = crate::contact::sample_equilibrium(
                &p,
                &w,
                40.0,
                streams.substream(r, StreamKind::Burnin),
            )
            .unwrap();
            let log = sample_event_log(&p, &w, streams.substream(r, StreamKind::Env)).unwrap();
            let traj = ConfigTrajectory::build(&eq.config, &log).unwrap();
            let d = WalkDriver::sample(&p, horizon, streams.substream(r, StreamKind::Walk));
            let path = build_walk(&traj, &p, &d);
            match wave_hitting(&log, &traj, &path, 0.0, 0) {
                WaveHit::Hit(_) => {}
                _ => censored += 1,
            }
        }
        assert!(
            (censored as f64) < 0.05 * reps as f64,
            "censored {censored} of {reps}"
        );
    }

    #[test]
    fn failure_single_cross_kills_cluster() {
        // the cluster of (0, 0) starts as {0} regardless of the environment;
        // a cross at the origin before any arrow is an immediate failure
        let w = Window::new(-5, 5, 10.0).unwrap();
        let mut crosses = vec![vec![]; 11];
        crosses[w.index(0)] = vec![1.25];
        let log = EventLog::from_parts(w, 1.0, crosses, vec![vec![]; 10]).unwrap();
        let path = frozen_path(10.0);
        assert_eq!(failure_time(&log, &path, 0.0, 8.0), Failure::At(1.25));
    }

    #[test]
    fn failure_censored_when_cluster_survives_around_frozen_walk() {
        // window sized so the cluster cone cannot hit the walls within the
        // confirmation window
        let p = params(4.0);
        let w = Window::auto(&p, 20.0);
        let mut censored = 0;
        let reps = 20;
        for seed in 0..reps {
            let log = sample_event_log(&p, &w, RngStreams::new(700 + seed).substream(0, StreamKind::Env))
                .unwrap();
            let path = frozen_path(20.0);
            if failure_time(&log, &path, 0.0, 15.0).is_censored_infinite() {
                censored += 1;
            }
        }
        // a frozen walk fails only when the whole cluster dies; at lambda = 4
        // most clusters survive
        assert!(censored > reps / 2, "censored {censored}/{reps}");
    }

    #[test]
    fn failure_matches_naive_joint_replay() {
        let p = params(1.5);
        let w = Window::new(-25, 25, 12.0).unwrap();
        for seed in 0..40 {
            let streams = RngStreams::new(800 + seed);
            let log = sample_event_log(&p, &w, streams.substream(0, StreamKind::Env)).unwrap();
            let mut s = streams.substream(0, StreamKind::Init);
            let eta = Configuration::bernoulli(&w, 0.5, &mut s);
            let traj = ConfigTrajectory::build(&eta, &log).unwrap();
            let d = WalkDriver::sample(&p, 12.0, streams.substream(0, StreamKind::Walk));
            let path = build_walk(&traj, &p, &d);
            let t0 = 1.0;
            let got = failure_time(&log, &path, t0, 8.0);
            // naive replay: full cluster trace + walk positions checked on
            // the merged time grid of both processes
            let trace = crate::contact::cluster::cluster(&log, path.position_at(t0), t0);
            let mut times: Vec<f64> = trace.steps.iter().map(|st| st.time).collect();
            times.extend(
                path.jump_times()
                    .iter()
                    .copied()
                    .filter(|&u| u > t0 && u <= t0 + 8.0),
            );
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut want = Failure::CensoredInfinite;
            for &u in &times {
                if u > t0 + 8.0 {
                    break;
                }
                let wpos = path.position_at(u);
                if !trace.alive_at(u) || wpos < trace.left_at(u) || wpos > trace.right_at(u) {
                    want = Failure::At(u);
                    break;
                }
            }
            assert_eq!(got, want, "seed {seed}");
        }
    }

    #[test]
    fn trial_time_composes_and_propagates_censoring() {
        let p = params(3.0);
        let w = Window::new(-120, 120, 35.0).unwrap();
        let mut checked = 0;
        for seed in 0..25 {
            let streams = RngStreams::new(900 + seed);
            let log = sample_event_log(&p, &w, streams.substream(0, StreamKind::Env)).unwrap();
            let mut s = streams.substream(0, StreamKind::Init);
            let eta = Configuration::bernoulli(&w, 0.6, &mut s);
            let traj = ConfigTrajectory::build(&eta, &log).unwrap();
            let d = WalkDriver::sample(&p, 35.0, streams.substream(0, StreamKind::Walk));
            let path = build_walk(&traj, &p, &d);
            let t0 = 0.5;
            let got = trial_time(&log, &traj, &path, t0, 10.0);
            match failure_time(&log, &path, t0, 10.0) {
                Failure::CensoredInfinite => assert_eq!(got, Trial::InfiniteCensored),
                Failure::Unconfirmable => assert_eq!(got, Trial::Incomplete),
                Failure::At(f) => {
                    let z = left_tracer(&log, path.position_at(t0), t0, f).position_at(f);
                    let want = match wave_hitting(&log, &traj, &path, f, z) {
                        WaveHit::Hit(v) => Trial::At(v),
                        _ => Trial::Incomplete,
                    };
                    assert_eq!(got, want, "seed {seed}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 3, "too few finite failures exercised: {checked}");
    }

    #[test]
    fn scan_base_case_k_equals_one() {
        // a high-lambda environment usually confirms the very first trial
        let p = params(4.0);
        let horizon = 100.0;
        let w = Window::auto(&p, horizon);
        let streams = RngStreams::new(321);
        let mut k1 = 0;
        let mut complete = 0;
        for r in 0..30u64 {
            let eq = crate::contact::sample_equilibrium(
                &p,
                &w,
                40.0,
                streams.substream(r, StreamKind::Burnin),
            )
            .unwrap();
            let log = sample_event_log(&p, &w, streams.substream(r, StreamKind::Env)).unwrap();
            let traj = ConfigTrajectory::build(&eq.config, &log).unwrap();
            let d = WalkDriver::sample(&p, horizon, streams.substream(r, StreamKind::Walk));
            let path = build_walk(&traj, &p, &d);
            let scan = regeneration_scan(&log, &traj, &path, &RegenConfig { confirm_window: 30.0 });
            if scan.complete {
                complete += 1;
                let k = scan.k.unwrap();
                assert_eq!(scan.tau, Some(scan.trials[k - 1].trial_time));
                assert!(scan.trials[k - 1].failure.is_censored_infinite());
                if k == 1 {
                    k1 += 1;
                }
            }
        }
        assert!(complete > 20, "complete {complete}");
        assert!(k1 > 0, "no K = 1 scans observed");
    }

    #[test]
    fn gamma_event_rejection_failure_at_lambda_zero() {
        let p = params(0.0);
        let cfg = GammaConfig {
            horizon: 20.0,
            burn_in: 10.0,
            confirm_window: 5.0,
        };
        match estimate_gamma_event(&p, 30, &cfg, &RngStreams::new(5)) {
            Err(GammaEventError::RejectionFailure { .. }) => {}
            other => panic!("expected rejection failure, got {other:?}"),
        }
    }
}
