//! Speed, volatility and large-deviation estimators.
//!
//! Three independent routes to the speed:
//! - ergodic averages `W_T / T` over replicas (`lln`),
//! - the non-increasing sequence `E[W_n / n]` from the all-ones state
//!   (`subadditive`), whose infimum is the speed,
//! - the regeneration ratio `E[W_tau | Gamma] / E[tau | Gamma]`
//!   (`regeneration`).
//!
//! All replica aggregation is a fold in replica-index order, so estimates do
//! not depend on scheduling.

use super::gof::{ks_one_sample, std_normal_cdf, KsReport};
use super::summary::{pearson_correlation, ratio_estimate, summarize, Summary, Z95};
use crate::contact::{sample_equilibrium, ConfigTrajectory, Configuration};
use crate::events::{sample_event_log, EventLogError};
use crate::model::{ModelParams, Window};
use crate::regen::{failure_time, regeneration_scan, RegenConfig};
use crate::replicas::map_indexed;
use crate::rng::{RngStreams, StreamKind};
use crate::walker::{build_walk, WalkDriver, WalkPath};
use thiserror::Error;

pub const DEFAULT_BURN_IN: f64 = 40.0;

/// How the environment is initialized at time zero.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum InitialMode {
    Full,
    Empty,
    Bernoulli(f64),
    Equilibrium { burn_in: f64 },
}

impl std::fmt::Display for InitialMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialMode::Full => write!(f, "full"),
            InitialMode::Empty => write!(f, "empty"),
            InitialMode::Bernoulli(p) => write!(f, "bernoulli:{p}"),
            InitialMode::Equilibrium { burn_in } => write!(f, "equilibrium:{burn_in}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("all {0} replicas were boundary-contaminated or incomplete")]
    AllContaminated(u64),
    #[error("insufficient data: needed {needed} usable replicas, got {got}")]
    Insufficient { needed: u64, got: u64 },
    #[error(transparent)]
    Events(#[from] EventLogError),
}

pub fn initial_config(
    params: &ModelParams,
    window: &Window,
    mode: InitialMode,
    streams: &RngStreams,
    replica: u64,
) -> Result<Configuration, EventLogError> {
    Ok(match mode {
        InitialMode::Full => Configuration::full(window),
        InitialMode::Empty => Configuration::empty(window),
        InitialMode::Bernoulli(p) => {
            let mut s = streams.substream(replica, StreamKind::Init);
            Configuration::bernoulli(window, p, &mut s)
        }
        InitialMode::Equilibrium { burn_in } => {
            sample_equilibrium(
                params,
                window,
                burn_in,
                streams.substream(replica, StreamKind::Burnin),
            )?
            .config
        }
    })
}

/// One replica's walk under `mode`. An initially empty environment stays
/// empty, so the event log is skipped in that case; the walk stream is
/// untouched by this shortcut and the path is identical to the full route.
pub fn sample_walk(
    params: &ModelParams,
    window: &Window,
    mode: InitialMode,
    streams: &RngStreams,
    replica: u64,
) -> Result<WalkPath, EventLogError> {
    let initial = initial_config(params, window, mode, streams, replica)?;
    let driver = WalkDriver::sample(
        params,
        window.horizon,
        streams.substream(replica, StreamKind::Walk),
    );
    let traj = if initial.is_empty() {
        ConfigTrajectory::constant(initial, window.horizon)
    } else {
        let log = sample_event_log(params, window, streams.substream(replica, StreamKind::Env))?;
        ConfigTrajectory::build(&initial, &log).expect("window match")
    };
    Ok(build_walk(&traj, params, &driver))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SpeedEstimate {
    pub v_hat: f64,
    pub se: f64,
    pub ci95: (f64, f64),
    pub replicas_used: u64,
    pub replicas_excluded: u64,
    pub method: &'static str,
    pub lambda: f64,
    pub horizon: f64,
}

/// Endpoint of one replica's walk; the raw material of the `lln` estimator.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct WalkEndRecord {
    pub replica: u64,
    pub w_end: i64,
    pub jumps: u64,
    pub contaminated: bool,
}

pub fn walk_end_record(
    params: &ModelParams,
    mode: InitialMode,
    horizon: f64,
    streams: &RngStreams,
    replica: u64,
) -> Result<WalkEndRecord, EventLogError> {
    let window = Window::auto(params, horizon);
    let path = sample_walk(params, &window, mode, streams, replica)?;
    Ok(WalkEndRecord {
        replica,
        w_end: path.end_position(),
        jumps: path.jumps() as u64,
        contaminated: path.contaminated,
    })
}

/// Aggregate endpoint records into the `lln` speed estimate. A pure fold in
/// record order: results do not depend on how the records were produced.
pub fn speed_from_records(
    records: &[WalkEndRecord],
    params: &ModelParams,
    horizon: f64,
) -> Result<SpeedEstimate, ExperimentError> {
    let speeds: Vec<f64> = records
        .iter()
        .filter(|r| !r.contaminated)
        .map(|r| r.w_end as f64 / horizon)
        .collect();
    if speeds.is_empty() {
        return Err(ExperimentError::AllContaminated(records.len() as u64));
    }
    let s = summarize(&speeds);
    Ok(SpeedEstimate {
        v_hat: s.mean,
        se: s.se,
        ci95: s.ci95,
        replicas_used: s.n,
        replicas_excluded: records.len() as u64 - s.n,
        method: "lln",
        lambda: params.lambda,
        horizon,
    })
}

/// `mean(W_T / T)` over uncontaminated replicas.
pub fn estimate_speed_lln(
    params: &ModelParams,
    mode: InitialMode,
    replicas: u64,
    horizon: f64,
    streams: &RngStreams,
) -> Result<SpeedEstimate, ExperimentError> {
    let params_c = *params;
    let streams_c = *streams;
    let per: Vec<Result<WalkEndRecord, EventLogError>> = map_indexed(replicas, move |r| {
        walk_end_record(&params_c, mode, horizon, &streams_c, r)
    });
    let mut records = Vec::with_capacity(per.len());
    for res in per {
        records.push(res?);
    }
    speed_from_records(&records, params, horizon)
}

/// The triple `(X_{0,n}, X_{0,m}, X_{m,n})` on one realization: the walk from
/// the all-ones state, and the walk restarted at `(W_m, m)` from all-ones on
/// the shifted remainder of the same log and driver.
#[derive(Clone, Copy, Debug)]
pub struct SubadditiveTriple {
    pub x_0n: i64,
    pub x_0m: i64,
    pub x_mn: i64,
    pub contaminated: bool,
}

pub fn subadditive_triple(
    params: &ModelParams,
    m: f64,
    n: f64,
    streams: &RngStreams,
    replica: u64,
) -> Result<SubadditiveTriple, EventLogError> {
    assert!(0.0 <= m && m < n);
    let window = Window::auto(params, n);
    let log = sample_event_log(params, &window, streams.substream(replica, StreamKind::Env))?;
    let driver = WalkDriver::sample(params, n, streams.substream(replica, StreamKind::Walk));
    let traj = ConfigTrajectory::build(&Configuration::full(&window), &log).expect("window match");
    let path = build_walk(&traj, params, &driver);
    let w_m = path.position_at(m);
    // remainder of the realization, re-anchored at (W_m, m), from all-ones
    let shifted = log.shifted(w_m, m, n - m);
    let traj2 = ConfigTrajectory::build(&Configuration::full(shifted.window()), &shifted)
        .expect("window match");
    let restarted = build_walk(&traj2, params, &driver.suffix(m));
    Ok(SubadditiveTriple {
        x_0n: path.position_at(n),
        x_0m: w_m,
        x_mn: restarted.position_at(n - m),
        contaminated: path.contaminated || restarted.contaminated,
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SubadditiveSpeed {
    /// `(n, summary of W_n / n)` per grid point.
    pub grid: Vec<(f64, Summary)>,
    pub speed: SpeedEstimate,
    /// Grid means non-increasing within adjacent combined CIs.
    pub non_increasing_within_ci: bool,
}

/// Estimate `E[W_n / n]` from the all-ones state on a grid of `n`; the
/// largest grid point stands in for the infimum.
pub fn estimate_speed_subadditive(
    params: &ModelParams,
    n_grid: &[f64],
    replicas: u64,
    streams: &RngStreams,
) -> Result<SubadditiveSpeed, ExperimentError> {
    assert!(!n_grid.is_empty());
    let mut grid = n_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let horizon = *grid.last().unwrap();
    let window = Window::auto(params, horizon);
    let params_c = *params;
    let streams_c = *streams;
    let grid_c = grid.clone();
    let per: Vec<Result<(Vec<f64>, bool), EventLogError>> = map_indexed(replicas, move |r| {
        let path = sample_walk(&params_c, &window, InitialMode::Full, &streams_c, r)?;
        let speeds = grid_c
            .iter()
            .map(|&n| path.position_at(n) as f64 / n)
            .collect();
        Ok((speeds, path.contaminated))
    });
    let mut per_n: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    let mut excluded = 0;
    for res in per {
        let (speeds, contaminated) = res?;
        if contaminated {
            excluded += 1;
            continue;
        }
        for (i, v) in speeds.into_iter().enumerate() {
            per_n[i].push(v);
        }
    }
    if per_n[0].is_empty() {
        return Err(ExperimentError::AllContaminated(replicas));
    }
    let summaries: Vec<(f64, Summary)> = grid
        .iter()
        .zip(&per_n)
        .map(|(&n, xs)| (n, summarize(xs)))
        .collect();
    let mut non_increasing = true;
    for w in summaries.windows(2) {
        let (_, a) = w[0];
        let (_, b) = w[1];
        if b.mean > a.mean + Z95 * (a.se + b.se) {
            non_increasing = false;
        }
    }
    let (n_last, last) = *summaries.last().unwrap();
    Ok(SubadditiveSpeed {
        speed: SpeedEstimate {
            v_hat: last.mean,
            se: last.se,
            ci95: last.ci95,
            replicas_used: last.n,
            replicas_excluded: excluded,
            method: "subadditive",
            lambda: params.lambda,
            horizon: n_last,
        },
        grid: summaries,
        non_increasing_within_ci: non_increasing,
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SigmaEstimate {
    pub sigma_hat: f64,
    pub ci95: (f64, f64),
    pub method: &'static str,
    pub samples: u64,
}

/// Per-replica record of a regeneration run, including the raw trial rows
/// for the scan export.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RegenRecord {
    pub replica: u64,
    pub gamma: bool,
    pub complete: bool,
    pub contaminated: bool,
    pub k: Option<u64>,
    pub tau: Option<f64>,
    pub w_tau: Option<i64>,
    /// `(k, trial time, failure time; None when censored as infinite)`.
    pub trials: Vec<(usize, f64, Option<f64>)>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RegenEstimate {
    pub speed: SpeedEstimate,
    /// Volatility from centered cycles, `E[(W_tau - v tau)^2 | Gamma] / E[tau | Gamma]`.
    pub sigma: SigmaEstimate,
    /// The uncentered ratio `Var(W_tau | Gamma) / E[tau | Gamma]`, reported
    /// for comparison.
    pub sigma_uncentered: f64,
    pub gamma_fraction: f64,
    pub mean_tau: f64,
    pub mean_k: f64,
    pub records: Vec<RegenRecord>,
}

pub struct RegenRunConfig {
    pub horizon: f64,
    pub burn_in: f64,
    pub confirm_window: f64,
    /// Minimum number of Gamma-conditioned complete scans required.
    pub min_gamma_scans: u64,
}

impl RegenRunConfig {
    pub fn for_params(params: &ModelParams, horizon: f64) -> Self {
        Self {
            horizon,
            burn_in: DEFAULT_BURN_IN,
            confirm_window: RegenConfig::for_params(params).confirm_window,
            min_gamma_scans: 10,
        }
    }
}

/// Regeneration-ratio estimators of speed and volatility under equilibrium,
/// conditioned on the event that the origin is infected and the first
/// failure never happens.
pub fn estimate_regen(
    params: &ModelParams,
    replicas: u64,
    config: &RegenRunConfig,
    streams: &RngStreams,
) -> Result<RegenEstimate, ExperimentError> {
    let window = Window::auto(params, config.horizon);
    let params_c = *params;
    let streams_c = *streams;
    let confirm = config.confirm_window;
    let burn_in = config.burn_in;
    let horizon = config.horizon;
    let per: Vec<Result<RegenRecord, EventLogError>> = map_indexed(replicas, move |r| {
        let eq = sample_equilibrium(
            &params_c,
            &window,
            burn_in,
            streams_c.substream(r, StreamKind::Burnin),
        )?;
        let log =
            sample_event_log(&params_c, &window, streams_c.substream(r, StreamKind::Env))?;
        let traj = ConfigTrajectory::build(&eq.config, &log).expect("window match");
        let driver = WalkDriver::sample(
            &params_c,
            horizon,
            streams_c.substream(r, StreamKind::Walk),
        );
        let path = build_walk(&traj, &params_c, &driver);
        let gamma = eq.config.get(0)
            && failure_time(&log, &path, 0.0, confirm).is_censored_infinite();
        let scan = regeneration_scan(
            &log,
            &traj,
            &path,
            &RegenConfig {
                confirm_window: confirm,
            },
        );
        Ok(RegenRecord {
            replica: r,
            gamma,
            complete: scan.complete,
            contaminated: path.contaminated,
            k: scan.k.map(|k| k as u64),
            tau: scan.tau,
            w_tau: scan.w_tau,
            trials: scan
                .trials
                .iter()
                .map(|t| (t.k, t.trial_time, t.failure.time()))
                .collect(),
        })
    });
    let mut records = Vec::with_capacity(replicas as usize);
    for res in per {
        records.push(res?);
    }
    let usable: Vec<&RegenRecord> = records
        .iter()
        .filter(|r| r.gamma && r.complete && !r.contaminated)
        .collect();
    if (usable.len() as u64) < config.min_gamma_scans {
        return Err(ExperimentError::Insufficient {
            needed: config.min_gamma_scans,
            got: usable.len() as u64,
        });
    }
    let w_taus: Vec<f64> = usable.iter().map(|r| r.w_tau.unwrap() as f64).collect();
    let taus: Vec<f64> = usable.iter().map(|r| r.tau.unwrap()).collect();
    let (v_hat, v_se) = ratio_estimate(&w_taus, &taus);
    let n = taus.len() as f64;
    let mean_tau = taus.iter().sum::<f64>() / n;
    let centered: Vec<f64> = w_taus
        .iter()
        .zip(&taus)
        .map(|(&w, &t)| (w - v_hat * t).powi(2))
        .collect();
    let sigma2 = centered.iter().sum::<f64>() / n / mean_tau;
    let mean_w = w_taus.iter().sum::<f64>() / n;
    let var_w = w_taus.iter().map(|w| (w - mean_w).powi(2)).sum::<f64>() / n;
    let sigma_uncentered = (var_w / mean_tau).sqrt();
    // percentile bootstrap over cycle pairs for the sigma CI
    let sigma_ci = bootstrap_sigma_ci(&w_taus, &taus);
    let complete_scans: Vec<&RegenRecord> =
        records.iter().filter(|r| r.complete).collect();
    let mean_k = complete_scans
        .iter()
        .map(|r| r.k.unwrap() as f64)
        .sum::<f64>()
        / complete_scans.len().max(1) as f64;
    Ok(RegenEstimate {
        speed: SpeedEstimate {
            v_hat,
            se: v_se,
            ci95: (v_hat - Z95 * v_se, v_hat + Z95 * v_se),
            replicas_used: usable.len() as u64,
            replicas_excluded: replicas - usable.len() as u64,
            method: "regeneration",
            lambda: params.lambda,
            horizon: config.horizon,
        },
        sigma: SigmaEstimate {
            sigma_hat: sigma2.sqrt(),
            ci95: sigma_ci,
            method: "regeneration",
            samples: usable.len() as u64,
        },
        sigma_uncentered,
        gamma_fraction: records.iter().filter(|r| r.gamma).count() as f64
            / records.len() as f64,
        mean_tau,
        mean_k,
        records,
    })
}

fn bootstrap_sigma_ci(w_taus: &[f64], taus: &[f64]) -> (f64, f64) {
    use rand::{Rng, SeedableRng};
    let n = taus.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x51c3_b007 ^ n as u64);
    let mut sigmas = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let mut sw = 0.0;
        let mut st = 0.0;
        let mut idx = Vec::with_capacity(n);
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            idx.push(i);
            sw += w_taus[i];
            st += taus[i];
        }
        let v = sw / st;
        let s2 = idx
            .iter()
            .map(|&i| (w_taus[i] - v * taus[i]).powi(2))
            .sum::<f64>()
            / n as f64
            / (st / n as f64);
        sigmas.push(s2.sqrt());
    }
    sigmas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (sigmas[25], sigmas[975])
}

/// Volatility from batched increments of independent walks: the variance of
/// length-`batch_len` displacement increments, divided by the batch length.
/// The first batch of every run is discarded.
pub fn batch_means_sigma(
    params: &ModelParams,
    mode: InitialMode,
    runs: u64,
    horizon: f64,
    batch_len: f64,
    streams: &RngStreams,
) -> Result<SigmaEstimate, ExperimentError> {
    let window = Window::auto(params, horizon);
    let params_c = *params;
    let streams_c = *streams;
    let per: Vec<Result<(Vec<f64>, bool), EventLogError>> = map_indexed(runs, move |r| {
        let path = sample_walk(&params_c, &window, mode, &streams_c, r)?;
        let batches = (horizon / batch_len).floor() as usize;
        let incs = (1..batches)
            .map(|j| {
                let a = path.position_at(j as f64 * batch_len);
                let b = path.position_at((j + 1) as f64 * batch_len);
                (b - a) as f64
            })
            .collect();
        Ok((incs, path.contaminated))
    });
    let mut incs = Vec::new();
    for res in per {
        let (v, contaminated) = res?;
        if !contaminated {
            incs.extend(v);
        }
    }
    if incs.len() < 8 {
        return Err(ExperimentError::Insufficient {
            needed: 8,
            got: incs.len() as u64,
        });
    }
    let n = incs.len() as f64;
    let mean = incs.iter().sum::<f64>() / n;
    let var = incs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma2 = var / batch_len;
    // chi-square interval for a variance
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let chi = ChiSquared::new(n - 1.0).unwrap();
    let lo = sigma2 * (n - 1.0) / chi.inverse_cdf(0.975);
    let hi = sigma2 * (n - 1.0) / chi.inverse_cdf(0.025);
    Ok(SigmaEstimate {
        sigma_hat: sigma2.sqrt(),
        ci95: (lo.sqrt(), hi.sqrt()),
        method: "batch-means",
        samples: incs.len() as u64,
    })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CltReport {
    pub ks: KsReport,
    /// Correlation between the standardized first- and second-half
    /// increments; independent increments keep it near zero.
    pub increment_correlation: f64,
    /// `3 / sqrt(replicas)`.
    pub correlation_bound: f64,
    pub replicas_used: u64,
}

/// KS test of `(W_T - v T) / (sigma sqrt(T))` against the standard normal,
/// plus an independence check on the two half increments.
pub fn clt_diagnostic(
    params: &ModelParams,
    mode: InitialMode,
    replicas: u64,
    t: f64,
    v_hat: f64,
    sigma_hat: f64,
    streams: &RngStreams,
) -> Result<CltReport, ExperimentError> {
    let window = Window::auto(params, t);
    let params_c = *params;
    let streams_c = *streams;
    let per: Vec<Result<Option<(f64, f64)>, EventLogError>> = map_indexed(replicas, move |r| {
        let path = sample_walk(&params_c, &window, mode, &streams_c, r)?;
        if path.contaminated {
            return Ok(None);
        }
        Ok(Some((
            path.position_at(t / 2.0) as f64,
            path.position_at(t) as f64,
        )))
    });
    let mut half = Vec::new();
    let mut full = Vec::new();
    for res in per {
        if let Some((a, b)) = res? {
            half.push(a);
            full.push(b);
        }
    }
    if full.is_empty() {
        return Err(ExperimentError::AllContaminated(replicas));
    }
    let scale = sigma_hat * t.sqrt();
    let z: Vec<f64> = full.iter().map(|w| (w - v_hat * t) / scale).collect();
    let ks = ks_one_sample(&z, std_normal_cdf);
    let inc_a: Vec<f64> = half.iter().map(|w| w - v_hat * t / 2.0).collect();
    let inc_b: Vec<f64> = half
        .iter()
        .zip(&full)
        .map(|(a, b)| (b - a) - v_hat * t / 2.0)
        .collect();
    Ok(CltReport {
        ks,
        increment_correlation: pearson_correlation(&inc_a, &inc_b),
        correlation_bound: 3.0 / (full.len() as f64).sqrt(),
        replicas_used: full.len() as u64,
    })
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct LdpPoint {
    pub t: f64,
    pub exceedances: u64,
    pub replicas: u64,
    /// `t^{-1} log P(|W_t/t - v| >= epsilon)`, or an upper bound when fewer
    /// than five exceedances were seen.
    pub rate: f64,
    pub is_upper_bound: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct LdpReport {
    pub epsilon: f64,
    pub v_ref: f64,
    pub points: Vec<LdpPoint>,
}

/// Empirical decay rates of the speed deviation event on a grid of times.
pub fn ldp_decay(
    params: &ModelParams,
    mode: InitialMode,
    epsilon: f64,
    v_ref: f64,
    t_grid: &[f64],
    replicas: u64,
    streams: &RngStreams,
) -> Result<LdpReport, ExperimentError> {
    assert!(!t_grid.is_empty());
    let mut grid = t_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let horizon = *grid.last().unwrap();
    let window = Window::auto(params, horizon);
    let params_c = *params;
    let streams_c = *streams;
    let grid_c = grid.clone();
    let per: Vec<Result<Option<Vec<bool>>, EventLogError>> = map_indexed(replicas, move |r| {
        let path = sample_walk(&params_c, &window, mode, &streams_c, r)?;
        if path.contaminated {
            return Ok(None);
        }
        Ok(Some(
            grid_c
                .iter()
                .map(|&t| (path.position_at(t) as f64 / t - v_ref).abs() >= epsilon)
                .collect(),
        ))
    });
    let mut exceed = vec![0u64; grid.len()];
    let mut used = 0u64;
    for res in per {
        if let Some(flags) = res? {
            used += 1;
            for (i, f) in flags.into_iter().enumerate() {
                exceed[i] += u64::from(f);
            }
        }
    }
    if used == 0 {
        return Err(ExperimentError::AllContaminated(replicas));
    }
    let points = grid
        .iter()
        .zip(&exceed)
        .map(|(&t, &e)| {
            let (rate, ub) = if e >= 5 {
                ((e as f64 / used as f64).ln() / t, false)
            } else {
                ((((e + 1) as f64) / ((used + 1) as f64)).ln() / t, true)
            };
            LdpPoint {
                t,
                exceedances: e,
                replicas: used,
                rate,
                is_upper_bound: ub,
            }
        })
        .collect();
    Ok(LdpReport {
        epsilon,
        v_ref,
        points,
    })
}
