//! Cone-coupling experiment: evolve a partial initial state and the all-ones
//! state on one log, and measure where they still disagree.
//!
//! Per replica, every site keeps the supremum of its disagreement times.
//! A replica "disagrees after T inside the cone of slope m" when some site
//! `x` has a disagreement time above `max(T, |x| / m)`. The safe region built
//! from wide-spread markers must contain no disagreement at all; that check
//! is exact, not statistical.

use super::speed::{initial_config, ExperimentError, InitialMode};
use crate::contact::cluster::wide_spread_markers;
use crate::contact::Configuration;
use crate::events::{sample_event_log, EventLogError};
use crate::model::{ModelParams, Window};
use crate::replicas::map_indexed;
use crate::rng::{RngStreams, StreamKind};

#[derive(Clone, Debug, serde::Serialize)]
pub struct CouplingReport {
    pub m: f64,
    pub iota: f64,
    /// `(T, fraction of replicas with any disagreement in the cone past T)`.
    pub disagreement: Vec<(f64, f64)>,
    /// Always true: the per-replica event is monotone in T.
    pub non_increasing: bool,
    pub safe_region_violations: u64,
    pub replicas: u64,
    pub marker_count_mean: f64,
    pub marker_gap_mean: f64,
}

pub(crate) struct ReplicaOutcome {
    /// Supremum of disagreement times per site index (0 = none).
    pub(crate) last_disagreement: Vec<f64>,
    pub(crate) safe_violations: u64,
    pub(crate) markers: usize,
    pub(crate) gap_sum: f64,
    pub(crate) gaps: usize,
}

pub(crate) fn run_replica(
    params: &ModelParams,
    window: &Window,
    mode: InitialMode,
    iota: f64,
    streams: &RngStreams,
    r: u64,
) -> Result<ReplicaOutcome, EventLogError> {
    let log = sample_event_log(params, window, streams.substream(r, StreamKind::Env))?;
    let initial_mu = initial_config(params, window, mode, streams, r)?;
    let mut state_mu = initial_mu.clone();
    let mut state_one = Configuration::full(window);
    let width = window.width();
    let mut open: Vec<f64> = vec![f64::NAN; width]; // start of open disagreement
    let mut last: Vec<f64> = vec![0.0; width];
    let horizon = window.horizon;
    // initial disagreements open at time zero
    for i in 0..width {
        let x = window.site(i);
        if state_mu.get(x) != state_one.get(x) {
            open[i] = 0.0;
        }
    }
    let mut touched = [0i64; 2];
    for gi in 0..log.len() {
        let (t, code) = log.raw(gi);
        let mut n_touched = 0;
        let a = crate::contact::apply_event(&mut state_mu, window.x_min, code);
        let b = crate::contact::apply_event(&mut state_one, window.x_min, code);
        for change in [a, b].into_iter().flatten() {
            let site = change.0;
            if n_touched == 0 || touched[0] != site {
                touched[n_touched] = site;
                n_touched += 1;
            }
        }
        for &site in &touched[..n_touched] {
            let i = window.index(site);
            let disagree = state_mu.get(site) != state_one.get(site);
            if disagree && open[i].is_nan() {
                open[i] = t;
            } else if !disagree && !open[i].is_nan() {
                last[i] = last[i].max(t);
                open[i] = f64::NAN;
            }
        }
    }
    for i in 0..width {
        if !open[i].is_nan() {
            last[i] = horizon;
        }
    }
    // safe region from the markers of the partial initial state
    let markers = wide_spread_markers(&log, &initial_mu, iota, horizon);
    let mut safe_violations = 0u64;
    if !markers.is_empty() {
        for i in 0..width {
            if last[i] == 0.0 {
                continue;
            }
            let x = window.site(i);
            // nearest marker
            let pos = markers.partition_point(|&z| z < x);
            let mut dist = i64::MAX;
            if pos < markers.len() {
                dist = dist.min((markers[pos] - x).abs());
            }
            if pos > 0 {
                dist = dist.min((x - markers[pos - 1]).abs());
            }
            let t_safe = (2.0 / iota).max(2.0 * (dist as f64 + 1.0) / iota);
            if last[i] > t_safe {
                safe_violations += 1;
            }
        }
    }
    let mut gap_sum = 0.0;
    for w in markers.windows(2) {
        gap_sum += (w[1] - w[0]) as f64;
    }
    Ok(ReplicaOutcome {
        last_disagreement: last,
        safe_violations,
        markers: markers.len(),
        gap_sum,
        gaps: markers.len().saturating_sub(1),
    })
}

/// Fraction of replicas with any disagreement between the `mode` state and
/// the all-ones state inside the cone `|x| <= m t` past each `T` of the grid.
pub fn coupling_experiment(
    params: &ModelParams,
    mode: InitialMode,
    m: f64,
    iota: f64,
    t_grid: &[f64],
    horizon: f64,
    replicas: u64,
    streams: &RngStreams,
) -> Result<CouplingReport, ExperimentError> {
    assert!(m > 0.0 && iota > 0.0);
    let window = Window::auto(params, horizon);
    let params_c = *params;
    let streams_c = *streams;
    let per: Vec<Result<ReplicaOutcome, EventLogError>> = map_indexed(replicas, move |r| {
        run_replica(&params_c, &window, mode, iota, &streams_c, r)
    });
    let mut grid = t_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut counts = vec![0u64; grid.len()];
    let mut safe_violations = 0u64;
    let mut marker_total = 0usize;
    let mut gap_sum = 0.0;
    let mut gap_count = 0usize;
    let mut n = 0u64;
    for res in per {
        let outcome = res?;
        n += 1;
        safe_violations += outcome.safe_violations;
        marker_total += outcome.markers;
        gap_sum += outcome.gap_sum;
        gap_count += outcome.gaps;
        for (ti, &t_cut) in grid.iter().enumerate() {
            let any = outcome
                .last_disagreement
                .iter()
                .enumerate()
                .any(|(i, &l)| {
                    let x = window.site(i);
                    l > t_cut.max(x.abs() as f64 / m)
                });
            counts[ti] += u64::from(any);
        }
    }
    if n == 0 {
        return Err(ExperimentError::AllContaminated(replicas));
    }
    let disagreement: Vec<(f64, f64)> = grid
        .iter()
        .zip(&counts)
        .map(|(&t, &c)| (t, c as f64 / n as f64))
        .collect();
    let non_increasing = disagreement.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(CouplingReport {
        m,
        iota,
        disagreement,
        non_increasing,
        safe_region_violations: safe_violations,
        replicas: n,
        marker_count_mean: marker_total as f64 / n as f64,
        marker_gap_mean: if gap_count > 0 {
            gap_sum / gap_count as f64
        } else {
            f64::NAN
        },
    })
}
