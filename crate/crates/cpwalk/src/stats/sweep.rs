//! Sweep of the infection rate: speed, edge speed and density per grid
//! point, with bracketing of the two qualitative thresholds (speed sign
//! change, and edge speed overtaking the walk drifts).

use super::speed::{estimate_speed_lln, ExperimentError, InitialMode, SpeedEstimate};
use super::summary::Z95;
use crate::contact::cluster::{estimate_iota, IotaError, IotaEstimate};
use crate::contact::sample_equilibrium;
use crate::model::{ModelParams, Window};
use crate::rng::{RngStreams, StreamKind};

#[derive(Clone, Debug, serde::Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub speed: SpeedEstimate,
    pub iota: Option<IotaEstimate>,
    pub rho_hat: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Adjacent speed means non-decreasing within combined CIs.
    pub monotone_within_ci: bool,
    /// Grid bracket around the speed sign change, when the CIs separate it.
    pub lambda_star_bracket: Option<(f64, f64)>,
    /// Grid bracket around `iota = max(|v0|, |v1|)`.
    pub lambda_w_bracket: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Debug)]
pub struct SweepConfig {
    pub replicas: u64,
    pub horizon: f64,
    pub burn_in: f64,
    pub iota_replicas: u64,
    pub iota_horizon: f64,
    /// Extra bisection refinements of the `lambda_w` bracket.
    pub lambda_w_bisections: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            replicas: 200,
            horizon: 60.0,
            burn_in: 40.0,
            iota_replicas: 200,
            iota_horizon: 40.0,
            lambda_w_bisections: 0,
        }
    }
}

fn with_lambda(template: &ModelParams, lambda: f64) -> ModelParams {
    ModelParams {
        lambda,
        ..*template
    }
}

fn density_estimate(params: &ModelParams, burn_in: f64, streams: &RngStreams) -> f64 {
    let window = Window::new(-200, 200, burn_in.max(1.0)).unwrap();
    let reps = 20u64;
    let mut sum = 0.0;
    for r in 0..reps {
        sum += sample_equilibrium(
            params,
            &window,
            burn_in,
            streams.substream(r, StreamKind::Burnin),
        )
        .map(|s| s.density)
        .unwrap_or(0.0);
    }
    sum / reps as f64
}

pub fn sweep(
    template: &ModelParams,
    lambda_grid: &[f64],
    config: &SweepConfig,
    streams: &RngStreams,
) -> Result<SweepResult, ExperimentError> {
    assert!(!lambda_grid.is_empty());
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let params = with_lambda(template, lambda);
        let speed = estimate_speed_lln(
            &params,
            InitialMode::Equilibrium {
                burn_in: config.burn_in,
            },
            config.replicas,
            config.horizon,
            streams,
        )?;
        let iota = match estimate_iota(&params, config.iota_replicas, config.iota_horizon, streams)
        {
            Ok(est) => Some(est),
            Err(IotaError::NoSurvivors { .. }) => None,
            Err(IotaError::Events(e)) => return Err(e.into()),
        };
        let rho_hat = density_estimate(&params, config.burn_in, streams);
        points.push(SweepPoint {
            lambda,
            speed,
            iota,
            rho_hat,
        });
    }
    let mut monotone = true;
    for w in points.windows(2) {
        if w[1].speed.v_hat < w[0].speed.v_hat - Z95 * (w[0].speed.se + w[1].speed.se) {
            monotone = false;
        }
    }
    let lambda_star_bracket = points.windows(2).find_map(|w| {
        let (a, b) = (&w[0].speed, &w[1].speed);
        (a.v_hat + Z95 * a.se < 0.0 && b.v_hat - Z95 * b.se > 0.0)
            .then_some((w[0].lambda, w[1].lambda))
    });
    let drift = template.max_abs_drift();
    let gap = |p: &SweepPoint| p.iota.as_ref().map(|i| (i.iota_hat - drift, i.se));
    let mut lambda_w_bracket = points.windows(2).find_map(|w| {
        let below = match gap(&w[0]) {
            None => true, // no surviving clusters: edge speed is effectively 0
            Some((g, se)) => g + Z95 * se < 0.0,
        };
        let above = matches!(gap(&w[1]), Some((g, se)) if g - Z95 * se > 0.0);
        (below && above).then_some((w[0].lambda, w[1].lambda))
    });
    // optional bisection refinement of the lambda_w bracket
    if let Some((mut lo, mut hi)) = lambda_w_bracket {
        for _ in 0..config.lambda_w_bisections {
            let mid = 0.5 * (lo + hi);
            let params = with_lambda(template, mid);
            match estimate_iota(&params, config.iota_replicas, config.iota_horizon, streams) {
                Ok(est) => {
                    if est.iota_hat - Z95 * est.se > drift {
                        hi = mid;
                    } else if est.iota_hat + Z95 * est.se < drift {
                        lo = mid;
                    } else {
                        break; // CI straddles the drift level
                    }
                }
                Err(_) => lo = mid,
            }
        }
        lambda_w_bracket = Some((lo, hi));
    }
    Ok(SweepResult {
        points,
        monotone_within_ci: monotone,
        lambda_star_bracket,
        lambda_w_bracket,
    })
}
