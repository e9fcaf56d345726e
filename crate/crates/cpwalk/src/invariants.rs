//! Exact pathwise invariants, checked over randomized small instances.
//!
//! These are couplings and identities that hold for every realization, not
//! statistically: any single failure is a bug. Rates are drawn as dyadic
//! fractions of a power-of-two total rate so that the rate constraint holds
//! exactly in floating point, and `alpha0 <= alpha1`, as the monotone
//! couplings require.

use crate::contact::{ConfigTrajectory, Configuration};
use crate::events::{sample_event_log, EventLog};
use crate::model::{ModelParams, Window};
use crate::rng::{RngStreams, StreamKind};
use crate::stats::speed::{subadditive_triple, InitialMode};
use crate::walker::{build_coupled_walks, build_walk, decompose, WalkDriver};
use rand::Rng;

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct InvariantReport {
    pub name: &'static str,
    pub trials: u64,
    pub failures: u64,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn random_params(rng: &mut impl Rng) -> ModelParams {
    let gamma = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
    let lambda = rng.gen_range(0.0..4.0);
    let k = rng.gen_range(1..=14) as f64;
    let m = rng.gen_range(k as i64..=15) as f64;
    let alpha0 = k / 16.0 * gamma;
    let alpha1 = m / 16.0 * gamma;
    ModelParams::new(
        lambda,
        gamma,
        alpha0,
        gamma - alpha0,
        alpha1,
        gamma - alpha1,
    )
    .expect("dyadic rates are exact")
}

fn trial_log(params: &ModelParams, window: &Window, seed: u64, trial: u64) -> EventLog {
    sample_event_log(
        params,
        window,
        RngStreams::new(seed).substream(trial, StreamKind::Env),
    )
    .expect("small window")
}

fn ordered_pair(
    window: &Window,
    seed: u64,
    trial: u64,
) -> (Configuration, Configuration) {
    let mut s = RngStreams::new(seed).substream(trial, StreamKind::Init);
    let lower = Configuration::bernoulli(window, 0.3, &mut s);
    let mut upper = lower.clone();
    for x in Configuration::bernoulli(window, 0.3, &mut s).iter_ones() {
        upper.set(x, true);
    }
    (lower, upper)
}

/// `eta <= eta'` implies the evolved states stay ordered at every event time.
pub fn check_attractiveness(trials: u64, seed: u64) -> InvariantReport {
    let window = Window::new(-15, 15, 5.0).unwrap();
    let mut failures = 0;
    for trial in 0..trials {
        let mut aux = RngStreams::new(seed).substream(trial, StreamKind::Aux);
        let params = random_params(&mut aux.rng);
        let log = trial_log(&params, &window, seed, trial);
        let (lower, upper) = ordered_pair(&window, seed, trial);
        let mut lo = lower;
        let mut hi = upper;
        let mut ok = lo.leq(&hi);
        for i in 0..log.len() {
            let (_, code) = log.raw(i);
            crate::contact::apply_event(&mut lo, window.x_min, code);
            crate::contact::apply_event(&mut hi, window.x_min, code);
            if !lo.leq(&hi) {
                ok = false;
                break;
            }
        }
        failures += u64::from(!ok);
    }
    InvariantReport {
        name: "attractiveness",
        trials,
        failures,
    }
}

/// Inside `[L_t(x), R_t(x)]` of a live cluster, the evolved state does not
/// depend on the initial configuration beyond `eta(x) = 1`; it equals
/// membership in the cluster.
pub fn check_sandwich(trials: u64, seed: u64) -> InvariantReport {
    let window = Window::new(-12, 12, 4.0).unwrap();
    let mut failures = 0;
    for trial in 0..trials {
        let mut aux = RngStreams::new(seed).substream(trial, StreamKind::Aux);
        let mut params = random_params(&mut aux.rng);
        params.lambda = aux.rng.gen_range(1.0..4.0);
        let log = trial_log(&params, &window, seed, trial);
        let trace = crate::contact::cluster::cluster(&log, 0, 0.0);
        let mut init = RngStreams::new(seed).substream(trial, StreamKind::Init);
        let mut ok = true;
        'outer: for _ in 0..3 {
            let mut eta = Configuration::bernoulli(&window, 0.4, &mut init);
            eta.set(0, true);
            let traj = ConfigTrajectory::build(&eta, &log).unwrap();
            for _ in 0..6 {
                let t: f64 = aux.rng.gen::<f64>() * 4.0;
                if !trace.alive_at(t) {
                    continue;
                }
                let members = trace.members_at(&log, t);
                let state = traj.query(t).unwrap();
                for y in trace.left_at(t)..=trace.right_at(t) {
                    if state.get(y) != members.get(y) {
                        ok = false;
                        break 'outer;
                    }
                }
            }
        }
        failures += u64::from(!ok);
    }
    InvariantReport {
        name: "sandwich-determinism",
        trials,
        failures,
    }
}

/// Walks driven by the same clock and uniforms on ordered environments stay
/// ordered at every jump.
pub fn check_walk_monotonicity(trials: u64, seed: u64) -> InvariantReport {
    let window = Window::new(-40, 40, 6.0).unwrap();
    let mut failures = 0;
    for trial in 0..trials {
        let mut aux = RngStreams::new(seed).substream(trial, StreamKind::Aux);
        let params = random_params(&mut aux.rng);
        let log = trial_log(&params, &window, seed, trial);
        let (lower, upper) = ordered_pair(&window, seed, trial);
        let t_lo = ConfigTrajectory::build(&lower, &log).unwrap();
        let t_hi = ConfigTrajectory::build(&upper, &log).unwrap();
        let t_one = ConfigTrajectory::build(&Configuration::full(&window), &log).unwrap();
        let driver = WalkDriver::sample(
            &params,
            window.horizon,
            RngStreams::new(seed).substream(trial, StreamKind::Walk),
        );
        let walks = build_coupled_walks(&[&t_lo, &t_hi, &t_one], &params, &driver);
        let ok = (0..=driver.len()).all(|k| {
            walks[0].skeleton()[k] <= walks[1].skeleton()[k]
                && walks[1].skeleton()[k] <= walks[2].skeleton()[k]
        });
        failures += u64::from(!ok);
    }
    InvariantReport {
        name: "walk-monotonicity",
        trials,
        failures,
    }
}

fn random_walk_instance(
    seed: u64,
    trial: u64,
    window: &Window,
) -> (ModelParams, WalkDriver, crate::walker::WalkPath) {
    let mut aux = RngStreams::new(seed).substream(trial, StreamKind::Aux);
    let params = random_params(&mut aux.rng);
    let log = trial_log(&params, window, seed, trial);
    let (_, upper) = ordered_pair(window, seed, trial);
    let traj = ConfigTrajectory::build(&upper, &log).unwrap();
    let driver = WalkDriver::sample(
        &params,
        window.horizon,
        RngStreams::new(seed).substream(trial, StreamKind::Walk),
    );
    let path = build_walk(&traj, &params, &driver);
    (params, driver, path)
}

/// `|W_t| <= N_t`: the walk cannot outrun its clock.
pub fn check_clock_domination(trials: u64, seed: u64) -> InvariantReport {
    let window = Window::new(-40, 40, 8.0).unwrap();
    let mut failures = 0;
    for trial in 0..trials {
        let (_, _, path) = random_walk_instance(seed, trial, &window);
        let ok = path
            .skeleton()
            .iter()
            .enumerate()
            .all(|(k, &s)| s.unsigned_abs() as usize <= k);
        failures += u64::from(!ok);
    }
    InvariantReport {
        name: "clock-domination",
        trials,
        failures,
    }
}

/// `sup_{s in [0,1]} |W_{n+s} - W_n| <= N_{n+1} - N_n` for every integer `n`.
pub fn check_increment_bound(trials: u64, seed: u64) -> InvariantReport {
    let window = Window::new(-40, 40, 8.0).unwrap();
    let mut failures = 0;
    for trial in 0..trials {
        let (_, driver, path) = random_walk_instance(seed, trial, &window);
        let mut ok = true;
        for n in 0..window.horizon as usize {
            let t0 = n as f64;
            let base = path.position_at(t0);
            let lo = path.count_at(t0);
            let hi = path.count_at(t0 + 1.0);
            let max_exc = (lo..=hi)
                .map(|k| (path.skeleton()[k] - base).abs() as usize)
                .max()
                .unwrap_or(0);
            if max_exc > driver.count_at(t0 + 1.0) - driver.count_at(t0) {
                ok = false;
                break;
            }
        }
        failures += u64::from(!ok);
    }
    InvariantReport {
        name: "increment-bound",
        trials,
        failures,
    }
}

/// `W_t = S0_{N0_t} + S1_{N1_t}` exactly, at jump times and between them.
pub fn check_decomposition(trials: u64, seed: u64) -> InvariantReport {
    let window = Window::new(-40, 40, 8.0).unwrap();
    let mut failures = 0;
    for trial in 0..trials {
        let (params, _, path) = random_walk_instance(seed, trial, &window);
        let dec = decompose(&path, params.gamma);
        let mut aux = RngStreams::new(seed ^ 0xd1ce).substream(trial, StreamKind::Aux);
        let mut ok = true;
        for _ in 0..20 {
            let t: f64 = aux.rng.gen::<f64>() * window.horizon;
            if dec.s0_at(t) + dec.s1_at(t) != path.position_at(t) {
                ok = false;
                break;
            }
        }
        for &t in path.jump_times() {
            if dec.s0_at(t) + dec.s1_at(t) != path.position_at(t) {
                ok = false;
                break;
            }
        }
        failures += u64::from(!ok);
    }
    InvariantReport {
        name: "jump-decomposition",
        trials,
        failures,
    }
}

/// `X_{0,n} <= X_{0,m} + X_{m,n}` on every realization.
pub fn check_subadditivity(trials: u64, seed: u64) -> InvariantReport {
    let mut failures = 0;
    for trial in 0..trials {
        let mut aux = RngStreams::new(seed).substream(trial, StreamKind::Aux);
        let params = random_params(&mut aux.rng);
        let n = aux.rng.gen_range(2..=5) as f64;
        let m = aux.rng.gen_range(1..n as i64) as f64;
        let triple =
            subadditive_triple(&params, m, n, &RngStreams::new(seed ^ 0x5ab), trial).unwrap();
        failures += u64::from(triple.x_0n > triple.x_0m + triple.x_mn);
    }
    InvariantReport {
        name: "subadditivity",
        trials,
        failures,
    }
}

/// No disagreement between a partial initial state and the all-ones state
/// inside the safe region built from wide-spread markers.
pub fn check_safe_region(trials: u64, seed: u64) -> InvariantReport {
    let window = Window::new(-40, 40, 6.0).unwrap();
    let mut failures = 0;
    for trial in 0..trials {
        let mut aux = RngStreams::new(seed).substream(trial, StreamKind::Aux);
        let mut params = random_params(&mut aux.rng);
        params.lambda = aux.rng.gen_range(1.5..4.0);
        // any slope used consistently for markers and cones keeps the
        // agreement exact; 1.0 gives a well-populated safe region
        let outcome = crate::stats::coupling::run_replica(
            &params,
            &window,
            InitialMode::Bernoulli(0.4),
            1.0,
            &RngStreams::new(seed ^ 0xcafe),
            trial,
        )
        .unwrap();
        failures += u64::from(outcome.safe_violations > 0);
    }
    InvariantReport {
        name: "safe-region-agreement",
        trials,
        failures,
    }
}

/// Run every suite with `trials` randomized instances each.
pub fn run_all(trials: u64, seed: u64) -> Vec<InvariantReport> {
    vec![
        check_attractiveness(trials, seed),
        check_sandwich(trials, seed.wrapping_add(1)),
        check_walk_monotonicity(trials, seed.wrapping_add(2)),
        check_clock_domination(trials, seed.wrapping_add(3)),
        check_increment_bound(trials, seed.wrapping_add(4)),
        check_decomposition(trials, seed.wrapping_add(5)),
        check_subadditivity(trials, seed.wrapping_add(6)),
        check_safe_region(trials, seed.wrapping_add(7)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_on_a_quick_run() {
        for report in run_all(40, 99) {
            assert!(
                report.passed(),
                "{}: {}/{} failures",
                report.name,
                report.failures,
                report.trials
            );
        }
    }

    #[test]
    fn safe_region_suite_is_not_vacuous() {
        // the agreement check only means something if markers and
        // disagreements actually occur in the sampled instances
        let window = Window::new(-40, 40, 6.0).unwrap();
        let mut trials_with_markers = 0;
        let mut trials_with_disagreement = 0;
        for trial in 0..30u64 {
            let params = ModelParams::new(2.5, 1.0, 0.25, 0.75, 0.75, 0.25).unwrap();
            let out = crate::stats::coupling::run_replica(
                &params,
                &window,
                InitialMode::Bernoulli(0.4),
                1.0,
                &RngStreams::new(0xcafe),
                trial,
            )
            .unwrap();
            trials_with_markers += usize::from(out.markers > 0);
            trials_with_disagreement +=
                usize::from(out.last_disagreement.iter().any(|&l| l > 0.0));
        }
        assert!(trials_with_markers > 20, "markers in {trials_with_markers}/30");
        assert!(
            trials_with_disagreement > 20,
            "disagreements in {trials_with_disagreement}/30"
        );
    }
}
