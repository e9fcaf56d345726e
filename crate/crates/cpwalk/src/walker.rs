//! The random walk on top of an evolved environment.
//!
//! The walk is a deterministic function of its driver (a rate-gamma Poisson
//! clock and one uniform per jump) and the environment trajectory: at the
//! k-th jump time the skeleton steps right when the uniform is at most
//! `alpha_i / gamma`, where `i` is the state of the currently occupied site
//! at that jump time (state looked up right-continuously). Sharing one
//! driver across ordered environments orders the walks pathwise.

use crate::contact::{ConfigTrajectory, TrajCursor};
use crate::contact::cluster::BOUNDARY_MARGIN;
use crate::model::ModelParams;
use crate::rng::SubStream;
use rand::Rng;

/// Jump times and uniforms driving one walk, independent of any event log.
#[derive(Clone, Debug)]
pub struct WalkDriver {
    gamma: f64,
    horizon: f64,
    jump_times: Vec<f64>,
    uniforms: Vec<f64>,
}

impl WalkDriver {
    pub fn sample(params: &ModelParams, horizon: f64, mut stream: SubStream) -> Self {
        let mut jump_times = Vec::new();
        let mut uniforms = Vec::new();
        let mut t = 0.0_f64;
        loop {
            let u: f64 = stream.rng.gen();
            t += -(1.0 - u).ln() / params.gamma;
            if t > horizon {
                break;
            }
            jump_times.push(t);
            uniforms.push(stream.rng.gen());
        }
        Self {
            gamma: params.gamma,
            horizon,
            jump_times,
            uniforms,
        }
    }

    /// Explicit driver for tests and frozen-walk constructions.
    pub fn from_parts(gamma: f64, horizon: f64, jump_times: Vec<f64>, uniforms: Vec<f64>) -> Self {
        assert_eq!(jump_times.len(), uniforms.len());
        assert!(jump_times.windows(2).all(|w| w[0] < w[1]));
        assert!(jump_times.iter().all(|&t| t > 0.0 && t <= horizon));
        Self {
            gamma,
            horizon,
            jump_times,
            uniforms,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    /// Number of jumps up to and including time `t`.
    pub fn count_at(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }

    /// The driver seen from time `t0`: jumps after `t0` shifted to start at
    /// zero, paired with the uniforms that the original walk would use.
    pub fn suffix(&self, t0: f64) -> WalkDriver {
        let start = self.count_at(t0);
        WalkDriver {
            gamma: self.gamma,
            horizon: self.horizon - t0,
            jump_times: self.jump_times[start..].iter().map(|t| t - t0).collect(),
            uniforms: self.uniforms[start..].to_vec(),
        }
    }
}

/// A realized walk: skeleton positions, jump times and the environment state
/// seen at each jump.
#[derive(Clone, Debug)]
pub struct WalkPath {
    /// `positions[k]` is the skeleton after `k` jumps; `positions[0] = 0`.
    positions: Vec<i64>,
    jump_times: Vec<f64>,
    env_states: Vec<bool>,
    pub contaminated: bool,
    /// Set when the walk left the window and the path was cut short.
    pub truncated: bool,
    horizon: f64,
}

impl WalkPath {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn skeleton(&self) -> &[i64] {
        &self.positions
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn env_states(&self) -> &[bool] {
        &self.env_states
    }

    /// Number of jumps up to time `t`.
    pub fn count_at(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }

    /// `W_t`, the skeleton evaluated at the jump count at time `t`.
    pub fn position_at(&self, t: f64) -> i64 {
        self.positions[self.count_at(t)]
    }

    pub fn end_position(&self) -> i64 {
        *self.positions.last().unwrap()
    }

    /// CSV rows `jump_index,time,position,env_state` (header included).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "jump_index,time,position,env_state")?;
        for k in 0..self.jump_times.len() {
            writeln!(
                out,
                "{},{},{},{}",
                k + 1,
                self.jump_times[k],
                self.positions[k + 1],
                u8::from(self.env_states[k])
            )?;
        }
        Ok(())
    }
}

/// Build the walk from the recursion `up iff U <= alpha_i / gamma`. This is
/// the indicator form `U <= a0/g or (a0/g < U <= a1/g and state = 1)`
/// whenever `alpha0 <= alpha1`, and stays the correct law when the rates are
/// swapped for reflection runs.
pub fn build_walk(traj: &ConfigTrajectory, params: &ModelParams, driver: &WalkDriver) -> WalkPath {
    assert!(
        driver.horizon() <= traj.horizon() + 1e-12,
        "driver horizon exceeds trajectory horizon"
    );
    let mut cursor = traj.cursor();
    build_walk_inner(&mut cursor, params, driver)
}

fn build_walk_inner(
    cursor: &mut TrajCursor<'_>,
    params: &ModelParams,
    driver: &WalkDriver,
) -> WalkPath {
    let up0 = params.alpha0 / params.gamma;
    let up1 = params.alpha1 / params.gamma;
    let state = cursor.state();
    let (x_min, x_max) = (state.x_min(), state.x_max());
    let mut positions = Vec::with_capacity(driver.len() + 1);
    positions.push(0_i64);
    let mut env_states = Vec::with_capacity(driver.len());
    let mut jump_times = Vec::with_capacity(driver.len());
    let mut s = 0_i64;
    let mut contaminated = false;
    let mut truncated = false;
    for k in 0..driver.len() {
        let t = driver.jump_times[k];
        if s < x_min || s > x_max {
            truncated = true;
            contaminated = true;
            break;
        }
        cursor.advance_to(t);
        let infected = cursor.get(s);
        let threshold = if infected { up1 } else { up0 };
        s += if driver.uniforms[k] <= threshold { 1 } else { -1 };
        positions.push(s);
        env_states.push(infected);
        jump_times.push(t);
        if s - x_min < BOUNDARY_MARGIN || x_max - s < BOUNDARY_MARGIN {
            contaminated = true;
        }
    }
    WalkPath {
        positions,
        jump_times,
        env_states,
        contaminated,
        truncated,
        horizon: driver.horizon(),
    }
}

/// One walk per trajectory, all driven by the same clock and uniforms.
pub fn build_coupled_walks(
    trajs: &[&ConfigTrajectory],
    params: &ModelParams,
    driver: &WalkDriver,
) -> Vec<WalkPath> {
    trajs
        .iter()
        .map(|traj| build_walk(traj, params, driver))
        .collect()
}

/// Split of the walk into the partial walks taken on healthy and on
/// infected sites: `W_t = S0_{N0_t} + S1_{N1_t}` exactly.
#[derive(Clone, Debug)]
pub struct JumpDecomposition {
    jump_times: Vec<f64>,
    /// `n1[k]` = jumps taken from infected sites among the first `k`.
    n1: Vec<u32>,
    /// `s0[k]`, `s1[k]` = displacement accumulated on healthy/infected sites
    /// after `k` jumps.
    s0: Vec<i64>,
    s1: Vec<i64>,
    gamma: f64,
}

impl JumpDecomposition {
    pub fn n1_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.n1[k] as usize
    }

    pub fn n0_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        k - self.n1[k] as usize
    }

    pub fn s0_at(&self, t: f64) -> i64 {
        self.s0[self.jump_times.partition_point(|&s| s <= t)]
    }

    pub fn s1_at(&self, t: f64) -> i64 {
        self.s1[self.jump_times.partition_point(|&s| s <= t)]
    }

    /// Fraction of clock ticks spent on infected sites, `N1_t / (gamma t)`.
    pub fn rho_eff_at(&self, t: f64) -> f64 {
        self.n1_at(t) as f64 / (self.gamma * t)
    }
}

pub fn decompose(path: &WalkPath, gamma: f64) -> JumpDecomposition {
    let n = path.jumps();
    let mut n1 = Vec::with_capacity(n + 1);
    let mut s0 = Vec::with_capacity(n + 1);
    let mut s1 = Vec::with_capacity(n + 1);
    n1.push(0);
    s0.push(0);
    s1.push(0);
    for k in 0..n {
        let step = path.positions[k + 1] - path.positions[k];
        let infected = path.env_states[k];
        n1.push(n1[k] + u32::from(infected));
        s0.push(s0[k] + if infected { 0 } else { step });
        s1.push(s1[k] + if infected { step } else { 0 });
    }
    JumpDecomposition {
        jump_times: path.jump_times.clone(),
        n1,
        s0,
        s1,
        gamma,
    }
}
