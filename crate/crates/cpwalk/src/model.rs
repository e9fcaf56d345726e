//! Model parameters and the finite space-time window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model parameters:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

/// Static rates of the environment and the walk.
///
/// `lambda` is the infection rate per infected neighbour, infected sites heal
/// at rate 1. The walk jumps at total rate `gamma` everywhere; on a healthy
/// site it steps right with rate `alpha0` and left with rate `beta0`, on an
/// infected site with rates `alpha1`/`beta1`. Both pairs must sum to `gamma`
/// exactly (within one ulp of the stored values).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub gamma: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

fn ulp_eq(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    if a.is_nan() || b.is_nan() || a.signum() != b.signum() {
        return false;
    }
    a.to_bits().abs_diff(b.to_bits()) <= 1
}

impl ModelParams {
    pub fn new(
        lambda: f64,
        gamma: f64,
        alpha0: f64,
        beta0: f64,
        alpha1: f64,
        beta1: f64,
    ) -> Result<Self, ModelError> {
        Self::build(lambda, gamma, alpha0, beta0, alpha1, beta1, false)
    }

    /// Like [`ModelParams::new`] but permits individual walk rates to be zero
    /// (the total rate `gamma` must still be positive).
    pub fn new_allow_zero_rates(
        lambda: f64,
        gamma: f64,
        alpha0: f64,
        beta0: f64,
        alpha1: f64,
        beta1: f64,
    ) -> Result<Self, ModelError> {
        Self::build(lambda, gamma, alpha0, beta0, alpha1, beta1, true)
    }

    fn build(
        lambda: f64,
        gamma: f64,
        alpha0: f64,
        beta0: f64,
        alpha1: f64,
        beta1: f64,
        allow_zero: bool,
    ) -> Result<Self, ModelError> {
        let mut violations = Vec::new();
        for (name, v) in [
            ("lambda", lambda),
            ("gamma", gamma),
            ("alpha0", alpha0),
            ("beta0", beta0),
            ("alpha1", alpha1),
            ("beta1", beta1),
        ] {
            if !v.is_finite() {
                violations.push(format!("{name} = {v} is not finite"));
            }
        }
        if violations.is_empty() {
            if lambda < 0.0 {
                violations.push(format!("lambda = {lambda} must be >= 0"));
            }
            if gamma <= 0.0 {
                violations.push(format!("gamma = {gamma} must be > 0"));
            }
            for (name, v) in [
                ("alpha0", alpha0),
                ("beta0", beta0),
                ("alpha1", alpha1),
                ("beta1", beta1),
            ] {
                if v < 0.0 {
                    violations.push(format!("{name} = {v} must be >= 0"));
                } else if v == 0.0 && !allow_zero {
                    violations.push(format!(
                        "{name} = 0 requires the allow-zero-rates flag"
                    ));
                }
            }
            if !ulp_eq(alpha0 + beta0, gamma) {
                violations.push(format!(
                    "alpha0 + beta0 = {} must equal gamma = {gamma}",
                    alpha0 + beta0
                ));
            }
            if !ulp_eq(alpha1 + beta1, gamma) {
                violations.push(format!(
                    "alpha1 + beta1 = {} must equal gamma = {gamma}",
                    alpha1 + beta1
                ));
            }
        }
        if violations.is_empty() {
            Ok(Self {
                lambda,
                gamma,
                alpha0,
                beta0,
                alpha1,
                beta1,
            })
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    /// Drift on healthy sites, in sites per unit time.
    pub fn v0(&self) -> f64 {
        self.alpha0 - self.beta0
    }

    /// Drift on infected sites.
    pub fn v1(&self) -> f64 {
        self.alpha1 - self.beta1
    }

    pub fn max_abs_drift(&self) -> f64 {
        self.v0().abs().max(self.v1().abs())
    }

    /// Rates with right/left jump roles exchanged on both site states.
    /// The walk under the swapped rates is the mirror image of the original.
    pub fn swapped(&self) -> Self {
        Self {
            lambda: self.lambda,
            gamma: self.gamma,
            alpha0: self.beta0,
            beta0: self.alpha0,
            alpha1: self.beta1,
            beta1: self.alpha1,
        }
    }

    /// Same rates on healthy and infected sites, so the walk is independent
    /// of the environment. Used for calibration controls.
    pub fn homogeneous(lambda: f64, gamma: f64, alpha: f64) -> Result<Self, ModelError> {
        Self::new(lambda, gamma, alpha, gamma - alpha, alpha, gamma - alpha)
    }
}

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("window bounds must satisfy x_min < x_max (got {x_min}..{x_max})")]
    Bounds { x_min: i64, x_max: i64 },
    #[error("window horizon must be > 0 (got {0})")]
    Horizon(f64),
}

/// Finite truncation of the lattice and the time axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: i64,
    pub x_max: i64,
    pub horizon: f64,
}

impl Window {
    pub fn new(x_min: i64, x_max: i64, horizon: f64) -> Result<Self, WindowError> {
        if x_min >= x_max {
            return Err(WindowError::Bounds { x_min, x_max });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(WindowError::Horizon(horizon));
        }
        Ok(Self {
            x_min,
            x_max,
            horizon,
        })
    }

    /// Window centred at the origin whose half-width covers the light cone
    /// `(2 lambda + gamma + 4) * horizon`, so that nothing inside it can be
    /// influenced by the missing lattice outside during the run.
    pub fn auto(params: &ModelParams, horizon: f64) -> Self {
        let half = ((2.0 * params.lambda + params.gamma + 4.0) * horizon).ceil() as i64;
        let half = half.max(2);
        Self {
            x_min: -half,
            x_max: half,
            horizon,
        }
    }

    pub fn width(&self) -> usize {
        (self.x_max - self.x_min + 1) as usize
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Whether `x` is within `margin` sites of either wall.
    pub fn near_boundary(&self, x: i64, margin: i64) -> bool {
        x - self.x_min < margin || self.x_max - x < margin
    }

    pub fn index(&self, x: i64) -> usize {
        debug_assert!(self.contains(x));
        (x - self.x_min) as usize
    }

    pub fn site(&self, index: usize) -> i64 {
        self.x_min + index as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_constraint_enforced_within_one_ulp() {
        assert!(ModelParams::new(1.0, 1.0, 0.3, 0.7, 0.8, 0.2).is_ok());
        // 0.1 + 0.2 != 0.3 in binary, but is within one ulp
        assert!(ModelParams::new(1.0, 0.1 + 0.2, 0.1, 0.2, 0.15, 0.15).is_ok());
        let err = ModelParams::new(1.0, 1.0, 0.3, 0.6, 0.8, 0.2).unwrap_err();
        let ModelError::Invalid(v) = err;
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn zero_rates_require_flag() {
        assert!(ModelParams::new(1.0, 1.0, 0.0, 1.0, 0.5, 0.5).is_err());
        assert!(ModelParams::new_allow_zero_rates(1.0, 1.0, 0.0, 1.0, 0.5, 0.5).is_ok());
        // gamma must stay positive even with the flag
        assert!(ModelParams::new_allow_zero_rates(1.0, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn validation_reports_every_violation() {
        let err = ModelParams::new(-1.0, 1.0, 0.3, 0.6, 0.8, 0.3).unwrap_err();
        let ModelError::Invalid(v) = err;
        assert!(v.len() >= 3, "{v:?}");
    }

    #[test]
    fn swapped_negates_drifts() {
        let p = ModelParams::new(2.0, 1.0, 0.8, 0.2, 0.9, 0.1).unwrap();
        let s = p.swapped();
        assert_eq!(s.v0(), -p.v0());
        assert_eq!(s.v1(), -p.v1());
        assert_eq!(s.gamma, p.gamma);
    }

    #[test]
    fn auto_window_covers_light_cone() {
        let p = ModelParams::new(4.0, 1.0, 0.8, 0.2, 0.9, 0.1).unwrap();
        let w = Window::auto(&p, 10.0);
        assert!(w.x_max as f64 >= (2.0 * 4.0 + 1.0 + 4.0) * 10.0);
        assert_eq!(w.x_min, -w.x_max);
    }

    #[test]
    fn window_rejects_bad_bounds() {
        assert!(Window::new(3, 3, 1.0).is_err());
        assert!(Window::new(0, 1, 0.0).is_err());
    }
}
