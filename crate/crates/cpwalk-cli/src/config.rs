//! Run configuration: TOML file merged with command-line overrides, fully
//! resolved and embedded into every output for provenance.

use cpwalk::model::{ModelError, ModelParams};
use cpwalk::stats::InitialMode;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for v in &self.0 {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Optional values as written in a config file; every field can also be set
/// by a flag, and flags win.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha0: Option<f64>,
    pub beta0: Option<f64>,
    pub alpha1: Option<f64>,
    pub beta1: Option<f64>,
    pub allow_zero_rates: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: Option<f64>,
    pub replicas: Option<u64>,
    pub seed: Option<u64>,
    /// `"auto"` or an explicit half-width.
    pub window: Option<toml::Value>,
    pub initial: Option<String>,
    pub workers: Option<usize>,
    pub out: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub confirm_window: Option<f64>,
    pub cone_m: Option<f64>,
    pub epsilon: Option<f64>,
    pub burn_in: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub t_grid: Option<Vec<f64>>,
    pub n_grid: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub iota: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindowSpec {
    Auto,
    HalfWidth(i64),
}

/// Everything a run needs, with all defaults applied. Serialized into each
/// summary so outputs are self-describing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResolvedConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub allow_zero_rates: bool,
    pub horizon: f64,
    pub replicas: u64,
    pub seed: u64,
    pub window: WindowSpec,
    pub initial: String,
    pub workers: usize,
    pub out: String,
    pub confirm_window: f64,
    pub cone_m: Option<f64>,
    pub epsilon: Option<f64>,
    pub burn_in: f64,
    pub lambdas: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub n_grid: Vec<f64>,
    pub trials: u64,
    pub iota: Option<f64>,
}

/// Command-line overrides (a subset mirrors the file sections).
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Overrides {
    /// Infection rate per infected neighbour
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Total walk jump rate
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Walk rates as `a0,b0,a1,b1`
    #[arg(long, global = true, value_delimiter = ',', num_args = 4)]
    pub rates: Option<Vec<f64>>,
    /// Permit zero walk rates
    #[arg(long, global = true)]
    pub allow_zero_rates: bool,
    /// Run length in time units
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Window half-width in sites, or `auto`
    #[arg(long, global = true)]
    pub window: Option<String>,
    /// Number of replicas
    #[arg(long, global = true)]
    pub replicas: Option<u64>,
    /// Master seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Initial state: full | empty | bernoulli:P | equilibrium[:BURN_IN]
    #[arg(long, global = true)]
    pub initial: Option<String>,
    /// Confirmation window for censored-as-infinite events
    #[arg(long = "confirm-window", global = true)]
    pub confirm_window: Option<f64>,
    /// Cone inclination for the coupling experiment
    #[arg(long = "cone-m", global = true)]
    pub cone_m: Option<f64>,
    /// Deviation threshold for the decay experiment
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Equilibrium burn-in time
    #[arg(long = "burn-in", global = true)]
    pub burn_in: Option<f64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Lambda grid, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Time grid, comma separated
    #[arg(long = "t-grid", global = true, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// Subadditive n grid, comma separated
    #[arg(long = "n-grid", global = true, value_delimiter = ',')]
    pub n_grid: Option<Vec<f64>>,
    /// Trials per invariant suite
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Use this edge speed instead of estimating it
    #[arg(long, global = true)]
    pub iota: Option<f64>,
}

pub fn resolve(file: &FileConfig, over: &Overrides) -> Result<ResolvedConfig, ConfigError> {
    let mut violations = Vec::new();
    let (o_a0, o_b0, o_a1, o_b1) = match &over.rates {
        Some(r) if r.len() == 4 => (Some(r[0]), Some(r[1]), Some(r[2]), Some(r[3])),
        Some(r) => {
            violations.push(format!("--rates needs 4 values, got {}", r.len()));
            (None, None, None, None)
        }
        None => (None, None, None, None),
    };
    let alpha0 = o_a0.or(file.model.alpha0).unwrap_or(0.2);
    let beta0 = o_b0.or(file.model.beta0).unwrap_or(0.8);
    let alpha1 = o_a1.or(file.model.alpha1).unwrap_or(0.8);
    let beta1 = o_b1.or(file.model.beta1).unwrap_or(0.2);
    let gamma = over
        .gamma
        .or(file.model.gamma)
        .unwrap_or(alpha0 + beta0);
    let lambda = over.lambda.or(file.model.lambda).unwrap_or(4.0);
    let allow_zero_rates =
        over.allow_zero_rates || file.model.allow_zero_rates.unwrap_or(false);
    let params = if allow_zero_rates {
        ModelParams::new_allow_zero_rates(lambda, gamma, alpha0, beta0, alpha1, beta1)
    } else {
        ModelParams::new(lambda, gamma, alpha0, beta0, alpha1, beta1)
    };
    if let Err(ModelError::Invalid(mut v)) = params {
        violations.append(&mut v);
    }
    let horizon = over.horizon.or(file.run.horizon).unwrap_or(100.0);
    if !(horizon > 0.0) {
        violations.push(format!("horizon = {horizon} must be > 0"));
    }
    let replicas = over.replicas.or(file.run.replicas).unwrap_or(200);
    if replicas == 0 {
        violations.push("replicas must be >= 1".into());
    }
    let window = {
        let raw: Option<String> = over.window.clone().or_else(|| {
            file.run.window.as_ref().map(|v| match v {
                toml::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
        });
        match raw.as_deref() {
            None | Some("auto") => WindowSpec::Auto,
            Some(s) => match s.parse::<i64>() {
                Ok(h) if h >= 2 => WindowSpec::HalfWidth(h),
                _ => {
                    violations.push(format!(
                        "window must be `auto` or an integer half-width >= 2, got `{s}`"
                    ));
                    WindowSpec::Auto
                }
            },
        }
    };
    let burn_in = over
        .burn_in
        .or(file.experiment.burn_in)
        .unwrap_or(cpwalk::stats::speed::DEFAULT_BURN_IN);
    if burn_in < 0.0 {
        violations.push(format!("burn_in = {burn_in} must be >= 0"));
    }
    let initial_raw = over
        .initial
        .clone()
        .or_else(|| file.run.initial.clone())
        .unwrap_or_else(|| "equilibrium".to_string());
    if parse_initial(&initial_raw, burn_in).is_none() {
        violations.push(format!(
            "initial must be full | empty | bernoulli:P | equilibrium[:BURN_IN], got `{initial_raw}`"
        ));
    }
    let confirm_window = over
        .confirm_window
        .or(file.experiment.confirm_window)
        .unwrap_or(30.0 / gamma.min(1.0).max(1e-9));
    if confirm_window <= 0.0 {
        violations.push(format!("confirm_window = {confirm_window} must be > 0"));
    }
    let trials = over.trials.or(file.experiment.trials).unwrap_or(1000);
    let resolved = ResolvedConfig {
        lambda,
        gamma,
        alpha0,
        beta0,
        alpha1,
        beta1,
        allow_zero_rates,
        horizon,
        replicas,
        seed: over.seed.or(file.run.seed).unwrap_or(1),
        window,
        initial: initial_raw,
        workers: over.workers.or(file.run.workers).unwrap_or(0),
        out: over
            .out
            .clone()
            .or_else(|| file.run.out.clone())
            .unwrap_or_else(|| "out".to_string()),
        confirm_window,
        cone_m: over.cone_m.or(file.experiment.cone_m),
        epsilon: over.epsilon.or(file.experiment.epsilon),
        burn_in,
        lambdas: over
            .lambdas
            .clone()
            .or_else(|| file.experiment.lambdas.clone())
            .unwrap_or_else(|| vec![2.0, 2.5, 3.0, 4.0, 6.0]),
        t_grid: over
            .t_grid
            .clone()
            .or_else(|| file.experiment.t_grid.clone())
            .unwrap_or_default(),
        n_grid: over
            .n_grid
            .clone()
            .or_else(|| file.experiment.n_grid.clone())
            .unwrap_or_default(),
        trials,
        iota: over.iota.or(file.experiment.iota),
    };
    if violations.is_empty() {
        Ok(resolved)
    } else {
        Err(ConfigError(violations))
    }
}

pub fn parse_initial(s: &str, default_burn_in: f64) -> Option<InitialMode> {
    match s {
        "full" | "ones" => Some(InitialMode::Full),
        "empty" | "zeros" => Some(InitialMode::Empty),
        "equilibrium" => Some(InitialMode::Equilibrium {
            burn_in: default_burn_in,
        }),
        _ => {
            if let Some(p) = s.strip_prefix("bernoulli:") {
                return p.parse::<f64>().ok().filter(|p| (0.0..=1.0).contains(p)).map(InitialMode::Bernoulli);
            }
            if let Some(b) = s.strip_prefix("equilibrium:") {
                return b
                    .parse::<f64>()
                    .ok()
                    .filter(|b| *b >= 0.0)
                    .map(|burn_in| InitialMode::Equilibrium { burn_in });
            }
            None
        }
    }
}

impl ResolvedConfig {
    pub fn params(&self) -> ModelParams {
        let build = if self.allow_zero_rates {
            ModelParams::new_allow_zero_rates
        } else {
            ModelParams::new
        };
        build(
            self.lambda,
            self.gamma,
            self.alpha0,
            self.beta0,
            self.alpha1,
            self.beta1,
        )
        .expect("validated at resolve time")
    }

    pub fn initial_mode(&self) -> InitialMode {
        parse_initial(&self.initial, self.burn_in).expect("validated at resolve time")
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.out)
    }

    /// Stable fingerprint of everything that determines replica records.
    pub fn fingerprint(&self, subcommand: &str) -> u64 {
        let text = format!("{subcommand}|{}", serde_json::to_string(self).unwrap());
        let mut h = 0xcbf29ce484222325_u64;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

pub fn load_file(path: Option<&str>) -> Result<FileConfig, ConfigError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError(vec![format!("cannot read config file {p}: {e}")]))?;
            toml::from_str(&text)
                .map_err(|e| ConfigError(vec![format!("cannot parse config file {p}: {e}")]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = resolve(&FileConfig::default(), &Overrides::default()).unwrap();
        assert_eq!(cfg.lambda, 4.0);
        assert_eq!(cfg.window, WindowSpec::Auto);
        assert!(parse_initial(&cfg.initial, cfg.burn_in).is_some());
    }

    #[test]
    fn config_roundtrips_losslessly() {
        let cfg = resolve(&FileConfig::default(), &Overrides::default()).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ResolvedConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn violations_are_collected_not_short_circuited() {
        let over = Overrides {
            lambda: Some(-1.0),
            horizon: Some(0.0),
            replicas: Some(0),
            rates: Some(vec![0.2, 0.7, 0.8, 0.2]),
            ..Default::default()
        };
        let err = resolve(&FileConfig::default(), &over).unwrap_err();
        assert!(err.0.len() >= 4, "{:?}", err.0);
    }

    #[test]
    fn file_values_yield_to_flags() {
        let file: FileConfig = toml::from_str(
            r#"
            [model]
            lambda = 2.0
            [run]
            seed = 9
            horizon = 50.0
            "#,
        )
        .unwrap();
        let over = Overrides {
            lambda: Some(3.0),
            ..Default::default()
        };
        let cfg = resolve(&file, &over).unwrap();
        assert_eq!(cfg.lambda, 3.0);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.horizon, 50.0);
    }

    #[test]
    fn initial_mode_strings() {
        assert_eq!(parse_initial("full", 1.0), Some(InitialMode::Full));
        assert_eq!(
            parse_initial("bernoulli:0.5", 1.0),
            Some(InitialMode::Bernoulli(0.5))
        );
        assert_eq!(
            parse_initial("equilibrium:12", 1.0),
            Some(InitialMode::Equilibrium { burn_in: 12.0 })
        );
        assert!(parse_initial("bernoulli:1.5", 1.0).is_none());
        assert!(parse_initial("nonsense", 1.0).is_none());
    }
}
