//! Run configuration: the JSON file schema, the command-line overrides, and
//! the flag > file > default resolution order.

use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use gft::bound::BoundParams;
use gft::dataset::Format;
use gft::otdist::{SinkhornConfig, Subsample};
use gft::trainer::TrainConfig;

use crate::CmdError;

/// Routing strategy selector; `all` runs the four concrete strategies and
/// tabulates every result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Nearest-neighbor walk from the target.
    Nn,
    /// Per-source shortest paths, then the magnitude/weight preference.
    Sp,
    /// Paths down the minimum spanning tree, same preference.
    Mst,
    /// Exhaustive bound minimization over all simple paths.
    Tgft,
    All,
}

impl Strategy {
    /// The concrete strategies this selector expands to, in report order.
    pub fn expanded(self) -> Vec<Strategy> {
        match self {
            Strategy::All => vec![Strategy::Nn, Strategy::Sp, Strategy::Mst, Strategy::Tgft],
            single => vec![single],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Nn => "nn",
            Strategy::Sp => "sp",
            Strategy::Mst => "mst",
            Strategy::Tgft => "tgft",
            Strategy::All => "all",
        }
    }
}

/// Source of the ε̂₁ plugged into bound evaluations: per-source first-stage
/// training losses, or zero everywhere (pure geometry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Eps1Mode {
    Trained,
    Zero,
}

/// The resolved settings of one invocation. Every field has a default; a
/// JSON config file may set any subset of them (unknown keys are rejected);
/// command-line flags override the file. The resolved value is echoed into
/// every output artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Domain collection file; required by every command except `simulate`.
    pub data: Option<PathBuf>,
    pub format: Format,
    pub sinkhorn: SinkhornConfig,
    /// Per-domain point cap ahead of each Sinkhorn solve; null disables it.
    pub subsample: Option<Subsample>,
    /// Keep only graph edges with weight strictly below tau; absent keeps
    /// the complete graph.
    pub tau: Option<f64>,
    pub strategy: Strategy,
    pub bound: BoundParams,
    pub train: TrainConfig,
    pub eps1_mode: Eps1Mode,
    /// Include per-candidate bound breakdowns in routing artifacts.
    pub explain: bool,
    /// Directory artifacts are written into.
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            format: Format::Csv,
            sinkhorn: SinkhornConfig::default(),
            subsample: Some(Subsample::default()),
            tau: None,
            strategy: Strategy::Tgft,
            bound: BoundParams::default(),
            train: TrainConfig::default(),
            eps1_mode: Eps1Mode::Trained,
            explain: false,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CmdError> {
        self.sinkhorn.validate()?;
        self.bound.validate()?;
        self.train.validate()?;
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(CmdError::Usage(format!(
                    "tau must be a positive real, got {tau}"
                )));
            }
        }
        Ok(())
    }
}

/// Command-line overrides, applicable before or after the subcommand. Each
/// unset flag leaves the config-file value (or the default) in place.
#[derive(Debug, Args)]
pub struct Overrides {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Domain collection file.
    #[arg(long, global = true, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Data file format.
    #[arg(long, global = true, value_name = "csv|jsonl")]
    pub format: Option<Format>,
    /// Routing strategy.
    #[arg(long, global = true, value_enum, value_name = "STRATEGY")]
    pub strategy: Option<Strategy>,
    /// Edge-pruning threshold for the disparity graph.
    #[arg(long, global = true, value_name = "REAL")]
    pub tau: Option<f64>,
    /// Sinkhorn entropic regularization strength.
    #[arg(long, global = true, value_name = "REAL")]
    pub epsilon: Option<f64>,
    /// Weight of the label coordinate in the transport ground metric.
    #[arg(long = "label-scale", global = true, value_name = "REAL")]
    pub label_scale: Option<f64>,
    /// Training seed; `simulate` offsets its five experiment seeds by this.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Include per-candidate bound breakdowns in artifacts and on stdout.
    #[arg(long, global = true)]
    pub explain: bool,
    /// ε̂₁ source for bound evaluations.
    #[arg(long = "eps1", global = true, value_enum, value_name = "MODE")]
    pub eps1_mode: Option<Eps1Mode>,
}

/// Resolves the effective configuration: defaults, overlaid by the config
/// file when given, overlaid by explicit flags, then validated.
pub fn resolve(overrides: &Overrides) -> Result<RunConfig, CmdError> {
    let mut config = match &overrides.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|err| {
                CmdError::Usage(format!("failed to read {}: {err}", path.display()))
            })?;
            serde_json::from_str::<RunConfig>(&text).map_err(|err| {
                CmdError::Usage(format!("invalid config {}: {err}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(data) = &overrides.data {
        config.data = Some(data.clone());
    }
    if let Some(format) = overrides.format {
        config.format = format;
    }
    if let Some(strategy) = overrides.strategy {
        config.strategy = strategy;
    }
    if let Some(tau) = overrides.tau {
        config.tau = Some(tau);
    }
    if let Some(epsilon) = overrides.epsilon {
        config.sinkhorn.epsilon = epsilon;
    }
    if let Some(label_scale) = overrides.label_scale {
        config.sinkhorn.label_scale = label_scale;
    }
    if let Some(seed) = overrides.seed {
        config.train.seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.out = out.clone();
    }
    if overrides.explain {
        config.explain = true;
    }
    if let Some(mode) = overrides.eps1_mode {
        config.eps1_mode = mode;
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn no_overrides() -> Overrides {
        Overrides {
            config: None,
            data: None,
            format: None,
            strategy: None,
            tau: None,
            epsilon: None,
            label_scale: None,
            seed: None,
            out: None,
            explain: false,
            eps1_mode: None,
        }
    }

    fn config_file(contents: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(contents.as_bytes()).unwrap();
        file
    }

    #[test]
    fn defaults_resolve_without_any_input() {
        let config = resolve(&no_overrides()).unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(config.strategy, Strategy::Tgft);
        assert_eq!(config.subsample, Some(Subsample { cap: 500, seed: 0 }));
    }

    #[test]
    fn file_overrides_defaults_and_flags_override_file() {
        let file = config_file(
            r#"{"sinkhorn": {"epsilon": 0.2}, "train": {"epochs": 7}, "strategy": "sp"}"#,
        );
        let mut overrides = no_overrides();
        overrides.config = Some(file.path().to_path_buf());
        overrides.epsilon = Some(0.4);

        let config = resolve(&overrides).unwrap();
        assert_eq!(config.sinkhorn.epsilon, 0.4);
        assert_eq!(config.train.epochs, 7);
        assert_eq!(config.strategy, Strategy::Sp);
        // Untouched knobs keep their defaults.
        assert_eq!(config.sinkhorn.max_iterations, 1000);
        assert_eq!(config.train.batch_size, 32);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let file = config_file(r#"{"strateggy": "sp"}"#);
        let mut overrides = no_overrides();
        overrides.config = Some(file.path().to_path_buf());
        let err = resolve(&overrides).unwrap_err();
        assert!(matches!(err, CmdError::Usage(_)));
        assert!(err.to_string().contains("strateggy"));
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut overrides = no_overrides();
        overrides.epsilon = Some(-1.0);
        assert!(resolve(&overrides).is_err());

        let mut overrides = no_overrides();
        overrides.tau = Some(0.0);
        assert!(resolve(&overrides).is_err());
    }

    #[test]
    fn strategy_names_round_trip_through_json() {
        for strategy in [
            Strategy::Nn,
            Strategy::Sp,
            Strategy::Mst,
            Strategy::Tgft,
            Strategy::All,
        ] {
            let json = serde_json::to_string(&strategy).unwrap();
            assert_eq!(json, format!("\"{}\"", strategy.name()));
            let back: Strategy = serde_json::from_str(&json).unwrap();
            assert_eq!(back, strategy);
        }
    }
}
