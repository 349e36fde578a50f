//! Experiment configuration: TOML files with CLI overrides, validated and
//! hashed so every output file names the exact configuration it came from.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptive::AdaptiveConfig;
use crate::agent::AgentConfig;
use crate::envs::EnvKind;
use crate::error::{Error, Result};

/// Feature scheme driving one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisScheme {
    /// Fixed tensor-product B-spline basis.
    BsplineCoupled,
    /// Fixed per-dimension B-spline basis.
    BsplineDecoupled,
    /// Fixed Fourier basis.
    Fourier,
    /// Coupled start, split-only refinement.
    Awr,
    /// Decoupled start, combine-only discovery.
    Ibfdd,
    /// Decoupled start, alternating splits and combines.
    Mawb,
}

impl BasisScheme {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "bspline-coupled" => Ok(BasisScheme::BsplineCoupled),
            "bspline-decoupled" => Ok(BasisScheme::BsplineDecoupled),
            "fourier" => Ok(BasisScheme::Fourier),
            "awr" => Ok(BasisScheme::Awr),
            "ibfdd" => Ok(BasisScheme::Ibfdd),
            "mawb" => Ok(BasisScheme::Mawb),
            other => Err(Error::InvalidConfig(format!("unknown basis scheme {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BasisScheme::BsplineCoupled => "bspline-coupled",
            BasisScheme::BsplineDecoupled => "bspline-decoupled",
            BasisScheme::Fourier => "fourier",
            BasisScheme::Awr => "awr",
            BasisScheme::Ibfdd => "ibfdd",
            BasisScheme::Mawb => "mawb",
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, BasisScheme::Awr | BasisScheme::Ibfdd | BasisScheme::Mawb)
    }

    pub fn uses_wavelets(&self) -> bool {
        !matches!(self, BasisScheme::Fourier)
    }
}

impl std::fmt::Display for BasisScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

// Thresholds may be infinite; TOML reads `inf` natively, JSON headers carry
// the value as a string.
mod flex_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => s.trim().parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used in output paths; derived from env and scheme when empty.
    pub name: String,
    pub env: EnvKind,
    pub scheme: BasisScheme,
    /// B-spline order for wavelet schemes.
    pub order: u32,
    /// Initial scale for wavelet schemes.
    pub scale: u32,
    /// Order of the Fourier baseline.
    pub fourier_order: u32,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epsilon_greedy: f64,
    pub replacing_traces: bool,
    pub fourier_alpha_scaling: bool,
    #[serde(with = "flex_float")]
    pub tau_split: f64,
    #[serde(with = "flex_float")]
    pub tau_combine: f64,
    pub relevance_decay: f64,
    pub check_interval: u64,
    pub max_scale: u32,
    pub max_features: usize,
    pub episodes: u64,
    /// Per-episode step cap; `None` means the per-environment default
    /// (2000 for Mountain Car, 1000 for Acrobot).
    pub step_cap: Option<u64>,
    pub seeds: Vec<u64>,
    /// Trailing window of the plotted learning curves.
    pub smoothing_window: usize,
    /// Trailing window of the grid-search selection statistic.
    pub selection_window: usize,
    /// Acrobot integration step in seconds.
    pub acrobot_dt: f64,
    /// Dump per-episode relevance statistics of every tracked feature.
    pub dump_relevance: bool,
    /// Output root; overridden by `--out` and the `WAVEBASIS_OUT` env var.
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: String::new(),
            env: EnvKind::MountainCar,
            scheme: BasisScheme::BsplineCoupled,
            order: 2,
            scale: 2,
            fourier_order: 5,
            alpha: 0.01,
            gamma: 1.0,
            lambda: 0.9,
            epsilon_greedy: 0.0,
            replacing_traces: false,
            fourier_alpha_scaling: true,
            tau_split: f64::INFINITY,
            tau_combine: f64::INFINITY,
            relevance_decay: 0.99,
            check_interval: 100,
            max_scale: 8,
            max_features: 500,
            episodes: 500,
            step_cap: None,
            seeds: (0..10).collect(),
            smoothing_window: 20,
            selection_window: 100,
            acrobot_dt: 0.2,
            dump_relevance: false,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_toml_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    /// Fills derived fields (name, step cap) with their defaults.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        if cfg.name.is_empty() {
            cfg.name = format!("{}-{}", cfg.env, cfg.scheme);
        }
        if cfg.step_cap.is_none() {
            cfg.step_cap = Some(match cfg.env {
                EnvKind::MountainCar => 2000,
                EnvKind::Acrobot => 1000,
            });
        }
        cfg
    }

    pub fn step_cap_resolved(&self) -> u64 {
        self.resolved().step_cap.expect("resolved")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = self.resolved();
        if cfg.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be non-empty".into()));
        }
        if cfg.episodes == 0 {
            return Err(Error::InvalidConfig("episodes must be at least 1".into()));
        }
        if cfg.step_cap == Some(0) {
            return Err(Error::InvalidConfig("step_cap must be at least 1".into()));
        }
        if cfg.smoothing_window == 0 || cfg.selection_window == 0 {
            return Err(Error::InvalidConfig("smoothing windows must be at least 1".into()));
        }
        if !(cfg.acrobot_dt > 0.0) {
            return Err(Error::InvalidConfig("acrobot_dt must be positive".into()));
        }
        if cfg.scheme.uses_wavelets() {
            if cfg.order > crate::wavelet::MAX_ORDER {
                return Err(Error::UnsupportedOrder(cfg.order));
            }
            if cfg.max_scale < cfg.scale {
                return Err(Error::InvalidConfig(format!(
                    "max_scale {} is below the initial scale {}",
                    cfg.max_scale, cfg.scale
                )));
            }
        }
        cfg.agent_config().validate()?;
        cfg.adaptive_config().validate()?;
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            lambda: self.lambda,
            epsilon_greedy: self.epsilon_greedy,
            replacing_traces: self.replacing_traces,
            fourier_alpha_scaling: self.fourier_alpha_scaling,
        }
    }

    pub fn adaptive_config(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            tau_split: self.tau_split,
            tau_combine: self.tau_combine,
            eps: self.relevance_decay,
            check_interval: self.check_interval,
            max_scale: self.max_scale,
            max_features: self.max_features,
        }
    }

    /// Canonical JSON of the resolved config, without the output root.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self.resolved()).expect("config serializes");
        value.as_object_mut().expect("config is an object").remove("out_dir");
        value.to_string()
    }

    /// Hex SHA-256 of the canonical JSON; distinct configurations get
    /// distinct output paths through this.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }

    /// Directory all outputs of this configuration land in.
    pub fn run_dir(&self, out_root: &Path) -> PathBuf {
        let cfg = self.resolved();
        out_root.join(format!("{}-{}", cfg.name, cfg.short_hash()))
    }
}

/// Resolves the output root: `WAVEBASIS_OUT` env var, then the CLI flag,
/// then the config's `out_dir`, then `./runs`.
pub fn resolve_out_root(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Ok(v) = std::env::var("WAVEBASIS_OUT") {
        if !v.is_empty() {
            return PathBuf::from(v);
        }
    }
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_with_infinite_thresholds() {
        let text = r#"
            env = "mountain-car"
            scheme = "mawb"
            alpha = 0.05
            tau_split = inf
            tau_combine = 0.25
            seeds = [0, 1]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.scheme, BasisScheme::Mawb);
        assert!(cfg.tau_split.is_infinite());
        assert_eq!(cfg.tau_combine, 0.25);
        cfg.validate().unwrap();
        // the JSON header keeps the infinity readable
        let json = cfg.canonical_json();
        assert!(json.contains("\"tau_split\":\"inf\""), "{json}");
        assert!(json.contains("\"tau_combine\":0.25"), "{json}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("alpah = 0.5").is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());

        let cfg = ExperimentConfig { alpha: -1.0, ..Default::default() };
        assert!(cfg.validate().is_err());

        let cfg = ExperimentConfig { order: 3, ..Default::default() };
        assert!(cfg.validate().is_err());

        let cfg = ExperimentConfig { order: 3, scheme: BasisScheme::Fourier, ..Default::default() };
        cfg.validate().unwrap(); // spline order unused by the Fourier scheme

        let cfg = ExperimentConfig { scale: 3, max_scale: 2, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn step_cap_defaults_per_environment() {
        let mc = ExperimentConfig::default();
        assert_eq!(mc.step_cap_resolved(), 2000);
        let acro = ExperimentConfig { env: EnvKind::Acrobot, ..Default::default() };
        assert_eq!(acro.step_cap_resolved(), 1000);
        let explicit = ExperimentConfig { step_cap: Some(123), ..Default::default() };
        assert_eq!(explicit.step_cap_resolved(), 123);
    }

    #[test]
    fn hash_ignores_out_dir_but_sees_everything_else() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        b.out_dir = Some(PathBuf::from("/elsewhere"));
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig { alpha: 0.02, ..Default::default() };
        assert_ne!(a.hash(), c.hash());
        let d = ExperimentConfig { tau_split: 1.0, ..Default::default() };
        assert_ne!(a.hash(), d.hash());
    }

    #[test]
    fn run_dirs_of_distinct_configs_differ() {
        let root = Path::new("/tmp/out");
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { alpha: 0.5, ..Default::default() };
        assert_ne!(a.run_dir(root), b.run_dir(root));
    }
}
