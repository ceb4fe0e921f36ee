use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assl::AsslConfig;
use crate::data::{DatasetSchema, MissingPolicy, SplitFractions, SynthConfig};
use crate::prm::PrmConfig;

use super::CliError;

/// Where the rows come from: a synthetic generator or CSV files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub synth: Option<SynthConfig>,
    /// Labeled rows; split into train/validation/test per seed.
    pub labeled_csv: Option<PathBuf>,
    /// Unlabeled pool. Required unless pseudo-labels are switched off.
    pub unlabeled_csv: Option<PathBuf>,
    pub missing: MissingPolicy,
    /// Column names for CSV input; the 39-feature default when absent.
    pub feature_names: Option<Vec<String>>,
    /// Class names for CSV input; the 9 rating grades when absent.
    pub label_names: Option<Vec<String>>,
}

impl DataConfig {
    pub fn schema(&self) -> Result<DatasetSchema, CliError> {
        if let Some(s) = &self.synth {
            return s.schema().map_err(|e| CliError::Config(e.to_string()));
        }
        let default = DatasetSchema::default();
        let features = self
            .feature_names
            .clone()
            .unwrap_or_else(|| default.feature_names().to_vec());
        let labels = self
            .label_names
            .clone()
            .unwrap_or_else(|| default.label_names().to_vec());
        DatasetSchema::new(features, labels).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Ablation switches applied to the Phase II config of `run`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationFlags {
    /// Encoder + supervised head only.
    pub baseline_supervised_only: bool,
    /// `alpha = 0`.
    pub no_adversarial: bool,
    /// No semi-supervised classification term.
    pub no_semi: bool,
}

/// Everything one `run` or `ablate` invocation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    /// Output root. Falls back to `$CREDIT_ASSL_OUT`, then `runs`.
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub split: SplitFractions,
    pub prm: PrmConfig,
    pub assl: AsslConfig,
    pub ablation: AblationFlags,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            out_dir: None,
            data: DataConfig {
                synth: Some(SynthConfig::default()),
                ..Default::default()
            },
            split: SplitFractions::default(),
            prm: PrmConfig::default(),
            assl: AsslConfig::default(),
            ablation: AblationFlags::default(),
        }
    }
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: RunConfig,
}

pub const OUT_ENV: &str = "CREDIT_ASSL_OUT";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the `config` snapshot of a `manifest.json`.
    /// Relative CSV paths in TOML are resolved against the file's directory
    /// and made absolute.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let snapshot: ManifestConfig =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad manifest: {e}")))?;
            snapshot.config.validate()?;
            return Ok(snapshot.config);
        }
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.labeled_csv, &mut cfg.data.unlabeled_csv].into_iter().flatten() {
            let joined = base.join(&*p);
            *p = std::path::absolute(&joined).unwrap_or(joined);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |m: String| Err(CliError::Config(m));
        if self.seeds.is_empty() {
            return cfg_err("seeds must list at least one seed".into());
        }
        match (&self.data.synth, &self.data.labeled_csv) {
            (Some(s), None) => {
                if self.data.unlabeled_csv.is_some() {
                    return cfg_err("data.unlabeled_csv cannot be combined with data.synth".into());
                }
                s.validate().map_err(|e| CliError::Config(e.to_string()))?;
            }
            (None, Some(_)) => {}
            _ => return cfg_err("exactly one of data.synth and data.labeled_csv must be set".into()),
        }
        self.data.schema()?;
        self.split.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.assl.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Phase II config after the ablation switches.
    pub fn effective_assl(&self) -> AsslConfig {
        let mut c = self.assl.clone();
        if self.ablation.baseline_supervised_only {
            c = c.supervised_only();
        }
        if self.ablation.no_adversarial {
            c = c.without_adversarial();
        }
        if self.ablation.no_semi {
            c = c.without_semi();
        }
        c
    }

    /// First 16 hex digits of the SHA-256 of the config, output root excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    /// `--out`, then `out_dir`, then the environment variable, then `runs`.
    pub fn out_root(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.out_dir {
            return p.clone();
        }
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from("runs"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let c = RunConfig::from_toml("seeds = [1, 2]\n[data.synth]\nnum_features = 5\nnum_classes = 3\n").unwrap();
        assert_eq!(c.seeds, vec![1, 2]);
        assert_eq!(c.data.synth.as_ref().unwrap().num_features, 5);
        assert_eq!(c.assl, AsslConfig::default());
    }

    #[test]
    fn data_source_must_be_unique() {
        let both = "[data]\nlabeled_csv = \"a.csv\"\n[data.synth]\n";
        assert!(matches!(RunConfig::from_toml(both), Err(CliError::Config(_))));
        let none = "[data]\nmissing = \"reject\"\n";
        assert!(matches!(RunConfig::from_toml(none), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(RunConfig::from_toml("seedz = [1]\n[data.synth]\n").is_err());
        assert!(RunConfig::from_toml("seeds = []\n[data.synth]\n").is_err());
        assert!(RunConfig::from_toml("[data.synth]\n[assl]\nbatch_size = 1\n").is_err());
        assert!(RunConfig::from_toml("[data.synth]\n[split]\ntrain = 0.5\nval = 0.1\ntest = 0.1\n").is_err());
    }

    #[test]
    fn hash_ignores_out_dir_only() {
        let a = RunConfig::default();
        let b = RunConfig {
            out_dir: Some("elsewhere".into()),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig {
            seeds: vec![7],
            ..a.clone()
        };
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn ablation_flags_apply() {
        let mut c = RunConfig::default();
        c.ablation.no_adversarial = true;
        assert_eq!(c.effective_assl().alpha, 0.0);
        c.ablation.baseline_supervised_only = true;
        assert!(!c.effective_assl().use_pseudo);
    }
}
