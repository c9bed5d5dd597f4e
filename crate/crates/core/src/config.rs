//! Run configuration: TOML file, `group.key=value` overrides, validation.
//!
//! Precedence is command-line overrides, then the config file, then the
//! built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::ModelConfig;
use crate::scheduler::{Mode, SchedulerParams};
use crate::srd::SrdParams;
use crate::tgaa::TgaaParams;
use crate::world::vocab::splitmix64;
use crate::world::WorkloadParams;
use crate::{Error, Result};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "DIT_REUSE_CONFIG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheParams {
    /// Also insert the outputs of hit requests.
    pub insert_on_hit: bool,
    /// Stop inserting once a non-empty warm-start prefix has been loaded.
    pub freeze_after_warm: bool,
    /// Directory the final cache is saved to, if any.
    pub dir: Option<PathBuf>,
}

impl Default for CacheParams {
    fn default() -> Self {
        Self {
            insert_on_hit: false,
            freeze_after_warm: true,
            dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputParams {
    pub workload: PathBuf,
    pub records: PathBuf,
    pub summary: PathBuf,
    pub windows_csv: PathBuf,
    /// Requests per aggregation window.
    pub window: usize,
}

impl Default for OutputParams {
    fn default() -> Self {
        Self {
            workload: "workload.jsonl".into(),
            records: "records.jsonl".into(),
            summary: "summary.json".into(),
            windows_csv: "windows.csv".into(),
            window: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, replaces the weight, noise, workload and vocabulary seeds
    /// with values derived from this one.
    pub seed: Option<u64>,
    pub mode: Mode,
    /// Compute each hit request's no-reuse reference to report distances.
    pub reference_oracle: bool,
    pub model: ModelConfig,
    pub tgaa: TgaaParams,
    pub srd: SrdParams,
    pub scheduler: SchedulerParams,
    pub cache: CacheParams,
    pub workload: WorkloadParams,
    pub output: OutputParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            mode: Mode::Chorus,
            reference_oracle: true,
            model: ModelConfig::distilled(),
            tgaa: TgaaParams::default(),
            srd: SrdParams::default(),
            scheduler: SchedulerParams::default(),
            cache: CacheParams::default(),
            workload: WorkloadParams::default(),
            output: OutputParams::default(),
        }
    }
}

impl RunConfig {
    /// Fifty-step profile with its lower threshold.
    pub fn vanilla() -> Self {
        Self {
            model: ModelConfig::vanilla(),
            scheduler: SchedulerParams::vanilla(),
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads `path` (or the defaults), applies `overrides` in order and
    /// validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        for o in overrides {
            cfg = cfg.with_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `dotted.key=value` override. The value is read as a TOML
    /// literal and falls back to a plain string.
    pub fn with_override(&self, assignment: &str) -> Result<Self> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for part in &parts[..parts.len() - 1] {
            node = node
                .as_table_mut()
                .and_then(|t| t.get_mut(*part))
                .ok_or_else(|| Error::Config(format!("unknown config group {part:?} in {key:?}")))?;
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key:?} does not name a config field")))?;
        let value = match (table.get(parts[parts.len() - 1]), value) {
            (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        table.insert(parts[parts.len() - 1].to_string(), value);
        root.try_into().map_err(|e: toml::de::Error| Error::Config(format!("override {key:?}: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.tgaa.validate()?;
        self.srd.validate()?;
        self.scheduler.validate()?;
        self.workload.validate()?;
        if self.output.window == 0 {
            return Err(Error::Config("output.window must be >= 1".into()));
        }
        Ok(())
    }

    /// The configuration with the global seed (if any) pushed into the
    /// per-group seeds.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        if let Some(seed) = self.seed {
            let derive = |stream: u64| splitmix64(seed ^ splitmix64(stream));
            cfg.model.weight_seed = derive(1);
            cfg.model.noise_seed = derive(2);
            cfg.workload.seed = derive(3);
            cfg.workload.vocab_seed = derive(4);
            cfg.seed = None;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn overrides_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "mode = \"nirvana\"\n[scheduler]\ntau = 0.8\n[workload]\nclusters = 4\nwarm_start = 10\n").unwrap();
        let cfg = RunConfig::load(Some(&path), &["scheduler.tau=0.9".into(), "tgaa.a_k=3".into()]).unwrap();
        assert_eq!(cfg.scheduler.tau, 0.9);
        assert_eq!(cfg.tgaa.a_k, 3.0);
        assert_eq!(cfg.mode, Mode::Nirvana);
        assert_eq!(cfg.workload.clusters, 4);
        assert_eq!(cfg.workload.prompts_per_cluster, WorkloadParams::default().prompts_per_cluster);
        let cfg = RunConfig::load(Some(&path), &["mode=baseline".into(), "seed=9".into()]).unwrap();
        assert_eq!(cfg.mode, Mode::Baseline);
        assert_eq!(cfg.seed, Some(9));
    }

    #[test]
    fn bad_inputs_are_errors() {
        let cfg = RunConfig::default();
        assert!(cfg.with_override("scheduler.tau").is_err());
        assert!(cfg.with_override("nosuch.key=1").is_err());
        assert!(cfg.with_override("model.frames=\"many\"").is_err());
        assert!(cfg.with_override("model.bogus=1").is_err());
        assert!(RunConfig::from_toml("[model]\nframes = -1\n").is_err());
        assert!(RunConfig::load(Some(Path::new("/nonexistent/run.toml")), &[]).is_err());
        assert!(RunConfig::load(None, &["workload.prompts_per_cluster=0".into()]).is_err());
    }

    #[test]
    fn global_seed_reseeds_every_group() {
        let base = RunConfig::default();
        let a = RunConfig { seed: Some(1), ..base.clone() }.resolved();
        let b = RunConfig { seed: Some(2), ..base.clone() }.resolved();
        assert_ne!(a.model.weight_seed, b.model.weight_seed);
        assert_ne!(a.workload.seed, b.workload.seed);
        assert_eq!(base.resolved(), base);
    }
}
