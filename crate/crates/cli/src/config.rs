//! TOML pipeline configuration: global settings, the search-space schema, generator
//! settings, task defaults and per-task overrides. Unknown keys are rejected and every
//! value is range-checked when the file is loaded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use gpstack::encoding::{Encoding, SearchSpaceSchema};
use gpstack::gbm::{submodel_pool, PresetOverride};
use gpstack::metrics::TauVariant;
use gpstack::pipeline::{training_seed, TaskSettings};
use gpstack::rank_transform::BackTransform;
use gpstack::stacking::StackParams;
use gpstack::synthetic::{
    default_noise_sd, TaskGenerator, DEFAULT_N_TEST, DEFAULT_N_TRAIN, DEFAULT_TASKS,
};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub global: GlobalSection,
    #[serde(default)]
    pub schema: SearchSpaceSchema,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub defaults: TaskSection,
    /// Keyed by task id (`[task.3]`).
    #[serde(default)]
    pub task: BTreeMap<String, TaskSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSection {
    #[serde(default)]
    pub seed: u64,
    pub data_dir: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub tasks: u32,
    pub n_train: usize,
    pub n_test: usize,
    pub interaction_pairs: usize,
    pub interaction_scale: f64,
    pub nonlinearity: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let g = TaskGenerator::default();
        SynthSection {
            tasks: DEFAULT_TASKS,
            n_train: DEFAULT_N_TRAIN,
            n_test: DEFAULT_N_TEST,
            interaction_pairs: g.interaction_pairs,
            interaction_scale: g.interaction_scale,
            nonlinearity: g.nonlinearity,
        }
    }
}

/// Settings that may appear under `[defaults]` or `[task.N]`. Unset fields fall through
/// from the task section to the defaults to the built-in values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub folds: Option<usize>,
    pub ridge: Option<f64>,
    pub back_transform: Option<BackTransform>,
    pub tau: Option<TauVariant>,
    pub encoding: Option<Encoding>,
    pub noise_sd: Option<f64>,
    /// Training seed for this task's pool and folds.
    pub seed: Option<u64>,
    pub members: Option<Vec<String>>,
    #[serde(default)]
    pub presets: BTreeMap<String, PresetOverride>,
}

/// Everything one task needs, after defaults and overrides are merged.
#[derive(Debug, Clone)]
pub struct ResolvedTask {
    pub training_seed: u64,
    pub settings: TaskSettings,
}

fn merge_override(base: &PresetOverride, top: &PresetOverride) -> PresetOverride {
    PresetOverride {
        loss: top.loss.or(base.loss),
        huber_delta: top.huber_delta.or(base.huber_delta),
        learning_rate: top.learning_rate.or(base.learning_rate),
        n_iterations: top.n_iterations.or(base.n_iterations),
        max_depth: top.max_depth.or(base.max_depth),
        min_samples_leaf: top.min_samples_leaf.or(base.min_samples_leaf),
        subsample: top.subsample.or(base.subsample),
        n_bins: top.n_bins.clone().or_else(|| base.n_bins.clone()),
        seed: top.seed.or(base.seed),
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => PipelineConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {}", p.display(), e.message())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.schema
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.synth.tasks == 0 {
            return Err(CliError::Config("synth.tasks: must be at least 1".into()));
        }
        if self.global.jobs == Some(0) {
            return Err(CliError::Config("global.jobs: must be at least 1".into()));
        }
        self.generator(1, 0)
            .validate()
            .map_err(|e| CliError::Config(format!("synth: {e}")))?;
        for key in self.task.keys() {
            task_id(key)?;
        }
        check_section("defaults", &self.defaults)?;
        for (key, section) in &self.task {
            check_section(&format!("task.{key}"), section)?;
        }
        // every task that can be named must also resolve to a valid pool
        for id in self.configured_task_ids() {
            self.resolve(id, 0)?;
        }
        Ok(())
    }

    /// `1..=synth.tasks` plus any task with its own section.
    pub fn configured_task_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (1..=self.synth.tasks).collect();
        ids.extend(self.task.keys().filter_map(|k| k.parse::<u32>().ok()));
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn section(&self, id: u32) -> Option<&TaskSection> {
        self.task
            .iter()
            .find(|(k, _)| k.parse::<u32>().ok() == Some(id))
            .map(|(_, s)| s)
    }

    /// Merges defaults and the task's section; `seed` is the global seed in effect.
    pub fn resolve(&self, id: u32, seed: u64) -> Result<ResolvedTask, CliError> {
        let empty = TaskSection::default();
        let top = self.section(id).unwrap_or(&empty);
        let d = &self.defaults;
        let where_ = if self.section(id).is_some() {
            format!("task.{id}")
        } else {
            "defaults".to_string()
        };

        let mut presets = d.presets.clone();
        for (name, o) in &top.presets {
            let merged = match presets.get(name) {
                Some(base) => merge_override(base, o),
                None => o.clone(),
            };
            presets.insert(name.clone(), merged);
        }
        let members = top.members.as_ref().or(d.members.as_ref());
        let training_seed = top
            .seed
            .or(d.seed)
            .unwrap_or_else(|| training_seed(seed, id));
        let pool = submodel_pool(training_seed, members.map(Vec::as_slice), &presets)
            .map_err(|e| CliError::Config(format!("{where_}: {e}")))?;

        let defaults = StackParams::default();
        let settings = TaskSettings {
            pool,
            stack: StackParams {
                folds: top.folds.or(d.folds).unwrap_or(defaults.folds),
                fold_seed: training_seed,
                ridge: top.ridge.or(d.ridge).unwrap_or(defaults.ridge),
                back_transform: top.back_transform.or(d.back_transform).unwrap_or_default(),
            },
            encoding: top.encoding.or(d.encoding).unwrap_or_default(),
            tau: top.tau.or(d.tau).unwrap_or_default(),
        };
        Ok(ResolvedTask {
            training_seed,
            settings,
        })
    }

    pub fn generator(&self, id: u32, seed: u64) -> TaskGenerator {
        let noise_sd = self
            .section(id)
            .and_then(|s| s.noise_sd)
            .or(self.defaults.noise_sd)
            .unwrap_or_else(|| default_noise_sd(id));
        TaskGenerator {
            schema: self.schema.clone(),
            noise_sd,
            seed,
            n_train: self.synth.n_train,
            n_test: self.synth.n_test,
            interaction_pairs: self.synth.interaction_pairs,
            interaction_scale: self.synth.interaction_scale,
            nonlinearity: self.synth.nonlinearity,
        }
    }
}

fn task_id(key: &str) -> Result<u32, CliError> {
    match key.parse::<u32>() {
        Ok(id) if id >= 1 => Ok(id),
        _ => Err(CliError::Config(format!(
            "task.{key}: task sections are keyed by positive integer ids"
        ))),
    }
}

fn check_section(at: &str, s: &TaskSection) -> Result<(), CliError> {
    let bad = |field: &str, msg: &str| Err(CliError::Config(format!("{at}.{field}: {msg}")));
    if let Some(k) = s.folds {
        if k < 2 {
            return bad("folds", "must be at least 2");
        }
    }
    if let Some(r) = s.ridge {
        if !(r.is_finite() && r >= 0.0) {
            return bad("ridge", "must be finite and non-negative");
        }
    }
    if let Some(sd) = s.noise_sd {
        if !(sd.is_finite() && sd >= 0.0) {
            return bad("noise_sd", "must be finite and non-negative");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PipelineConfig, CliError> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn empty_config_resolves_defaults() {
        let cfg = parse("").unwrap();
        let t = cfg.resolve(3, 0).unwrap();
        assert_eq!(t.settings.pool.len(), 7);
        assert_eq!(t.settings.stack.folds, 5);
        assert_eq!(cfg.generator(3, 0).noise_sd, default_noise_sd(3));
        assert_eq!(cfg.configured_task_ids(), (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn task_overrides_layer_over_defaults() {
        let cfg = parse(
            r#"
            [defaults]
            folds = 4
            [defaults.presets.gbrt-mse]
            max_depth = 2
            learning_rate = 0.2

            [task.2]
            ridge = 0.5
            tau = "a"
            [task.2.presets.gbrt-mse]
            max_depth = 3
            "#,
        )
        .unwrap();
        let t2 = cfg.resolve(2, 0).unwrap();
        let gbrt = &t2.settings.pool[0].config;
        assert_eq!((gbrt.max_depth, gbrt.learning_rate), (3, 0.2));
        assert_eq!(t2.settings.stack.folds, 4);
        assert_eq!(t2.settings.stack.ridge, 0.5);
        assert_eq!(t2.settings.tau, TauVariant::A);
        let t1 = cfg.resolve(1, 0).unwrap();
        assert_eq!(t1.settings.pool[0].config.max_depth, 2);
        // untouched presets are identical apart from the per-task seed
        let (mut a, b) = (
            t1.settings.pool[1].config.clone(),
            &t2.settings.pool[1].config,
        );
        a.seed = b.seed;
        assert_eq!(&a, b);
    }

    #[test]
    fn unknown_keys_and_bad_values_name_the_field() {
        let err = parse("[defaults]\nfoldz = 3\n").unwrap_err();
        assert!(err.to_string().contains("foldz"), "{err}");
        let err = parse("[task.1.presets.xgboost]\nmax_dept = 3\n").unwrap_err();
        assert!(err.to_string().contains("max_dept"), "{err}");
        let err = parse("[task.1]\nfolds = 1\n").unwrap_err();
        assert!(err.to_string().contains("task.1.folds"), "{err}");
        let err = parse("[task.3.presets.histgb]\nlearning_rate = 2.0\n").unwrap_err();
        assert!(
            err.to_string().contains("presets.histgb.learning_rate"),
            "{err}"
        );
        let err = parse("[task.zero]\n").unwrap_err();
        assert!(err.to_string().contains("task.zero"), "{err}");
        let err = parse("[schema]\nmax_layers = 0\ndepth_symbols = []\n").unwrap_err();
        assert!(err.to_string().contains("schema.max_layers"), "{err}");
        assert!(matches!(err, CliError::Config(_)));
    }
}
