//! Named boosting presets forming the stacking pool.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GbmConfig, Loss, SplitMode};
use crate::error::{Error, Result};

/// Pool members in their fixed stacking order.
pub const PRESET_NAMES: [&str; 7] = [
    "gbrt-mse",
    "gbrt-huber",
    "histgb",
    "catgb-mse",
    "catgb-huber",
    "xgboost",
    "lightgbm",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedConfig {
    pub name: String,
    pub config: GbmConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    Huber,
}

/// `n_bins` accepts either a bin count or the string `"exact"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinsOverride {
    Count(usize),
    Named(String),
}

/// Per-task adjustments to one preset. Unset fields keep the preset value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetOverride {
    pub loss: Option<LossKind>,
    pub huber_delta: Option<f64>,
    pub learning_rate: Option<f64>,
    pub n_iterations: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub subsample: Option<f64>,
    pub n_bins: Option<BinsOverride>,
    pub seed: Option<u64>,
}

impl PresetOverride {
    fn apply(&self, cfg: &mut GbmConfig) -> Result<()> {
        let delta = match cfg.loss {
            Loss::Huber { delta } => delta,
            Loss::SquaredError => DEFAULT_HUBER_DELTA,
        };
        match (self.loss, self.huber_delta) {
            (Some(LossKind::SquaredError), Some(_)) => {
                return Err(Error::config(
                    "huber_delta",
                    "set for a squared_error preset",
                ))
            }
            (Some(LossKind::SquaredError), None) => cfg.loss = Loss::SquaredError,
            (Some(LossKind::Huber), d) => {
                cfg.loss = Loss::Huber {
                    delta: d.unwrap_or(delta),
                }
            }
            (None, Some(d)) => match cfg.loss {
                Loss::Huber { .. } => cfg.loss = Loss::Huber { delta: d },
                Loss::SquaredError => {
                    return Err(Error::config(
                        "huber_delta",
                        "set for a squared_error preset",
                    ))
                }
            },
            (None, None) => {}
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.n_iterations {
            cfg.n_iterations = v;
        }
        if let Some(v) = self.max_depth {
            cfg.max_depth = v;
        }
        if let Some(v) = self.min_samples_leaf {
            cfg.min_samples_leaf = v;
        }
        if let Some(v) = self.subsample {
            cfg.subsample = v;
        }
        match &self.n_bins {
            Some(BinsOverride::Count(n)) => cfg.split = SplitMode::Histogram { n_bins: *n },
            Some(BinsOverride::Named(s)) if s == "exact" => cfg.split = SplitMode::Exact,
            Some(BinsOverride::Named(s)) => {
                return Err(Error::config(
                    "n_bins",
                    format!("expected a count or \"exact\", got {s:?}"),
                ))
            }
            None => {}
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        Ok(())
    }
}

pub const DEFAULT_HUBER_DELTA: f64 = 1.0;

fn preset(name: &str) -> GbmConfig {
    let huber = Loss::Huber {
        delta: DEFAULT_HUBER_DELTA,
    };
    let base = GbmConfig::default();
    match name {
        "gbrt-mse" => GbmConfig {
            learning_rate: 0.05,
            n_iterations: 200,
            max_depth: 4,
            min_samples_leaf: 5,
            ..base
        },
        "gbrt-huber" => GbmConfig {
            loss: huber,
            learning_rate: 0.05,
            n_iterations: 200,
            max_depth: 3,
            min_samples_leaf: 5,
            subsample: 0.8,
            ..base
        },
        "histgb" => GbmConfig {
            learning_rate: 0.1,
            n_iterations: 100,
            max_depth: 4,
            min_samples_leaf: 10,
            split: SplitMode::Histogram { n_bins: 32 },
            ..base
        },
        "catgb-mse" => GbmConfig {
            learning_rate: 0.03,
            n_iterations: 300,
            max_depth: 4,
            min_samples_leaf: 3,
            subsample: 0.8,
            split: SplitMode::Histogram { n_bins: 16 },
            ..base
        },
        "catgb-huber" => GbmConfig {
            loss: huber,
            learning_rate: 0.03,
            n_iterations: 300,
            max_depth: 4,
            min_samples_leaf: 3,
            subsample: 0.8,
            split: SplitMode::Histogram { n_bins: 16 },
            ..base
        },
        "xgboost" => GbmConfig {
            learning_rate: 0.1,
            n_iterations: 120,
            max_depth: 5,
            min_samples_leaf: 8,
            subsample: 0.7,
            ..base
        },
        "lightgbm" => GbmConfig {
            learning_rate: 0.1,
            n_iterations: 300,
            max_depth: 1,
            min_samples_leaf: 10,
            subsample: 0.9,
            split: SplitMode::Histogram { n_bins: 64 },
            ..base
        },
        _ => unreachable!("unknown preset {name}"),
    }
}

/// Builds the pool for one task.
///
/// `members` selects and orders presets (all seven when `None`). Each preset's seed is
/// `seed + position + 1` unless overridden, so default seeds are pairwise distinct.
pub fn submodel_pool(
    seed: u64,
    members: Option<&[String]>,
    overrides: &BTreeMap<String, PresetOverride>,
) -> Result<Vec<NamedConfig>> {
    let names: Vec<String> = match members {
        Some(m) => m.to_vec(),
        None => PRESET_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    if names.is_empty() {
        return Err(Error::config("members", "pool must not be empty"));
    }
    for (i, n) in names.iter().enumerate() {
        if !PRESET_NAMES.contains(&n.as_str()) {
            return Err(Error::config("members", format!("unknown preset `{n}`")));
        }
        if names[..i].contains(n) {
            return Err(Error::config("members", format!("duplicate preset `{n}`")));
        }
    }
    if let Some(k) = overrides.keys().find(|k| !names.contains(k)) {
        return Err(Error::config(
            format!("presets.{k}"),
            "override for a preset that is not in the pool",
        ));
    }

    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut cfg = preset(name);
            cfg.seed = seed.wrapping_add(i as u64 + 1);
            let relabel = |e: Error| match e {
                Error::Config { field, message } => Error::Config {
                    field: format!("presets.{name}.{field}"),
                    message,
                },
                other => other,
            };
            if let Some(o) = overrides.get(name) {
                o.apply(&mut cfg).map_err(relabel)?;
            }
            cfg.validate().map_err(relabel)?;
            Ok(NamedConfig {
                name: name.clone(),
                config: cfg,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pool_has_seven_members_with_two_huber() {
        let pool = submodel_pool(7, None, &BTreeMap::new()).unwrap();
        assert_eq!(pool.len(), 7);
        let huber = pool
            .iter()
            .filter(|p| matches!(p.config.loss, Loss::Huber { .. }))
            .count();
        assert!(huber >= 2);
        let names: Vec<&str> = pool.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, PRESET_NAMES);
        let exact = pool
            .iter()
            .filter(|p| p.config.split == SplitMode::Exact)
            .count();
        assert!(exact > 0 && exact < 7);
    }

    #[test]
    fn seeds_pairwise_distinct() {
        for seed in [0, 1, u64::MAX - 3] {
            let pool = submodel_pool(seed, None, &BTreeMap::new()).unwrap();
            for (i, a) in pool.iter().enumerate() {
                for b in &pool[i + 1..] {
                    assert_ne!(a.config.seed, b.config.seed);
                }
            }
        }
    }

    #[test]
    fn override_touches_only_its_preset() {
        let base = submodel_pool(1, None, &BTreeMap::new()).unwrap();
        let mut o = BTreeMap::new();
        o.insert(
            "gbrt-mse".to_string(),
            PresetOverride {
                max_depth: Some(3),
                n_iterations: Some(10),
                ..Default::default()
            },
        );
        let mut o2 = o.clone();
        let pool = submodel_pool(1, None, &o).unwrap();
        assert_eq!(pool[0].config.max_depth, 3);
        assert_eq!(pool[0].config.n_iterations, 10);
        assert_eq!(&pool[1..], &base[1..]);

        o2.get_mut("gbrt-mse").unwrap().loss = Some(LossKind::Huber);
        o2.get_mut("gbrt-mse").unwrap().n_bins = Some(BinsOverride::Count(12));
        let pool = submodel_pool(1, None, &o2).unwrap();
        assert_eq!(pool[0].config.loss, Loss::Huber { delta: 1.0 });
        assert_eq!(pool[0].config.split, SplitMode::Histogram { n_bins: 12 });
    }

    #[test]
    fn invalid_override_names_the_field() {
        let mut o = BTreeMap::new();
        o.insert(
            "histgb".to_string(),
            PresetOverride {
                learning_rate: Some(1.5),
                ..Default::default()
            },
        );
        let err = submodel_pool(0, None, &o).unwrap_err();
        assert!(
            matches!(&err, Error::Config { field, .. } if field == "presets.histgb.learning_rate"),
            "{err}"
        );

        let mut o = BTreeMap::new();
        o.insert(
            "histgb".to_string(),
            PresetOverride {
                n_bins: Some(BinsOverride::Named("fine".into())),
                ..Default::default()
            },
        );
        let err = submodel_pool(0, None, &o).unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "presets.histgb.n_bins"));

        let mut o = BTreeMap::new();
        o.insert("nope".to_string(), PresetOverride::default());
        assert!(submodel_pool(0, None, &o).is_err());
    }

    #[test]
    fn member_subset_keeps_requested_order() {
        let members = vec!["xgboost".to_string(), "gbrt-mse".to_string()];
        let pool = submodel_pool(0, Some(&members), &BTreeMap::new()).unwrap();
        assert_eq!(pool[0].name, "xgboost");
        assert_eq!(pool[1].name, "gbrt-mse");
        let dup = vec!["xgboost".to_string(), "xgboost".to_string()];
        assert!(submodel_pool(0, Some(&dup), &BTreeMap::new()).is_err());
    }
}
