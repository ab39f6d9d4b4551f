use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::RngCore;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::link::generate_training_set;
use crate::equalizer::{train, Architecture, MlpModel, TrainingConfig, TrainingReport};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamDomain};

/// Stream index for everything tied to one `(led_count, architecture)` pair.
pub fn model_index(led_count: u32, arch: Architecture) -> u64 {
    ((led_count as u64) << 24) | ((arch.hidden_units as u64) << 8) | arch.hidden_layers as u64
}

/// Training settings for one grid point, with a seed derived from the master seed.
pub fn point_training_config(config: &ExperimentConfig, led_count: u32, arch: Architecture) -> TrainingConfig {
    let mut rng = stream(config.seed, StreamDomain::Model, model_index(led_count, arch));
    TrainingConfig {
        seed: rng.next_u64(),
        ..config.training.clone()
    }
}

#[derive(Clone)]
pub struct ReadyModel {
    pub model: Arc<MlpModel>,
    /// `None` when the model came from the cache.
    pub report: Option<TrainingReport>,
    pub train_seconds: f64,
}

/// Trains each `(led_count, architecture)` model once per run, optionally
/// persisting it in a cache directory keyed by everything that affects training.
pub struct ModelStore<'a> {
    config: &'a ExperimentConfig,
    cache_dir: Option<PathBuf>,
    memo: Mutex<HashMap<(u32, Architecture), ReadyModel>>,
}

impl<'a> ModelStore<'a> {
    pub fn new(config: &'a ExperimentConfig) -> Self {
        Self {
            config,
            cache_dir: config.model_cache.clone(),
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn cache_path(&self, led_count: u32, arch: Architecture) -> Option<PathBuf> {
        #[derive(Serialize)]
        struct Key<'k> {
            config: &'k ExperimentConfig,
            led_count: u32,
            arch: Architecture,
        }
        let dir = self.cache_dir.as_ref()?;
        let mut relevant = self.config.clone();
        relevant.led_counts.clear();
        relevant.hidden_units.clear();
        relevant.hidden_layers.clear();
        relevant.code_rates.clear();
        relevant.code_file = None;
        relevant.output = Default::default();
        relevant.model_cache = None;
        relevant.workers = 0;
        relevant.record_wall_time = false;
        relevant.uncoded_bits = 0;
        relevant.blocks_per_point = 0;
        relevant.decoder = Default::default();
        relevant.l_max = 0.0;
        relevant.baseline = Default::default();
        relevant.equalizer = arch;
        relevant.channel.led_count = led_count;
        let key = serde_json::to_vec(&Key {
            config: &relevant,
            led_count,
            arch,
        })
        .expect("config serializes");
        Some(dir.join(format!(
            "led{led_count}_u{}_h{}_{:016x}.occm",
            arch.hidden_units,
            arch.hidden_layers,
            fnv1a(&key)
        )))
    }

    /// Uses `model` for every request at `led_count` with its architecture.
    pub fn insert(&self, led_count: u32, model: MlpModel) {
        let arch = model.architecture();
        self.memo.lock().expect("model memo poisoned").insert(
            (led_count, arch),
            ReadyModel {
                model: Arc::new(model),
                report: None,
                train_seconds: 0.0,
            },
        );
    }

    pub fn get(&self, led_count: u32, arch: Architecture) -> Result<ReadyModel> {
        if let Some(m) = self.memo.lock().expect("model memo poisoned").get(&(led_count, arch)) {
            return Ok(m.clone());
        }
        let ready = self.load_or_train(led_count, arch)?;
        self.memo
            .lock()
            .expect("model memo poisoned")
            .insert((led_count, arch), ready.clone());
        Ok(ready)
    }

    fn load_or_train(&self, led_count: u32, arch: Architecture) -> Result<ReadyModel> {
        let path = self.cache_path(led_count, arch);
        if let Some(path) = path.as_ref().filter(|p| p.exists()) {
            return Ok(ReadyModel {
                model: Arc::new(MlpModel::load(path)?),
                report: None,
                train_seconds: 0.0,
            });
        }
        let start = Instant::now();
        let data = generate_training_set(self.config, led_count)?;
        let trained = train(&data, arch, &point_training_config(self.config, led_count, arch))?;
        let train_seconds = start.elapsed().as_secs_f64();
        if let Some(path) = path {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            trained.model.save(&path)?;
        }
        Ok(ReadyModel {
            model: Arc::new(trained.model),
            report: Some(trained.report),
            train_seconds,
        })
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::desk();
        c.training.sample_count = 300;
        c.training.epochs = 2;
        c
    }

    #[test]
    fn indices_are_distinct_per_point() {
        let a = model_index(25, Architecture::new(256, 5));
        assert_ne!(a, model_index(25, Architecture::new(256, 4)));
        assert_ne!(a, model_index(16, Architecture::new(256, 5)));
        assert_ne!(a, model_index(25, Architecture::new(128, 5)));
        assert!(model_index(64, Architecture::new(65_535, 255)) < 1 << 48);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny();
        c.model_cache = Some(dir.path().to_path_buf());
        let arch = Architecture::new(8, 2);
        let first = ModelStore::new(&c).get(4, arch).unwrap();
        assert!(first.report.is_some());
        let path = ModelStore::new(&c).cache_path(4, arch).unwrap();
        assert!(path.exists());
        let again = ModelStore::new(&c).get(4, arch).unwrap();
        assert!(again.report.is_none());
        assert_eq!(*again.model, *first.model);

        // Output-only settings share the cache; training settings do not.
        let mut same = c.clone();
        same.output.dir = "elsewhere".into();
        same.workers = 3;
        assert_eq!(ModelStore::new(&same).cache_path(4, arch).unwrap(), path);
        let mut other = c.clone();
        other.training.epochs = 3;
        assert_ne!(ModelStore::new(&other).cache_path(4, arch).unwrap(), path);
    }
}
