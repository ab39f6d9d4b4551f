use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::colorspace::ColorMapping;
use crate::constellation::ConstellationSpec;
use crate::equalizer::{Activation, Architecture, LearningRateSchedule, TrainingConfig, L_MAX};
use crate::error::{Error, Result};
use crate::ldpc::{CodeRate, MinSumDecoder};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Minutes-scale runs: 300 epochs, 10^5 uncoded bits per point.
    #[default]
    Desk,
    /// The full protocol: 5000 epochs at batch 4096.
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::Config(format!("unknown profile {s:?} (expected desk or paper)"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        })
    }
}

/// Reference points the hard-decision baseline measures distance to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineReference {
    /// The transmitted constellation, ignoring crosstalk and nonlinearity.
    /// This is plain nearest-neighbor demodulation.
    #[default]
    Transmitted,
    /// The noise-free channel image of every symbol, as a pilot-calibrated
    /// receiver would see it.
    Received,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

/// One experiment, read from JSON. Missing fields take the desk defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub constellation: ConstellationSpec,
    pub color_mapping: ColorMapping,
    /// `led_count` here is used by single-point commands; sweeps use `led_counts`.
    pub channel: ChannelParams,
    pub led_counts: Vec<u32>,
    pub hidden_units: Vec<usize>,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    /// Architecture for `train`, `calibrate` and the coded sweep.
    pub equalizer: Architecture,
    pub training: TrainingConfig,
    pub baseline: BaselineReference,
    /// Minimum number of bits measured per uncoded grid point.
    pub uncoded_bits: usize,
    pub code_rates: Vec<CodeRate>,
    /// Adjacency-list code replacing the DVB-S2 codes in the coded sweep.
    pub code_file: Option<PathBuf>,
    pub blocks_per_point: usize,
    pub decoder: MinSumDecoder,
    pub l_max: f64,
    pub seed: u64,
    pub output: OutputConfig,
    /// Write measured wall time; when false the column is 0 and output is byte-reproducible.
    pub record_wall_time: bool,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Directory for trained models reused across runs.
    pub model_cache: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    pub fn desk() -> Self {
        Self {
            profile: Profile::Desk,
            constellation: ConstellationSpec::default(),
            color_mapping: ColorMapping::default(),
            channel: ChannelParams::default(),
            led_counts: (1..=8).map(|s| s * s).collect(),
            hidden_units: vec![64, 256],
            hidden_layers: vec![1, 5],
            activation: Activation::Relu,
            equalizer: Architecture::default(),
            training: TrainingConfig {
                epochs: 300,
                batch_size: 256,
                learning_rate: 3e-3,
                schedule: LearningRateSchedule::Cosine,
                ..TrainingConfig::default()
            },
            baseline: BaselineReference::default(),
            uncoded_bits: 100_000,
            code_rates: CodeRate::ALL.to_vec(),
            code_file: None,
            blocks_per_point: 3,
            decoder: MinSumDecoder::default(),
            l_max: L_MAX,
            seed: 1,
            output: OutputConfig::default(),
            record_wall_time: false,
            workers: 0,
            model_cache: None,
        }
    }

    pub fn paper() -> Self {
        Self {
            profile: Profile::Paper,
            hidden_units: vec![64, 128, 256, 512],
            hidden_layers: vec![3, 5, 7],
            training: TrainingConfig::default(),
            uncoded_bits: 3 * 64_800,
            ..Self::desk()
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    /// Reads a JSON file. Fields it omits come from `profile`'s defaults,
    /// or from the profile named inside the file.
    pub fn from_json_file(path: impl AsRef<Path>, profile: Option<Profile>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, profile)
    }

    pub fn from_json(text: &str, profile: Option<Profile>) -> Result<Self> {
        let mut value: serde_json::Value = serde_json::from_str(text)?;
        let named = match value.get("profile") {
            Some(p) => Some(serde_json::from_value::<Profile>(p.clone())?),
            None => None,
        };
        let profile = profile.or(named).unwrap_or_default();
        let mut merged = serde_json::to_value(Self::for_profile(profile))?;
        if let Some(obj) = value.as_object_mut() {
            obj.insert("profile".into(), serde_json::to_value(profile)?);
        }
        merge(&mut merged, value);
        let config: Self = serde_json::from_value(merged)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.training.validate()?;
        let empty = [
            ("led_counts", self.led_counts.is_empty()),
            ("hidden_units", self.hidden_units.is_empty()),
            ("hidden_layers", self.hidden_layers.is_empty()),
            ("code_rates", self.code_rates.is_empty() && self.code_file.is_none()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("{name} must not be empty")));
        }
        for &led in &self.led_counts {
            self.channel.with_led_count(led).validate()?;
        }
        if self.hidden_units.iter().chain(&self.hidden_layers).any(|&v| v == 0)
            || self.equalizer.hidden_units == 0
            || self.equalizer.hidden_layers == 0
        {
            return Err(Error::Config("architectures need at least one layer of one unit".into()));
        }
        if self.hidden_units.iter().any(|&u| u >= 1 << 16) || self.hidden_layers.iter().any(|&h| h >= 1 << 8) {
            return Err(Error::Config("at most 65535 units and 255 hidden layers".into()));
        }
        if self.blocks_per_point == 0 || self.uncoded_bits == 0 {
            return Err(Error::Config("blocks_per_point and uncoded_bits must be >= 1".into()));
        }
        if self.decoder.max_iterations == 0 {
            return Err(Error::Config("decoder needs at least one iteration".into()));
        }
        if !(self.l_max.is_finite() && self.l_max > 0.0) {
            return Err(Error::Config(format!("l_max {} must be positive", self.l_max)));
        }
        Ok(())
    }

    /// Every `(N_u, N_h)` pair of the uncoded sweep, units varying fastest.
    pub fn architectures(&self) -> Vec<Architecture> {
        let mut out = Vec::new();
        for &layers in &self.hidden_layers {
            for &units in &self.hidden_units {
                out.push(Architecture {
                    hidden_units: units,
                    hidden_layers: layers,
                    activation: self.activation,
                });
            }
        }
        out
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let desk = ExperimentConfig::desk();
        assert_eq!(desk.led_counts, vec![1, 4, 9, 16, 25, 36, 49, 64]);
        assert_eq!(desk.blocks_per_point, 3);
        assert_eq!(desk.training.sample_count, 15_000);
        assert_eq!(desk.training.epochs, 300);
        assert_eq!(desk.uncoded_bits, 100_000);
        assert!(desk.architectures().contains(&Architecture::new(256, 5)));
        assert_eq!(desk.code_rates.len(), 11);

        let paper = ExperimentConfig::paper();
        assert_eq!(paper.training.epochs, 5_000);
        assert_eq!(paper.training.batch_size, 4_096);
        assert!(paper.architectures().contains(&Architecture::new(256, 5)));
        desk.validate().unwrap();
        paper.validate().unwrap();
    }

    #[test]
    fn partial_json_overrides_profile_defaults() {
        let c = ExperimentConfig::from_json(r#"{"seed": 9, "training": {"epochs": 7}, "code_rates": ["1/2"]}"#, None).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.training.epochs, 7);
        assert_eq!(c.training.batch_size, 256);
        assert_eq!(c.code_rates, vec![CodeRate::R1_2]);

        let p = ExperimentConfig::from_json(r#"{"profile": "paper", "seed": 3}"#, None).unwrap();
        assert_eq!(p.training.epochs, 5_000);
        let forced = ExperimentConfig::from_json(r#"{"profile": "paper"}"#, Some(Profile::Desk)).unwrap();
        assert_eq!(forced.training.epochs, 300);
        assert_eq!(forced.profile, Profile::Desk);
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::paper();
        let back = ExperimentConfig::from_json(&c.to_json().unwrap(), None).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for bad in [
            r#"{"led_counts": []}"#,
            r#"{"hidden_units": [0]}"#,
            r#"{"blocks_per_point": 0}"#,
            r#"{"l_max": -1.0}"#,
            r#"{"led_counts": [100]}"#,
            r#"{"no_such_field": 1}"#,
            r#"{"code_rates": ["7/8"]}"#,
        ] {
            assert!(ExperimentConfig::from_json(bad, None).is_err(), "{bad}");
        }
    }
}
