use rand::Rng;

use super::config::{BaselineReference, ExperimentConfig};
use crate::channel::{transmit, ChannelParams};
use crate::colorspace::{ChromaticityPoint, ColorMapping};
use crate::constellation::{nearest_index, CskConstellation, SymbolBits};
use crate::error::Result;
use crate::rng::{stream, StreamDomain};

/// Constellation, channel and color mapping at one operating point.
#[derive(Clone, Debug)]
pub struct Link {
    pub constellation: CskConstellation,
    pub params: ChannelParams,
    pub mapping: ColorMapping,
}

impl Link {
    pub fn new(constellation: CskConstellation, params: ChannelParams, mapping: ColorMapping) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            constellation,
            params,
            mapping,
        })
    }

    pub fn from_config(config: &ExperimentConfig, led_count: u32) -> Result<Self> {
        Self::new(
            CskConstellation::from_spec(config.constellation)?,
            config.channel.with_led_count(led_count),
            config.color_mapping,
        )
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.constellation.bits_per_symbol()
    }

    /// Sends symbol `index` once and returns the received point.
    pub fn receive<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> Result<ChromaticityPoint> {
        let rx = transmit(self.constellation.entry(index).rgb, &self.params, rng);
        self.mapping.apply(rx)
    }

    /// Draws `count` uniform symbols and their received points from one stream.
    pub fn simulate<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<(Vec<usize>, Vec<ChromaticityPoint>)> {
        let order = self.constellation.order();
        let mut symbols = Vec::with_capacity(count);
        let mut points = Vec::with_capacity(count);
        for _ in 0..count {
            let k = rng.random_range(0..order);
            points.push(self.receive(k, rng)?);
            symbols.push(k);
        }
        Ok((symbols, points))
    }

    /// Points the hard-decision baseline compares against.
    pub fn reference_points(&self, reference: BaselineReference) -> Result<Vec<ChromaticityPoint>> {
        match reference {
            BaselineReference::Transmitted => Ok(self.constellation.chroma_points()),
            BaselineReference::Received => {
                let clean = self.params.with_noise_sigma0(0.0);
                let mut unused = stream(0, StreamDomain::Auxiliary, 0);
                self.constellation
                    .entries()
                    .iter()
                    .map(|e| self.mapping.apply(transmit(e.rgb, &clean, &mut unused)))
                    .collect()
            }
        }
    }
}

/// Bit errors of nearest-neighbor decisions against `reference`.
pub fn hard_decision_errors(reference: &[ChromaticityPoint], symbols: &[usize], points: &[ChromaticityPoint]) -> u64 {
    symbols
        .iter()
        .zip(points)
        .map(|(&k, p)| (nearest_index(reference, p) ^ k).count_ones() as u64)
        .sum()
}

/// Labelled training pairs for one LED count, drawn from the training stream.
pub fn generate_training_set(config: &ExperimentConfig, led_count: u32) -> Result<Vec<(ChromaticityPoint, SymbolBits)>> {
    let link = Link::from_config(config, led_count)?;
    let mut rng = stream(config.seed, StreamDomain::Training, led_count as u64);
    let (symbols, points) = link.simulate(config.training.sample_count, &mut rng)?;
    let width = link.bits_per_symbol();
    Ok(points
        .into_iter()
        .zip(symbols)
        .map(|(p, k)| (p, SymbolBits::from_index(k, width)))
        .collect())
}

/// Held-out symbols and received points for one LED count, at least `bits` bits.
pub fn generate_evaluation_set(
    config: &ExperimentConfig,
    led_count: u32,
    bits: usize,
) -> Result<(Vec<usize>, Vec<ChromaticityPoint>)> {
    let link = Link::from_config(config, led_count)?;
    let mut rng = stream(config.seed, StreamDomain::Evaluation, led_count as u64);
    link.simulate(bits.div_ceil(link.bits_per_symbol()), &mut rng)
}
