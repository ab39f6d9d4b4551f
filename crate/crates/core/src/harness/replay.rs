use std::sync::Arc;

use rand::Rng;

use super::link::Link;
use crate::channel::transmit;
use crate::colorspace::{ChromaticityPoint, ColorMapping, RgbIntensity};
use crate::constellation::nearest_index;
use crate::equalizer::MlpModel;
use crate::error::Result;
use crate::ingest::{extract_rgb, BayerPattern, RawFrame, RegionOfInterest};

/// Symbol decision rule of the replay path.
#[derive(Clone, Debug)]
pub enum Demodulator {
    /// Nearest reference point.
    Hard(Vec<ChromaticityPoint>),
    /// Thresholded equalizer posteriors, read MSB first.
    Equalizer(Arc<MlpModel>),
}

impl Demodulator {
    pub fn decide(&self, p: &ChromaticityPoint) -> Result<usize> {
        match self {
            Demodulator::Hard(reference) => Ok(nearest_index(reference, p)),
            Demodulator::Equalizer(model) => Ok(model
                .forward(p)?
                .iter()
                .fold(0usize, |acc, &post| (acc << 1) | (post > 0.5) as usize)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplayedSymbol {
    pub rgb: RgbIntensity,
    pub point: ChromaticityPoint,
    pub symbol: usize,
}

/// Receive chain on captured frames: ROI averaging, color mapping, decision.
/// Without a ROI the whole frame is used.
pub fn replay_frames(
    frames: &[RawFrame],
    roi: Option<RegionOfInterest>,
    mapping: ColorMapping,
    demodulator: &Demodulator,
) -> Result<Vec<ReplayedSymbol>> {
    frames
        .iter()
        .map(|frame| {
            let roi = roi.unwrap_or_else(|| RegionOfInterest::full(frame));
            let rgb = extract_rgb(frame, &roi)?;
            let point = mapping.apply(rgb)?;
            Ok(ReplayedSymbol {
                rgb,
                point,
                symbol: demodulator.decide(&point)?,
            })
        })
        .collect()
}

/// One uniformly lit frame per symbol, carrying the channel output for that symbol.
pub fn synthesize_frames<R: Rng + ?Sized>(
    link: &Link,
    symbols: &[usize],
    (width, height): (usize, usize),
    pattern: BayerPattern,
    rng: &mut R,
) -> Result<Vec<RawFrame>> {
    symbols
        .iter()
        .map(|&k| {
            let rx = transmit(link.constellation.entry(k).rgb, &link.params, rng);
            RawFrame::uniform(width, height, pattern, rx)
        })
        .collect()
}
