//! Demosaic-free RGB extraction from 12-bit raw Bayer frames.
//!
//! # Container format
//!
//! A frame file is a 16-byte header followed by `width * height` little-endian
//! `u16` samples in row-major order. Samples carry 12-bit data in the low bits;
//! the high four bits must be zero.
//!
//! | offset | size | field                                             |
//! |--------|------|---------------------------------------------------|
//! | 0      | 4    | magic `b"OCCR"`                                   |
//! | 4      | 2    | version, `u16` LE, currently 1                    |
//! | 6      | 1    | pattern tag: 0 RGGB, 1 BGGR, 2 GRBG, 3 GBRG       |
//! | 7      | 1    | reserved, zero                                    |
//! | 8      | 4    | width, `u32` LE, even                             |
//! | 12     | 4    | height, `u32` LE, even                            |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::colorspace::RgbIntensity;
use crate::error::{Error, Result};

pub const FRAME_MAGIC: [u8; 4] = *b"OCCR";
pub const FRAME_VERSION: u16 = 1;
pub const SAMPLE_MAX: u16 = 4095;
const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteColor {
    Red,
    Green,
    Blue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BayerPattern {
    Rggb,
    Bggr,
    Grbg,
    Gbrg,
}

impl BayerPattern {
    pub fn tag(self) -> u8 {
        match self {
            BayerPattern::Rggb => 0,
            BayerPattern::Bggr => 1,
            BayerPattern::Grbg => 2,
            BayerPattern::Gbrg => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => BayerPattern::Rggb,
            1 => BayerPattern::Bggr,
            2 => BayerPattern::Grbg,
            3 => BayerPattern::Gbrg,
            _ => return Err(Error::Frame(format!("unknown Bayer pattern tag {tag}"))),
        })
    }

    /// Color of the site at column `x`, row `y`.
    pub fn color_at(self, x: usize, y: usize) -> SiteColor {
        use SiteColor::*;
        let quad = match self {
            BayerPattern::Rggb => [[Red, Green], [Green, Blue]],
            BayerPattern::Bggr => [[Blue, Green], [Green, Red]],
            BayerPattern::Grbg => [[Green, Red], [Blue, Green]],
            BayerPattern::Gbrg => [[Green, Blue], [Red, Green]],
        };
        quad[y & 1][x & 1]
    }

    /// Pattern seen after rotating an even-sized frame by 180 degrees.
    pub fn rotated_180(self) -> Self {
        match self {
            BayerPattern::Rggb => BayerPattern::Bggr,
            BayerPattern::Bggr => BayerPattern::Rggb,
            BayerPattern::Grbg => BayerPattern::Gbrg,
            BayerPattern::Gbrg => BayerPattern::Grbg,
        }
    }
}

impl std::str::FromStr for BayerPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RGGB" => Ok(BayerPattern::Rggb),
            "BGGR" => Ok(BayerPattern::Bggr),
            "GRBG" => Ok(BayerPattern::Grbg),
            "GBRG" => Ok(BayerPattern::Gbrg),
            _ => Err(Error::Frame(format!("unknown Bayer pattern {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawFrame {
    width: usize,
    height: usize,
    pattern: BayerPattern,
    samples: Vec<u16>,
}

impl RawFrame {
    pub fn new(width: usize, height: usize, pattern: BayerPattern, samples: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
            return Err(Error::Frame(format!(
                "dimensions {width}x{height} are not whole Bayer quads"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::Frame(format!(
                "{} samples for a {width}x{height} frame",
                samples.len()
            )));
        }
        if let Some(pos) = samples.iter().position(|&s| s > SAMPLE_MAX) {
            return Err(Error::Frame(format!(
                "sample {} at offset {pos} exceeds 12 bits",
                samples[pos]
            )));
        }
        Ok(Self {
            width,
            height,
            pattern,
            samples,
        })
    }

    /// A frame whose every site reads the 12-bit level of the matching channel of `rgb`.
    pub fn uniform(width: usize, height: usize, pattern: BayerPattern, rgb: RgbIntensity) -> Result<Self> {
        let level = |v: f64| (v * SAMPLE_MAX as f64).round() as u16;
        let [r, g, b] = rgb.to_array().map(level);
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(match pattern.color_at(x, y) {
                    SiteColor::Red => r,
                    SiteColor::Green => g,
                    SiteColor::Blue => b,
                });
            }
        }
        Self::new(width, height, pattern, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pattern(&self) -> BayerPattern {
        self.pattern
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    pub fn sample(&self, x: usize, y: usize) -> u16 {
        self.samples[y * self.width + x]
    }

    /// The same sensor data rotated by 180 degrees, with the pattern relabeled.
    pub fn rotated_180(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self {
            width: self.width,
            height: self.height,
            pattern: self.pattern.rotated_180(),
            samples,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 2 * self.samples.len());
        out.extend_from_slice(&FRAME_MAGIC);
        out.extend_from_slice(&FRAME_VERSION.to_le_bytes());
        out.push(self.pattern.tag());
        out.push(0);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Frame(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[0..4] != FRAME_MAGIC {
            return Err(Error::Frame("bad magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FRAME_VERSION {
            return Err(Error::Frame(format!("unsupported version {version}")));
        }
        let pattern = BayerPattern::from_tag(bytes[6])?;
        let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let body = &bytes[HEADER_LEN..];
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(2))
            .ok_or_else(|| Error::Frame("frame dimensions overflow".into()))?;
        if body.len() != expected {
            return Err(Error::Frame(format!(
                "{} sample bytes for a {width}x{height} frame",
                body.len()
            )));
        }
        let samples = body.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        Self::new(width, height, pattern, samples)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl RegionOfInterest {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self { x0, y0, w, h }
    }

    pub fn full(frame: &RawFrame) -> Self {
        Self::new(0, 0, frame.width(), frame.height())
    }

    pub fn validate(&self, frame: &RawFrame) -> Result<()> {
        if self.w < 2 || self.h < 2 {
            return Err(Error::Frame(format!("ROI {}x{} is smaller than 2x2", self.w, self.h)));
        }
        if self.x0 + self.w > frame.width() || self.y0 + self.h > frame.height() {
            return Err(Error::Frame(format!(
                "ROI {self:?} exceeds the {}x{} frame",
                frame.width(),
                frame.height()
            )));
        }
        Ok(())
    }

    /// The same region after the frame is rotated by 180 degrees.
    pub fn rotated_180(&self, frame: &RawFrame) -> Self {
        Self::new(frame.width() - self.x0 - self.w, frame.height() - self.y0 - self.h, self.w, self.h)
    }
}

impl std::str::FromStr for RegionOfInterest {
    type Err = Error;

    /// Parses `x0,y0,w,h`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Frame(format!("ROI {s:?}: {e}")))?;
        match parts[..] {
            [x0, y0, w, h] => Ok(Self::new(x0, y0, w, h)),
            _ => Err(Error::Frame(format!("ROI {s:?} is not x0,y0,w,h"))),
        }
    }
}

/// Per-color site sums and counts inside `roi`.
pub fn site_sums(frame: &RawFrame, roi: &RegionOfInterest) -> Result<([u64; 3], [u64; 3])> {
    roi.validate(frame)?;
    let mut sums = [0u64; 3];
    let mut counts = [0u64; 3];
    for y in roi.y0..roi.y0 + roi.h {
        for x in roi.x0..roi.x0 + roi.w {
            let c = match frame.pattern().color_at(x, y) {
                SiteColor::Red => 0,
                SiteColor::Green => 1,
                SiteColor::Blue => 2,
            };
            sums[c] += frame.sample(x, y) as u64;
            counts[c] += 1;
        }
    }
    Ok((sums, counts))
}

/// Mean of the red, green (both sites pooled) and blue samples inside `roi`,
/// each scaled by 1/4095. No interpolation between sites.
pub fn extract_rgb(frame: &RawFrame, roi: &RegionOfInterest) -> Result<RgbIntensity> {
    let (sums, counts) = site_sums(frame, roi)?;
    if counts.contains(&0) {
        return Err(Error::Frame(format!("ROI {roi:?} misses a color site")));
    }
    let mean = [0, 1, 2].map(|c| sums[c] as f64 / counts[c] as f64 / SAMPLE_MAX as f64);
    RgbIntensity::from_array(mean)
}

/// Fraction of pixels whose normalized sample exceeds `threshold`.
pub fn led_area_fraction(frame: &RawFrame, threshold: f64) -> f64 {
    let lit = frame
        .samples()
        .iter()
        .filter(|&&s| s as f64 / SAMPLE_MAX as f64 > threshold)
        .count();
    lit as f64 / frame.samples().len() as f64
}
