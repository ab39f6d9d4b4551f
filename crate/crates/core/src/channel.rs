//! Parametric camera link.
//!
//! A drive `s` is received as
//!
//! ```text
//! quantize(clip(powf(H s, gamma) + n, 0, 1), adc_bits),   n ~ N(0, (sigma0 / sqrt(led_count))^2 I)
//! ```
//!
//! `H` models leakage between the color filters, `gamma` a memoryless sensor
//! nonlinearity, and the noise shrinks with the square root of the number of
//! lit LEDs (more illuminated pixels averaged per symbol).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::colorspace::RgbIntensity;
use crate::error::{Error, Result};

pub type Matrix3 = [[f64; 3]; 3];

pub const IDENTITY: Matrix3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Default color-filter leakage. Each row is the response of one sensor
/// channel to the red, green and blue emitters.
pub fn default_crosstalk() -> Matrix3 {
    [[0.80, 0.15, 0.05], [0.10, 0.80, 0.10], [0.02, 0.12, 0.86]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub crosstalk: Matrix3,
    pub nonlinearity_gamma: f64,
    /// Noise standard deviation with a single lit LED, in normalized intensity.
    pub noise_sigma0: f64,
    pub led_count: u32,
    pub adc_bits: u32,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            crosstalk: default_crosstalk(),
            nonlinearity_gamma: 1.3,
            noise_sigma0: 0.004,
            led_count: 25,
            adc_bits: 12,
            seed: 0,
        }
    }
}

impl ChannelParams {
    /// Identity crosstalk, linear response, no noise.
    pub fn ideal() -> Self {
        Self {
            crosstalk: IDENTITY,
            nonlinearity_gamma: 1.0,
            noise_sigma0: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.crosstalk.iter().enumerate() {
            if row.iter().any(|&h| !(h.is_finite() && h >= 0.0)) {
                return Err(Error::Channel(format!("crosstalk row {i} has a negative or non-finite gain")));
            }
            let sum: f64 = row.iter().sum();
            if sum > 1.2 {
                return Err(Error::Channel(format!("crosstalk row {i} sums to {sum} > 1.2")));
            }
            let off = sum - row[i];
            if row[i] <= off {
                return Err(Error::Channel(format!(
                    "crosstalk row {i} is not diagonally dominant ({} <= {off})",
                    row[i]
                )));
            }
        }
        if !(self.nonlinearity_gamma.is_finite() && self.nonlinearity_gamma > 0.0) {
            return Err(Error::Channel(format!("gamma {} must be positive", self.nonlinearity_gamma)));
        }
        if !(self.noise_sigma0.is_finite() && self.noise_sigma0 >= 0.0) {
            return Err(Error::Channel(format!("noise sigma {} must be >= 0", self.noise_sigma0)));
        }
        if !(1..=64).contains(&self.led_count) {
            return Err(Error::Channel(format!("led count {} outside [1, 64]", self.led_count)));
        }
        if !(8..=16).contains(&self.adc_bits) {
            return Err(Error::Channel(format!("adc resolution {} outside [8, 16] bits", self.adc_bits)));
        }
        Ok(())
    }

    /// Per-channel noise standard deviation at the configured LED count.
    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma0 / (self.led_count as f64).sqrt()
    }

    pub fn with_led_count(&self, led_count: u32) -> Self {
        Self {
            led_count,
            ..self.clone()
        }
    }

    pub fn with_noise_sigma0(&self, noise_sigma0: f64) -> Self {
        Self {
            noise_sigma0,
            ..self.clone()
        }
    }
}

/// Clips to `[0, 1]` and rounds to the nearest of `2^bits` uniform levels.
pub fn quantize(v: f64, bits: u32) -> f64 {
    let top = ((1u64 << bits) - 1) as f64;
    (v.clamp(0.0, 1.0) * top).round() / top
}

/// Sends one drive through the link. Always draws three normal variates, so
/// the noise stream advances identically whether or not `sigma0` is zero.
pub fn transmit<R: Rng + ?Sized>(s: RgbIntensity, params: &ChannelParams, noise: &mut R) -> RgbIntensity {
    let sigma = params.noise_sigma();
    let drive = s.to_array();
    let h = &params.crosstalk;
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let leaked = h[i][0] * drive[0] + h[i][1] * drive[1] + h[i][2] * drive[2];
        let shaped = if params.nonlinearity_gamma == 1.0 {
            leaked
        } else {
            leaked.max(0.0).powf(params.nonlinearity_gamma)
        };
        let n: f64 = noise.sample(StandardNormal);
        *o = quantize(shaped + sigma * n, params.adc_bits);
    }
    RgbIntensity::from_array(out).expect("quantizer output lies in [0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::rgb_to_xy;
    use crate::constellation::{nearest_index, CskConstellation};
    use crate::rng::{stream, StreamDomain};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantizer_levels() {
        // Oracle: round(0.5 * 4095) / 4095.
        assert_eq!(quantize(0.5, 12), (0.5f64 * 4095.0).round() / 4095.0);
        assert_eq!(quantize(0.5, 12), 2048.0 / 4095.0);
        assert_eq!(quantize(1.7, 12), 1.0);
        assert_eq!(quantize(-0.3, 12), 0.0);
        assert_eq!(quantize(1.0, 12), 1.0);
    }

    proptest! {
        #[test]
        fn quantizer_is_idempotent(v in -2.0f64..3.0, bits in 8u32..=16) {
            let q = quantize(v, bits);
            prop_assert_eq!(quantize(q, bits), q);
        }
    }

    #[test]
    fn default_crosstalk_rows() {
        let h = default_crosstalk();
        for (i, row) in h.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(row[i] > sum - row[i]);
        }
        assert_ne!(h, IDENTITY);
        assert!(ChannelParams::default().validate().is_ok());
    }

    #[test]
    fn validation() {
        let ok = ChannelParams::default();
        let mut p = ok.clone();
        p.crosstalk[1] = [0.5, 0.4, 0.2];
        assert!(p.validate().is_err());
        let mut p = ok.clone();
        p.crosstalk[0] = [1.0, 0.2, 0.05];
        assert!(p.validate().is_err());
        assert!(ok.with_led_count(0).validate().is_err());
        assert!(ok.with_led_count(65).validate().is_err());
        assert!(ok.with_noise_sigma0(-1.0).validate().is_err());
        let p = ChannelParams { adc_bits: 17, ..ok.clone() };
        assert!(p.validate().is_err());
        let p = ChannelParams { nonlinearity_gamma: 0.0, ..ok };
        assert!(p.validate().is_err());
    }

    #[test]
    fn ideal_channel_is_pure_quantization() {
        let p = ChannelParams::ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(transmit(RgbIntensity::BLUE, &p, &mut rng), RgbIntensity::BLUE);
        let s = RgbIntensity::new(0.3, 0.61, 0.05).unwrap();
        let q = transmit(s, &p, &mut rng);
        assert_eq!(q.to_array(), s.to_array().map(|v| quantize(v, 12)));
    }

    #[test]
    fn noise_scales_with_led_count() {
        // Oracle: empirical variance of the received value around a mid-scale drive.
        let s = RgbIntensity::new(0.5, 0.5, 0.5).unwrap();
        let base = ChannelParams {
            noise_sigma0: 0.05,
            adc_bits: 16,
            ..ChannelParams::ideal()
        };
        for (leds, sigma) in [(1, 0.05), (25, 0.01)] {
            let p = base.with_led_count(leds);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let n = 100_000;
            let (mut sum, mut sum2) = (0.0, 0.0);
            for _ in 0..n {
                let v = transmit(s, &p, &mut rng).r() - 0.5;
                sum += v;
                sum2 += v * v;
            }
            let mean = sum / n as f64;
            let var = sum2 / n as f64 - mean * mean;
            let ratio = var / (sigma * sigma);
            assert!((ratio - 1.0).abs() < 0.05, "led {leds}: variance ratio {ratio}");
        }
    }

    #[test]
    fn same_seed_same_output() {
        let p = ChannelParams::default();
        let c = CskConstellation::build(512, 100).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            c.entries().iter().map(|e| transmit(e.rgb, &p, &mut rng).to_array().map(f64::to_bits)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn crosstalk_breaks_unequalized_demodulation() {
        // Oracle: push every symbol through H (noise-free) and demap against the
        // transmit constellation.
        let c = CskConstellation::build(512, 100).unwrap();
        let p = ChannelParams {
            crosstalk: default_crosstalk(),
            ..ChannelParams::ideal()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let wrong = c
            .entries()
            .iter()
            .filter(|e| c.hard_demodulate(rgb_to_xy(transmit(e.rgb, &p, &mut rng))).0 != e.index)
            .count();
        assert!(wrong > 0);
    }

    #[test]
    fn ideal_channel_round_trip_is_identity() {
        let c = CskConstellation::build(512, 100).unwrap();
        let p = ChannelParams::ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for e in c.entries() {
            assert_eq!(c.hard_demodulate(rgb_to_xy(transmit(e.rgb, &p, &mut rng))).0, e.index);
        }
    }

    #[test]
    fn symbol_errors_do_not_grow_with_led_count() {
        let c = CskConstellation::build(512, 100).unwrap();
        let base = ChannelParams {
            noise_sigma0: 0.004,
            ..ChannelParams::default()
        };
        let reference: Vec<_> = {
            let clean = base.with_noise_sigma0(0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            c.entries().iter().map(|e| rgb_to_xy(transmit(e.rgb, &clean, &mut rng))).collect()
        };
        let n = 100_000;
        let mut prev: Option<f64> = None;
        for leds in [1, 4, 9, 16, 25, 36, 49, 64] {
            let p = base.with_led_count(leds);
            let mut rng = stream(11, StreamDomain::Evaluation, leds as u64);
            let mut errors = 0;
            for _ in 0..n {
                let k = rng.random_range(0..512);
                let rx = rgb_to_xy(transmit(c.entry(k).rgb, &p, &mut rng));
                errors += (nearest_index(&reference, &rx) != k) as usize;
            }
            let ser = errors as f64 / n as f64;
            if let Some(prev) = prev {
                let se = (prev * (1.0 - prev) / n as f64).sqrt() + (ser * (1.0 - ser) / n as f64).sqrt();
                assert!(ser <= prev + 2.0 * se, "led {leds}: {ser} > {prev}");
            }
            prev = Some(ser);
        }
    }
}
