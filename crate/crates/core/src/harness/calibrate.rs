use super::config::{BaselineReference, ExperimentConfig};
use super::link::{hard_decision_errors, Link};
use super::models::ModelStore;
use super::sweep::{configured_codes, run_coded_sweep_with};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamDomain};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub sigma0: f64,
    pub ber: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub sigma0: f64,
    pub ber: f64,
    pub probes: Vec<Probe>,
}

/// BER of nearest-neighbor decisions against the noise-free received
/// constellation at `sigma0`. Unlike the transmitted-constellation baseline,
/// this detector is noise limited, so its BER goes to zero with the noise.
/// Probes run on a fixed auxiliary stream and see the same symbols and the
/// same unit noise draws.
pub fn baseline_ber(config: &ExperimentConfig, led_count: u32, sigma0: f64, bits: usize) -> Result<f64> {
    let mut c = config.clone();
    c.channel.noise_sigma0 = sigma0;
    let link = Link::from_config(&c, led_count)?;
    let reference = link.reference_points(BaselineReference::Received)?;
    let mut rng = stream(c.seed, StreamDomain::Auxiliary, led_count as u64);
    let (symbols, points) = link.simulate(bits.div_ceil(link.bits_per_symbol()), &mut rng)?;
    let errors = hard_decision_errors(&reference, &symbols, &points);
    Ok(errors as f64 / (symbols.len() * link.bits_per_symbol()) as f64)
}

/// Log-scale bisection for the `noise_sigma0` at which [`baseline_ber`]
/// reaches `target_ber` at `led_count`.
pub fn calibrate_baseline_sigma(
    config: &ExperimentConfig,
    led_count: u32,
    target_ber: f64,
    bits: usize,
) -> Result<Calibration> {
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(Error::Config(format!("target BER {target_ber} must lie in (0, 0.5)")));
    }
    let (mut lo, mut hi) = (1e-6f64, 1.0f64);
    let mut probes = Vec::new();
    for bound in [lo, hi] {
        probes.push(Probe {
            sigma0: bound,
            ber: baseline_ber(config, led_count, bound, bits)?,
        });
    }
    if probes[0].ber > target_ber || probes[1].ber < target_ber {
        return Err(Error::Config(format!(
            "baseline BER spans [{}, {}] over the search range; {target_ber} is unreachable",
            probes[0].ber, probes[1].ber
        )));
    }
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        let ber = baseline_ber(config, led_count, mid, bits)?;
        probes.push(Probe { sigma0: mid, ber });
        if ber < target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma0 = (lo * hi).sqrt();
    Ok(Calibration {
        sigma0,
        ber: baseline_ber(config, led_count, sigma0, bits)?,
        probes,
    })
}

/// Largest `noise_sigma0` in `[lo, hi]` (log-bisected `steps` times) at which
/// the coded sweep of the first configured code measures BER 0 at `led_count`.
/// Each probe trains its own equalizer.
pub fn calibrate_coded_transition(
    config: &ExperimentConfig,
    led_count: u32,
    (mut lo, mut hi): (f64, f64),
    steps: usize,
) -> Result<Calibration> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Config(format!("invalid sigma0 search range [{lo}, {hi}]")));
    }
    let codes = configured_codes(config)?;
    let codes = &codes[..1];
    let probe = |sigma0: f64| -> Result<f64> {
        let mut c = config.clone();
        c.channel.noise_sigma0 = sigma0;
        c.led_counts = vec![led_count];
        let store = ModelStore::new(&c);
        let report = run_coded_sweep_with(&c, codes, &store)?;
        match report.points.first() {
            Some(p) => Ok(p.record.ber),
            None => Err(Error::Config(format!(
                "equalizer training failed at sigma0 {sigma0}: {}",
                report.failures.first().map_or("unknown", |f| f.message.as_str())
            ))),
        }
    };
    let mut probes = Vec::new();
    let mut best = None;
    for _ in 0..steps {
        let mid = (lo * hi).sqrt();
        let ber = probe(mid)?;
        probes.push(Probe { sigma0: mid, ber });
        if ber == 0.0 {
            lo = mid;
            best = Some(Probe { sigma0: mid, ber });
        } else {
            hi = mid;
        }
    }
    let best = match best {
        Some(b) => b,
        None => Probe {
            sigma0: lo,
            ber: probe(lo)?,
        },
    };
    Ok(Calibration {
        sigma0: best.sigma0,
        ber: best.ber,
        probes,
    })
}
