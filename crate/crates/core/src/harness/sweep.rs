use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::link::{generate_evaluation_set, hard_decision_errors, Link};
use super::models::{ModelStore, ReadyModel};
use super::records::BerRecord;
use crate::colorspace::ChromaticityPoint;
use crate::equalizer::{llr_from_posterior, Architecture, MlpModel};
use crate::error::{Error, Result};
use crate::ldpc::{ber_count, LdpcCode};
use crate::rng::{stream, StreamDomain};

/// A grid point that could not be measured.
#[derive(Clone, Debug, PartialEq)]
pub struct PointFailure {
    pub led_count: u32,
    pub arch: Architecture,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UncodedReport {
    /// Per LED count: the baseline, then one record per architecture.
    pub records: Vec<BerRecord>,
    pub failures: Vec<PointFailure>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodedPoint {
    pub record: BerRecord,
    pub blocks: usize,
    pub converged_blocks: usize,
    pub mean_iterations: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CodedReport {
    /// Per LED count, one point per code in configuration order.
    pub points: Vec<CodedPoint>,
    pub failures: Vec<PointFailure>,
}

impl CodedReport {
    pub fn records(&self) -> Vec<BerRecord> {
        self.points.iter().map(|p| p.record.clone()).collect()
    }
}

/// A code in the coded sweep with the label written to the `rate` column.
#[derive(Clone)]
pub struct NamedCode {
    pub label: String,
    pub code: Arc<LdpcCode>,
}

/// The DVB-S2 codes of `config.code_rates`, or the single adjacency-list code of `config.code_file`.
pub fn configured_codes(config: &ExperimentConfig) -> Result<Vec<NamedCode>> {
    if let Some(path) = &config.code_file {
        let code = LdpcCode::from_adjacency_file(path)?;
        return Ok(vec![NamedCode {
            label: format!("{}/{}", code.k(), code.n()),
            code: Arc::new(code),
        }]);
    }
    config
        .code_rates
        .par_iter()
        .map(|&rate| {
            Ok(NamedCode {
                label: rate.to_string(),
                code: Arc::new(LdpcCode::dvbs2(rate)?),
            })
        })
        .collect()
}

/// Runs `f` on a pool of `workers` threads (0 means one per core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn wall(config: &ExperimentConfig, seconds: f64) -> f64 {
    if config.record_wall_time {
        seconds
    } else {
        0.0
    }
}

/// Bit errors of thresholded posteriors against the true symbols.
pub fn equalized_errors(model: &MlpModel, symbols: &[usize], points: &[ChromaticityPoint]) -> Result<u64> {
    let post = model.forward_batch(points)?;
    let width = post.ncols();
    let mut errors = 0u64;
    for (row, &k) in post.rows().into_iter().zip(symbols) {
        for (bit, &p) in row.iter().enumerate() {
            let sent = (k >> (width - 1 - bit)) & 1 == 1;
            errors += ((p > 0.5) != sent) as u64;
        }
    }
    Ok(errors)
}

fn train_grid(store: &ModelStore, keys: &[(u32, Architecture)]) -> Vec<Result<ReadyModel>> {
    keys.par_iter().map(|&(led, arch)| store.get(led, arch)).collect()
}

/// Uncoded BER of the hard-decision baseline and every configured architecture,
/// at every LED count. All entries at one LED count see the same received points.
pub fn run_uncoded_sweep(config: &ExperimentConfig) -> Result<UncodedReport> {
    config.validate()?;
    with_workers(config.workers, || uncoded(config, &ModelStore::new(config)))?
}

/// Uncoded sweep drawing models from `store`.
pub fn run_uncoded_sweep_with(config: &ExperimentConfig, store: &ModelStore) -> Result<UncodedReport> {
    config.validate()?;
    with_workers(config.workers, || uncoded(config, store))?
}

fn uncoded(config: &ExperimentConfig, store: &ModelStore) -> Result<UncodedReport> {
    let archs = config.architectures();
    let keys: Vec<(u32, Architecture)> = config
        .led_counts
        .iter()
        .flat_map(|&led| archs.iter().map(move |&a| (led, a)))
        .collect();
    let trained = train_grid(store, &keys);

    let per_led: Vec<Result<(Vec<BerRecord>, Vec<PointFailure>)>> = config
        .led_counts
        .par_iter()
        .enumerate()
        .map(|(li, &led)| {
            let start = Instant::now();
            let link = Link::from_config(config, led)?;
            let reference = link.reference_points(config.baseline)?;
            let (symbols, points) = generate_evaluation_set(config, led, config.uncoded_bits)?;
            let bits_total = (symbols.len() * link.bits_per_symbol()) as u64;
            let eval_seconds = start.elapsed().as_secs_f64();

            let t = Instant::now();
            let errors = hard_decision_errors(&reference, &symbols, &points);
            let mut records = vec![BerRecord::new(
                led,
                (0, 0),
                None,
                errors,
                bits_total,
                wall(config, eval_seconds + t.elapsed().as_secs_f64()),
            )];
            let mut failures = Vec::new();
            for (ai, &arch) in archs.iter().enumerate() {
                match &trained[li * archs.len() + ai] {
                    Ok(ready) => {
                        let t = Instant::now();
                        let errors = equalized_errors(&ready.model, &symbols, &points)?;
                        let seconds = ready.train_seconds + eval_seconds + t.elapsed().as_secs_f64();
                        records.push(BerRecord::new(
                            led,
                            (arch.hidden_units, arch.hidden_layers),
                            None,
                            errors,
                            bits_total,
                            wall(config, seconds),
                        ));
                    }
                    Err(e) => failures.push(PointFailure {
                        led_count: led,
                        arch,
                        message: e.to_string(),
                    }),
                }
            }
            Ok((records, failures))
        })
        .collect();

    let mut report = UncodedReport::default();
    for r in per_led {
        let (records, failures) = r?;
        report.records.extend(records);
        report.failures.extend(failures);
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockOutcome {
    pub bit_errors: u64,
    pub info_bits: u64,
    pub converged: bool,
    pub iterations: usize,
}

/// Stream index of one coded block.
pub fn block_index(code_index: usize, led_count: u32, block: usize) -> u64 {
    assert!(code_index < 1 << 8 && block < 1 << 28, "coded grid too large");
    (1 << 44) | ((code_index as u64) << 36) | ((led_count as u64) << 28) | block as u64
}

/// Encodes one random information block, sends it as consecutive symbols
/// (zero-padding the last), and decodes the equalizer's LLRs.
pub fn run_block(
    config: &ExperimentConfig,
    link: &Link,
    model: &MlpModel,
    code: &LdpcCode,
    index: u64,
) -> Result<BlockOutcome> {
    let mut payload = stream(config.seed, StreamDomain::Payload, index);
    let info: Vec<u8> = (0..code.k()).map(|_| payload.random_range(0..2u8)).collect();
    let word = code.encode(&info)?;

    let width = link.bits_per_symbol();
    let mut noise = stream(config.seed, StreamDomain::Evaluation, index);
    let points = word
        .chunks(width)
        .map(|chunk| {
            let k = (0..width).fold(0usize, |acc, i| (acc << 1) | chunk.get(i).copied().unwrap_or(0) as usize);
            link.receive(k, &mut noise)
        })
        .collect::<Result<Vec<_>>>()?;

    let post = model.forward_batch(&points)?;
    let mut llrs: Vec<f64> = post
        .rows()
        .into_iter()
        .flat_map(|row| row.to_vec())
        .map(|p| llr_from_posterior(p, config.l_max))
        .collect();
    llrs.truncate(code.n());
    let decoded = config.decoder.decode(code, &llrs)?;
    let (errors, bits) = ber_count(&info, decoded.info_bits())?;
    Ok(BlockOutcome {
        bit_errors: errors as u64,
        info_bits: bits as u64,
        converged: decoded.converged,
        iterations: decoded.iterations_used,
    })
}

/// Coded BER per `(led_count, code)` with the `config.equalizer` model.
pub fn run_coded_sweep(config: &ExperimentConfig) -> Result<CodedReport> {
    config.validate()?;
    with_workers(config.workers, || {
        let codes = configured_codes(config)?;
        let store = ModelStore::new(config);
        coded(config, &codes, &store)
    })?
}

/// Coded sweep against prepared codes and models.
pub fn run_coded_sweep_with(config: &ExperimentConfig, codes: &[NamedCode], store: &ModelStore) -> Result<CodedReport> {
    config.validate()?;
    with_workers(config.workers, || coded(config, codes, store))?
}

fn coded(config: &ExperimentConfig, codes: &[NamedCode], store: &ModelStore) -> Result<CodedReport> {
    let arch = config.equalizer;
    let keys: Vec<(u32, Architecture)> = config.led_counts.iter().map(|&l| (l, arch)).collect();
    let trained = train_grid(store, &keys);
    let mut report = CodedReport::default();

    let mut tasks = Vec::new();
    for (li, &led) in config.led_counts.iter().enumerate() {
        match &trained[li] {
            Ok(_) => {
                for ci in 0..codes.len() {
                    for b in 0..config.blocks_per_point {
                        tasks.push((li, ci, b));
                    }
                }
            }
            Err(e) => report.failures.push(PointFailure {
                led_count: led,
                arch,
                message: e.to_string(),
            }),
        }
    }
    let links = config
        .led_counts
        .iter()
        .map(|&led| Link::from_config(config, led))
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<Result<(BlockOutcome, f64)>> = tasks
        .par_iter()
        .map(|&(li, ci, b)| {
            let start = Instant::now();
            let model = &trained[li].as_ref().expect("only trained points are scheduled").model;
            let led = config.led_counts[li];
            let out = run_block(config, &links[li], model, &codes[ci].code, block_index(ci, led, b))?;
            Ok((out, start.elapsed().as_secs_f64()))
        })
        .collect();

    let per_point = config.blocks_per_point;
    let mut outcomes = outcomes.into_iter();
    for (li, &led) in config.led_counts.iter().enumerate() {
        let Ok(ready) = &trained[li] else { continue };
        for code in codes {
            let mut errors = 0;
            let mut bits = 0;
            let mut converged = 0;
            let mut iterations = 0;
            let mut seconds = ready.train_seconds;
            for _ in 0..per_point {
                let (o, s) = outcomes.next().expect("one outcome per task")?;
                errors += o.bit_errors;
                bits += o.info_bits;
                converged += o.converged as usize;
                iterations += o.iterations;
                seconds += s;
            }
            report.points.push(CodedPoint {
                record: BerRecord::new(
                    led,
                    (arch.hidden_units, arch.hidden_layers),
                    Some(code.label.clone()),
                    errors,
                    bits,
                    wall(config, seconds),
                ),
                blocks: per_point,
                converged_blocks: converged,
                mean_iterations: iterations as f64 / per_point as f64,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;

    fn quick() -> ExperimentConfig {
        let mut c = ExperimentConfig::desk();
        c.led_counts = vec![1, 64];
        c.hidden_units = vec![8];
        c.hidden_layers = vec![1];
        c.equalizer = Architecture::new(8, 1);
        c.training.sample_count = 400;
        c.training.epochs = 2;
        c.uncoded_bits = 2000;
        c
    }

    #[test]
    fn uncoded_bit_accounting() {
        let c = quick();
        let report = run_uncoded_sweep(&c).unwrap();
        assert!(report.failures.is_empty());
        assert_eq!(report.records.len(), 4);
        for r in &report.records {
            assert_eq!(r.bits_total % 9, 0);
            assert!(r.bits_total >= 2000);
            assert!(!r.coded);
            assert_eq!(r.wall_time_s, 0.0);
        }
        assert!(report.records[0].is_baseline());
        assert_eq!((report.records[1].n_u, report.records[1].n_h), (8, 1));
    }

    #[test]
    fn ideal_channel_baseline_is_error_free() {
        let mut c = quick();
        c.channel = ChannelParams::ideal();
        let report = run_uncoded_sweep(&c).unwrap();
        for r in report.records.iter().filter(|r| r.is_baseline()) {
            assert_eq!(r.bit_errors, 0);
        }
    }

    #[test]
    fn divergence_is_recorded_and_the_sweep_continues() {
        let mut c = quick();
        c.training.learning_rate = 1e200;
        c.training.optimizer = crate::equalizer::Optimizer::Sgd;
        let report = run_uncoded_sweep(&c).unwrap();
        assert_eq!(report.failures.len(), 2);
        assert!(report.failures[0].message.contains("diverged"));
        assert_eq!(report.records.len(), 2);
        assert!(report.records.iter().all(BerRecord::is_baseline));
    }

    #[test]
    fn block_indices_do_not_collide() {
        let mut seen = std::collections::HashSet::new();
        for ci in 0..11 {
            for led in [1, 4, 64] {
                for b in 0..3 {
                    assert!(seen.insert(block_index(ci, led, b)));
                }
            }
        }
        assert!(block_index(255, 64, (1 << 28) - 1) < 1 << 48);
    }
}
