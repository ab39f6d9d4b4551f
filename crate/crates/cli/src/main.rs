use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use occ_csk::constellation::CskConstellation;
use occ_csk::equalizer::{Architecture, MlpModel};
use occ_csk::harness::{
    calibrate_baseline_sigma, calibrate_coded_transition, configured_codes, emit_results, point_training_config,
    replay_frames, run_coded_sweep_with, run_uncoded_sweep, synthesize_frames, with_workers, Demodulator,
    ExperimentConfig, Link, ModelStore, Profile,
};
use occ_csk::ingest::{BayerPattern, RawFrame, RegionOfInterest};
use occ_csk::ldpc::CodeRate;
use occ_csk::rng::{stream, StreamDomain};

/// 512-CSK optical camera link simulator with a neural equalizer and LDPC decoding.
#[derive(Parser)]
#[command(name = "occ-csk", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; omitted fields take the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// desk (minutes) or paper (full protocol).
    #[arg(long, global = true)]
    profile: Option<Profile>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Record wall time in result files (makes them run-dependent).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Export the constellation table as CSV.
    Constellation,
    /// Train one equalizer and write the model file.
    Train {
        /// LED count to train at (default: the channel's).
        #[arg(long)]
        led_count: Option<u32>,
        /// Hidden units per layer (default: the equalizer's).
        #[arg(long)]
        units: Option<usize>,
        /// Hidden layers (default: the equalizer's).
        #[arg(long)]
        layers: Option<usize>,
        /// Model file path (default: <out>/model_led<L>_u<U>_h<H>.occm).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Uncoded BER sweep over LED count and architecture.
    Uncoded,
    /// LDPC-coded BER sweep over LED count and code rate.
    Coded {
        /// Use this model at every LED count instead of training.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run raw frames through the receive chain.
    Replay {
        /// Raw frame files.
        frames: Vec<PathBuf>,
        /// Region of interest as x0,y0,w,h (default: whole frame).
        #[arg(long)]
        roi: Option<RegionOfInterest>,
        /// Decide with this equalizer instead of nearest-neighbor hard decisions.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Generate this many frames from random symbols into <out>/frames first.
        #[arg(long)]
        synthesize: Option<usize>,
        /// Bayer pattern of synthesized frames.
        #[arg(long, default_value = "rggb")]
        pattern: BayerPattern,
    },
    /// Search for the noise level sigma0.
    Calibrate {
        /// Uncoded BER of nearest-neighbor decisions on the received constellation to hit.
        #[arg(long, default_value_t = 1e-2)]
        target_ber: f64,
        /// LED count to calibrate at (default: the channel's).
        #[arg(long)]
        led_count: Option<u32>,
        /// Bits per baseline probe.
        #[arg(long, default_value_t = 200_000)]
        bits: usize,
        /// Instead, find where the coded BER of this rate reaches 0 (trains per probe).
        #[arg(long)]
        coded_rate: Option<CodeRate>,
        /// Lower end of the coded search range.
        #[arg(long, default_value_t = 1e-3)]
        lo: f64,
        /// Upper end of the coded search range.
        #[arg(long, default_value_t = 3e-2)]
        hi: f64,
        /// Bisection steps of the coded search.
        #[arg(long, default_value_t = 6)]
        steps: usize,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_json_file(path, common.profile)
            .with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::for_profile(common.profile.unwrap_or_default()),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    if let Some(workers) = common.workers {
        config.workers = workers;
    }
    if common.timing {
        config.record_wall_time = true;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = load_config(&cli.common)?;
    let out = config.output.dir.clone();
    match cli.command {
        Command::Constellation => {
            let c = CskConstellation::from_spec(config.constellation)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("constellation.csv");
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            c.write_csv(BufWriter::new(file))?;
            println!(
                "{} symbols, {} levels per channel, minimum distance {:.6e} -> {}",
                c.order(),
                c.steps(),
                c.min_distance(),
                path.display()
            );
        }
        Command::Train {
            led_count,
            units,
            layers,
            model,
        } => {
            let led = led_count.unwrap_or(config.channel.led_count);
            let arch = Architecture {
                hidden_units: units.unwrap_or(config.equalizer.hidden_units),
                hidden_layers: layers.unwrap_or(config.equalizer.hidden_layers),
                activation: config.activation,
            };
            let training = point_training_config(&config, led, arch);
            println!(
                "training {}x{} at led_count {led}: {} samples, {} epochs, batch {}",
                arch.hidden_units, arch.hidden_layers, training.sample_count, training.epochs, training.batch_size
            );
            let store = ModelStore::new(&config);
            let ready = with_workers(config.workers, || store.get(led, arch))??;
            if let Some(report) = &ready.report {
                println!(
                    "best loss {:.6} at epoch {} ({:.1} s)",
                    report.best_loss, report.best_epoch, ready.train_seconds
                );
            }
            let path = model.unwrap_or_else(|| {
                out.join(format!("model_led{led}_u{}_h{}.occm", arch.hidden_units, arch.hidden_layers))
            });
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            ready.model.save(&path)?;
            println!("model -> {}", path.display());
        }
        Command::Uncoded => {
            let report = run_uncoded_sweep(&config)?;
            for f in &report.failures {
                eprintln!(
                    "led_count {} N_u {} N_h {}: {}",
                    f.led_count, f.arch.hidden_units, f.arch.hidden_layers, f.message
                );
            }
            for r in &report.records {
                let who = if r.is_baseline() {
                    "hard decision".to_string()
                } else {
                    format!("NN {}x{}", r.n_u, r.n_h)
                };
                println!("led_count {:>2}  {who:<14} BER {}", r.led_count, r.describe_ber());
            }
            write_records(&config, &report.records, "uncoded")?;
        }
        Command::Coded { model } => {
            let report = with_workers(config.workers, || -> Result<_> {
                let codes = configured_codes(&config)?;
                let store = ModelStore::new(&config);
                let mut run = config.clone();
                if let Some(path) = &model {
                    let m = MlpModel::load(path)?;
                    run.equalizer = m.architecture();
                    for &led in &config.led_counts {
                        store.insert(led, m.clone());
                    }
                }
                Ok(run_coded_sweep_with(&run, &codes, &store)?)
            })??;
            for f in &report.failures {
                eprintln!("led_count {}: {}", f.led_count, f.message);
            }
            for p in &report.points {
                let r = &p.record;
                println!(
                    "led_count {:>2}  rate {:<5} converged {}/{}  mean iterations {:>5.1}  BER {}",
                    r.led_count,
                    r.rate.as_deref().unwrap_or("-"),
                    p.converged_blocks,
                    p.blocks,
                    p.mean_iterations,
                    r.describe_ber()
                );
            }
            write_records(&config, &report.records(), "coded")?;
        }
        Command::Replay {
            mut frames,
            roi,
            model,
            synthesize,
            pattern,
        } => {
            let link = Link::from_config(&config, config.channel.led_count)?;
            let mut truth = None;
            if let Some(count) = synthesize {
                let mut rng = stream(config.seed, StreamDomain::Auxiliary, 1);
                let (symbols, _) = link.simulate(count, &mut rng)?;
                let mut rng = stream(config.seed, StreamDomain::Auxiliary, 2);
                let dir = out.join("frames");
                fs::create_dir_all(&dir)?;
                for (i, frame) in synthesize_frames(&link, &symbols, (64, 48), pattern, &mut rng)?
                    .iter()
                    .enumerate()
                {
                    let path = dir.join(format!("frame_{i:05}.occr"));
                    frame.write(&path)?;
                    frames.push(path);
                }
                truth = Some(symbols);
            }
            if frames.is_empty() {
                bail!("no frames given (pass files or --synthesize N)");
            }
            let raw = frames.iter().map(RawFrame::read).collect::<Result<Vec<_>, _>>()?;
            let demod = match model {
                Some(path) => Demodulator::Equalizer(Arc::new(MlpModel::load(path)?)),
                None => Demodulator::Hard(link.reference_points(config.baseline)?),
            };
            let replayed = replay_frames(&raw, roi, config.color_mapping, &demod)?;
            write_replay(&out.join("replay.csv"), &frames, &replayed, link.bits_per_symbol())?;
            if let Some(symbols) = truth {
                let wrong = symbols.iter().zip(&replayed).filter(|(s, r)| **s != r.symbol).count();
                println!("{} frames replayed, {wrong} symbol errors", replayed.len());
            } else {
                println!("{} frames replayed", replayed.len());
            }
            println!("decisions -> {}", out.join("replay.csv").display());
        }
        Command::Calibrate {
            target_ber,
            led_count,
            bits,
            coded_rate,
            lo,
            hi,
            steps,
        } => {
            let led = led_count.unwrap_or(config.channel.led_count);
            let cal = match coded_rate {
                Some(rate) => {
                    let mut c = config.clone();
                    c.code_rates = vec![rate];
                    c.code_file = None;
                    with_workers(config.workers, || calibrate_coded_transition(&c, led, (lo, hi), steps))??
                }
                None => calibrate_baseline_sigma(&config, led, target_ber, bits)?,
            };
            for p in &cal.probes {
                println!("sigma0 {:.6e}  BER {:.4e}", p.sigma0, p.ber);
            }
            println!("noise_sigma0 = {:.6e} (BER {:.4e} at led_count {led})", cal.sigma0, cal.ber);
        }
    }
    Ok(())
}

fn write_records(config: &ExperimentConfig, records: &[occ_csk::harness::BerRecord], stem: &str) -> Result<()> {
    if records.is_empty() {
        bail!("no grid point could be measured");
    }
    for path in emit_results(records, &config.output.dir, stem, &config.output.formats)? {
        println!("results -> {}", path.display());
    }
    Ok(())
}

fn write_replay(
    path: &Path,
    frames: &[PathBuf],
    replayed: &[occ_csk::harness::ReplayedSymbol],
    width: usize,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "frame,r,g,b,x,y,symbol,bits")?;
    for (f, r) in frames.iter().zip(replayed) {
        let [red, green, blue] = r.rgb.to_array();
        writeln!(
            w,
            "{},{red},{green},{blue},{},{},{},{:0width$b}",
            f.display(),
            r.point.x,
            r.point.y,
            r.symbol,
            r.symbol
        )?;
    }
    w.flush()?;
    Ok(())
}
