use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::OutputFormat;
use crate::error::{Error, Result};

/// One measured grid point. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub led_count: u32,
    /// Hidden units; 0 for the hard-decision baseline.
    #[serde(rename = "N_u")]
    pub n_u: usize,
    /// Hidden layers; 0 for the hard-decision baseline.
    #[serde(rename = "N_h")]
    pub n_h: usize,
    /// Code rate as `k/n`; empty for uncoded points.
    pub rate: Option<String>,
    pub coded: bool,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    pub wall_time_s: f64,
}

impl BerRecord {
    pub fn new(
        led_count: u32,
        (n_u, n_h): (usize, usize),
        rate: Option<String>,
        bit_errors: u64,
        bits_total: u64,
        wall_time_s: f64,
    ) -> Self {
        assert!(bits_total > 0, "a record needs at least one measured bit");
        Self {
            led_count,
            n_u,
            n_h,
            coded: rate.is_some(),
            rate,
            bit_errors,
            bits_total,
            ber: bit_errors as f64 / bits_total as f64,
            wall_time_s,
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.n_u == 0 && self.n_h == 0
    }

    /// Binomial standard error of `ber`.
    pub fn standard_error(&self) -> f64 {
        (self.ber * (1.0 - self.ber) / self.bits_total as f64).sqrt()
    }

    /// Human-readable BER; a zero count is reported as a bound.
    pub fn describe_ber(&self) -> String {
        if self.bit_errors == 0 {
            format!("0 (no errors in {} bits, BER < {:.1e})", self.bits_total, 1.0 / self.bits_total as f64)
        } else {
            format!("{:.3e} ({} / {})", self.ber, self.bit_errors, self.bits_total)
        }
    }
}

pub fn write_csv<W: Write>(records: &[BerRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<BerRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn to_json(records: &[BerRecord]) -> Result<String> {
    Ok(serde_json::to_string_pretty(records)?)
}

pub fn from_json(text: &str) -> Result<Vec<BerRecord>> {
    Ok(serde_json::from_str(text)?)
}

/// Writes `<dir>/<stem>.csv` and/or `<dir>/<stem>.json` and returns the paths.
pub fn emit_results(records: &[BerRecord], dir: &Path, stem: &str, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Config("no records to write".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for format in formats {
        let (path, bytes) = match format {
            OutputFormat::Csv => {
                let mut buf = Vec::new();
                write_csv(records, &mut buf)?;
                (dir.join(format!("{stem}.csv")), buf)
            }
            OutputFormat::Json => (dir.join(format!("{stem}.json")), (to_json(records)? + "\n").into_bytes()),
        };
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> BerRecord {
        BerRecord::new(25, (256, 5), Some("1/2".into()), 3, 97_200, 1.25)
    }

    #[test]
    fn single_record_csv() {
        let mut buf = Vec::new();
        write_csv(&[sample()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "led_count,N_u,N_h,rate,coded,bit_errors,bits_total,ber,wall_time_s");
        assert_eq!(lines[1], format!("25,256,5,1/2,true,3,97200,{},1.25", 3.0 / 97_200.0));
    }

    #[test]
    fn uncoded_rate_is_empty() {
        let r = BerRecord::new(4, (0, 0), None, 0, 9, 0.0);
        assert!(!r.coded && r.is_baseline());
        let mut buf = Vec::new();
        write_csv(std::slice::from_ref(&r), &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().ends_with("4,0,0,,false,0,9,0.0,0.0\n"));
        assert_eq!(read_csv(&buf[..]).unwrap(), vec![r]);
        assert!(sample().describe_ber().contains("3 / 97200"));
        assert!(BerRecord::new(1, (1, 1), None, 0, 900, 0.0).describe_ber().contains("no errors in 900 bits"));
    }

    #[test]
    fn emit_writes_requested_formats() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_results(&[sample()], dir.path(), "run", &[OutputFormat::Csv, OutputFormat::Json]).unwrap();
        assert_eq!(paths.len(), 2);
        let json = fs::read_to_string(&paths[1]).unwrap();
        assert_eq!(from_json(&json).unwrap(), vec![sample()]);
        assert!(emit_results(&[], dir.path(), "run", &[OutputFormat::Csv]).is_err());
        let blocked = dir.path().join("file");
        fs::write(&blocked, b"x").unwrap();
        assert!(emit_results(&[sample()], &blocked, "run", &[OutputFormat::Csv]).is_err());
    }

    proptest! {
        #[test]
        fn csv_then_json_is_lossless(
            led in 1u32..65, nu in 0usize..1024, nh in 0usize..8,
            errors in 0u64..1_000_000, extra in 1u64..1_000_000_000, wall in 0.0f64..1e6,
            coded in any::<bool>(),
        ) {
            let rate = coded.then(|| "9/10".to_string());
            let rec = BerRecord::new(led, (nu, nh), rate, errors, errors + extra, wall);
            let mut buf = Vec::new();
            write_csv(std::slice::from_ref(&rec), &mut buf).unwrap();
            let from_csv = read_csv(&buf[..]).unwrap();
            let back = from_json(&to_json(&from_csv).unwrap()).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(back[0].ber.to_bits(), rec.ber.to_bits());
            prop_assert_eq!(back[0].wall_time_s.to_bits(), rec.wall_time_s.to_bits());
            prop_assert_eq!(&back[0], &rec);
        }
    }
}
