use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Information bits per accumulator address group in DVB-S2 tables.
pub const DVBS2_GROUP: usize = 360;
pub const DVBS2_NORMAL_LENGTH: usize = 64_800;

/// Largest parity part handled by the dense (inverse matrix) encoder.
const DENSE_ENCODER_LIMIT: usize = 8_192;

/// DVB-S2 normal-frame code rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodeRate {
    R1_4,
    R1_3,
    R2_5,
    R1_2,
    R3_5,
    R2_3,
    R3_4,
    R4_5,
    R5_6,
    R8_9,
    R9_10,
}

impl CodeRate {
    pub const ALL: [CodeRate; 11] = [
        CodeRate::R1_4,
        CodeRate::R1_3,
        CodeRate::R2_5,
        CodeRate::R1_2,
        CodeRate::R3_5,
        CodeRate::R2_3,
        CodeRate::R3_4,
        CodeRate::R4_5,
        CodeRate::R5_6,
        CodeRate::R8_9,
        CodeRate::R9_10,
    ];

    pub fn fraction(self) -> (usize, usize) {
        match self {
            CodeRate::R1_4 => (1, 4),
            CodeRate::R1_3 => (1, 3),
            CodeRate::R2_5 => (2, 5),
            CodeRate::R1_2 => (1, 2),
            CodeRate::R3_5 => (3, 5),
            CodeRate::R2_3 => (2, 3),
            CodeRate::R3_4 => (3, 4),
            CodeRate::R4_5 => (4, 5),
            CodeRate::R5_6 => (5, 6),
            CodeRate::R8_9 => (8, 9),
            CodeRate::R9_10 => (9, 10),
        }
    }

    pub fn value(self) -> f64 {
        let (a, b) = self.fraction();
        a as f64 / b as f64
    }

    /// Information length of the 64800-bit code.
    pub fn normal_k(self) -> usize {
        let (a, b) = self.fraction();
        DVBS2_NORMAL_LENGTH * a / b
    }

    /// Address table shipped with the crate.
    pub fn builtin_table(self) -> &'static str {
        match self {
            CodeRate::R1_4 => include_str!("../../data/dvbs2/normal_1_4.txt"),
            CodeRate::R1_3 => include_str!("../../data/dvbs2/normal_1_3.txt"),
            CodeRate::R2_5 => include_str!("../../data/dvbs2/normal_2_5.txt"),
            CodeRate::R1_2 => include_str!("../../data/dvbs2/normal_1_2.txt"),
            CodeRate::R3_5 => include_str!("../../data/dvbs2/normal_3_5.txt"),
            CodeRate::R2_3 => include_str!("../../data/dvbs2/normal_2_3.txt"),
            CodeRate::R3_4 => include_str!("../../data/dvbs2/normal_3_4.txt"),
            CodeRate::R4_5 => include_str!("../../data/dvbs2/normal_4_5.txt"),
            CodeRate::R5_6 => include_str!("../../data/dvbs2/normal_5_6.txt"),
            CodeRate::R8_9 => include_str!("../../data/dvbs2/normal_8_9.txt"),
            CodeRate::R9_10 => include_str!("../../data/dvbs2/normal_9_10.txt"),
        }
    }

    /// File name of the table under `data/dvbs2/`.
    pub fn table_file_name(self) -> String {
        let (a, b) = self.fraction();
        format!("normal_{a}_{b}.txt")
    }
}

impl fmt::Display for CodeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.fraction();
        write!(f, "{a}/{b}")
    }
}

impl FromStr for CodeRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        CodeRate::ALL
            .into_iter()
            .find(|r| r.to_string() == t)
            .ok_or_else(|| Error::UnknownRate(s.to_string()))
    }
}

impl Serialize for CodeRate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CodeRate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug)]
enum Encoder {
    /// Parity part is lower triangular with a unit diagonal: solve row by row.
    Triangular,
    /// Rows of the inverse of the parity part, as bitsets.
    Dense { inverse: Vec<Vec<u64>> },
}

/// Binary LDPC code with a systematic encoder. Codewords are laid out as
/// `k` information bits followed by `n - k` parity bits.
#[derive(Clone, Debug)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    encoder: Encoder,
}

impl LdpcCode {
    /// Builds a code from per-check column lists. The last `rows.len()`
    /// columns carry parity and must form an invertible submatrix.
    pub fn from_rows(n: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 || m >= n {
            return Err(Error::Code(format!("{m} checks for {n} columns")));
        }
        let k = n - m;
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut cols = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        let mut degree = vec![0u32; n];
        row_ptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable();
            if row.len() < 2 {
                return Err(Error::Code(format!("check {r} has fewer than two bits")));
            }
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Code(format!("check {r} lists a column twice")));
            }
            if let Some(&c) = row.last().filter(|&&c| c as usize >= n) {
                return Err(Error::Code(format!("check {r} references column {c} >= {n}")));
            }
            for &c in &row {
                degree[c as usize] += 1;
            }
            cols.extend(row);
            row_ptr.push(cols.len());
        }
        if let Some(c) = degree.iter().position(|&d| d == 0) {
            return Err(Error::Code(format!("column {c} is in no check")));
        }

        let mut code = Self {
            n,
            k,
            row_ptr,
            cols,
            encoder: Encoder::Triangular,
        };
        if !code.parity_is_triangular() {
            code.encoder = code.dense_encoder()?;
        }
        Ok(code)
    }

    /// Parses a DVB-S2 style accumulator address table (see the crate docs for the format).
    pub fn from_address_table(text: &str) -> Result<Self> {
        let mut lines = data_lines(text);
        let header = lines.next().ok_or_else(|| Error::Code("empty address table".into()))?;
        let [n, k, q] = parse_numbers::<3>(header.1, header.0)?;
        let m = n.checked_sub(k).filter(|&m| m > 0).ok_or_else(|| Error::Code(format!("k = {k} >= n = {n}")))?;
        if k % DVBS2_GROUP != 0 || m % DVBS2_GROUP != 0 || q != m / DVBS2_GROUP {
            return Err(Error::Code(format!(
                "n = {n}, k = {k}, q = {q} do not describe a {DVBS2_GROUP}-periodic table"
            )));
        }
        let groups: Vec<_> = lines.collect();
        if groups.len() != k / DVBS2_GROUP {
            return Err(Error::Code(format!(
                "{} address rows, expected {}",
                groups.len(),
                k / DVBS2_GROUP
            )));
        }

        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); m];
        for (g, (line_no, line)) in groups.into_iter().enumerate() {
            let addrs = parse_list(line, line_no)?;
            if addrs.is_empty() {
                return Err(Error::Code(format!("line {line_no}: empty address row")));
            }
            if let Some(&a) = addrs.iter().find(|&&a| a >= m) {
                return Err(Error::Code(format!("line {line_no}: address {a} >= {m}")));
            }
            for j in 0..DVBS2_GROUP {
                let col = (g * DVBS2_GROUP + j) as u32;
                for &x in &addrs {
                    rows[(x + j * q) % m].push(col);
                }
            }
        }
        for (r, row) in rows.iter_mut().enumerate() {
            if r > 0 {
                row.push((k + r - 1) as u32);
            }
            row.push((k + r) as u32);
        }
        Self::from_rows(n, rows)
    }

    /// Parses the small-code adjacency format: `n m`, then one line of
    /// 0-based column indices per check.
    pub fn from_adjacency(text: &str) -> Result<Self> {
        let mut lines = data_lines(text);
        let header = lines.next().ok_or_else(|| Error::Code("empty adjacency file".into()))?;
        let [n, m] = parse_numbers::<2>(header.1, header.0)?;
        let rows = lines
            .map(|(no, l)| parse_list(l, no).map(|v| v.into_iter().map(|c| c as u32).collect()))
            .collect::<Result<Vec<Vec<u32>>>>()?;
        if rows.len() != m {
            return Err(Error::Code(format!("{} check rows, header says {m}", rows.len())));
        }
        Self::from_rows(n, rows)
    }

    pub fn from_address_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_address_table(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn from_adjacency_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_adjacency(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// The 64800-bit DVB-S2 code at `rate`, from the bundled tables.
    pub fn dvbs2(rate: CodeRate) -> Result<Self> {
        let code = Self::from_address_table(rate.builtin_table())?;
        if code.n != DVBS2_NORMAL_LENGTH || code.k != rate.normal_k() {
            return Err(Error::Code(format!("table for rate {rate} has n = {}, k = {}", code.n, code.k)));
        }
        Ok(code)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn checks(&self) -> usize {
        self.n - self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn edges(&self) -> usize {
        self.cols.len()
    }

    /// Columns taking part in check `r`, ascending.
    pub fn row(&self, r: usize) -> &[u32] {
        &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub(crate) fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub(crate) fn cols(&self) -> &[u32] {
        &self.cols
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.checks()).map(|r| self.row(r))
    }

    /// Whether every check is satisfied by `bits`.
    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n && self.rows().all(|row| row.iter().fold(0u8, |acc, &c| acc ^ bits[c as usize]) == 0)
    }

    /// Number of unsatisfied checks.
    pub fn syndrome_weight(&self, bits: &[u8]) -> usize {
        self.rows()
            .filter(|row| row.iter().fold(0u8, |acc, &c| acc ^ bits[c as usize]) != 0)
            .count()
    }

    /// Systematic encoding: the codeword starts with `info`.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                actual: info.len(),
            });
        }
        let mut word = vec![0u8; self.n];
        word[..self.k].copy_from_slice(info);
        let k = self.k;
        match &self.encoder {
            Encoder::Triangular => {
                for r in 0..self.checks() {
                    let mut acc = 0u8;
                    for &c in self.row(r) {
                        let c = c as usize;
                        if c < k + r {
                            acc ^= word[c];
                        }
                    }
                    word[k + r] = acc & 1;
                }
            }
            Encoder::Dense { inverse } => {
                let m = self.checks();
                let words = m.div_ceil(64);
                let mut syndrome = vec![0u64; words];
                for r in 0..m {
                    let s = self.row(r).iter().filter(|&&c| (c as usize) < k).fold(0u8, |a, &c| a ^ info[c as usize]);
                    if s & 1 == 1 {
                        syndrome[r / 64] |= 1 << (r % 64);
                    }
                }
                for (i, inv_row) in inverse.iter().enumerate() {
                    let parity = inv_row.iter().zip(&syndrome).map(|(a, b)| (a & b).count_ones()).sum::<u32>() & 1;
                    word[k + i] = parity as u8;
                }
            }
        }
        Ok(word)
    }

    fn parity_is_triangular(&self) -> bool {
        (0..self.checks()).all(|r| {
            let diag = (self.k + r) as u32;
            let row = self.row(r);
            row.contains(&diag) && row.iter().all(|&c| c <= diag)
        })
    }

    fn dense_encoder(&self) -> Result<Encoder> {
        let m = self.checks();
        if m > DENSE_ENCODER_LIMIT {
            return Err(Error::Code(format!(
                "parity part of {m} checks is not lower triangular and too large to invert"
            )));
        }
        let words = m.div_ceil(64);
        // Augmented [P | I] with P the parity columns, eliminated to [I | P^-1].
        let mut p = vec![vec![0u64; words]; m];
        let mut inv = vec![vec![0u64; words]; m];
        for r in 0..m {
            for &c in self.row(r) {
                let c = c as usize;
                if c >= self.k {
                    let j = c - self.k;
                    p[r][j / 64] |= 1 << (j % 64);
                }
            }
            inv[r][r / 64] |= 1 << (r % 64);
        }
        let mut rank = 0;
        for col in 0..m {
            let bit = |row: &Vec<u64>| row[col / 64] >> (col % 64) & 1 == 1;
            let Some(pivot) = (rank..m).find(|&r| bit(&p[r])) else {
                continue;
            };
            p.swap(rank, pivot);
            inv.swap(rank, pivot);
            for r in 0..m {
                if r != rank && bit(&p[r]) {
                    let (src_p, src_i) = (p[rank].clone(), inv[rank].clone());
                    p[r].iter_mut().zip(&src_p).for_each(|(a, b)| *a ^= b);
                    inv[r].iter_mut().zip(&src_i).for_each(|(a, b)| *a ^= b);
                }
            }
            rank += 1;
        }
        if rank < m {
            return Err(Error::RankDeficient { rank, expected: m });
        }
        Ok(Encoder::Dense { inverse: inv })
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap().trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_list(line: &str, line_no: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Code(format!("line {line_no}: {t:?}: {e}"))))
        .collect()
}

fn parse_numbers<const N: usize>(line: &str, line_no: usize) -> Result<[usize; N]> {
    let v = parse_list(line, line_no)?;
    v.try_into()
        .map_err(|v: Vec<usize>| Error::Code(format!("line {line_no}: expected {N} numbers, found {}", v.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) const HAND_12_6: &str = include_str!("../../data/codes/hand_12_6.txt");

    fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn hand_code_loads() {
        let c = LdpcCode::from_adjacency(HAND_12_6).unwrap();
        assert_eq!((c.n(), c.k()), (12, 6));
        assert!(matches!(c.encoder, Encoder::Dense { .. }));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let u = random_bits(&mut rng, 6);
            let w = c.encode(&u).unwrap();
            assert_eq!(&w[..6], &u[..]);
            assert!(c.is_codeword(&w));
        }
    }

    #[test]
    fn rate_lengths() {
        assert_eq!(CodeRate::R1_2.normal_k(), 32_400);
        assert_eq!(CodeRate::R9_10.normal_k(), 58_320);
        assert_eq!(CodeRate::R1_4.normal_k(), 16_200);
        assert_eq!("3/5".parse::<CodeRate>().unwrap(), CodeRate::R3_5);
        assert!("7/8".parse::<CodeRate>().is_err());
        assert_eq!(serde_json::to_string(&CodeRate::R8_9).unwrap(), "\"8/9\"");
    }

    #[test]
    fn every_dvbs2_table_builds_and_encodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for rate in CodeRate::ALL {
            let c = LdpcCode::dvbs2(rate).unwrap();
            assert_eq!(c.n(), 64_800);
            assert_eq!(c.k(), rate.normal_k());
            assert!(matches!(c.encoder, Encoder::Triangular), "{rate}");
            assert_eq!(c.encode(&vec![0; c.k()]).unwrap(), vec![0; c.n()]);
            for _ in 0..3 {
                let w = c.encode(&random_bits(&mut rng, c.k())).unwrap();
                assert!(c.is_codeword(&w), "{rate}");
            }
        }
    }

    #[test]
    fn encoder_is_linear() {
        let c = LdpcCode::dvbs2(CodeRate::R3_4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_bits(&mut rng, c.k());
        let v = random_bits(&mut rng, c.k());
        let uv: Vec<u8> = u.iter().zip(&v).map(|(a, b)| a ^ b).collect();
        let (eu, ev, euv) = (c.encode(&u).unwrap(), c.encode(&v).unwrap(), c.encode(&uv).unwrap());
        let sum: Vec<u8> = eu.iter().zip(&ev).map(|(a, b)| a ^ b).collect();
        assert_eq!(sum, euv);
    }

    #[test]
    fn malformed_inputs() {
        assert!(LdpcCode::from_adjacency("4 2\n0 1\n2 9\n").is_err());
        assert!(LdpcCode::from_adjacency("4 2\n0 1\n").is_err());
        assert!(LdpcCode::from_adjacency("4 2\n0 1 2\n2\n").is_err());
        assert!(LdpcCode::from_adjacency("4 2\n0 2\n1 2\n").is_err(), "column 3 unused");
        // Parity columns 2 and 3 appear identically in both rows: singular.
        match LdpcCode::from_adjacency("4 2\n0 2 3\n1 2 3\n") {
            Err(Error::RankDeficient { rank: 1, expected: 2 }) => {}
            other => panic!("{other:?}"),
        }
        let table = "720 360 1\n0\n";
        assert!(LdpcCode::from_address_table(table).is_ok());
        assert!(LdpcCode::from_address_table("720 360 1\n360\n").is_err());
        assert!(LdpcCode::from_address_table("720 360 1\n").is_err());
        assert!(LdpcCode::from_address_table("720 360 2\n0\n").is_err());
        let c = LdpcCode::from_adjacency(HAND_12_6).unwrap();
        assert!(matches!(
            c.encode(&[0; 5]),
            Err(Error::LengthMismatch { expected: 6, actual: 5 })
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# tiny code\n4 2\n\n0 1 2  # first check\n1 3 2\n";
        let c = LdpcCode::from_adjacency(text).unwrap();
        assert_eq!(c.row(0), &[0, 1, 2]);
        assert_eq!(c.row(1), &[1, 2, 3]);
    }
}
