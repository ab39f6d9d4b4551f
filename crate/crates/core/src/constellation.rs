//! Triangular CSK constellation.
//!
//! Symbols sit on the barycentric lattice `{(i, j, k) : i + j + k = n - 1}`
//! spanned by the blue, red and green primaries. Row `r` of the lattice holds
//! the `r + 1` sites with `i = n - 1 - r`; rows are visited starting from the
//! pure blue vertex, and each row is swept from its red end to its green end.
//! Symbol indices are handed out in that order and the first `order` sites are
//! kept. For 512 symbols that is the 32-row lattice (528 sites) with its last
//! 16 sites dropped.
//!
//! Drive levels are quantized to `steps` uniform levels per channel. The
//! rounding is largest-remainder: each channel lands on the floor or ceiling
//! of its exact level and the three levels always add up to `steps - 1`. Every
//! symbol therefore has the same total drive, and its `(x, y)` point stays on
//! the gamut triangle instead of drifting off it by a rounding step.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::colorspace::{rgb_to_xy, ChromaticityPoint, RgbIntensity};
use crate::error::{Error, Result};

/// Symbol label, most significant bit first.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymbolBits {
    value: u32,
    width: u8,
}

impl SymbolBits {
    pub fn from_index(index: usize, width: usize) -> Self {
        assert!(width <= 31, "symbol width {width} too large");
        assert!(index < 1 << width, "index {index} does not fit {width} bits");
        Self {
            value: index as u32,
            width: width as u8,
        }
    }

    /// Builds a label from individual bits (MSB first); every element must be 0 or 1.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() || bits.len() > 31 {
            return Err(Error::Constellation(format!("symbol width {} unsupported", bits.len())));
        }
        let mut value = 0u32;
        for &b in bits {
            if b > 1 {
                return Err(Error::Constellation(format!("bit value {b} is not binary")));
            }
            value = (value << 1) | b as u32;
        }
        Ok(Self {
            value,
            width: bits.len() as u8,
        })
    }

    pub fn index(&self) -> usize {
        self.value as usize
    }

    pub fn len(&self) -> usize {
        self.width as usize
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0
    }

    /// Bit `k`, counting from the most significant.
    pub fn bit(&self, k: usize) -> u8 {
        debug_assert!(k < self.len());
        ((self.value >> (self.width as usize - 1 - k)) & 1) as u8
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len()).map(move |k| self.bit(k))
    }

    pub fn to_vec(&self) -> Vec<u8> {
        self.iter().collect()
    }
}

impl fmt::Debug for SymbolBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymbolBits({self})")
    }
}

impl fmt::Display for SymbolBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CskEntry {
    pub index: usize,
    pub bits: SymbolBits,
    /// Lattice coordinates in `(red, green, blue)` order; they sum to `rows - 1`.
    pub lattice: [u32; 3],
    /// Quantized drive levels in `(red, green, blue)` order; they sum to `steps - 1`.
    pub levels: [u32; 3],
    pub rgb: RgbIntensity,
    pub chroma: ChromaticityPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstellationSpec {
    pub order: usize,
    pub steps: usize,
}

impl Default for ConstellationSpec {
    fn default() -> Self {
        Self {
            order: 512,
            steps: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CskConstellation {
    order: usize,
    bits_per_symbol: usize,
    steps: usize,
    rows: usize,
    entries: Vec<CskEntry>,
}

/// Smallest `n` with `n (n + 1) / 2 >= order`.
pub fn lattice_rows(order: usize) -> usize {
    let mut n = 1;
    while n * (n + 1) / 2 < order {
        n += 1;
    }
    n
}

/// Largest-remainder apportionment of `levels` among lattice weights
/// `w / denom` (the weights sum to `denom`). Ties go to the lower channel.
fn apportion(weights: [u32; 3], denom: u32, levels: u32) -> [u32; 3] {
    let scaled = weights.map(|w| w as u64 * levels as u64);
    let mut out = scaled.map(|s| (s / denom as u64) as u32);
    let rem = scaled.map(|s| s % denom as u64);
    let deficit = levels - out.iter().sum::<u32>();
    let mut by_remainder = [0usize, 1, 2];
    by_remainder.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    for &c in by_remainder.iter().take(deficit as usize) {
        out[c] += 1;
    }
    out
}

impl CskConstellation {
    pub fn build(order: usize, steps: usize) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() {
            return Err(Error::Constellation(format!(
                "order {order} is not a power of two >= 4"
            )));
        }
        let rows = lattice_rows(order);
        if steps < rows {
            return Err(Error::Constellation(format!(
                "{steps} emission steps cannot resolve a {rows}-row lattice"
            )));
        }
        let bits_per_symbol = order.trailing_zeros() as usize;
        let denom = (rows - 1) as u32;
        let top = (steps - 1) as u32;

        let mut entries = Vec::with_capacity(order);
        'rows: for row in 0..rows as u32 {
            let blue = denom - row;
            for red in (0..=row).rev() {
                if entries.len() == order {
                    break 'rows;
                }
                let lattice = [red, row - red, blue];
                let levels = apportion(lattice, denom, top);
                let rgb = RgbIntensity::from_array(levels.map(|l| l as f64 / top as f64))?;
                let index = entries.len();
                entries.push(CskEntry {
                    index,
                    bits: SymbolBits::from_index(index, bits_per_symbol),
                    lattice,
                    levels,
                    rgb,
                    chroma: rgb_to_xy(rgb),
                });
            }
        }

        let mut drives = HashSet::with_capacity(order);
        let mut points = HashSet::with_capacity(order);
        for e in &entries {
            if !drives.insert(e.levels) || !points.insert((e.chroma.x.to_bits(), e.chroma.y.to_bits())) {
                return Err(Error::Constellation(format!(
                    "symbol {} collides with an earlier symbol after quantization to {steps} steps",
                    e.index
                )));
            }
        }

        Ok(Self {
            order,
            bits_per_symbol,
            steps,
            rows,
            entries,
        })
    }

    pub fn from_spec(spec: ConstellationSpec) -> Result<Self> {
        Self::build(spec.order, spec.steps)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of rows in the underlying triangular lattice.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn entries(&self) -> &[CskEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &CskEntry {
        &self.entries[index]
    }

    pub fn chroma_points(&self) -> Vec<ChromaticityPoint> {
        self.entries.iter().map(|e| e.chroma).collect()
    }

    /// Drive for a symbol label.
    ///
    /// # Panics
    ///
    /// If `bits` is not `bits_per_symbol` wide.
    pub fn modulate(&self, bits: SymbolBits) -> RgbIntensity {
        assert_eq!(bits.len(), self.bits_per_symbol, "symbol width mismatch");
        self.entries[bits.index()].rgb
    }

    /// Nearest-neighbour hard decision against the transmit constellation.
    pub fn hard_demodulate(&self, p: ChromaticityPoint) -> (usize, SymbolBits) {
        let idx = nearest_index(self.entries.iter().map(|e| &e.chroma), &p);
        (idx, self.entries[idx].bits)
    }

    /// Smallest pairwise distance between constellation points.
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (a, ea) in self.entries.iter().enumerate() {
            for eb in &self.entries[a + 1..] {
                best = best.min(ea.chroma.distance_sq(&eb.chroma));
            }
        }
        best.sqrt()
    }

    /// Writes `index,bits,r,g,b,x,y` rows for plotting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "bits", "r", "g", "b", "x", "y"])?;
        for e in &self.entries {
            w.write_record([
                e.index.to_string(),
                e.bits.to_string(),
                e.rgb.r().to_string(),
                e.rgb.g().to_string(),
                e.rgb.b().to_string(),
                e.chroma.x.to_string(),
                e.chroma.y.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<constellation csv>", e))?;
        Ok(())
    }
}

/// Index of the reference point closest to `p`; the lowest index wins ties.
pub fn nearest_index<'a, I>(reference: I, p: &ChromaticityPoint) -> usize
where
    I: IntoIterator<Item = &'a ChromaticityPoint>,
{
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, q) in reference.into_iter().enumerate() {
        let d = q.distance_sq(p);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}
