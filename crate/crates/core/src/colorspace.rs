//! Linear RGB to CIE 1931 coordinates.
//!
//! Two maps are provided. [`rgb_to_xy`] is the literal 2×3 projection the
//! receiver applies to raw sensor triples: it keeps the `X` and `Y` rows of the
//! linear-sRGB (D65) to XYZ matrix and returns them unnormalized. This is the
//! pipeline default. [`rgb_to_xy_chromaticity`] completes the tristimulus
//! vector with the `Z` row and projects onto the chromaticity plane
//! `(X, Y) / (X + Y + Z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `X`, `Y`, `Z` rows of the linear RGB to XYZ matrix. Only the first two
/// rows take part in [`rgb_to_xy`].
pub const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124, 0.3576, 0.1805],
    [0.2126, 0.7152, 0.0722],
    [0.0193, 0.1192, 0.9505],
];

/// Linear, normalized RGB intensity. Used for both the LED drive level and
/// the sensor reading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RgbIntensity {
    r: f64,
    g: f64,
    b: f64,
}

impl RgbIntensity {
    pub const BLACK: RgbIntensity = RgbIntensity { r: 0.0, g: 0.0, b: 0.0 };
    pub const RED: RgbIntensity = RgbIntensity { r: 1.0, g: 0.0, b: 0.0 };
    pub const GREEN: RgbIntensity = RgbIntensity { r: 0.0, g: 1.0, b: 0.0 };
    pub const BLUE: RgbIntensity = RgbIntensity { r: 0.0, g: 0.0, b: 1.0 };

    /// Rejects any channel outside `[0, 1]` (NaN included).
    pub fn new(r: f64, g: f64, b: f64) -> Result<Self> {
        for (name, v) in [("r", r), ("g", g), ("b", b)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    what: name,
                    value: v,
                    expected: "[0, 1]",
                });
            }
        }
        Ok(Self { r, g, b })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }
}

/// A point on the `(x, y)` plane fed to the demodulator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChromaticityPoint {
    pub x: f64,
    pub y: f64,
}

impl ChromaticityPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance_sq(&self, other: &ChromaticityPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &ChromaticityPoint) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// Literal 2×3 projection: `(X, Y)` tristimulus rows applied to `(R, G, B)`.
pub fn rgb_to_xy(rgb: RgbIntensity) -> ChromaticityPoint {
    let [row_x, row_y, _] = RGB_TO_XYZ;
    ChromaticityPoint {
        x: row_x[0] * rgb.r + row_x[1] * rgb.g + row_x[2] * rgb.b,
        y: row_y[0] * rgb.r + row_y[1] * rgb.g + row_y[2] * rgb.b,
    }
}

/// Full tristimulus `(X, Y, Z)`.
pub fn rgb_to_xyz(rgb: RgbIntensity) -> [f64; 3] {
    let v = rgb.to_array();
    RGB_TO_XYZ.map(|row| row[0] * v[0] + row[1] * v[1] + row[2] * v[2])
}

/// Normalized chromaticity `(X, Y) / (X + Y + Z)`. Undefined for black.
pub fn rgb_to_xy_chromaticity(rgb: RgbIntensity) -> Result<ChromaticityPoint> {
    let [x, y, z] = rgb_to_xyz(rgb);
    let sum = x + y + z;
    if sum <= 0.0 {
        return Err(Error::DegenerateChromaticity);
    }
    Ok(ChromaticityPoint {
        x: x / sum,
        y: y / sum,
    })
}

/// Which RGB to `(x, y)` map the receive chain applies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorMapping {
    /// [`rgb_to_xy`], the unnormalized projection.
    #[default]
    Tristimulus,
    /// [`rgb_to_xy_chromaticity`].
    Chromaticity,
}

impl ColorMapping {
    pub fn apply(self, rgb: RgbIntensity) -> Result<ChromaticityPoint> {
        match self {
            ColorMapping::Tristimulus => Ok(rgb_to_xy(rgb)),
            ColorMapping::Chromaticity => rgb_to_xy_chromaticity(rgb),
        }
    }
}
