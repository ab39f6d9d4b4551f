//! Model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                                                   |
//! |--------|------|---------------------------------------------------------|
//! | 0      | 4    | magic `b"OCCM"`                                         |
//! | 4      | 2    | version `u16`, currently 1                              |
//! | 6      | 1    | hidden activation tag: 0 ReLU, 1 tanh                   |
//! | 7      | 1    | reserved, zero                                          |
//! | 8      | 4    | hidden layers `N_h`, `u32`                              |
//! | 12     | 4    | hidden units `N_u`, `u32`                               |
//! | 16     | 4    | input width `u32` (always 2)                            |
//! | 20     | 4    | output width `u32` (bits per symbol)                    |
//! | 24     | 32   | normalization: x center, x half range, y center, y half range, `f64` |
//! | 56     | ...  | per layer: weights row-major (`inputs × outputs`), then biases, `f64` |

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Activation, Architecture, Dense, InputNormalization, MlpModel, INPUT_DIM};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"OCCM";
pub const MODEL_VERSION: u16 = 1;
const HEADER_LEN: usize = 56;

impl MlpModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = self.architecture();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.param_count());
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.push(arch.activation.tag());
        out.push(0);
        for v in [arch.hidden_layers, arch.hidden_units, INPUT_DIM, self.outputs()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        let n = self.normalization();
        for v in [n.center[0], n.half_range[0], n.center[1], n.half_range[1]] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for layer in self.layers() {
            for v in layer.weights.iter().chain(layer.bias.iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || bytes[..4] != MODEL_MAGIC {
            return Err(Error::Model("not a model file".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported model version {version}")));
        }
        let activation = Activation::from_tag(bytes[6])?;
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let float = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let (hidden_layers, hidden_units, inputs, outputs) = (word(8), word(12), word(16), word(20));
        if inputs != INPUT_DIM || hidden_layers == 0 || hidden_units == 0 || outputs == 0 {
            return Err(Error::Model(format!(
                "unsupported shape: {inputs} inputs, {hidden_layers}x{hidden_units} hidden, {outputs} outputs"
            )));
        }
        let normalization = InputNormalization {
            center: [float(24), float(40)],
            half_range: [float(32), float(48)],
        };

        let mut shapes = Vec::with_capacity(hidden_layers + 1);
        let mut fan_in = INPUT_DIM;
        for _ in 0..hidden_layers {
            shapes.push((fan_in, hidden_units));
            fan_in = hidden_units;
        }
        shapes.push((fan_in, outputs));
        let count: usize = shapes.iter().map(|(i, o)| i * o + o).sum();
        if bytes.len() != HEADER_LEN + 8 * count {
            return Err(Error::Model(format!(
                "expected {} parameter bytes, found {}",
                8 * count,
                bytes.len() - HEADER_LEN
            )));
        }

        let mut at = HEADER_LEN;
        let mut take = |n: usize| {
            let v: Vec<f64> = (0..n).map(|i| float(at + 8 * i)).collect();
            at += 8 * n;
            v
        };
        let layers = shapes
            .into_iter()
            .map(|(i, o)| Dense {
                weights: Array2::from_shape_vec((i, o), take(i * o)).expect("shape matches length"),
                bias: Array1::from_vec(take(o)),
            })
            .collect();
        let arch = Architecture {
            hidden_units,
            hidden_layers,
            activation,
        };
        MlpModel::from_layers(arch, normalization, layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn save_load_is_bit_exact(seed in any::<u64>(), units in 1usize..6, layers in 1usize..4, outputs in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = MlpModel::init(Architecture::new(units, layers), outputs, &mut rng).unwrap();
            m.set_normalization(InputNormalization { center: [0.3, 0.41], half_range: [0.12, 0.33] });
            let bytes = m.to_bytes();
            prop_assert_eq!(bytes.len(), 56 + 8 * m.param_count());
            let back = MlpModel::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn header_layout() {
        let m = MlpModel::zeros(Architecture::new(3, 2), 9).unwrap();
        let b = m.to_bytes();
        assert_eq!(&b[..8], b"OCCM\x01\x00\x00\x00");
        assert_eq!(&b[8..24], &[2, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0, 9, 0, 0, 0]);
        assert_eq!(f64::from_le_bytes(b[32..40].try_into().unwrap()), 1.0);
    }

    #[test]
    fn truncated_or_foreign_files_fail() {
        let m = MlpModel::zeros(Architecture::new(3, 2), 9).unwrap();
        let b = m.to_bytes();
        assert!(MlpModel::from_bytes(&b[..b.len() - 8]).is_err());
        assert!(MlpModel::from_bytes(b"OCCR\x01\x00").is_err());
        let mut wrong = b.clone();
        wrong[6] = 7;
        assert!(MlpModel::from_bytes(&wrong).is_err());
    }
}
