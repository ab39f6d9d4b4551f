use serde::{Deserialize, Serialize};

use super::code::LdpcCode;
use crate::error::{Error, Result};

pub const DEFAULT_NORMALIZATION: f64 = 0.75;
pub const DEFAULT_MAX_ITERATIONS: usize = 50;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeResult {
    /// Hard decisions for all `n` bits.
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iterations_used: usize,
    k: usize,
}

impl DecodeResult {
    /// The first `k` decisions.
    pub fn info_bits(&self) -> &[u8] {
        &self.bits[..self.k]
    }
}

/// Normalized min-sum on a flooding schedule.
///
/// LLRs follow the `ln(P(0) / P(1))` convention, so a positive value decides 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinSumDecoder {
    pub normalization: f64,
    pub max_iterations: usize,
}

impl Default for MinSumDecoder {
    fn default() -> Self {
        Self {
            normalization: DEFAULT_NORMALIZATION,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl MinSumDecoder {
    pub fn new(max_iterations: usize) -> Self {
        Self {
            max_iterations,
            ..Self::default()
        }
    }

    pub fn decode(&self, code: &LdpcCode, llrs: &[f64]) -> Result<DecodeResult> {
        if llrs.len() != code.n() {
            return Err(Error::LengthMismatch {
                expected: code.n(),
                actual: llrs.len(),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("decoder needs at least one iteration".into()));
        }
        if let Some(l) = llrs.iter().find(|l| !l.is_finite()) {
            return Err(Error::Code(format!("non-finite channel LLR {l}")));
        }

        let row_ptr = code.row_ptr();
        let cols = code.cols();
        let mut check_to_var = vec![0.0f64; cols.len()];
        let mut var_to_check = vec![0.0f64; cols.len()];
        let mut total = llrs.to_vec();
        let mut next_total = vec![0.0f64; code.n()];
        let mut bits = vec![0u8; code.n()];

        for iteration in 1..=self.max_iterations {
            next_total.copy_from_slice(llrs);
            for r in 0..code.checks() {
                let edges = row_ptr[r]..row_ptr[r + 1];
                let (mut min1, mut min2) = (f64::INFINITY, f64::INFINITY);
                let mut min_edge = usize::MAX;
                let mut negative = false;
                for e in edges.clone() {
                    let m = total[cols[e] as usize] - check_to_var[e];
                    var_to_check[e] = m;
                    negative ^= m < 0.0;
                    let mag = m.abs();
                    if mag < min1 {
                        min2 = min1;
                        min1 = mag;
                        min_edge = e;
                    } else if mag < min2 {
                        min2 = mag;
                    }
                }
                for e in edges {
                    let mag = if e == min_edge { min2 } else { min1 };
                    let flip = negative ^ (var_to_check[e] < 0.0);
                    let msg = self.normalization * if flip { -mag } else { mag };
                    check_to_var[e] = msg;
                    next_total[cols[e] as usize] += msg;
                }
            }
            std::mem::swap(&mut total, &mut next_total);
            for (b, &t) in bits.iter_mut().zip(&total) {
                *b = (t < 0.0) as u8;
            }
            if code.is_codeword(&bits) {
                return Ok(DecodeResult {
                    bits,
                    converged: true,
                    iterations_used: iteration,
                    k: code.k(),
                });
            }
        }
        Ok(DecodeResult {
            bits,
            converged: false,
            iterations_used: self.max_iterations,
            k: code.k(),
        })
    }
}

/// Decodes with the default normalized min-sum settings.
pub fn decode(code: &LdpcCode, llrs: &[f64], max_iterations: usize) -> Result<DecodeResult> {
    MinSumDecoder::new(max_iterations).decode(code, llrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::CodeRate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const HAND_12_6: &str = include_str!("../../data/codes/hand_12_6.txt");

    fn strong(word: &[u8], l: f64) -> Vec<f64> {
        word.iter().map(|&b| if b == 0 { l } else { -l }).collect()
    }

    fn all_codewords(code: &LdpcCode) -> Vec<Vec<u8>> {
        (0..1usize << code.k())
            .map(|u| {
                let info: Vec<u8> = (0..code.k()).map(|i| (u >> i & 1) as u8).collect();
                code.encode(&info).unwrap()
            })
            .collect()
    }

    #[test]
    fn noiseless_input_is_a_fixed_point() {
        let code = LdpcCode::from_adjacency(HAND_12_6).unwrap();
        for w in all_codewords(&code) {
            let out = decode(&code, &strong(&w, 25.0), 50).unwrap();
            assert_eq!(out.bits, w);
            assert!(out.converged);
            assert_eq!(out.iterations_used, 1);
            assert_eq!(out.info_bits(), &w[..6]);
        }
    }

    #[test]
    fn single_sign_flip_matches_nearest_codeword() {
        // Oracle: exhaustive maximum-correlation search over all 64 codewords.
        let code = LdpcCode::from_adjacency(HAND_12_6).unwrap();
        let words = all_codewords(&code);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for w in words.iter().step_by(7) {
            for flip in 0..12 {
                let mut llr: Vec<f64> = strong(w, 1.0).iter().map(|l| l * rng.random_range(4.0..6.0)).collect();
                llr[flip] = -llr[flip];
                let ml = words
                    .iter()
                    .max_by(|a, b| {
                        let corr = |c: &Vec<u8>| c.iter().zip(&llr).map(|(&b, l)| if b == 0 { *l } else { -l }).sum::<f64>();
                        corr(a).total_cmp(&corr(b))
                    })
                    .unwrap();
                assert_eq!(ml, w);
                let out = decode(&code, &llr, 50).unwrap();
                assert_eq!(&out.bits, w, "flip {flip}");
            }
        }
    }

    #[test]
    fn converged_flag_is_truthful() {
        let code = LdpcCode::from_adjacency(HAND_12_6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let llr: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            let out = decode(&code, &llr, 10).unwrap();
            assert_eq!(out.converged, code.is_codeword(&out.bits));
        }
    }

    #[test]
    fn input_validation() {
        let code = LdpcCode::from_adjacency(HAND_12_6).unwrap();
        assert!(decode(&code, &[1.0; 11], 5).is_err());
        assert!(decode(&code, &[1.0; 12], 0).is_err());
        let mut llr = [1.0; 12];
        llr[3] = f64::NAN;
        assert!(decode(&code, &llr, 5).is_err());
    }

    #[test]
    fn long_code_fixed_point() {
        let code = LdpcCode::dvbs2(CodeRate::R1_2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let w = code.encode(&info).unwrap();
        let out = decode(&code, &strong(&w, 25.0), 50).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations_used, 1);
        assert_eq!(out.bits, w);
    }
}
