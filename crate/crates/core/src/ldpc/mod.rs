//! LDPC encoding and normalized min-sum decoding.
//!
//! Two text formats describe codes. Both accept `#` comments and blank lines.
//!
//! **Accumulator address tables** (DVB-S2 style, `data/dvbs2/*.txt`). The
//! first line is `n k q`. Each following line lists the parity addresses `x`
//! of one group of 360 information bits. Information bit `m = 360 g + j`
//! takes part in checks `(x + j q) mod (n - k)` for every address `x` on line
//! `g`. Parity bit `i` is then accumulated: check `i` also includes parity
//! columns `k + i` and, for `i > 0`, `k + i - 1`.
//!
//! **Adjacency lists** for small codes. The first line is `n m`, followed by
//! `m` lines of 0-based column indices, one line per check. The last `m`
//! columns are the parity bits.

mod code;
mod decoder;

pub use code::{CodeRate, LdpcCode, DVBS2_GROUP, DVBS2_NORMAL_LENGTH};
pub use decoder::{decode, DecodeResult, MinSumDecoder, DEFAULT_MAX_ITERATIONS, DEFAULT_NORMALIZATION};

use crate::error::{Error, Result};

/// `(bit errors, bits compared)`.
pub fn ber_count(sent: &[u8], decoded: &[u8]) -> Result<(usize, usize)> {
    if sent.len() != decoded.len() {
        return Err(Error::LengthMismatch {
            expected: sent.len(),
            actual: decoded.len(),
        });
    }
    let errors = sent.iter().zip(decoded).filter(|(a, b)| (*a ^ *b) & 1 != 0).count();
    Ok((errors, sent.len()))
}
