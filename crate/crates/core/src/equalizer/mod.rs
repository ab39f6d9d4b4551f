//! Multi-label neural equalizer.
//!
//! A fully connected network maps a received `(x, y)` point to one sigmoid per
//! symbol bit. Output `k` estimates `P(bit_k = 1 | x, y)`, and the bit's
//! log-likelihood ratio follows directly from it:
//!
//! ```text
//! LLR_k = ln((1 - p_k) / p_k)        positive means bit 0 is more likely
//! ```

mod gradcheck;
mod mlp;
mod persist;
mod train;

pub use gradcheck::{gradient_check, gradient_check_with, GradientCheckOptions};
pub use mlp::{sigmoid, targets, Activation, Architecture, Dense, Gradients, InputNormalization, MlpModel, INPUT_DIM};
pub use persist::{MODEL_MAGIC, MODEL_VERSION};
pub use train::{train, LearningRateSchedule, Optimizer, TrainedModel, TrainingConfig, TrainingReport};

/// Default LLR clip.
pub const L_MAX: f64 = 25.0;

/// Posteriors are clamped to `[POSTERIOR_EPS, 1 - POSTERIOR_EPS]` before the log.
pub const POSTERIOR_EPS: f64 = 1e-12;

/// Per-bit LLRs of one symbol, each within `±l_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrVector(Vec<f64>);

impl LlrVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Hard decisions: negative LLR means bit 1.
    pub fn hard_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&l| (l < 0.0) as u8).collect()
    }
}

pub fn llr_from_posterior(p: f64, l_max: f64) -> f64 {
    let p = p.clamp(POSTERIOR_EPS, 1.0 - POSTERIOR_EPS);
    ((1.0 - p) / p).ln().clamp(-l_max, l_max)
}

pub fn compute_llr(posteriors: &[f64], l_max: f64) -> LlrVector {
    LlrVector(posteriors.iter().map(|&p| llr_from_posterior(p, l_max)).collect())
}
