//! Backpropagation against central finite differences.

use rand::seq::index::sample;

use super::mlp::{targets, Gradients, MlpModel};
use crate::colorspace::ChromaticityPoint;
use crate::constellation::SymbolBits;
use crate::rng::{stream, StreamDomain};

#[derive(Clone, Debug)]
pub struct GradientCheckOptions {
    pub step: f64,
    /// Parameters drawn from each weight matrix and each bias vector.
    pub per_tensor: usize,
    /// Extra flat parameter indices that are always checked.
    pub include: Vec<usize>,
    /// Relative errors are taken against `max(|analytic|, |numeric|, floor)`.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradientCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-6,
            per_tensor: 24,
            include: Vec::new(),
            floor: 1e-5,
            seed: 0,
        }
    }
}

/// Maximum relative error between backpropagated gradients and central
/// differences of the loss on `batch`.
pub fn gradient_check(model: &MlpModel, batch: &[(ChromaticityPoint, SymbolBits)]) -> f64 {
    let points: Vec<_> = batch.iter().map(|(p, _)| *p).collect();
    let labels: Vec<_> = batch.iter().map(|(_, b)| *b).collect();
    let grads = model.gradients(&points, &labels);
    gradient_check_with(model, batch, &grads, &GradientCheckOptions::default())
}

/// Compares an arbitrary gradient against finite differences. Parameters whose
/// perturbation flips a hidden unit across an activation kink are skipped,
/// since the loss is not differentiable there.
pub fn gradient_check_with(
    model: &MlpModel,
    batch: &[(ChromaticityPoint, SymbolBits)],
    analytic: &Gradients,
    opts: &GradientCheckOptions,
) -> f64 {
    let points: Vec<_> = batch.iter().map(|(p, _)| *p).collect();
    let labels: Vec<_> = batch.iter().map(|(_, b)| *b).collect();
    let x = model.input_matrix(&points);
    let t = targets(&labels, model.outputs());
    let base_signs = model.hidden_signs(x.view());

    let mut rng = stream(opts.seed, StreamDomain::Auxiliary, 0);
    let mut indices = opts.include.clone();
    let mut offset = 0;
    for layer in model.layers() {
        for len in [layer.weights.len(), layer.bias.len()] {
            let take = opts.per_tensor.min(len);
            indices.extend(sample(&mut rng, len, take).into_iter().map(|i| offset + i));
            offset += len;
        }
    }

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for &i in &indices {
        let original = model.param(i);
        probe.set_param(i, original + opts.step);
        let plus = probe.loss(x.view(), t.view());
        let kink = probe.hidden_signs(x.view()) != base_signs;
        probe.set_param(i, original - opts.step);
        let minus = probe.loss(x.view(), t.view());
        let kink = kink || probe.hidden_signs(x.view()) != base_signs;
        probe.set_param(i, original);
        if kink {
            continue;
        }
        let numeric = (plus - minus) / (2.0 * opts.step);
        let a = analytic.get(i);
        let denom = a.abs().max(numeric.abs()).max(opts.floor);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equalizer::mlp::{Activation, Architecture};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(n: usize, seed: u64) -> Vec<(ChromaticityPoint, SymbolBits)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let p = ChromaticityPoint::new(rng.random_range(0.1..0.5), rng.random_range(0.05..0.7));
                (p, SymbolBits::from_index(rng.random_range(0..512), 9))
            })
            .collect()
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for layers in 1..=6 {
            for activation in [Activation::Relu, Activation::Tanh] {
                let arch = Architecture {
                    hidden_units: 12,
                    hidden_layers: layers,
                    activation,
                };
                let m = MlpModel::init(arch, 9, &mut rng).unwrap();
                let err = gradient_check(&m, &batch(32, layers as u64));
                assert!(err < 1e-4, "{layers} layers {activation:?}: {err}");
            }
        }
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = MlpModel::init(Architecture::new(8, 2), 9, &mut rng).unwrap();
        let data = batch(16, 1);
        let points: Vec<_> = data.iter().map(|(p, _)| *p).collect();
        let labels: Vec<_> = data.iter().map(|(_, b)| *b).collect();
        let mut grads = m.gradients(&points, &labels);
        // Negate the gradient of the first output-layer weight with a non-negligible gradient.
        let start = m.param_count() - 9 - 8 * 9;
        let victim = (start..m.param_count() - 9).find(|&i| grads.get(i).abs() > 1e-3).unwrap();
        grads.set(victim, -grads.get(victim));
        let opts = GradientCheckOptions {
            include: vec![victim],
            ..GradientCheckOptions::default()
        };
        let err = gradient_check_with(&m, &data, &grads, &opts);
        assert!(err > 1e-2, "{err}");
    }

    #[test]
    fn unperturbed_loss_has_zero_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = MlpModel::init(Architecture::new(8, 2), 9, &mut rng).unwrap();
        let data = batch(8, 2);
        let points: Vec<_> = data.iter().map(|(p, _)| *p).collect();
        let labels: Vec<_> = data.iter().map(|(_, b)| *b).collect();
        let x = m.input_matrix(&points);
        let t = targets(&labels, 9);
        let opts = GradientCheckOptions {
            step: 0.0,
            ..Default::default()
        };
        // Zero step: both evaluations coincide, so the difference quotient is 0/0; check the numerator.
        let mut probe = m.clone();
        probe.set_param(0, m.param(0) + opts.step);
        assert_eq!(probe.loss(x.view(), t.view()) - m.loss(x.view(), t.view()), 0.0);
    }
}
