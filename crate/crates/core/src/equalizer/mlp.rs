use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::colorspace::ChromaticityPoint;
use crate::constellation::SymbolBits;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            _ => Err(Error::Model(format!("unknown activation tag {tag}"))),
        }
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Multiplies `grad` in place by the derivative, given the activation output.
    fn backprop(self, grad: &mut Array2<f64>, output: &Array2<f64>) {
        match self {
            Activation::Relu => Zip::from(grad).and(output).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => Zip::from(grad).and(output).for_each(|g, &a| *g *= 1.0 - a * a),
        }
    }
}

/// Hidden layer shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden_units: usize,
    pub hidden_layers: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl Architecture {
    pub fn new(hidden_units: usize, hidden_layers: usize) -> Self {
        Self {
            hidden_units,
            hidden_layers,
            activation: Activation::Relu,
        }
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Self::new(256, 5)
    }
}

/// Affine map taking a bounding box onto `[-1, 1]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputNormalization {
    pub center: [f64; 2],
    pub half_range: [f64; 2],
}

impl Default for InputNormalization {
    fn default() -> Self {
        Self {
            center: [0.0; 2],
            half_range: [1.0; 2],
        }
    }
}

impl InputNormalization {
    pub fn from_bounding_box<'a>(points: impl IntoIterator<Item = &'a ChromaticityPoint>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for (d, v) in [p.x, p.y].into_iter().enumerate() {
                lo[d] = lo[d].min(v);
                hi[d] = hi[d].max(v);
            }
        }
        let mut out = Self::default();
        for d in 0..2 {
            if lo[d].is_finite() && hi[d].is_finite() {
                out.center[d] = 0.5 * (lo[d] + hi[d]);
                let half = 0.5 * (hi[d] - lo[d]);
                out.half_range[d] = if half > 0.0 { half } else { 1.0 };
            }
        }
        out
    }

    pub fn apply(&self, p: &ChromaticityPoint) -> [f64; 2] {
        [
            (p.x - self.center[0]) / self.half_range[0],
            (p.y - self.center[1]) / self.half_range[1],
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `inputs × outputs`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Per-layer parameter gradients, same shapes as the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn get(&self, index: usize) -> f64 {
        let (l, slot) = locate(&self.layers, index);
        match slot {
            Slot::Weight(i, j) => self.layers[l].weights[[i, j]],
            Slot::Bias(j) => self.layers[l].bias[j],
        }
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let (l, slot) = locate(&self.layers, index);
        match slot {
            Slot::Weight(i, j) => self.layers[l].weights[[i, j]] = value,
            Slot::Bias(j) => self.layers[l].bias[j] = value,
        }
    }
}

enum Slot {
    Weight(usize, usize),
    Bias(usize),
}

/// Flat parameter order: layer by layer, weights row-major then biases.
fn locate(layers: &[Dense], mut index: usize) -> (usize, Slot) {
    for (l, layer) in layers.iter().enumerate() {
        let nw = layer.weights.len();
        if index < nw {
            let cols = layer.weights.ncols();
            return (l, Slot::Weight(index / cols, index % cols));
        }
        index -= nw;
        if index < layer.bias.len() {
            return (l, Slot::Bias(index));
        }
        index -= layer.bias.len();
    }
    panic!("parameter index out of range");
}

/// Fully connected multi-label classifier: `(x, y)` in, one sigmoid per bit out.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    arch: Architecture,
    normalization: InputNormalization,
    layers: Vec<Dense>,
}

/// Activations kept from a forward pass for backpropagation.
pub(crate) struct Trace {
    /// Input followed by each hidden layer's activated output.
    pub activations: Vec<Array2<f64>>,
    /// Output logits.
    pub logits: Array2<f64>,
}

pub const INPUT_DIM: usize = 2;

impl MlpModel {
    /// All parameters zero.
    pub fn zeros(arch: Architecture, outputs: usize) -> Result<Self> {
        if arch.hidden_layers == 0 || arch.hidden_units == 0 || outputs == 0 {
            return Err(Error::Model(format!("degenerate architecture {arch:?} with {outputs} outputs")));
        }
        let mut layers = Vec::with_capacity(arch.hidden_layers + 1);
        let mut fan_in = INPUT_DIM;
        for _ in 0..arch.hidden_layers {
            layers.push(Dense::zeros(fan_in, arch.hidden_units));
            fan_in = arch.hidden_units;
        }
        layers.push(Dense::zeros(fan_in, outputs));
        Ok(Self {
            arch,
            normalization: InputNormalization::default(),
            layers,
        })
    }

    /// Weights uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, outputs: usize, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(arch, outputs)?;
        for layer in &mut model.layers {
            let bound = (6.0 / layer.weights.nrows() as f64).sqrt();
            layer.weights.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        Ok(model)
    }

    /// Assembles a model from explicit layers, checking that they chain.
    pub fn from_layers(arch: Architecture, normalization: InputNormalization, layers: Vec<Dense>) -> Result<Self> {
        if layers.len() != arch.hidden_layers + 1 {
            return Err(Error::Model(format!(
                "{} layers for {} hidden layers",
                layers.len(),
                arch.hidden_layers
            )));
        }
        let mut fan_in = INPUT_DIM;
        for (l, layer) in layers.iter().enumerate() {
            let hidden = l < arch.hidden_layers;
            if layer.weights.nrows() != fan_in
                || (hidden && layer.weights.ncols() != arch.hidden_units)
                || layer.bias.len() != layer.weights.ncols()
            {
                return Err(Error::Model(format!("layer {l} has shape {:?}", layer.weights.dim())));
            }
            if layer.weights.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Model(format!("layer {l} has non-finite parameters")));
            }
            fan_in = layer.weights.ncols();
        }
        Ok(Self {
            arch,
            normalization,
            layers,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn normalization(&self) -> &InputNormalization {
        &self.normalization
    }

    pub fn set_normalization(&mut self, normalization: InputNormalization) {
        self.normalization = normalization;
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().unwrap().bias.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn param(&self, index: usize) -> f64 {
        let (l, slot) = locate(&self.layers, index);
        match slot {
            Slot::Weight(i, j) => self.layers[l].weights[[i, j]],
            Slot::Bias(j) => self.layers[l].bias[j],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (l, slot) = locate(&self.layers, index);
        match slot {
            Slot::Weight(i, j) => self.layers[l].weights[[i, j]] = value,
            Slot::Bias(j) => self.layers[l].bias[j] = value,
        }
    }

    /// Normalized inputs as a `batch × 2` matrix.
    pub fn input_matrix(&self, points: &[ChromaticityPoint]) -> Array2<f64> {
        let mut x = Array2::zeros((points.len(), INPUT_DIM));
        for (mut row, p) in x.rows_mut().into_iter().zip(points) {
            let [a, b] = self.normalization.apply(p);
            row[0] = a;
            row[1] = b;
        }
        x
    }

    pub(crate) fn trace(&self, x: ArrayView2<f64>) -> Trace {
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(x.to_owned());
        let (last, hidden) = self.layers.split_last().unwrap();
        for layer in hidden {
            let mut z = activations.last().unwrap().dot(&layer.weights);
            z += &layer.bias;
            self.arch.activation.apply(&mut z);
            activations.push(z);
        }
        let mut logits = activations.last().unwrap().dot(&last.weights);
        logits += &last.bias;
        Trace { activations, logits }
    }

    /// Output logits for a batch of normalized inputs.
    pub fn logits(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.trace(x).logits
    }

    /// Posterior `P(bit_k = 1 | x, y)` for one point.
    pub fn forward(&self, p: &ChromaticityPoint) -> Result<Vec<f64>> {
        if !p.is_finite() {
            return Err(Error::Model(format!("non-finite input {p:?}")));
        }
        let x = self.input_matrix(std::slice::from_ref(p));
        Ok(self.logits(x.view()).row(0).iter().map(|&z| sigmoid(z)).collect())
    }

    /// Posteriors for a batch, one row per point.
    pub fn forward_batch(&self, points: &[ChromaticityPoint]) -> Result<Array2<f64>> {
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::Model(format!("non-finite input {p:?}")));
        }
        let mut out = Array2::zeros((points.len(), self.outputs()));
        const CHUNK: usize = 4096;
        for (i, chunk) in points.chunks(CHUNK).enumerate() {
            let x = self.input_matrix(chunk);
            let z = self.logits(x.view()).mapv(sigmoid);
            out.slice_mut(s![i * CHUNK..i * CHUNK + chunk.len(), ..]).assign(&z);
        }
        Ok(out)
    }

    /// Mean binary cross-entropy over every output of every sample.
    pub fn loss(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> f64 {
        mean_bce(&self.logits(x), targets)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> (f64, Gradients) {
        let trace = self.trace(x);
        let loss = mean_bce(&trace.logits, targets);
        let scale = 1.0 / trace.logits.len() as f64;
        let mut delta = trace.logits.mapv(sigmoid);
        Zip::from(&mut delta).and(targets).for_each(|d, &t| *d = (*d - t) * scale);

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let input = &trace.activations[l];
            let weights = input.t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut next = delta.dot(&self.layers[l].weights.t());
                self.arch.activation.backprop(&mut next, input);
                delta = next;
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }

    pub fn gradients(&self, points: &[ChromaticityPoint], labels: &[SymbolBits]) -> Gradients {
        let x = self.input_matrix(points);
        let t = targets(labels, self.outputs());
        self.loss_and_gradients(x.view(), t.view()).1
    }

    /// Sign pattern of every hidden unit, used to detect activation kinks.
    pub(crate) fn hidden_signs(&self, x: ArrayView2<f64>) -> Vec<bool> {
        let trace = self.trace(x);
        trace.activations[1..].iter().flat_map(|a| a.iter().map(|&v| v > 0.0).collect::<Vec<_>>()).collect()
    }
}

/// `labels.len() × width` matrix of 0/1 targets.
pub fn targets(labels: &[SymbolBits], width: usize) -> Array2<f64> {
    let mut t = Array2::zeros((labels.len(), width));
    for (mut row, bits) in t.rows_mut().into_iter().zip(labels) {
        assert_eq!(bits.len(), width, "label width mismatch");
        for (k, v) in row.iter_mut().enumerate() {
            *v = bits.bit(k) as f64;
        }
    }
    t
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z) - t z`, stable for any logit.
fn bce_with_logit(z: f64, t: f64) -> f64 {
    z.max(0.0) - t * z + (-z.abs()).exp().ln_1p()
}

fn mean_bce(logits: &Array2<f64>, targets: ArrayView2<f64>) -> f64 {
    let mut sum = 0.0;
    Zip::from(logits).and(targets).for_each(|&z, &t| sum += bce_with_logit(z, t));
    sum / logits.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_outputs_one_half() {
        let m = MlpModel::zeros(Architecture::new(16, 3), 9).unwrap();
        let out = m.forward(&ChromaticityPoint::new(0.3, 0.4)).unwrap();
        assert_eq!(out, vec![0.5; 9]);
    }

    #[test]
    fn hand_computed_forward() {
        // One hidden layer of two ReLU units, two outputs, identity normalization.
        let arch = Architecture::new(2, 1);
        let layers = vec![
            Dense {
                weights: array![[1.0, -2.0], [0.5, 1.0]],
                bias: array![0.1, -0.2],
            },
            Dense {
                weights: array![[1.5, -1.0], [0.25, 2.0]],
                bias: array![-0.3, 0.05],
            },
        ];
        let m = MlpModel::from_layers(arch, InputNormalization::default(), layers).unwrap();
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        for (x, y) in [(0.4, 0.2), (-0.3, 0.9)] {
            let h1 = (1.0 * x + 0.5 * y + 0.1f64).max(0.0);
            let h2 = (-2.0 * x + 1.0 * y - 0.2f64).max(0.0);
            let o1 = sig(1.5 * h1 + 0.25 * h2 - 0.3);
            let o2 = sig(-h1 + 2.0 * h2 + 0.05);
            let out = m.forward(&ChromaticityPoint::new(x, y)).unwrap();
            assert!((out[0] - o1).abs() < 1e-12 && (out[1] - o2).abs() < 1e-12);
        }
    }

    #[test]
    fn outputs_stay_inside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let m = MlpModel::init(Architecture::new(8, 2), 9, &mut rng).unwrap();
            let pts: Vec<_> = (0..100)
                .map(|_| ChromaticityPoint::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
                .collect();
            let out = m.forward_batch(&pts).unwrap();
            assert!(out.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn rejects_non_finite_input() {
        let m = MlpModel::zeros(Architecture::new(4, 1), 9).unwrap();
        assert!(m.forward(&ChromaticityPoint::new(f64::NAN, 0.0)).is_err());
        assert!(m.forward_batch(&[ChromaticityPoint::new(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn layer_chaining_is_checked() {
        let arch = Architecture::new(4, 2);
        let bad = vec![Dense::zeros(2, 4), Dense::zeros(3, 4), Dense::zeros(4, 9)];
        assert!(MlpModel::from_layers(arch, InputNormalization::default(), bad).is_err());
        let good = vec![Dense::zeros(2, 4), Dense::zeros(4, 4), Dense::zeros(4, 9)];
        assert!(MlpModel::from_layers(arch, InputNormalization::default(), good).is_ok());
    }

    #[test]
    fn bounding_box_normalization() {
        let pts = [ChromaticityPoint::new(0.1, 0.2), ChromaticityPoint::new(0.5, 1.0)];
        let n = InputNormalization::from_bounding_box(&pts);
        for (p, want) in pts.iter().zip([-1.0, 1.0]) {
            for v in n.apply(p) {
                assert!((v - want).abs() < 1e-12, "{v}");
            }
        }
    }

    #[test]
    fn stable_cross_entropy() {
        assert!((bce_with_logit(0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_with_logit(800.0, 1.0).abs() < 1e-300);
        assert!((bce_with_logit(-800.0, 1.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn flat_parameter_indexing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = MlpModel::init(Architecture::new(3, 2), 2, &mut rng).unwrap();
        assert_eq!(m.param_count(), 2 * 3 + 3 + 3 * 3 + 3 + 3 * 2 + 2);
        m.set_param(6, 42.0);
        assert_eq!(m.layers()[0].bias[0], 42.0);
        m.set_param(m.param_count() - 1, -1.0);
        assert_eq!(m.layers()[2].bias[1], -1.0);
        assert_eq!(m.param(6), 42.0);
    }
}
