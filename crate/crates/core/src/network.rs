//! Fully connected feedforward networks with straight-through backprop.
//!
//! Each layer computes `z = a·W + b` and `a' = f(z)` with `W` stored as
//! `input_dim × output_dim`. The trace keeps every pre-activation so the
//! backward pass can evaluate the derivative of the underlying smooth
//! function at `z`; discretized units therefore receive `tanh'(z)` rather
//! than the zero-almost-everywhere derivative of their step output.

use std::fmt;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::activations::ActivationKind;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerActivation {
    Linear,
    Unit(ActivationKind),
    /// Row-wise softmax; only valid on the output layer with cross-entropy.
    Softmax,
}

impl fmt::Display for LayerActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear => f.write_str("linear"),
            Self::Softmax => f.write_str("softmax"),
            Self::Unit(kind) => kind.fmt(f),
        }
    }
}

impl From<ActivationKind> for LayerActivation {
    fn from(kind: ActivationKind) -> Self {
        Self::Unit(kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: LayerActivation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    /// Unaveraged sum of squared errors.
    Sse,
    /// Mean over rows of the softmax cross-entropy.
    SoftmaxCrossEntropy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
    loss: Loss,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>, loss: Loss) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.input_dim == 0 || layer.output_dim == 0 {
                return Err(Error::config(format!("layer {i} has a zero dimension")));
            }
            if i + 1 < layers.len() && layer.activation == LayerActivation::Softmax {
                return Err(Error::config("softmax is only allowed on the output layer"));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim != pair[1].input_dim {
                return Err(Error::config(format!(
                    "layer {i} outputs {} units but layer {} expects {}",
                    pair[0].output_dim,
                    i + 1,
                    pair[1].input_dim
                )));
            }
        }
        let last = layers[layers.len() - 1].activation;
        match (loss, last) {
            (Loss::SoftmaxCrossEntropy, LayerActivation::Softmax) => {}
            (Loss::SoftmaxCrossEntropy, _) => {
                return Err(Error::config("cross-entropy loss requires a softmax output layer"))
            }
            (Loss::Sse, LayerActivation::Softmax) => {
                return Err(Error::config("softmax output layer requires cross-entropy loss"))
            }
            (Loss::Sse, _) => {}
        }
        Ok(Self { layers, loss })
    }

    /// `input → hidden[0] → … → hidden[n-1] → output`, with one activation
    /// shared by all hidden layers.
    pub fn mlp(
        input_dim: usize,
        hidden: &[usize],
        hidden_activation: ActivationKind,
        output_dim: usize,
        output_activation: LayerActivation,
        loss: Loss,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &width in hidden {
            layers.push(LayerSpec { input_dim: prev, output_dim: width, activation: hidden_activation.into() });
            prev = width;
        }
        layers.push(LayerSpec { input_dim: prev, output_dim, activation: output_activation });
        Self::new(layers, loss)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weights: Matrix<T>,
    pub bias: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    layers: Vec<Dense<T>>,
}

/// Per-layer pre- and post-activations for one batch.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub input: Matrix<T>,
    pub preactivations: Vec<Matrix<T>>,
    pub outputs: Vec<Matrix<T>>,
    /// Backward derivative of each unit layer at its pre-activations; `None`
    /// for linear and softmax layers.
    pub derivatives: Vec<Option<Matrix<T>>>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.outputs.last().expect("trace has at least one layer")
    }

    /// Input fed to layer `i`.
    pub fn layer_input(&self, i: usize) -> &Matrix<T> {
        if i == 0 {
            &self.input
        } else {
            &self.outputs[i - 1]
        }
    }

    /// Post-activations of every layer except the output layer.
    pub fn hidden_outputs(&self) -> &[Matrix<T>] {
        &self.outputs[..self.outputs.len() - 1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Matrix<T>>,
}

impl<T: Real> Gradients<T> {
    /// Gradients in the same order as [`Network::parameters_mut`].
    pub fn tensors(&self) -> Vec<&Matrix<T>> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|m| m.is_finite())
    }
}

impl<T: Real> Network<T> {
    /// Glorot-uniform weights, zero biases; deterministic in `seed`.
    pub fn init(spec: NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layers
            .iter()
            .map(|l| {
                let limit = (6.0 / (l.input_dim + l.output_dim) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                let weights = Matrix::from_fn(l.input_dim, l.output_dim, |_, _| T::lit(dist.sample(&mut rng)));
                Dense { weights, bias: Matrix::zeros(1, l.output_dim) }
            })
            .collect();
        Self { spec, layers }
    }

    /// Assembles a network from explicit parameters, checking shapes.
    pub fn from_parts(spec: NetworkSpec, layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.len() != spec.layers.len() {
            return Err(Error::config(format!(
                "{} parameter sets for {} layers",
                layers.len(),
                spec.layers.len()
            )));
        }
        for (l, d) in spec.layers.iter().zip(&layers) {
            if d.weights.shape() != (l.input_dim, l.output_dim) {
                return Err(Error::Shape {
                    op: "from_parts weights",
                    left: (l.input_dim, l.output_dim),
                    right: d.weights.shape(),
                });
            }
            if d.bias.shape() != (1, l.output_dim) {
                return Err(Error::Shape { op: "from_parts bias", left: (1, l.output_dim), right: d.bias.shape() });
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    /// Parameters ordered `w0, b0, w1, b1, …`.
    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix<T>> {
        self.layers.iter_mut().flat_map(|d| [&mut d.weights, &mut d.bias]).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|d| d.weights.as_slice().len() + d.bias.as_slice().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|d| d.weights.is_finite() && d.bias.is_finite())
    }

    pub fn forward(&self, batch: &Matrix<T>) -> Result<ForwardTrace<T>> {
        self.check_input(batch)?;
        let mut preactivations = Vec::with_capacity(self.layers.len());
        let mut outputs: Vec<Matrix<T>> = Vec::with_capacity(self.layers.len());
        let mut derivatives = Vec::with_capacity(self.layers.len());
        for (spec, dense) in self.spec.layers.iter().zip(&self.layers) {
            let input = outputs.last().unwrap_or(batch);
            let z = input.matmul(&dense.weights)?.add_row_broadcast(&dense.bias)?;
            let (a, d) = match spec.activation {
                LayerActivation::Unit(kind) => {
                    let (a, d) = crate::activations::apply_forward_with_derivative(kind, &z)?;
                    (a, Some(d))
                }
                other => (activate(other, &z)?, None),
            };
            preactivations.push(z);
            outputs.push(a);
            derivatives.push(d);
        }
        Ok(ForwardTrace { input: batch.clone(), preactivations, outputs, derivatives })
    }

    /// Network output without recording a trace.
    pub fn predict(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(batch)?;
        let mut current: Option<Matrix<T>> = None;
        for (spec, dense) in self.spec.layers.iter().zip(&self.layers) {
            let input = current.as_ref().unwrap_or(batch);
            let z = input.matmul(&dense.weights)?.add_row_broadcast(&dense.bias)?;
            current = Some(activate(spec.activation, &z)?);
        }
        Ok(current.expect("network has at least one layer"))
    }

    fn check_input(&self, batch: &Matrix<T>) -> Result<()> {
        if batch.cols() != self.spec.input_dim() {
            return Err(Error::Shape {
                op: "forward",
                left: batch.shape(),
                right: (batch.rows(), self.spec.input_dim()),
            });
        }
        Ok(())
    }

    /// Loss of the traced batch against `targets`.
    pub fn loss(&self, trace: &ForwardTrace<T>, targets: &Matrix<T>) -> Result<T> {
        match self.spec.loss {
            Loss::Sse => loss_sse(trace.output(), targets),
            Loss::SoftmaxCrossEntropy => {
                loss_softmax_ce(trace.preactivations.last().expect("non-empty"), targets)
            }
        }
    }

    /// Gradients of the loss with respect to every weight and bias.
    pub fn backward(&self, trace: &ForwardTrace<T>, targets: &Matrix<T>) -> Result<Gradients<T>> {
        let n_layers = self.layers.len();
        if trace.preactivations.len() != n_layers || trace.derivatives.len() != n_layers {
            return Err(Error::config("trace does not belong to this network"));
        }
        let output = trace.output();
        if targets.shape() != output.shape() {
            return Err(Error::Shape { op: "backward", left: output.shape(), right: targets.shape() });
        }
        let mut delta = match self.spec.loss {
            Loss::Sse => {
                let d_out = output.zip_map(targets, |y, t| T::lit(2.0) * (y - t))?;
                apply_local(d_out, self.spec.layers[n_layers - 1].activation, &trace.derivatives[n_layers - 1])?
            }
            Loss::SoftmaxCrossEntropy => {
                let n = T::lit(output.rows().max(1) as f64);
                output.zip_map(targets, |p, t| (p - t) / n)?
            }
        };

        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for i in (0..n_layers).rev() {
            weights.push(trace.layer_input(i).matmul_tn(&delta)?);
            biases.push(delta.sum_rows());
            if i > 0 {
                let upstream = delta.matmul_nt(&self.layers[i].weights)?;
                delta = apply_local(upstream, self.spec.layers[i - 1].activation, &trace.derivatives[i - 1])?;
            }
        }
        weights.reverse();
        biases.reverse();
        Ok(Gradients { weights, biases })
    }
}

fn activate<T: Real>(activation: LayerActivation, z: &Matrix<T>) -> Result<Matrix<T>> {
    match activation {
        LayerActivation::Linear => Ok(z.clone()),
        LayerActivation::Unit(kind) => crate::activations::apply_forward(kind, z),
        LayerActivation::Softmax => Ok(softmax_rows(z)),
    }
}

/// Multiplies an upstream gradient by a layer's local derivative.
fn apply_local<T: Real>(upstream: Matrix<T>, activation: LayerActivation, local: &Option<Matrix<T>>) -> Result<Matrix<T>> {
    match (activation, local) {
        (LayerActivation::Linear, _) => Ok(upstream),
        (LayerActivation::Unit(_), Some(d)) => upstream.hadamard(d),
        (LayerActivation::Unit(_), None) => Err(Error::config("trace is missing unit derivatives")),
        (LayerActivation::Softmax, _) => {
            Err(Error::config("softmax derivative is only defined through cross-entropy"))
        }
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Real>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    let cols = logits.cols();
    if cols == 0 {
        return out;
    }
    for row in out.as_mut_slice().chunks_exact_mut(cols) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// `Σ (pred - target)²` over every entry.
pub fn loss_sse<T: Real>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<T> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape { op: "loss_sse", left: pred.shape(), right: target.shape() });
    }
    Ok(pred.as_slice().iter().zip(target.as_slice()).map(|(&p, &t)| (p - t) * (p - t)).sum())
}

/// Mean over rows of `-Σ onehot · log softmax(logits)`.
pub fn loss_softmax_ce<T: Real>(logits: &Matrix<T>, onehot: &Matrix<T>) -> Result<T> {
    if logits.shape() != onehot.shape() {
        return Err(Error::Shape { op: "loss_softmax_ce", left: logits.shape(), right: onehot.shape() });
    }
    if logits.rows() == 0 {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for (z, y) in logits.iter_rows().zip(onehot.iter_rows()) {
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let log_norm = z.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        total += z.iter().zip(y).map(|(&zi, &yi)| yi * (log_norm - zi)).sum::<T>();
    }
    Ok(total / T::lit(logits.rows() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn linear_spec(dim: usize) -> NetworkSpec {
        NetworkSpec::new(
            vec![LayerSpec { input_dim: dim, output_dim: dim, activation: LayerActivation::Linear }],
            Loss::Sse,
        )
        .unwrap()
    }

    #[test]
    fn spec_validation() {
        let l = |i, o, a| LayerSpec { input_dim: i, output_dim: o, activation: a };
        assert!(NetworkSpec::new(vec![], Loss::Sse).is_err());
        assert!(NetworkSpec::new(vec![l(2, 3, LayerActivation::Linear), l(4, 1, LayerActivation::Linear)], Loss::Sse)
            .is_err());
        assert!(NetworkSpec::new(vec![l(0, 3, LayerActivation::Linear)], Loss::Sse).is_err());
        assert!(NetworkSpec::new(vec![l(2, 3, LayerActivation::Linear)], Loss::SoftmaxCrossEntropy).is_err());
        assert!(NetworkSpec::new(vec![l(2, 3, LayerActivation::Softmax)], Loss::Sse).is_err());
        assert!(NetworkSpec::new(
            vec![l(2, 3, LayerActivation::Softmax), l(3, 3, LayerActivation::Softmax)],
            Loss::SoftmaxCrossEntropy
        )
        .is_err());
        assert!(NetworkSpec::new(vec![l(2, 3, LayerActivation::Softmax)], Loss::SoftmaxCrossEntropy).is_ok());
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let spec = NetworkSpec::mlp(2, &[5, 5], ActivationKind::Tanh, 1, ActivationKind::Tanh.into(), Loss::Sse)
            .unwrap();
        let a = Network::<f64>::init(spec.clone(), 11);
        let b = Network::<f64>::init(spec.clone(), 11);
        assert_eq!(a, b);
        assert_ne!(a, Network::<f64>::init(spec, 12));
        assert!(a.layers().iter().all(|d| d.bias.as_slice().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn init_weights_follow_glorot_range() {
        let spec = NetworkSpec::mlp(100, &[100], ActivationKind::Tanh, 1, LayerActivation::Linear, Loss::Sse).unwrap();
        let net = Network::<f64>::init(spec, 3);
        let w = net.layers()[0].weights.as_slice();
        assert_eq!(w.len(), 10_000);
        let limit = (6.0f64 / 200.0).sqrt();
        assert!(w.iter().all(|v| v.abs() <= limit));
        // uniform on [-a, a]: sd of the sample mean is a / sqrt(3n)
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let sd_mean = limit / (3.0 * w.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * sd_mean, "mean {mean} vs 3σ {}", 3.0 * sd_mean);
    }

    #[test]
    fn identity_linear_network_passes_input_through() {
        let spec = linear_spec(3);
        let net = Network::from_parts(spec, vec![Dense { weights: Matrix::identity(3), bias: Matrix::zeros(1, 3) }])
            .unwrap();
        let x = Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 0.4);
        assert_eq!(net.predict(&x).unwrap(), x);
        assert!(net.predict(&Matrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn binary_hidden_layer_outputs_are_signs() {
        let spec =
            NetworkSpec::mlp(2, &[16], ActivationKind::sudo(2).unwrap(), 1, LayerActivation::Linear, Loss::Sse).unwrap();
        let net = Network::<f64>::init(spec, 5);
        let x = Matrix::from_fn(50, 2, |i, j| ((i * 7 + j * 13) % 17) as f64 / 8.5 - 1.0);
        let trace = net.forward(&x).unwrap();
        assert!(trace.hidden_outputs()[0].as_slice().iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn forward_matches_scalar_two_layer_computation() {
        let spec = NetworkSpec::mlp(2, &[2], ActivationKind::Tanh, 1, LayerActivation::Linear, Loss::Sse).unwrap();
        let w1 = Matrix::from_rows(&[[0.5, -0.3], [0.8, 0.1]]).unwrap();
        let b1 = Matrix::row_vector(vec![0.1, -0.2]);
        let w2 = Matrix::from_rows(&[[1.5], [-0.7]]).unwrap();
        let b2 = Matrix::row_vector(vec![0.05]);
        let net = Network::from_parts(
            spec,
            vec![Dense { weights: w1, bias: b1 }, Dense { weights: w2, bias: b2 }],
        )
        .unwrap();
        let x = Matrix::from_rows(&[[0.2, -0.4], [1.0, 0.3]]).unwrap();
        let out = net.predict(&x).unwrap();
        for (r, (x0, x1)) in [(0.2f64, -0.4f64), (1.0, 0.3)].into_iter().enumerate() {
            let h0 = (x0 * 0.5 + x1 * 0.8 + 0.1).tanh();
            let h1 = (x0 * -0.3 + x1 * 0.1 - 0.2).tanh();
            let y = h0 * 1.5 + h1 * -0.7 + 0.05;
            assert_relative_eq!(out.get(r, 0), y, max_relative = 1e-14);
        }
    }

    #[test]
    fn linear_gradient_is_closed_form_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = NetworkSpec::new(
            vec![LayerSpec { input_dim: 3, output_dim: 2, activation: LayerActivation::Linear }],
            Loss::Sse,
        )
        .unwrap();
        let net = Network::<f64>::init(spec, 2);
        let x = Matrix::from_fn(6, 3, |_, _| rng.gen_range(-1.0..1.0));
        let y = Matrix::from_fn(6, 2, |_, _| rng.gen_range(-1.0..1.0));
        let trace = net.forward(&x).unwrap();
        let grads = net.backward(&trace, &y).unwrap();
        // d/dW ||XW + b - Y||² = 2 Xᵀ(XW + b - Y)
        let resid = x.matmul(&net.layers()[0].weights).unwrap().add_row_broadcast(&net.layers()[0].bias).unwrap();
        let resid = resid.sub(&y).unwrap();
        let expected = x.transpose().matmul(&resid).unwrap().scale(2.0);
        for (a, b) in grads.weights[0].as_slice().iter().zip(expected.as_slice()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12);
        }
        let expected_b = resid.sum_rows().scale(2.0);
        for (a, b) in grads.biases[0].as_slice().iter().zip(expected_b.as_slice()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn sse_examples() {
        let a = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(loss_sse(&a, &a).unwrap(), 0.0);
        assert_eq!(loss_sse(&Matrix::row_vector(vec![1.0]), &Matrix::row_vector(vec![0.0])).unwrap(), 1.0);
        let p: Matrix<f64> = Matrix::from_rows(&[[0.3, -1.2, 2.0], [0.0, 0.5, -0.25]]).unwrap();
        let t = Matrix::from_rows(&[[0.1, 0.2, 0.3], [-1.0, 0.5, 0.75]]).unwrap();
        let mut expected = 0.0f64;
        for i in 0..2 {
            for j in 0..3 {
                expected += (p.get(i, j) - t.get(i, j)).powi(2);
            }
        }
        assert_relative_eq!(loss_sse(&p, &t).unwrap(), expected, max_relative = 1e-15);
        assert!(loss_sse(&p, &a).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let logits = Matrix::<f64>::zeros(3, 10);
        let onehot = Matrix::from_fn(3, 10, |i, j| if j == i { 1.0 } else { 0.0 });
        assert_relative_eq!(loss_softmax_ce(&logits, &onehot).unwrap(), 10f64.ln(), max_relative = 1e-15);

        let confident = Matrix::from_fn(1, 10, |_, j| if j == 4 { 800.0 } else { 0.0 });
        let target = Matrix::from_fn(1, 10, |_, j| if j == 4 { 1.0 } else { 0.0 });
        assert!(loss_softmax_ce(&confident, &target).unwrap() < 1e-300);
        assert!(loss_softmax_ce(&confident, &Matrix::zeros(1, 9)).is_err());
    }

    /// Neumaier-compensated sum.
    fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for v in values {
            let t = sum + v;
            comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
            sum = t;
        }
        sum + comp
    }

    #[test]
    fn cross_entropy_matches_compensated_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dist = Uniform::new(-30.0, 30.0);
        let logits = Matrix::from_fn(7, 10, |_, _| dist.sample(&mut rng));
        let onehot = Matrix::from_fn(7, 10, |i, j| if j == (i * 3) % 10 { 1.0 } else { 0.0 });
        let per_row = (0..7).map(|i| {
            let row: Vec<f64> = (0..10).map(|j| logits.get(i, j)).collect();
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + compensated_sum(row.iter().map(|v| (v - max).exp())).ln();
            lse - row[(i * 3) % 10]
        });
        let expected = compensated_sum(per_row) / 7.0;
        assert_relative_eq!(loss_softmax_ce(&logits, &onehot).unwrap(), expected, max_relative = 1e-13);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = Matrix::from_rows(&[[1000.0, 1001.0, 999.0], [-3.0, 0.0, 2.0]]).unwrap();
        let p = softmax_rows(&z);
        for row in p.iter_rows() {
            assert_relative_eq!(row.iter().sum::<f64>(), 1.0, max_relative = 1e-15);
        }
        assert!(p.get(0, 1) > p.get(0, 0));
    }

    #[test]
    fn backward_rejects_mismatched_targets() {
        let spec = NetworkSpec::mlp(2, &[3], ActivationKind::Tanh, 1, LayerActivation::Linear, Loss::Sse).unwrap();
        let net = Network::<f64>::init(spec, 0);
        let trace = net.forward(&Matrix::zeros(4, 2)).unwrap();
        assert!(net.backward(&trace, &Matrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn forward_is_bit_reproducible() {
        let spec =
            NetworkSpec::mlp(2, &[8, 8], ActivationKind::sudo(4).unwrap(), 1, ActivationKind::Tanh.into(), Loss::Sse)
                .unwrap();
        let net = Network::<f64>::init(spec, 9);
        let x = Matrix::from_fn(20, 2, |i, j| (i as f64 - 10.0) / 10.0 * if j == 0 { 1.0 } else { -0.5 });
        assert_eq!(net.predict(&x).unwrap(), net.predict(&x).unwrap());
    }
}
