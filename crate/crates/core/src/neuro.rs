//! Fixed-topology feedforward networks with direct-encoding genomes.
//!
//! Parameters are laid out canonically as: for each layer in order, the
//! weight matrix in row-major order (row = output neuron, column = input
//! neuron), followed by that layer's bias vector. [`NeuralNet::flatten`],
//! [`NeuralNet::unflatten`] and [`Gradient`] all share this ordering.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuroError {
    #[error("topology needs at least 2 layers, got {0}")]
    TooFewLayers(usize),
    #[error("layer {index} has zero width")]
    ZeroWidth { index: usize },
    #[error("genome length {actual} does not match topology length {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("genome value at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("input length {actual} does not match network input width {expected}")]
    InputMismatch { expected: usize, actual: usize },
    #[error("genome topologies differ")]
    TopologyMismatch,
    #[error("action {action} out of range for output width {width}")]
    ActionOutOfRange { action: usize, width: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Rectifier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    Linear,
    Softmax,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology")]
pub struct NetTopology {
    layer_sizes: Vec<usize>,
    hidden_activation: HiddenActivation,
    output_head: OutputHead,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    layer_sizes: Vec<usize>,
    hidden_activation: HiddenActivation,
    output_head: OutputHead,
}

impl TryFrom<RawTopology> for NetTopology {
    type Error = NeuroError;

    fn try_from(raw: RawTopology) -> Result<Self, Self::Error> {
        let mut t = NetTopology::new(raw.layer_sizes, raw.output_head)?;
        t.hidden_activation = raw.hidden_activation;
        Ok(t)
    }
}

impl NetTopology {
    pub fn new(layer_sizes: Vec<usize>, output_head: OutputHead) -> Result<Self, NeuroError> {
        if layer_sizes.len() < 2 {
            return Err(NeuroError::TooFewLayers(layer_sizes.len()));
        }
        if let Some(index) = layer_sizes.iter().position(|&w| w == 0) {
            return Err(NeuroError::ZeroWidth { index });
        }
        Ok(Self {
            layer_sizes,
            hidden_activation: HiddenActivation::Rectifier,
            output_head,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn output_head(&self) -> OutputHead {
        self.output_head
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden_activation
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    /// Number of genes needed to encode every weight and bias.
    pub fn genome_length(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|p| p[0] * p[1] + p[1])
            .sum()
    }
}

/// Flat, finite parameter vector. `topology` is `None` for genomes that do
/// not encode a network (benchmark objectives).
#[derive(Clone, Debug, PartialEq)]
pub struct Genome {
    values: Vec<f64>,
    topology: Option<NetTopology>,
}

impl Genome {
    pub fn new(values: Vec<f64>, topology: NetTopology) -> Result<Self, NeuroError> {
        let expected = topology.genome_length();
        if values.len() != expected {
            return Err(NeuroError::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self {
            values,
            topology: Some(topology),
        })
    }

    /// A genome over a plain real vector with no network attached.
    pub fn raw(values: Vec<f64>) -> Result<Self, NeuroError> {
        check_finite(&values)?;
        Ok(Self {
            values,
            topology: None,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn topology(&self) -> Option<&NetTopology> {
        self.topology.as_ref()
    }

    pub fn same_shape(&self, other: &Genome) -> bool {
        self.values.len() == other.values.len() && self.topology == other.topology
    }

    /// Replaces the values keeping the topology. Callers guarantee length and
    /// finiteness.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Genome {
        debug_assert_eq!(values.len(), self.values.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Genome {
            values,
            topology: self.topology.clone(),
        }
    }

    /// Stable digest of the exact parameter bits.
    pub fn digest(&self) -> u64 {
        param_digest(&self.values)
    }
}

fn check_finite(values: &[f64]) -> Result<(), NeuroError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(NeuroError::NonFinite { index }),
        None => Ok(()),
    }
}

/// FNV-1a over the IEEE-754 bit patterns.
pub fn param_digest(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major, `outputs` rows of `inputs` columns.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
            let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
            out.push(dot + b);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralNet {
    topology: NetTopology,
    layers: Vec<Layer>,
}

/// Per-layer activations retained for backpropagation.
struct ForwardTrace {
    /// `inputs[l]` is the input fed to layer `l` (post-activation of `l - 1`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of the final layer.
    logits: Vec<f64>,
}

impl NeuralNet {
    pub fn zeros(topology: &NetTopology) -> Self {
        let layers = topology
            .layer_sizes
            .windows(2)
            .map(|p| Layer {
                inputs: p[0],
                outputs: p[1],
                weights: vec![0.0; p[0] * p[1]],
                biases: vec![0.0; p[1]],
            })
            .collect();
        Self {
            topology: topology.clone(),
            layers,
        }
    }

    /// Uniform weights in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero biases.
    pub fn random<R: Rng + ?Sized>(topology: &NetTopology, rng: &mut R) -> Self {
        let mut net = Self::zeros(topology);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn topology(&self) -> &NetTopology {
        &self.topology
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn flatten(&self) -> Genome {
        let mut values = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            values.extend_from_slice(&layer.weights);
            values.extend_from_slice(&layer.biases);
        }
        Genome {
            values,
            topology: Some(self.topology.clone()),
        }
    }

    pub fn unflatten(genome: &Genome, topology: &NetTopology) -> Result<Self, NeuroError> {
        if let Some(t) = genome.topology() {
            if t != topology {
                return Err(NeuroError::TopologyMismatch);
            }
        }
        Self::from_values(genome.values(), topology)
    }

    pub fn from_values(values: &[f64], topology: &NetTopology) -> Result<Self, NeuroError> {
        let expected = topology.genome_length();
        if values.len() != expected {
            return Err(NeuroError::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        let mut net = Self::zeros(topology);
        net.load_values(values);
        Ok(net)
    }

    fn load_values(&mut self, values: &[f64]) {
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&values[offset..offset + nw]);
            offset += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&values[offset..offset + nb]);
            offset += nb;
        }
    }

    /// Overwrites all parameters from a genome of the same topology.
    pub fn load_genome(&mut self, genome: &Genome) -> Result<(), NeuroError> {
        if let Some(t) = genome.topology() {
            if t != &self.topology {
                return Err(NeuroError::TopologyMismatch);
            }
        }
        if genome.len() != self.param_count() {
            return Err(NeuroError::LengthMismatch {
                expected: self.param_count(),
                actual: genome.len(),
            });
        }
        self.load_values(genome.values());
        Ok(())
    }

    pub fn digest(&self) -> u64 {
        param_digest(self.flatten().values())
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NeuroError> {
        let expected = self.topology.input_width();
        if input.len() != expected {
            return Err(NeuroError::InputMismatch {
                expected,
                actual: input.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, input: &[f64]) -> ForwardTrace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut next);
            if l < last {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            inputs.push(std::mem::replace(&mut current, std::mem::take(&mut next)));
        }
        ForwardTrace {
            inputs,
            logits: current,
        }
    }

    /// Raw output of the final affine layer, before the output head.
    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>, NeuroError> {
        self.check_input(input)?;
        Ok(self.trace(input).logits)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NeuroError> {
        let logits = self.logits(input)?;
        Ok(match self.topology.output_head {
            OutputHead::Linear => logits,
            OutputHead::Softmax => softmax(&logits),
        })
    }

    /// Backpropagates `d_logits` (loss gradient w.r.t. the final pre-activation)
    /// through a recorded trace, accumulating into `grad`.
    fn accumulate(&self, trace: &ForwardTrace, d_logits: &[f64], grad: &mut [f64]) {
        let offsets = self.layer_offsets();
        let mut delta = d_logits.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.inputs[l];
            let base = offsets[l];
            let (gw, gb) = grad[base..base + layer.param_count()].split_at_mut(layer.weights.len());
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, &x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
                gb[o] += d;
            }
            if l == 0 {
                break;
            }
            // Propagate to the previous layer's post-activation, then through the rectifier.
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, &a) in prev.iter_mut().zip(input) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.param_count();
        }
        offsets
    }

    /// Gradient of `loss` over a batch of inputs. The loss callback receives the
    /// sample index and the network's logits and returns `(loss, d_loss/d_logits)`.
    pub fn backprop<F>(&self, inputs: &[Vec<f64>], mut loss: F) -> Result<(f64, Gradient), NeuroError>
    where
        F: FnMut(usize, &[f64]) -> (f64, Vec<f64>),
    {
        let mut grad = vec![0.0; self.param_count()];
        let mut total = 0.0;
        for (i, x) in inputs.iter().enumerate() {
            self.check_input(x)?;
            let trace = self.trace(x);
            let (l, d) = loss(i, &trace.logits);
            total += l;
            self.accumulate(&trace, &d, &mut grad);
        }
        Ok((total, Gradient(grad)))
    }

    /// Plain gradient descent: `w <- w - lr * g`.
    pub fn sgd_step(&mut self, gradient: &Gradient, lr: f64) {
        assert!(lr > 0.0, "learning rate must be positive");
        assert_eq!(gradient.0.len(), self.param_count(), "gradient shape mismatch");
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w -= lr * gradient.0[offset];
                offset += 1;
            }
        }
    }
}

/// Loss gradient in canonical genome order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&g| g == 0.0)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter()
        .map(|e| (e / sum).max(f64::MIN_POSITIVE))
        .collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One sample for Q-value regression.
#[derive(Clone, Debug)]
pub struct QTarget {
    pub action: usize,
    pub target: f64,
}

/// Mean squared error on the selected Q outputs (linear head).
pub fn q_regression_loss(
    net: &NeuralNet,
    states: &[Vec<f64>],
    targets: &[QTarget],
) -> Result<(f64, Gradient), NeuroError> {
    assert_eq!(states.len(), targets.len());
    let n = states.len().max(1) as f64;
    let width = net.topology().output_width();
    if let Some(t) = targets.iter().find(|t| t.action >= width) {
        return Err(NeuroError::ActionOutOfRange {
            action: t.action,
            width,
        });
    }
    let (loss, grad) = net.backprop(states, |i, q| {
        let t = &targets[i];
        let err = q[t.action] - t.target;
        let mut d = vec![0.0; q.len()];
        d[t.action] = 2.0 * err / n;
        (err * err / n, d)
    })?;
    Ok((loss, grad))
}

/// Actor loss `mean(-log pi(a|s) * advantage)` for a softmax-head net, with
/// the advantage held constant.
pub fn policy_loss(
    net: &NeuralNet,
    states: &[Vec<f64>],
    actions: &[usize],
    advantages: &[f64],
) -> Result<(f64, Gradient), NeuroError> {
    assert_eq!(states.len(), actions.len());
    assert_eq!(states.len(), advantages.len());
    let n = states.len().max(1) as f64;
    let width = net.topology().output_width();
    if let Some(&a) = actions.iter().find(|&&a| a >= width) {
        return Err(NeuroError::ActionOutOfRange { action: a, width });
    }
    net.backprop(states, |i, z| {
        let a = actions[i];
        let adv = advantages[i];
        let logp = log_softmax(z);
        let probs = softmax(z);
        let d = probs
            .iter()
            .enumerate()
            .map(|(j, &p)| adv * (p - if j == a { 1.0 } else { 0.0 }) / n)
            .collect();
        (-logp[a] * adv / n, d)
    })
}

/// Critic loss `mean((V(s) - target)^2)` for a single-output linear net.
pub fn value_loss(
    net: &NeuralNet,
    states: &[Vec<f64>],
    targets: &[f64],
) -> Result<(f64, Gradient), NeuroError> {
    assert_eq!(states.len(), targets.len());
    let n = states.len().max(1) as f64;
    net.backprop(states, |i, v| {
        let err = v[0] - targets[i];
        let mut d = vec![0.0; v.len()];
        d[0] = 2.0 * err / n;
        (err * err / n, d)
    })
}

/// Parallel sequences of transitions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransitionBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
    pub terminals: Vec<bool>,
}

impl TransitionBatch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn push(&mut self, state: Vec<f64>, action: usize, reward: f64, next: Vec<f64>, terminal: bool) {
        debug_assert!(reward.is_finite());
        self.states.push(state);
        self.actions.push(action);
        self.rewards.push(reward);
        self.next_states.push(next);
        self.terminals.push(terminal);
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.states.len();
        self.actions.len() == n
            && self.rewards.len() == n
            && self.next_states.len() == n
            && self.terminals.len() == n
            && self.rewards.iter().all(|r| r.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn topo(layers: &[usize], head: OutputHead) -> NetTopology {
        NetTopology::new(layers.to_vec(), head).unwrap()
    }

    #[test]
    fn genome_length_examples() {
        assert_eq!(topo(&[4, 8, 2], OutputHead::Linear).genome_length(), 58);
        assert_eq!(topo(&[1, 1], OutputHead::Linear).genome_length(), 2);
        assert_eq!(topo(&[2, 3, 3, 1], OutputHead::Linear).genome_length(), 25);
    }

    #[test]
    fn invalid_topologies() {
        assert_eq!(
            NetTopology::new(vec![3], OutputHead::Linear),
            Err(NeuroError::TooFewLayers(1))
        );
        assert_eq!(
            NetTopology::new(vec![3, 0, 2], OutputHead::Linear),
            Err(NeuroError::ZeroWidth { index: 1 })
        );
    }

    #[test]
    fn zero_genome_gives_zero_net() {
        let t = topo(&[4, 8, 2], OutputHead::Linear);
        let g = Genome::new(vec![0.0; 58], t.clone()).unwrap();
        let net = NeuralNet::unflatten(&g, &t).unwrap();
        assert_eq!(net, NeuralNet::zeros(&t));
    }

    #[test]
    fn short_genome_rejected() {
        let t = topo(&[4, 8, 2], OutputHead::Linear);
        assert_eq!(
            NeuralNet::from_values(&[0.0; 57], &t),
            Err(NeuroError::LengthMismatch {
                expected: 58,
                actual: 57
            })
        );
        assert!(Genome::new(vec![0.0; 57], t).is_err());
    }

    #[test]
    fn nonfinite_genome_rejected() {
        let t = topo(&[1, 1], OutputHead::Linear);
        assert_eq!(
            Genome::new(vec![0.0, f64::NAN], t),
            Err(NeuroError::NonFinite { index: 1 })
        );
    }

    #[test]
    fn canonical_order_is_weights_then_biases() {
        let t = topo(&[2, 1], OutputHead::Linear);
        let net = NeuralNet::from_values(&[1.0, 2.0, 3.0], &t).unwrap();
        // y = 1*x0 + 2*x1 + 3
        assert_eq!(net.forward(&[10.0, 100.0]).unwrap(), vec![213.0]);
    }

    #[test]
    fn zero_net_outputs() {
        let lin = NeuralNet::zeros(&topo(&[3, 5, 4], OutputHead::Linear));
        assert_eq!(lin.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 4]);
        let sm = NeuralNet::zeros(&topo(&[3, 5, 4], OutputHead::Softmax));
        for p in sm.forward(&[1.0, -2.0, 3.0]).unwrap() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = NeuralNet::zeros(&topo(&[3, 2], OutputHead::Linear));
        assert_eq!(
            net.forward(&[1.0]),
            Err(NeuroError::InputMismatch {
                expected: 3,
                actual: 1
            })
        );
    }

    #[test]
    fn softmax_sums_to_one_on_random_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = topo(&[6, 16, 9], OutputHead::Softmax);
        for _ in 0..1000 {
            let net = NeuralNet::random(&t, &mut rng);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = net.forward(&x).unwrap();
            assert!(p.iter().all(|&v| v > 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn sgd_step_examples() {
        let t = topo(&[1, 1], OutputHead::Linear);
        let mut net = NeuralNet::from_values(&[1.0, 0.0], &t).unwrap();
        net.sgd_step(&Gradient(vec![2.0, 1.0]), 0.005);
        let v = net.flatten();
        assert_eq!(v.values()[0], 0.99);
        assert_eq!(v.values()[1], -0.005);

        let mut net = NeuralNet::from_values(&[0.0, 0.0], &t).unwrap();
        net.sgd_step(&Gradient(vec![1.0, 0.0]), 0.001);
        assert_eq!(net.flatten().values(), &[-0.001, 0.0]);

        let before = NeuralNet::random(&topo(&[3, 4, 2], OutputHead::Linear), &mut ChaCha8Rng::seed_from_u64(1));
        let mut after = before.clone();
        after.sgd_step(&Gradient(vec![0.0; before.param_count()]), 0.01);
        assert_eq!(before, after);
    }

    #[test]
    fn zero_loss_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = NeuralNet::random(&topo(&[4, 8, 2], OutputHead::Linear), &mut rng);
        let states: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.1; 4]).collect();
        let targets: Vec<QTarget> = states
            .iter()
            .map(|s| QTarget {
                action: 1,
                target: net.forward(s).unwrap()[1],
            })
            .collect();
        let (loss, grad) = q_regression_loss(&net, &states, &targets).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.is_zero());
    }

    #[test]
    fn single_parameter_quadratic() {
        // Net [1,1] with w=3, b=0; input 2; target 1 -> loss (2w - 1)^2, dL/dw = 4(2w-1) = 20.
        let t = topo(&[1, 1], OutputHead::Linear);
        let net = NeuralNet::from_values(&[3.0, 0.0], &t).unwrap();
        let (loss, grad) = q_regression_loss(&net, &[vec![2.0]], &[QTarget { action: 0, target: 1.0 }]).unwrap();
        assert_eq!(loss, 25.0);
        assert_eq!(grad.values(), &[20.0, 10.0]);
    }

    #[test]
    fn digest_tracks_bits() {
        let t = topo(&[2, 2], OutputHead::Linear);
        let a = NeuralNet::from_values(&[0.0; 6], &t).unwrap();
        let mut vals = vec![0.0; 6];
        vals[3] = -0.0;
        let b = NeuralNet::from_values(&vals, &t).unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.clone().digest());
    }

    #[test]
    fn transition_batch_consistency() {
        let mut b = TransitionBatch::default();
        b.push(vec![0.0], 0, 1.0, vec![1.0], false);
        assert!(b.is_consistent());
        b.actions.push(3);
        assert!(!b.is_consistent());
    }
}
