use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::graph::{Graph, Var};
use super::tensor::Tensor;

/// Padding rule of a convolution layer. Only zero same-padding with stride 1
/// is supported: the sequence length is preserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    #[default]
    ZeroSame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    /// Fully connected; flattens its input and emits a length-`out` sequence
    /// with one channel.
    Dense { out: usize },
    Conv1d {
        out_channels: usize,
        kernel: usize,
        #[serde(default)]
        padding: Padding,
    },
    LeakyRelu { slope: f64 },
    Tanh,
    /// Inverted dropout; identity in evaluation mode.
    Dropout { rate: f64 },
}

pub const LEAKY_SLOPE: f64 = 0.2;

/// Layer chain applied to a batch of `input_width`-wide rows. Activations
/// are `(channels, length)` sequences; the input is one channel of length
/// `input_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_width: usize,
    pub layers: Vec<Layer>,
}

/// Shapes of one parametric layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamShape {
    pub layer: usize,
    pub weight: Vec<usize>,
    pub bias: usize,
    pub fan_in: usize,
}

impl NetworkSpec {
    /// Generator chain: dense to the feature width, two 3-wide convolutions
    /// (64 and 32 channels) and a 1-wide convolution back to one channel.
    pub fn generator(noise_dim: usize, feature_dim: usize) -> Self {
        let lr = Layer::LeakyRelu { slope: LEAKY_SLOPE };
        Self {
            input_width: noise_dim,
            layers: vec![
                Layer::Dense { out: feature_dim },
                lr.clone(),
                Layer::Conv1d {
                    out_channels: 64,
                    kernel: 3,
                    padding: Padding::ZeroSame,
                },
                lr.clone(),
                Layer::Conv1d {
                    out_channels: 32,
                    kernel: 3,
                    padding: Padding::ZeroSame,
                },
                lr,
                Layer::Conv1d {
                    out_channels: 1,
                    kernel: 1,
                    padding: Padding::ZeroSame,
                },
            ],
        }
    }

    /// Critic chain: 32-channel 3-wide convolution, dense 64, dropout 0.4,
    /// dense 1 with a tanh head.
    pub fn critic(feature_dim: usize) -> Self {
        let lr = Layer::LeakyRelu { slope: LEAKY_SLOPE };
        Self {
            input_width: feature_dim,
            layers: vec![
                Layer::Conv1d {
                    out_channels: 32,
                    kernel: 3,
                    padding: Padding::ZeroSame,
                },
                lr.clone(),
                Layer::Dense { out: 64 },
                lr,
                Layer::Dropout { rate: 0.4 },
                Layer::Dense { out: 1 },
                Layer::Tanh,
            ],
        }
    }

    /// `(channels, length)` after every layer, validating the chain.
    pub fn activation_shapes(&self) -> Result<Vec<(usize, usize)>> {
        if self.input_width == 0 {
            return Err(Error::InvalidDimension("input width is 0".into()));
        }
        let mut shape = (1, self.input_width);
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            shape = match *layer {
                Layer::Dense { out } if out > 0 => (1, out),
                Layer::Conv1d {
                    out_channels,
                    kernel,
                    ..
                } if out_channels > 0 && kernel % 2 == 1 => (out_channels, shape.1),
                Layer::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                    return Err(Error::InvalidDimension(format!(
                        "layer {i}: dropout rate {rate}"
                    )))
                }
                Layer::Dense { .. } | Layer::Conv1d { .. } => {
                    return Err(Error::InvalidDimension(format!("layer {i}: {layer:?}")))
                }
                _ => shape,
            };
            out.push(shape);
        }
        Ok(out)
    }

    pub fn output_width(&self) -> Result<usize> {
        let shapes = self.activation_shapes()?;
        Ok(shapes
            .last()
            .map_or(self.input_width, |&(c, l)| c * l))
    }

    pub fn param_shapes(&self) -> Result<Vec<ParamShape>> {
        let shapes = self.activation_shapes()?;
        let mut prev = (1, self.input_width);
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                Layer::Dense { out: o } => out.push(ParamShape {
                    layer: i,
                    weight: vec![o, prev.0 * prev.1],
                    bias: o,
                    fan_in: prev.0 * prev.1,
                }),
                Layer::Conv1d {
                    out_channels,
                    kernel,
                    ..
                } => out.push(ParamShape {
                    layer: i,
                    weight: vec![out_channels, prev.0, kernel],
                    bias: out_channels,
                    fan_in: prev.0 * kernel,
                }),
                _ => {}
            }
            prev = shapes[i];
        }
        Ok(out)
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self
            .param_shapes()?
            .iter()
            .map(|p| p.weight.iter().product::<usize>() + p.bias)
            .sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub layer: usize,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Trainable parameters of a network, ordered by layer (weight, then bias).
/// Gradients and optimizer moments use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub entries: Vec<LayerParams>,
}

impl ParamSet {
    /// Uniform weights in `±sqrt(6 / fan_in)`, zero biases.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = spec
            .param_shapes()?
            .into_iter()
            .map(|p| {
                let bound = (6.0 / p.fan_in as f64).sqrt();
                let n = p.weight.iter().product();
                let w = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
                Ok(LayerParams {
                    layer: p.layer,
                    weight: Tensor::new(p.weight, w)?,
                    bias: Tensor::zeros(vec![p.bias]),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| LayerParams {
                    layer: e.layer,
                    weight: Tensor::zeros(e.weight.shape().to_vec()),
                    bias: Tensor::zeros(e.bias.shape().to_vec()),
                })
                .collect(),
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().flat_map(|e| [&e.weight, &e.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries
            .iter_mut()
            .flat_map(|e| [&mut e.weight, &mut e.bias])
    }

    pub fn len(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All values in parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn get(&self, index: usize) -> f64 {
        let mut i = index;
        for t in self.tensors() {
            if i < t.len() {
                return t.data()[i];
            }
            i -= t.len();
        }
        panic!("parameter index {index} out of range")
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let mut i = index;
        for t in self.tensors_mut() {
            if i < t.len() {
                t.data_mut()[i] = value;
                return;
            }
            i -= t.len();
        }
        panic!("parameter index {index} out of range")
    }

    /// SHA-256 over layer indices, shapes and the bit patterns of all values.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update((e.layer as u64).to_le_bytes());
            for t in [&e.weight, &e.bias] {
                h.update((t.shape().len() as u64).to_le_bytes());
                for &d in t.shape() {
                    h.update((d as u64).to_le_bytes());
                }
                for v in t.data() {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }

    pub fn check_compatible(&self, other: &ParamSet) -> Result<()> {
        let same = self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.layer == b.layer
                    && a.weight.shape() == b.weight.shape()
                    && a.bias.shape() == b.bias.shape()
            });
        if same {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("parameter sets differ in layout".into()))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(Tensor::is_finite)
    }
}

/// Network description, parameters and their hash, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamArchive {
    pub spec: NetworkSpec,
    pub params: ParamSet,
    pub content_hash: String,
}

impl ParamArchive {
    pub fn new(spec: NetworkSpec, params: ParamSet) -> Self {
        let content_hash = params.content_hash();
        Self {
            spec,
            params,
            content_hash,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        crate::archive::encode(crate::archive::ArchiveKind::Params, self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let a: Self = crate::archive::decode(crate::archive::ArchiveKind::Params, bytes)?;
        a.verify()?;
        Ok(a)
    }

    /// Check the stored hash and that the parameters fit the spec.
    pub fn verify(&self) -> Result<()> {
        if self.params.content_hash() != self.content_hash {
            return Err(Error::Archive("parameter hash mismatch".into()));
        }
        ParamSet::init(&self.spec, 0)?.check_compatible(&self.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One multiplicative mask per dropout layer, each `[rows, width]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropoutMasks {
    masks: Vec<Tensor>,
}

impl DropoutMasks {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn sample(spec: &NetworkSpec, rows: usize, seed: u64) -> Result<Self> {
        let shapes = spec.activation_shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut masks = Vec::new();
        for (layer, &(c, l)) in spec.layers.iter().zip(&shapes) {
            if let Layer::Dropout { rate } = *layer {
                let keep = 1.0 - rate;
                let data = (0..rows * c * l)
                    .map(|_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                masks.push(Tensor::new(vec![rows, c * l], data)?);
            }
        }
        Ok(Self { masks })
    }

    /// The same masks repeated `times` over the batch axis.
    pub fn tiled(&self, times: usize) -> Result<Self> {
        let masks = self
            .masks
            .iter()
            .map(|m| Tensor::concat_rows(&vec![m; times]))
            .collect::<Result<_>>()?;
        Ok(Self { masks })
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

/// Register parameters on a graph; `trainable = false` records constants.
pub(crate) fn bind_params(g: &mut Graph, params: &ParamSet, trainable: bool) -> Result<Vec<Var>> {
    params
        .tensors()
        .map(|t| {
            if trainable {
                g.leaf(t.clone())
            } else {
                g.constant(t.clone())
            }
        })
        .collect()
}

/// Record the forward pass of `spec` on `input` ([rows, input_width]).
/// Dropout layers consume `masks` in order; with no masks they are identity.
pub(crate) fn record_forward(
    g: &mut Graph,
    spec: &NetworkSpec,
    params: &[Var],
    input: Var,
    masks: &DropoutMasks,
) -> Result<Var> {
    let rows = g.value(input).rows();
    if g.value(input).row_width() != spec.input_width {
        return Err(Error::ShapeMismatch(format!(
            "batch width {} for network input {}",
            g.value(input).row_width(),
            spec.input_width
        )));
    }
    let shapes = spec.activation_shapes()?;
    let mut x = input;
    let mut shape = (1, spec.input_width);
    let mut p = params.iter();
    let mut dropout = 0;
    for (layer, &next) in spec.layers.iter().zip(&shapes) {
        x = match *layer {
            Layer::Dense { .. } => {
                let (w, b) = (*p.next().unwrap(), *p.next().unwrap());
                let flat = g.reshape(x, vec![rows, shape.0 * shape.1])?;
                let y = g.matmul_nt(flat, w)?;
                g.add_bias(y, b)?
            }
            Layer::Conv1d { .. } => {
                let (w, b) = (*p.next().unwrap(), *p.next().unwrap());
                let seq = g.reshape(x, vec![rows, shape.0, shape.1])?;
                let y = g.conv1d(seq, w)?;
                g.add_bias(y, b)?
            }
            Layer::LeakyRelu { slope } => g.leaky_relu(x, slope)?,
            Layer::Tanh => g.tanh(x)?,
            Layer::Dropout { .. } => match masks.masks.get(dropout) {
                Some(m) => {
                    dropout += 1;
                    if m.rows() != rows {
                        return Err(Error::ShapeMismatch(format!(
                            "dropout mask for {} rows, batch has {rows}",
                            m.rows()
                        )));
                    }
                    let flat = g.reshape(x, vec![rows, shape.0 * shape.1])?;
                    g.mul_const(flat, m.clone())?
                }
                None => x,
            },
        };
        shape = next;
    }
    g.reshape(x, vec![rows, shape.0 * shape.1])
}

fn grads_to_params(g: &Graph, template: &ParamSet, grads: &[Var]) -> ParamSet {
    let mut out = template.zeros_like();
    for (t, v) in out.tensors_mut().zip(grads) {
        t.data_mut().copy_from_slice(g.value(*v).data());
    }
    out
}

/// Recorded forward computation of one batch.
///
/// [`Tape::grad_wrt_input`] records the input gradient on the same graph so
/// that losses built from it can be differentiated with respect to the
/// parameters by [`Tape::backward_params`].
#[derive(Debug)]
pub struct Tape {
    graph: Graph,
    input: Var,
    output: Var,
    params: Vec<Var>,
    template: ParamSet,
}

/// Run `spec` on `batch`. In train mode dropout masks are drawn from
/// `rng_seed`; eval mode ignores the seed and is deterministic.
pub fn forward_network(
    spec: &NetworkSpec,
    params: &ParamSet,
    batch: &Tensor,
    mode: Mode,
    rng_seed: u64,
) -> Result<(Tensor, Tape)> {
    let masks = match mode {
        Mode::Train => DropoutMasks::sample(spec, batch.rows(), rng_seed)?,
        Mode::Eval => DropoutMasks::none(),
    };
    forward_with_masks(spec, params, batch, &masks)
}

pub fn forward_with_masks(
    spec: &NetworkSpec,
    params: &ParamSet,
    batch: &Tensor,
    masks: &DropoutMasks,
) -> Result<(Tensor, Tape)> {
    let expected = spec.param_shapes()?;
    if expected.len() != params.entries.len()
        || expected.iter().zip(&params.entries).any(|(s, e)| {
            s.layer != e.layer || s.weight != e.weight.shape() || e.bias.len() != s.bias
        })
    {
        return Err(Error::ShapeMismatch(
            "parameters do not match the network".into(),
        ));
    }
    let mut graph = Graph::new();
    let pv = bind_params(&mut graph, params, true)?;
    let rows = batch.rows();
    let input = graph.leaf(batch.clone().reshaped(vec![rows, batch.row_width()])?)?;
    let output = record_forward(&mut graph, spec, &pv, input, masks)?;
    let out = graph.value(output).clone();
    Ok((
        out,
        Tape {
            graph,
            input,
            output,
            params: pv,
            template: params.clone(),
        },
    ))
}

impl Tape {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Mutable graph access for recording a loss on top of the output.
    pub fn graph_mut(&mut self) -> &mut Graph {
        &mut self.graph
    }

    pub fn input(&self) -> Var {
        self.input
    }

    pub fn output(&self) -> Var {
        self.output
    }

    /// Gradient of the summed output with respect to the input batch. The
    /// network acts on rows independently, so row `i` of the result is the
    /// gradient of output `i` with respect to sample `i`.
    pub fn grad_wrt_input(&mut self) -> Result<Var> {
        let s = self.graph.sum(self.output)?;
        Ok(self.graph.backward(s, 1.0, &[self.input])?[0])
    }

    /// Parameter gradients of the scalar `loss` scaled by `loss_grad`.
    pub fn backward_params(mut self, loss: Var, loss_grad: f64) -> Result<ParamSet> {
        if self.graph.value(loss).len() != 1 {
            return Err(Error::ShapeMismatch("loss must be a scalar".into()));
        }
        let grads = self.graph.backward(loss, loss_grad, &self.params)?;
        Ok(grads_to_params(&self.graph, &self.template, &grads))
    }
}

pub(crate) fn collect_grads(g: &Graph, template: &ParamSet, grads: &[Var]) -> ParamSet {
    grads_to_params(g, template, grads)
}
