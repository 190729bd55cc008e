//! Feed-forward inference with full activation capture.
//!
//! A model is described by a JSON manifest (layer list) and a flat blob of
//! little-endian `f32` parameters stored layer by layer, weights before
//! biases. Tensors flow between layers in height-width-channel order, the
//! same layout as [`Image`].
//!
//! Conv kernels are laid out `[out][in][ky][kx]` and dense weights
//! `[out][in]`. Accumulation starts from the bias and adds products in
//! kernel-row, kernel-column, input-channel order (dense: input order);
//! reference implementations must follow the same order to match
//! bit-for-bit.

mod quantize;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{Image, Shape};

pub use quantize::{quantize_model, round_to_binary16, QuantizeError, BINARY16_MAX};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("layer {layer}: {reason}")]
    Shape { layer: usize, reason: String },
    #[error("layer {layer}: non-finite parameter at offset {offset}")]
    NonFinite { layer: usize, offset: usize },
    #[error("weights blob truncated at layer {layer}: needs {expected} values, blob holds {actual}")]
    Truncated {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    #[error("weights blob has {extra} values beyond the {expected} the manifest declares")]
    TrailingData { expected: usize, extra: usize },
    #[error("weights blob length {0} is not a multiple of 4 bytes")]
    RaggedBlob(usize),
    #[error("input shape {actual} does not match model input {expected}")]
    InputShape { expected: Shape, actual: Shape },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    None,
    Relu,
}

/// One entry of the manifest's layer list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Fully connected layer. Inputs of any shape are flattened implicitly.
    Dense {
        inputs: usize,
        outputs: usize,
        #[serde(default)]
        activation: Activation,
    },
    /// Stride-1 square convolution with `padding` zeros on every side
    /// (0 gives a "valid" convolution).
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default)]
        activation: Activation,
    },
    Relu,
    /// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
    Maxpool2,
    Flatten,
    Softmax,
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => inputs * outputs + outputs,
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel * kernel + out_channels,
            _ => 0,
        }
    }

    fn output_shape(&self, layer: usize, input: Shape) -> Result<Shape, ModelError> {
        let err = |reason: String| ModelError::Shape { layer, reason };
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => {
                if inputs == 0 || outputs == 0 {
                    return Err(err("dense layer needs positive sizes".into()));
                }
                if input.len() != inputs {
                    return Err(err(format!(
                        "dense expects {inputs} inputs, previous layer yields {}",
                        input.len()
                    )));
                }
                Ok(Shape::new(1, 1, outputs))
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                padding,
                ..
            } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 {
                    return Err(err("conv2d needs positive sizes".into()));
                }
                if input.channels != in_channels {
                    return Err(err(format!(
                        "conv2d expects {in_channels} channels, got {}",
                        input.channels
                    )));
                }
                if padding >= kernel {
                    return Err(err(format!("padding {padding} must be smaller than kernel {kernel}")));
                }
                let (h, w) = (input.height + 2 * padding, input.width + 2 * padding);
                if h < kernel || w < kernel {
                    return Err(err(format!("kernel {kernel} larger than padded input {input}")));
                }
                Ok(Shape::new(h - kernel + 1, w - kernel + 1, out_channels))
            }
            LayerSpec::Maxpool2 => {
                if input.height < 2 || input.width < 2 {
                    return Err(err(format!("maxpool2 needs at least 2x2 input, got {input}")));
                }
                Ok(Shape::new(input.height / 2, input.width / 2, input.channels))
            }
            LayerSpec::Flatten => Ok(Shape::new(1, 1, input.len())),
            LayerSpec::Relu | LayerSpec::Softmax => Ok(input),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    #[default]
    Single,
    TruncatedHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

/// The on-disk manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Omitted for dense-first models, whose input is then `1 x inputs x 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    #[serde(default)]
    pub precision: Precision,
    pub layers: Vec<LayerSpec>,
}

impl Manifest {
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    spec: LayerSpec,
    input: Shape,
    output: Shape,
    weights: Vec<f32>,
    bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    name: Option<String>,
    input: Shape,
    num_classes: usize,
    precision: Precision,
    layers: Vec<Layer>,
}

/// Post-activation outputs of every layer for one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationProfile {
    pub per_layer: Vec<Vec<f32>>,
}

impl ActivationProfile {
    pub fn neuron_count(&self) -> usize {
        self.per_layer.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// Raw class scores. When the model ends in softmax these are the
    /// softmax inputs; the probabilities are the last profile layer.
    pub logits: Vec<f32>,
    pub profile: ActivationProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(pub usize);

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f32]) -> ClassLabel {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    ClassLabel(best)
}

impl Model {
    /// Validates a manifest against a flat parameter list.
    pub fn from_parts(manifest: Manifest, params: &[f32]) -> Result<Self, ModelError> {
        if manifest.layers.is_empty() {
            return Err(ModelError::Shape {
                layer: 0,
                reason: "manifest lists no layers".into(),
            });
        }
        let input = match (manifest.input, &manifest.layers[0]) {
            (Some(spec), _) => {
                if spec.height == 0 || spec.width == 0 || !matches!(spec.channels, 1 | 3) {
                    return Err(ModelError::Shape {
                        layer: 0,
                        reason: format!(
                            "invalid input shape {}x{}x{}",
                            spec.height, spec.width, spec.channels
                        ),
                    });
                }
                Shape::new(spec.height, spec.width, spec.channels)
            }
            (None, LayerSpec::Dense { inputs, .. }) => Shape::new(1, *inputs, 1),
            (None, _) => {
                return Err(ModelError::Shape {
                    layer: 0,
                    reason: "manifest needs an input shape unless the first layer is dense".into(),
                })
            }
        };

        let last = manifest.layers.len() - 1;
        let mut shape = input;
        let mut offset = 0;
        let mut layers = Vec::with_capacity(manifest.layers.len());
        for (index, spec) in manifest.layers.iter().enumerate() {
            if matches!(spec, LayerSpec::Softmax) && index != last {
                return Err(ModelError::Shape {
                    layer: index,
                    reason: "softmax is only allowed as the final layer".into(),
                });
            }
            let output = spec.output_shape(index, shape)?;
            let count = spec.param_count();
            if offset + count > params.len() {
                return Err(ModelError::Truncated {
                    layer: index,
                    expected: offset + count,
                    actual: params.len(),
                });
            }
            let slice = &params[offset..offset + count];
            if let Some(pos) = slice.iter().position(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite {
                    layer: index,
                    offset: offset + pos,
                });
            }
            let bias_len = match *spec {
                LayerSpec::Dense { outputs, .. } => outputs,
                LayerSpec::Conv2d { out_channels, .. } => out_channels,
                _ => 0,
            };
            let (weights, bias) = slice.split_at(count - bias_len);
            layers.push(Layer {
                spec: spec.clone(),
                input: shape,
                output,
                weights: weights.to_vec(),
                bias: bias.to_vec(),
            });
            offset += count;
            shape = output;
        }
        if offset != params.len() {
            return Err(ModelError::TrailingData {
                expected: offset,
                extra: params.len() - offset,
            });
        }
        let num_classes = shape.len();
        if let Some(declared) = manifest.num_classes {
            if declared != num_classes {
                return Err(ModelError::Shape {
                    layer: last,
                    reason: format!("final layer yields {num_classes} outputs, manifest declares {declared} classes"),
                });
            }
        }
        Ok(Self {
            name: manifest.name,
            input,
            num_classes,
            precision: manifest.precision,
            layers,
        })
    }

    pub fn load(manifest_path: impl AsRef<Path>, weights_path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let read = |p: &Path| {
            fs::read(p).map_err(|source| ModelError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let manifest: Manifest = serde_json::from_slice(&read(manifest_path.as_ref())?)?;
        let params = decode_params(&read(weights_path.as_ref())?)?;
        Self::from_parts(manifest, &params)
    }

    pub fn save(&self, manifest_path: impl AsRef<Path>, weights_path: impl AsRef<Path>) -> std::io::Result<()> {
        let manifest = serde_json::to_string_pretty(&self.manifest()).map_err(std::io::Error::other)?;
        fs::write(manifest_path, manifest + "\n")?;
        fs::write(weights_path, encode_params(&self.params()))
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            name: self.name.clone(),
            input: Some(InputSpec {
                height: self.input.height,
                width: self.input.width,
                channels: self.input.channels,
            }),
            num_classes: Some(self.num_classes),
            precision: self.precision,
            layers: self.layers.iter().map(|l| l.spec.clone()).collect(),
        }
    }

    /// All stored parameters in blob order.
    pub fn params(&self) -> Vec<f32> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn layer_specs(&self) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().map(|l| &l.spec)
    }

    /// Number of values each layer records in an [`ActivationProfile`].
    pub fn layer_widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.output.len()).collect()
    }

    /// Output shape of every recorded layer; dense outputs are `1x1xN`.
    pub fn layer_shapes(&self) -> Vec<Shape> {
        self.layers.iter().map(|l| l.output).collect()
    }

    /// Recorded layers that count as coverage neurons: all but a final
    /// softmax.
    pub fn coverage_mask(&self) -> Vec<bool> {
        self.layers
            .iter()
            .map(|l| !matches!(l.spec, LayerSpec::Softmax))
            .collect()
    }

    pub fn neuron_count(&self) -> usize {
        self.layer_widths().iter().sum()
    }

    pub fn forward(&self, input: &Image) -> Result<ForwardPass, ModelError> {
        if input.shape() != self.input {
            return Err(ModelError::InputShape {
                expected: self.input,
                actual: input.shape(),
            });
        }
        let mut current: Vec<f32> = input.data().to_vec();
        let mut per_layer = Vec::with_capacity(self.layers.len());
        let mut logits = None;
        for layer in &self.layers {
            let next = match layer.spec {
                LayerSpec::Dense { activation, .. } => {
                    let mut out = dense(&current, &layer.weights, &layer.bias);
                    apply(activation, &mut out);
                    out
                }
                LayerSpec::Conv2d {
                    kernel,
                    padding,
                    activation,
                    ..
                } => {
                    let geometry = ConvGeometry {
                        input: layer.input,
                        output: layer.output,
                        kernel,
                        padding,
                    };
                    let mut out = conv2d(&current, geometry, &layer.weights, &layer.bias);
                    apply(activation, &mut out);
                    out
                }
                LayerSpec::Relu => {
                    let mut out = current.clone();
                    apply(Activation::Relu, &mut out);
                    out
                }
                LayerSpec::Maxpool2 => maxpool2(&current, layer.input, layer.output),
                LayerSpec::Flatten => current.clone(),
                LayerSpec::Softmax => {
                    logits = Some(current.clone());
                    softmax(&current)
                }
            };
            per_layer.push(next.clone());
            current = next;
        }
        Ok(ForwardPass {
            logits: logits.unwrap_or(current),
            profile: ActivationProfile { per_layer },
        })
    }

    pub fn predict(&self, input: &Image) -> Result<ClassLabel, ModelError> {
        Ok(argmax(&self.forward(input)?.logits))
    }

    pub(crate) fn map_params<E>(
        &self,
        mut f: impl FnMut(usize, usize, f32) -> Result<f32, E>,
    ) -> Result<Self, E> {
        let mut out = self.clone();
        for (index, layer) in out.layers.iter_mut().enumerate() {
            for (i, w) in layer.weights.iter_mut().chain(layer.bias.iter_mut()).enumerate() {
                *w = f(index, i, *w)?;
            }
        }
        Ok(out)
    }

    pub(crate) fn set_precision(&mut self, precision: Precision) {
        self.precision = precision;
    }
}

fn apply(activation: Activation, values: &mut [f32]) {
    if activation == Activation::Relu {
        for v in values {
            *v = v.max(0.0);
        }
    }
}

fn dense(input: &[f32], weights: &[f32], bias: &[f32]) -> Vec<f32> {
    let n = input.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| {
            let row = &weights[o * n..(o + 1) * n];
            row.iter().zip(input).fold(b, |acc, (w, x)| acc + w * x)
        })
        .collect()
}

#[derive(Clone, Copy)]
struct ConvGeometry {
    input: Shape,
    output: Shape,
    kernel: usize,
    padding: usize,
}

/// Taps falling into the zero padding are skipped, so every output sums
/// its in-image taps in kernel-row, kernel-column, channel order.
fn conv2d(input: &[f32], g: ConvGeometry, weights: &[f32], bias: &[f32]) -> Vec<f32> {
    let (k, pad, in_c, out_c) = (g.kernel, g.padding, g.input.channels, g.output.channels);
    // `[ky][kx][ic][oc]` so the innermost loop runs over contiguous output
    // channels; each output still accumulates in the documented order.
    let mut taps_first = vec![0.0f32; weights.len()];
    for oc in 0..out_c {
        for ic in 0..in_c {
            for t in 0..k * k {
                taps_first[(t * in_c + ic) * out_c + oc] = weights[(oc * in_c + ic) * k * k + t];
            }
        }
    }
    // kernel taps of output coordinate `o` that land inside an input axis of length `len`
    let taps = |o: usize, len: usize| pad.saturating_sub(o)..k.min(len + pad - o);
    let mut out = vec![0.0f32; g.output.len()];
    for (pixel, acc) in out.chunks_exact_mut(out_c).enumerate() {
        let (y, x) = (pixel / g.output.width, pixel % g.output.width);
        acc.copy_from_slice(bias);
        for ky in taps(y, g.input.height) {
            let row = (y + ky - pad) * g.input.width;
            for kx in taps(x, g.input.width) {
                let px = (row + x + kx - pad) * in_c;
                let tap = &taps_first[(ky * k + kx) * in_c * out_c..][..in_c * out_c];
                for (&value, w) in input[px..px + in_c].iter().zip(tap.chunks_exact(out_c)) {
                    for (a, &w) in acc.iter_mut().zip(w) {
                        *a += w * value;
                    }
                }
            }
        }
    }
    out
}

fn maxpool2(input: &[f32], in_shape: Shape, out_shape: Shape) -> Vec<f32> {
    let c = in_shape.channels;
    let at = |y: usize, x: usize, ch: usize| input[(y * in_shape.width + x) * c + ch];
    let mut out = Vec::with_capacity(out_shape.len());
    for y in 0..out_shape.height {
        for x in 0..out_shape.width {
            for ch in 0..c {
                let (y0, x0) = (2 * y, 2 * x);
                out.push(
                    at(y0, x0, ch)
                        .max(at(y0, x0 + 1, ch))
                        .max(at(y0 + 1, x0, ch))
                        .max(at(y0 + 1, x0 + 1, ch)),
                );
            }
        }
    }
    out
}

fn softmax(values: &[f32]) -> Vec<f32> {
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f32 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

pub fn decode_params(bytes: &[u8]) -> Result<Vec<f32>, ModelError> {
    if !bytes.len().is_multiple_of(4) {
        return Err(ModelError::RaggedBlob(bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn encode_params(params: &[f32]) -> Vec<u8> {
    params.iter().flat_map(|v| v.to_le_bytes()).collect()
}
