use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dnn,
    Cnn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dnn => "dnn",
            Self::Cnn => "cnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dnn" => Ok(Self::Dnn),
            "cnn" => Ok(Self::Cnn),
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    Relu,
    BatchNorm1d { features: usize, epsilon: f64, momentum: f64 },
    Dropout { rate: f64 },
    Conv1d { in_channels: usize, out_channels: usize, kernel: usize, stride: usize },
    Flatten,
}

pub const BATCHNORM_EPSILON: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.1;
pub const DNN_DROPOUT: f64 = 0.3;
/// Shortest sequence the CNN accepts; narrower inputs are zero-padded.
pub const CNN_MIN_WIDTH: usize = 4;

/// Activation shape of one sample between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Flat(usize),
    Seq { channels: usize, length: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    kind: ModelKind,
    layers: Vec<LayerSpec>,
    input_width: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_width: usize) -> Self {
        match kind {
            ModelKind::Dnn => Self::dnn(input_width),
            ModelKind::Cnn => Self::cnn(input_width),
        }
    }

    /// Dense(d,64), ReLU, BN(64), Dense(64,64), ReLU, BN(64), Dropout(0.3), Dense(64,1).
    pub fn dnn(input_width: usize) -> Self {
        let bn = LayerSpec::BatchNorm1d { features: 64, epsilon: BATCHNORM_EPSILON, momentum: BATCHNORM_MOMENTUM };
        Self {
            kind: ModelKind::Dnn,
            layers: vec![
                LayerSpec::Dense { inputs: input_width, outputs: 64 },
                LayerSpec::Relu,
                bn.clone(),
                LayerSpec::Dense { inputs: 64, outputs: 64 },
                LayerSpec::Relu,
                bn,
                LayerSpec::Dropout { rate: DNN_DROPOUT },
                LayerSpec::Dense { inputs: 64, outputs: 1 },
            ],
            input_width,
        }
    }

    /// Conv1d(1,16,k3), ReLU, Conv1d(16,4,k2), ReLU, Flatten,
    /// Dense(4*(d'-3),50), ReLU, Dense(50,1) with `d' = max(d, 4)`.
    pub fn cnn(input_width: usize) -> Self {
        Self {
            kind: ModelKind::Cnn,
            layers: vec![
                LayerSpec::Conv1d { in_channels: 1, out_channels: 16, kernel: 3, stride: 1 },
                LayerSpec::Relu,
                LayerSpec::Conv1d { in_channels: 16, out_channels: 4, kernel: 2, stride: 1 },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: cnn_flatten_width(input_width), outputs: 50 },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: 50, outputs: 1 },
            ],
            input_width,
        }
    }

    /// An arbitrary layer stack, checked for shape consistency. Stacks that
    /// start with a convolution see each row as a one-channel sequence.
    pub fn custom(kind: ModelKind, layers: Vec<LayerSpec>, input_width: usize) -> Result<Self, NetError> {
        let spec = Self { kind, layers, input_width };
        spec.output_shape()?;
        Ok(spec)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    /// Whether rows are fed as `(1, length)` sequences.
    pub fn sequence_input(&self) -> bool {
        matches!(self.layers.first(), Some(LayerSpec::Conv1d { .. }))
    }

    /// Padded sequence length for sequence inputs.
    pub fn sequence_length(&self) -> usize {
        match self.kind {
            ModelKind::Cnn => self.input_width.max(CNN_MIN_WIDTH),
            ModelKind::Dnn => self.input_width,
        }
    }

    fn output_shape(&self) -> Result<usize, NetError> {
        let bad = |i: usize, msg: String| NetError::ShapeMismatch(format!("layer {i}: {msg}"));
        let mut shape = if self.sequence_input() {
            Shape::Seq { channels: 1, length: self.sequence_length() }
        } else {
            Shape::Flat(self.input_width)
        };
        for (i, layer) in self.layers.iter().enumerate() {
            shape = match (layer, shape) {
                (LayerSpec::Dense { inputs, outputs }, Shape::Flat(w)) if *inputs == w => Shape::Flat(*outputs),
                (LayerSpec::BatchNorm1d { features, epsilon, momentum }, Shape::Flat(w)) if *features == w => {
                    if epsilon.is_nan() || *epsilon <= 0.0 || !(0.0..=1.0).contains(momentum) {
                        return Err(bad(i, "batchnorm needs epsilon > 0 and momentum in [0, 1]".into()));
                    }
                    shape
                }
                (LayerSpec::Dropout { rate }, s) => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(bad(i, format!("dropout rate {rate} not in [0, 1)")));
                    }
                    s
                }
                (LayerSpec::Relu, s) => s,
                (LayerSpec::Conv1d { in_channels, out_channels, kernel, stride }, Shape::Seq { channels, length })
                    if *in_channels == channels =>
                {
                    if *kernel == 0 || *stride == 0 || length < *kernel {
                        return Err(bad(i, format!("conv kernel {kernel} stride {stride} on length {length}")));
                    }
                    Shape::Seq { channels: *out_channels, length: (length - kernel) / stride + 1 }
                }
                (LayerSpec::Flatten, Shape::Seq { channels, length }) => Shape::Flat(channels * length),
                (l, s) => return Err(bad(i, format!("{l:?} cannot follow activation shape {s:?}"))),
            };
        }
        match shape {
            Shape::Flat(1) => Ok(1),
            other => Err(NetError::ShapeMismatch(format!("model must end in a single output, got {other:?}"))),
        }
    }
}

/// Dense input width after the CNN's convolutions and flatten.
pub fn cnn_flatten_width(input_width: usize) -> usize {
    4 * (input_width.max(CNN_MIN_WIDTH) - 3)
}
