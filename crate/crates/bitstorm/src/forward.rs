//! Forward pass for real and discrete-weight networks.
//!
//! Both weight types run through the same generic kernels with a fixed
//! accumulation order (channels outermost, then the receptive field
//! row-major, bias added last), so the multiplierless ternary path and the
//! naive multiply-accumulate reference produce identical results on the same
//! instance. Ternary weights accumulate with additions and subtractions
//! only; zero weights contribute nothing.

use crate::error::{Error, Result};
use crate::model::{DiscreteModelInstance, LayerParams, LayerSpec, NetworkModel};
use crate::tensor::{IntTensor, Tensor};

/// Per-class raw output scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    values: Vec<f64>,
}

impl Scores {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ShapeMismatch("empty score vector".into()));
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self { values })
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
}

/// Sign activation: +1 for x >= 0, -1 otherwise.
pub fn sign_act(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Rectified linear activation.
pub fn relu_act(x: f64) -> f64 {
    x.max(0.0)
}

/// Multiplierless dot product of a ternary weight vector with activations:
/// +a for weight +1, -a for weight -1, skip for 0. Matches the naive
/// multiply-accumulate exactly under the same accumulation order.
pub fn ternary_dot(weights: &[i8], activations: &[f64]) -> Result<f64> {
    if weights.len() != activations.len() {
        return Err(Error::ShapeMismatch(format!(
            "ternary_dot: {} weights vs {} activations",
            weights.len(),
            activations.len()
        )));
    }
    let mut acc = 0.0;
    for (&w, &a) in weights.iter().zip(activations) {
        acc = w.mac(acc, a);
    }
    Ok(acc)
}

/// One weight element: folds itself into a running accumulator.
pub(crate) trait WeightValue: Copy {
    fn mac(self, acc: f64, a: f64) -> f64;
}

impl WeightValue for f64 {
    #[inline]
    fn mac(self, acc: f64, a: f64) -> f64 {
        acc + self * a
    }
}

impl WeightValue for i8 {
    #[inline]
    fn mac(self, acc: f64, a: f64) -> f64 {
        match self {
            0 => acc,
            1 => acc + a,
            -1 => acc - a,
            _ => acc + self as f64 * a,
        }
    }
}

pub(crate) trait WeightStore {
    type Elem: WeightValue;
    fn shape(&self) -> &[usize];
    fn vals(&self) -> &[Self::Elem];
}

impl WeightStore for Tensor {
    type Elem = f64;
    fn shape(&self) -> &[usize] {
        Tensor::shape(self)
    }
    fn vals(&self) -> &[f64] {
        self.data()
    }
}

impl WeightStore for IntTensor {
    type Elem = i8;
    fn shape(&self) -> &[usize] {
        IntTensor::shape(self)
    }
    fn vals(&self) -> &[i8] {
        self.data()
    }
}

impl NetworkModel {
    /// Run the layer stack on one example (rank-1 features or rank-3
    /// channel-height-width image); returns the final layer output.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        run_layers(self.specs(), self.params(), input)
    }

    /// Forward and interpret the output as per-class scores.
    pub fn scores(&self, input: &Tensor) -> Result<Scores> {
        output_scores(self.class_count(), self.forward(input)?)
    }
}

impl DiscreteModelInstance {
    /// Multiplierless forward pass: ternary/binary weights accumulate with
    /// additions and subtractions only.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        run_layers(self.specs(), self.params(), input)
    }

    pub fn scores(&self, input: &Tensor) -> Result<Scores> {
        output_scores(self.class_count(), self.forward(input)?)
    }
}

fn output_scores(class_count: Option<usize>, out: Tensor) -> Result<Scores> {
    let classes = class_count.ok_or_else(|| {
        Error::ShapeMismatch("model has no square hinge output layer".into())
    })?;
    if out.shape() != [classes] {
        return Err(Error::ShapeMismatch(format!(
            "output shape {:?} is not [{classes}]",
            out.shape()
        )));
    }
    Scores::new(out.data().to_vec())
}

fn run_layers<S: WeightStore>(
    specs: &[LayerSpec],
    params: &[LayerParams<S>],
    input: &Tensor,
) -> Result<Tensor> {
    let mut cur = input.clone();
    for (i, (spec, p)) in specs.iter().zip(params).enumerate() {
        let dense = || match p {
            LayerParams::Dense { weights, bias } => Ok((weights, bias)),
            _ => Err(Error::ShapeMismatch(format!(
                "layer {i}: missing dense parameters"
            ))),
        };
        cur = match spec {
            LayerSpec::Conv3x3 { in_channels, .. } => {
                let (weights, bias) = dense()?;
                conv3x3_forward(weights, bias, &cur, *in_channels)
                    .map_err(|e| at_layer(i, e))?
            }
            LayerSpec::MaxPool2 => maxpool2_forward(&cur).map_err(|e| at_layer(i, e))?,
            LayerSpec::FullyConnected { in_features, .. } => {
                let (weights, bias) = dense()?;
                let flat = flatten_for_fc(&cur, *in_features).map_err(|e| at_layer(i, e))?;
                fc_forward(weights, bias, &flat)
            }
            LayerSpec::SignActivation => map_elementwise(&cur, sign_act),
            LayerSpec::ReluActivation => map_elementwise(&cur, relu_act),
            LayerSpec::BatchNormAffine { channels } => {
                let LayerParams::Affine { scale, shift } = p else {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {i}: missing affine parameters"
                    )));
                };
                affine_forward(&cur, scale, shift, *channels).map_err(|e| at_layer(i, e))?
            }
            LayerSpec::SquareHingeOutput { classes } => {
                if cur.shape() != [*classes] {
                    return Err(at_layer(
                        i,
                        Error::ShapeMismatch(format!(
                            "square hinge output expects [{classes}], got {:?}",
                            cur.shape()
                        )),
                    ));
                }
                cur
            }
        };
    }
    Ok(cur)
}

fn at_layer(i: usize, e: Error) -> Error {
    match e {
        Error::ShapeMismatch(msg) => Error::ShapeMismatch(format!("layer {i}: {msg}")),
        other => other,
    }
}

/// 3x3 convolution, zero padding 1, stride 1, shape-preserving.
/// Accumulation order per output: input channels, then kernel rows, then
/// kernel columns; bias added last. Padded taps are skipped (they contribute
/// exactly zero).
pub(crate) fn conv3x3_forward<S: WeightStore>(
    weights: &S,
    bias: &[f64],
    input: &Tensor,
    in_channels: usize,
) -> Result<Tensor> {
    let [c, h, w] = *input.shape() else {
        return Err(Error::ShapeMismatch(format!(
            "convolution input must be rank-3, got {:?}",
            input.shape()
        )));
    };
    if c != in_channels {
        return Err(Error::ShapeMismatch(format!(
            "convolution expects {in_channels} channels, input has {c}"
        )));
    }
    let out_channels = weights.shape()[0];
    let x = input.data();
    let wv = weights.vals();
    let mut out = vec![0.0f64; out_channels * h * w];
    for oc in 0..out_channels {
        let w_base = oc * in_channels * 9;
        for oy in 0..h {
            for ox in 0..w {
                let mut acc = 0.0;
                for ic in 0..in_channels {
                    let k_base = w_base + ic * 9;
                    let x_base = ic * h * w;
                    for ky in 0..3 {
                        let iy = oy + ky;
                        if iy < 1 || iy > h {
                            continue;
                        }
                        let iy = iy - 1;
                        for kx in 0..3 {
                            let ix = ox + kx;
                            if ix < 1 || ix > w {
                                continue;
                            }
                            let a = x[x_base + iy * w + (ix - 1)];
                            acc = wv[k_base + ky * 3 + kx].mac(acc, a);
                        }
                    }
                }
                out[(oc * h + oy) * w + ox] = acc + bias[oc];
            }
        }
    }
    Tensor::new(vec![out_channels, h, w], out)
}

/// 2x2 max pooling with stride 2; extents must be even.
pub(crate) fn maxpool2_forward(input: &Tensor) -> Result<Tensor> {
    let [c, h, w] = *input.shape() else {
        return Err(Error::ShapeMismatch(format!(
            "max pooling input must be rank-3, got {:?}",
            input.shape()
        )));
    };
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "max pooling over odd extent {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = vec![0.0f64; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let base = (ch * h + 2 * oy) * w + 2 * ox;
                let m = x[base]
                    .max(x[base + 1])
                    .max(x[base + w])
                    .max(x[base + w + 1]);
                out[(ch * oh + oy) * ow + ox] = m;
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// Fully connected layer: out[o] = sum_i w[o][i] * x[i] + bias[o], inputs
/// accumulated in index order.
pub(crate) fn fc_forward<S: WeightStore>(weights: &S, bias: &[f64], input: &Tensor) -> Tensor {
    let out_features = weights.shape()[0];
    let in_features = weights.shape()[1];
    let x = input.data();
    let wv = weights.vals();
    let mut out = vec![0.0f64; out_features];
    for (o, slot) in out.iter_mut().enumerate() {
        let row = &wv[o * in_features..(o + 1) * in_features];
        let mut acc = 0.0;
        for (wi, &a) in row.iter().zip(x) {
            acc = wi.mac(acc, a);
        }
        *slot = acc + bias[o];
    }
    Tensor::new(vec![out_features], out).expect("fc output is finite")
}

pub(crate) fn flatten_for_fc(input: &Tensor, in_features: usize) -> Result<Tensor> {
    if input.len() != in_features {
        return Err(Error::ShapeMismatch(format!(
            "fully connected layer expects {in_features} inputs, got {} (shape {:?})",
            input.len(),
            input.shape()
        )));
    }
    Ok(if input.shape().len() == 1 {
        input.clone()
    } else {
        input.flattened()
    })
}

pub(crate) fn map_elementwise(input: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(
        input.shape().to_vec(),
        input.data().iter().map(|&v| f(v)).collect(),
    )
    .expect("elementwise map preserves shape")
}

/// Per-channel affine y = scale[c] * x + shift[c]; rank-1 inputs treat each
/// feature as its own channel.
pub(crate) fn affine_forward(
    input: &Tensor,
    scale: &[f64],
    shift: &[f64],
    channels: usize,
) -> Result<Tensor> {
    match *input.shape() {
        [f] => {
            if f != channels {
                return Err(Error::ShapeMismatch(format!(
                    "affine over {channels} features, input has {f}"
                )));
            }
            Tensor::new(
                vec![f],
                input
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| scale[i] * v + shift[i])
                    .collect(),
            )
        }
        [c, h, w] => {
            if c != channels {
                return Err(Error::ShapeMismatch(format!(
                    "affine over {channels} channels, input has {c}"
                )));
            }
            let mut out = input.data().to_vec();
            for ch in 0..c {
                for v in &mut out[ch * h * w..(ch + 1) * h * w] {
                    *v = scale[ch] * *v + shift[ch];
                }
            }
            Tensor::new(vec![c, h, w], out)
        }
        _ => Err(Error::ShapeMismatch(format!(
            "affine input must be rank-1 or rank-3, got {:?}",
            input.shape()
        ))),
    }
}
