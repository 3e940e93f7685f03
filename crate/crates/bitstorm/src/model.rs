//! Network description: layer specs, high-precision shadow weights, and
//! discrete (projected) instances.
//!
//! Layer vocabulary is fixed: 3x3 same-padding convolutions, 2x2 max
//! pooling, fully connected layers, sign/ReLU activations, folded per-channel
//! affine batch norm, and a square-hinge output marker that carries the class
//! count. Topologies like `128C3-128C3-MP2-...-1024FC-10SVM` are parsed by
//! [`parse_arch`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qformat::clip;
use crate::rng::RandomSource;
use crate::tensor::{IntTensor, Tensor};

/// Projection alphabet for discrete weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    Ternary,
    Binary,
}

impl ProjectionMode {
    pub fn contains(self, v: i8) -> bool {
        match self {
            ProjectionMode::Ternary => matches!(v, -1 | 0 | 1),
            ProjectionMode::Binary => matches!(v, -1 | 1),
        }
    }
}

impl std::fmt::Display for ProjectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProjectionMode::Ternary => write!(f, "ternary"),
            ProjectionMode::Binary => write!(f, "binary"),
        }
    }
}

/// Layer kind plus its extents. Convolutions are fixed to 3x3 kernels,
/// padding 1, stride 1; pooling is fixed to 2x2 receptive field, stride 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv3x3 {
        in_channels: usize,
        out_channels: usize,
    },
    MaxPool2,
    FullyConnected {
        in_features: usize,
        out_features: usize,
    },
    SignActivation,
    ReluActivation,
    BatchNormAffine {
        channels: usize,
    },
    SquareHingeOutput {
        classes: usize,
    },
}

impl LayerSpec {
    /// Shape of the weight tensor this layer carries, if any.
    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match self {
            LayerSpec::Conv3x3 {
                in_channels,
                out_channels,
            } => Some(vec![*out_channels, *in_channels, 3, 3]),
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            } => Some(vec![*out_features, *in_features]),
            _ => None,
        }
    }

    pub fn bias_len(&self) -> Option<usize> {
        match self {
            LayerSpec::Conv3x3 { out_channels, .. } => Some(*out_channels),
            LayerSpec::FullyConnected { out_features, .. } => Some(*out_features),
            _ => None,
        }
    }

    pub fn has_weights(&self) -> bool {
        self.weight_shape().is_some()
    }
}

/// Parameters attached to one layer. `W` is the weight storage: [`Tensor`]
/// for shadow weights, [`IntTensor`] for projected instances. Biases and
/// batch-norm affine parameters stay real in both cases; they are never
/// projected.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<W> {
    None,
    Dense { weights: W, bias: Vec<f64> },
    Affine { scale: Vec<f64>, shift: Vec<f64> },
}

impl<W> LayerParams<W> {
    pub fn weights(&self) -> Option<&W> {
        match self {
            LayerParams::Dense { weights, .. } => Some(weights),
            _ => None,
        }
    }
}

fn check_params_shape<W>(
    index: usize,
    spec: &LayerSpec,
    params: &LayerParams<W>,
    shape_of: impl Fn(&W) -> Vec<usize>,
) -> Result<()> {
    match (spec.weight_shape(), params) {
        (Some(expected), LayerParams::Dense { weights, bias }) => {
            let got = shape_of(weights);
            if got != expected {
                return Err(Error::ShapeMismatch(format!(
                    "layer {index}: weight shape {got:?} does not match spec {expected:?}"
                )));
            }
            let expected_bias = spec.bias_len().unwrap();
            if bias.len() != expected_bias {
                return Err(Error::ShapeMismatch(format!(
                    "layer {index}: bias length {} does not match {expected_bias}",
                    bias.len()
                )));
            }
            if let Some(&bad) = bias.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(bad));
            }
            Ok(())
        }
        (None, LayerParams::None) => match (spec, params) {
            (LayerSpec::BatchNormAffine { .. }, _) => Err(Error::ShapeMismatch(format!(
                "layer {index}: batch norm layer requires affine parameters"
            ))),
            _ => Ok(()),
        },
        (None, LayerParams::Affine { scale, shift }) => {
            let LayerSpec::BatchNormAffine { channels } = spec else {
                return Err(Error::ShapeMismatch(format!(
                    "layer {index}: affine parameters attached to a non-batch-norm layer"
                )));
            };
            if scale.len() != *channels || shift.len() != *channels {
                return Err(Error::ShapeMismatch(format!(
                    "layer {index}: affine parameter length {}/{} does not match {channels} channels",
                    scale.len(),
                    shift.len()
                )));
            }
            if let Some(&bad) = scale.iter().chain(shift.iter()).find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(bad));
            }
            Ok(())
        }
        _ => Err(Error::ShapeMismatch(format!(
            "layer {index}: parameter kind does not match layer kind"
        ))),
    }
}

/// Adjacent-layer consistency that is checkable without knowing the input
/// shape. Full shape checking happens again during a forward pass.
fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    #[derive(Clone, Copy)]
    enum State {
        Start,
        Channels(usize),
        Features(usize),
    }
    let mut state = State::Start;
    for (i, spec) in specs.iter().enumerate() {
        let mismatch = |msg: String| Err(Error::ShapeMismatch(format!("layer {i}: {msg}")));
        match spec {
            LayerSpec::Conv3x3 {
                in_channels,
                out_channels,
            } => {
                if *in_channels == 0 || *out_channels == 0 {
                    return mismatch("zero channel count".into());
                }
                if let State::Channels(c) = state {
                    if c != *in_channels {
                        return mismatch(format!(
                            "conv expects {in_channels} input channels, previous layer yields {c}"
                        ));
                    }
                }
                if let State::Features(_) = state {
                    return mismatch("convolution after a fully connected layer".into());
                }
                state = State::Channels(*out_channels);
            }
            LayerSpec::MaxPool2 => {
                if let State::Features(_) = state {
                    return mismatch("max pooling after a fully connected layer".into());
                }
            }
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            } => {
                if *in_features == 0 || *out_features == 0 {
                    return mismatch("zero feature count".into());
                }
                if let State::Features(f) = state {
                    if f != *in_features {
                        return mismatch(format!(
                            "fc expects {in_features} inputs, previous layer yields {f}"
                        ));
                    }
                }
                state = State::Features(*out_features);
            }
            LayerSpec::BatchNormAffine { channels } => match state {
                State::Channels(c) if c != *channels => {
                    return mismatch(format!(
                        "batch norm over {channels} channels, previous layer yields {c}"
                    ));
                }
                State::Features(f) if f != *channels => {
                    return mismatch(format!(
                        "batch norm over {channels} features, previous layer yields {f}"
                    ));
                }
                _ => {}
            },
            LayerSpec::SquareHingeOutput { classes } => {
                if *classes == 0 {
                    return mismatch("zero class count".into());
                }
                if i + 1 != specs.len() {
                    return mismatch("square hinge output must be the final layer".into());
                }
                if let State::Features(f) = state {
                    if f != *classes {
                        return mismatch(format!(
                            "square hinge output expects {classes} scores, previous layer yields {f}"
                        ));
                    }
                }
            }
            LayerSpec::SignActivation | LayerSpec::ReluActivation => {}
        }
    }
    Ok(())
}

/// High-precision model: layer specs plus real shadow weights, every weight
/// in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    specs: Vec<LayerSpec>,
    params: Vec<LayerParams<Tensor>>,
}

impl NetworkModel {
    /// Build from specs and already-clipped parameters.
    pub fn new(specs: Vec<LayerSpec>, params: Vec<LayerParams<Tensor>>) -> Result<Self> {
        if specs.len() != params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} layer specs but {} parameter sets",
                specs.len(),
                params.len()
            )));
        }
        check_chain(&specs)?;
        for (i, (spec, p)) in specs.iter().zip(&params).enumerate() {
            check_params_shape(i, spec, p, |t: &Tensor| t.shape().to_vec())?;
        }
        let model = Self { specs, params };
        if model.max_abs_weight() > 1.0 {
            return Err(Error::Config(
                "shadow weights outside [-1, 1]; clip before constructing".into(),
            ));
        }
        Ok(model)
    }

    /// Build, clipping weights into [-1, 1]; returns how many values the
    /// clip altered. Non-finite weights are rejected by `Tensor` upstream.
    pub fn new_clipped(
        specs: Vec<LayerSpec>,
        mut params: Vec<LayerParams<Tensor>>,
    ) -> Result<(Self, usize)> {
        let mut clipped = 0usize;
        for p in &mut params {
            if let LayerParams::Dense { weights, .. } = p {
                for w in weights.data_mut() {
                    let c = clip(*w)?;
                    if c != *w {
                        clipped += 1;
                        *w = c;
                    }
                }
            }
        }
        let model = Self::new(specs, params)?;
        Ok((model, clipped))
    }

    /// Random initialization: weights uniform in [-s, s] with
    /// s = sqrt(6 / (fan_in + fan_out)), then clipped; biases zero;
    /// batch-norm affine set to identity.
    pub fn init_random(specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        check_chain(&specs)?;
        let root = RandomSource::new(seed, 0);
        let mut params = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            params.push(match spec {
                LayerSpec::Conv3x3 {
                    in_channels,
                    out_channels,
                } => {
                    let fan_in = in_channels * 9;
                    let fan_out = out_channels * 9;
                    init_dense(spec, fan_in, fan_out, &mut root.substream(i as u64))?
                }
                LayerSpec::FullyConnected {
                    in_features,
                    out_features,
                } => init_dense(spec, *in_features, *out_features, &mut root.substream(i as u64))?,
                LayerSpec::BatchNormAffine { channels } => LayerParams::Affine {
                    scale: vec![1.0; *channels],
                    shift: vec![0.0; *channels],
                },
                _ => LayerParams::None,
            });
        }
        Self::new(specs, params)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[LayerParams<Tensor>] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [LayerParams<Tensor>] {
        &mut self.params
    }

    /// Class count from the terminal square hinge layer, if present.
    pub fn class_count(&self) -> Option<usize> {
        match self.specs.last() {
            Some(LayerSpec::SquareHingeOutput { classes }) => Some(*classes),
            _ => None,
        }
    }

    /// Largest |w| over all shadow weights; <= 1 by invariant.
    pub fn max_abs_weight(&self) -> f64 {
        self.params
            .iter()
            .filter_map(|p| p.weights())
            .fold(0.0, |m, t| m.max(t.max_abs()))
    }

    pub fn weight_count(&self) -> usize {
        self.params.iter().filter_map(|p| p.weights()).map(Tensor::len).sum()
    }
}

fn init_dense(
    spec: &LayerSpec,
    fan_in: usize,
    fan_out: usize,
    rng: &mut RandomSource,
) -> Result<LayerParams<Tensor>> {
    let shape = spec.weight_shape().unwrap();
    let n: usize = shape.iter().product();
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data: Vec<f64> = (0..n)
        .map(|_| (rng.uniform() * 2.0 - 1.0) * s)
        .map(|w| w.clamp(-1.0, 1.0))
        .collect();
    Ok(LayerParams::Dense {
        weights: Tensor::new(shape, data)?,
        bias: vec![0.0; spec.bias_len().unwrap()],
    })
}

/// One stochastic projection of a model: integer weights in the mode's
/// alphabet, everything else copied from the shadow model.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModelInstance {
    specs: Vec<LayerSpec>,
    params: Vec<LayerParams<IntTensor>>,
    mode: ProjectionMode,
}

impl DiscreteModelInstance {
    pub fn new(
        specs: Vec<LayerSpec>,
        params: Vec<LayerParams<IntTensor>>,
        mode: ProjectionMode,
    ) -> Result<Self> {
        if specs.len() != params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} layer specs but {} parameter sets",
                specs.len(),
                params.len()
            )));
        }
        check_chain(&specs)?;
        for (i, (spec, p)) in specs.iter().zip(&params).enumerate() {
            check_params_shape(i, spec, p, |t: &IntTensor| t.shape().to_vec())?;
            if let LayerParams::Dense { weights, .. } = p {
                if let Some(&bad) = weights.data().iter().find(|&&v| !mode.contains(v)) {
                    return Err(Error::Config(format!(
                        "layer {i}: weight value {bad} outside the {mode} alphabet"
                    )));
                }
            }
        }
        Ok(Self {
            specs,
            params,
            mode,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[LayerParams<IntTensor>] {
        &self.params
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn class_count(&self) -> Option<usize> {
        match self.specs.last() {
            Some(LayerSpec::SquareHingeOutput { classes }) => Some(*classes),
            _ => None,
        }
    }

    /// Widen the discrete weights to a real-weight model. Values are exactly
    /// representable, so forwading the result reproduces this instance's
    /// outputs when the same accumulation order is used.
    pub fn to_network_model(&self) -> NetworkModel {
        let params = self
            .params
            .iter()
            .map(|p| match p {
                LayerParams::None => LayerParams::None,
                LayerParams::Dense { weights, bias } => LayerParams::Dense {
                    weights: weights.to_real(),
                    bias: bias.clone(),
                },
                LayerParams::Affine { scale, shift } => LayerParams::Affine {
                    scale: scale.clone(),
                    shift: shift.clone(),
                },
            })
            .collect();
        NetworkModel {
            specs: self.specs.clone(),
            params,
        }
    }
}

const MAX_EXTENT: usize = 1 << 16;

/// Parse a compact topology string like `"32FC-sign-16FC-sign-2SVM"` or
/// `"128C3-128C3-MP2-256C3-...-10SVM"` against a known input shape
/// (`[channels, height, width]` or `[features]`). `nSVM` expands to a fully
/// connected layer with `n` outputs followed by the square hinge output
/// marker. Separators may be `-` or `--`; tokens are case-insensitive.
pub fn parse_arch(arch: &str, input_shape: &[usize]) -> Result<Vec<LayerSpec>> {
    #[derive(Clone, Copy)]
    enum Shape {
        Image { c: usize, h: usize, w: usize },
        Flat(usize),
    }
    let err = |msg: String| Error::Config(format!("architecture '{arch}': {msg}"));

    let mut shape = match input_shape {
        [f] if *f > 0 => Shape::Flat(*f),
        [c, h, w] if *c > 0 && *h > 0 && *w > 0 => Shape::Image {
            c: *c,
            h: *h,
            w: *w,
        },
        other => {
            return Err(err(format!(
                "input shape {other:?} must be [features] or [channels, height, width]"
            )))
        }
    };
    let flat = |s: Shape| -> Result<usize> {
        match s {
            Shape::Flat(f) => Ok(f),
            Shape::Image { c, h, w } => c
                .checked_mul(h)
                .and_then(|v| v.checked_mul(w))
                .ok_or_else(|| err("flattened size overflows".into())),
        }
    };

    let mut specs = Vec::new();
    let tokens: Vec<&str> = arch.split('-').filter(|t| !t.is_empty()).collect();
    if tokens.is_empty() {
        return Err(err("no layers".into()));
    }
    for (i, token) in tokens.iter().enumerate() {
        let lower = token.to_ascii_lowercase();
        let last = i + 1 == tokens.len();
        if let Some(LayerSpec::SquareHingeOutput { .. }) = specs.last() {
            return Err(err("tokens after the SVM output layer".into()));
        }
        match lower.as_str() {
            "mp2" => {
                let Shape::Image { c, h, w } = shape else {
                    return Err(err(format!("token {}: MP2 needs an image input", i + 1)));
                };
                if h % 2 != 0 || w % 2 != 0 {
                    return Err(err(format!(
                        "token {}: MP2 over odd extent {h}x{w}",
                        i + 1
                    )));
                }
                specs.push(LayerSpec::MaxPool2);
                shape = Shape::Image {
                    c,
                    h: h / 2,
                    w: w / 2,
                };
            }
            "sign" => specs.push(LayerSpec::SignActivation),
            "relu" => specs.push(LayerSpec::ReluActivation),
            "bn" => {
                let channels = match shape {
                    Shape::Image { c, .. } => c,
                    Shape::Flat(f) => f,
                };
                specs.push(LayerSpec::BatchNormAffine { channels });
            }
            _ => {
                let (digits, suffix) = lower.split_at(
                    lower
                        .find(|ch: char| !ch.is_ascii_digit())
                        .unwrap_or(lower.len()),
                );
                let n: usize = digits
                    .parse()
                    .map_err(|_| err(format!("token {}: unrecognized '{token}'", i + 1)))?;
                if n == 0 || n > MAX_EXTENT {
                    return Err(err(format!(
                        "token {}: extent {n} out of range 1..={MAX_EXTENT}",
                        i + 1
                    )));
                }
                match suffix {
                    "c3" => {
                        let Shape::Image { c, h, w } = shape else {
                            return Err(err(format!(
                                "token {}: C3 needs an image input",
                                i + 1
                            )));
                        };
                        specs.push(LayerSpec::Conv3x3 {
                            in_channels: c,
                            out_channels: n,
                        });
                        shape = Shape::Image { c: n, h, w };
                    }
                    "fc" => {
                        let in_features = flat(shape)?;
                        specs.push(LayerSpec::FullyConnected {
                            in_features,
                            out_features: n,
                        });
                        shape = Shape::Flat(n);
                    }
                    "svm" => {
                        if !last {
                            return Err(err(format!(
                                "token {}: SVM must be the final layer",
                                i + 1
                            )));
                        }
                        let in_features = flat(shape)?;
                        specs.push(LayerSpec::FullyConnected {
                            in_features,
                            out_features: n,
                        });
                        specs.push(LayerSpec::SquareHingeOutput { classes: n });
                        shape = Shape::Flat(n);
                    }
                    _ => return Err(err(format!("token {}: unrecognized '{token}'", i + 1))),
                }
            }
        }
    }
    check_chain(&specs)?;
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_toy_mlp() {
        let specs = parse_arch("32FC-sign-16FC-sign-2SVM", &[2]).unwrap();
        assert_eq!(
            specs,
            vec![
                LayerSpec::FullyConnected {
                    in_features: 2,
                    out_features: 32
                },
                LayerSpec::SignActivation,
                LayerSpec::FullyConnected {
                    in_features: 32,
                    out_features: 16
                },
                LayerSpec::SignActivation,
                LayerSpec::FullyConnected {
                    in_features: 16,
                    out_features: 2
                },
                LayerSpec::SquareHingeOutput { classes: 2 },
            ]
        );
    }

    #[test]
    fn parse_paper_scale_convnet() {
        let arch = "128C3--128C3--MP2--256C3--256C3--MP2--512C3--512C3--MP2--1024FC--1024FC--10SVM";
        let specs = parse_arch(arch, &[3, 32, 32]).unwrap();
        assert_eq!(specs.len(), 12);
        assert_eq!(
            specs[9],
            LayerSpec::FullyConnected {
                in_features: 512 * 4 * 4,
                out_features: 1024
            }
        );
        assert_eq!(specs[11], LayerSpec::SquareHingeOutput { classes: 10 });
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(parse_arch("", &[2]).is_err());
        assert!(parse_arch("8C3", &[2]).is_err()); // conv on flat input
        assert!(parse_arch("2SVM-sign", &[2]).is_err()); // svm not last
        assert!(parse_arch("0FC", &[2]).is_err());
        assert!(parse_arch("banana", &[2]).is_err());
        assert!(parse_arch("MP2", &[1, 3, 3]).is_err()); // odd pooling
        assert!(parse_arch("4FC", &[]).is_err());
    }

    #[test]
    fn init_random_is_clipped_and_deterministic() {
        let specs = parse_arch("32FC-sign-2SVM", &[2]).unwrap();
        let a = NetworkModel::init_random(specs.clone(), 9).unwrap();
        let b = NetworkModel::init_random(specs, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.max_abs_weight() <= 1.0);
        assert_eq!(a.class_count(), Some(2));
    }

    #[test]
    fn new_rejects_shape_mismatch() {
        let specs = vec![LayerSpec::FullyConnected {
            in_features: 2,
            out_features: 3,
        }];
        let params = vec![LayerParams::Dense {
            weights: Tensor::zeros(vec![3, 3]),
            bias: vec![0.0; 3],
        }];
        assert!(NetworkModel::new(specs, params).is_err());
    }

    #[test]
    fn new_clipped_counts_alterations() {
        let specs = vec![LayerSpec::FullyConnected {
            in_features: 2,
            out_features: 1,
        }];
        let params = vec![LayerParams::Dense {
            weights: Tensor::new(vec![1, 2], vec![1.5, 0.25]).unwrap(),
            bias: vec![0.0],
        }];
        let (model, clipped) = NetworkModel::new_clipped(specs, params).unwrap();
        assert_eq!(clipped, 1);
        assert_eq!(model.max_abs_weight(), 1.0);
    }

    #[test]
    fn discrete_instance_checks_alphabet() {
        let specs = vec![LayerSpec::FullyConnected {
            in_features: 2,
            out_features: 1,
        }];
        let params = vec![LayerParams::Dense {
            weights: IntTensor::new(vec![1, 2], vec![0, 1]).unwrap(),
            bias: vec![0.0],
        }];
        assert!(DiscreteModelInstance::new(
            specs.clone(),
            params.clone(),
            ProjectionMode::Binary
        )
        .is_err());
        assert!(DiscreteModelInstance::new(specs, params, ProjectionMode::Ternary).is_ok());
    }

    #[test]
    fn chain_mismatch_detected() {
        let specs = vec![
            LayerSpec::FullyConnected {
                in_features: 2,
                out_features: 4,
            },
            LayerSpec::FullyConnected {
                in_features: 5,
                out_features: 2,
            },
        ];
        assert!(check_chain(&specs).is_err());
    }
}
