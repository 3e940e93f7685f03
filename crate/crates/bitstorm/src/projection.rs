//! Stochastic projection of shadow weights onto discrete alphabets under
//! ideal randomness.
//!
//! Ternary projection stochastically rounds each clipped weight to a
//! neighboring integer: ceil(w) with probability |(floor(w) - w) /
//! (floor(w) - ceil(w))|, floor(w) otherwise, which makes the expectation
//! equal to w. Binary projection maps to +1 with probability (w + 1) / 2.
//! One uniform draw is consumed per weight in canonical order (layer order,
//! then row-major within the tensor), so a projection is fully determined by
//! the random stream that feeds it.

use crate::error::{Error, Result};
use crate::model::{
    DiscreteModelInstance, LayerParams, NetworkModel, ProjectionMode,
};
use crate::rng::RandomSource;
use crate::tensor::IntTensor;

/// Stochastic round to the integer grid. Integers are returned unchanged
/// without consuming randomness.
pub fn sround(w: f64, rng: &mut RandomSource) -> Result<i64> {
    if !w.is_finite() {
        return Err(Error::NonFinite(w));
    }
    let floor = w.floor();
    if floor == w {
        return Ok(w as i64);
    }
    // ceil - floor = 1 here, so p = |(floor - w)/(floor - ceil)| = w - floor.
    let p = w - floor;
    if rng.uniform() < p {
        Ok(floor as i64 + 1)
    } else {
        Ok(floor as i64)
    }
}

/// Expectation of a projection: clip(w) for both modes.
pub fn expected_projection(w: f64, _mode: ProjectionMode) -> Result<f64> {
    crate::qformat::clip(w)
}

/// Ternary projection of a whole model. Each layer consumes its own
/// substream (tagged with the layer index), so the result is independent of
/// how layers are scheduled across workers.
pub fn project_ternary(model: &NetworkModel, rng: &RandomSource) -> Result<DiscreteModelInstance> {
    project(model, ProjectionMode::Ternary, rng)
}

/// Binary projection: +1 with probability (w + 1) / 2, else -1.
pub fn project_binary(model: &NetworkModel, rng: &RandomSource) -> Result<DiscreteModelInstance> {
    project(model, ProjectionMode::Binary, rng)
}

pub fn project(
    model: &NetworkModel,
    mode: ProjectionMode,
    rng: &RandomSource,
) -> Result<DiscreteModelInstance> {
    let mut params = Vec::with_capacity(model.params().len());
    for (i, p) in model.params().iter().enumerate() {
        params.push(match p {
            LayerParams::None => LayerParams::None,
            LayerParams::Affine { scale, shift } => LayerParams::Affine {
                scale: scale.clone(),
                shift: shift.clone(),
            },
            LayerParams::Dense { weights, bias } => {
                let mut stream = rng.substream(i as u64);
                let data: Result<Vec<i8>> = weights
                    .data()
                    .iter()
                    .map(|&w| project_weight(w, mode, &mut stream))
                    .collect();
                LayerParams::Dense {
                    weights: IntTensor::new(weights.shape().to_vec(), data?)?,
                    bias: bias.clone(),
                }
            }
        });
    }
    DiscreteModelInstance::new(model.specs().to_vec(), params, mode)
}

fn project_weight(w: f64, mode: ProjectionMode, rng: &mut RandomSource) -> Result<i8> {
    debug_assert!(w.abs() <= 1.0, "shadow weight {w} outside [-1, 1]");
    match mode {
        ProjectionMode::Ternary => Ok(sround(w, rng)? as i8),
        ProjectionMode::Binary => {
            let p_plus = (w + 1.0) / 2.0;
            Ok(if rng.uniform() < p_plus { 1 } else { -1 })
        }
    }
}
