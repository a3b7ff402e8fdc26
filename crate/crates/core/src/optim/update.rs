use super::params::{check_finite, validate_alpha, ParamVector};
use crate::error::{invalid, Result};

/// One plain SGD step: `x - eta * grad`.
pub fn sgd_step(x: &ParamVector, grad: &ParamVector, eta: f64) -> Result<ParamVector> {
    grad.ensure_dim(x.dim())?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(invalid(format!("eta must be positive, got {eta}")));
    }
    let eta = eta as f32;
    let out: Vec<f32> = x
        .as_slice()
        .iter()
        .zip(grad.as_slice())
        .map(|(&xi, &gi)| xi - eta * gi)
        .collect();
    check_finite(&out)?;
    Ok(ParamVector::from_vec_unchecked(out))
}

/// Elastic update of one worker/master element pair.
///
/// Both sides move by the same rounded step, so the sum changes only by the
/// rounding of the two final additions.
#[inline]
pub fn elastic_pair(worker: f32, master: f32, alpha: f32) -> (f32, f32) {
    let step = alpha * (worker - master);
    (worker - step, master + step)
}

/// Elastic averaging: each side moves toward the other by `alpha` times
/// their difference. Returns `(worker', master')`.
pub fn easgd_update(
    worker: &ParamVector,
    master: &ParamVector,
    alpha: f32,
) -> Result<(ParamVector, ParamVector)> {
    master.ensure_dim(worker.dim())?;
    validate_alpha(alpha as f64)?;
    let (w, m): (Vec<f32>, Vec<f32>) = worker
        .as_slice()
        .iter()
        .zip(master.as_slice())
        .map(|(&w, &m)| elastic_pair(w, m, alpha))
        .unzip();
    check_finite(&w)?;
    check_finite(&m)?;
    Ok((
        ParamVector::from_vec_unchecked(w),
        ParamVector::from_vec_unchecked(m),
    ))
}
