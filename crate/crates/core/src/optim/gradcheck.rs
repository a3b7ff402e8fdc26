use super::model::{Minibatch, Model};
use super::params::ParamVector;
use crate::error::{invalid, Result};

/// Largest relative disagreement between the analytic gradient and a
/// central finite difference with step `h`, taken over all coordinates:
/// `|a - d| / (|a| + |d| + 1e-12)`.
///
/// Perturbations are applied in f64 so the step is not swallowed by f32
/// rounding.
pub fn grad_check(model: &Model, x: &ParamVector, batch: &Minibatch, h: f64) -> Result<f64> {
    if !(1e-6..=1e-2).contains(&h) {
        return Err(invalid(format!(
            "finite-difference step must lie in [1e-6, 1e-2], got {h}"
        )));
    }
    // validates dimensions and labels
    model.loss(x, batch)?;
    let mut params: Vec<f64> = x.as_slice().iter().map(|&v| v as f64).collect();
    let mut analytic = vec![0.0; params.len()];
    model.evaluate(&params, batch, Some(&mut analytic));

    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h;
        let plus = model.evaluate(&params, batch, None);
        params[i] = orig - h;
        let minus = model.evaluate(&params, batch, None);
        params[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs() + 1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}
