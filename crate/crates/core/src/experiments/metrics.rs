use crate::error::{Error, Result};
use crate::model::image::check_len;

pub const DEFAULT_LOG_FLOOR: f64 = 1e-8;

/// `100 * mean (ln max(est, floor) - ln truth)^2` over bins with
/// `truth > floor`.
pub fn log_mse(est: &[f64], truth: &[f64], floor: f64) -> Result<f64> {
    check_len("estimate", est.len(), truth.len())?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (e, t) in est.iter().zip(truth) {
        if *t > floor {
            sum += (e.max(floor).ln() - t.ln()).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("every truth bin is below the floor".into()));
    }
    Ok(100.0 * sum / count as f64)
}

/// Floored natural log, as used inside the metric.
pub fn floored_log(v: &[f64], floor: f64) -> Vec<f64> {
    v.iter().map(|x| x.max(floor).ln()).collect()
}
