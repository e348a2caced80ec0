use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::DataError;

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Standard deviation of the Gaussian noise injected at `ratio`:
/// `sigma_y * sqrt(ratio / (1 - ratio))`.
pub fn noise_scale(sigma_y: f64, ratio: f64) -> f64 {
    sigma_y * (ratio / (1.0 - ratio)).sqrt()
}

/// Perturbs every element of `y` with i.i.d. zero-mean Gaussian noise whose
/// standard deviation is `noise_scale(sample_std(y), ratio)`.
pub fn add_noise<R: Rng + ?Sized>(y: &[f64], ratio: f64, rng: &mut R) -> Result<Vec<f64>, DataError> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(DataError::InvalidRatio(ratio));
    }
    if y.len() < 2 {
        return Err(DataError::TooFewSamples);
    }
    if ratio == 0.0 {
        return Ok(y.to_vec());
    }
    let scale = noise_scale(sample_std(y), ratio);
    if scale == 0.0 {
        return Ok(y.to_vec());
    }
    let normal = Normal::new(0.0, scale).expect("finite positive scale");
    Ok(y.iter().map(|v| v + normal.sample(rng)).collect())
}
