//! Forecast error metrics.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("series length mismatch: actual {actual} vs forecast {forecast}")]
    LengthMismatch { actual: usize, forecast: usize },
    #[error("empty series")]
    Empty,
}

/// Root mean squared error between two equally long series, in the unit of
/// the inputs (vehicles/hour throughout this project).
pub fn rmse(actual: &[f64], forecast: &[f64]) -> Result<f64, MetricError> {
    if actual.len() != forecast.len() {
        return Err(MetricError::LengthMismatch {
            actual: actual.len(),
            forecast: forecast.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricError::Empty);
    }
    let sse: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f) * (a - f))
        .sum();
    Ok(libm::sqrt(sse / actual.len() as f64))
}
