use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{HarnessError, Result};

/// Window used for every reported moving average.
pub const MA_WINDOW: usize = 10;

/// Centred moving average with edge replication. The `window − 1` padding
/// values are split as evenly as possible; the front gets the extra one.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(HarnessError::Empty("moving average input"));
    }
    if window == 0 {
        return Err(HarnessError::Config("moving average window must be >= 1".into()));
    }
    let pad = window - 1;
    let front = pad.div_ceil(2);
    let back = pad / 2;
    let first = values[0];
    let last = values[values.len() - 1];
    let padded: Vec<f64> = std::iter::repeat_n(first, front)
        .chain(values.iter().copied())
        .chain(std::iter::repeat_n(last, back))
        .collect();
    Ok(padded.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect())
}

/// Mean, final-10 and best of the 10-episode moving average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean_ma: f64,
    pub final10_ma: f64,
    pub best_max_ma: f64,
}

pub fn summarize(series: &[f64]) -> Result<Summary> {
    if series.len() < MA_WINDOW {
        return Err(HarnessError::ShortSeries { len: series.len(), need: MA_WINDOW });
    }
    let ma = moving_average(series, MA_WINDOW)?;
    let tail = &ma[ma.len() - MA_WINDOW..];
    Ok(Summary {
        mean_ma: mean(&ma),
        final10_ma: mean(tail),
        best_max_ma: ma.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator); zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// One-sided paired t-test of `H₁: mean(a − b) > 0`; returns the p-value.
/// Degenerate samples (zero spread) give 0 or 1 by the sign of the mean.
pub fn paired_t_test_greater(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(HarnessError::Config("paired test needs two equal samples of length >= 2".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (m, s) = (mean(&d), std_dev(&d));
    if s == 0.0 {
        return Ok(if m > 0.0 { 0.0 } else { 1.0 });
    }
    let t = m / (s / (d.len() as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (d.len() - 1) as f64).expect("valid degrees of freedom");
    Ok(1.0 - dist.cdf(t))
}
